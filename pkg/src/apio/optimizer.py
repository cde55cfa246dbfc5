"""Beam-search optimization of instruction-list prompts.

Each epoch expands every pool member through three operators - improve
(append one LLM-proposed instruction targeting observed errors), rephrase
(one variation per instruction position), permute (seeded reorder of
selected positions) - scores the children on a fixed dev subsample, and
keeps the best ``beam_b`` candidates. Fitness is the negated mean
word-level Levenshtein distance to the nearest reference minus a
normalized prompt-drift penalty against the immediate parent, so the best
member is never evicted and best-pool fitness is non-decreasing.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from .corpus import SamplePair
from .gateway import Backend, EXPLORE, GatewayError, INFER, user_request
from .metrics.levenshtein import min_ref_levenshtein, word_levenshtein
from .prompts import (
    Prompt,
    PromptError,
    TaskTemplate,
    clean_completion,
    improve_meta_prompt,
    parse_new_instruction,
    postprocess_output,
    rephrase_meta_prompt,
)
from .seeding import derived_rng

log = logging.getLogger(__name__)

OPERATORS = ("init", "improve", "rephrase", "permute")


@dataclass
class Candidate:
    id: int
    prompt: Prompt
    fitness: float
    raw_error: float
    drift_penalty: float
    parent_id: int | None
    operator: str
    epoch: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "prompt": {
                "header": self.prompt.header,
                "instructions": self.prompt.instruction_texts(),
                "footer": self.prompt.footer,
            },
            "fitness": self.fitness,
            "raw_error": self.raw_error,
            "drift_penalty": self.drift_penalty,
            "parent_id": self.parent_id,
            "operator": self.operator,
            "epoch": self.epoch,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Candidate":
        from .prompts import Instruction

        prompt = Prompt(
            header=data["prompt"]["header"],
            instructions=tuple(Instruction(t) for t in data["prompt"]["instructions"]),
            footer=data["prompt"]["footer"],
        )
        return cls(
            id=data["id"],
            prompt=prompt,
            fitness=data["fitness"],
            raw_error=data["raw_error"],
            drift_penalty=data["drift_penalty"],
            parent_id=data["parent_id"],
            operator=data["operator"],
            epoch=data["epoch"],
        )


@dataclass(frozen=True)
class OptimizerConfig:
    n_epochs: int = 15
    beam_b: int = 32
    n_permute: int = 2
    drift_weight: float = 0.05
    improve_samples: int = 4
    improve_batch: int = 2
    dev_subsample: int | None = 50
    seed: int = 0

    def __post_init__(self):
        if self.n_permute < 2:
            raise ValueError("n_permute must be >= 2")
        if self.improve_batch < 1:
            raise ValueError("improve_batch must be >= 1")
        if self.beam_b < 1:
            raise ValueError("beam_b must be >= 1")
        if self.drift_weight < 0:
            raise ValueError("drift_weight must be >= 0")


def select_dev_subsample(dev: Sequence[SamplePair], cfg: OptimizerConfig) -> list[SamplePair]:
    """Fixed seeded dev subsample, constant across a run so fitness values
    stay comparable between epochs."""
    n = cfg.dev_subsample
    if n is None or n >= len(dev):
        return list(dev)
    rng = derived_rng(cfg.seed, "dev-subsample")
    picks = sorted(rng.sample(range(len(dev)), n))
    return [dev[i] for i in picks]


class PromptOptimizer:
    """Holds the search context and implements the epoch loop."""

    def __init__(
        self,
        train: Sequence[SamplePair],
        dev: Sequence[SamplePair],
        cfg: OptimizerConfig,
        backend: Backend,
        template: TaskTemplate,
    ) -> None:
        if not dev:
            raise ValueError("dev set must be non-empty")
        self.train = list(train)
        self.dev = list(dev)
        self.cfg = cfg
        self.backend = backend
        self.template = template
        self.history: list[dict] = []
        self.next_id = 0
        self.dev_eval = self._select_dev()

    # -- plumbing -----------------------------------------------------------

    def _select_dev(self) -> list[SamplePair]:
        return select_dev_subsample(self.dev, self.cfg)

    def _take_id(self) -> int:
        out = self.next_id
        self.next_id += 1
        return out

    def _infer(self, prompt: Prompt, source: str) -> str:
        if not source:
            return ""
        raw = self.backend.complete(user_request(prompt.render(source), INFER))
        return postprocess_output(raw)

    # -- fitness ------------------------------------------------------------

    def raw_error(self, prompt: Prompt, pairs: Sequence[SamplePair]) -> tuple[float, list[int], list[str]]:
        """Mean nearest-reference distance of the prompt's outputs."""
        outputs = [self._infer(prompt, p.source) for p in pairs]
        errors = [min_ref_levenshtein(out, p.references) for out, p in zip(outputs, pairs)]
        return sum(errors) / len(errors), errors, outputs

    def fitness(
        self, prompt: Prompt, parent: Prompt | None, pairs: Sequence[SamplePair] | None = None
    ) -> tuple[float, float, float]:
        """(fitness, raw_error, drift_penalty) on the fixed dev subsample."""
        pairs = self.dev_eval if pairs is None else pairs
        raw, _, _ = self.raw_error(prompt, pairs)
        if parent is None:
            drift = 0.0
        else:
            parent_text = parent.text()
            drift = word_levenshtein(prompt.text(), parent_text) / max(1, len(parent_text.split()))
        return -raw - self.cfg.drift_weight * drift, raw, drift

    # -- operators ----------------------------------------------------------

    def _improve_examples(self, parent: Candidate, epoch: int) -> list[tuple[str, str, str, int]]:
        """Seeded train window scored under the parent, worst errors first.

        Returns improve_batch (input, output, gold, error) rows where gold
        is the nearest reference; rows keep window order for determinism.
        """
        window_size = min(len(self.train), 2 * self.cfg.improve_batch)
        rng = derived_rng(self.cfg.seed, "improve-batch", epoch, parent.id)
        window = rng.sample(range(len(self.train)), window_size)
        rows = []
        for pos, idx in enumerate(window):
            pair = self.train[idx]
            output = self._infer(parent.prompt, pair.source)
            dists = [word_levenshtein(output, ref) for ref in pair.references]
            nearest = min(range(len(dists)), key=lambda i: (dists[i], i))
            rows.append((dists[nearest], pos, pair.source, output, pair.references[nearest]))
        rows.sort(key=lambda r: (-r[0], r[1]))
        chosen = sorted(rows[: self.cfg.improve_batch], key=lambda r: r[1])
        return [(src, out, gold, err) for err, _, src, out, gold in chosen]

    def improve(self, parent: Candidate, epoch: int) -> list[Prompt]:
        """Children extending the parent by one proposed instruction."""
        examples = self._improve_examples(parent, epoch)
        meta = improve_meta_prompt(self.template, parent.prompt.instruction_texts(), examples)
        children = []
        for s in range(self.cfg.improve_samples):
            tag = epoch * self.cfg.improve_samples + s
            raw = self.backend.complete(user_request(meta, EXPLORE, attempt_tag=tag))
            try:
                text = parse_new_instruction(raw)
            except PromptError as exc:
                log.warning("improve sample %d unparseable for candidate %d: %s", s, parent.id, exc)
                continue
            children.append(parent.prompt.append_instruction(text))
        if not children:
            log.warning("improve yielded zero children for candidate %d", parent.id)
        return children

    def rephrase(self, parent: Candidate, epoch: int) -> list[Prompt]:
        """Children differing from the parent at exactly one position."""
        children = []
        parent_text = parent.prompt.text()
        for i, instruction in enumerate(parent.prompt.instructions):
            raw = self.backend.complete(
                user_request(rephrase_meta_prompt(instruction.text), EXPLORE, attempt_tag=epoch)
            )
            text = clean_completion(raw, collapse_newlines=True)
            if not text:
                log.warning("empty rephrase for candidate %d position %d", parent.id, i)
                continue
            child = parent.prompt.replace_instruction(i, text)
            if child.text() == parent_text:
                continue
            children.append(child)
        return children

    def permute(self, parent: Candidate, epoch: int) -> Prompt | None:
        """Child with a non-identity reorder of n_permute seeded positions."""
        k = len(parent.prompt.instructions)
        if k < 2:
            return None
        rng = derived_rng(self.cfg.seed, "permute", epoch, parent.id)
        m = min(self.cfg.n_permute, k)
        positions = sorted(rng.sample(range(k), m))
        shuffled = list(positions)
        while shuffled == positions:
            rng.shuffle(shuffled)
        order = list(range(k))
        for target, source in zip(positions, shuffled):
            order[target] = source
        return parent.prompt.reorder(order)

    # -- epoch loop ----------------------------------------------------------

    def score_seed(self, prompt: Prompt) -> Candidate:
        fit, raw, drift = self.fitness(prompt, None)
        return Candidate(
            id=self._take_id(),
            prompt=prompt,
            fitness=fit,
            raw_error=raw,
            drift_penalty=drift,
            parent_id=None,
            operator="init",
            epoch=0,
        )

    def run_epoch(self, pool: list[Candidate], epoch: int) -> list[Candidate]:
        calls_before = len(self.backend.calls)
        proposals: list[tuple[Prompt, str, Candidate]] = []
        for parent in sorted(pool, key=lambda c: c.id):
            for op, generate in (("improve", self.improve), ("rephrase", self.rephrase)):
                try:
                    for child in generate(parent, epoch):
                        proposals.append((child, op, parent))
                except GatewayError as exc:
                    log.warning("%s failed for candidate %d: %s", op, parent.id, exc)
            permuted = self.permute(parent, epoch)
            if permuted is not None:
                proposals.append((permuted, "permute", parent))

        seen = {c.prompt.text() for c in pool}
        scored: list[Candidate] = []
        for prompt, op, parent in proposals:
            text = prompt.text()
            if text in seen:
                continue
            seen.add(text)
            try:
                fit, raw, drift = self.fitness(prompt, parent.prompt)
            except GatewayError as exc:
                log.warning("scoring failed for %s child of %d: %s", op, parent.id, exc)
                continue
            scored.append(
                Candidate(
                    id=self._take_id(),
                    prompt=prompt,
                    fitness=fit,
                    raw_error=raw,
                    drift_penalty=drift,
                    parent_id=parent.id,
                    operator=op,
                    epoch=epoch,
                )
            )
        if not scored:
            log.warning("epoch %d produced no successful candidates; pool unchanged", epoch)
        merged = sorted(pool + scored, key=lambda c: (-c.fitness, c.id))
        new_pool = merged[: self.cfg.beam_b]
        self.history.append(
            {
                "epoch": epoch,
                "candidates": [c.to_dict() for c in scored],
                "pool": [c.id for c in new_pool],
                "best_fitness": new_pool[0].fitness,
                "best_id": new_pool[0].id,
                "backend_calls": len(self.backend.calls) - calls_before,
            }
        )
        return new_pool


def select_best(pool: list[Candidate]) -> Candidate:
    return max(pool, key=lambda c: (c.fitness, -c.id))


def optimize(
    seed_prompt: Prompt,
    train: Sequence[SamplePair],
    dev: Sequence[SamplePair],
    cfg: OptimizerConfig,
    backend: Backend,
    template: TaskTemplate,
    epoch_callback: Callable[[int, list[Candidate], PromptOptimizer], None] | None = None,
) -> tuple[Candidate, list[dict]]:
    """Full optimization run from a seed prompt; returns (best, history)."""
    engine = PromptOptimizer(train, dev, cfg, backend, template)
    pool = [engine.score_seed(seed_prompt)]
    if epoch_callback is not None:
        epoch_callback(0, pool, engine)
    for epoch in range(1, cfg.n_epochs + 1):
        pool = engine.run_epoch(pool, epoch)
        if epoch_callback is not None:
            epoch_callback(epoch, pool, engine)
    return select_best(pool), engine.history
