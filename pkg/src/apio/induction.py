"""Initial prompt induction from input-output example pairs.

One instruction is induced per sampled training pair, assembled into a
prompt with the task footer and an empty header. Several independent
trials run with derived seeds and the prompt scoring best on the dev set
wins (ties to the lowest trial index).
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from .corpus import SamplePair
from .gateway import Backend, EXPLORE, GatewayError, user_request
from .prompts import Instruction, Prompt, TaskTemplate, clean_completion, induction_meta_prompt
from .seeding import derived_rng

log = logging.getLogger(__name__)


class InductionError(Exception):
    """Instruction induction failed after its retry."""


@dataclass(frozen=True)
class InductionConfig:
    n_instructions: int = 3
    n_trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_instructions < 1:
            raise ValueError("n_instructions must be >= 1")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")


@dataclass
class TrialReport:
    trial: int
    seed: int
    pair_ids: list[str]
    instructions: list[str]
    fitness: float | None
    backend_calls: int
    error: str | None = None
    dev_evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "pair_ids": self.pair_ids,
            "instructions": self.instructions,
            "fitness": self.fitness,
            "backend_calls": self.backend_calls,
            "dev_evaluations": self.dev_evaluations,
            "error": self.error,
        }


def induce_instruction(
    pair: SamplePair,
    template: TaskTemplate,
    backend: Backend,
    attempt_base: int = 0,
) -> Instruction:
    """Derive one instruction from a single example pair.

    The first reference is shown as the example output. A completion that
    is empty or still multi-line after cleanup is retried once, then the
    trial aborts.
    """
    meta = induction_meta_prompt(template, pair.source, pair.references[0])
    last = ""
    for retry in (0, 1):
        raw = backend.complete(user_request(meta, EXPLORE, attempt_tag=attempt_base + retry))
        last = clean_completion(raw)
        if last and "\n" not in last:
            return Instruction(last)
        log.warning("unusable induction completion for pair %s (retry %d)", pair.id, retry)
    raise InductionError(
        f"pair {pair.id}: completion unusable after retry (got {last[:80]!r})"
    )


def induce_prompt(
    train: Sequence[SamplePair],
    cfg: InductionConfig,
    template: TaskTemplate,
    backend: Backend,
    trial_index: int = 0,
) -> tuple[Prompt, list[str]]:
    """Induce a full prompt from seeded-sampled training pairs.

    Returns the prompt and the ids of the pairs used. Pairs are resampled
    per trial from a derived seed.
    """
    if len(train) < cfg.n_instructions:
        raise InductionError(
            f"train size {len(train)} < n_instructions {cfg.n_instructions}"
        )
    rng = derived_rng(cfg.seed, "induce", trial_index)
    picks = rng.sample(range(len(train)), cfg.n_instructions)
    instructions = []
    for k, idx in enumerate(picks):
        attempt_base = (trial_index * cfg.n_instructions + k) * 2
        instructions.append(induce_instruction(train[idx], template, backend, attempt_base))
    prompt = Prompt(header="", instructions=tuple(instructions), footer=template.footer)
    return prompt, [train[i].id for i in picks]


def best_of_trials(
    train: Sequence[SamplePair],
    dev: Sequence[SamplePair],
    cfg: InductionConfig,
    template: TaskTemplate,
    backend: Backend,
    fitness_fn: Callable[[Prompt, Sequence[SamplePair]], float],
) -> tuple[Prompt, list[TrialReport]]:
    """Run ``n_trials`` inductions and keep the dev-fitness argmax.

    Ties break to the lowest trial index; trials that fail to induce are
    recorded and skipped.
    """
    reports: list[TrialReport] = []
    best: tuple[float, int, Prompt] | None = None
    for trial in range(cfg.n_trials):
        calls_before = len(backend.calls)
        rng_seed = cfg.seed
        try:
            prompt, pair_ids = induce_prompt(train, cfg, template, backend, trial_index=trial)
        except (InductionError, GatewayError) as exc:
            log.warning("trial %d failed: %s", trial, exc)
            reports.append(
                TrialReport(
                    trial=trial,
                    seed=rng_seed,
                    pair_ids=[],
                    instructions=[],
                    fitness=None,
                    backend_calls=len(backend.calls) - calls_before,
                    error=str(exc),
                )
            )
            continue
        fitness = fitness_fn(prompt, dev)
        reports.append(
            TrialReport(
                trial=trial,
                seed=rng_seed,
                pair_ids=pair_ids,
                instructions=prompt.instruction_texts(),
                fitness=fitness,
                backend_calls=len(backend.calls) - calls_before,
                dev_evaluations=1,
            )
        )
        if best is None or fitness > best[0]:
            best = (fitness, trial, prompt)
    if best is None:
        raise InductionError("all induction trials failed")
    return best[2], reports
