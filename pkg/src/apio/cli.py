"""``apio`` command line: induce | optimize | infer | evaluate | baseline.

Exit codes: 0 success, 1 engine failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import ConfigurationError, RunConfig, load_config, split_pairs
from .corpus import CorpusFormatError, SamplePair, load_jsonl, load_m2, reference_texts
from .gateway import (
    Backend,
    CachedBackend,
    GatewayError,
    INFER,
    OpenAIChatBackend,
    ScriptedBackend,
    user_request,
)
from .induction import InductionError, best_of_trials
from .metrics import f05_with_counts, mean_report, min_ref_levenshtein, sari
from .metrics.report import MetricReport
from .optimizer import (
    Candidate,
    PromptOptimizer,
    select_best,
    select_dev_subsample,
)
from .prompts import (
    Prompt,
    PromptError,
    TASK_TEMPLATES,
    parse_prompt,
    postprocess_output,
)
from .seeding import derived_rng
from .state import RunDir, RunStateError, pool_from_state, pool_to_state

log = logging.getLogger(__name__)

FAILED_PLACEHOLDER = "<FAILED>"


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def _default_run_id() -> str:
    return time.strftime("run-%Y%m%d-%H%M%S")


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    if getattr(args, "task", None):
        out["task"] = args.task
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "dev_subsample", None) is not None:
        value = args.dev_subsample
        out["optimizer.dev_subsample"] = None if value == "all" else int(value)
    return out


def _build_backend(args: argparse.Namespace, cfg: RunConfig, run: RunDir | None) -> Backend:
    if getattr(args, "dry_run", False):
        script = getattr(args, "script", None)
        if not script:
            raise ConfigurationError("--dry-run requires --script <file>")
        return ScriptedBackend.from_file(script)
    inner = OpenAIChatBackend(
        base_url=cfg.backend.base_url,
        model=cfg.backend.model,
        retry_max=cfg.backend.retry_max,
        timeout_s=cfg.backend.timeout_s,
        max_tokens=cfg.backend.max_tokens,
    )
    cache_dir = cfg.backend.cache_dir or (run.cache_path if run is not None else None)
    return CachedBackend(inner, cache_dir) if cache_dir else inner


def _backend_state(args: argparse.Namespace, backend: Backend) -> dict:
    if isinstance(backend, ScriptedBackend):
        return {
            "mode": "scripted",
            "script": str(getattr(args, "script", "")),
            "consumed": backend.consumed_state(),
        }
    return {"mode": "live"}


def _read_lines_raw(path: str | Path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n") if text else []


def _write_lines(path: str | Path, lines: list[str]) -> None:
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _flatten(output: str) -> str:
    return output.replace("\n", " ")


def _infer_lines(
    prompt: Prompt, lines: list[str], backend: Backend, workers: int = 1
) -> tuple[list[str], int]:
    """Order-preserving inference over input lines; empty lines pass
    through untouched. Returns (outputs, failure count)."""

    def one(line: str) -> str:
        if not line.strip():
            return ""
        for attempt in (0, 1):
            try:
                raw = backend.complete(user_request(prompt.render(line), INFER, attempt_tag=attempt))
                return _flatten(postprocess_output(raw))
            except GatewayError as exc:
                log.warning("inference failed (attempt %d): %s", attempt, exc)
        return FAILED_PLACEHOLDER

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(one, lines))
    else:
        outputs = [one(line) for line in lines]
    return outputs, sum(1 for o in outputs if o == FAILED_PLACEHOLDER)


# ---------------------------------------------------------------------------
# induce
# ---------------------------------------------------------------------------


def cmd_induce(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    if cfg.task not in TASK_TEMPLATES:
        raise ConfigurationError(f"unknown task {cfg.task!r}")
    template = TASK_TEMPLATES[cfg.task]
    train, dev = split_pairs(cfg)
    run = RunDir(args.runs_dir, args.run_id or _default_run_id())
    run.create(force=args.force)
    run.acquire_lock()
    try:
        backend = _build_backend(args, cfg, run)
        dev_eval = select_dev_subsample(dev, cfg.optimizer)

        def fitness_fn(prompt: Prompt, pairs) -> float:
            total = 0
            for pair in pairs:
                if pair.source:
                    raw = backend.complete(user_request(prompt.render(pair.source), INFER))
                    output = postprocess_output(raw)
                else:
                    output = ""
                total += min_ref_levenshtein(output, pair.references)
            return -total / len(pairs)

        prompt, trials = best_of_trials(train, dev_eval, cfg.induction, template, backend, fitness_fn)
        run.prompt_path.write_text(prompt.text() + "\n", encoding="utf-8")
        run.write_json(run.trials_path, {"trials": [t.to_dict() for t in trials]})
        run.write_state(
            {
                "run_id": run.run_id,
                "phase": "induction",
                "config": cfg.to_dict(),
                "backend": _backend_state(args, backend),
            }
        )
        best_fitness = max(t.fitness for t in trials if t.fitness is not None)
        print(f"induced prompt written to {run.prompt_path} (dev fitness {best_fitness:.4f})")
        return 0
    finally:
        run.release_lock()


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------


def _persist_epoch(
    run: RunDir,
    cfg: RunConfig,
    args: argparse.Namespace,
    backend: Backend,
    engine: PromptOptimizer,
    pool: list[Candidate],
    epoch: int,
    seed_prompt: Prompt,
) -> None:
    run.write_state(
        {
            "run_id": run.run_id,
            "phase": "optimization" if epoch < cfg.optimizer.n_epochs else "done",
            "config": cfg.to_dict(),
            "epoch": epoch,
            "next_id": engine.next_id,
            "pool": pool_to_state(pool),
            "seed_prompt": seed_prompt.text(),
            "backend": _backend_state(args, backend),
        }
    )
    run.write_history(engine.history)


def _task_metric(cfg: RunConfig, pairs: list[SamplePair], outputs: list[str]) -> tuple[str, float] | None:
    if cfg.task == "simplify":
        scores = [sari(p.source, o, p.references) for p, o in zip(pairs, outputs)]
        return "sari", sum(scores) / len(scores)
    if cfg.task == "gec" and cfg.data.format == "m2" and cfg.data.path:
        records = load_m2(cfg.data.path)
        try:
            aligned = [records[int(p.id.split("-")[1])] for p in pairs]
        except (IndexError, ValueError):
            return None
        score, _ = f05_with_counts(aligned, outputs)
        return "f05-approx", score
    return None


def cmd_optimize(args: argparse.Namespace) -> int:
    if args.resume:
        run = RunDir(args.runs_dir, args.resume)
        state = run.read_state()
        if state["phase"] not in ("optimization", "done"):
            raise RunStateError(f"run {args.resume!r} is in phase {state['phase']!r}, nothing to resume")
        cfg = RunConfig.from_dict(state["config"])
        run.acquire_lock()
        try:
            backend_state = state.get("backend", {"mode": "live"})
            if backend_state["mode"] == "scripted":
                script = getattr(args, "script", None) or backend_state["script"]
                backend = ScriptedBackend.from_file(script)
                backend.restore_consumed(backend_state.get("consumed", []))
                args.script = script
                args.dry_run = True
            else:
                backend = _build_backend(args, cfg, run)
            train, dev = split_pairs(cfg)
            template = TASK_TEMPLATES[cfg.task]
            engine = PromptOptimizer(train, dev, cfg.optimizer, backend, template)
            engine.history = run.read_history()
            engine.next_id = state["next_id"]
            pool = pool_from_state(state["pool"])
            seed_prompt = parse_prompt(state["seed_prompt"])
            start_epoch = state["epoch"]
            return _run_optimization(args, run, cfg, backend, engine, pool, seed_prompt, start_epoch)
        finally:
            run.release_lock()

    cfg = load_config(args.config, _overrides(args))
    if cfg.task not in TASK_TEMPLATES:
        raise ConfigurationError(f"unknown task {cfg.task!r}")
    run = RunDir(args.runs_dir, args.run_id or _default_run_id())
    prompt_file = args.prompt or (run.prompt_path if run.prompt_path.exists() else None)
    if prompt_file is None:
        raise ConfigurationError("no --prompt file given and the run has no induced prompt")
    seed_prompt = parse_prompt(Path(prompt_file).read_text(encoding="utf-8").rstrip("\n"))
    if run.state_path.exists():
        # continuing an induction run in place is fine; clobbering a prior
        # optimization needs --force (or --resume to continue it)
        prior = run.read_state()
        if prior.get("phase") != "induction" and not args.force:
            raise RunStateError(
                f"run {run.run_id!r} already holds an optimization; use --resume or --force"
            )
    else:
        run.create(force=args.force)
    run.acquire_lock()
    try:
        backend = _build_backend(args, cfg, run)
        train, dev = split_pairs(cfg)
        template = TASK_TEMPLATES[cfg.task]
        engine = PromptOptimizer(train, dev, cfg.optimizer, backend, template)
        pool = [engine.score_seed(seed_prompt)]
        _persist_epoch(run, cfg, args, backend, engine, pool, 0, seed_prompt)
        return _run_optimization(args, run, cfg, backend, engine, pool, seed_prompt, 0)
    finally:
        run.release_lock()


def _run_optimization(
    args: argparse.Namespace,
    run: RunDir,
    cfg: RunConfig,
    backend: Backend,
    engine: PromptOptimizer,
    pool: list[Candidate],
    seed_prompt: Prompt,
    start_epoch: int,
) -> int:
    n_epochs = cfg.optimizer.n_epochs
    stop_after = getattr(args, "stop_after_epoch", None)
    for epoch in range(start_epoch + 1, n_epochs + 1):
        pool = engine.run_epoch(pool, epoch)
        _persist_epoch(run, cfg, args, backend, engine, pool, epoch, seed_prompt)
        log.info("epoch %d/%d: best fitness %.4f", epoch, n_epochs, pool[0].fitness)
        if stop_after is not None and epoch >= stop_after and epoch < n_epochs:
            print(f"stopped after epoch {epoch} as requested")
            return 0
    best = select_best(pool)
    run.best_prompt_path.write_text(best.prompt.text() + "\n", encoding="utf-8")

    # final reporting: best candidate rescored on the full dev set, top five
    # pool members rescored with the task metric on the fixed subsample
    full_raw, _, _ = engine.raw_error(best.prompt, engine.dev)
    top = sorted(pool, key=lambda c: (-c.fitness, c.id))[:5]
    top_report = []
    for cand in top:
        _, _, outputs = engine.raw_error(cand.prompt, engine.dev_eval)
        metric = _task_metric(cfg, engine.dev_eval, outputs)
        top_report.append(
            {
                "id": cand.id,
                "operator": cand.operator,
                "epoch": cand.epoch,
                "fitness": cand.fitness,
                "raw_error": cand.raw_error,
                "n_instructions": len(cand.prompt.instructions),
                "task_metric": {"name": metric[0], "value": metric[1]} if metric else None,
            }
        )
    run.write_json(
        run.path / "final_report.json",
        {
            "best_id": best.id,
            "best_fitness": best.fitness,
            "best_raw_error_subsample": best.raw_error,
            "best_raw_error_full_dev": full_raw,
            "top5": top_report,
        },
    )
    print(
        f"best candidate {best.id} (fitness {best.fitness:.4f}, raw error {best.raw_error:.4f}); "
        f"prompt written to {run.best_prompt_path}"
    )
    return 0


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------


def cmd_infer(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    prompt = parse_prompt(Path(args.prompt).read_text(encoding="utf-8").rstrip("\n"))
    lines = _read_lines_raw(args.input)
    backend = _build_backend(args, cfg, None)
    outputs, failures = _infer_lines(prompt, lines, backend, workers=args.workers)
    _write_lines(args.output, outputs)
    if failures:
        print(f"{failures}/{len(lines)} lines failed after retry", file=sys.stderr)
        return 1
    print(f"wrote {len(outputs)} predictions to {args.output}")
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def cmd_evaluate(args: argparse.Namespace) -> int:
    predictions = _read_lines_raw(args.predictions)
    if args.task == "simplify":
        if not args.source or not args.references:
            raise ConfigurationError("simplify evaluation needs --source and --references")
        sources = _read_lines_raw(args.source)
        refs = [_read_lines_raw(p) for p in args.references]
        for path, col in zip(args.references, refs):
            if len(col) != len(sources):
                raise CorpusFormatError(f"{path}: line-count mismatch with {args.source}")
        if len(predictions) != len(sources):
            raise ConfigurationError(
                f"predictions ({len(predictions)}) misaligned with sources ({len(sources)})"
            )
        scores = [
            sari(src, out, [col[i] for col in refs])
            for i, (src, out) in enumerate(zip(sources, predictions))
        ]
        report = mean_report("sari", scores)
    elif args.task == "gec":
        if not args.m2:
            raise ConfigurationError("gec evaluation needs --m2 <gold file>")
        records = load_m2(args.m2)
        if len(predictions) != len(records):
            raise ConfigurationError(
                f"predictions ({len(predictions)}) misaligned with gold records ({len(records)})"
            )
        score, counts = f05_with_counts(records, predictions)
        report = MetricReport("f05-approx", score, tuple(counts), len(records))
        lev = [
            min_ref_levenshtein(pred, reference_texts(rec))
            for pred, rec in zip(predictions, records)
        ]
        lev_report = mean_report("word-levenshtein-min-ref", lev)
        lev_path = Path(args.output).with_suffix(".levenshtein.json")
        lev_report.write_json(lev_path)
        print(f"{lev_report.metric_name}: {lev_report.aggregate:.4f} ({lev_path})")
    elif args.task == "generic":
        if not args.gold:
            raise ConfigurationError("generic evaluation needs --gold <jsonl file>")
        pairs = load_jsonl(args.gold)
        if len(predictions) != len(pairs):
            raise ConfigurationError(
                f"predictions ({len(predictions)}) misaligned with gold ({len(pairs)})"
            )
        lev = [min_ref_levenshtein(p, pair.references) for p, pair in zip(predictions, pairs)]
        report = mean_report("word-levenshtein-min-ref", lev)
    else:
        raise ConfigurationError(f"unknown task {args.task!r}")
    report.write_json(args.output)
    print(f"{report.metric_name}: {report.aggregate:.4f} ({args.output})")
    return 0


# ---------------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------------


def _zero_shot_text(args: argparse.Namespace, task: str) -> str:
    if args.prompt_file:
        return Path(args.prompt_file).read_text(encoding="utf-8").strip()
    resource = importlib.resources.files("apio") / "templates" / f"zero_shot_{task}.txt"
    return resource.read_text(encoding="utf-8").strip()


def cmd_baseline(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    if cfg.task not in TASK_TEMPLATES:
        raise ConfigurationError(f"unknown task {cfg.task!r}")
    template = TASK_TEMPLATES[cfg.task]
    lines = _read_lines_raw(args.input)
    meta: dict = {"kind": args.kind, "task": cfg.task, "seed": cfg.seed}

    if args.kind == "copy":
        _write_lines(args.output, lines)
        Path(str(args.output) + ".meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"copied {len(lines)} lines to {args.output}")
        return 0

    text = _zero_shot_text(args, cfg.task)
    meta["prompt_text"] = text
    blocks = [text]
    if args.kind == "few_shot":
        if args.shots < 1:
            raise ConfigurationError("--shots must be >= 1")
        train, _ = split_pairs(cfg)
        if len(train) < args.shots:
            raise ConfigurationError(f"train pool ({len(train)}) smaller than --shots {args.shots}")
        rng = derived_rng(cfg.seed, "few-shot")
        exemplars = [train[i] for i in sorted(rng.sample(range(len(train)), args.shots))]
        meta["shots"] = args.shots
        meta["exemplar_ids"] = [p.id for p in exemplars]
        for pair in exemplars:
            blocks.append(
                f"{template.input_label}: {pair.source}\n{template.output_label}: {pair.references[0]}"
            )
    # zero/few-shot prompts have no instruction bullets; render directly
    prompt_text = "\n\n".join(blocks) + "\n\n" + template.footer
    backend = _build_backend(args, cfg, None)
    failures = 0
    outputs = []
    for line in lines:
        if not line.strip():
            outputs.append("")
            continue
        rendered = prompt_text.replace("{input_text}", line)
        result = FAILED_PLACEHOLDER
        for attempt in (0, 1):
            try:
                raw = backend.complete(user_request(rendered, INFER, attempt_tag=attempt))
                result = _flatten(postprocess_output(raw))
                break
            except GatewayError as exc:
                log.warning("baseline inference failed (attempt %d): %s", attempt, exc)
        if result == FAILED_PLACEHOLDER:
            failures += 1
        outputs.append(result)
    _write_lines(args.output, outputs)
    Path(str(args.output) + ".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if failures:
        print(f"{failures}/{len(lines)} lines failed after retry", file=sys.stderr)
        return 1
    print(f"wrote {len(outputs)} predictions to {args.output}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--task", choices=sorted(TASK_TEMPLATES), help="task template")
    sub.add_argument("--seed", type=int, help="run seed")
    sub.add_argument("--dry-run", action="store_true", help="use the scripted backend")
    sub.add_argument("--script", help="script file for --dry-run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apio", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    induce = commands.add_parser("induce", help="induce an initial prompt from examples")
    _add_common(induce)
    induce.add_argument("--run-id")
    induce.add_argument("--runs-dir", default="runs")
    induce.add_argument("--force", action="store_true")
    induce.add_argument("--dev-subsample")
    induce.set_defaults(func=cmd_induce)

    optimize = commands.add_parser("optimize", help="optimize an induced prompt")
    _add_common(optimize)
    optimize.add_argument("--prompt", help="prompt file (defaults to the run's induced prompt)")
    optimize.add_argument("--run-id")
    optimize.add_argument("--runs-dir", default="runs")
    optimize.add_argument("--force", action="store_true")
    optimize.add_argument("--resume", help="resume a persisted run by id")
    optimize.add_argument("--dev-subsample")
    optimize.add_argument("--stop-after-epoch", type=int, help="stop early after this epoch (testing)")
    optimize.set_defaults(func=cmd_optimize)

    infer = commands.add_parser("infer", help="run a prompt over an input file")
    _add_common(infer)
    infer.add_argument("--prompt", required=True)
    infer.add_argument("--input", required=True)
    infer.add_argument("--output", required=True)
    infer.add_argument("--workers", type=int, default=1)
    infer.set_defaults(func=cmd_infer)

    evaluate = commands.add_parser("evaluate", help="score predictions against gold data")
    evaluate.add_argument("--task", choices=["simplify", "gec", "generic"], required=True)
    evaluate.add_argument("--predictions", required=True)
    evaluate.add_argument("--output", required=True)
    evaluate.add_argument("--source")
    evaluate.add_argument("--references", nargs="+")
    evaluate.add_argument("--m2")
    evaluate.add_argument("--gold")
    evaluate.set_defaults(func=cmd_evaluate)

    baseline = commands.add_parser("baseline", help="copy / zero-shot / few-shot baselines")
    _add_common(baseline)
    baseline.add_argument("--kind", choices=["copy", "zero_shot", "few_shot"], required=True)
    baseline.add_argument("--input", required=True)
    baseline.add_argument("--output", required=True)
    baseline.add_argument("--shots", type=int, default=3)
    baseline.add_argument("--prompt-file", help="override the zero-shot prompt template")
    baseline.set_defaults(func=cmd_baseline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (
        ConfigurationError,
        CorpusFormatError,
        PromptError,
        RunStateError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GatewayError, InductionError) as exc:
        print(f"engine failure: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(main())
