"""Run directory layout, locking, and resumable state.

Each run owns ``<runs_dir>/<run_id>/`` exclusively (advisory lock file).
State and history files are written atomically (temp + rename) and
contain no timestamps, so a resumed run reproduces the uninterrupted
run's bytes given the same seed, script/cache, and config.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .optimizer import Candidate


class RunStateError(Exception):
    """Missing, locked, or corrupt run state."""


def _dump(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


class RunDir:
    def __init__(self, runs_dir: str | Path, run_id: str) -> None:
        self.run_id = run_id
        self.path = Path(runs_dir) / run_id
        self.state_path = self.path / "state.json"
        self.history_path = self.path / "history.json"
        self.prompt_path = self.path / "prompt.txt"
        self.best_prompt_path = self.path / "best_prompt.txt"
        self.trials_path = self.path / "trials.json"
        self.cache_path = self.path / "cache"
        self._lock_path = self.path / ".lock"

    def create(self, force: bool = False) -> None:
        if self.state_path.exists() and not force:
            raise RunStateError(
                f"run {self.run_id!r} already exists at {self.path}; use --force to overwrite"
            )
        self.path.mkdir(parents=True, exist_ok=True)

    def acquire_lock(self) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunStateError(
                f"run {self.run_id!r} is locked by another process ({self._lock_path})"
            )
        with os.fdopen(fd, "w") as handle:
            handle.write(str(os.getpid()))

    def release_lock(self) -> None:
        try:
            self._lock_path.unlink()
        except FileNotFoundError:
            pass

    def write_state(self, state: dict) -> None:
        _atomic_write(self.state_path, _dump(state))

    def read_state(self) -> dict:
        if not self.state_path.exists():
            raise RunStateError(f"no state file for run {self.run_id!r} at {self.state_path}")
        try:
            state = json.loads(self.state_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise RunStateError(f"corrupt state file {self.state_path}: {exc}") from exc
        for key in ("run_id", "phase", "config"):
            if key not in state:
                raise RunStateError(f"state file {self.state_path} lacks key {key!r}")
        return state

    def write_history(self, history: list[dict]) -> None:
        _atomic_write(self.history_path, _dump({"epochs": history}))

    def read_history(self) -> list[dict]:
        if not self.history_path.exists():
            return []
        return json.loads(self.history_path.read_text(encoding="utf-8"))["epochs"]

    def write_json(self, path: Path, data) -> None:
        _atomic_write(path, _dump(data) if isinstance(data, dict) else json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def pool_to_state(pool: list[Candidate]) -> list[dict]:
    return [c.to_dict() for c in pool]


def pool_from_state(data: list[dict]) -> list[Candidate]:
    return [Candidate.from_dict(c) for c in data]
