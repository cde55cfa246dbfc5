from __future__ import annotations

import pytest

from apio.corpus import SamplePair
from apio.gateway import ScriptEntry, ScriptedBackend
from apio.induction import (
    InductionConfig,
    InductionError,
    best_of_trials,
    induce_instruction,
    induce_prompt,
)
from apio.prompts import GEC_TEMPLATE, GENERIC_TEMPLATE

INDUCE_MATCH = "Could you give an instruction"

KNOWN_INSTRUCTION = (
    "Identify and correct the grammatical error in the given sentence to improve clarity and accuracy."
)


def _pair(i=0):
    return SamplePair(f"p{i}", f"src {i}", (f"ref {i}", f"alt {i}"))


def test_induce_instruction_verbatim():
    backend = ScriptedBackend.from_pairs([(INDUCE_MATCH, KNOWN_INSTRUCTION)])
    instruction = induce_instruction(_pair(), GEC_TEMPLATE, backend)
    assert instruction.text == KNOWN_INSTRUCTION
    # induction samples under the exploration profile
    assert (backend.calls[0].profile.temperature, backend.calls[0].profile.top_p) == (1.0, 1.0)


def test_induce_shows_first_reference():
    backend = ScriptedBackend.from_pairs([(INDUCE_MATCH, "Do x.")])
    induce_instruction(_pair(3), GEC_TEMPLATE, backend)
    sent = backend.calls[0].text()
    assert "Sentence: src 3" in sent
    assert "Corrected sentence: ref 3" in sent
    assert "alt 3" not in sent


def test_induce_strips_quotes():
    backend = ScriptedBackend.from_pairs([(INDUCE_MATCH, '"Fix the grammar."')])
    assert induce_instruction(_pair(), GEC_TEMPLATE, backend).text == "Fix the grammar."


def test_induce_retries_newline_once_then_errors():
    ok_after_retry = ScriptedBackend.from_pairs(
        [(INDUCE_MATCH, "bad\ncompletion"), (INDUCE_MATCH, "Good one.")]
    )
    assert induce_instruction(_pair(), GEC_TEMPLATE, ok_after_retry).text == "Good one."
    assert len(ok_after_retry.calls) == 2

    always_bad = ScriptedBackend([ScriptEntry(match=INDUCE_MATCH, response="a\nb", sticky=True)])
    with pytest.raises(InductionError):
        induce_instruction(_pair(), GEC_TEMPLATE, always_bad)
    assert len(always_bad.calls) == 2


def _sticky_backend(response="Do the rewrite."):
    return ScriptedBackend([ScriptEntry(match=INDUCE_MATCH, response=response, sticky=True)])


def test_induce_prompt_structure_and_determinism(toy_pairs):
    cfg = InductionConfig(n_instructions=3, n_trials=1, seed=11)
    first, ids_a = induce_prompt(toy_pairs, cfg, GENERIC_TEMPLATE, _sticky_backend())
    second, ids_b = induce_prompt(toy_pairs, cfg, GENERIC_TEMPLATE, _sticky_backend())
    assert first == second
    assert ids_a == ids_b
    assert len(first.instructions) == 3
    assert first.header == ""
    assert first.footer == GENERIC_TEMPLATE.footer
    assert first.text().count("* ") == 3


def test_induce_prompt_single_instruction_boundary(toy_pairs):
    cfg = InductionConfig(n_instructions=1, n_trials=1, seed=0)
    prompt, _ = induce_prompt(toy_pairs, cfg, GENERIC_TEMPLATE, _sticky_backend())
    assert len(prompt.instructions) == 1


def test_induce_prompt_requires_enough_train(toy_pairs):
    cfg = InductionConfig(n_instructions=3, n_trials=1)
    with pytest.raises(InductionError):
        induce_prompt(toy_pairs[:2], cfg, GENERIC_TEMPLATE, _sticky_backend())


def test_best_of_trials_argmax_and_tiebreak(toy_pairs):
    # fitness keyed on the sampled pair ids; trial 4 planted as the best
    cfg = InductionConfig(n_instructions=2, n_trials=10, seed=5)
    scores = {t: -1.0 for t in range(10)}
    scores[4] = -0.25
    calls = {"n": -1}

    def fitness_fn(prompt, dev):
        calls["n"] += 1
        return scores[calls["n"]]

    best, reports = best_of_trials(
        toy_pairs, toy_pairs, cfg, GENERIC_TEMPLATE, _sticky_backend(), fitness_fn
    )
    assert [r.fitness for r in reports][4] == -0.25
    assert best == induce_prompt(toy_pairs, cfg, GENERIC_TEMPLATE, _sticky_backend(), trial_index=4)[0]

    flat, reports = best_of_trials(
        toy_pairs, toy_pairs, cfg, GENERIC_TEMPLATE, _sticky_backend(), lambda p, d: 0.0
    )
    assert flat == induce_prompt(toy_pairs, cfg, GENERIC_TEMPLATE, _sticky_backend(), trial_index=0)[0]
    assert all(r.fitness == 0.0 for r in reports)


def test_best_of_trials_call_accounting(toy_pairs):
    cfg = InductionConfig(n_instructions=3, n_trials=10, seed=2)
    backend = _sticky_backend()
    dev_evaluations = []

    def fitness_fn(prompt, dev):
        dev_evaluations.append(prompt)
        return 0.0

    _, reports = best_of_trials(toy_pairs, toy_pairs, cfg, GENERIC_TEMPLATE, backend, fitness_fn)
    induction_calls = [c for c in backend.calls if INDUCE_MATCH in c.text()]
    assert len(induction_calls) == 30  # n_trials x n_instructions
    assert len(dev_evaluations) == 10
    assert sum(r.dev_evaluations for r in reports) == 10
    assert sum(r.backend_calls for r in reports) == 30


def test_best_of_trials_skips_failed_trials(toy_pairs):
    # first trial consumes a broken completion twice, later trials succeed
    backend = ScriptedBackend(
        [
            ScriptEntry(match=INDUCE_MATCH, response="bad\nline"),
            ScriptEntry(match=INDUCE_MATCH, response="worse\nline"),
            ScriptEntry(match=INDUCE_MATCH, response="Fine instruction.", sticky=True),
        ]
    )
    cfg = InductionConfig(n_instructions=1, n_trials=3, seed=9)
    best, reports = best_of_trials(toy_pairs, toy_pairs, cfg, GENERIC_TEMPLATE, backend, lambda p, d: 0.0)
    assert reports[0].error is not None
    assert reports[1].error is None
    assert best.instruction_texts() == ["Fine instruction."]


def test_best_of_trials_all_failed(toy_pairs):
    backend = ScriptedBackend([ScriptEntry(match=INDUCE_MATCH, response="a\nb", sticky=True)])
    cfg = InductionConfig(n_instructions=1, n_trials=2, seed=1)
    with pytest.raises(InductionError, match="all induction trials failed"):
        best_of_trials(toy_pairs, toy_pairs, cfg, GENERIC_TEMPLATE, backend, lambda p, d: 0.0)
