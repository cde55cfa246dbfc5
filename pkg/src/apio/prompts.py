"""Structured instruction-list prompts and the meta-prompts that edit them.

A prompt is a header (usually empty), an ordered list of single-paragraph
instructions rendered as ``* `` bullets, and a task footer carrying the
``{input_text}`` slot. The meta-prompt builders produce the requests used
to induce a new instruction from an example pair, to propose an
instruction that reduces observed errors, and to rephrase an instruction.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

log = logging.getLogger(__name__)

INPUT_SLOT = "{input_text}"


class PromptError(ValueError):
    """Prompt structure violates its contract."""


@dataclass(frozen=True)
class Instruction:
    text: str

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise PromptError("instruction text must be non-empty")
        if "\n" in self.text:
            raise PromptError("instruction text must not contain newlines")
        if len(re.findall(r"[.!?](?:\s|$)", self.text)) > 2:
            log.warning("instruction exceeds the two-sentence target: %r", self.text)


@dataclass(frozen=True)
class Prompt:
    header: str
    instructions: tuple[Instruction, ...]
    footer: str

    def text(self) -> str:
        """Prompt file form: the render with the input slot left in place."""
        return self._assemble(self.footer)

    def render(self, input_text: str) -> str:
        if self.footer.count(INPUT_SLOT) != 1:
            raise PromptError(
                f"footer must contain the {INPUT_SLOT!r} slot exactly once"
            )
        return self._assemble(self.footer.replace(INPUT_SLOT, input_text))

    def _assemble(self, footer: str) -> str:
        if not self.instructions:
            raise PromptError("cannot render a prompt with no instructions")
        lines = []
        if self.header:
            lines.append(self.header)
        lines.extend(f"* {ins.text}" for ins in self.instructions)
        lines.append(footer)
        return "\n".join(lines)

    def instruction_texts(self) -> list[str]:
        return [ins.text for ins in self.instructions]

    def replace_instruction(self, index: int, text: str) -> "Prompt":
        instructions = list(self.instructions)
        instructions[index] = Instruction(text)
        return Prompt(self.header, tuple(instructions), self.footer)

    def append_instruction(self, text: str) -> "Prompt":
        return Prompt(self.header, self.instructions + (Instruction(text),), self.footer)

    def reorder(self, order: list[int]) -> "Prompt":
        return Prompt(self.header, tuple(self.instructions[i] for i in order), self.footer)


def render(prompt: Prompt, input_text: str) -> str:
    return prompt.render(input_text)


def parse_prompt(text: str) -> Prompt:
    """Invert ``Prompt.text()``: bullets bounded by header and footer lines."""
    lines = text.split("\n")
    bullet_idx = [i for i, line in enumerate(lines) if line.startswith("* ")]
    if not bullet_idx:
        raise PromptError("prompt text has no '* ' instruction lines")
    first, last = bullet_idx[0], bullet_idx[-1]
    if bullet_idx != list(range(first, last + 1)):
        raise PromptError("instruction bullets must be contiguous")
    header = "\n".join(lines[:first])
    footer = "\n".join(lines[last + 1:])
    if INPUT_SLOT not in footer:
        raise PromptError(f"prompt footer lacks the {INPUT_SLOT!r} slot")
    instructions = tuple(Instruction(line[2:]) for line in lines[first: last + 1])
    return Prompt(header, instructions, footer)


# ---------------------------------------------------------------------------
# task templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskTemplate:
    task_name: str
    input_label: str
    output_label: str
    footer: str


GEC_TEMPLATE = TaskTemplate(
    task_name="Grammatical Error Correction",
    input_label="Sentence",
    output_label="Corrected sentence",
    footer="Sentence: {input_text}\nCorrected sentence:",
)

SIMPLIFY_TEMPLATE = TaskTemplate(
    task_name="Text Simplification",
    input_label="Complex sentence",
    output_label="Simple sentence",
    footer="Complex sentence: {input_text}\nSimple sentence:",
)

GENERIC_TEMPLATE = TaskTemplate(
    task_name="Text Rewriting",
    input_label="Input",
    output_label="Output",
    footer="Input: {input_text}\nOutput:",
)

TASK_TEMPLATES = {
    "gec": GEC_TEMPLATE,
    "simplify": SIMPLIFY_TEMPLATE,
    "generic": GENERIC_TEMPLATE,
}


# ---------------------------------------------------------------------------
# meta-prompts
# ---------------------------------------------------------------------------

_INDUCTION_META = """Below is an example of an input-output pair for the {task_name} task.

{input_label}: {input_text}
{output_label}: {output_text}

You are the prompt engineer. Could you give an instruction for this example? Do not mention any part of the considered texts."""

_IMPROVE_HEAD = """You are a super-talented prompt engineer. You are working on improvement of the {task_name} System

The System has these Instructions:
{instructions}

Below are the examples of System's work:
"""

_IMPROVE_EXAMPLE = """Input {i}: {input_text}
System's Output {i}: {output_text}
Gold Output {i}: {gold_output_text}
Error {i} between System's Output {i} and Gold Output {i} for given Input {i}: {num} different words.
"""

_IMPROVE_TAIL = """Mean error for examples 1-{last}:
{ave_num} words.

Suggest new instruction to augment existing instructions forcing the System's Outputs to be exactly the same as Gold Outputs for the given System's Inputs. You need to minimize Errors between System's Outputs and Gold Outputs. Put new instruction between <new_instruction> and </new_instruction> tags. Do not use no more than two sentences. Do not mention Gold Output. Do not use "newline" symbols in your answer. Prioritize fixing cases which have larger error (which have more different words)."""

_REPHRASE_META = """Generate a variation of the following instruction while keeping the semantic meaning, updated instruction must be no more than two sentences

Instruction:{instruction}
Updated instruction:"""

NEW_INSTRUCTION_RE = re.compile(r"<new_instruction>(.*?)</new_instruction>", re.DOTALL)


def induction_meta_prompt(template: TaskTemplate, source: str, target: str) -> str:
    return _INDUCTION_META.format(
        task_name=template.task_name,
        input_label=template.input_label,
        output_label=template.output_label,
        input_text=source,
        output_text=target,
    )


def improve_meta_prompt(
    template: TaskTemplate,
    instructions: list[str],
    examples: list[tuple[str, str, str, int]],
) -> str:
    """Meta-prompt asking for one new instruction given observed errors.

    ``examples`` holds (input, system output, gold output, error) rows.
    """
    if not examples:
        raise ValueError("improve meta-prompt needs at least one example")
    head = _IMPROVE_HEAD.format(
        task_name=template.task_name,
        instructions="\n".join(f"* {text}" for text in instructions),
    )
    body = "\n".join(
        _IMPROVE_EXAMPLE.format(i=i, input_text=src, output_text=out, gold_output_text=gold, num=num)
        for i, (src, out, gold, num) in enumerate(examples, start=1)
    )
    mean_error = sum(num for *_, num in examples) / len(examples)
    tail = _IMPROVE_TAIL.format(last=len(examples), ave_num=f"{mean_error:g}")
    return head + body + "\n" + tail


def rephrase_meta_prompt(instruction_text: str) -> str:
    return _REPHRASE_META.format(instruction=instruction_text)


def parse_new_instruction(completion: str) -> str:
    """Extract the tagged instruction from an improve completion.

    Raises ``PromptError`` when the tag pair is missing or empty; embedded
    newlines are collapsed to single spaces.
    """
    found = NEW_INSTRUCTION_RE.search(completion)
    if not found:
        raise PromptError("completion lacks a <new_instruction> tag pair")
    text = clean_completion(found.group(1), collapse_newlines=True)
    if not text:
        raise PromptError("tagged instruction is empty after cleanup")
    return text


def postprocess_output(text: str) -> str:
    """Normalize an inference completion: trim whitespace, keep text up to
    the first blank line."""
    s = text.strip()
    cut = s.find("\n\n")
    if cut != -1:
        s = s[:cut].strip()
    return s


# ---------------------------------------------------------------------------
# completion cleanup
# ---------------------------------------------------------------------------

_QUOTE_PAIRS = [('"', '"'), ("'", "'"), ("“", "”"), ("‘", "’"), ("`", "`")]
_BULLET_PREFIXES = ("* ", "- ", "• ")
_LABEL_RE = re.compile(r"^(?:new |updated )?instruction\s*:\s*", re.IGNORECASE)


def clean_completion(text: str, collapse_newlines: bool = False) -> str:
    """Strip the decorations LLMs wrap around instruction text.

    Applied until stable: surrounding whitespace, matching quote pairs,
    leading bullet markers, and leading "Instruction:"-style echoes.
    """
    s = text.strip()
    if collapse_newlines:
        s = re.sub(r"\s*\n+\s*", " ", s)
    while True:
        before = s
        s = s.strip()
        for open_q, close_q in _QUOTE_PAIRS:
            if len(s) >= 2 and s.startswith(open_q) and s.endswith(close_q):
                s = s[1:-1]
        for prefix in _BULLET_PREFIXES:
            if s.startswith(prefix):
                s = s[len(prefix):]
        s = _LABEL_RE.sub("", s)
        if s == before:
            return s
