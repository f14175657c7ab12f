"""Deterministic prompt rendering for question generation.

Prompts are composed from text-file fragments in a fixed order: persona,
itemized core instructions, target skill name, skill definition, one exemplar,
chain-of-thought steps, output-format sentinel. Which fragments render is
driven entirely by the strategy's feature set. The documented placeholder set
({course_title}, {audience}, {locale}, {topic}, {level}, {definition},
{example}, {question}) is the compatibility contract for template overrides.

The shipped fragment wording is an original reconstruction; treat it as config
and override via a templates directory when exact wording matters.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .model import (
    FEATURE_COT,
    FEATURE_EXAMPLE,
    FEATURE_PERSONA,
    FEATURE_SKILL_EXPLANATION,
    FEATURE_SKILL_NAME,
    BloomLevel,
    CourseConfig,
    Strategy,
)


class PromptError(Exception):
    pass


class MissingExample(PromptError):
    pass


class UnknownTopic(PromptError):
    pass


@dataclass(frozen=True)
class PromptText:
    """A rendered prompt: optional system part, user part, and the features used."""

    user_part: str
    system_part: str | None = None
    feature_trace: frozenset[str] = frozenset()

    @property
    def full_text(self) -> str:
        if self.system_part:
            return self.system_part + "\n" + self.user_part
        return self.user_part


_FRAGMENT_FILES = {
    "persona": "persona.txt",
    "core": "core.txt",
    "skill_name": "skill_name.txt",
    "skill_explanation": "skill_explanation.txt",
    "example": "example.txt",
    "cot": "cot.txt",
    "output_format": "output_format.txt",
    "eval": "eval.txt",
    "eval_persona": "eval_persona.txt",
}


@dataclass(frozen=True)
class TemplateSet:
    """The template fragments a run renders prompts from."""

    fragments: dict[str, str]

    def fragment(self, name: str) -> str:
        return self.fragments[name].rstrip("\n")

    @classmethod
    def default(cls) -> TemplateSet:
        root = resources.files("bloomq.templates")
        fragments = {
            name: root.joinpath(filename).read_text("utf-8")
            for name, filename in _FRAGMENT_FILES.items()
        }
        return cls(fragments)

    @classmethod
    def load(cls, directory: str | Path) -> TemplateSet:
        """Load overrides from a directory; missing files fall back to defaults."""
        base = cls.default().fragments.copy()
        directory = Path(directory)
        for name, filename in _FRAGMENT_FILES.items():
            path = directory / filename
            if path.exists():
                base[name] = path.read_text("utf-8")
        return cls(base)


_DEFAULT_TEMPLATES: TemplateSet | None = None


def default_templates() -> TemplateSet:
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = TemplateSet.default()
    return _DEFAULT_TEMPLATES


def render_skill_explanation(level: BloomLevel, course: CourseConfig) -> str:
    """The configured definition wording for a level, verbatim."""
    return course.skill_definitions[level]


def select_example(level: BloomLevel, course: CourseConfig, seed: int) -> str:
    """Pick one exemplar for the level, deterministically: index = seed mod bank size."""
    bank = course.example_bank.get(level) or ()
    if not bank:
        raise MissingExample(f"example bank has no exemplar for level {level.level_name}")
    return bank[seed % len(bank)]


def build_generation_prompt(
    strategy: Strategy,
    course: CourseConfig,
    topic: str,
    level: BloomLevel,
    seed: int = 0,
    templates: TemplateSet | None = None,
) -> PromptText:
    """Render the generation prompt for one (strategy, topic, level) cell.

    Pure: identical inputs yield byte-identical output. Only the topic name is
    embedded, never reference material about the topic.
    """
    if topic not in course.topics:
        raise UnknownTopic(f"topic {topic!r} is not in the course topic list")
    templates = templates or default_templates()
    features = strategy.features
    trace: set[str] = set()

    fields = {
        "course_title": course.course_title,
        "audience": course.audience,
        "locale": course.locale_context,
        "topic": topic,
        "level": level.level_name,
    }

    system_part: str | None = None
    if FEATURE_PERSONA in features:
        system_part = templates.fragment("persona").format(**fields)
        trace.add(FEATURE_PERSONA)

    sections = [templates.fragment("core").format(**fields)]
    if FEATURE_SKILL_NAME in features:
        sections.append(templates.fragment("skill_name").format(**fields))
        trace.add(FEATURE_SKILL_NAME)
    if FEATURE_SKILL_EXPLANATION in features:
        definition = render_skill_explanation(level, course)
        sections.append(
            templates.fragment("skill_explanation").format(definition=definition, **fields)
        )
        trace.add(FEATURE_SKILL_EXPLANATION)
    if FEATURE_EXAMPLE in features:
        exemplar = select_example(level, course, seed)
        sections.append(templates.fragment("example").format(example=exemplar, **fields))
        trace.add(FEATURE_EXAMPLE)
    if FEATURE_COT in features:
        sections.append(templates.fragment("cot").format(**fields))
        trace.add(FEATURE_COT)
    sections.append(templates.fragment("output_format").format(**fields))

    return PromptText(
        user_part="\n\n".join(sections),
        system_part=system_part,
        feature_trace=frozenset(trace),
    )
