"""Seeded synthetic stand-in for the tabletop manipulation recordings.

Each trial draws an action and object features uniformly, rolls the motion
effects from explicit conditional tables, writes a congruent verbal
description through the bundled grammar, and can attach a noisy 3D hand
trajectory built from per-action waypoint templates.  Everything is a pure
function of (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .bn import Dataset, WorldSchema
from .grammar import Grammar, Sentence, default_grammar
from .hmm import Trajectory, preprocess
from .schema import (
    ACTION_VAR,
    ACTIONS,
    EFFECT_VARS,
    FEATURE_VARS,
    default_schema,
)

__all__ = [
    "WorldError",
    "WorldConfig",
    "Trial",
    "default_config",
    "sample_trial",
    "sample_description",
    "sample_trajectory",
    "generate_trials",
    "trials_to_dataset",
]


class WorldError(ValueError):
    """Inconsistent generator configuration."""


# ---------------------------------------------------------------------------
# defaults

_VERB_FAMILIES = {"grasp": ("grasp", "pick"), "tap": ("tap", "push"), "touch": ("touch", "poke")}

_VERB_STEMS = {
    "touch": ("touches", "touched", "touching"),
    "poke": ("pokes", "poked", "poking"),
    "tap": ("taps", "tapped", "tapping"),
    "push": ("pushes", "pushed", "pushing"),
    "grasp": ("grasps", "grasped", "grasping"),
    "pick": ("picks", "picked", "picking"),
}

_AGENTS = ("the robot", "he", "baltazar")
_AGENT_WEIGHTS = (0.5, 0.25, 0.25)

_SHAPE_WORDS = {"sphere": ("sphere", "ball"), "box": ("box", "cube", "square")}
_COLOR_WORDS = {"blue": "blue", "yellow": "yellow", "green1": "green", "green2": "green"}
_SIZE_WORDS = {"small": "small", "medium": None, "big": "big"}

# effect rows indexed (action, shape, size); sizes share the same row by default
_OBJVEL_BASE = {
    ("tap", "sphere"): (0.1, 0.2, 0.7),
    ("tap", "box"): (0.6, 0.3, 0.1),
    ("grasp", "sphere"): (0.3, 0.7, 0.0),
    ("grasp", "box"): (0.3, 0.7, 0.0),
    ("touch", "sphere"): (0.9, 0.1, 0.0),
    ("touch", "box"): (0.9, 0.1, 0.0),
}
_HANDVEL_BASE = {"grasp": (0.8, 0.2), "tap": (0.2, 0.8), "touch": (0.7, 0.3)}
_OBJHANDVEL_BASE = {
    ("tap", "sphere"): (0.1, 0.3, 0.6),
    ("tap", "box"): (0.5, 0.4, 0.1),
    ("grasp", "sphere"): (0.3, 0.6, 0.1),
    ("grasp", "box"): (0.3, 0.6, 0.1),
    ("touch", "sphere"): (0.8, 0.2, 0.0),
    ("touch", "box"): (0.8, 0.2, 0.0),
}
_CONTACT_BASE = {"grasp": (0.1, 0.9), "tap": (0.9, 0.1), "touch": (0.3, 0.7)}

# waypoint templates in torso-centered meters: x lateral, y forward, z up
_TEMPLATES: dict[str, tuple[np.ndarray, np.ndarray]] = {
    "grasp": (
        np.array(
            [
                [0.05, 0.15, 0.35],
                [0.14, 0.45, 0.02],
                [0.15, 0.47, 0.02],
                [0.15, 0.45, 0.55],
            ]
        ),
        np.array([0.40, 0.10, 0.50]),
    ),
    "tap": (
        np.array(
            [
                [-0.35, 0.40, 0.10],
                [0.10, 0.45, 0.08],
                [0.55, 0.50, 0.12],
            ]
        ),
        np.array([0.50, 0.50]),
    ),
    "touch": (
        np.array(
            [
                [-0.05, 0.25, 0.50],
                [0.12, 0.45, 0.02],
                [0.13, 0.46, 0.02],
                [0.00, 0.25, 0.45],
            ]
        ),
        np.array([0.35, 0.30, 0.35]),
    ),
}


def _verb_forms(stem3: str, past: str, ing: str) -> tuple[str, ...]:
    return (stem3, past, f"has {past}", f"just {past}", f"has just {past}", f"is {ing}")


def _default_conjunction(action: str, objvel: str) -> str:
    if action == "grasp":
        return "and" if objvel == "medium" else "but"
    if action == "tap":
        return "and" if objvel in ("medium", "fast") else "but"
    return "and" if objvel == "slow" else "but"


def _default_effect_phrases(action: str, objvel: str, shape: str) -> tuple[str, ...]:
    if objvel == "slow":
        return ("is inert", "is still")
    if action == "grasp":
        return ("rises", "is rising", "moves", "is moving")
    if action == "tap":
        motion = ("rolls", "is rolling") if shape == "sphere" else ("slides", "is sliding")
        return motion + ("moves", "is moving")
    return ("moves", "is moving")


@dataclass(frozen=True)
class WorldConfig:
    """Everything the generator needs, with explicit probability rows.

    ``effect_tables[name]`` has shape (actions, shapes, sizes, arity); every
    row is a distribution.  Description choices must only emit grammar
    vocabulary, which ``validate`` enforces at construction time.
    """

    schema: WorldSchema
    grammar: Grammar
    effect_tables: Mapping[str, np.ndarray]
    verb_families: Mapping[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(_VERB_FAMILIES)
    )
    verb_forms: Mapping[str, tuple[str, ...]] = field(
        default_factory=lambda: {k: _verb_forms(*v) for k, v in _VERB_STEMS.items()}
    )
    agents: tuple[str, ...] = _AGENTS
    agent_weights: tuple[float, ...] = _AGENT_WEIGHTS
    shape_words: Mapping[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(_SHAPE_WORDS)
    )
    color_words: Mapping[str, str] = field(default_factory=lambda: dict(_COLOR_WORDS))
    size_words: Mapping[str, str | None] = field(default_factory=lambda: dict(_SIZE_WORDS))
    attribute_prob: float = 0.5
    conjunctions: Mapping[tuple[str, str], str] = field(default_factory=dict)
    effect_phrases: Mapping[tuple[str, str, str], tuple[str, ...]] = field(
        default_factory=dict
    )
    templates: Mapping[str, tuple[np.ndarray, np.ndarray]] = field(
        default_factory=lambda: dict(_TEMPLATES)
    )
    noise_std: float = 0.05
    t_min: int = 20
    t_max: int = 60

    def __post_init__(self):
        if not self.conjunctions:
            table = {}
            for action in ACTIONS:
                for objvel in self.schema.variable("ObjVel").labels:
                    table[(action, objvel)] = _default_conjunction(action, objvel)
            object.__setattr__(self, "conjunctions", table)
        if not self.effect_phrases:
            table = {}
            for action in ACTIONS:
                for objvel in self.schema.variable("ObjVel").labels:
                    for shape in self.schema.variable("Shape").labels:
                        table[(action, objvel, shape)] = _default_effect_phrases(
                            action, objvel, shape
                        )
            object.__setattr__(self, "effect_phrases", table)
        self.validate()

    def validate(self) -> None:
        if not 0 < self.t_min <= self.t_max:
            raise WorldError("need 0 < t_min <= t_max")
        if self.noise_std < 0:
            raise WorldError("noise_std must be nonnegative")
        n_actions = len(ACTIONS)
        n_shapes = self.schema.variable("Shape").arity
        n_sizes = self.schema.variable("Size").arity
        for name in EFFECT_VARS:
            table = np.asarray(self.effect_tables[name])
            expected = (n_actions, n_shapes, n_sizes, self.schema.variable(name).arity)
            if table.shape != expected:
                raise WorldError(f"effect table {name!r} has shape {table.shape}, expected {expected}")
            if (table < 0).any() or not np.allclose(table.sum(axis=-1), 1.0, atol=1e-12):
                raise WorldError(f"effect table {name!r} rows must be distributions")
        vocab = set(self.grammar.vocabulary)
        emitted: set[str] = set()
        for agent in self.agents:
            emitted.update(agent.split())
        for forms in self.verb_forms.values():
            for form in forms:
                emitted.update(form.split())
        for words in self.shape_words.values():
            emitted.update(words)
        emitted.update(w for w in self.color_words.values() if w)
        emitted.update(w for w in self.size_words.values() if w)
        emitted.add("the")
        emitted.update(self.conjunctions.values())
        for phrases in self.effect_phrases.values():
            for phrase in phrases:
                emitted.update(phrase.split())
        unknown = emitted - vocab
        if unknown:
            raise WorldError(
                f"description rules emit words outside the vocabulary: {sorted(unknown)}"
            )


def default_config(seed_schema: WorldSchema | None = None) -> WorldConfig:
    """Config with the built-in effect tables, word maps and templates."""
    grammar = default_grammar()
    schema = seed_schema or default_schema(grammar)
    n_sizes = schema.variable("Size").arity
    tables: dict[str, np.ndarray] = {}

    def tile(rows_by_action_shape) -> np.ndarray:
        actions = []
        for action in ACTIONS:
            shapes = []
            for shape in schema.variable("Shape").labels:
                row = np.asarray(rows_by_action_shape(action, shape), dtype=np.float64)
                shapes.append(np.tile(row, (n_sizes, 1)))
            actions.append(np.stack(shapes, axis=0))
        return np.stack(actions, axis=0)

    tables["ObjVel"] = tile(lambda a, s: _OBJVEL_BASE[(a, s)])
    tables["HandVel"] = tile(lambda a, s: _HANDVEL_BASE[a])
    tables["ObjHandVel"] = tile(lambda a, s: _OBJHANDVEL_BASE[(a, s)])
    tables["Contact"] = tile(lambda a, s: _CONTACT_BASE[a])
    return WorldConfig(schema=schema, grammar=grammar, effect_tables=tables)


@dataclass(frozen=True)
class Trial:
    """One synthetic manipulation trial."""

    assignment: Mapping[str, int]  # the eight affordance variables
    words: frozenset[str]
    sentence: Sentence | None
    trajectory: Trajectory | None = None

    def label(self, schema: WorldSchema, name: str) -> str:
        return schema.variable(name).labels[self.assignment[name]]

    def to_row(self, schema: WorldSchema) -> np.ndarray:
        row = np.zeros(len(schema), dtype=np.int64)
        for name, value in self.assignment.items():
            row[schema.index(name)] = value
        for word in schema.word_variables():
            row[schema.index(word)] = schema.value_index(
                word, "true" if word in self.words else "false"
            )
        return row


def _choose(rng: np.random.Generator, options: Sequence, weights=None):
    idx = rng.choice(len(options), p=weights)
    return options[int(idx)]


def sample_description(
    trial: Trial, config: WorldConfig, rng: np.random.Generator
) -> tuple[Sentence, frozenset[str]]:
    """Surface sentence and word bag for a trial's action, features and effects.

    The verb matches the action family, object words follow the shape, size
    and color maps (with synonyms sampled), the conjunction encodes whether
    the outcome matched the action's intent, and the effect phrase tracks the
    object velocity.
    """
    schema = config.schema
    action = trial.label(schema, ACTION_VAR)
    shape = trial.label(schema, "Shape")
    color = trial.label(schema, "Color")
    size = trial.label(schema, "Size")
    objvel = trial.label(schema, "ObjVel")

    words: list[str] = []
    words.extend(_choose(rng, config.agents, config.agent_weights).split())
    lemma = _choose(rng, config.verb_families[action])
    words.extend(_choose(rng, config.verb_forms[lemma]).split())

    def object_phrase() -> list[str]:
        phrase = ["the"]
        size_word = config.size_words.get(size)
        if size_word and rng.random() < config.attribute_prob:
            phrase.append(size_word)
        color_word = config.color_words.get(color)
        if color_word and rng.random() < config.attribute_prob:
            phrase.append(color_word)
        phrase.append(_choose(rng, config.shape_words[shape]))
        return phrase

    words.extend(object_phrase())
    words.append(config.conjunctions[(action, objvel)])
    words.extend(object_phrase())
    words.extend(_choose(rng, config.effect_phrases[(action, objvel, shape)]).split())
    sentence = Sentence(tuple(words))
    return sentence, frozenset(sentence.words)


def sample_trajectory(
    action: str,
    config: WorldConfig,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
) -> Trajectory:
    """Noisy waypoint path for one action, resampled to a random length.

    The template polyline is sampled at T uniformly spaced times (T drawn
    from [t_min, t_max]), perturbed with isotropic Gaussian noise, and run
    through the standard preprocessing so the result is scale normalized.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    if action not in config.templates:
        raise WorldError(f"unknown action {action!r}")
    waypoints, durations = config.templates[action]
    waypoints = np.asarray(waypoints, dtype=np.float64)
    durations = np.asarray(durations, dtype=np.float64)
    if len(durations) != len(waypoints) - 1 or (durations <= 0).any():
        raise WorldError(f"bad waypoint template for {action!r}")
    knots = np.concatenate([[0.0], np.cumsum(durations)])
    knots /= knots[-1]
    t_frames = int(rng.integers(config.t_min, config.t_max + 1))
    u = np.linspace(0.0, 1.0, t_frames)
    path = np.stack(
        [np.interp(u, knots, waypoints[:, d]) for d in range(waypoints.shape[1])],
        axis=1,
    )
    path = path + rng.normal(0.0, config.noise_std, size=path.shape)
    raw = Trajectory(frames=path)
    return preprocess(raw, np.zeros_like(path))


def sample_trial(
    config: WorldConfig, seed: int, with_trajectory: bool = False
) -> Trial:
    """One fully specified trial, deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    schema = config.schema
    assignment: dict[str, int] = {}
    assignment[ACTION_VAR] = int(rng.integers(schema.variable(ACTION_VAR).arity))
    for name in FEATURE_VARS:
        assignment[name] = int(rng.integers(schema.variable(name).arity))
    action_idx = assignment[ACTION_VAR]
    shape_idx = assignment["Shape"]
    size_idx = assignment["Size"]
    for name in EFFECT_VARS:
        row = np.asarray(config.effect_tables[name])[action_idx, shape_idx, size_idx]
        assignment[name] = int(rng.choice(len(row), p=row))
    stub = Trial(assignment=assignment, words=frozenset(), sentence=None)
    sentence, words = sample_description(stub, config, rng)
    trajectory = None
    if with_trajectory:
        action = schema.variable(ACTION_VAR).labels[action_idx]
        trajectory = sample_trajectory(action, config, rng=rng)
    return replace(stub, words=words, sentence=sentence, trajectory=trajectory)


def generate_trials(
    config: WorldConfig,
    n: int,
    seed: int,
    trajectories_per_action: int = 0,
) -> list[Trial]:
    """Trials with seeds ``seed .. seed+n-1``.

    The first ``trajectories_per_action`` trials of each action get a
    trajectory attached; the draw order makes this choice independent of the
    sampled values, so the trial content never depends on the cap.
    """
    counts = {a: 0 for a in ACTIONS}
    trials = []
    for i in range(n):
        probe = sample_trial(config, seed + i, with_trajectory=False)
        action = probe.label(config.schema, ACTION_VAR)
        if counts[action] < trajectories_per_action:
            counts[action] += 1
            probe = sample_trial(config, seed + i, with_trajectory=True)
        trials.append(probe)
    return trials


def trials_to_dataset(
    trials: Sequence[Trial], schema: WorldSchema, provenance: str = ""
) -> Dataset:
    rows = np.stack([t.to_row(schema) for t in trials], axis=0)
    return Dataset(rows=rows, provenance=provenance)
