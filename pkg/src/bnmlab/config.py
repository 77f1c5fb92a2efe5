"""Flat key = value config files with section headers.

Sections: [scenario], [model], [train], [compare], and for the comparison
command any number of [method:LABEL] sections that override objective and
lambda against the [train] base. Unknown sections or keys are hard errors;
so are malformed values, with the offending section.key named.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, replace

from .objectives import ObjectiveKind
from .scenarios import (
    DomainShift,
    NO_SHIFT,
    ScenarioKind,
    ScenarioSpec,
    default_spec,
)
from .trainer import TrainConfig

ENV_SEED = "BNMLAB_SEED"
DEFAULT_SEED = 1

_SCENARIO_KEYS = {
    "kind", "n_labeled", "n_unlabeled", "n_classes", "n_known", "priors",
    "shift_dx", "shift_dy", "shift_deg", "cluster_std", "seed",
}
_MODEL_KEYS = {"hidden"}
_TRAIN_KEYS = {
    "objective", "lambda", "b_labeled", "b_unlabeled", "lr", "steps",
    "eval_every", "seed", "rank_tol",
}
_COMPARE_KEYS = {"seeds"}
_METHOD_KEYS = {"objective", "lambda"}


class ConfigError(ValueError):
    """Raised for any structural or value problem in a config file."""


@dataclass(frozen=True)
class RunSetup:
    scenario: ScenarioSpec
    hidden: int | None
    train: TrainConfig
    methods: tuple[tuple[str, TrainConfig], ...] = ()
    n_seeds: int = 4


def resolve_seed(flag: int | None, config_value: int | None) -> int:
    """Seed precedence: CLI flag > config > environment > default 1."""
    if flag is not None:
        return flag
    if config_value is not None:
        return config_value
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"environment variable {ENV_SEED}={env!r} is not an integer")
    return DEFAULT_SEED


def _read(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep keys case-sensitive
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}")
    return parser


def _check_keys(parser, section: str, allowed: set[str]) -> None:
    if not parser.has_section(section):
        return
    for key in parser.options(section):
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key} (allowed: {', '.join(sorted(allowed))})")


def _get(parser, section, key, conv, default=None):
    if not parser.has_section(section) or not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})")


def _parse_priors(raw: str) -> tuple[float, ...]:
    vals = tuple(float(part) for part in raw.split(","))
    if not vals:
        raise ValueError("empty prior list")
    return vals


def _scenario_from(parser, seed_flag: int | None) -> ScenarioSpec:
    _check_keys(parser, "scenario", _SCENARIO_KEYS)
    kind_raw = _get(parser, "scenario", "kind", str)
    if kind_raw is None:
        raise ConfigError("missing required key scenario.kind")
    kind = ScenarioKind.parse(kind_raw)
    base = default_spec(kind)

    seed = resolve_seed(seed_flag, _get(parser, "scenario", "seed", int))
    n_classes = _get(parser, "scenario", "n_classes", int, base.n_classes)
    priors = _get(parser, "scenario", "priors", _parse_priors)
    if priors is None:
        if n_classes != base.n_classes:
            raise ConfigError("scenario.priors must be given when scenario.n_classes is set")
        priors = base.class_priors

    dx = _get(parser, "scenario", "shift_dx", float)
    dy = _get(parser, "scenario", "shift_dy", float)
    deg = _get(parser, "scenario", "shift_deg", float)
    if kind is ScenarioKind.SSL:
        if any(v not in (None, 0.0) for v in (dx, dy, deg)):
            raise ConfigError("SSL scenarios cannot carry a shift")
        shift = NO_SHIFT
    elif dx is None and dy is None and deg is None:
        shift = base.shift
    else:
        shift = DomainShift(
            dx=dx if dx is not None else 0.0,
            dy=dy if dy is not None else 0.0,
            angle=math.radians(deg) if deg is not None else 0.0,
        )

    try:
        return replace(
            base,
            n_labeled=_get(parser, "scenario", "n_labeled", int, base.n_labeled),
            n_unlabeled=_get(parser, "scenario", "n_unlabeled", int, base.n_unlabeled),
            n_classes=n_classes,
            n_known=_get(
                parser, "scenario", "n_known", int,
                base.n_known if n_classes == base.n_classes else n_classes,
            ),
            class_priors=priors,
            shift=shift,
            cluster_std=_get(parser, "scenario", "cluster_std", float, base.cluster_std),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid scenario: {exc}")


def _train_from(parser, seed_flag: int | None, require_objective: bool) -> TrainConfig:
    _check_keys(parser, "train", _TRAIN_KEYS)
    obj_raw = _get(parser, "train", "objective", str)
    if obj_raw is None:
        if require_objective:
            raise ConfigError("missing required key train.objective")
        objective = ObjectiveKind.NONE
    else:
        try:
            objective = ObjectiveKind.parse(obj_raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for train.objective: {exc}")

    base = TrainConfig()
    seed = resolve_seed(seed_flag, _get(parser, "train", "seed", int))
    try:
        return TrainConfig(
            objective=objective,
            lam=_get(parser, "train", "lambda", float, base.lam),
            b_labeled=_get(parser, "train", "b_labeled", int, base.b_labeled),
            b_unlabeled=_get(parser, "train", "b_unlabeled", int, base.b_unlabeled),
            lr=_get(parser, "train", "lr", float, base.lr),
            steps=_get(parser, "train", "steps", int, base.steps),
            eval_every=_get(parser, "train", "eval_every", int, base.eval_every),
            seed=seed,
            rank_tol=_get(parser, "train", "rank_tol", float, base.rank_tol),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid train config: {exc}")


def _model_hidden(parser) -> int | None:
    _check_keys(parser, "model", _MODEL_KEYS)
    hidden = _get(parser, "model", "hidden", int, 0)
    if hidden < 0:
        raise ConfigError("model.hidden must be >= 0 (0 selects the linear model)")
    return hidden if hidden > 0 else None


def _known_sections(parser) -> None:
    for section in parser.sections():
        if section in ("scenario", "model", "train", "compare"):
            continue
        if section.startswith("method:") and len(section) > len("method:"):
            continue
        raise ConfigError(f"unknown section [{section}]")


def load_train_setup(path, seed_flag: int | None = None) -> RunSetup:
    """Config for the single-run command; train.objective is required."""
    parser = _read(path)
    _known_sections(parser)
    for section in parser.sections():
        if section.startswith("method:"):
            raise ConfigError("method sections are only valid for the compare command")
    if parser.has_section("compare"):
        raise ConfigError("[compare] is only valid for the compare command")
    return RunSetup(
        scenario=_scenario_from(parser, seed_flag),
        hidden=_model_hidden(parser),
        train=_train_from(parser, seed_flag, require_objective=True),
    )


def load_compare_setup(path, seed_flag: int | None = None, seeds_flag: int | None = None) -> RunSetup:
    """Config for the comparison command; needs at least two [method:*]."""
    parser = _read(path)
    _known_sections(parser)
    _check_keys(parser, "compare", _COMPARE_KEYS)
    base_train = _train_from(parser, seed_flag, require_objective=False)

    methods = []
    for section in parser.sections():
        if not section.startswith("method:"):
            continue
        label = section[len("method:"):]
        _check_keys(parser, section, _METHOD_KEYS)
        obj_raw = _get(parser, section, "objective", str)
        if obj_raw is None:
            raise ConfigError(f"missing required key {section}.objective")
        try:
            objective = ObjectiveKind.parse(obj_raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.objective: {exc}")
        lam = _get(parser, section, "lambda", float, base_train.lam)
        try:
            methods.append((label, replace(base_train, objective=objective, lam=lam)))
        except ValueError as exc:
            raise ConfigError(f"invalid method config in [{section}]: {exc}")
    if len(methods) < 2:
        raise ConfigError("compare configs need at least two [method:LABEL] sections")

    n_seeds = seeds_flag if seeds_flag is not None else _get(parser, "compare", "seeds", int, 4)
    if n_seeds < 1:
        raise ConfigError("compare.seeds must be >= 1")
    return RunSetup(
        scenario=_scenario_from(parser, seed_flag),
        hidden=_model_hidden(parser),
        train=base_train,
        methods=tuple(methods),
        n_seeds=n_seeds,
    )
