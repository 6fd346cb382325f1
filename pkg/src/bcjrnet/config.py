"""Experiment configuration: schema, defaults, YAML loading, hashing.

One structured config file drives every CLI command. All fields default, and
the defaults are family-aware: the SNR grid and the tap-noise variance differ
between the ISI-AWGN and Poisson channels. ``configs/`` in the repository
root ships fully commented default files that double as the schema
documentation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from .channels import Family
from .gmm import EmConfig
from .mlp import TrainConfig

__all__ = [
    "ConfigError",
    "GammaGrid",
    "ClassifierSettings",
    "MixtureSettings",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "config_hash",
]

_DEFAULT_SNR_DB = {
    Family.ISI_AWGN: (-2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0),
    Family.POISSON: (10.0, 14.0, 18.0, 22.0, 26.0, 30.0, 34.0),
}
_DEFAULT_SIGMA_E_SQ = {Family.ISI_AWGN: 0.1, Family.POISSON: 0.08}

DETECTOR_EXACT = "exact"
DETECTOR_BCJRNET = "bcjrnet"
SCENARIO_PERFECT = "perfect"
SCENARIO_UNCERTAIN = "uncertain"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


@dataclass(frozen=True)
class GammaGrid:
    """Deterministic, equally spaced tap-decay draws for the sweep."""

    count: int = 20
    low: float = 0.1
    high: float = 2.0

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.low])
        return np.linspace(self.low, self.high, self.count)


@dataclass(frozen=True)
class ClassifierSettings:
    hidden: tuple[int, ...] = (100, 50)
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 0.01

    def to_train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=seed,
            hidden=self.hidden,
            learning_rate=self.learning_rate,
        )


@dataclass(frozen=True)
class MixtureSettings:
    components: int | None = None  # None = one component per trellis state
    max_iter: int = 500
    rel_tol: float = 1e-8
    var_floor: float = 1e-6

    def to_em_config(self) -> EmConfig:
        return EmConfig(max_iter=self.max_iter, rel_tol=self.rel_tol, var_floor=self.var_floor)


@dataclass(frozen=True)
class ExperimentConfig:
    family: Family = Family.ISI_AWGN
    memory: int = 2
    seed: int = 1234
    snr_db: tuple[float, ...] = None  # type: ignore[assignment]
    gamma: float = 0.5
    gamma_grid: GammaGrid = field(default_factory=GammaGrid)
    train_size: int = 10000
    test_size: int = 50000
    block_len: int = 1000
    sigma_e_sq: float = None  # type: ignore[assignment]
    uncertain_realizations: int = 10
    detectors: tuple[str, ...] = (DETECTOR_EXACT, DETECTOR_BCJRNET)
    scenarios: tuple[str, ...] = (SCENARIO_PERFECT, SCENARIO_UNCERTAIN)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    mixture: MixtureSettings = field(default_factory=MixtureSettings)

    def __post_init__(self) -> None:
        if self.snr_db is None:
            object.__setattr__(self, "snr_db", _DEFAULT_SNR_DB[self.family])
        if self.sigma_e_sq is None:
            object.__setattr__(self, "sigma_e_sq", _DEFAULT_SIGMA_E_SQ[self.family])

    def scalar_snr_db(self) -> float:
        """The single SNR point required by train/simulate/detect."""
        if len(self.snr_db) != 1:
            raise ConfigError(
                "snr_db: this command needs one scalar SNR value, "
                f"got a grid of {len(self.snr_db)} points"
            )
        return self.snr_db[0]


def _expect(raw: dict, key: str, kinds: tuple[type, ...], path: str) -> Any:
    value = raw[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        names = "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"{path}{key}: expected {names}, got {type(value).__name__}")
    return value


def _check_unknown(raw: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(path + k for k in unknown)}")


def config_from_dict(raw: dict | None) -> ExperimentConfig:
    """Validate a parsed mapping and apply defaults.

    Raises :class:`ConfigError` naming the offending field path.
    """
    raw = dict(raw or {})
    allowed = {
        "family",
        "memory",
        "seed",
        "snr_db",
        "gamma",
        "gamma_grid",
        "train_size",
        "test_size",
        "block_len",
        "sigma_e_sq",
        "uncertain_realizations",
        "detectors",
        "scenarios",
        "classifier",
        "mixture",
    }
    _check_unknown(raw, allowed, "")

    kwargs: dict[str, Any] = {}
    if "family" in raw:
        name = _expect(raw, "family", (str,), "")
        try:
            kwargs["family"] = Family(name)
        except ValueError:
            choices = ", ".join(f.value for f in Family)
            raise ConfigError(f"family: expected one of {choices}, got {name!r}") from None
    for key in ("memory", "seed", "train_size", "test_size", "block_len", "uncertain_realizations"):
        if key in raw:
            value = _expect(raw, key, (int,), "")
            if key != "seed" and value < 1:
                raise ConfigError(f"{key}: must be >= 1, got {value}")
            kwargs[key] = value
    if "snr_db" in raw:
        value = raw["snr_db"]
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            kwargs["snr_db"] = (float(value),)
        elif isinstance(value, list) and value and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            kwargs["snr_db"] = tuple(float(v) for v in value)
        else:
            raise ConfigError("snr_db: expected a number or nonempty list of numbers")
    if "gamma" in raw:
        gamma = float(_expect(raw, "gamma", (int, float), ""))
        if gamma <= 0:
            raise ConfigError(f"gamma: must be positive, got {gamma}")
        kwargs["gamma"] = gamma
    if "sigma_e_sq" in raw:
        sig = float(_expect(raw, "sigma_e_sq", (int, float), ""))
        if sig < 0:
            raise ConfigError(f"sigma_e_sq: must be nonnegative, got {sig}")
        kwargs["sigma_e_sq"] = sig
    if "gamma_grid" in raw:
        sub = _expect(raw, "gamma_grid", (dict,), "")
        _check_unknown(sub, {"count", "low", "high"}, "gamma_grid.")
        grid_kwargs: dict[str, Any] = {}
        if "count" in sub:
            count = _expect(sub, "count", (int,), "gamma_grid.")
            if count < 1:
                raise ConfigError(f"gamma_grid.count: must be >= 1, got {count}")
            grid_kwargs["count"] = count
        for key in ("low", "high"):
            if key in sub:
                value = float(_expect(sub, key, (int, float), "gamma_grid."))
                if value <= 0:
                    raise ConfigError(f"gamma_grid.{key}: must be positive, got {value}")
                grid_kwargs[key] = value
        kwargs["gamma_grid"] = GammaGrid(**grid_kwargs)
        if kwargs["gamma_grid"].low > kwargs["gamma_grid"].high:
            raise ConfigError("gamma_grid.low: must not exceed gamma_grid.high")
    for key, choices in (("detectors", {DETECTOR_EXACT, DETECTOR_BCJRNET}),
                         ("scenarios", {SCENARIO_PERFECT, SCENARIO_UNCERTAIN})):
        if key in raw:
            value = raw[key]
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{key}: expected a nonempty list")
            bad = sorted(set(value) - choices)
            if bad:
                raise ConfigError(f"{key}: unknown entries {bad}, choices are {sorted(choices)}")
            kwargs[key] = tuple(dict.fromkeys(value))
    if "classifier" in raw:
        sub = _expect(raw, "classifier", (dict,), "")
        _check_unknown(sub, {"hidden", "epochs", "batch_size", "learning_rate"}, "classifier.")
        cls_kwargs: dict[str, Any] = {}
        if "hidden" in sub:
            hidden = sub["hidden"]
            if (
                not isinstance(hidden, list)
                or not hidden
                or not all(isinstance(h, int) and not isinstance(h, bool) and h >= 1 for h in hidden)
            ):
                raise ConfigError("classifier.hidden: expected a nonempty list of positive ints")
            cls_kwargs["hidden"] = tuple(hidden)
        for key in ("epochs", "batch_size"):
            if key in sub:
                value = _expect(sub, key, (int,), "classifier.")
                if value < 1:
                    raise ConfigError(f"classifier.{key}: must be >= 1, got {value}")
                cls_kwargs[key] = value
        if "learning_rate" in sub:
            lr = float(_expect(sub, "learning_rate", (int, float), "classifier."))
            if lr <= 0:
                raise ConfigError(f"classifier.learning_rate: must be positive, got {lr}")
            cls_kwargs["learning_rate"] = lr
        kwargs["classifier"] = ClassifierSettings(**cls_kwargs)
    if "mixture" in raw:
        sub = _expect(raw, "mixture", (dict,), "")
        _check_unknown(sub, {"components", "max_iter", "rel_tol", "var_floor"}, "mixture.")
        mix_kwargs: dict[str, Any] = {}
        if "components" in sub and sub["components"] is not None:
            comp = _expect(sub, "components", (int,), "mixture.")
            if comp < 1:
                raise ConfigError(f"mixture.components: must be >= 1, got {comp}")
            mix_kwargs["components"] = comp
        for key in ("max_iter",):
            if key in sub:
                value = _expect(sub, key, (int,), "mixture.")
                if value < 1:
                    raise ConfigError(f"mixture.{key}: must be >= 1, got {value}")
                mix_kwargs[key] = value
        for key in ("rel_tol", "var_floor"):
            if key in sub:
                value = float(_expect(sub, key, (int, float), "mixture."))
                if value <= 0:
                    raise ConfigError(f"mixture.{key}: must be positive, got {value}")
                mix_kwargs[key] = value
        kwargs["mixture"] = MixtureSettings(**mix_kwargs)
    return ExperimentConfig(**kwargs)


def load_config(path: str | None) -> ExperimentConfig:
    """Load a YAML config file; ``None`` gives the all-defaults config."""
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical plain-mapping form; round-trips through config_from_dict."""
    return {
        "family": cfg.family.value,
        "memory": cfg.memory,
        "seed": cfg.seed,
        "snr_db": list(cfg.snr_db),
        "gamma": cfg.gamma,
        "gamma_grid": {
            "count": cfg.gamma_grid.count,
            "low": cfg.gamma_grid.low,
            "high": cfg.gamma_grid.high,
        },
        "train_size": cfg.train_size,
        "test_size": cfg.test_size,
        "block_len": cfg.block_len,
        "sigma_e_sq": cfg.sigma_e_sq,
        "uncertain_realizations": cfg.uncertain_realizations,
        "detectors": list(cfg.detectors),
        "scenarios": list(cfg.scenarios),
        "classifier": {
            "hidden": list(cfg.classifier.hidden),
            "epochs": cfg.classifier.epochs,
            "batch_size": cfg.classifier.batch_size,
            "learning_rate": cfg.classifier.learning_rate,
        },
        "mixture": {
            "components": cfg.mixture.components,
            "max_iter": cfg.mixture.max_iter,
            "rel_tol": cfg.mixture.rel_tol,
            "var_floor": cfg.mixture.var_floor,
        },
    }


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()
