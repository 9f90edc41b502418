"""Experiment configuration: file format, validation, presets.

Configs are flat key=value files; `#` starts a comment and repeating a key
appends to a list. Every key is also a command-line flag and an environment
variable (prefix BRAHMSIM_), with precedence flags > environment > file >
defaults.

Example::

    population_size = 1000
    byzantine_fraction = 0.10
    byzantine_fraction = 0.18
    trusted_fraction = 0.01
    eviction_rate = adaptive
    eviction_rate = 1.0
    rounds = 200
    repetitions = 5
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


# Keys whose repeated occurrences accumulate into lists.
_LIST_KEYS = {
    "byzantine_fraction",
    "trusted_fraction",
    "eviction_rate",
    "injection_fraction",
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class ExperimentConfig:
    """A full sweep description with documented defaults.

    The defaults mirror the recommended protocol parameters (view size 200,
    shares 0.4/0.4/0.2, 200 rounds, 10 repetitions, identification threshold
    0.10); the sampler count defaults to the view size.
    """

    population_size: int = 10000
    byzantine_fractions: tuple[float, ...] = (0.10,)
    trusted_fractions: tuple[float, ...] = (0.01,)
    eviction_rates: tuple[object, ...] = ("adaptive",)  # floats and/or "adaptive"
    view_size: int = 200
    sampler_count: int | None = None  # None: same as view_size
    push_share: float = 0.4
    pull_share: float = 0.4
    history_share: float = 0.2
    rounds: int = 200
    repetitions: int = 10
    seed: int = 42
    push_budget_factor: float = 1.0
    ident_threshold: float = 0.10
    ident_attack: bool = False
    injection_fractions: tuple[float, ...] = ()
    out_dir: str = "results"
    workers: int = 1
    force: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.view_size < 1:
            raise ConfigError("view_size must be >= 1")
        if not 0.0 < self.ident_threshold < 1.0:
            raise ConfigError("ident_threshold must lie in (0, 1)")
        if self.push_budget_factor < 0:
            raise ConfigError("push_budget_factor must be >= 0")
        shares = self.push_share + self.pull_share + self.history_share
        if abs(shares - 1.0) > 1e-9:
            raise ConfigError(f"push/pull/history shares must sum to 1, got {shares}")
        for f in self.byzantine_fractions:
            for t in self.trusted_fractions:
                if f < 0 or t < 0 or f + t > 1:
                    raise ConfigError(
                        f"invalid fraction pair f={f}, t={t} (need f,t >= 0 and f+t <= 1)"
                    )
        for ev in self.eviction_rates:
            if ev != "adaptive" and not (isinstance(ev, float) and 0.0 <= ev <= 1.0):
                raise ConfigError(f"eviction_rate must be 'adaptive' or in [0,1], got {ev!r}")
        for inj in self.injection_fractions:
            if not 0.0 <= inj <= 1.0:
                raise ConfigError(f"injection_fraction must lie in [0,1], got {inj}")
        return self

    @property
    def effective_sampler_count(self) -> int:
        return self.view_size if self.sampler_count is None else self.sampler_count


# Maps file/env/flag keys to (config field, value parser).
def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _BOOL_TRUE:
        return True
    if lowered in _BOOL_FALSE:
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_eviction(text: str) -> object:
    text = text.strip().lower()
    if text == "adaptive":
        return "adaptive"
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"eviction_rate must be a number or 'adaptive', got {text!r}")
    return value


_KEY_SPECS: dict[str, tuple[str, object]] = {
    "population_size": ("population_size", int),
    "byzantine_fraction": ("byzantine_fractions", float),
    "trusted_fraction": ("trusted_fractions", float),
    "eviction_rate": ("eviction_rates", _parse_eviction),
    "view_size": ("view_size", int),
    "sampler_count": ("sampler_count", int),
    "push_share": ("push_share", float),
    "pull_share": ("pull_share", float),
    "history_share": ("history_share", float),
    "rounds": ("rounds", int),
    "repetitions": ("repetitions", int),
    "seed": ("seed", int),
    "push_budget_factor": ("push_budget_factor", float),
    "ident_threshold": ("ident_threshold", float),
    "ident_attack": ("ident_attack", _parse_bool),
    "injection_fraction": ("injection_fractions", float),
    "out_dir": ("out_dir", str),
    "workers": ("workers", int),
    "force": ("force", _parse_bool),
}


def read_config_file(path: Path) -> dict[str, list[str]]:
    """Read a key=value file into raw string values (lists for repeated keys)."""
    raw: dict[str, list[str]] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_SPECS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        raw.setdefault(key, []).append(value)
    return raw


def apply_settings(config: ExperimentConfig, raw: dict[str, list[str]]) -> ExperimentConfig:
    """Overlay raw string settings (from file, env, or flags) onto a config."""
    updates = {}
    for key, values in raw.items():
        if key not in _KEY_SPECS:
            raise ConfigError(f"unknown configuration key {key!r}")
        attr, parser = _KEY_SPECS[key]
        try:
            parsed = [parser(v) for v in values]
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}")
        if key in _LIST_KEYS:
            updates[attr] = tuple(parsed)
        else:
            if len(parsed) > 1:
                raise ConfigError(f"key {key!r} given more than once")
            updates[attr] = parsed[0]
    return replace(config, **updates)


def parse_config(
    path: Path | None = None,
    overrides: dict[str, list[str]] | None = None,
    env: dict[str, str] | None = None,
    base: ExperimentConfig | None = None,
) -> ExperimentConfig:
    """Build a validated config, layering file < environment < overrides on
    top of `base` (the built-in defaults when not given)."""
    config = base if base is not None else ExperimentConfig()
    if path is not None:
        config = apply_settings(config, read_config_file(path))
    if env:
        env_raw: dict[str, list[str]] = {}
        for key in _KEY_SPECS:
            var = "BRAHMSIM_" + key.upper()
            if var in env:
                values = env[var].split(",") if key in _LIST_KEYS else [env[var]]
                env_raw[key] = values
        config = apply_settings(config, env_raw)
    if overrides:
        config = apply_settings(config, overrides)
    return config.validate()


# Calibrated so that a 1,000-node, view-size-100 baseline at f=18% settles in
# the same pollution regime the published 10,000-node runs report.
DESK_PUSH_BUDGET_FACTOR = 3.5


def preset(name: str) -> ExperimentConfig:
    """Named experiment presets.

    "paper-sweep" is the full published grid: 10,000 nodes, f from 10% to 30%
    in steps of 2 points, t from 1% to 50%, eviction rates 0/40/60/100% plus
    adaptive, 200 rounds, 10 repetitions. "desk" is the laptop-scale
    configuration used by the acceptance suite: 1,000 nodes, view size 100,
    5 repetitions, and a push budget factor calibrated so the baseline
    pollution regime matches the published large-scale behavior.
    """
    if name == "paper-sweep":
        return ExperimentConfig(
            population_size=10000,
            byzantine_fractions=tuple(round(0.10 + 0.02 * k, 2) for k in range(11)),
            trusted_fractions=(0.01, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50),
            eviction_rates=(0.0, 0.4, 0.6, 1.0, "adaptive"),
            view_size=200,
            rounds=200,
            repetitions=10,
            ident_attack=True,
        )
    if name == "desk":
        return ExperimentConfig(
            population_size=1000,
            byzantine_fractions=(0.10, 0.18, 0.30),
            trusted_fractions=(0.01, 0.10, 0.30),
            eviction_rates=("adaptive", 1.0),
            view_size=100,
            rounds=200,
            repetitions=5,
            push_budget_factor=DESK_PUSH_BUDGET_FACTOR,
            ident_attack=True,
        )
    raise ConfigError(f"unknown preset {name!r} (available: paper-sweep, desk)")
