"""Run configuration: scenario grids, learner stacks, output settings.

Configs are plain JSON; every field has a default so a config file only
needs the knobs it changes. Grid values are validated against the
documented experiment ranges.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from dataclasses import asdict, dataclass, field

from .learners import BaseLearnerSpec

RANGES = {
    "n": (1000, 15000),
    "d": (8, 30),
    "beta": (0.0, 2.0),
    "event_rate": (0.025, 0.30),
    "m_strata": (1, 50),
}
DEFAULT_SCENARIO = {"n": 3000, "d": 10, "beta": 0.5, "event_rate": 0.10,
                    "m_strata": 10}
THREADS_ENV = "SURVHTE_THREADS"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: dict = field(default_factory=lambda: dict(DEFAULT_SCENARIO))
    grid: dict = field(default_factory=dict)
    replicates: int = 10
    seed: int = 20240501
    horizon: int = 12
    learners: tuple = ()
    importance_methods: tuple = ("adaptive_lasso", "elastic_net",
                                 "regression_forest", "bayes_tree_ensemble")
    scorers: dict = field(default_factory=dict)
    tmle: dict = field(default_factory=lambda: {"step_size": 1e-3,
                                                "max_steps": 5000})
    bootstrap: dict = field(default_factory=lambda: {"replicates": 30,
                                                     "sample_size": 8000})
    stratum: dict = field(default_factory=lambda: {"feature": "x2", "q": 1})
    threads: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates >= 1 required")
        if self.horizon < 1:
            raise ConfigError("horizon >= 1 required")
        for key, vals in self.grid.items():
            if key not in RANGES:
                raise ConfigError(f"unknown grid key '{key}'")
            if not isinstance(vals, (list, tuple)) or not vals:
                raise ConfigError(f"grid['{key}'] must be a non-empty list")
        for scen in self.scenarios():
            for key, (lo, hi) in RANGES.items():
                v = scen[key]
                if not lo <= v <= hi:
                    raise ConfigError(
                        f"{key}={v} outside documented range [{lo}, {hi}]")

    def scenarios(self) -> list[dict]:
        """Cartesian product of the grid over the scenario defaults."""
        base = dict(DEFAULT_SCENARIO)
        base.update(self.scenario)
        if not self.grid:
            return [dict(base, scenario_id=0)]
        keys = sorted(self.grid)
        out = []
        for i, combo in enumerate(itertools.product(*(self.grid[k] for k in keys))):
            scen = dict(base)
            scen.update(dict(zip(keys, combo)))
            scen["scenario_id"] = i
            out.append(scen)
        return out

    def learner_specs(self) -> list[BaseLearnerSpec]:
        from .learners import default_specs

        if not self.learners:
            return default_specs()
        out = []
        for item in self.learners:
            item = dict(item)
            kind = item.pop("kind")
            out.append(BaseLearnerSpec(kind, item))
        return out

    def resolved_threads(self, cli_value: int | None = None) -> int:
        """Thread count: the environment variable wins, then CLI, then config."""
        env = os.environ.get(THREADS_ENV)
        if env:
            return max(1, int(env))
        if cli_value is not None:
            return max(1, cli_value)
        return max(1, self.threads)

    def canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "learners" in data:
            data["learners"] = tuple(dict(v) for v in data["learners"])
        if "importance_methods" in data:
            data["importance_methods"] = tuple(data["importance_methods"])
        return cls(**data)
