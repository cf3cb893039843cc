"""Synthetic experiment generator with a known-truth sidecar.

Produces randomized-assignment experiment tables shaped like the large
deployments the engine targets: one control plus A-1 treatment arms, m metric
columns, categorical/numeric covariates, and optionally repeated observation
periods per user. Outcomes follow a linear data-generating process whose arm
effects are written to a sidecar JSON, so estimates can be checked against
truth. Output is a pure function of the configuration and seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import SpecError

DEFAULT_COVARIATES = "country:cat:8,device:cat:3"


@dataclass(frozen=True)
class CovariateSpec:
    name: str
    kind: str  # "cat" or "num"
    levels: int = 0


def parse_covariates(text: str) -> tuple[CovariateSpec, ...]:
    """Parse "name:cat:K,name:num,..." covariate descriptions."""
    out: list[CovariateSpec] = []
    if not text.strip():
        return ()
    for part in text.split(","):
        bits = part.strip().split(":")
        if len(bits) == 2 and bits[1] == "num":
            out.append(CovariateSpec(bits[0], "num"))
        elif len(bits) == 3 and bits[1] == "cat":
            try:
                levels = int(bits[2])
            except ValueError:
                levels = 0
            if levels < 2:
                raise SpecError(
                    f"categorical covariate {bits[0]!r} needs >= 2 levels"
                )
            out.append(CovariateSpec(bits[0], "cat", levels))
        else:
            raise SpecError(
                f"bad covariate {part!r}; expected 'name:num' or 'name:cat:K'"
            )
    names = [c.name for c in out]
    if len(set(names)) != len(names):
        raise SpecError("covariate names must be distinct")
    return tuple(out)


@dataclass(frozen=True)
class GenerateConfig:
    users: int
    arms: int = 2
    metrics: int = 1
    covariates: str = DEFAULT_COVARIATES
    periods: int = 1
    seed: int = 0
    effect: float | None = None
    noise: float = 1.0

    def __post_init__(self):
        if self.arms < 2:
            raise SpecError("need at least 2 arms (control plus one treatment)")
        if self.users < self.arms:
            raise SpecError(
                f"users ({self.users}) must be >= arms ({self.arms})"
            )
        if self.metrics < 1:
            raise SpecError("need at least one metric")
        if self.periods < 1:
            raise SpecError("need at least one period")
        if not self.noise > 0:
            raise SpecError("noise sigma must be positive")


def arm_names(arms: int) -> list[str]:
    return ["control"] + [f"arm{i:02d}" for i in range(1, arms)]


def metric_names(metrics: int) -> list[str]:
    return [f"m{i:02d}" for i in range(1, metrics + 1)]


def generate(cfg: GenerateConfig) -> tuple[pd.DataFrame, dict]:
    """Draw one experiment table and its ground-truth description.

    Assignment is uniform over arms and constant within user across periods.
    Each metric is mean + arm effect + additive covariate effects
    (+ a small per-period drift when periods > 1) + N(0, noise^2) noise; arm
    effects are the true ATEs recorded in the sidecar.
    """
    rng = np.random.default_rng(cfg.seed)
    covs = parse_covariates(cfg.covariates)
    arms = arm_names(cfg.arms)
    metrics = metric_names(cfg.metrics)

    n_users, t = cfg.users, cfg.periods
    user_arm = rng.integers(0, cfg.arms, size=n_users)
    cov_codes: dict[str, np.ndarray] = {}
    cov_values: dict[str, np.ndarray] = {}
    for c in covs:
        if c.kind == "cat":
            cov_codes[c.name] = rng.integers(0, c.levels, size=n_users)
        else:
            cov_values[c.name] = rng.normal(0.0, 1.0, size=n_users)

    if cfg.effect is None:
        tau = np.vstack(
            [np.zeros(cfg.metrics), rng.normal(0.0, 0.5, size=(cfg.arms - 1, cfg.metrics))]
        )
    else:
        tau = np.vstack(
            [np.zeros(cfg.metrics), np.full((cfg.arms - 1, cfg.metrics), cfg.effect)]
        )
    mu = rng.normal(0.0, 1.0, size=cfg.metrics)
    cat_effects = {
        c.name: rng.normal(0.0, 0.3, size=(c.levels, cfg.metrics))
        for c in covs
        if c.kind == "cat"
    }
    num_effects = {
        c.name: rng.normal(0.0, 0.3, size=cfg.metrics)
        for c in covs
        if c.kind == "num"
    }
    drift = rng.normal(0.0, 0.1, size=cfg.metrics) if t > 1 else np.zeros(cfg.metrics)

    n_rows = n_users * t
    user = np.repeat(np.arange(n_users, dtype=np.int64), t)
    period = np.tile(np.arange(t, dtype=np.int64), n_users)

    signal = mu[None, :] + tau[user_arm[user]]
    for name, codes in cov_codes.items():
        signal = signal + cat_effects[name][codes[user]]
    for name, values in cov_values.items():
        signal = signal + values[user, None] * num_effects[name][None, :]
    signal = signal + period[:, None] * drift[None, :]
    y = signal + rng.normal(0.0, cfg.noise, size=(n_rows, cfg.metrics))

    data: dict[str, np.ndarray] = {
        "user": user,
        "period": period,
        "arm": np.asarray(arms, dtype=object)[user_arm[user]],
    }
    for c in covs:
        if c.kind == "cat":
            labels = np.asarray(
                [f"{c.name}{k:02d}" for k in range(c.levels)], dtype=object
            )
            data[c.name] = labels[cov_codes[c.name][user]]
        else:
            data[c.name] = cov_values[c.name][user]
    for j, name in enumerate(metrics):
        data[name] = y[:, j]
    frame = pd.DataFrame(data)

    truth = {
        "users": cfg.users,
        "rows": n_rows,
        "arms": arms,
        "metrics": metrics,
        "periods": cfg.periods,
        "noise": cfg.noise,
        "seed": cfg.seed,
        "covariates": [
            {"name": c.name, "kind": c.kind, "levels": c.levels} for c in covs
        ],
        "effects": {
            name: {arm: float(tau[a, j]) for a, arm in enumerate(arms)}
            for j, name in enumerate(metrics)
        },
    }
    return frame, truth


def generate_to_files(
    cfg: GenerateConfig, out_path: str, truth_path: str | None = None
) -> dict:
    """Write the CSV (and the truth sidecar next to it) and return the truth."""
    frame, truth = generate(cfg)
    frame.to_csv(out_path, index=False)
    if truth_path is None:
        truth_path = out_path + ".truth.json"
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return truth
