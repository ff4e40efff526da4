"""Run configuration: one JSON file, optionally overridden from the command line.

Example::

    {
      "prior": {"kind": "normal", "m": 0.0, "gamma": 0.5},
      "sigma": 0.2,
      "T": 1.0,
      "discount_r": 0.0,
      "grid": {"n_t": 2000, "n_x": 400},
      "sim": {"n_paths": 400000, "n_steps": 2000, "seed": 0, "measure": "P"},
      "outputs": "out"
    }

Grid bounds ``x_lo``/``x_hi`` default to the prior-dependent domain.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError, DriftStopError
from .filtering import FilterModel
from .integral import MCConfig
from .pde import DEFAULT_N_T, DEFAULT_N_X, GridSpec, default_grid
from .priors import Prior, prior_from_dict, shift_prior, validate
from .simulate import SimConfig

DEFAULT_CONFIG: dict[str, Any] = {
    "prior": {"kind": "normal", "m": 0.0, "gamma": 0.5},
    "sigma": 0.2,
    "T": 1.0,
}

_TOP_KEYS = {
    "prior", "sigma", "T", "discount_r", "grid", "sim", "outputs", "engine", "mc",
    "residual_tol", "boundary_csv", "sweep",
}


@dataclass(frozen=True)
class RunConfig:
    prior: Prior
    sigma: float
    T: float
    discount_r: float = 0.0
    grid: dict = field(default_factory=dict)
    sim: SimConfig = field(default_factory=SimConfig)
    outputs: str = "out"
    engine: str = "gauss"
    mc: MCConfig = field(default_factory=MCConfig)
    residual_tol: float = 2e-2
    boundary_csv: str | None = None
    sweep: dict = field(default_factory=dict)

    @property
    def model(self) -> FilterModel:
        return FilterModel(self.prior, self.sigma)

    def grid_spec(self, model: FilterModel | None = None) -> GridSpec:
        model = model or self.model
        n_t = int(self.grid.get("n_t", DEFAULT_N_T))
        n_x = int(self.grid.get("n_x", DEFAULT_N_X))
        g = default_grid(model, self.T, n_t, n_x)
        if "x_lo" in self.grid or "x_hi" in self.grid:
            g = GridSpec(self.T, n_t, float(self.grid.get("x_lo", g.x_lo)), float(self.grid.get("x_hi", g.x_hi)), n_x)
        return g

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "seed" in kw:
            kw["sim"] = replace(self.sim, seed=int(kw.pop("seed")))
        return replace(self, **kw)


def _float(data, key, default=None):
    if key not in data:
        if default is None:
            raise ConfigError(f"missing required field {key!r}")
        return default
    try:
        return float(data[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {key!r} must be a number") from exc


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    """Build and validate a RunConfig; the discount shift is applied before the prior is validated."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if "prior" not in data:
        raise ConfigError("missing required field 'prior'")
    r = _float(data, "discount_r", 0.0)
    prior = prior_from_dict(data["prior"])
    prior = shift_prior(prior, r) if r else validate(prior)
    sigma = _float(data, "sigma")
    T = _float(data, "T", 1.0)
    if not sigma > 0:
        raise ConfigError("sigma must be positive")
    if not T > 0:
        raise ConfigError("T must be positive")
    try:
        sim = SimConfig(**data.get("sim", {}))
        mc = MCConfig(**data.get("mc", {}))
    except TypeError as exc:
        raise ConfigError(f"bad sim/mc section: {exc}") from exc
    grid = dict(data.get("grid", {}))
    bad = set(grid) - {"n_t", "n_x", "x_lo", "x_hi"}
    if bad:
        raise ConfigError(f"unknown grid keys: {sorted(bad)}")
    engine = data.get("engine", "gauss")
    if engine not in ("gauss", "mc"):
        raise ConfigError(f"engine must be 'gauss' or 'mc' (got {engine!r})")
    cfg = RunConfig(
        prior=prior,
        sigma=sigma,
        T=T,
        discount_r=r,
        grid=grid,
        sim=sim,
        outputs=str(data.get("outputs", "out")),
        engine=engine,
        mc=mc,
        residual_tol=_float(data, "residual_tol", 2e-2),
        boundary_csv=data.get("boundary_csv"),
        sweep=dict(data.get("sweep", {})),
    )
    try:
        cfg.grid_spec()
    except DriftStopError as exc:
        raise ConfigError(f"bad grid: {exc}") from exc
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return config_from_dict(dict(DEFAULT_CONFIG))
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
