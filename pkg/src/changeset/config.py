"""Flat ``key = value`` experiment configuration.

One assignment per line, ``#`` starts a comment, unknown keys are
rejected.  The schema (defaults in parentheses):

    prior.kind            single_jump_exp | single_jump_density | first_line_poisson
    prior.gamma           rate parameter (1.0)
    prior.density_file    CSV of cell density values (single_jump_density only)
    obs.mu0               pre-change intensity (1.0)
    obs.mu1               post-change intensity (2.0)
    gain.c0 gain.c1       area gain/loss rates (1.0, 1.0)
    gain.k0 gain.k1       constant offset and per-generator reward (0.0, 0.0)
    region.r              window side (1.0)
    grid.n                cells per side (64)
    mc.q_samples          shared prior draws per observation (4096)
    mc.replications       replications for evaluate/verify (1000)
    quadrature.order      tensor Gauss-Legendre order (16)
    estimator             mc | exact (mc for the Poisson first line,
                          exact otherwise)
    seed                  root seed (0)
    mode                  detect | support | evaluate | verify | sweep (detect)
    strict                abort when the optimality conditions fail (false)
    sweep.gamma           comma-separated rates for the sweep mode (empty)

The density file holds ``grid.n × grid.n``-independent cell values for the
table's own grid over the window: row ``j`` (starting at the ``t2 = 0``
band) lists the cells left to right.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import GridSpec
from .priors import DensityTable, DetectionParams, PriorModel


class ConfigError(ValueError):
    """Invalid or unknown configuration input."""


_DEFAULTS = {
    "prior.kind": "first_line_poisson",
    "prior.gamma": "1.0",
    "prior.density_file": "",
    "obs.mu0": "1.0",
    "obs.mu1": "2.0",
    "gain.c0": "1.0",
    "gain.c1": "1.0",
    "gain.k0": "0.0",
    "gain.k1": "0.0",
    "region.r": "1.0",
    "grid.n": "64",
    "mc.q_samples": "4096",
    "mc.replications": "1000",
    "quadrature.order": "16",
    "estimator": "",
    "seed": "0",
    "mode": "detect",
    "strict": "false",
    "sweep.gamma": "",
}

_MODES = ("detect", "support", "evaluate", "verify", "sweep")


@dataclass(frozen=True)
class ExperimentConfig:
    prior_kind: str
    gamma: float
    density_file: str
    mu0: float
    mu1: float
    c0: float
    c1: float
    k0: float
    k1: float
    r: float
    n: int
    q_samples: int
    replications: int
    quadrature_order: int
    estimator: str
    seed: int
    mode: str
    strict: bool
    sweep_gamma: tuple = ()
    base_dir: Path = field(default_factory=Path)

    # -- construction ------------------------------------------------------

    @classmethod
    def parse(cls, text: str, base_dir: Path | str = ".") -> "ExperimentConfig":
        values = dict(_DEFAULTS)
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in values:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = val
        return cls._from_values(values, Path(base_dir))

    @classmethod
    def _from_values(cls, v: dict, base_dir: Path) -> "ExperimentConfig":
        def num(key, conv, positive=False, nonneg=False):
            try:
                x = conv(v[key])
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
            if positive and not x > 0:
                raise ConfigError(f"{key} must be positive, got {x}")
            if nonneg and x < 0:
                raise ConfigError(f"{key} must be >= 0, got {x}")
            return x

        mode = v["mode"]
        if mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {mode!r}")
        strict = v["strict"].lower()
        if strict not in ("true", "false"):
            raise ConfigError("strict must be true or false")
        estimator = v["estimator"]
        if estimator not in ("", "mc", "exact"):
            raise ConfigError("estimator must be 'mc' or 'exact'")
        sweep = tuple(float(x) for x in v["sweep.gamma"].split(",") if x.strip()) \
            if v["sweep.gamma"].strip() else ()
        cfg = cls(
            prior_kind=v["prior.kind"],
            gamma=num("prior.gamma", float, positive=True),
            density_file=v["prior.density_file"],
            mu0=num("obs.mu0", float, nonneg=True),
            mu1=num("obs.mu1", float, positive=True),
            c0=num("gain.c0", float, nonneg=True),
            c1=num("gain.c1", float, positive=True),
            k0=num("gain.k0", float),
            k1=num("gain.k1", float, nonneg=True),
            r=num("region.r", float, positive=True),
            n=num("grid.n", int, positive=True),
            q_samples=num("mc.q_samples", int, positive=True),
            replications=num("mc.replications", int, positive=True),
            quadrature_order=num("quadrature.order", int, positive=True),
            estimator=estimator,
            seed=num("seed", int),
            mode=mode,
            strict=strict == "true",
            sweep_gamma=sweep,
            base_dir=base_dir,
        )
        cfg.detection_params()  # validate intensity/gain constraints early
        if cfg.prior_kind == "single_jump_density" and not cfg.density_file:
            raise ConfigError("single_jump_density requires prior.density_file")
        return cfg

    @classmethod
    def load(cls, path: Path | str) -> "ExperimentConfig":
        path = Path(path)
        return cls.parse(path.read_text(), base_dir=path.parent)

    # -- derived objects ----------------------------------------------------

    def detection_params(self) -> DetectionParams:
        try:
            return DetectionParams(mu0=self.mu0, mu1=self.mu1, c0=self.c0,
                                   c1=self.c1, k0=self.k0, k1=self.k1, r=self.r)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def grid(self) -> GridSpec:
        return GridSpec(r=self.r, n=self.n)

    def prior(self, gamma: float | None = None) -> PriorModel:
        g = self.gamma if gamma is None else gamma
        try:
            if self.prior_kind == "single_jump_density":
                return PriorModel.single_jump_density(self._density_table())
            return PriorModel(kind=self.prior_kind, gamma=g)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def _density_table(self) -> DensityTable:
        path = Path(self.density_file)
        if not path.is_absolute():
            path = self.base_dir / path
        if not path.exists():
            raise ConfigError(f"density file not found: {path}")
        rows = [
            [float(x) for x in line.split(",")]
            for line in path.read_text().strip().splitlines()
            if line.strip() and not line.startswith("#")
        ]
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ConfigError("density file must hold a square cell table")
        try:
            return DensityTable(grid=GridSpec(r=self.r, n=arr.shape[0]),
                                values=arr.T.copy())
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def estimator_mode(self) -> str:
        if self.estimator:
            return self.estimator
        return "mc" if self.prior_kind == "first_line_poisson" else "exact"

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    # -- round trip ----------------------------------------------------------

    def resolved_lines(self) -> list[str]:
        return [
            f"prior.kind = {self.prior_kind}",
            f"prior.gamma = {self.gamma!r}",
            f"prior.density_file = {self.density_file}",
            f"obs.mu0 = {self.mu0!r}",
            f"obs.mu1 = {self.mu1!r}",
            f"gain.c0 = {self.c0!r}",
            f"gain.c1 = {self.c1!r}",
            f"gain.k0 = {self.k0!r}",
            f"gain.k1 = {self.k1!r}",
            f"region.r = {self.r!r}",
            f"grid.n = {self.n}",
            f"mc.q_samples = {self.q_samples}",
            f"mc.replications = {self.replications}",
            f"quadrature.order = {self.quadrature_order}",
            f"estimator = {self.estimator_mode()}",
            f"seed = {self.seed}",
            f"mode = {self.mode}",
            f"strict = {'true' if self.strict else 'false'}",
            f"sweep.gamma = {','.join(repr(g) for g in self.sweep_gamma)}",
        ]
