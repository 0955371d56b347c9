"""Empirical Poincaré inequalities and the localized maximal function.

The checks quantify over sampled balls instead of all balls: a seeded set of
centers crossed with a geometric radius ladder stands in for the sup.  Three
right-hand sides are supported (squared local slope, small-scale
ball-increment energies, graph energy measure), sharing the same left-hand
ball variance.  On top of the same per-point energy densities sit the
maximal function, its weak-L² level-set bound, and the telescoping estimate
that controls ball averages along a dyadic chain of radii.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .energy import (
    DEFAULT_RATIO,
    DEFAULT_WINDOW,
    ScalarField,
    ks_energy_density,
    liminf_window_scales,
)
from .graphform import GraphDirichletForm
from .graphform import energy_measure as graph_energy_measure
from .smoothing import discrete_lip
from .space import DEFAULT_KAPPA, MeasuredPointCloud, ball_average, segment_sums

__all__ = [
    "DEFAULT_LAMBDA",
    "DEFAULT_CENTERS",
    "RADII_PER_DECADE",
    "RHS_FLOOR_FACTOR",
    "POINCARE_MODES",
    "PoincareSample",
    "PoincareReport",
    "MaximalField",
    "WeakL2Report",
    "TelescopeReport",
    "poincare_check",
    "maximal_function",
    "weak_l2_check",
    "telescoping_bound",
]

DEFAULT_LAMBDA = 2.0
DEFAULT_CENTERS = 50
RADII_PER_DECADE = 4
# Samples whose right-hand side falls under this fraction of ||f||^2 are
# dropped from C_best instead of dividing by numerical dust.
RHS_FLOOR_FACTOR = 1e-14

POINCARE_MODES = ("lip", "ks", "energy_measure")


@dataclass(frozen=True)
class PoincareSample:
    """One (center, radius) evaluation of the inequality."""

    center: int
    radius: float
    lhs: float
    rhs: float
    ratio: float  # NaN when the rhs sits under the floor


@dataclass(frozen=True)
class PoincareReport:
    """Sampled Poincaré quotients for one field and one rhs flavor.

    ``c_best`` is the largest lhs/rhs over samples whose rhs clears the
    floor; it is the empirical stand-in for the inequality constant.
    """

    mode: str
    d_w: float
    lam: float
    seed: int | None
    samples: tuple[PoincareSample, ...]
    c_best: float
    floor: float
    n_used: int

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["center", "R", "lhs", "rhs", "ratio"])
            for s in self.samples:
                writer.writerow(
                    [
                        s.center,
                        repr(float(s.radius)),
                        repr(float(s.lhs)),
                        repr(float(s.rhs)),
                        repr(float(s.ratio)),
                    ]
                )

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "lambda": self.lam,
            "d_w": self.d_w,
            "c_best": self.c_best,
            "seed": self.seed,
            "n_samples": len(self.samples),
            "n_used": self.n_used,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + "\n")


def _default_samples(
    cloud: MeasuredPointCloud,
    lam: float,
    seed: int,
    n_centers: int,
    radii_per_decade: int,
    kappa: float,
) -> list[tuple[int, float]]:
    r_lo = kappa * cloud.mesh
    r_hi = cloud.diameter / (2.0 * lam)
    if r_hi <= r_lo:
        raise ValueError(
            f"no admissible radii: floor {r_lo:g} exceeds diam/(2*lambda) = {r_hi:g}"
        )
    decades = math.log10(r_hi / r_lo)
    n_radii = max(2, math.ceil(radii_per_decade * decades))
    radii = np.geomspace(r_lo, r_hi, n_radii)
    rng = np.random.default_rng(seed)
    centers = np.sort(rng.choice(cloud.n, size=min(n_centers, cloud.n), replace=False))
    return [(int(c), float(r)) for c in centers for r in radii]


def poincare_check(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    mode: str,
    d_w: float = 2.0,
    lam: float = DEFAULT_LAMBDA,
    samples: Sequence[tuple[int, float]] | None = None,
    form: GraphDirichletForm | None = None,
    seed: int = 0,
    kappa: float = DEFAULT_KAPPA,
    n_centers: int = DEFAULT_CENTERS,
    radii_per_decade: int = RADII_PER_DECADE,
) -> PoincareReport:
    """Sample the 2-Poincaré inequality in the requested rhs flavor.

    lhs is always the ball variance sum over B(x, R) of mu |f - f_B|^2.
    rhs by mode:

    - ``lip``: R^2 times the summed squared local slope over B(x, lam R);
    - ``ks``: R^d_w times the small-scale window minimum of the
      ball-increment energy restricted to B(x, lam R);
    - ``energy_measure``: R^d_w times the graph energy measure of
      B(x, lam R), taken from ``form``.
    """
    if mode not in POINCARE_MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {POINCARE_MODES}")
    if lam < 1.0:
        raise ValueError("inflation factor must be at least 1")
    if f.cloud is not cloud:
        raise ValueError("field does not live on the given cloud")
    if mode == "energy_measure":
        if form is None:
            raise ValueError("energy_measure mode needs a graph form")
        if form.cloud is not cloud:
            raise ValueError("form does not live on the given cloud")

    used_seed: int | None = seed
    if samples is None:
        pairs = _default_samples(cloud, lam, seed, n_centers, radii_per_decade, kappa)
    else:
        pairs = [(int(c), float(r)) for c, r in samples]
        used_seed = None
    r_lo = kappa * cloud.mesh
    r_hi = cloud.diameter / (2.0 * lam)
    for c, r in pairs:
        if not (0 <= c < cloud.n):
            raise ValueError(f"center {c} out of range")
        if not (r_lo <= r <= r_hi * (1.0 + 1e-12)):
            raise ValueError(
                f"radius {r:g} outside the admissible range [{r_lo:g}, {r_hi:g}]"
            )

    mu = cloud.weights
    fv = f.values
    if mode == "lip":
        slope = discrete_lip(cloud, f, kappa * cloud.mesh, kappa=kappa).values
        rhs_density = mu * slope**2
        rhs_rows = rhs_density[None, :]
        rhs_power = 2.0
    elif mode == "ks":
        w_scales = liminf_window_scales(cloud, kappa=kappa)
        rhs_rows = np.stack(
            [ks_energy_density(cloud, f, float(r), d_w=d_w, kappa=kappa) for r in w_scales]
        )
        rhs_power = d_w
    else:
        rhs_rows = graph_energy_measure(form, f).density[None, :]
        rhs_power = d_w

    floor = RHS_FLOOR_FACTOR * f.l2sq()
    out: list[PoincareSample] = []
    for c, r in pairs:
        ids = cloud.ball_ids(c, r)
        w_ball = mu[ids]
        mean = float(np.dot(w_ball, fv[ids]) / w_ball.sum())
        lhs = float(np.dot(w_ball, (fv[ids] - mean) ** 2))
        region = ids if lam == 1.0 else cloud.ball_ids(c, lam * r)
        rhs = float(r**rhs_power * rhs_rows[:, region].sum(axis=1).min())
        ratio = lhs / rhs if rhs > floor else float("nan")
        out.append(PoincareSample(center=c, radius=r, lhs=lhs, rhs=rhs, ratio=ratio))

    finite = [s.ratio for s in out if np.isfinite(s.ratio)]
    return PoincareReport(
        mode=mode,
        d_w=float(d_w),
        lam=float(lam),
        seed=used_seed,
        samples=tuple(out),
        c_best=float(max(finite)) if finite else 0.0,
        floor=float(floor),
        n_used=len(finite),
    )


# ----------------------------------------------------------------------
# maximal function
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class MaximalField:
    """Localized maximal function M_R f.

    Per point, the value is the square root of the largest normalized
    small-scale energy over the radius ladder: values carry the ^{1/2}.
    """

    cloud: MeasuredPointCloud
    R: float
    d_w: float
    rho_grid: np.ndarray  # descending radii in [kappa h, R)
    window_scales: np.ndarray
    values: np.ndarray

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "maximal"])
            for i, v in enumerate(self.values):
                writer.writerow([i, repr(float(v))])


def _maximal_rho_grid(
    cloud: MeasuredPointCloud, R: float, kappa: float
) -> np.ndarray:
    """Mid-mesh snapped geometric ladder spanning [kappa h, R)."""
    floor = kappa * cloud.mesh
    if R <= floor:
        raise ValueError(f"empty radius ladder: R = {R:g} is at or under the floor {floor:g}")
    count = max(1, math.ceil(math.log(R / floor) / math.log(1.0 / DEFAULT_RATIO)) + 2)
    raw = R * DEFAULT_RATIO ** np.arange(count)
    h = cloud.mesh
    snapped = (np.round(raw / h - 0.5) + 0.5) * h
    keep = (snapped >= floor) & (snapped < R)
    grid = np.unique(snapped[keep])[::-1]
    if grid.size == 0:
        raise ValueError(f"empty radius ladder below R = {R:g}")
    return grid


def _normalized_window_minimum(
    cloud: MeasuredPointCloud,
    dens_rows: np.ndarray,
    rho: float,
) -> np.ndarray:
    """Per-center min-over-window energy of B(x, rho), divided by ball mass."""
    mu = cloud.weights
    n = cloud.n
    out = np.empty(n)
    pos = 0
    for sub, flat, counts in cloud.ball_chunks(rho):
        w_flat = mu[flat]
        mass = segment_sums(w_flat, counts)
        sums = np.stack([segment_sums(row[flat], counts) for row in dens_rows])
        out[pos : pos + sub.size] = sums.min(axis=0) / mass
        pos += sub.size
    return out


def maximal_function(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    R: float,
    d_w: float = 2.0,
    rho_grid: Sequence[float] | np.ndarray | None = None,
    kappa: float = DEFAULT_KAPPA,
    window: int = DEFAULT_WINDOW,
) -> MaximalField:
    """M_R f: sup over rho < R of the normalized local energy, rooted.

    The normalized quantity at radius rho is the window-minimum of the
    ball-restricted increment energy divided by mu(B(x, rho)); the reported
    value is its square root, so the field scales like the local slope.
    """
    if f.cloud is not cloud:
        raise ValueError("field does not live on the given cloud")
    if rho_grid is None:
        grid = _maximal_rho_grid(cloud, R, kappa)
    else:
        grid = np.unique(np.asarray(rho_grid, dtype=float))[::-1]
        if grid.size == 0:
            raise ValueError("empty radius ladder")
        floor = kappa * cloud.mesh
        if grid[-1] < floor or grid[0] >= R:
            raise ValueError(
                f"radius ladder must sit inside [{floor:g}, {R:g})"
            )
    w_scales = liminf_window_scales(cloud, window=window, kappa=kappa)
    dens_rows = np.stack(
        [ks_energy_density(cloud, f, float(r), d_w=d_w, kappa=kappa) for r in w_scales]
    )
    best = np.zeros(cloud.n)
    for rho in grid:
        cand = _normalized_window_minimum(cloud, dens_rows, float(rho))
        np.maximum(best, cand, out=best)
    return MaximalField(
        cloud=cloud,
        R=float(R),
        d_w=float(d_w),
        rho_grid=grid,
        window_scales=w_scales,
        values=np.sqrt(np.maximum(best, 0.0)),
    )


# ----------------------------------------------------------------------
# weak-L² bound
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class WeakL2Report:
    """Level-set quotients mu{M > t} t^2 / E for a ladder of thresholds."""

    R: float
    d_w: float
    e_proxy: float
    thresholds: np.ndarray
    quotients: np.ndarray

    @property
    def max_quotient(self) -> float:
        return float(self.quotients.max()) if self.quotients.size else 0.0

    def summary(self) -> dict:
        return {
            "R": self.R,
            "d_w": self.d_w,
            "e_proxy": self.e_proxy,
            "thresholds": [float(t) for t in self.thresholds],
            "quotients": [float(q) for q in self.quotients],
            "max_quotient": self.max_quotient,
        }


def weak_l2_check(
    maximal: MaximalField,
    f: ScalarField,
    d_w: float | None = None,
    thresholds: Sequence[float] | np.ndarray | None = None,
    kappa: float = DEFAULT_KAPPA,
) -> WeakL2Report:
    """Check mu{M_R f > t} <= C t^{-2} E against the global energy proxy.

    The reported quotient mu{M > t} t^2 / E must stay bounded as thresholds
    and resolutions vary; the theorem's C is its ceiling.
    """
    cloud = maximal.cloud
    if f.cloud is not cloud:
        raise ValueError("field does not live on the maximal field's cloud")
    if d_w is None:
        d_w = maximal.d_w
    mvals = maximal.values
    dens_rows = np.stack(
        [
            ks_energy_density(cloud, f, float(r), d_w=d_w, kappa=kappa)
            for r in maximal.window_scales
        ]
    )
    e_proxy = float(dens_rows.sum(axis=1).min())
    if e_proxy <= 0.0:
        if np.any(mvals > 0.0):
            raise RuntimeError(
                "zero global energy with a nonzero maximal field; "
                "inputs are inconsistent"
            )
        ladder = np.asarray(thresholds if thresholds is not None else [1.0], dtype=float)
        return WeakL2Report(
            R=maximal.R,
            d_w=float(d_w),
            e_proxy=0.0,
            thresholds=ladder,
            quotients=np.zeros(ladder.size),
        )
    if thresholds is None:
        positive = mvals[mvals > 0.0]
        top = float(positive.max())
        ladder = np.geomspace(top / 32.0, top * 2.0, 8)
    else:
        ladder = np.asarray(thresholds, dtype=float)
        if np.any(ladder <= 0.0):
            raise ValueError("thresholds must be positive")
    mu = cloud.weights
    quotients = np.array(
        [float(mu[mvals > t].sum()) * t**2 / e_proxy for t in ladder]
    )
    return WeakL2Report(
        R=maximal.R,
        d_w=float(d_w),
        e_proxy=e_proxy,
        thresholds=ladder,
        quotients=quotients,
    )


# ----------------------------------------------------------------------
# telescoping estimate
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TelescopeReport:
    """Dyadic-chain control of ball averages by the maximal function."""

    x: int
    rho: float
    rho_min: float
    levels: np.ndarray
    lhs: float
    rhs: float
    c_report: float
    ok: bool
    d_w: float
    lam: float


def telescoping_bound(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    x: int,
    rho: float,
    d_w: float = 2.0,
    lam: float = DEFAULT_LAMBDA,
    kappa: float = DEFAULT_KAPPA,
    window: int = DEFAULT_WINDOW,
) -> TelescopeReport:
    """|f_{B(x,rho)} - f_{B(x,rho_min)}| against rho^{d_w/2} M f(x).

    The chain halves the radius until the admissibility floor; the smallest
    ball average stands in for the pointwise value, which has no Lebesgue
    points at finite resolution.  The maximal value already carries its
    square root, so the right-hand side applies no further root.
    """
    if f.cloud is not cloud:
        raise ValueError("field does not live on the given cloud")
    if not (0 <= x < cloud.n):
        raise ValueError(f"center {x} out of range")
    floor = kappa * cloud.mesh
    if rho < 4.0 * floor:
        raise ValueError(
            f"rho = {rho:g} leaves no room for a dyadic chain (need >= {4 * floor:g})"
        )
    levels = [rho]
    while levels[-1] / 2.0 >= floor:
        levels.append(levels[-1] / 2.0)
    levels = np.array(levels)
    rho_min = float(levels[-1])

    fv = f.values
    lhs = abs(ball_average(cloud, fv, x, rho) - ball_average(cloud, fv, x, rho_min))

    w_scales = liminf_window_scales(cloud, window=window, kappa=kappa)
    dens_rows = np.stack(
        [ks_energy_density(cloud, f, float(r), d_w=d_w, kappa=kappa) for r in w_scales]
    )
    mu = cloud.weights
    m_val = 0.0
    for r in _maximal_rho_grid(cloud, lam * rho, kappa):
        ids = cloud.ball_ids(x, float(r))
        mass = float(mu[ids].sum())
        val = float(dens_rows[:, ids].sum(axis=1).min()) / mass
        m_val = max(m_val, val)
    m_val = math.sqrt(max(m_val, 0.0))

    rhs = rho ** (d_w / 2.0) * m_val
    # Ball averages of a flat field differ by rounding ulps; do not let
    # that noise turn a vacuous bound into an infinite constant.
    noise = 1e-12 * max(1.0, float(np.abs(fv).max()))
    if rhs > 0.0:
        c_report = lhs / rhs
    else:
        c_report = 0.0 if lhs <= noise else float("inf")
    return TelescopeReport(
        x=int(x),
        rho=float(rho),
        rho_min=rho_min,
        levels=levels,
        lhs=float(lhs),
        rhs=float(rhs),
        c_report=float(c_report),
        ok=bool(np.isfinite(c_report)),
        d_w=float(d_w),
        lam=float(lam),
    )
