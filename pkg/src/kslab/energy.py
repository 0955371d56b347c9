"""Multiscale ball-increment (Korevaar-Schoen type) energies.

For a field f on a weighted cloud, a radius r, and a walk-dimension style
exponent d_w, the energy over a region U is the double sum

    E(f, r) = sum_{x in U} mu_x * (1 / mu(B(x, r)))
              * sum_{y in B(x, r)} mu_y * (f(x) - f(y))**2 / r**d_w,

the discrete form of an integral of ball-averaged squared increments.  The
classical small-scale limit of such energies recovers a Dirichlet integral;
on a finite cloud the limit is unreachable, so sweeps over a geometric scale
grid report window proxies (liminf / limsup over the smallest resolved
scales) and a fitted endpoint value instead.

All reductions run in ascending centre-id order over fixed chunks, so
repeated evaluations are bitwise reproducible.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .space import DEFAULT_KAPPA, MeasuredPointCloud, segment_sums

# Canonical sweep geometry: r_k = r_max * ratio**k, k = 0..count-1, with
# r_max defaulting to diam/4, and proxies taken over the `window` smallest
# admissible scales.
DEFAULT_RATIO = 2.0**-0.5
DEFAULT_COUNT = 12
DEFAULT_WINDOW = 3

# Comparability quotients divide by max(liminf proxy, floor); the floor keeps
# near-constant fields from turning roundoff into huge ratios.
COMPARABILITY_FLOOR = 1e-14


@dataclass(frozen=True)
class ScalarField:
    """Real-valued field sampled on a cloud, one value per point."""

    cloud: MeasuredPointCloud
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.cloud.n:
            raise ValueError("field length does not match the cloud")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @staticmethod
    def from_function(cloud: MeasuredPointCloud, fn: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        if cloud.coords is None:
            raise ValueError("from_function needs coordinates")
        return ScalarField(cloud, np.asarray(fn(cloud.coords), dtype=float))

    @staticmethod
    def coordinate(cloud: MeasuredPointCloud, axis: int = 0) -> "ScalarField":
        if cloud.coords is None:
            raise ValueError("coordinate fields need coordinates")
        return ScalarField(cloud, cloud.coords[:, axis].copy())

    @staticmethod
    def constant(cloud: MeasuredPointCloud, value: float) -> "ScalarField":
        return ScalarField(cloud, np.full(cloud.n, float(value)))

    def l2sq(self) -> float:
        """Squared weighted L2 norm, sum of mu_i * f_i**2."""
        return float(np.dot(self.cloud.weights, self.values**2))

    def l2_norm(self) -> float:
        return float(np.sqrt(self.l2sq()))

    def lq_norm(self, q: float) -> float:
        if q <= 0:
            raise ValueError("norm exponent must be positive")
        return float(np.dot(self.cloud.weights, np.abs(self.values) ** q) ** (1.0 / q))

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def is_constant(self, tol: float = 0.0) -> bool:
        return bool(np.ptp(self.values) <= tol)


def _check_fields(cloud: MeasuredPointCloud, fields: Sequence[ScalarField]) -> np.ndarray:
    for f in fields:
        if f.cloud is not cloud:
            raise ValueError("field does not live on the given cloud")
    return np.stack([f.values for f in fields])


def _region_ids(cloud: MeasuredPointCloud, region: np.ndarray | None) -> np.ndarray | None:
    if region is None:
        return None
    ids = np.unique(np.asarray(region, dtype=np.intp))
    if ids.size and (ids[0] < 0 or ids[-1] >= cloud.n):
        raise ValueError("region ids out of range")
    if ids.size == 0:
        raise ValueError("region is empty")
    return ids


def _increment_table(
    cloud: MeasuredPointCloud,
    matrix: np.ndarray,
    r: float,
    centers: np.ndarray | None,
    want_density: bool,
) -> np.ndarray:
    """Per-centre normalized increment sums for one or more fields.

    Returns, for each field row and centre x,

        mu_x / mu(B(x, r)) * sum_{y in B(x, r)} mu_y (f(x) - f(y))**2

    either summed over centres (want_density=False -> shape (m,)) or kept
    per centre (want_density=True -> shape (m, len(centers))).
    """
    mu = cloud.weights
    m = matrix.shape[0]
    if want_density:
        n_out = cloud.n if centers is None else len(centers)
        out = np.zeros((m, n_out))
    else:
        out = np.zeros(m)
    pos = 0
    for sub, flat, counts in cloud.ball_chunks(r, centers=centers):
        if flat.size == 0:
            pos += sub.size
            continue
        w_flat = mu[flat]
        mass = segment_sums(w_flat, counts)
        scale = mu[sub] / mass
        for k in range(m):
            row = matrix[k]
            diff = np.repeat(row[sub], counts) - row[flat]
            contrib = segment_sums(w_flat * diff * diff, counts) * scale
            if want_density:
                out[k, pos : pos + sub.size] = contrib
            else:
                out[k] += contrib.sum()
        pos += sub.size
    return out


def ks_energy(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    r: float,
    d_w: float = 2.0,
    region: np.ndarray | None = None,
    kappa: float = DEFAULT_KAPPA,
) -> float:
    """Ball-increment energy of one field at one scale.

    ``region`` restricts the outer sum to the given centre ids; inner balls
    still range over the whole cloud.  The radius must clear the
    admissibility floor ``kappa * h``.
    """
    if d_w < 2.0:
        raise ValueError("d_w must be at least 2")
    cloud.require_admissible(r, kappa)
    mat = _check_fields(cloud, [f])
    ids = _region_ids(cloud, region)
    raw = _increment_table(cloud, mat, r, ids, want_density=False)[0]
    return float(raw / r**d_w)


def ks_energy_many(
    cloud: MeasuredPointCloud,
    fields: Sequence[ScalarField],
    r: float,
    d_w: float = 2.0,
    region: np.ndarray | None = None,
    kappa: float = DEFAULT_KAPPA,
) -> np.ndarray:
    """Energies of several fields at one scale, sharing the ball pass."""
    if d_w < 2.0:
        raise ValueError("d_w must be at least 2")
    cloud.require_admissible(r, kappa)
    mat = _check_fields(cloud, fields)
    ids = _region_ids(cloud, region)
    raw = _increment_table(cloud, mat, r, ids, want_density=False)
    return raw / r**d_w


def ks_energy_density(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    r: float,
    d_w: float = 2.0,
    centers: np.ndarray | None = None,
    kappa: float = DEFAULT_KAPPA,
) -> np.ndarray:
    """Per-centre contributions to the energy at scale r.

    Summing the returned vector over any centre set equals the energy
    restricted to that region, which is what localized functionals (maximal
    fields, ball-restricted sweeps) build on.
    """
    if d_w < 2.0:
        raise ValueError("d_w must be at least 2")
    cloud.require_admissible(r, kappa)
    mat = _check_fields(cloud, [f])
    ids = None if centers is None else np.asarray(centers, dtype=np.intp)
    raw = _increment_table(cloud, mat, r, ids, want_density=True)[0]
    return raw / r**d_w


@dataclass(frozen=True)
class ScaleGrid:
    """Near-geometric scale grid, mid-mesh snapped and admissibility-filtered.

    Each requested scale r_max * ratio**k is moved to the nearest
    (j + 1/2) * h before use.  On near-regular clouds, ball membership
    jumps wherever a radius crosses a lattice distance, and radii that sit
    close to such a crossing carry an O(h/r) bias in the increment sums.
    Mid-mesh radii reduce that to O((h/r)^2), which is what keeps the
    small-scale window usable for limit fits.
    """

    r_max: float
    ratio: float
    count: int
    kappa: float
    floor: float
    scales: np.ndarray  # descending, admissible only
    requested: int

    @property
    def r_min(self) -> float:
        return float(self.scales[-1])

    def window(self, w: int) -> np.ndarray:
        """The w smallest admissible scales, ascending."""
        return self.scales[::-1][: min(w, self.scales.size)]


def make_scale_grid(
    cloud: MeasuredPointCloud,
    r_max: float | None = None,
    ratio: float = DEFAULT_RATIO,
    count: int = DEFAULT_COUNT,
    kappa: float = DEFAULT_KAPPA,
) -> ScaleGrid:
    """Build the canonical sweep grid for a cloud.

    Scales below ``kappa * h`` are dropped; an entirely inadmissible grid is
    an error.
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError("ratio must lie in (0, 1)")
    if count < 1:
        raise ValueError("count must be positive")
    if r_max is None:
        r_max = cloud.diameter / 4.0
    if r_max <= 0.0:
        raise ValueError("r_max must be positive")
    raw = r_max * ratio ** np.arange(count)
    h = cloud.mesh
    snapped = (np.round(raw / h - 0.5) + 0.5) * h
    floor = kappa * h
    scales = np.unique(snapped[snapped >= floor])[::-1]
    if scales.size == 0:
        raise ValueError(
            f"empty admissible grid: r_max={r_max:g}, floor={floor:g}, count={count}"
        )
    return ScaleGrid(
        r_max=float(r_max),
        ratio=float(ratio),
        count=int(scales.size),
        kappa=float(kappa),
        floor=float(floor),
        scales=scales,
        requested=int(count),
    )


@dataclass(frozen=True)
class EnergySweep:
    """Energies of one field across a geometric scale grid.

    ``liminf_proxy`` / ``limsup_proxy`` are the min / max over the window
    (the smallest resolved scales); ``sup_all`` is the max over the whole
    grid; ``fitted_limit`` evaluates a log-log affine fit over the window at
    the smallest admissible scale, the declared stand-in for the r -> 0
    endpoint on a finite cloud.
    """

    d_w: float
    scales: np.ndarray
    values: np.ndarray
    window: int
    window_scales: np.ndarray
    window_values: np.ndarray
    liminf_proxy: float
    limsup_proxy: float
    sup_all: float
    fitted_limit: float
    field_l2sq: float
    grid: ScaleGrid
    region_size: int | None = None
    seed: int | None = None
    label: str = ""

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "energy"])
            for r, e in zip(self.scales, self.values):
                writer.writerow([repr(float(r)), repr(float(e))])

    def summary(self) -> dict:
        return {
            "label": self.label,
            "d_w": self.d_w,
            "kappa": self.grid.kappa,
            "ratio": self.grid.ratio,
            "window": self.window,
            "r_max": self.grid.r_max,
            "r_min": self.grid.r_min,
            "n_scales": int(self.scales.size),
            "liminf_proxy": self.liminf_proxy,
            "limsup_proxy": self.limsup_proxy,
            "sup_all": self.sup_all,
            "fitted_limit": self.fitted_limit,
            "field_l2sq": self.field_l2sq,
            "region_size": self.region_size,
            "seed": self.seed,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + "\n")


def _fit_window_endpoint(window_scales: np.ndarray, window_values: np.ndarray) -> float:
    """Log-log affine fit over the window, evaluated at its smallest scale."""
    if np.any(window_values <= 0.0):
        return 0.0
    if window_scales.size == 1:
        return float(window_values[0])
    lx = np.log(window_scales)
    ly = np.log(window_values)
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(np.exp(intercept + slope * np.log(window_scales[0])))


def energy_sweep(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    d_w: float = 2.0,
    region: np.ndarray | None = None,
    r_max: float | None = None,
    ratio: float = DEFAULT_RATIO,
    count: int = DEFAULT_COUNT,
    window: int = DEFAULT_WINDOW,
    kappa: float = DEFAULT_KAPPA,
    label: str = "",
) -> EnergySweep:
    """Evaluate the energy of ``f`` across the canonical geometric grid."""
    grid = make_scale_grid(cloud, r_max=r_max, ratio=ratio, count=count, kappa=kappa)
    ids = _region_ids(cloud, region)
    values = np.array(
        [ks_energy(cloud, f, float(r), d_w=d_w, region=ids, kappa=kappa) for r in grid.scales]
    )
    w_scales = grid.window(window)
    w_values = values[::-1][: w_scales.size]
    return EnergySweep(
        d_w=float(d_w),
        scales=grid.scales,
        values=values,
        window=int(min(window, w_scales.size)),
        window_scales=w_scales,
        window_values=w_values,
        liminf_proxy=float(w_values.min()),
        limsup_proxy=float(w_values.max()),
        sup_all=float(values.max()),
        fitted_limit=_fit_window_endpoint(w_scales, w_values),
        field_l2sq=f.l2sq(),
        grid=grid,
        region_size=None if ids is None else int(ids.size),
        label=label,
    )


def comparability_ratio(sweep: EnergySweep) -> float:
    """Quotient sup-over-all-scales / liminf-window-proxy.

    Bounded ratios across a family certify that the whole sweep is controlled
    by its small-scale window.  Constant fields (zero energy throughout)
    return 1 by convention; the denominator is floored at
    ``1e-14 * ||f||_L2^2 / r_min**d_w`` so roundoff cannot manufacture blowup.
    """
    if sweep.sup_all == 0.0:
        return 1.0
    floor = COMPARABILITY_FLOOR * sweep.field_l2sq / sweep.grid.r_min**sweep.d_w
    return float(sweep.sup_all / max(sweep.liminf_proxy, floor))


@dataclass(frozen=True)
class WalkDimFit:
    """Walk-dimension estimate with its provenance.

    ``method`` is ``"ks_scaling"`` (slope of raw increment sums against
    scale) or ``"eigen_ratio"`` (spectral rescaling across a mesh-halving
    hierarchy).  ``residual`` is the largest deviation of the individual
    estimates from the reported value.
    """

    d_w_hat: float
    method: str
    residual: float
    scales: np.ndarray
    per_item: np.ndarray
    details: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "d_w_hat": self.d_w_hat,
            "method": self.method,
            "residual": self.residual,
            "scales": [float(s) for s in self.scales],
            "per_item": [float(v) for v in self.per_item],
            **{k: v for k, v in self.details.items()},
        }


def raw_increment_sum(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    r: float,
    region: np.ndarray | None = None,
    kappa: float = DEFAULT_KAPPA,
) -> float:
    """Unnormalized double sum of ball-averaged squared increments.

    Equals ``r**d_w * ks_energy(...)`` for any d_w; its log-log slope in r is
    the scaling exponent the walk-dimension fit extracts.
    """
    cloud.require_admissible(r, kappa)
    mat = _check_fields(cloud, [f])
    ids = _region_ids(cloud, region)
    return float(_increment_table(cloud, mat, r, ids, want_density=False)[0])


def fit_walk_dimension(
    cloud: MeasuredPointCloud,
    fields: Sequence[ScalarField],
    grid: ScaleGrid | None = None,
    kappa: float = DEFAULT_KAPPA,
) -> WalkDimFit:
    """Estimate d_w from the scaling of raw increment sums.

    Per field, regress log S(f, r) on log r over the admissible grid; report
    the median slope.  Constant fields carry no signal and are skipped; all
    fields constant is an error, as is a grid with fewer than three scales.
    """
    if grid is None:
        grid = make_scale_grid(cloud, kappa=kappa)
    if grid.scales.size < 3:
        raise ValueError("walk-dimension fit needs at least three scales")
    slopes = []
    for f in fields:
        if f.is_constant():
            continue
        s_vals = np.array(
            [raw_increment_sum(cloud, f, float(r), kappa=kappa) for r in grid.scales]
        )
        if np.any(s_vals <= 0.0):
            continue
        slope, _ = np.polyfit(np.log(grid.scales), np.log(s_vals), 1)
        slopes.append(float(slope))
    if not slopes:
        raise ValueError("all fields are constant (or energy-free): no scaling signal")
    arr = np.array(slopes)
    med = float(np.median(arr))
    return WalkDimFit(
        d_w_hat=med,
        method="ks_scaling",
        residual=float(np.abs(arr - med).max()),
        scales=grid.scales,
        per_item=arr,
        details={"n_fields": len(slopes)},
    )


def liminf_window_scales(
    cloud: MeasuredPointCloud,
    window: int = DEFAULT_WINDOW,
    ratio: float = DEFAULT_RATIO,
    count: int = DEFAULT_COUNT,
    kappa: float = DEFAULT_KAPPA,
) -> np.ndarray:
    """Canonical small-scale window used by liminf proxies, ascending."""
    grid = make_scale_grid(cloud, ratio=ratio, count=count, kappa=kappa)
    return grid.window(window)
