"""Reference Dirichlet forms on grids and the Sierpinski gasket.

Conductance networks double as the comparison targets for the ball-increment
energies: grid forms are calibrated so that the energy of a smooth field
approaches its Dirichlet integral as the mesh refines, while the gasket form
carries the resistance renormalization (5/3)^m that makes harmonic-extension
energies level-independent.  On top of the forms sit spectra, heat kernels
with sub-Gaussian fits, the eigenvalue walk-dimension oracle, the intrinsic
metric, and the energy-measure versus Lipschitz comparison.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

from .energy import ScalarField, WalkDimFit
from .smoothing import discrete_lip
from .space import DEFAULT_KAPPA, MeasuredPointCloud, gasket_graph

__all__ = [
    "DENSE_EIGEN_LIMIT",
    "PARTIAL_EIGEN_COUNT",
    "GraphDirichletForm",
    "EnergyMeasure",
    "Spectrum",
    "HeatKernelFit",
    "IntrinsicMetricResult",
    "GammaLipReport",
    "build_form",
    "form_energy",
    "form_bilinear",
    "energy_measure",
    "spectrum",
    "heat_kernel",
    "heat_kernel_row",
    "heat_kernel_diag",
    "fit_subgaussian",
    "eigen_walk_dimension",
    "intrinsic_metric",
    "gamma_vs_lip_check",
    "gasket_harmonic_field",
]

# Full dense eigensolves stay cheap up to a few thousand vertices; beyond
# that only a truncated low end of the spectrum is computed.
DENSE_EIGEN_LIMIT = 5000
PARTIAL_EIGEN_COUNT = 200


@dataclass(frozen=True)
class GraphDirichletForm:
    """Symmetric conductance network over a point cloud.

    Edges are stored once with ``edge_i < edge_j``; the quadratic form is
    𝓔(f) = sum over edges of c_e (f_i - f_j)^2, which equals the half of
    the double sum over ordered pairs.  ``renorm`` records the generator
    scale c/mu of the level so hierarchy comparisons can divide it back out.
    """

    cloud: MeasuredPointCloud
    edge_i: np.ndarray
    edge_j: np.ndarray
    conductances: np.ndarray
    kind: str
    renorm: float
    level: int | None = None

    def __post_init__(self) -> None:
        i, j, c = self.edge_i, self.edge_j, self.conductances
        if not (i.size == j.size == c.size):
            raise ValueError("edge arrays must have equal length")
        if np.any(i == j):
            raise ValueError("self-loops are not allowed")
        if np.any(c <= 0) or not np.all(np.isfinite(c)):
            raise ValueError("conductances must be positive and finite")
        if np.any(i > j):
            raise ValueError("edges must be stored with edge_i < edge_j")
        n_comp = connected_components(self.adjacency, directed=False)[0]
        if n_comp != 1:
            raise ValueError(f"form must be connected, found {n_comp} components")

    @property
    def n(self) -> int:
        return self.cloud.n

    @property
    def n_edges(self) -> int:
        return int(self.edge_i.size)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric conductance matrix (zero diagonal)."""
        n = self.cloud.n
        i = np.concatenate([self.edge_i, self.edge_j])
        j = np.concatenate([self.edge_j, self.edge_i])
        c = np.concatenate([self.conductances, self.conductances])
        return sp.csr_matrix((c, (i, j)), shape=(n, n))

    @cached_property
    def degrees(self) -> np.ndarray:
        """Per-vertex sum of incident conductances."""
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def laplacian_apply(self, values: np.ndarray) -> np.ndarray:
        """(C f)(x) = sum_y c_xy (f_x - f_y), the conductance Laplacian."""
        return self.degrees * values - self.adjacency @ values

    def generator_apply(self, values: np.ndarray) -> np.ndarray:
        """L f = (1/mu) C f, the mu-symmetric generator."""
        return self.laplacian_apply(values) / self.cloud.weights

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "c"])
            for i, j, c in zip(self.edge_i, self.edge_j, self.conductances):
                writer.writerow([int(i), int(j), repr(float(c))])


def _grid1d_edges(n: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(n - 1, dtype=np.intp)
    return idx, idx + 1


def _grid2d_edges(side: int) -> tuple[np.ndarray, np.ndarray]:
    ids = np.arange(side * side, dtype=np.intp).reshape(side, side)
    horiz = (ids[:, :-1].ravel(), ids[:, 1:].ravel())
    vert = (ids[:-1, :].ravel(), ids[1:, :].ravel())
    return (
        np.concatenate([horiz[0], vert[0]]),
        np.concatenate([horiz[1], vert[1]]),
    )


def build_form(cloud: MeasuredPointCloud, kind: str) -> GraphDirichletForm:
    """Construct the reference form of the given kind on its natural cloud.

    grid1d / grid2d use nearest-neighbour edges with conductance
    1/(h^2 n), so smooth-field energies approach Dirichlet integrals;
    gasket uses the level graph with uniform conductance (5/3)^m.
    """
    meta_kind = cloud.meta.get("kind")
    n = cloud.n
    if kind == "grid1d":
        if meta_kind != "interval_grid":
            raise ValueError(f"grid1d form needs an interval grid, got {meta_kind}")
        i, j = _grid1d_edges(n)
        c = np.full(i.size, 1.0 / (cloud.mesh**2 * n))
        renorm = 1.0 / cloud.mesh**2
        level = None
    elif kind == "grid2d":
        if meta_kind != "square_grid":
            raise ValueError(f"grid2d form needs a square grid, got {meta_kind}")
        side = int(round(np.sqrt(n)))
        if side * side != n:
            raise ValueError("square grid cloud has a non-square point count")
        i, j = _grid2d_edges(side)
        c = np.full(i.size, 1.0 / (cloud.mesh**2 * n))
        renorm = 1.0 / cloud.mesh**2
        level = None
    elif kind == "gasket":
        if meta_kind != "gasket":
            raise ValueError(f"gasket form needs a gasket cloud, got {meta_kind}")
        level = int(cloud.meta["level"])
        _, _, edges = gasket_graph(level)
        i, j = edges[:, 0].copy(), edges[:, 1].copy()
        c = np.full(i.size, (5.0 / 3.0) ** level)
        renorm = float(c[0] * n)
    else:
        raise ValueError(f"unknown form kind {kind!r}")
    return GraphDirichletForm(
        cloud=cloud,
        edge_i=np.asarray(i, dtype=np.intp),
        edge_j=np.asarray(j, dtype=np.intp),
        conductances=c,
        kind=kind,
        renorm=float(renorm),
        level=level,
    )


def _check_form_field(form: GraphDirichletForm, f: ScalarField) -> None:
    if f.cloud is not form.cloud:
        raise ValueError("field does not live on the form's cloud")


def form_energy(form: GraphDirichletForm, f: ScalarField) -> float:
    _check_form_field(form, f)
    diff = f.values[form.edge_i] - f.values[form.edge_j]
    return float(np.sum(form.conductances * diff**2))


def form_bilinear(form: GraphDirichletForm, f: ScalarField, g: ScalarField) -> float:
    """𝓔(f, g) by polarization of the edge sums."""
    _check_form_field(form, f)
    _check_form_field(form, g)
    df = f.values[form.edge_i] - f.values[form.edge_j]
    dg = g.values[form.edge_i] - g.values[form.edge_j]
    return float(np.sum(form.conductances * df * dg))


@dataclass(frozen=True)
class EnergyMeasure:
    """Per-vertex energy density; densities sum to the form energy."""

    form: GraphDirichletForm
    density: np.ndarray

    @property
    def total(self) -> float:
        return float(self.density.sum())

    def per_mass(self) -> np.ndarray:
        """Radon-Nikodym surrogate dGamma/dmu."""
        return self.density / self.form.cloud.weights


def energy_measure(form: GraphDirichletForm, f: ScalarField) -> EnergyMeasure:
    """Gamma(f,f)(x) = 1/2 sum_y c_xy (f_x - f_y)^2."""
    _check_form_field(form, f)
    diff = f.values[form.edge_i] - f.values[form.edge_j]
    half = 0.5 * form.conductances * diff**2
    density = np.zeros(form.n)
    np.add.at(density, form.edge_i, half)
    np.add.at(density, form.edge_j, half)
    return EnergyMeasure(form=form, density=density)


# ----------------------------------------------------------------------
# spectra and heat kernels
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    """mu-orthonormal eigenpairs of the generator L = (1/mu) C.

    Solved as the generalized symmetric problem C u = lambda M u through the
    substitution v = M^{1/2} u, which keeps everything in one deterministic
    dense solve.  ``residual`` is the worst mu-norm of L u - lambda u,
    relative to the generator's Gershgorin scale so the 1e-8 gate means
    the same thing on unit-scale graphs and fine lattices.
    """

    form: GraphDirichletForm
    eigenvalues: np.ndarray
    eigenfields: np.ndarray  # (n, k), column k is u_k
    residual: float
    k_max: int

    @property
    def n(self) -> int:
        return self.form.n

    def field(self, k: int) -> ScalarField:
        return ScalarField(self.form.cloud, self.eigenfields[:, k].copy())

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "lambda"])
            for k, lam in enumerate(self.eigenvalues):
                writer.writerow([k, repr(float(lam))])


def spectrum(form: GraphDirichletForm, k_max: int | None = None) -> Spectrum:
    """Low eigenpairs of the generator, dense below DENSE_EIGEN_LIMIT."""
    n = form.n
    if k_max is None:
        k_max = n if n <= DENSE_EIGEN_LIMIT else PARTIAL_EIGEN_COUNT
    if not (1 <= k_max <= n):
        raise ValueError(f"k_max must lie in [1, {n}], got {k_max}")
    w = form.cloud.weights
    inv_sqrt = 1.0 / np.sqrt(w)
    if n <= DENSE_EIGEN_LIMIT:
        lap = np.zeros((n, n))
        c = form.conductances
        i, j = form.edge_i, form.edge_j
        np.subtract.at(lap, (i, j), c)
        np.subtract.at(lap, (j, i), c)
        np.add.at(lap, (i, i), c)
        np.add.at(lap, (j, j), c)
        sym = lap * inv_sqrt[:, None] * inv_sqrt[None, :]
        # eigh on the explicitly symmetrized matrix is deterministic.
        vals, vecs = scipy.linalg.eigh((sym + sym.T) / 2.0)
        vals, vecs = vals[:k_max], vecs[:, :k_max]
    else:
        lap = sp.diags(form.degrees) - form.adjacency
        sym = sp.diags(inv_sqrt) @ lap @ sp.diags(inv_sqrt)
        v0 = np.full(n, 1.0 / np.sqrt(n))  # fixed start for reproducible runs
        # Shift slightly below zero: at sigma = 0 the factorization would
        # hit the Laplacian's own null mode.
        scale = float(np.max(form.degrees / w))
        vals, vecs = sp.linalg.eigsh(
            sym.tocsc(), k=k_max, sigma=-1e-3 * scale, v0=v0
        )
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]

    vals = vals.copy()
    vals[np.abs(vals) < 1e-11 * max(1.0, float(np.abs(vals).max()))] = 0.0
    fields = vecs * inv_sqrt[:, None]
    # Sign convention: the entry of largest magnitude is positive.
    for k in range(fields.shape[1]):
        col = fields[:, k]
        lead = np.argmax(np.abs(col))
        if col[lead] < 0:
            fields[:, k] = -col

    residual = 0.0
    gen = (form.degrees[:, None] * fields - form.adjacency @ fields) / w[:, None]
    # Normalize by the generator's Gershgorin scale: an absolute gate is
    # unattainable in float64 once ||L|| reaches 1/h^2 territory.
    scale = max(1.0, 2.0 * float(np.max(form.degrees / w)))
    for k in range(fields.shape[1]):
        r = gen[:, k] - vals[k] * fields[:, k]
        residual = max(residual, float(np.sqrt(np.sum(w * r**2))) / scale)
    if residual > 1e-8:
        raise RuntimeError(
            f"eigensolver relative residual {residual:.3e} exceeds 1e-8; "
            "spectrum not usable"
        )
    return Spectrum(
        form=form,
        eigenvalues=vals,
        eigenfields=fields,
        residual=residual,
        k_max=int(k_max),
    )


def _require_positive_time(t: float) -> None:
    if not np.isfinite(t) or t <= 0.0:
        raise ValueError(f"heat kernel time must be positive, got {t!r}")


def heat_kernel(spec: Spectrum, t: float, x: int, y: int) -> float:
    """p_t(x, y) = sum_k exp(-lambda_k t) u_k(x) u_k(y)."""
    _require_positive_time(t)
    decay = np.exp(-spec.eigenvalues * t)
    return float(np.sum(decay * spec.eigenfields[x] * spec.eigenfields[y]))


def heat_kernel_row(spec: Spectrum, t: float, x: int) -> np.ndarray:
    """All of p_t(x, .) in one pass."""
    _require_positive_time(t)
    decay = np.exp(-spec.eigenvalues * t)
    return spec.eigenfields @ (decay * spec.eigenfields[x])


def heat_kernel_diag(spec: Spectrum, t: float) -> np.ndarray:
    """On-diagonal values p_t(x, x) for every vertex."""
    _require_positive_time(t)
    decay = np.exp(-spec.eigenvalues * t)
    return np.einsum("nk,k,nk->n", spec.eigenfields, decay, spec.eigenfields)


@dataclass(frozen=True)
class HeatKernelFit:
    """Sub-Gaussian fit of off-diagonal decay plus on-diagonal dimension.

    The model is log p_t(x,y) + log mu(B(x, t^{1/d_w})) = log c1
    - c2 (d(x,y)/t^{1/d_w})^{d_w/(d_w-1)}; ``d_w_fit`` ties the exponent to
    the space-time scaling, ``exponent_fit`` refits the exponent freely so
    the tie itself can be checked.  ``d_s_fit`` comes from the on-diagonal
    slope; ``residual`` is the worst absolute log-scale misfit.
    """

    c1: float
    c2: float
    d_w_fit: float
    exponent_fit: float
    d_s_fit: float
    residual: float
    t_window: tuple[float, float]
    n_samples: int

    def to_json(self, path: str | Path) -> None:
        payload = {
            "c1": self.c1,
            "c2": self.c2,
            "d_w_fit": self.d_w_fit,
            "exponent_fit": self.exponent_fit,
            "d_s_fit": self.d_s_fit,
            "residual": self.residual,
            "t_window": list(self.t_window),
            "n_samples": self.n_samples,
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _subgaussian_sse(
    d_w: float,
    exponent: float | None,
    log_p: np.ndarray,
    dists: np.ndarray,
    times: np.ndarray,
    ball_mass: "callable",
) -> tuple[float, float, float, float]:
    """Least squares in (log c1, c2) at fixed exponents.

    Returns (sse, log_c1, c2, max_abs_residual).  c2 is clamped nonnegative:
    a negative slope means the model is inverted, and the clamp shows up as
    a large residual instead of a nonsense fit.
    """
    radii = times ** (1.0 / d_w)
    y = log_p + np.log(ball_mass(radii))
    expo = d_w / (d_w - 1.0) if exponent is None else exponent
    xi = (dists / radii) ** expo
    a = np.column_stack([np.ones_like(xi), -xi])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    if coef[1] < 0.0:
        coef[1] = 0.0
        coef[0] = float(np.mean(y))
    pred = a @ coef
    res = y - pred
    return float(np.sum(res**2)), float(coef[0]), float(coef[1]), float(
        np.max(np.abs(res))
    )


def fit_subgaussian(
    spec: Spectrum,
    cloud: MeasuredPointCloud,
    t_window: tuple[float, float] | None = None,
    pairs: Sequence[tuple[int, int]] | None = None,
    n_times: int = 12,
    seed: int = 0,
) -> HeatKernelFit:
    """Fit the sub-Gaussian off-diagonal model over (time, pair) samples.

    The time window defaults to [3/lambda_max, 0.3/lambda_1]: early enough
    that the kernel is not saturated at the constant mode, late enough that
    single-vertex discreteness has smoothed out.  Distances in the decay
    variable are network geodesics (shortest paths over the form's edges):
    the kernel propagates through edges, and on ramified geometries the
    straight-line distance understates the travel cost by an uneven factor.
    Only samples that sit 2 to 12 e-folds below the on-diagonal value enter
    the fit: closer in there is no decay signal, farther out the lattice
    tail leaves the sub-Gaussian regime.
    """
    if cloud is not spec.form.cloud:
        raise ValueError("cloud does not match the spectrum's form")
    form = spec.form
    lam = spec.eigenvalues
    positive = lam[lam > 0]
    if positive.size == 0:
        raise ValueError("spectrum has no positive eigenvalues")
    lam1, lam_max = float(positive.min()), float(positive.max())
    if t_window is None:
        t_window = (3.0 / lam_max, 0.3 / lam1)
    t_lo, t_hi = map(float, t_window)
    if not (0.0 < t_lo < t_hi):
        raise ValueError(f"degenerate time window {t_window!r}")
    times = np.geomspace(t_lo, t_hi, n_times)

    rng = np.random.default_rng(seed)
    n = cloud.n
    if pairs is None:
        centers = np.sort(rng.choice(n, size=min(8, n), replace=False))
    else:
        pairs = [(int(x), int(y)) for x, y in pairs if x != y]
        if not pairs:
            raise ValueError("no usable off-diagonal pairs")
        centers = np.unique([x for x, _ in pairs])
    center_row = {int(x): k for k, x in enumerate(centers)}
    edge_len = cloud.pair_distances(form.edge_i, form.edge_j)
    geo = dijkstra(
        _length_graph(form, edge_len), indices=centers, directed=False
    )
    if pairs is None:
        d_lo = 12.0 * cloud.mesh
        d_hi = 0.5 * float(geo[np.isfinite(geo)].max())
        if d_hi <= d_lo:
            d_hi = float(geo[np.isfinite(geo)].max())
        pairs = []
        for row, x in enumerate(centers):
            for target in np.geomspace(d_lo, d_hi, 5):
                y = int(np.argmin(np.abs(geo[row] - target)))
                if y != x:
                    pairs.append((int(x), y))
        pairs = sorted(set(pairs))

    rows = []
    for t in times:
        diag_cache: dict[int, float] = {}
        for x, y in pairs:
            if x not in diag_cache:
                diag_cache[x] = heat_kernel(spec, float(t), x, x)
            p = heat_kernel(spec, float(t), x, y)
            if p <= 0.0 or diag_cache[x] <= 0.0:
                continue
            gap = np.log(diag_cache[x] / p)
            if 2.0 <= gap <= 12.0:
                rows.append((np.log(p), geo[center_row[x], y], float(t), x))
    if len(rows) < 8:
        raise ValueError("too few kernel samples in the decay band")
    log_p = np.array([r[0] for r in rows])
    dists = np.array([r[1] for r in rows])
    tvals = np.array([r[2] for r in rows])
    x_ids = np.array([r[3] for r in rows], dtype=np.intp)

    def mass_at(radii: np.ndarray) -> np.ndarray:
        out = np.empty(radii.size)
        for k in range(radii.size):
            ids = cloud.ball_ids(int(x_ids[k]), float(radii[k]))
            out[k] = cloud.weights[ids].sum() if ids.size else float(
                cloud.weights[x_ids[k]]
            )
        return out

    def best_over(grid: np.ndarray, expo_of: "callable") -> tuple:
        found = None
        for g in grid:
            dw, expo = expo_of(g)
            sse, lc1, c2, res = _subgaussian_sse(
                dw, expo, log_p, dists, tvals, mass_at
            )
            if found is None or sse < found[0]:
                found = (sse, g, lc1, c2, res)
        return found

    # Coarse-to-fine search over the tied exponent model.
    coarse = best_over(np.arange(1.2, 4.0001, 0.05), lambda g: (g, None))
    fine = best_over(
        np.arange(coarse[1] - 0.05, coarse[1] + 0.0501, 0.005),
        lambda g: (g, None),
    )
    _, d_w_fit, log_c1, c2, residual = fine

    # Free-exponent refit at the fitted space-time scaling.
    ec = best_over(np.arange(1.05, 5.0001, 0.05), lambda g: (d_w_fit, g))
    ef = best_over(
        np.arange(ec[1] - 0.05, ec[1] + 0.0501, 0.005), lambda g: (d_w_fit, g)
    )
    exponent_fit = float(ef[1])

    # On-diagonal decay over the same window gives the spectral dimension.
    slopes = []
    for x in centers[:8]:
        pd = np.array([heat_kernel(spec, float(t), int(x), int(x)) for t in times])
        keep = pd > 0
        if keep.sum() >= 3:
            slopes.append(np.polyfit(np.log(times[keep]), np.log(pd[keep]), 1)[0])
    if not slopes:
        raise ValueError("no usable on-diagonal samples")
    d_s_fit = -2.0 * float(np.median(slopes))

    return HeatKernelFit(
        c1=float(np.exp(log_c1)),
        c2=float(c2),
        d_w_fit=float(d_w_fit),
        exponent_fit=exponent_fit,
        d_s_fit=d_s_fit,
        residual=float(residual),
        t_window=(t_lo, t_hi),
        n_samples=int(log_p.size),
    )


# ----------------------------------------------------------------------
# walk dimension from the spectral hierarchy
# ----------------------------------------------------------------------


def eigen_walk_dimension(
    coarse: GraphDirichletForm, fine: GraphDirichletForm
) -> WalkDimFit:
    """Walk exponent from relaxation times across one mesh halving.

    The generator eigenvalues carry the per-level calibration, so the
    comparison divides it back out: T = renorm / lambda_k is the relaxation
    time in walk units, and d_w_hat = log(T_fine/T_coarse) / log(h_c/h_f).
    lambda_2 and lambda_3 repeat the estimate as a consistency residual.
    """
    if coarse.kind != fine.kind:
        raise ValueError(f"forms from different hierarchies: {coarse.kind} vs {fine.kind}")
    h_c, h_f = coarse.cloud.mesh, fine.cloud.mesh
    ratio = h_c / h_f
    if not (1.7 <= ratio <= 2.3):
        raise ValueError(
            f"forms are not consecutive levels: mesh ratio {ratio:.3g} "
            "is not a halving"
        )
    k_need = min(4, coarse.n, fine.n)
    spec_c = spectrum(coarse, k_max=k_need)
    spec_f = spectrum(fine, k_max=k_need)
    estimates = []
    for k in range(1, k_need):
        t_c = coarse.renorm / spec_c.eigenvalues[k]
        t_f = fine.renorm / spec_f.eigenvalues[k]
        estimates.append(np.log(t_f / t_c) / np.log(ratio))
    estimates = np.array(estimates)
    d_w_hat = float(estimates[0])
    return WalkDimFit(
        d_w_hat=d_w_hat,
        method="eigen_ratio",
        residual=float(np.max(np.abs(estimates - d_w_hat))),
        scales=np.array([h_c, h_f]),
        per_item=estimates,
        details={"kind": coarse.kind, "mesh_ratio": float(ratio)},
    )


# ----------------------------------------------------------------------
# intrinsic metric
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class IntrinsicMetricResult:
    """Certified bracket around the intrinsic distance.

    ``lower`` is attained by an explicitly feasible field (the constraint
    Gamma(f,f) <= mu is re-verified before returning); ``upper`` comes from
    the per-edge increment cap along shortest paths.
    """

    lower: float
    upper: float
    iterations: int
    witness: np.ndarray

    def __float__(self) -> float:
        return self.lower


def _edge_lengths_feasible(form: GraphDirichletForm) -> np.ndarray:
    """Per-edge caps that make any 1-Lipschitz field (w.r.t. them) feasible.

    Bounding |df| on each edge by min over its endpoints z of
    sqrt(2 mu_z / (deg_z c_e)) gives Gamma(z) <= mu_z vertex by vertex.
    """
    deg_count = np.zeros(form.n)
    np.add.at(deg_count, form.edge_i, 1.0)
    np.add.at(deg_count, form.edge_j, 1.0)
    mu = form.cloud.weights
    cap_i = 2.0 * mu[form.edge_i] / (deg_count[form.edge_i] * form.conductances)
    cap_j = 2.0 * mu[form.edge_j] / (deg_count[form.edge_j] * form.conductances)
    return np.sqrt(np.minimum(cap_i, cap_j))


def _edge_lengths_upper(form: GraphDirichletForm) -> np.ndarray:
    """Per-edge bound |df| <= sqrt(2 min(mu_u, mu_v) / c_e) for feasible f."""
    mu = form.cloud.weights
    return np.sqrt(
        2.0 * np.minimum(mu[form.edge_i], mu[form.edge_j]) / form.conductances
    )


def _length_graph(form: GraphDirichletForm, lengths: np.ndarray) -> sp.csr_matrix:
    n = form.n
    i = np.concatenate([form.edge_i, form.edge_j])
    j = np.concatenate([form.edge_j, form.edge_i])
    d = np.concatenate([lengths, lengths])
    return sp.csr_matrix((d, (i, j)), shape=(n, n))


def _gamma_density(form: GraphDirichletForm, values: np.ndarray) -> np.ndarray:
    diff = values[form.edge_i] - values[form.edge_j]
    half = 0.5 * form.conductances * diff**2
    density = np.zeros(form.n)
    np.add.at(density, form.edge_i, half)
    np.add.at(density, form.edge_j, half)
    return density


def intrinsic_metric(
    form: GraphDirichletForm,
    x: int,
    y: int,
    iterations: int = 60,
) -> IntrinsicMetricResult:
    """Certified bounds on sup{f(x) - f(y) : Gamma(f,f) <= mu pointwise}.

    Starts from the distance field of a provably feasible edge metric, then
    alternates push steps on the endpoints with per-vertex quadratic
    projections (Gauss-Seidel in id order) and a global rescale, keeping the
    best certified value seen.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n = form.n
    if not (0 <= x < n and 0 <= y < n):
        raise ValueError("vertex id out of range")
    if x == y:
        return IntrinsicMetricResult(0.0, 0.0, 0, np.zeros(n))

    mu = form.cloud.weights
    adj = form.adjacency
    indptr, indices, data = adj.indptr, adj.indices, adj.data

    dist_feasible = dijkstra(
        _length_graph(form, _edge_lengths_feasible(form)), indices=y, directed=False
    )
    if not np.all(np.isfinite(dist_feasible)):
        raise ValueError("vertices are not connected in the form")
    upper = float(
        dijkstra(
            _length_graph(form, _edge_lengths_upper(form)), indices=y, directed=False
        )[x]
    )

    def certify(values: np.ndarray) -> tuple[float, np.ndarray]:
        """Scale into the feasible set and return the certified gap.

        Always hands back a fresh array so the stored witness cannot be
        mutated by later ascent steps.
        """
        gamma = _gamma_density(form, values)
        worst = np.sqrt(np.max(gamma / mu))
        values = values / worst if worst > 1.0 else values.copy()
        return float(values[x] - values[y]), values

    f = dist_feasible.copy()
    best, witness = certify(f)

    for it in range(iterations):
        step = 0.25 * max(upper - best, 1e-3 * max(upper, 1.0))
        f[x] += step
        # Three projection sweeps: move each violating vertex toward the
        # conductance-weighted mean of its neighbours, as far as its own
        # quadratic constraint allows.
        for _ in range(3):
            for z in range(n):
                lo, hi = indptr[z], indptr[z + 1]
                nbr = indices[lo:hi]
                c = data[lo:hi]
                a = c.sum()
                m = float(np.dot(c, f[nbr])) / a
                q = 0.5 * float(np.dot(c, (f[nbr] - m) ** 2))
                cap_sq = max(0.0, 2.0 * (mu[z] - q)) / a
                dev = f[z] - m
                cap = np.sqrt(cap_sq)
                if abs(dev) > cap:
                    f[z] = m + np.sign(dev) * cap
        value, scaled = certify(f)
        if value > best:
            best, witness = value, scaled
        f = scaled.copy()

    return IntrinsicMetricResult(
        lower=best, upper=upper, iterations=iterations, witness=witness
    )


# ----------------------------------------------------------------------
# energy measure vs Lipschitz slope
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class GammaLipReport:
    """Best constant in Gamma/mu <= C (Lip_h f)^2 over active vertices."""

    c_best: float
    r_loc: float
    n_active: int

    def summary(self) -> dict:
        return {
            "c_best": float(self.c_best),
            "r_loc": float(self.r_loc),
            "n_active": int(self.n_active),
        }


def gamma_vs_lip_check(
    form: GraphDirichletForm,
    cloud: MeasuredPointCloud,
    f: ScalarField,
    r_loc: float | None = None,
    kappa: float = DEFAULT_KAPPA,
) -> GammaLipReport:
    """Compare the energy-measure density with the squared discrete slope.

    Grid forms only: the comparison is a d_w = 2 statement and has no
    analogue for the resistance-scaled gasket form.
    """
    if form.kind not in ("grid1d", "grid2d"):
        raise ValueError(f"gamma/Lip comparison is limited to grids, got {form.kind}")
    if cloud is not form.cloud:
        raise ValueError("cloud does not match the form")
    _check_form_field(form, f)
    if r_loc is None:
        r_loc = kappa * cloud.mesh
    ratio_gamma = energy_measure(form, f).per_mass()
    lip = discrete_lip(cloud, f, r_loc, kappa=kappa).values
    active = lip > 0
    if not np.any(active):
        return GammaLipReport(c_best=0.0, r_loc=float(r_loc), n_active=0)
    c_best = float(np.max(ratio_gamma[active] / lip[active] ** 2))
    return GammaLipReport(
        c_best=c_best, r_loc=float(r_loc), n_active=int(active.sum())
    )


# ----------------------------------------------------------------------
# gasket harmonic extension
# ----------------------------------------------------------------------


def gasket_harmonic_field(
    cloud: MeasuredPointCloud, boundary: tuple[float, float, float] = (1.0, 0.0, 0.0)
) -> ScalarField:
    """Harmonic extension of corner values through the 1/5-2/5 rule.

    Each subdivision assigns a side midpoint 2/5 of either endpoint value
    plus 1/5 of the opposite corner; with the (5/3)^m conductances this
    keeps the energy of the extension level-independent.
    """
    if cloud.meta.get("kind") != "gasket":
        raise ValueError("harmonic extension needs a gasket cloud")
    level = int(cloud.meta["level"])
    side = 2**level
    corners = ((0, 0), (side, 0), (0, side))
    values: dict[tuple[int, int], float] = dict(zip(corners, map(float, boundary)))
    cells = [corners]
    for _ in range(level):
        nxt = []
        for a, b, c in cells:
            ab = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
            ac = ((a[0] + c[0]) // 2, (a[1] + c[1]) // 2)
            bc = ((b[0] + c[0]) // 2, (b[1] + c[1]) // 2)
            va, vb, vc = values[a], values[b], values[c]
            values[ab] = (2.0 * va + 2.0 * vb + vc) / 5.0
            values[ac] = (2.0 * va + 2.0 * vc + vb) / 5.0
            values[bc] = (2.0 * vb + 2.0 * vc + va) / 5.0
            nxt.extend([(a, ab, ac), (ab, b, bc), (ac, bc, c)])
        cells = nxt
    verts, _, _ = gasket_graph(level)
    out = np.array([values[(int(a), int(b))] for a, b in verts])
    return ScalarField(cloud, out)
