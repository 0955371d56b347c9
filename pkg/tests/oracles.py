"""Independent brute-force oracles used to pin expected values.

Everything here is written against the raw arrays with plain Python loops or
full distance matrices, deliberately avoiding the library's accelerated code
paths, so the two sides of every comparison are genuinely independent.
"""

from __future__ import annotations

import numpy as np


def dist_matrix(coords: np.ndarray) -> np.ndarray:
    """Full pairwise Euclidean distance matrix, O(n^2)."""
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def brute_ball_ids(coords: np.ndarray, x: int, r: float) -> np.ndarray:
    d = np.sqrt(((coords - coords[x]) ** 2).sum(axis=1))
    return np.flatnonzero(d < r)


def brute_ks_energy(
    dmat: np.ndarray,
    weights: np.ndarray,
    values: np.ndarray,
    r: float,
    d_w: float,
    region: np.ndarray | None = None,
) -> float:
    """O(n^2) double sum of the ball-increment energy."""
    n = weights.size
    centers = range(n) if region is None else region
    total = 0.0
    for x in centers:
        members = np.flatnonzero(dmat[x] < r)
        mass = weights[members].sum()
        inner = 0.0
        for y in members:
            inner += weights[y] * (values[x] - values[y]) ** 2
        total += weights[x] * inner / mass
    return total / r**d_w


def brute_doubling_ratio(dmat: np.ndarray, weights: np.ndarray, x: int, r: float) -> float:
    m1 = weights[dmat[x] < r].sum()
    m2 = weights[dmat[x] < 2 * r].sum()
    return m2 / m1


def interval_identity_energy(r: float) -> float:
    """Continuum ball-increment energy of f(x)=x on [0,1] at scale r, d_w=2.

    Interior centres contribute r^2/3 per unit mass before the 1/r^2
    normalization; integrating the one-sided boundary correction exactly
    gives E(r) = 1/3 - r/9.
    """
    return 1.0 / 3.0 - r / 9.0


def gasket_vertex_count(level: int) -> int:
    """Vertex count of the level-m gasket graph by the cell recursion."""
    n = 3
    for _ in range(level):
        n = 3 * n - 3
    return n


def chain_ball_average(
    dmat: np.ndarray, weights: np.ndarray, values: np.ndarray, x: int, r: float
) -> float:
    members = np.flatnonzero(dmat[x] < r)
    w = weights[members]
    return float(np.dot(w, values[members]) / w.sum())


def brute_greedy_net(dmat: np.ndarray, epsilon: float) -> list[int]:
    """Reference greedy net: keep a point iff >= epsilon from all kept ones."""
    centers: list[int] = []
    for p in range(dmat.shape[0]):
        if all(dmat[p, c] >= epsilon for c in centers):
            centers.append(p)
    return centers


def brute_partition(dmat: np.ndarray, centers: list[int], epsilon: float) -> np.ndarray:
    """Dense tent-kernel partition over the given centers."""
    psi = np.clip(2.0 - dmat[centers] / epsilon, 0.0, 1.0)
    return psi / psi.sum(axis=0)


def brute_mollify(
    dmat: np.ndarray,
    weights: np.ndarray,
    values: np.ndarray,
    centers: list[int],
    epsilon: float,
) -> np.ndarray:
    """Ball-average recombination computed with plain loops."""
    phi = brute_partition(dmat, centers, epsilon)
    out = np.zeros_like(values, dtype=float)
    for k, c in enumerate(centers):
        members = np.flatnonzero(dmat[c] < epsilon)
        avg = np.dot(weights[members], values[members]) / weights[members].sum()
        out += avg * phi[k]
    return out


def convex_intrinsic_metric(
    edge_i: np.ndarray,
    edge_j: np.ndarray,
    conduct: np.ndarray,
    mu: np.ndarray,
    x: int,
    y: int,
) -> float:
    """Solve sup f(x) - f(y) s.t. per-vertex energy density <= mu directly.

    SLSQP on the raw nonlinear program; only trustworthy for tiny graphs,
    which is exactly where it serves as a cross-check.
    """
    from scipy.optimize import minimize

    n = mu.size

    def gamma(f: np.ndarray) -> np.ndarray:
        d2 = conduct * (f[edge_i] - f[edge_j]) ** 2
        g = np.zeros(n)
        np.add.at(g, edge_i, 0.5 * d2)
        np.add.at(g, edge_j, 0.5 * d2)
        return g

    res = minimize(
        lambda f: -(f[x] - f[y]),
        x0=np.zeros(n),
        jac=lambda f: -(np.eye(n)[x] - np.eye(n)[y]),
        constraints=[{"type": "ineq", "fun": lambda f: mu - gamma(f)}],
        method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-12},
    )
    if not res.success:
        raise RuntimeError(f"oracle solver failed: {res.message}")
    return float(res.x[x] - res.x[y])
