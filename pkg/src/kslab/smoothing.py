"""Covering nets, partitions of unity, and the ball-average mollifier.

A maximal epsilon-separated subset of the cloud gives open balls that cover
every point.  Tent kernels on those balls, normalized pointwise, form a
Lipschitz partition of unity; recombining ball averages of a field against
the partition yields the smoothed field f_eps.  The module also houses the
discrete Lipschitz-slope operator and the diagnostic reports that tie the
smoothing error and the cutoff energies back to the ball-increment
functionals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .energy import (
    DEFAULT_COUNT,
    DEFAULT_RATIO,
    DEFAULT_WINDOW,
    ScalarField,
    ScaleGrid,
    ks_energy,
    ks_energy_many,
    make_scale_grid,
)
from .space import DEFAULT_KAPPA, MeasuredPointCloud, segment_max, segment_sums

__all__ = [
    "CoveringNet",
    "PartitionOfUnity",
    "MollifierReport",
    "CutoffReport",
    "build_net",
    "partition_of_unity",
    "mollify",
    "discrete_lip",
    "ball_mean_deviation",
    "mollifier_estimates",
    "check_controlled_cutoff",
]


@dataclass(frozen=True)
class CoveringNet:
    """Maximal epsilon-separated centers whose epsilon-balls cover the cloud.

    ``overlap_5eps`` is the largest number of dilated balls B(c, 5 eps) any
    single point lands in; bounded overlap is what the downstream estimates
    lean on, so the count is recorded rather than assumed.
    """

    cloud: MeasuredPointCloud
    epsilon: float
    center_ids: np.ndarray
    cover_ok: bool
    overlap_5eps: int

    @property
    def n_centers(self) -> int:
        return int(self.center_ids.size)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["center_id", "epsilon"])
            for c in self.center_ids:
                writer.writerow([int(c), repr(float(self.epsilon))])

    def summary(self) -> dict:
        return {
            "epsilon": float(self.epsilon),
            "n_centers": self.n_centers,
            "cover_ok": bool(self.cover_ok),
            "overlap_5eps": int(self.overlap_5eps),
        }


def build_net(cloud: MeasuredPointCloud, epsilon: float) -> CoveringNet:
    """Greedy maximal epsilon-separated net, scanned in id order.

    A point becomes a center exactly when no earlier center lies within
    epsilon of it, so the result is reproducible and maximality makes the
    open epsilon-balls a cover.  Radii under twice the mesh are refused:
    a net that fine cannot cover a discrete cloud with room to spare.
    """
    if not np.isfinite(epsilon) or epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    floor = 2.0 * cloud.mesh
    if epsilon < floor:
        raise ValueError(f"epsilon {epsilon:g} below covering floor 2h = {floor:g}")
    covered = np.zeros(cloud.n, dtype=bool)
    centers: list[int] = []
    for p in range(cloud.n):
        if covered[p]:
            continue
        centers.append(p)
        covered[cloud.ball_ids(p, epsilon)] = True
    center_ids = np.asarray(centers, dtype=np.intp)

    counts5 = np.zeros(cloud.n, dtype=np.intp)
    for c in center_ids:
        counts5[cloud.ball_ids(int(c), 5.0 * epsilon)] += 1
    # Every point sits strictly inside some epsilon-ball, hence also in the
    # dilated one; covered.all() re-checks that instead of trusting the scan.
    return CoveringNet(
        cloud=cloud,
        epsilon=float(epsilon),
        center_ids=center_ids,
        cover_ok=bool(covered.all()),
        overlap_5eps=int(counts5.max()),
    )


@dataclass(frozen=True)
class PartitionOfUnity:
    """Tent-kernel partition subordinate to the 2-epsilon dilated net balls.

    ``phi`` holds one row per center; rows are nonnegative, vanish outside
    B(c, 2 eps), and sum to one at every point.
    """

    net: CoveringNet
    phi: np.ndarray

    @property
    def cloud(self) -> MeasuredPointCloud:
        return self.net.cloud

    @property
    def epsilon(self) -> float:
        return self.net.epsilon

    @property
    def n_centers(self) -> int:
        return self.net.n_centers

    def fields(self) -> list[ScalarField]:
        return [ScalarField(self.cloud, row.copy()) for row in self.phi]

    def slope_constant(self, r_loc: float | None = None) -> float:
        """Largest discrete slope among the bumps, in units of 1/epsilon."""
        if r_loc is None:
            r_loc = self.epsilon
        worst = 0.0
        for row in self.phi:
            lip = discrete_lip(self.cloud, ScalarField(self.cloud, row), r_loc)
            worst = max(worst, float(lip.values.max()))
        return worst * self.epsilon

    def to_triplets(self, path: str | Path) -> None:
        """Sparse text export: one ``center_index,point_id,value`` line per
        strictly positive entry."""
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "phi"])
            for i, row in enumerate(self.phi):
                for j in np.flatnonzero(row > 0.0):
                    writer.writerow([i, int(j), repr(float(row[j]))])


def partition_of_unity(net: CoveringNet) -> PartitionOfUnity:
    """Normalize tent kernels psi(d/eps) = clamp(2 - d/eps, 0, 1) over the net.

    Covering guarantees every point sees at least one kernel at full height,
    so the pointwise sum stays >= 1 before normalization and the division is
    safe.  A vanishing column would mean the net lied about covering.
    """
    if not net.cover_ok:
        raise ValueError("partition of unity needs a covering net")
    cloud = net.cloud
    eps = net.epsilon
    psi = np.zeros((net.n_centers, cloud.n))
    for i, c in enumerate(net.center_ids):
        t = cloud.distances_from(int(c)) / eps
        psi[i] = np.clip(2.0 - t, 0.0, 1.0)
    total = psi.sum(axis=0)
    if np.any(total <= 0.0):
        raise RuntimeError("kernel sum vanished at a point despite cover_ok")
    return PartitionOfUnity(net=net, phi=psi / total)


def mollify(f: ScalarField, pou: PartitionOfUnity) -> ScalarField:
    """Recombine ball averages of ``f`` against the partition.

    f_eps(x) = sum_i avg_{B(c_i, eps)}(f) * phi_i(x).  Constants are fixed
    points and the output never leaves [min f, max f]: each value is a convex
    combination of ball averages.
    """
    cloud = pou.cloud
    if f.cloud is not cloud:
        raise ValueError("field does not live on the given cloud")
    eps = pou.epsilon
    w = cloud.weights
    averages = np.zeros(pou.n_centers)
    pos = 0
    for sub, flat, counts in cloud.ball_chunks(eps, centers=pou.net.center_ids):
        mass = segment_sums(w[flat], counts)
        averages[pos : pos + sub.size] = (
            segment_sums(w[flat] * f.values[flat], counts) / mass
        )
        pos += sub.size
    return ScalarField(cloud, averages @ pou.phi)


def discrete_lip(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    r_loc: float,
    kappa: float = DEFAULT_KAPPA,
) -> ScalarField:
    """Largest difference quotient against neighbours within ``r_loc``.

    (Lip_h f)(x) = max_{0 < d(x,y) < r_loc} |f(x) - f(y)| / d(x, y).
    """
    if f.cloud is not cloud:
        raise ValueError("field does not live on the given cloud")
    cloud.require_admissible(r_loc, kappa)
    out = np.zeros(cloud.n)
    for sub, flat, counts in cloud.ball_chunks(r_loc):
        if np.any(counts < 2):
            lonely = sub[counts < 2][0]
            raise ValueError(
                f"ball at r_loc={r_loc:g} around point {int(lonely)} has no "
                "neighbours; increase r_loc"
            )
        rep = np.repeat(sub, counts)
        d = cloud.pair_distances(rep, flat)
        keep = d > 0.0  # drops exactly the center itself
        quotients = np.abs(f.values[flat[keep]] - f.values[rep[keep]]) / d[keep]
        out[sub] = segment_max(quotients, counts - 1)
    return ScalarField(cloud, out)


def ball_mean_deviation(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    r: float,
    kappa: float = DEFAULT_KAPPA,
) -> np.ndarray:
    """Per-point first absolute moment avg_{B(x,r)} |f(x) - f(y)| dmu(y)."""
    if f.cloud is not cloud:
        raise ValueError("field does not live on the given cloud")
    cloud.require_admissible(r, kappa)
    w = cloud.weights
    out = np.zeros(cloud.n)
    for sub, flat, counts in cloud.ball_chunks(r):
        rep = np.repeat(sub, counts)
        dev = np.abs(f.values[flat] - f.values[rep])
        mass = segment_sums(w[flat], counts)
        out[sub] = segment_sums(w[flat] * dev, counts) / mass
    return out


@dataclass(frozen=True)
class MollifierReport:
    """Smoothing-error diagnostics at one epsilon.

    ``lip_bound_ratio`` compares the squared L2 norm of the discrete slope
    of f_eps against the averaged squared increments of f at scale 2 eps
    divided by eps^2; ``l2_bound_ratio`` compares ||f_eps - f||^2 against the
    integrated squared first moment over 6 eps balls.  Constants are not
    pinned anywhere, so consumers assert stability across epsilon instead of
    absolute size.
    """

    epsilon: float
    lip_bound_ratio: float
    l2_bound_ratio: float
    lip_numerator: float
    lip_denominator: float
    l2_numerator: float
    l2_denominator: float

    def summary(self) -> dict:
        return {
            "epsilon": float(self.epsilon),
            "lip_bound_ratio": float(self.lip_bound_ratio),
            "l2_bound_ratio": float(self.l2_bound_ratio),
        }


def _guarded_ratio(num: float, den: float) -> float:
    if num == 0.0:
        return 0.0
    if den == 0.0:
        return float("inf")
    return num / den


def mollifier_estimates(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    epsilon: float,
    d_w: float = 2.0,
    kappa: float = DEFAULT_KAPPA,
) -> MollifierReport:
    """Evaluate both smoothing estimates for one field at one epsilon.

    The slope of f_eps is measured with the discrete Lipschitz operator at
    the finest admissible radius kappa * h.  The energy side is the raw
    increment sum at 2 eps divided by eps^2, which is what stays flat in
    epsilon for smooth fields; the d_w passed in only affects the internal
    normalization and cancels out of the ratio.
    """
    if f.is_constant():
        # Both numerators vanish identically; skip the 0/0 float noise.
        return MollifierReport(
            epsilon=float(epsilon),
            lip_bound_ratio=0.0,
            l2_bound_ratio=0.0,
            lip_numerator=0.0,
            lip_denominator=0.0,
            l2_numerator=0.0,
            l2_denominator=0.0,
        )
    net = build_net(cloud, epsilon)
    pou = partition_of_unity(net)
    smoothed = mollify(f, pou)

    w = cloud.weights
    lip = discrete_lip(cloud, smoothed, kappa * cloud.mesh, kappa=kappa)
    lip_num = float(np.sum(w * lip.values**2))
    lip_den = (
        ks_energy(cloud, f, 2.0 * epsilon, d_w=d_w, kappa=kappa)
        * (2.0 * epsilon) ** d_w
        / epsilon**2
    )

    l2_num = float(np.sum(w * (smoothed.values - f.values) ** 2))
    dev = ball_mean_deviation(cloud, f, 6.0 * epsilon, kappa=kappa)
    l2_den = float(np.sum(w * dev**2))

    return MollifierReport(
        epsilon=float(epsilon),
        lip_bound_ratio=_guarded_ratio(lip_num, lip_den),
        l2_bound_ratio=_guarded_ratio(l2_num, l2_den),
        lip_numerator=lip_num,
        lip_denominator=float(lip_den),
        l2_numerator=l2_num,
        l2_denominator=l2_den,
    )


@dataclass(frozen=True)
class CutoffReport:
    """Worst scaled cutoff energy over the bumps of one partition."""

    epsilon: float
    d_w: float
    worst: float
    per_center: np.ndarray
    scales: np.ndarray

    def summary(self) -> dict:
        return {
            "epsilon": float(self.epsilon),
            "d_w": float(self.d_w),
            "worst": float(self.worst),
            "n_centers": int(self.per_center.size),
        }


def check_controlled_cutoff(
    pou: PartitionOfUnity,
    d_w: float = 2.0,
    grid: ScaleGrid | None = None,
    window: int = DEFAULT_WINDOW,
    kappa: float = DEFAULT_KAPPA,
) -> CutoffReport:
    """Scaled small-scale energies of the partition bumps.

    For each bump the limsup proxy of its energy sweep is multiplied by
    eps^{d_w} / mu(B(c, eps)); the report keeps the worst center.  All bumps
    share one ball pass per scale, which is what makes sweeping a few dozen
    of them affordable.
    """
    cloud = pou.cloud
    eps = pou.epsilon
    if grid is None:
        grid = make_scale_grid(
            cloud, ratio=DEFAULT_RATIO, count=DEFAULT_COUNT, kappa=kappa
        )
    fields = pou.fields()
    energies = np.zeros((grid.scales.size, len(fields)))
    for k, r in enumerate(grid.scales):
        energies[k] = ks_energy_many(cloud, fields, float(r), d_w=d_w, kappa=kappa)
    window_scales = grid.window(window)
    in_window = np.isin(grid.scales, window_scales)
    limsups = energies[in_window].max(axis=0)

    masses = np.zeros(pou.n_centers)
    pos = 0
    for sub, flat, counts in cloud.ball_chunks(eps, centers=pou.net.center_ids):
        masses[pos : pos + sub.size] = segment_sums(cloud.weights[flat], counts)
        pos += sub.size
    per_center = limsups * eps**d_w / masses
    return CutoffReport(
        epsilon=float(eps),
        d_w=float(d_w),
        worst=float(per_center.max()),
        per_center=per_center,
        scales=grid.scales.copy(),
    )
