"""Variational-limit diagnostics for the multiscale energies.

Four finite-resolution probes of the limit theory: recovery sequences built
from the ball-average mollifier, weak perturbations by high-index
eigenfields for the liminf half, greedy-net compactness of energy-bounded
families, and the Sobolev / sup-norm embedding quotients.  None of these
construct the limit object; they report margins against a graph-form or
fitted-limit stand-in and assert stability.
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
    ScalarField,
    ks_energy,
    liminf_window_scales,
    make_scale_grid,
)
from .graphform import GraphDirichletForm, Spectrum, form_energy
from .smoothing import build_net, mollify, partition_of_unity
from .space import DEFAULT_KAPPA, MeasuredPointCloud

__all__ = [
    "DEFAULT_PROBES",
    "PROBE_OFFSET",
    "NULLITY_TOL",
    "TREND_SLACK",
    "MoscoReport",
    "CompactnessProbe",
    "SobolevReport",
    "recovery_check",
    "weak_liminf_probe",
    "compactness_probe",
    "sobolev_check",
]

DEFAULT_PROBES = 5
# High-index perturbations start this far up the spectrum when room permits.
PROBE_OFFSET = 20
NULLITY_TOL = 0.05
# The mollifier L2 error must not grow by more than this step over step.
TREND_SLACK = 1.05


def _json_value(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return float(x)


@dataclass(frozen=True)
class MoscoReport:
    """Margins for the two halves of the variational convergence check.

    ``recovery_margin`` is max_n E(f_eps_n, r_n) / oracle; ``liminf_margin``
    is min_n E(f + a u_{k_n}, r_n) / oracle.  Either half may be absent when
    only the other was run.  Margins are None-exported when the oracle
    vanishes (vacuous case).
    """

    scales: np.ndarray
    oracle: float
    d_w: float
    recovery_margin: float | None
    liminf_margin: float | None
    recovery_ok: bool | None
    liminf_ok: bool | None
    rows: tuple[tuple, ...]
    row_header: tuple[str, ...]
    nullity: float | None = None

    def summary(self) -> dict:
        return {
            "oracle": _json_value(self.oracle),
            "d_w": self.d_w,
            "recovery_margin": _json_value(self.recovery_margin),
            "liminf_margin": _json_value(self.liminf_margin),
            "recovery_ok": self.recovery_ok,
            "liminf_ok": self.liminf_ok,
            "nullity": _json_value(self.nullity),
            "n_steps": len(self.rows),
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + "\n")

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.row_header)
            for row in self.rows:
                writer.writerow(
                    [v if isinstance(v, int) else repr(float(v)) for v in row]
                )


def _oracle_energy(
    oracle: GraphDirichletForm | float, f: ScalarField
) -> float:
    if isinstance(oracle, GraphDirichletForm):
        return form_energy(oracle, f)
    value = float(oracle)
    if value < 0.0:
        raise ValueError("oracle energy must be nonnegative")
    return value


def _default_recovery_pairs(
    cloud: MeasuredPointCloud, kappa: float, n_steps: int
) -> list[tuple[float, float]]:
    # The smallest admissible scales: the limit statements live at eps -> 0.
    scales = make_scale_grid(cloud, kappa=kappa).scales
    eps = [float(s) for s in scales[-n_steps:]]
    return [(e, e * kappa / 2.0) for e in eps]


def recovery_check(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    d_w: float = 2.0,
    pairs: Sequence[tuple[float, float]] | None = None,
    oracle: GraphDirichletForm | float | None = None,
    kappa: float = DEFAULT_KAPPA,
    n_steps: int = DEFAULT_PROBES,
) -> MoscoReport:
    """Drive the mollifier along a shrinking scale ladder and compare.

    Each step builds f_eps from ball averages on an eps-net and measures
    its increment energy at the paired scale r.  The report records the
    L2 distance to f (which must not grow along the ladder, 5% slack) and
    the worst energy-to-oracle margin.
    """
    if f.cloud is not cloud:
        raise ValueError("field does not live on the given cloud")
    if oracle is None:
        raise ValueError("recovery check needs an oracle energy (form or float)")
    oracle_value = _oracle_energy(oracle, f)
    if oracle_value == 0.0 and not f.is_constant():
        raise ValueError("oracle energy is zero for a nonconstant field")

    if pairs is None:
        pairs = _default_recovery_pairs(cloud, kappa, n_steps)
    pairs = [(float(e), float(r)) for e, r in pairs]
    if len(pairs) < 3:
        raise ValueError("need at least 3 scale pairs to judge the trend")
    floor = kappa * cloud.mesh
    for (e0, r0), (e1, r1) in zip(pairs, pairs[1:]):
        if not (e1 < e0 and r1 < r0):
            raise ValueError("scale pairs must be strictly decreasing")
    for e, r in pairs:
        if e < floor or r < floor:
            raise ValueError(f"scale pair ({e:g}, {r:g}) under the floor {floor:g}")

    mu = cloud.weights
    rows = []
    errors = []
    energies = []
    for e, r in pairs:
        pou = partition_of_unity(build_net(cloud, e))
        f_eps = mollify(f, pou)
        err = math.sqrt(float(mu @ (f_eps.values - f.values) ** 2))
        en = ks_energy(cloud, f_eps, r, d_w=d_w, kappa=kappa)
        errors.append(err)
        energies.append(en)
        rows.append((e, r, err, en))

    lin_noise = 1e-12 * max(1.0, float(np.abs(f.values).max()))
    trend_ok = all(
        b <= a * TREND_SLACK + lin_noise for a, b in zip(errors, errors[1:])
    )
    if oracle_value > 0.0:
        margin = max(energies) / oracle_value
    else:
        # Mollifying a flat field leaves ulp-level residue whose energy is
        # far below any meaningful scale; do not let it fail the check.
        noise = 1e-20 * max(1.0, float(np.abs(f.values).max()) ** 2)
        margin = 0.0 if max(energies) <= noise else float("inf")
    ok = trend_ok and math.isfinite(margin) and margin >= 0.0
    return MoscoReport(
        scales=np.array([r for _, r in pairs]),
        oracle=oracle_value,
        d_w=float(d_w),
        recovery_margin=margin,
        liminf_margin=None,
        recovery_ok=ok,
        liminf_ok=None,
        rows=tuple(rows),
        row_header=("eps", "r", "l2_error", "energy"),
    )


def _test_fields(cloud: MeasuredPointCloud, spec: Spectrum) -> list[np.ndarray]:
    """Five fixed unit-norm fields used to witness weak nullity."""
    mu = cloud.weights
    if cloud.is_abstract:
        raw = [spec.field(k).values for k in range(min(5, spec.k_max))]
    else:
        x = cloud.coords[:, 0]
        span = x.max() - x.min()
        t = (x - x.min()) / span if span > 0 else np.zeros_like(x)
        raw = [
            np.ones(cloud.n),
            t,
            t**2,
            np.cos(np.pi * t),
            np.sin(np.pi * t),
        ]
    out = []
    for g in raw:
        norm = math.sqrt(float(mu @ g**2))
        out.append(g / norm if norm > 0 else g)
    return out


def weak_liminf_probe(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    spec: Spectrum,
    d_w: float = 2.0,
    scales: Sequence[float] | None = None,
    n_probes: int = DEFAULT_PROBES,
    amplitude: float = 1.0,
    offset: int | None = None,
    kappa: float = DEFAULT_KAPPA,
) -> MoscoReport:
    """Perturb f by high-index eigenfields and bound the energy from below.

    The perturbations are weakly null (their inner products against five
    fixed test fields stay under ``NULLITY_TOL`` times the amplitude), so
    the probe sequence converges weakly to f while the measured energies
    must not drop below a fixed fraction of the oracle.
    """
    if f.cloud is not cloud:
        raise ValueError("field does not live on the given cloud")
    if spec.form.cloud is not cloud:
        raise ValueError("spectrum does not live on the given cloud")
    if n_probes < 1:
        raise ValueError("need at least one probe")
    if spec.k_max < n_probes + 10:
        raise ValueError(
            f"spectrum too small: k_max = {spec.k_max} < {n_probes + 10}"
        )
    # The highest stored mode is k_max - 1 (index 0 is the constant).
    if offset is None:
        offset = min(PROBE_OFFSET, spec.k_max - 1 - n_probes)
    elif offset < 1 or n_probes + offset > spec.k_max - 1:
        raise ValueError("probe offset leaves the available spectrum")
    if scales is None:
        grid = make_scale_grid(cloud, kappa=kappa).scales
        if grid.size < n_probes:
            raise ValueError("scale grid too short for the probe count")
        ladder = [float(r) for r in grid[-n_probes:]]
    else:
        ladder = [float(r) for r in scales]
        if len(ladder) != n_probes:
            raise ValueError("need exactly one scale per probe")
        floor = kappa * cloud.mesh
        for a, b in zip(ladder, ladder[1:]):
            if not (b < a):
                raise ValueError("probe scales must be strictly decreasing")
        if ladder[-1] < floor:
            raise ValueError("probe scales must respect the admissibility floor")

    oracle_value = form_energy(spec.form, f)
    mu = cloud.weights
    tests = _test_fields(cloud, spec)

    rows = []
    energies = []
    worst_nullity = 0.0
    for i, r in enumerate(ladder):
        k = i + 1 + offset
        if amplitude != 0.0:
            u = spec.field(k).values
            nullity = max(abs(float(mu @ (u * g))) for g in tests)
            worst_nullity = max(worst_nullity, nullity)
            probe = ScalarField(cloud, f.values + amplitude * u)
        else:
            nullity = 0.0
            probe = f
        en = ks_energy(cloud, probe, r, d_w=d_w, kappa=kappa)
        energies.append(en)
        rows.append((k, r, en, nullity))

    nullity_ok = worst_nullity <= NULLITY_TOL * abs(amplitude) or amplitude == 0.0
    if oracle_value > 0.0:
        margin = min(energies) / oracle_value
        ok = nullity_ok and margin > 0.0 and math.isfinite(margin)
    else:
        # Constant target: the weak lower bound is vacuous.
        margin = float("inf")
        ok = nullity_ok
    return MoscoReport(
        scales=np.array(ladder),
        oracle=oracle_value,
        d_w=float(d_w),
        recovery_margin=None,
        liminf_margin=margin,
        recovery_ok=None,
        liminf_ok=ok,
        rows=tuple(rows),
        row_header=("k", "r", "energy", "nullity"),
        nullity=worst_nullity,
    )


# ----------------------------------------------------------------------
# compactness
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CompactnessProbe:
    """Greedy-net summary of an energy-bounded family in L2(mu)."""

    n_fields: int
    cap: float
    delta: float
    net_size: int
    net_ids: tuple[int, ...]
    max_gap: float

    def summary(self) -> dict:
        return {
            "n_fields": self.n_fields,
            "cap": self.cap,
            "delta": self.delta,
            "net_size": self.net_size,
            "max_gap": self.max_gap,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + "\n")


def liminf_proxy(
    cloud: MeasuredPointCloud,
    f: ScalarField,
    d_w: float = 2.0,
    kappa: float = DEFAULT_KAPPA,
) -> float:
    """Small-scale window minimum of the global increment energy."""
    scales = liminf_window_scales(cloud, kappa=kappa)
    return float(
        min(ks_energy(cloud, f, float(r), d_w=d_w, kappa=kappa) for r in scales)
    )


def compactness_probe(
    fields: Sequence[ScalarField],
    d_w: float = 2.0,
    cap: float = 1.0,
    delta: float = 0.1,
    kappa: float = DEFAULT_KAPPA,
) -> CompactnessProbe:
    """Totally-bounded-in-L2 check for a family under an energy cap.

    Every field must satisfy ||f||^2 + liminf-proxy <= cap; the probe then
    covers the family greedily with delta-balls in L2(mu) and reports how
    many centers that takes.  Small nets certify the compactness the
    embedding theorems predict.
    """
    if not fields:
        raise ValueError("empty family")
    cloud = fields[0].cloud
    for i, f in enumerate(fields):
        if f.cloud is not cloud:
            raise ValueError(f"field {i} lives on a different cloud")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    for i, f in enumerate(fields):
        score = f.l2sq() + liminf_proxy(cloud, f, d_w=d_w, kappa=kappa)
        if score > cap * (1.0 + 1e-9):
            raise ValueError(
                f"field {i} violates the energy cap: {score:g} > {cap:g}"
            )

    mu = cloud.weights
    vals = np.stack([f.values for f in fields])
    gram = vals @ (vals * mu).T
    sq = np.diag(gram)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
    dist = np.sqrt(d2)

    # Farthest-point selection; ties resolve to the lowest index, so the
    # net is a pure function of the field order.
    net = [0]
    gaps = dist[0].copy()
    while True:
        far = int(np.argmax(gaps))
        if gaps[far] <= delta:
            break
        net.append(far)
        np.minimum(gaps, dist[far], out=gaps)
    return CompactnessProbe(
        n_fields=len(fields),
        cap=float(cap),
        delta=float(delta),
        net_size=len(net),
        net_ids=tuple(net),
        max_gap=float(gaps.max()),
    )


# ----------------------------------------------------------------------
# embedding quotients
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SobolevReport:
    """Per-field embedding quotients in the regime the exponents select.

    branch "lq": ||f||_{L^q} over ||f||_{L^2} + proxy^{1/2} with
    q = 2Q/(Q - d_w).  branch "sup": ||f||_inf over the interpolation
    (||f||_{L^2} + proxy^{1/2})^theta ||f||_{L^2}^{1-theta}, theta = Q/d_w.
    """

    Q: float
    d_w: float
    branch: str
    exponent: float
    quotients: np.ndarray

    @property
    def max_quotient(self) -> float:
        return float(self.quotients.max())

    def summary(self) -> dict:
        return {
            "Q": self.Q,
            "d_w": self.d_w,
            "branch": self.branch,
            "exponent": self.exponent,
            "quotients": [float(q) for q in self.quotients],
            "max_quotient": self.max_quotient,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + "\n")


def sobolev_check(
    cloud: MeasuredPointCloud,
    fields: Sequence[ScalarField],
    d_w: float,
    Q: float,
    kappa: float = DEFAULT_KAPPA,
) -> SobolevReport:
    """Embedding quotients for nonconstant fields at volume growth Q."""
    if Q <= 0.0:
        raise ValueError("volume growth exponent must be positive")
    if not fields:
        raise ValueError("empty family")
    mu = cloud.weights
    quotients = []
    for i, f in enumerate(fields):
        if f.cloud is not cloud:
            raise ValueError(f"field {i} lives on a different cloud")
        if f.is_constant():
            raise ValueError(f"field {i} is constant; the quotient is vacuous")
        l2 = math.sqrt(f.l2sq())
        proxy = liminf_proxy(cloud, f, d_w=d_w, kappa=kappa)
        denom_core = l2 + math.sqrt(proxy)
        if Q > d_w:
            q = 2.0 * Q / (Q - d_w)
            lq = float(mu @ np.abs(f.values) ** q) ** (1.0 / q)
            quotients.append(lq / denom_core)
        else:
            theta = Q / d_w
            sup = float(np.abs(f.values).max())
            quotients.append(sup / (denom_core**theta * l2 ** (1.0 - theta)))
    if Q > d_w:
        branch, exponent = "lq", 2.0 * Q / (Q - d_w)
    else:
        branch, exponent = "sup", Q / d_w
    return SobolevReport(
        Q=float(Q),
        d_w=float(d_w),
        branch=branch,
        exponent=float(exponent),
        quotients=np.array(quotients),
    )
