"""Dirichlet form module: calibrations, spectra, kernels, metrics."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kslab.energy import ScalarField
from kslab.graphform import (
    GraphDirichletForm,
    build_form,
    eigen_walk_dimension,
    energy_measure,
    fit_subgaussian,
    form_bilinear,
    form_energy,
    gamma_vs_lip_check,
    gasket_harmonic_field,
    heat_kernel,
    heat_kernel_diag,
    heat_kernel_row,
    intrinsic_metric,
    spectrum,
)
from kslab.space import MeasuredPointCloud, gasket, interval_grid, square_grid

from oracles import convex_intrinsic_metric

LOG5_LOG2 = np.log(5.0) / np.log(2.0)
LOG3_LOG5 = np.log(3.0) / np.log(5.0)


@pytest.fixture(scope="module")
def gasket6():
    cloud = gasket(6)
    form = build_form(cloud, "gasket")
    return cloud, form, spectrum(form)


def unit_pair_cloud(weights=(1.0, 1.0)):
    return MeasuredPointCloud(
        np.asarray(weights, dtype=float), coords=np.array([[0.0], [1.0]])
    )


def unit_pair_form(weights=(1.0, 1.0)):
    cloud = unit_pair_cloud(weights)
    return cloud, GraphDirichletForm(
        cloud=cloud,
        edge_i=np.array([0], dtype=np.intp),
        edge_j=np.array([1], dtype=np.intp),
        conductances=np.array([1.0]),
        kind="grid1d",
        renorm=1.0,
    )


# ----------------------------------------------------------------------
# construction and calibration
# ----------------------------------------------------------------------


def test_build_form_rejects_mismatched_cloud():
    with pytest.raises(ValueError, match="interval grid"):
        build_form(gasket(2), "grid1d")
    with pytest.raises(ValueError, match="gasket"):
        build_form(interval_grid(10), "gasket")
    with pytest.raises(ValueError, match="unknown"):
        build_form(interval_grid(10), "triangulation")


def test_form_validation():
    cloud = unit_pair_cloud()
    with pytest.raises(ValueError, match="self-loops"):
        GraphDirichletForm(
            cloud=cloud,
            edge_i=np.array([0], dtype=np.intp),
            edge_j=np.array([0], dtype=np.intp),
            conductances=np.array([1.0]),
            kind="grid1d",
            renorm=1.0,
        )
    with pytest.raises(ValueError, match="positive"):
        GraphDirichletForm(
            cloud=cloud,
            edge_i=np.array([0], dtype=np.intp),
            edge_j=np.array([1], dtype=np.intp),
            conductances=np.array([-1.0]),
            kind="grid1d",
            renorm=1.0,
        )
    three = MeasuredPointCloud(np.ones(3), coords=np.arange(3.0).reshape(-1, 1))
    with pytest.raises(ValueError, match="connected"):
        GraphDirichletForm(
            cloud=three,
            edge_i=np.array([0], dtype=np.intp),
            edge_j=np.array([1], dtype=np.intp),
            conductances=np.array([1.0]),
            kind="grid1d",
            renorm=1.0,
        )


def test_grid1d_energy_of_identity():
    cloud = interval_grid(101)
    form = build_form(cloud, "grid1d")
    f = ScalarField.coordinate(cloud)
    n = cloud.n
    assert form_energy(form, f) == pytest.approx((n - 1) / n, rel=1e-12)
    assert form_energy(form, f) == pytest.approx(1.0, rel=0.02)


def test_grid1d_energy_of_sine():
    cloud = interval_grid(201)
    form = build_form(cloud, "grid1d")
    f = ScalarField.from_function(cloud, lambda c: np.sin(np.pi * c[:, 0]))
    assert form_energy(form, f) == pytest.approx(np.pi**2 / 2.0, rel=0.02)


def test_grid2d_energy_of_identity():
    cloud = square_grid(21)
    form = build_form(cloud, "grid2d")
    f = ScalarField.coordinate(cloud, axis=0)
    side = 21
    assert form_energy(form, f) == pytest.approx((side - 1) / side, rel=1e-12)


def test_gasket_harmonic_energy_level_invariant():
    # The 1/5-2/5 extension is the fixed point of the (5/3)^m calibration:
    # its energy must not move across levels.
    energies = []
    for level in range(1, 6):
        cloud = gasket(level)
        form = build_form(cloud, "gasket")
        f = gasket_harmonic_field(cloud)
        energies.append(form_energy(form, f))
    assert energies[0] == pytest.approx(2.0, abs=1e-10)
    assert np.ptp(energies) < 1e-8


def test_gasket_harmonic_needs_gasket_cloud():
    with pytest.raises(ValueError, match="gasket"):
        gasket_harmonic_field(interval_grid(5))


# ----------------------------------------------------------------------
# energy measure
# ----------------------------------------------------------------------


def test_constant_field_zero_energy_and_density():
    cloud = interval_grid(31)
    form = build_form(cloud, "grid1d")
    f = ScalarField.constant(cloud, 3.7)
    assert form_energy(form, f) == 0.0
    assert np.all(energy_measure(form, f).density == 0.0)


def test_two_vertex_energy_and_density():
    _, form = unit_pair_form()
    f = ScalarField(form.cloud, np.array([0.0, 1.0]))
    assert form_energy(form, f) == pytest.approx(1.0, abs=1e-15)
    dens = energy_measure(form, f).density
    assert dens == pytest.approx([0.5, 0.5], abs=1e-15)


def test_identity_density_matches_measure_in_interior():
    cloud = interval_grid(101)
    form = build_form(cloud, "grid1d")
    ratio = energy_measure(form, ScalarField.coordinate(cloud)).per_mass()
    assert np.allclose(ratio[1:-1], 1.0, rtol=0.05)
    assert ratio[0] == pytest.approx(0.5, rel=1e-9)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_density_sums_to_energy(seed):
    rng = np.random.default_rng(seed)
    cloud = interval_grid(40)
    form = build_form(cloud, "grid1d")
    f = ScalarField(cloud, rng.normal(size=40))
    em = energy_measure(form, f)
    assert em.total == pytest.approx(form_energy(form, f), rel=1e-12, abs=1e-15)


def test_markov_contraction_seeded():
    cloud = interval_grid(60)
    form = build_form(cloud, "grid1d")
    rng = np.random.default_rng(7)
    for _ in range(30):
        v = rng.normal(scale=2.0, size=60)
        f = ScalarField(cloud, v)
        truncated = ScalarField(cloud, np.clip(v, 0.0, 1.0))
        assert form_energy(form, truncated) <= form_energy(form, f) + 1e-14


def test_strong_locality_seeded():
    cloud = interval_grid(80)
    form = build_form(cloud, "grid1d")
    rng = np.random.default_rng(11)
    for _ in range(20):
        g_vals = np.zeros(80)
        lo = rng.integers(10, 50)
        hi = lo + rng.integers(3, 15)
        g_vals[lo:hi] = rng.normal(size=hi - lo)
        f_vals = rng.normal(size=80)
        f_vals[max(lo - 2, 0) : min(hi + 2, 80)] = 4.2  # flat around supp(g)
        bil = form_bilinear(
            form, ScalarField(cloud, f_vals), ScalarField(cloud, g_vals)
        )
        assert abs(bil) < 1e-12


# ----------------------------------------------------------------------
# spectrum
# ----------------------------------------------------------------------


def test_spectrum_ground_state():
    cloud = interval_grid(25)
    spec = spectrum(build_form(cloud, "grid1d"))
    assert spec.eigenvalues[0] == 0.0
    u0 = spec.eigenfields[:, 0]
    assert np.ptp(u0) < 1e-9
    assert np.dot(cloud.weights, u0**2) == pytest.approx(1.0, abs=1e-12)


def test_path_spectrum_closed_form():
    # Discrete Neumann line: lambda_k = 4 sin^2(k pi / 2n) / h^2.
    cloud = interval_grid(101)
    spec = spectrum(build_form(cloud, "grid1d"))
    n, h = cloud.n, cloud.mesh
    k = np.arange(n)
    exact = 4.0 * np.sin(k * np.pi / (2 * n)) ** 2 / h**2
    assert np.max(np.abs(spec.eigenvalues - exact)) < 1e-8 * exact.max()


def test_path_spectrum_by_hand_n4():
    cloud = interval_grid(4)
    spec = spectrum(build_form(cloud, "grid1d"))
    h = cloud.mesh
    exact = 4.0 * np.sin(np.arange(4) * np.pi / 8.0) ** 2 / h**2
    assert spec.eigenvalues == pytest.approx(exact, abs=1e-8)


def test_spectrum_mu_orthonormal():
    cloud = interval_grid(40)
    spec = spectrum(build_form(cloud, "grid1d"))
    gram = spec.eigenfields.T @ (cloud.weights[:, None] * spec.eigenfields)
    assert np.max(np.abs(gram - np.eye(cloud.n))) < 1e-9


def test_parseval():
    cloud = interval_grid(101)
    spec = spectrum(build_form(cloud, "grid1d"))
    rng = np.random.default_rng(3)
    f = rng.normal(size=cloud.n)
    coeffs = spec.eigenfields.T @ (cloud.weights * f)
    l2sq = float(np.dot(cloud.weights, f**2))
    assert np.sum(coeffs**2) == pytest.approx(l2sq, rel=1e-8)


def test_spectrum_k_max_validation():
    form = build_form(interval_grid(10), "grid1d")
    with pytest.raises(ValueError, match="k_max"):
        spectrum(form, k_max=11)
    assert spectrum(form, k_max=3).eigenvalues.size == 3


def test_gasket_relaxation_ratio_near_five(gasket6):
    # Renorm-adjusted lambda_1 ratios approach the resistance factor 5.
    f4 = build_form(gasket(4), "gasket")
    f5 = build_form(gasket(5), "gasket")
    fit = eigen_walk_dimension(f4, f5)
    assert 2.0**fit.d_w_hat == pytest.approx(5.0, abs=0.1)


# ----------------------------------------------------------------------
# heat kernel
# ----------------------------------------------------------------------


def test_two_vertex_heat_kernel_closed_form():
    _, form = unit_pair_form(weights=(1.0, 1.0))
    spec = spectrum(form)
    for t in (0.05, 0.3, 1.0, 4.0):
        expected = 0.5 * (1.0 + np.exp(-2.0 * t))
        assert heat_kernel(spec, t, 1, 1) == pytest.approx(expected, abs=1e-12)
        off = 0.5 * (1.0 - np.exp(-2.0 * t))
        assert heat_kernel(spec, t, 0, 1) == pytest.approx(off, abs=1e-12)


def test_heat_kernel_symmetry_and_row():
    cloud = interval_grid(40)
    spec = spectrum(build_form(cloud, "grid1d"))
    t = 0.01
    assert heat_kernel(spec, t, 3, 17) == pytest.approx(
        heat_kernel(spec, t, 17, 3), rel=1e-12
    )
    row = heat_kernel_row(spec, t, 3)
    assert row[17] == pytest.approx(heat_kernel(spec, t, 3, 17), rel=1e-12)
    assert heat_kernel_diag(spec, t)[3] == pytest.approx(
        heat_kernel(spec, t, 3, 3), rel=1e-12
    )


def test_heat_kernel_stochastic_completeness_and_semigroup():
    cloud = interval_grid(60)
    spec = spectrum(build_form(cloud, "grid1d"))
    w = cloud.weights
    for t in (2e-4, 1e-3, 1e-2):
        row = heat_kernel_row(spec, t, 10)
        assert np.dot(w, row) == pytest.approx(1.0, abs=1e-8)
    # semigroup: integrate p_t(x,.) against p_s(.,y)
    t, s = 3e-4, 7e-4
    pt = heat_kernel_row(spec, t, 10)
    ps = heat_kernel_row(spec, s, 44)
    lhs = float(np.dot(w, pt * ps))
    assert lhs == pytest.approx(heat_kernel(spec, t + s, 10, 44), abs=1e-8)


def test_heat_kernel_long_time_limit():
    cloud = interval_grid(30)
    spec = spectrum(build_form(cloud, "grid1d"))
    limit = 1.0 / cloud.total_mass
    assert heat_kernel_row(spec, 50.0, 7) == pytest.approx(
        np.full(30, limit), abs=1e-10
    )


def test_heat_kernel_positivity_sampled():
    for cloud, kind in [(interval_grid(101), "grid1d"), (gasket(4), "gasket")]:
        spec = spectrum(build_form(cloud, kind))
        lam = spec.eigenvalues
        pos = lam[lam > 0]
        for t in np.geomspace(1.0 / pos.max(), 10.0 / pos.min(), 10):
            row = heat_kernel_row(spec, float(t), 0)
            # tiny negatives are spectral cancellation noise, not mass
            assert row.min() > -1e-12
        for t in np.geomspace(1.0 / pos.min(), 10.0 / pos.min(), 4):
            assert heat_kernel_row(spec, float(t), 0).min() > 0.0


def test_heat_kernel_rejects_bad_time():
    spec = spectrum(build_form(interval_grid(10), "grid1d"))
    with pytest.raises(ValueError, match="positive"):
        heat_kernel(spec, 0.0, 0, 1)
    with pytest.raises(ValueError, match="positive"):
        heat_kernel_row(spec, -1.0, 0)


# ----------------------------------------------------------------------
# sub-Gaussian fit
# ----------------------------------------------------------------------


def test_subgaussian_fit_grid1d():
    cloud = interval_grid(201)
    spec = spectrum(build_form(cloud, "grid1d"))
    fit = fit_subgaussian(spec, cloud)
    assert 1.85 <= fit.d_w_fit <= 2.15
    assert 0.9 <= fit.d_s_fit <= 1.1
    assert fit.c1 > 0 and fit.c2 > 0
    assert fit.residual < 1.0


def test_subgaussian_fit_gasket(gasket6):
    cloud, _, spec = gasket6
    fit = fit_subgaussian(spec, cloud)
    assert fit.d_w_fit == pytest.approx(LOG5_LOG2, abs=0.15)
    assert fit.d_s_fit / 2.0 == pytest.approx(LOG3_LOG5, abs=0.05)
    assert fit.residual <= 1.0
    tied = fit.d_w_fit / (fit.d_w_fit - 1.0)
    assert fit.exponent_fit == pytest.approx(tied, abs=0.2)


def test_subgaussian_fit_rejects_bad_window():
    cloud = interval_grid(51)
    spec = spectrum(build_form(cloud, "grid1d"))
    with pytest.raises(ValueError, match="window"):
        fit_subgaussian(spec, cloud, t_window=(0.1, 0.1))


def test_subgaussian_json_roundtrip(tmp_path):
    cloud = interval_grid(201)
    spec = spectrum(build_form(cloud, "grid1d"))
    fit = fit_subgaussian(spec, cloud)
    out = tmp_path / "fit.json"
    fit.to_json(out)
    payload = json.loads(out.read_text())
    assert payload["d_w_fit"] == fit.d_w_fit
    assert payload["n_samples"] == fit.n_samples


# ----------------------------------------------------------------------
# eigen walk dimension
# ----------------------------------------------------------------------


def test_eigen_walk_dimension_grid():
    fit = eigen_walk_dimension(
        build_form(interval_grid(101), "grid1d"),
        build_form(interval_grid(201), "grid1d"),
    )
    assert 1.95 <= fit.d_w_hat <= 2.05
    assert fit.method == "eigen_ratio"
    assert fit.residual < 0.05


def test_eigen_walk_dimension_gasket():
    fit = eigen_walk_dimension(
        build_form(gasket(4), "gasket"), build_form(gasket(5), "gasket")
    )
    assert fit.d_w_hat == pytest.approx(LOG5_LOG2, abs=0.05)


def test_eigen_walk_dimension_rejects_identical_and_skips():
    f4 = build_form(gasket(4), "gasket")
    with pytest.raises(ValueError, match="consecutive"):
        eigen_walk_dimension(f4, f4)
    with pytest.raises(ValueError, match="consecutive"):
        eigen_walk_dimension(build_form(gasket(3), "gasket"), build_form(gasket(5), "gasket"))
    with pytest.raises(ValueError, match="hierarchies"):
        eigen_walk_dimension(f4, build_form(interval_grid(101), "grid1d"))


# ----------------------------------------------------------------------
# intrinsic metric
# ----------------------------------------------------------------------


def path_form(n_edges: int) -> GraphDirichletForm:
    n = n_edges + 1
    dmat = np.abs(np.subtract.outer(np.arange(float(n)), np.arange(float(n))))
    cloud = MeasuredPointCloud(np.ones(n), dist_matrix=dmat, mesh=1.0)
    idx = np.arange(n_edges, dtype=np.intp)
    return GraphDirichletForm(
        cloud=cloud,
        edge_i=idx,
        edge_j=idx + 1,
        conductances=np.ones(n_edges),
        kind="grid1d",
        renorm=1.0,
    )


def test_intrinsic_metric_same_vertex():
    form = path_form(5)
    res = intrinsic_metric(form, 2, 2)
    assert res.lower == 0.0 and res.upper == 0.0


def test_intrinsic_metric_path_exact():
    # Unit path: interior constraint (s_i^2 + s_{i+1}^2)/2 <= 1 caps every
    # slope at 1, so the optimum is the hop count.
    for n_edges in (4, 7):
        form = path_form(n_edges)
        res = intrinsic_metric(form, n_edges, 0, iterations=20)
        assert res.lower == pytest.approx(n_edges, rel=0.01)
        assert res.upper >= res.lower - 1e-12
        assert res.witness[n_edges] - res.witness[0] == pytest.approx(
            res.lower, abs=1e-12
        )


def test_intrinsic_metric_matches_convex_oracle():
    form = path_form(4)
    res = intrinsic_metric(form, 4, 0, iterations=20)
    oracle = convex_intrinsic_metric(
        form.edge_i, form.edge_j, form.conductances,
        form.cloud.weights, 4, 0,
    )
    assert res.lower == pytest.approx(oracle, abs=1e-6)


def test_intrinsic_metric_grid1d_unit_interval():
    cloud = interval_grid(101)
    form = build_form(cloud, "grid1d")
    res = intrinsic_metric(form, 100, 0, iterations=20)
    assert res.lower == pytest.approx(1.0, rel=1e-9)
    assert res.upper == pytest.approx(np.sqrt(2.0), rel=1e-9)


def test_intrinsic_metric_bilipschitz_across_resolutions():
    ratios = []
    for n in (101, 201):
        cloud = interval_grid(n)
        form = build_form(cloud, "grid1d")
        res = intrinsic_metric(form, n - 1, 0, iterations=20)
        ratios.append(res.lower / cloud.distance(n - 1, 0))
    assert all(0.5 <= r <= 2.0 for r in ratios)
    assert max(ratios) / min(ratios) <= 2.0


def test_intrinsic_metric_witness_feasible():
    cloud = interval_grid(60)
    form = build_form(cloud, "grid1d")
    res = intrinsic_metric(form, 59, 0, iterations=30)
    diff = np.diff(res.witness)
    c = form.conductances
    gamma = np.zeros(60)
    half = 0.5 * c * diff**2
    np.add.at(gamma, np.arange(59), half)
    np.add.at(gamma, np.arange(1, 60), half)
    assert np.all(gamma <= cloud.weights * (1.0 + 1e-9))


# ----------------------------------------------------------------------
# energy measure vs Lipschitz slope
# ----------------------------------------------------------------------


def test_gamma_vs_lip_constant_vacuous():
    cloud = interval_grid(50)
    form = build_form(cloud, "grid1d")
    rep = gamma_vs_lip_check(form, cloud, ScalarField.constant(cloud, 2.0))
    assert rep.c_best == 0.0 and rep.n_active == 0


def test_gamma_vs_lip_identity_near_one():
    cloud = interval_grid(401)
    form = build_form(cloud, "grid1d")
    rep = gamma_vs_lip_check(form, cloud, ScalarField.coordinate(cloud))
    assert rep.c_best == pytest.approx(1.0, rel=0.10)


def test_gamma_vs_lip_sine_stable_across_resolutions():
    values = []
    for n in (401, 801):
        cloud = interval_grid(n)
        form = build_form(cloud, "grid1d")
        f = ScalarField.from_function(cloud, lambda c: np.sin(np.pi * c[:, 0]))
        values.append(gamma_vs_lip_check(form, cloud, f).c_best)
    assert max(values) / min(values) <= 2.0


def test_gamma_vs_lip_refuses_gasket():
    cloud = gasket(3)
    form = build_form(cloud, "gasket")
    with pytest.raises(ValueError, match="grid"):
        gamma_vs_lip_check(form, cloud, ScalarField.constant(cloud, 0.0))


# ----------------------------------------------------------------------
# exports
# ----------------------------------------------------------------------


def test_edges_csv_export(tmp_path):
    form = build_form(interval_grid(5), "grid1d")
    out = tmp_path / "edges.csv"
    form.to_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x,y,c"
    assert len(lines) == 5  # header + 4 edges
    x, y, c = lines[1].split(",")
    assert (int(x), int(y)) == (0, 1)
    assert float(c) == pytest.approx(form.conductances[0])


def test_spectrum_csv_export(tmp_path):
    spec = spectrum(build_form(interval_grid(6), "grid1d"))
    out = tmp_path / "spec.csv"
    spec.to_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "k,lambda"
    assert len(lines) == 7
    assert float(lines[1].split(",")[1]) == 0.0
