"""Tests for sampled Poincaré inequalities, the maximal function, and the
telescoping estimate."""

import math

import numpy as np
import pytest

from kslab.energy import ScalarField, ks_energy_density
from kslab.graphform import build_form, spectrum
from kslab.poincare import (
    MaximalField,
    maximal_function,
    poincare_check,
    telescoping_bound,
    weak_l2_check,
    _normalized_window_minimum,
)
from kslab.space import gasket, interval_grid

from oracles import chain_ball_average, dist_matrix

LOG5_LOG2 = math.log(5.0) / math.log(2.0)


@pytest.fixture(scope="module")
def grid401():
    cloud = interval_grid(401)
    return cloud, ScalarField.coordinate(cloud, 0)


@pytest.fixture(scope="module")
def grid2001():
    cloud = interval_grid(2001)
    return cloud, ScalarField.coordinate(cloud, 0)


def interior_samples():
    return [(c, r) for c in (120, 200, 280) for r in (0.05, 0.1)]


class TestPoincareCheck:
    def test_lip_identity_interior_third(self, grid2001):
        # For f = x on a ball B(x, R) well inside [0, 1], the variance is
        # R^2/3 times the mass while the slope rhs is R^2 times the mass,
        # so every interior ratio should sit at 1/3.
        cloud, f = grid2001
        samples = [(c, r) for c in (600, 1000, 1400) for r in (0.05, 0.1)]
        rep = poincare_check(cloud, f, "lip", lam=1.0, samples=samples)
        for s in rep.samples:
            assert s.ratio == pytest.approx(1.0 / 3.0, rel=0.01)
        assert rep.c_best == pytest.approx(1.0 / 3.0, rel=0.01)
        assert rep.mode == "lip"
        assert rep.seed is None

    def test_constant_field_vacuous(self, grid401):
        cloud, _ = grid401
        c = ScalarField.constant(cloud, 3.0)
        for mode in ("lip", "ks"):
            rep = poincare_check(cloud, c, mode, samples=interior_samples())
            assert rep.c_best == 0.0
            assert rep.n_used == 0
            assert all(math.isnan(s.ratio) for s in rep.samples)

    def test_ks_close_to_lip(self, grid401):
        cloud, f = grid401
        rl = poincare_check(cloud, f, "lip", lam=1.0, samples=interior_samples())
        rk = poincare_check(cloud, f, "ks", d_w=2.0, lam=1.0, samples=interior_samples())
        assert rl.c_best > 0.0
        assert rk.c_best / rl.c_best < 4.0
        assert rl.c_best / rk.c_best < 4.0

    def test_lhs_shift_invariant(self, grid401):
        cloud, f = grid401
        g = ScalarField(cloud, f.values + 5.0)
        r1 = poincare_check(cloud, f, "ks", samples=interior_samples())
        r2 = poincare_check(cloud, g, "ks", samples=interior_samples())
        for a, b in zip(r1.samples, r2.samples):
            assert b.lhs == pytest.approx(a.lhs, abs=1e-15)

    def test_ratio_scale_invariant(self, grid401):
        cloud, f = grid401
        g = ScalarField(cloud, 2.0 * f.values)
        r1 = poincare_check(cloud, f, "ks", samples=interior_samples())
        r2 = poincare_check(cloud, g, "ks", samples=interior_samples())
        for a, b in zip(r1.samples, r2.samples):
            assert b.ratio == pytest.approx(a.ratio, rel=1e-12)

    def test_inflation_never_hurts(self, grid401):
        # Enlarging the rhs ball can only grow the rhs, so each sampled
        # ratio at lam = 2 is at most its lam = 1 counterpart.
        cloud, f = grid401
        ra = poincare_check(cloud, f, "ks", lam=1.0, samples=interior_samples())
        rb = poincare_check(cloud, f, "ks", lam=2.0, samples=interior_samples())
        for a, b in zip(ra.samples, rb.samples):
            assert b.ratio <= a.ratio + 1e-12

    def test_energy_measure_on_gasket(self):
        cloud = gasket(4)
        form = build_form(cloud, "gasket")
        u = spectrum(form).field(2)
        rep = poincare_check(cloud, u, "energy_measure", d_w=LOG5_LOG2, form=form)
        assert rep.n_used == len(rep.samples)
        assert 0.0 < rep.c_best < 10.0

    def test_default_sampling_deterministic(self, grid401):
        cloud, f = grid401
        r1 = poincare_check(cloud, f, "lip", seed=7)
        r2 = poincare_check(cloud, f, "lip", seed=7)
        assert r1.seed == 7
        assert [s.center for s in r1.samples] == [s.center for s in r2.samples]
        assert r1.c_best == r2.c_best
        assert len({s.center for s in r1.samples}) == 50

    def test_mode_rejected(self, grid401):
        cloud, f = grid401
        with pytest.raises(ValueError, match="unknown mode"):
            poincare_check(cloud, f, "sobolev")

    def test_lambda_rejected(self, grid401):
        cloud, f = grid401
        with pytest.raises(ValueError, match="at least 1"):
            poincare_check(cloud, f, "ks", lam=0.5)

    def test_energy_measure_needs_form(self, grid401):
        cloud, f = grid401
        with pytest.raises(ValueError, match="needs a graph form"):
            poincare_check(cloud, f, "energy_measure")

    def test_form_cloud_mismatch(self, grid401):
        cloud, f = grid401
        other = interval_grid(101)
        form = build_form(other, "grid1d")
        with pytest.raises(ValueError, match="form does not live"):
            poincare_check(cloud, f, "energy_measure", form=form)

    def test_field_cloud_mismatch(self, grid401):
        cloud, _ = grid401
        other = interval_grid(101)
        g = ScalarField.coordinate(other, 0)
        with pytest.raises(ValueError, match="does not live"):
            poincare_check(cloud, g, "lip")

    def test_radius_bounds_enforced(self, grid401):
        cloud, f = grid401
        with pytest.raises(ValueError, match="outside the admissible range"):
            poincare_check(cloud, f, "ks", samples=[(10, 0.001)])
        with pytest.raises(ValueError, match="outside the admissible range"):
            poincare_check(cloud, f, "ks", samples=[(10, 0.6)])

    def test_center_bounds_enforced(self, grid401):
        cloud, f = grid401
        with pytest.raises(ValueError, match="out of range"):
            poincare_check(cloud, f, "ks", samples=[(4000, 0.05)])

    def test_csv_roundtrip(self, grid401, tmp_path):
        cloud, f = grid401
        rep = poincare_check(cloud, f, "ks", samples=interior_samples())
        path = tmp_path / "poincare.csv"
        rep.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "center,R,lhs,rhs,ratio"
        assert len(lines) == 1 + len(rep.samples)
        first = lines[1].split(",")
        assert int(first[0]) == rep.samples[0].center
        assert float(first[4]) == pytest.approx(rep.samples[0].ratio)

    def test_json_summary(self, grid401, tmp_path):
        import json

        cloud, f = grid401
        rep = poincare_check(cloud, f, "lip", samples=interior_samples())
        path = tmp_path / "poincare.json"
        rep.to_json(path)
        data = json.loads(path.read_text())
        assert data["mode"] == "lip"
        assert data["lambda"] == 2.0
        assert data["c_best"] == pytest.approx(rep.c_best)
        assert data["seed"] is None


class TestMaximalFunction:
    def test_constant_is_zero(self, grid401):
        cloud, _ = grid401
        c = ScalarField.constant(cloud, 2.0)
        m = maximal_function(cloud, c, R=0.1)
        assert np.all(m.values == 0.0)

    def test_identity_interior_level(self, grid401):
        # The normalized energy of f = x over any interior ball tends to
        # 1/3, so the maximal field should sit near sqrt(1/3) there.
        cloud, f = grid401
        m = maximal_function(cloud, f, R=0.1)
        interior = m.values[120:281]
        target = math.sqrt(1.0 / 3.0)
        assert np.all(np.abs(interior - target) < 0.2 * target)

    def test_monotone_in_radius(self, grid401):
        cloud, f = grid401
        m_small = maximal_function(cloud, f, R=0.05)
        m_big = maximal_function(cloud, f, R=0.1)
        assert np.all(m_small.values <= m_big.values + 1e-15)

    def test_dominates_top_scale(self, grid401):
        cloud, f = grid401
        m = maximal_function(cloud, f, R=0.1)
        dens = np.stack(
            [ks_energy_density(cloud, f, float(r)) for r in m.window_scales]
        )
        top = _normalized_window_minimum(cloud, dens, float(m.rho_grid[0]))
        assert np.all(m.values**2 >= top - 1e-12)

    def test_radius_under_floor_rejected(self, grid401):
        cloud, f = grid401
        with pytest.raises(ValueError, match="radius ladder"):
            maximal_function(cloud, f, R=0.001)

    def test_custom_grid_validated(self, grid401):
        cloud, f = grid401
        with pytest.raises(ValueError, match="radius ladder"):
            maximal_function(cloud, f, R=0.1, rho_grid=[0.2])
        with pytest.raises(ValueError, match="radius ladder"):
            maximal_function(cloud, f, R=0.1, rho_grid=[])

    def test_field_cloud_mismatch(self, grid401):
        cloud, _ = grid401
        other = interval_grid(101)
        g = ScalarField.coordinate(other, 0)
        with pytest.raises(ValueError, match="does not live"):
            maximal_function(cloud, g, R=0.1)


class TestWeakL2:
    def test_constant_gives_zero_quotients(self, grid401):
        cloud, _ = grid401
        c = ScalarField.constant(cloud, 1.0)
        m = maximal_function(cloud, c, R=0.1)
        rep = weak_l2_check(m, c, thresholds=[0.1, 1.0])
        assert rep.e_proxy == 0.0
        assert np.all(rep.quotients == 0.0)

    def test_large_threshold_vanishes(self, grid401):
        cloud, f = grid401
        m = maximal_function(cloud, f, R=0.1)
        rep = weak_l2_check(m, f, thresholds=[1e6])
        assert rep.quotients[0] == 0.0

    def test_quotients_bounded(self, grid401):
        cloud, f = grid401
        m = maximal_function(cloud, f, R=0.1)
        rep = weak_l2_check(m, f)
        assert rep.max_quotient < 10.0
        assert np.all(rep.quotients >= 0.0)

    def test_stable_across_resolutions(self):
        # Same thresholds on two refinements of the unit interval: any
        # quotient that is positive on both must agree within a factor 2.
        thresholds = [0.2, 0.4]
        quots = []
        for n in (401, 801):
            cloud = interval_grid(n)
            f = ScalarField.coordinate(cloud, 0)
            m = maximal_function(cloud, f, R=0.1)
            quots.append(weak_l2_check(m, f, thresholds=thresholds).quotients)
        for a, b in zip(*quots):
            assert a > 0.0 and b > 0.0
            assert max(a, b) / min(a, b) < 2.0

    def test_inconsistent_inputs_rejected(self, grid401):
        cloud, f = grid401
        c = ScalarField.constant(cloud, 1.0)
        m = maximal_function(cloud, f, R=0.1)
        fake = MaximalField(
            cloud=cloud,
            R=m.R,
            d_w=m.d_w,
            rho_grid=m.rho_grid,
            window_scales=m.window_scales,
            values=m.values,
        )
        with pytest.raises(RuntimeError, match="zero global energy"):
            weak_l2_check(fake, c)

    def test_positive_thresholds_required(self, grid401):
        cloud, f = grid401
        m = maximal_function(cloud, f, R=0.1)
        with pytest.raises(ValueError, match="positive"):
            weak_l2_check(m, f, thresholds=[0.0, 1.0])

    def test_csv_export(self, grid401, tmp_path):
        cloud, f = grid401
        m = maximal_function(cloud, f, R=0.1)
        path = tmp_path / "maximal.csv"
        m.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "id,maximal"
        assert len(lines) == 1 + cloud.n


class TestTelescopingBound:
    def test_constant_trivial(self, grid2001):
        cloud, _ = grid2001
        c = ScalarField.constant(cloud, 4.0)
        rep = telescoping_bound(cloud, c, 1000, 0.2)
        assert rep.lhs <= 1e-12
        assert rep.c_report == 0.0
        assert rep.ok

    def test_identity_interior_symmetric(self, grid2001):
        # Interior balls around the same center share their mean for
        # f = x, so the whole dyadic chain telescopes to zero.
        cloud, f = grid2001
        rep = telescoping_bound(cloud, f, 1000, 0.2)
        assert rep.lhs <= 1e-12
        assert rep.ok

    def test_quadratic_matches_brute_chain(self, grid2001):
        cloud, f0 = grid2001
        f = ScalarField.from_function(cloud, lambda c: c[:, 0] ** 2)
        rep = telescoping_bound(cloud, f, 500, 0.2)
        dmat = dist_matrix(cloud.coords)
        brute = abs(
            chain_ball_average(dmat, cloud.weights, f.values, 500, 0.2)
            - chain_ball_average(dmat, cloud.weights, f.values, 500, rep.rho_min)
        )
        assert rep.lhs == pytest.approx(brute, rel=1e-12)
        assert rep.ok
        assert rep.c_report <= 4.0

    def test_chain_levels_halve_to_floor(self, grid2001):
        cloud, f = grid2001
        rep = telescoping_bound(cloud, f, 500, 0.2)
        floor = 3.0 * cloud.mesh
        assert rep.levels[0] == pytest.approx(0.2)
        assert np.allclose(rep.levels[:-1] / rep.levels[1:], 2.0)
        assert rep.rho_min >= floor
        assert rep.rho_min / 2.0 < floor

    def test_stable_across_radii(self, grid2001):
        cloud, _ = grid2001
        f = ScalarField.from_function(cloud, lambda c: c[:, 0] ** 2)
        for rho in (0.1, 0.2):
            rep = telescoping_bound(cloud, f, 500, rho)
            assert rep.ok
            assert rep.c_report <= 4.0

    def test_small_rho_rejected(self, grid2001):
        cloud, f = grid2001
        with pytest.raises(ValueError, match="dyadic chain"):
            telescoping_bound(cloud, f, 500, 0.005)

    def test_center_validated(self, grid2001):
        cloud, f = grid2001
        with pytest.raises(ValueError, match="out of range"):
            telescoping_bound(cloud, f, 5000, 0.2)
