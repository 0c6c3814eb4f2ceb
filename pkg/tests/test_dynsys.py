import math

import numpy as np
import pytest

import basinrec as br
from basinrec.dynsys import TSIT5_A, TSIT5_B, TSIT5_C, TSIT5_E

from reference import rk4_integrate, rk4_label


def norm3(v):
    return math.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)


class TestLorenzRhs:
    def test_origin_is_fixed_point(self, params12):
        assert br.lorenz_rhs(params12, (0.0, 0.0, 0.0)) == (0.0, 0.0, 0.0)

    def test_hand_substitution(self, params12):
        out = br.lorenz_rhs(params12, (1.0, 1.0, 1.0))
        assert out[0] == pytest.approx(0.0, abs=1e-15)
        assert out[1] == pytest.approx(10.0, abs=1e-15)
        assert out[2] == pytest.approx(-5.0 / 3.0, abs=1e-15)

    def test_vanishes_at_fixed_points(self, params12):
        cp, cm = br.fixed_points(params12)
        assert norm3(br.lorenz_rhs(params12, cp)) < 1e-12
        assert norm3(br.lorenz_rhs(params12, cm)) < 1e-12

    def test_rejects_bad_params(self):
        with pytest.raises(ValueError):
            br.LorenzParams(r=-1.0)
        with pytest.raises(ValueError):
            br.LorenzParams(r=12.0, sigma=0.0)


class TestFixedPoints:
    def test_known_value_r12(self, params12):
        cp, cm = br.fixed_points(params12)
        assert cp[0] == pytest.approx(5.416026, abs=1e-6)
        assert cp[1] == pytest.approx(5.416026, abs=1e-6)
        assert cp[2] == 11.0
        assert cm == (-cp[0], -cp[1], cp[2])

    def test_pitchfork_degeneracy(self):
        cp, cm = br.fixed_points(br.LorenzParams(r=1.0 + 1e-12))
        assert abs(cp[0]) < 1e-5 and abs(cp[2]) < 1e-11
        assert abs(cm[0]) < 1e-5

    def test_z_component_exact(self):
        cp, _ = br.fixed_points(br.LorenzParams(r=20.0))
        assert cp[2] == 19.0

    def test_rejects_r_below_one(self):
        with pytest.raises(ValueError):
            br.fixed_points(br.LorenzParams(r=1.0))
        with pytest.raises(ValueError):
            br.fixed_points(br.LorenzParams(r=0.5))

    def test_residual_across_bistable_range(self):
        # fixed-point residual < 1e-10 over the whole range
        for r in np.linspace(1.0 + 1e-6, 24.74 - 1e-6, 100):
            params = br.LorenzParams(r=float(r))
            cp, cm = br.fixed_points(params)
            assert norm3(br.lorenz_rhs(params, cp)) < 1e-10
            assert norm3(br.lorenz_rhs(params, cm)) < 1e-10


class TestSymmetry:
    def test_basic_image(self):
        assert br.symmetry_image((1.0, 2.0, 3.0)) == (-1.0, -2.0, 3.0)
        assert br.symmetry_image((0.0, 0.0, 5.0)) == (0.0, -0.0, 5.0)

    def test_involution(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            s = tuple(rng.uniform(-50, 50, 3))
            assert br.symmetry_image(br.symmetry_image(s)) == s

    def test_equivariance(self, params12):
        # rhs(sym(s)) = (-dx, -dy, dz) where (dx, dy, dz) = rhs(s)
        rng = np.random.default_rng(6)
        for _ in range(50):
            s = tuple(rng.uniform(-50, 50, 3))
            dx, dy, dz = br.lorenz_rhs(params12, s)
            ex, ey, ez = br.lorenz_rhs(params12, br.symmetry_image(s))
            assert ex == pytest.approx(-dx, abs=1e-14)
            assert ey == pytest.approx(-dy, abs=1e-14)
            assert ez == pytest.approx(dz, abs=1e-14)


class TestTableau:
    def test_consistency(self):
        assert TSIT5_B.sum() == pytest.approx(1.0, abs=1e-14)
        assert TSIT5_E.sum() == pytest.approx(0.0, abs=1e-14)
        for i, row in enumerate(TSIT5_A, start=1):
            assert row.sum() == pytest.approx(TSIT5_C[i], abs=1e-13)

    def test_fifth_order_on_linear_problem(self):
        # global error at t=1 for dy/dt = -y should scale like h^5
        def f(t, y):
            return -y

        def global_error(h):
            y = np.ones(3)
            n = round(1.0 / h)
            for _ in range(n):
                y, _ = br.tsit5_step(f, 0.0, y, h)
            return abs(y[0] - math.exp(-1.0))

        errs = [global_error(h) for h in (1e-1, 5e-2, 2.5e-2)]
        for e1, e2 in zip(errs, errs[1:]):
            ratio = e1 / e2
            assert 32.0 / 4.0 < ratio < 32.0 * 4.0


class TestIntegrateToRest:
    def test_fixed_point_converges_immediately(self, params12):
        cp, _ = br.fixed_points(params12)
        final, elapsed, converged = br.integrate_to_rest(params12, cp)
        assert converged
        assert elapsed == 0.0
        assert final == cp

    def test_matches_reference_integrator(self, params12):
        final, _, converged = br.integrate_to_rest(params12, (1.0, 1.0, 20.0))
        assert converged
        ref_final, _, ref_stopped = rk4_integrate(params12, (1.0, 1.0, 20.0), h=1e-4)
        assert ref_stopped
        cp, cm = br.fixed_points(params12)
        mine = 1 if math.dist(final, cp) < math.dist(final, cm) else 0
        ref = 1 if math.dist(ref_final, cp) < math.dist(ref_final, cm) else 0
        assert mine == ref
        attractor = cp if mine == 1 else cm
        assert math.dist(final, attractor) < 1e-3

    def test_symmetric_pair_reaches_opposite_attractors(self, params12):
        ic = (1.0, 1.0, 20.0)
        lab = rk4_label(params12, ic)
        lab_sym = rk4_label(params12, br.symmetry_image(ic))
        assert {lab, lab_sym} == {0, 1}
        final_a, _, _ = br.integrate_to_rest(params12, ic)
        final_b, _, _ = br.integrate_to_rest(params12, br.symmetry_image(ic))
        cp, cm = br.fixed_points(params12)
        side_a = math.dist(final_a, cp) < math.dist(final_a, cm)
        side_b = math.dist(final_b, cp) < math.dist(final_b, cm)
        assert side_a != side_b

    def test_determinism(self, params12):
        out1 = br.integrate_to_rest(params12, (3.0, -7.0, 30.0))
        out2 = br.integrate_to_rest(params12, (3.0, -7.0, 30.0))
        assert out1 == out2

    def test_step_underflow_is_distinct_failure(self, params12):
        cfg = br.IntegratorConfig(abs_tol=1e-13, rel_tol=1e-13, min_step=0.5,
                                  initial_step=0.5, max_step=1.0)
        with pytest.raises(br.StepSizeUnderflow):
            br.integrate_to_rest(params12, (1.0, 1.0, 20.0), cfg)

    def test_zero_radius_runs_to_max_time(self, params12):
        cfg = br.IntegratorConfig(max_time=5.0, convergence_radius=0.0)
        final, elapsed, converged = br.integrate_to_rest(params12, (1.0, 1.0, 20.0), cfg)
        assert not converged
        assert elapsed == 5.0

    def test_rejects_nonfinite_ic(self, params12):
        with pytest.raises(ValueError):
            br.integrate_to_rest(params12, (math.nan, 0.0, 0.0))

    def test_tolerance_consistency_far_from_boundary(self, params12):
        # tightening tolerances must not flip labels for robust ICs
        rng = np.random.default_rng(77)
        ics = rng.uniform(-50, 50, (40, 3))
        loose = br.IntegratorConfig()
        tight = br.IntegratorConfig(abs_tol=1e-9, rel_tol=1e-9)
        cp, cm = br.fixed_points(params12)

        def label(ic, cfg):
            final, _, conv = br.integrate_to_rest(params12, ic, cfg)
            assert conv
            return 1 if math.dist(final, cp) < math.dist(final, cm) else 0

        robust = 0
        for ic in ics:
            # audit: skip ICs whose 1e-2 neighborhood straddles the boundary
            nbrs = [ic + d for d in (np.array([1e-2, 0, 0]), np.array([-1e-2, 0, 0]),
                                     np.array([0, 1e-2, 0]), np.array([0, -1e-2, 0]),
                                     np.array([0, 0, 1e-2]), np.array([0, 0, -1e-2]))]
            labels = {label(p, loose) for p in nbrs}
            if len(labels) > 1:
                continue
            robust += 1
            assert label(ic, loose) == label(ic, tight)
        assert robust >= 30  # the audited sample keeps most draws


class TestIntegrateMany:
    def test_matches_single_calls(self, params12):
        rng = np.random.default_rng(8)
        ics = rng.uniform(-40, 40, (10, 3))
        finals, elapsed, status = br.integrate_many(params12, ics)
        for i, ic in enumerate(ics):
            f, t, conv = br.integrate_to_rest(params12, ic)
            assert tuple(finals[i]) == f
            assert elapsed[i] == t
            assert conv == (status[i] == 0)

    def test_worker_count_invariance(self, params12):
        rng = np.random.default_rng(9)
        ics = rng.uniform(-40, 40, (40, 3))
        f1, t1, s1 = br.integrate_many(params12, ics, workers=1)
        f3, t3, s3 = br.integrate_many(params12, ics, workers=3)
        assert np.array_equal(f1, f3)
        assert np.array_equal(t1, t3)
        assert np.array_equal(s1, s3)

    def test_shape_validation(self, params12):
        with pytest.raises(ValueError):
            br.integrate_many(params12, np.zeros((4, 2)))


class TestConfigValidation:
    def test_integrator_config(self):
        with pytest.raises(ValueError):
            br.IntegratorConfig(abs_tol=0.0)
        with pytest.raises(ValueError):
            br.IntegratorConfig(min_step=1e-3, initial_step=1e-4)
        with pytest.raises(ValueError):
            br.IntegratorConfig(max_time=-1.0)
