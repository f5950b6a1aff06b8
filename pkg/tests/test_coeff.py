import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from richop import coeff as C
from richop import mesh as M


class TestMembership:
    def test_constant_at_center(self, square):
        assert C.membership(C.constant(1.0), 1.0, 0.25, 16, square).ok

    def test_boundary_cases(self, square):
        inside = C.from_callable(
            lambda p: 1.0 + 0.5 * np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
        )
        assert C.membership(inside, 1.0, 0.5, 32, square).ok
        assert not C.membership(C.constant(2.0), 1.0, 0.5, 8, square).ok

    def test_witness_matches_dense_oracle(self, square):
        a = C.from_callable(lambda p: 1.0 + 0.4 * np.cos(3 * p[:, 0]) * np.cos(2 * p[:, 1]))
        res = C.membership(a, 1.0, 0.5, 200, square)
        assert res.ok
        pts = C.domain_grid(square, 1000)
        vals = a(pts)
        j = int(np.argmin(vals))
        assert abs(res.min_value - vals[j]) < 1e-4
        assert np.linalg.norm(res.min_point - pts[j]) < 2.0 / 200 * np.sqrt(2) + 2e-3

    @settings(max_examples=20, deadline=None)
    @given(
        beta1=st.floats(min_value=0.05, max_value=0.45),
        extra=st.floats(min_value=0.01, max_value=0.5),
    )
    def test_monotone_in_beta(self, square, beta1, extra):
        a = C.from_callable(lambda p: 1.0 + 0.04 * np.sin(7 * p[:, 0]))
        first = C.membership(a, 1.0, beta1, 16, square).ok
        if first:
            assert C.membership(a, 1.0, beta1 + extra, 16, square).ok

    def test_nonfinite_raises(self, square):
        bad = C.from_callable(lambda p: np.where(p[:, 0] > 0.5, np.inf, 1.0))
        with pytest.raises(ValueError):
            C.membership(bad, 1.0, 0.5, 16, square)

    def test_grid_n_validation(self, square):
        with pytest.raises(ValueError):
            C.domain_grid(square, 1)


class TestAbsShift:
    def test_nonnegative_branch(self, square, rng):
        base = C.from_callable(lambda p: 0.3 + 0.2 * p[:, 0])
        shifted = C.abs_shift(base, 0.1)
        pts = rng.uniform(0, 1, (50, 2))
        assert np.max(np.abs(shifted(pts) - (0.1 + base(pts)))) == 0.0

    def test_evenness(self, square, rng):
        base = C.from_callable(lambda p: np.sin(5 * p[:, 0]) - 0.2)
        neg = C.affine_combination([base], [-1.0])
        s1 = C.abs_shift(base, 0.3)
        s2 = C.abs_shift(neg, 0.3)
        pts = rng.uniform(0, 1, (100, 2))
        assert np.array_equal(s1(pts), s2(pts))

    def test_sine_range_scan(self, square):
        a = C.from_callable(lambda p: np.sin(2 * np.pi * p[:, 0]))
        shifted = C.abs_shift(a, 0.1)
        vals = shifted(C.domain_grid(square, 400))
        assert abs(vals.min() - 0.1) < 1e-4
        assert abs(vals.max() - 1.1) < 1e-4

    def test_essinf_above_shift(self, square, rng):
        # any abs-shifted field sits in a cone with essinf >= a_min
        a = C.from_callable(lambda p: np.cos(4 * p[:, 0] + p[:, 1]))
        shifted = C.abs_shift(a, 0.25)
        vals = shifted(C.domain_grid(square, 300))
        alpha_eff = 0.5 * (vals.min() + vals.max())
        beta_eff = 0.5 * (vals.max() - vals.min())
        assert alpha_eff - beta_eff >= 0.25 - 1e-12
        assert C.membership(shifted, alpha_eff, beta_eff + 1e-9, 100, square).ok

    def test_invalid_shift(self):
        with pytest.raises(ValueError):
            C.abs_shift(C.constant(1.0), 0.0)


class TestAffineFields:
    @settings(max_examples=25, deadline=None)
    @given(
        st.lists(
            st.floats(min_value=-3, max_value=3, allow_nan=False),
            min_size=3,
            max_size=3,
        )
    )
    def test_linearity(self, weights):
        fields = [
            C.constant(1.0),
            C.trig_mode(1, 0),
            C.trig_mode(2, 1),
        ]
        combo = C.affine_combination(fields, weights)
        pts = np.array([[0.3, 0.7], [0.1, 0.9], [0.55, 0.25]])
        stacked = np.stack([f(pts) for f in fields], axis=1)
        expected = stacked @ np.asarray(weights)
        assert np.max(np.abs(combo(pts) - expected)) <= 1e-14

    def test_weight_count_mismatch(self):
        with pytest.raises(ValueError):
            C.affine_combination([C.constant(1.0)], [1.0, 2.0])

    def test_scalar_point_evaluation(self):
        a = C.constant(2.5)
        assert a(np.array([0.5, 0.5])) == 2.5


class TestFamilies:
    def test_parametric_determinism(self, square):
        modes = [C.trig_mode(k + 1, 1) for k in range(4)]
        fam = C.parametric_family(1.0, 0.5, modes, square)
        s1 = C.sample_family(fam, 10, 42)
        s2 = C.sample_family(fam, 10, 42)
        pts = C.domain_grid(square, 40)
        for a, b in zip(s1, s2):
            assert np.array_equal(a(pts), b(pts))
            assert np.array_equal(a.meta["params"], b.meta["params"])

    def test_analytic_family_membership(self, square):
        fam = C.analytic_family(1.0, 0.5, square, n_modes=5, decay=0.6)
        for a in C.sample_family(fam, 50, 7):
            assert C.membership(a, 1.0, 0.5, 48, square).ok

    def test_analytic_family_derivative_envelope_low_orders(self, square):
        # factorially controlled derivatives are verified for orders <= 4
        # via the analytic per-mode bound |d^nu mode| <= (k pi)^{|nu|}
        fam = C.analytic_family(1.0, 0.5, square, n_modes=4, decay=0.7)
        a_bound = fam.analytic_bound
        scale = fam.beta * fam.fill / fam.normalizer
        import math

        for m in range(5):
            total = fam.alpha if m == 0 else 0.0
            for amp, mode in zip(fam.amplitudes, fam.modes):
                k = max(mode.meta["kx"], mode.meta["ky"]) * np.pi
                total += scale * amp * k**m
            assert total <= a_bound ** (m + 1) * math.factorial(m)

    def test_inconsistent_family_bounds_detected(self, square):
        # a broken normalizer lets samples overshoot the band, which the
        # sampler must flag
        broken = C.DataFamily(
            kind="parametric",
            alpha=1.0,
            beta=0.3,
            modes=(C.trig_mode(1, 0),),
            amplitudes=(1.0,),
            fill=1.0,
            normalizer=0.2,
            domain=square,
        )
        with pytest.raises(ValueError):
            C.sample_family(broken, 10, 0)

    def test_sobolev_seminorm_estimate(self, square):
        # piecewise-P2 fields have gradient kinks on element interfaces, so
        # the finite-difference stencil must stay inside one element, where
        # second derivatives are constant and the estimate is exact
        coarse = M.triangulate(square, 0.5)
        fam = C.sobolev_family(1.0, 0.5, coarse, order=2, radius=60.0)
        members = C.sample_family(fam, 5, 3)
        bary = coarse.nodes[coarse.triangles].mean(axis=1)
        g = 0.02
        offsets = g * np.array(
            [[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]]
        )
        for a in members:
            est = 0.0
            for center in bary:
                v = a(center[None, :] + offsets)
                dxx = (v[1] - 2 * v[0] + v[2]) / g**2
                dyy = (v[3] - 2 * v[0] + v[4]) / g**2
                dxy = (v[5] - v[6] - v[7] + v[8]) / (4 * g**2)
                est = max(est, abs(dxx), abs(dyy), abs(dxy))
            assert est <= fam.sobolev_radius

    def test_abs_family_members(self, square):
        fam = C.abs_family(
            1.0, 0.5, [C.trig_mode(1, 0), C.trig_mode(1, 1)], square, 0.6, 0.8
        )
        for a in C.sample_family(fam, 10, 5):
            vals = a(C.domain_grid(square, 64))
            assert vals.min() >= 0.6 - 1e-12
            assert vals.max() <= 1.4 + 1e-12

    def test_abs_family_band_validation(self, square):
        with pytest.raises(ValueError):
            C.abs_family(1.0, 0.2, [C.trig_mode(1, 0)], square, 0.6, 0.8)

    def test_inadmissible_family_detected(self, square):
        # fill > 1 is rejected up front by the dataclass
        with pytest.raises(ValueError):
            C.DataFamily(kind="parametric", alpha=1.0, beta=0.5, fill=1.5)

    def test_count_validation(self, square, family):
        with pytest.raises(ValueError):
            C.sample_family(family, 0, 1)


class TestMeshField:
    def test_p1_reproduces_nodal_values(self, square):
        mesh = M.triangulate(square, 0.5)
        vals = np.cos(mesh.nodes[:, 0] * 2 + mesh.nodes[:, 1])
        field = C.mesh_field(mesh, vals, 1)
        assert np.max(np.abs(field(mesh.nodes) - vals)) < 1e-13

    def test_p1_linear_between_nodes(self, square):
        mesh = M.triangulate(square, 0.5)
        lin = 0.7 * mesh.nodes[:, 0] - 0.4 * mesh.nodes[:, 1] + 2.0
        field = C.mesh_field(mesh, lin, 1)
        pts = C.domain_grid(square, 55)
        expected = 0.7 * pts[:, 0] - 0.4 * pts[:, 1] + 2.0
        assert np.max(np.abs(field(pts) - expected)) < 1e-13

    def test_outside_point_raises(self, square):
        mesh = M.triangulate(square, 0.5)
        field = C.mesh_field(mesh, np.ones(mesh.n_nodes), 1)
        with pytest.raises(ValueError):
            field(np.array([[2.0, 2.0]]))


class TestSerialization:
    def test_parametric_round_trip(self, square):
        modes = [C.trig_mode(1, 0), C.trig_mode(2, 2, "sin")]
        fam = C.parametric_family(1.0, 0.5, modes, square)
        a = C.sample_family(fam, 1, 9)[0]
        doc = C.field_to_json(a, 1.0, 0.5)
        parsed = json.loads(doc)
        assert parsed["kind"] == "parametric"
        assert parsed["alpha"] == 1.0
        back = C.field_from_json(doc)
        pts = C.domain_grid(square, 30)
        assert np.max(np.abs(back(pts) - a(pts))) < 1e-15

    def test_unsupported_mode_rejected(self, square):
        field = C.from_callable(lambda p: p[:, 0])
        with pytest.raises(ValueError):
            C.field_to_json(field, 1.0, 0.5)
