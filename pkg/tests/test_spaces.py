import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from condlab.errors import InvalidParameter, UnsupportedPair
from condlab.spaces import (INF, Lorentz, Lp, WeightedLorentz, WeightSeq, decreasing_rearrangement,
                            delta_closed_form, dual_fundamental, essential_decrease_check, fundamental,
                            fundamental_function, harmonic, harmonic_w, norm_variants, parse_space,
                            regularity_check, space_norm)

BANACH = [Lp(1), Lp(1.5), Lp(2), Lp(4), Lp(INF), Lorentz(2, 1), Lorentz(3, 2), Lorentz(4, 4 / 3),
          WeightedLorentz(WeightSeq.power(-0.5, 2048), 1.0), WeightedLorentz(WeightSeq.lorentz(3.0), 2.0)]


class TestNorms:
    def test_lorentz_harmonic_example(self):
        f = np.arange(1, 4) ** -0.5
        assert space_norm(Lorentz(2, 1), f) == pytest.approx(11 / 6, rel=1e-15)

    @pytest.mark.parametrize("spec", BANACH + [Lp(0.5), Lorentz(2, 0.5)])
    def test_unit_vector(self, spec):
        e = np.zeros(5)
        e[2] = -1.0
        expected = 1.0 if spec.kind != "wlorentz" else spec.weight.s(1)[0]
        assert space_norm(spec, e) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("spec", BANACH)
    def test_rearrangement_and_sign_invariance(self, spec, rng):
        f = rng.standard_normal(40)
        g = rng.permutation(f) * rng.choice([-1.0, 1.0], 40)
        assert space_norm(spec, g) == space_norm(spec, f)

    @pytest.mark.parametrize("spec", BANACH)
    def test_triangle_inequality(self, spec, rng):
        F, G = rng.standard_normal((2, 1000, 30)) * rng.random((2, 1000, 1)) ** 3
        lhs = space_norm(spec, F + G)
        assert np.all(lhs <= (space_norm(spec, F) + space_norm(spec, G)) * (1 + 1e-12))

    @pytest.mark.parametrize("spec", BANACH + [Lorentz(2, 0.5), Lp(0.5)])
    def test_lattice_property(self, spec, rng):
        G = rng.standard_normal((500, 25))
        F = G * rng.random((500, 25))
        assert np.all(space_norm(spec, F) <= space_norm(spec, G) * (1 + 1e-12))

    def test_vectorised_matches_rows(self, rng):
        F = rng.standard_normal((4, 9))
        spec = Lorentz(3, 2)
        assert np.allclose(space_norm(spec, F), [space_norm(spec, f) for f in F], rtol=1e-15)

    def test_extreme_magnitudes(self):
        f = np.array([1e-200, 3e-200])
        assert space_norm(Lp(4), f) == pytest.approx(1e-200 * (1 + 3**4) ** 0.25, rel=1e-14)

    def test_q_infinity(self):
        f = np.array([1.0, 1.0, 1.0, 1.0])
        assert space_norm(Lorentz(2, INF), f) == pytest.approx(2.0)

    @given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=30), st.integers(0, 99))
    def test_property_permutation(self, values, seed):
        f = np.array(values)
        perm = np.random.default_rng(seed).permutation(len(f))
        for spec in (Lorentz(2, 1), WeightedLorentz(WeightSeq.lorentz(3.0), 1.5)):
            assert space_norm(spec, f[perm]) == space_norm(spec, f)
        assert np.all(np.diff(decreasing_rearrangement(f)) <= 0)


class TestVariants:
    def test_equivalence_constants(self, rng):
        w = WeightSeq.power(-0.5, 1024)
        F = rng.standard_normal((1000, 60)) * rng.random((1000, 1)) ** 3
        for q in (1.0, 2.0):
            d, lrp, inc = norm_variants(w, q, F)
            for other in (lrp, inc):
                r = d / other
                assert r.max() / r.min() <= 4.0

    @pytest.mark.parametrize("q", [1.0, 1.5, 2.0, INF])
    def test_single_coordinate(self, q):
        w = WeightSeq(np.array([0.7, 0.5, 0.2]))
        d, _, inc = norm_variants(w, q, np.array([0.0, 1.0, 0.0]))
        assert d == pytest.approx(0.7, rel=1e-15) and inc == pytest.approx(0.7, rel=1e-15)

    def test_telescoping(self):
        w = WeightSeq.power(-0.3, 64)
        _, _, inc = norm_variants(w, 1.0, np.ones(20))
        assert inc == pytest.approx(w.s(20)[-1], rel=1e-14)


class TestHarmonic:
    def test_values(self):
        assert harmonic(4) == pytest.approx(25 / 12, rel=1e-15)
        assert harmonic_w(WeightSeq(np.ones(50)), 37) == pytest.approx(harmonic(37), rel=1e-14)

    def test_weighted_band(self):
        w = WeightSeq.power(-0.5, 2**14)
        ratios = [harmonic_w(w, m) / harmonic(m) for m in 2 ** np.arange(0, 15)]
        assert all(0.5 <= r <= 2.0 for r in ratios)


class TestDelta:
    def test_examples(self):
        assert delta_closed_form((Lp(1), Lp(INF)), 4) == pytest.approx(4.0)
        assert delta_closed_form((Lorentz(2, 1), Lorentz(2, INF)), 3) == pytest.approx(11 / 6)
        assert delta_closed_form((Lorentz(3, 2), Lorentz(3, 2)), 9) == 1.0
        w = WeightSeq.lorentz(3.0)
        assert delta_closed_form((WeightedLorentz(w, 1), WeightedLorentz(w, 2)), 8) == pytest.approx(
            harmonic_w(w, 8) ** 0.5)

    def test_unsupported(self):
        with pytest.raises(UnsupportedPair):
            delta_closed_form((Lp(1), Lorentz(2, 1)), 3)
        with pytest.raises(UnsupportedPair):
            delta_closed_form((Lorentz(2, 1), Lorentz(3, 2)), 3)
        with pytest.raises(UnsupportedPair):
            delta_closed_form((Lp(4), Lp(2)), 3)

    def test_sampled_never_exceeds(self, rng):
        for q, r in ((1.0, 2.0), (4 / 3, 4.0)):
            for m in (3, 9):
                F = rng.standard_normal((10_000, m))
                ratios = space_norm(Lp(q), F) / space_norm(Lp(r), F)
                bound = delta_closed_form((Lp(q), Lp(r)), m)
                assert ratios.max() <= bound * (1 + 1e-12)
                c = np.ones(m)
                assert space_norm(Lp(q), c) / space_norm(Lp(r), c) == pytest.approx(bound, rel=1e-13)


class TestFundamental:
    def test_l2(self):
        for m in (1, 7, 100):
            row = fundamental(Lp(2), m)
            assert row.Lambda == pytest.approx(math.sqrt(m)) and row.Gamma == pytest.approx(math.sqrt(m))
            assert row.c == pytest.approx(1.0)

    def test_lorentz_weight_telescopes(self):
        spec = WeightedLorentz(WeightSeq.lorentz(2.0), 1.0)
        assert fundamental_function(spec, 49) == pytest.approx(7.0, rel=1e-14)
        assert fundamental_function(Lorentz(2, 1), 49) == pytest.approx(np.sum(np.arange(1, 50) ** -0.5))

    @pytest.mark.parametrize("spec", BANACH)
    def test_band(self, spec):
        assert spec.banach
        for m in list(range(1, 40)) + [128, 1024]:
            c = fundamental(spec, m).c
            assert 1 - 1e-12 <= c <= 2 + 1e-12

    @pytest.mark.parametrize("spec", [Lorentz(3, 2), Lorentz(2, 4), Lorentz(4, 1.5),
                                      WeightedLorentz(WeightSeq.lorentz(3.0), 1.5)])
    def test_dual_against_optimiser(self, spec):
        """Γ_m = sup Σ x_n over the unit ball; compare with a bounded numerical optimiser."""
        for m in (2, 5, 12):
            gam, steps = dual_fundamental(spec, m)
            assert steps <= gam * (1 + 1e-12)

            def neg(d):
                x = np.cumsum(d[::-1])[::-1]
                return -x.sum() / space_norm(spec, x)

            best = 0.0
            for seed in range(4):
                x0 = np.random.default_rng(seed).random(m) + 0.01
                res = minimize(neg, x0, bounds=[(0, None)] * m, method="L-BFGS-B")
                best = max(best, -res.fun)
            assert best <= gam * (1 + 1e-9)
            assert best >= gam * (1 - 1e-4)


class TestRegularity:
    def test_examples(self):
        assert regularity_check(np.arange(1, 5000) ** 0.5, "LRP").witness == 4
        assert not regularity_check(np.arange(1, 5000.0), "URP").holds
        assert not regularity_check(np.cumsum(1 / np.arange(1, 2**14)), "LRP").holds

    def test_bad_kind(self):
        with pytest.raises(InvalidParameter):
            regularity_check([1, 2, 3], "XRP")

    def test_essential_decrease(self):
        assert essential_decrease_check(np.arange(1, 200) ** 0.5, 2) == pytest.approx(1.0)
        assert essential_decrease_check(np.arange(1, 200.0), 1) == pytest.approx(1.0)
        m = np.arange(1, 200)
        phi = np.array([fundamental_function(Lorentz(2, 1), k) for k in m])
        # phi ~ m^(1/2) up to the measured constant C; the check is then at most C^2
        r = phi / np.sqrt(m)
        C = r.max() / r.min()
        assert 1.0 <= essential_decrease_check(phi, 2) <= 2 * C**2
        assert essential_decrease_check(np.sqrt(m), 2) == pytest.approx(1.0)


class TestParsing:
    def test_round_trip(self):
        for text in ("lp:2", "lp:inf", "lorentz:4,2", "lorentz:4/3,2"):
            spec = parse_space(text)
            assert parse_space(spec.text()) == spec

    def test_weight_file(self, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("n,w_n\n1,1.0\n2,0.5\n3,0.25\n")
        spec = parse_space(f"wlorentz:{p},2")
        assert spec.weight.s(3)[-1] == pytest.approx(1.75)

    @pytest.mark.parametrize("text", ["lq:2", "lp:abc", "lorentz:2", "lp:-1"])
    def test_bad(self, text):
        with pytest.raises(InvalidParameter):
            parse_space(text)
