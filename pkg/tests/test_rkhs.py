import math

import numpy as np
import pytest

import anchorquad as aq
from anchorquad.errors import (
    BudgetError,
    DomainError,
    NotInSpaceError,
)

from conftest import (
    direct_component_eval,
    random_anchored_function,
    random_explicit_family,
)


def vset(*idx):
    return aq.VariableSet(tuple(idx))


class TestKernelEval:
    def test_min_pair(self, wiener):
        assert aq.kernel_eval(wiener, 0.3, 0.7) == 0.3

    def test_anchor_column_is_zero(self, wiener):
        assert aq.kernel_eval(wiener, 0.5, 0.0) == 0.0

    def test_diagonal(self, wiener):
        assert aq.kernel_eval(wiener, 0.5, 0.5) == 0.5

    def test_symmetry(self, wiener):
        rng = np.random.default_rng(0)
        x, y = rng.random(50), rng.random(50)
        assert np.array_equal(
            aq.kernel_eval(wiener, x, y), aq.kernel_eval(wiener, y, x)
        )

    def test_domain_error(self, wiener):
        with pytest.raises(DomainError):
            aq.kernel_eval(wiener, 1.5, 0.2)


class TestKernelConstants:
    def test_wiener_closed_form(self, wiener):
        # oracles: int_0^1 x dx = 1/2 and int int min(x,y) = 1/3 by hand
        assert aq.kernel_constants(wiener) == (0.5, 1.0 / 3.0)

    def test_scaling_linearity(self):
        k = aq.wiener_kernel(scale=2.5)
        M, C0 = aq.kernel_constants(k)
        assert M == pytest.approx(2.5 * 0.5, rel=1e-15)
        assert C0 == pytest.approx(2.5 / 3.0, rel=1e-15)

    def test_tabulated_copy_matches(self, wiener):
        tab = aq.tabulated_kernel(
            wiener.kernel_fn, wiener.domain, wiener.anchor, grid_points=10_001
        )
        M, C0 = aq.kernel_constants(tab)
        assert M == pytest.approx(0.5, abs=1e-6)
        assert C0 == pytest.approx(1.0 / 3.0, abs=1e-6)

    def test_tabulated_mean_function(self, wiener):
        tab = aq.tabulated_kernel(
            wiener.kernel_fn, wiener.domain, wiener.anchor, grid_points=4097
        )
        for t in (0.2, 0.5, 0.9):
            assert float(np.asarray(tab.mean_fn(t))) == pytest.approx(
                t - t * t / 2.0, abs=1e-8
            )


class TestGramPSD:
    @pytest.mark.parametrize("trial", range(10))
    def test_random_gram_psd(self, wiener, trial):
        rng = np.random.default_rng(100 + trial)
        for _ in range(5):
            pts = rng.random(int(rng.integers(2, 9)))
            G = np.asarray(aq.kernel_eval(wiener, pts[:, None], pts[None, :]))
            assert np.linalg.eigvalsh(G).min() >= -1e-9


class TestKuEval:
    def test_empty_set_is_one(self, wiener):
        x = aq.point([3], [0.4])
        assert aq.ku_eval(wiener, vset(), x, x) == 1.0

    def test_product(self, wiener):
        x = aq.point([1, 2], [0.5, 0.5])
        assert aq.ku_eval(wiener, vset(1, 2), x, x) == 0.25

    def test_anchored_factor_kills_product(self, wiener):
        x = aq.point([1, 2], [0.0, 0.9])
        y = aq.point([1, 2], [0.7, 0.9])
        assert aq.ku_eval(wiener, vset(1, 2), x, y) == 0.0


class TestKgamma:
    def test_anchor_point_gives_empty_weight(self, wiener, prod3):
        x = aq.point([], [])
        assert aq.Kgamma_eval(wiener, prod3, x, x).value == 1.0

    def test_product_weights_two_coordinates(self, wiener, prod3):
        x = aq.point([1, 2], [1.0, 1.0])
        assert aq.Kgamma_eval(wiener, prod3, x, x).value == pytest.approx(
            2.25, rel=1e-14
        )

    def test_explicit_two_terms(self, wiener):
        W = aq.ExplicitWeights.of({(): 1.0, (1,): 2.0}, c0=wiener.C0)
        x = aq.point([1], [0.5])
        assert aq.Kgamma_eval(wiener, W, x, x).value == 2.0

    def test_lex_restricted_sum(self, wiener):
        W = aq.LexOrderedWeights(2, aq.PowerGenerator(1.0, 2.0), c0=wiener.C0)
        x = aq.point([1, 2], [1.0, 1.0])
        # subsets of {1,2}: ranks {1}->1, {2}->2, {1,2}->3
        expect = (
            1.0
            + (1.0 / wiener.C0) * 1.0
            + (1.0 / 4.0 / wiener.C0) * 1.0
            + (1.0 / 9.0 / wiener.C0**2) * 1.0
        )
        got = aq.Kgamma_eval(wiener, W, x, x).value
        assert got == pytest.approx(expect, rel=1e-12)


class TestFuncEval:
    def test_translate(self, wiener):
        f = aq.AnchoredFunction(
            wiener, (aq.Term(vset(1), 1.0, (aq.KernelTranslate(1.0),)),)
        )
        assert aq.func_eval_point(f, aq.point([1], [0.4])) == 0.4

    def test_constant_term(self, wiener):
        f = aq.AnchoredFunction(wiener, (aq.Term(vset(), 3.5, ()),))
        assert aq.func_eval_point(f, aq.point([5], [0.9])) == 3.5

    def test_two_coordinate_product(self, wiener):
        f = aq.AnchoredFunction(
            wiener,
            (
                aq.Term(
                    vset(1, 2),
                    2.0,
                    (aq.KernelTranslate(1.0), aq.KernelTranslate(1.0)),
                ),
            ),
        )
        assert aq.func_eval_point(f, aq.point([1, 2], [0.5, 0.25])) == 0.25

    def test_anchored_vanishing_exact(self, wiener):
        f = aq.AnchoredFunction(
            wiener,
            (
                aq.Term(
                    vset(1, 3),
                    1.7,
                    (aq.KernelTranslate(0.6), aq.MeanEmbedding()),
                ),
            ),
        )
        # coordinate 3 at the anchor kills the term exactly
        assert aq.func_eval_point(f, aq.point([1, 3], [0.9, 0.0])) == 0.0


class TestIntegralExact:
    def test_translate_at_one(self, wiener):
        f = aq.AnchoredFunction(
            wiener, (aq.Term(vset(1), 1.0, (aq.KernelTranslate(1.0),)),)
        )
        # oracle: int_0^1 min(x,1) dx = 1/2
        assert aq.func_integral_exact(f) == 0.5

    def test_mean_embedding(self, wiener):
        f = aq.AnchoredFunction(wiener, (aq.Term(vset(1), 1.0, (aq.MeanEmbedding(),)),))
        assert aq.func_integral_exact(f) == pytest.approx(1.0 / 3.0, rel=1e-15)

    def test_zero_function(self, wiener):
        assert aq.func_integral_exact(aq.AnchoredFunction(wiener, ())) == 0.0


class TestFuncNorm:
    def test_scaled_translate(self, wiener):
        W = aq.ProductWeights(aq.PowerGenerator(1.0, 3.0), c0=wiener.C0)
        f = aq.AnchoredFunction(
            wiener, (aq.Term(vset(1), 2.0, (aq.KernelTranslate(0.5),)),)
        )
        # |c| sqrt(k(t,t)/gamma_1) = 2 sqrt(0.5) = sqrt 2
        assert aq.func_norm(f, W) == pytest.approx(math.sqrt(2.0), rel=1e-14)

    def test_zero_function(self, wiener, prod3):
        assert aq.func_norm(aq.AnchoredFunction(wiener, ()), prod3) == 0.0

    def test_zero_weight_not_in_space(self, wiener):
        W = aq.ProductWeights(
            aq.SequenceGenerator((1.0, 0.5)), c0=wiener.C0
        )  # gamma_3 = 0
        f = aq.AnchoredFunction(
            wiener, (aq.Term(vset(3), 1.0, (aq.KernelTranslate(0.5),)),)
        )
        with pytest.raises(NotInSpaceError):
            aq.func_norm(f, W)


class TestReproducingProperty:
    def test_univariate_closed_form(self, wiener):
        rng = np.random.default_rng(9)
        for _ in range(25):
            atoms = [
                aq.KernelTranslate(float(rng.random()))
                if rng.random() < 0.7
                else aq.MeanEmbedding()
                for _ in range(int(rng.integers(1, 5)))
            ]
            coeffs = rng.uniform(-2, 2, size=len(atoms))
            t = float(rng.random())
            inner = sum(
                c * aq.atom_inner(wiener, a, aq.KernelTranslate(t))
                for c, a in zip(coeffs, atoms)
            )
            f = aq.AnchoredFunction(
                wiener,
                tuple(aq.Term(vset(1), float(c), (a,)) for c, a in zip(coeffs, atoms)),
            )
            assert inner == pytest.approx(
                aq.func_eval_point(f, aq.point([1], [t])), abs=1e-10
            )

    def test_multivariate_via_inner_product(self, wiener, prod3):
        rng = np.random.default_rng(10)
        sets = [vset(1), vset(2), vset(1, 2), vset(1, 3)]
        for _ in range(20):
            f = random_anchored_function(rng, wiener, sets)
            y = {j: float(rng.uniform(0.1, 1.0)) for j in (1, 2, 3)}
            # representer K_gamma(., y) restricted to f's support sets
            rep_terms = tuple(
                aq.Term(
                    u,
                    prod3.weight_of(u),
                    tuple(aq.KernelTranslate(y[j]) for j in u),
                )
                for u in f.support
            )
            rep = aq.AnchoredFunction(wiener, rep_terms)
            lhs = aq.inner_product(f, rep, prod3)
            batch = aq.point(sorted(y), [y[j] for j in sorted(y)])
            assert lhs == pytest.approx(aq.func_eval_point(f, batch), abs=1e-10)


class TestCauchySchwarz:
    def test_integral_bounded_by_norms(self, wiener):
        rng = np.random.default_rng(11)
        for _ in range(100):
            W = random_explicit_family(rng)
            sets = [u for u, g in W.entries]
            f = random_anchored_function(rng, wiener, sets)
            norm_i = math.sqrt(aq.operator_norm_sq(W).full)
            assert abs(aq.func_integral_exact(f)) <= aq.func_norm(f, W) * norm_i + 1e-12


class TestAnchorRestrict:
    def test_empty_v_hits_anchor(self, wiener):
        f = aq.AnchoredFunction(
            wiener,
            (
                aq.Term(vset(), 2.0, ()),
                aq.Term(vset(1), 1.0, (aq.KernelTranslate(1.0),)),
            ),
        )
        out = aq.anchor_restrict(f, vset(), aq.point([1], [0.8]))
        assert out[0] == 2.0

    def test_partial_restriction_kills_term(self, wiener):
        f = aq.AnchoredFunction(
            wiener,
            (
                aq.Term(
                    vset(1, 2),
                    1.0,
                    (aq.KernelTranslate(1.0), aq.KernelTranslate(1.0)),
                ),
            ),
        )
        rng = np.random.default_rng(3)
        for _ in range(10):
            x = aq.point([1, 2], rng.random(2))
            assert aq.anchor_restrict(f, vset(1), x)[0] == 0.0

    def test_superset_leaves_term_intact(self, wiener):
        f = aq.AnchoredFunction(
            wiener, (aq.Term(vset(1), 1.0, (aq.KernelTranslate(1.0),)),)
        )
        x = aq.point([1, 2], [0.4, 0.9])
        assert aq.anchor_restrict(f, vset(1, 2), x)[0] == aq.func_eval_point(
            f, aq.point([1], [0.4])
        )


class TestAnchoredComponentEval:
    def test_empty_u_is_anchor_value(self, wiener):
        f = aq.AnchoredFunction(
            wiener,
            (
                aq.Term(vset(), 1.25, ()),
                aq.Term(vset(1), 1.0, (aq.KernelTranslate(1.0),)),
            ),
        )
        out = aq.anchored_component_eval(f, vset(), aq.point([1], [0.5]))
        assert out[0] == 1.25

    def test_extracts_single_component(self, wiener):
        f = aq.AnchoredFunction(
            wiener,
            (
                aq.Term(vset(1), 3.0, (aq.KernelTranslate(0.8),)),
                aq.Term(
                    vset(1, 2),
                    2.0,
                    (aq.KernelTranslate(1.0), aq.KernelTranslate(1.0)),
                ),
            ),
        )
        x = aq.point([1, 2], [0.5, 0.25])
        got = aq.anchored_component_eval(f, vset(1, 2), x)
        want = direct_component_eval(f, vset(1, 2), x)
        assert got[0] == pytest.approx(want[0], abs=1e-12)

    def test_absent_component_cancels(self, wiener):
        f = aq.AnchoredFunction(
            wiener,
            (
                aq.Term(vset(1), 1.0, (aq.KernelTranslate(0.9),)),
                aq.Term(vset(2), 1.0, (aq.MeanEmbedding(),)),
            ),
        )
        rng = np.random.default_rng(4)
        for _ in range(10):
            x = aq.point([3], [float(rng.random())])
            assert abs(aq.anchored_component_eval(f, vset(3), x)[0]) < 1e-12

    def test_matches_direct_on_random_functions(self, wiener):
        rng = np.random.default_rng(5)
        sets = [vset(1), vset(2), vset(1, 2), vset(1, 3), vset(2, 3, 4), vset(1, 2, 3, 4)]
        for _ in range(50):
            f = random_anchored_function(rng, wiener, sets)
            u = sets[int(rng.integers(0, len(sets)))]
            cols = sorted(set(j for s in sets for j in s))
            x = aq.point(cols, rng.uniform(0.05, 1.0, size=len(cols)))
            got = aq.anchored_component_eval(f, u, x)
            want = direct_component_eval(f, u, x)
            assert got[0] == pytest.approx(want[0], abs=1e-10)

    def test_guard_on_large_sets(self, wiener):
        f = aq.AnchoredFunction(wiener, ())
        u = aq.VariableSet(tuple(range(1, 27)))
        with pytest.raises(BudgetError):
            aq.anchored_component_eval(f, u, aq.point(u.indices, [0.5] * 26))


class TestSampler:
    def test_seed_reproducibility(self, wiener):
        a = aq.ProductMeasureSampler(wiener, 123).draw(vset(1, 4), 100)
        b = aq.ProductMeasureSampler(wiener, 123).draw(vset(1, 4), 100)
        assert np.array_equal(a.values, b.values)

    def test_spawned_streams_differ(self, wiener):
        s = aq.ProductMeasureSampler(wiener, 123)
        a = s.spawn(1).draw(vset(1), 50)
        b = s.spawn(2).draw(vset(1), 50)
        assert not np.array_equal(a.values, b.values)

    def test_inactive_coordinates_are_anchor(self, wiener):
        batch = aq.ProductMeasureSampler(wiener, 5).draw(vset(2), 10)
        f = aq.AnchoredFunction(
            wiener, (aq.Term(vset(1), 1.0, (aq.KernelTranslate(1.0),)),)
        )
        assert np.all(aq.func_eval(f, batch) == 0.0)


class TestSerialization:
    def test_round_trip_exact(self, wiener):
        rng = np.random.default_rng(6)
        sets = [vset(1), vset(2, 5), vset(1, 3, 4)]
        for _ in range(20):
            f = random_anchored_function(rng, wiener, sets)
            g = aq.function_from_json(aq.function_to_json(f), wiener)
            assert g == f

    def test_seventeen_digit_coefficients(self, wiener):
        c = 0.12345678901234567
        f = aq.AnchoredFunction(
            wiener, (aq.Term(vset(1), c, (aq.KernelTranslate(0.7071067811865476),)),)
        )
        g = aq.function_from_json(aq.function_to_json(f), wiener)
        assert g.terms[0].coeff == c
        assert g.terms[0].atoms[0].t == 0.7071067811865476
