import math

import pytest
from hypothesis import assume, given, strategies as st

from corpus import closed_terms, terms
from slc.bn import FALSE as F, TRUE as T
from slc.evaluator import EvalConfig, peval
from slc.reductions import (GuardViolation, IndexUnderflow, NonClosedArgument,
                            NotAnAbstraction, NotEtaRedex, NotGammaLRedex, NotGammaRRedex,
                            beta, beta_allowed, count_occurrences, distribution_free, eta,
                            gamma_l, gamma_r, occurs_under_binder, shift, substitute)
from slc.syntax import parse
from slc.terms import App, Dist, Lam, Var, mk_app, mk_apps, mk_dist, mk_lam, mk_var

D = mk_dist([(T, 0.6), (F, 0.4)])
COIN = mk_dist([(T, 0.5), (F, 0.5)])
ID = mk_lam(mk_var(1))
CORR = mk_lam(mk_apps(mk_var(1), F, mk_var(1)))  # (lam 1 F 1)


# Naive reference implementation on plain tuples, sharing nothing with the library.

def to_tree(t):
    if isinstance(t, Var):
        return ("v", t.index)
    if isinstance(t, Lam):
        return ("l", to_tree(t.body))
    if isinstance(t, App):
        return ("a", to_tree(t.fn), to_tree(t.arg))
    return ("d", [(to_tree(e), p) for e, p in t.entries])


def from_tree(x):
    tag = x[0]
    if tag == "v":
        return mk_var(x[1])
    if tag == "l":
        return mk_lam(from_tree(x[1]))
    if tag == "a":
        return mk_app(from_tree(x[1]), from_tree(x[2]))
    return mk_dist([(from_tree(e), p) for e, p in x[1]])


def tree_shift(x, d, c=1):
    tag = x[0]
    if tag == "v":
        return ("v", x[1] + d) if x[1] >= c else x
    if tag == "l":
        return ("l", tree_shift(x[1], d, c + 1))
    if tag == "a":
        return ("a", tree_shift(x[1], d, c), tree_shift(x[2], d, c))
    return ("d", [(tree_shift(e, d, c), p) for e, p in x[1]])


def tree_subst(x, j, s):
    tag = x[0]
    if tag == "v":
        return s if x[1] == j else x
    if tag == "l":
        return ("l", tree_subst(x[1], j + 1, tree_shift(s, 1)))
    if tag == "a":
        return ("a", tree_subst(x[1], j, s), tree_subst(x[2], j, s))
    return ("d", [(tree_subst(e, j, s), p) for e, p in x[1]])


def tree_beta(lam, arg):
    return tree_shift(tree_subst(lam[1], 1, tree_shift(arg, 1)), -1)


class TestSubstitute:
    def test_examples(self):
        assert substitute(ID, F) is F
        assert substitute(mk_lam(mk_app(mk_var(1), mk_var(1))), T) is mk_app(T, T)
        assert substitute(mk_lam(ID), T) is ID

    def test_errors(self):
        with pytest.raises(NonClosedArgument):
            substitute(ID, mk_var(1))
        with pytest.raises(NotAnAbstraction):
            substitute(T.body.body, T)

    def test_distribution_entries_remerge(self):
        body = mk_dist([(mk_var(1), 0.5), (T, 0.5)])
        assert substitute(mk_lam(body), T) is T

    def test_free_variables_above_the_binder_decrement(self):
        assert substitute(mk_lam(mk_app(mk_var(1), mk_var(3))), T) is mk_app(T, mk_var(2))

    @given(terms(1), closed_terms(3))
    def test_matches_naive_reference(self, body, arg):
        expected = from_tree(tree_beta(to_tree(mk_lam(body)), to_tree(arg)))
        assert substitute(mk_lam(body), arg) is expected

    @given(closed_terms(3), closed_terms(2))
    def test_closed_body_is_reused(self, c, arg):
        assert substitute(mk_lam(c), arg) is c

    @given(terms(1), closed_terms(2))
    def test_closed_subterms_keep_identity(self, body, arg):
        assume(isinstance(body, App))
        out = substitute(mk_lam(body), arg)
        if body.fn.level == 0:
            assert out.fn is body.fn
        if body.arg.level == 0:
            assert out.arg is body.arg


class TestShift:
    def test_examples(self):
        assert shift(ID, 1, 1) is ID
        assert shift(mk_var(2), -1, 1) is mk_var(1)
        assert shift(mk_lam(mk_var(2)), -1, 1) is mk_lam(mk_var(1))
        assert shift(mk_var(1), 5, 2) is mk_var(1)

    def test_underflow(self):
        with pytest.raises(IndexUnderflow):
            shift(mk_var(1), -1, 1)

    @given(terms(3), st.integers(0, 3), st.integers(1, 3))
    def test_matches_naive_reference(self, t, d, c):
        assert shift(t, d, c) is from_tree(tree_shift(to_tree(t), d, c))

    @given(terms(3), st.integers(1, 4))
    def test_inverse(self, t, d):
        assert shift(shift(t, d), -d) is t


class TestBeta:
    def test_examples(self):
        assert beta(mk_app(ID, T)) is T
        assert beta(mk_app(CORR, T)) is mk_apps(T, F, T)

    def test_guard(self):
        with pytest.raises(GuardViolation):
            beta(mk_app(CORR, D))
        assert beta(mk_app(CORR, D), improper=True) is mk_apps(D, F, D)

    def test_single_use_argument_passes(self):
        assert beta(mk_app(ID, D)) is D

    def test_unused_argument_passes(self):
        assert beta(mk_app(mk_lam(F), mk_app(ID, D))) is F

    def test_single_use_under_binder_is_refused(self):
        # the inner function may be called twice, so the argument would be sampled twice
        k = mk_lam(mk_lam(mk_var(2)))
        assert not beta_allowed(k, D)
        with pytest.raises(GuardViolation):
            beta(mk_app(k, D))

    def test_distribution_free_argument_passes(self):
        arg = mk_app(ID, T)
        assert beta(mk_app(CORR, arg)) is mk_apps(arg, F, arg)

    def test_not_a_redex(self):
        with pytest.raises(NotAnAbstraction):
            beta(mk_app(D, T))

    @given(terms(1), closed_terms(3))
    def test_guard_exactness(self, body, arg):
        fn = mk_lam(body)
        shared = count_occurrences(body) >= 2 or occurs_under_binder(body)
        if shared and not distribution_free(arg) and not isinstance(arg, Lam):
            with pytest.raises(GuardViolation):
                beta(mk_app(fn, arg))
        else:
            assert beta(mk_app(fn, arg)) is substitute(fn, arg)


class TestGamma:
    X = mk_lam(mk_app(mk_var(1), mk_var(1)))

    def test_gamma_l(self):
        out = gamma_l(mk_app(D, self.X))
        assert out is mk_dist([(mk_app(T, self.X), 0.6), (mk_app(F, self.X), 0.4)])
        assert len(gamma_l(mk_app(COIN, self.X)).entries) == 2
        fs = mk_dist([(ID, 0.5), (self.X, 0.5)])
        assert gamma_l(mk_app(fs, T)) is mk_dist([(mk_app(ID, T), 0.5), (mk_app(self.X, T), 0.5)])

    def test_gamma_r(self):
        out = gamma_r(mk_app(CORR, D))
        assert out is mk_dist([(mk_app(CORR, T), 0.6), (mk_app(CORR, F), 0.4)])
        assert gamma_r(mk_app(F, COIN)) is mk_dist([(mk_app(F, T), 0.5), (mk_app(F, F), 0.5)])

    def test_errors(self):
        with pytest.raises(NotGammaLRedex):
            gamma_l(mk_app(T, D))
        with pytest.raises(NotGammaRRedex):
            gamma_r(mk_app(D, T))

    def test_singleton_cannot_appear(self):
        assert mk_dist([(T, 1.0)]) is T

    @given(closed_terms(3), closed_terms(3))
    def test_mass_conservation(self, f, a):
        for rule, d, app in ((gamma_l, f, mk_app(f, a)), (gamma_r, a, mk_app(f, a))):
            if isinstance(d, Dist):
                out = rule(app)
                mass = out.mass if isinstance(out, Dist) else 1.0
                assert math.isclose(mass, d.mass, abs_tol=1e-12)


class TestEta:
    def test_examples(self):
        assert eta(mk_lam(mk_app(T, mk_var(1)))) is T
        assert eta(mk_lam(mk_app(mk_var(2), mk_var(1)))) is mk_var(1)

    def test_guard(self):
        with pytest.raises(GuardViolation):
            eta(mk_lam(mk_app(D, mk_var(1))))

    @pytest.mark.parametrize("t", [mk_lam(mk_app(mk_var(1), mk_var(1))), ID, T,
                                   mk_lam(mk_app(mk_var(1), mk_var(2)))])
    def test_not_a_redex(self, t):
        with pytest.raises(NotEtaRedex):
            eta(t)

    @given(closed_terms(3), st.sampled_from([T, F, ID]))
    def test_soundness(self, e, probe):
        assume(distribution_free(e))
        lam = mk_lam(mk_app(shift(e, 1), mk_var(1)))
        assert eta(lam) is e
        cfg = EvalConfig(fuel=300)
        before = peval(mk_app(lam, probe), cfg)
        after = peval(mk_app(e, probe), cfg)
        assume(before.unknown_mass == 0.0 and after.unknown_mass == 0.0)
        assert before.outcome == after.outcome


class TestPredicates:
    def test_distribution_free(self):
        assert distribution_free(T)
        assert not distribution_free(D)
        assert not distribution_free(mk_lam(D))

    def test_count_occurrences(self):
        assert count_occurrences(CORR.body, 1) == 2
        assert count_occurrences(F.body, 1) == 0
        assert count_occurrences(parse("(lam 2)"), 1) == 1

    def test_occurs_under_binder(self):
        assert occurs_under_binder(parse("(lam 2)"))
        assert not occurs_under_binder(CORR.body)
