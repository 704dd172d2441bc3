import copy
import itertools
import math
import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from corpus import closed_terms, probabilities, terms
from slc.bn import FALSE as F, TRUE as T
from slc.syntax import show
from slc.terms import (App, Dist, EmptyDistribution, InvalidIndex, InvalidProbability,
                       Lam, TermStore, Var, default_store, fingerprint, level, mk_app,
                       mk_apps, mk_dist, mk_lam, mk_var)


def free_level(t, depth=0):
    """Independent level oracle: largest free index seen from outside ``t``."""
    if isinstance(t, Var):
        return max(t.index - depth, 0)
    if isinstance(t, Lam):
        return free_level(t.body, depth + 1)
    if isinstance(t, App):
        return max(free_level(t.fn, depth), free_level(t.arg, depth))
    return max(free_level(e, depth) for e, _ in t.entries)


def structure(t):
    """Plain nested tuples, used as a structural-equality oracle."""
    if isinstance(t, Var):
        return ("v", t.index)
    if isinstance(t, Lam):
        return ("l", structure(t.body))
    if isinstance(t, App):
        return ("a", structure(t.fn), structure(t.arg))
    return ("d", frozenset((structure(e), p) for e, p in t.entries))


class TestConstructors:
    def test_var(self):
        assert mk_var(1).level == 1
        assert mk_var(2).level == 2
        assert mk_var(1) is mk_var(1)

    @pytest.mark.parametrize("bad", [0, -1, 1.0, True, "1"])
    def test_bad_index(self, bad):
        with pytest.raises(InvalidIndex):
            mk_var(bad)

    def test_lam(self):
        assert mk_lam(mk_var(1)).level == 0
        assert mk_lam(mk_lam(mk_var(2))) is T
        assert level(mk_lam(mk_var(3))) == 2

    def test_app(self):
        assert mk_app(mk_lam(mk_var(1)), T).level == 0
        assert mk_app(mk_var(2), mk_var(1)).level == 2
        s = mk_lam(mk_lam(mk_lam(mk_app(mk_app(mk_var(3), mk_var(1)),
                                        mk_app(mk_var(2), mk_var(1))))))
        assert s.level == 0

    def test_mk_apps_is_left_associated(self):
        assert mk_apps(mk_var(1), mk_var(2), mk_var(3)) is mk_app(mk_app(mk_var(1), mk_var(2)), mk_var(3))
        assert mk_apps(T) is T

    def test_levels(self):
        assert level(mk_lam(mk_var(1))) == 0
        assert level(mk_lam(mk_var(3))) == 2
        assert level(mk_dist([(mk_var(2), 0.5), (mk_lam(mk_var(1)), 0.5)])) == 2

    def test_terms_are_not_copied(self):
        t = mk_app(T, F)
        assert copy.copy(t) is t
        assert copy.deepcopy([t])[0] is t


class TestMkDist:
    def test_flattening(self):
        d = mk_dist([(T, 0.5), (mk_dist([(T, 0.6), (F, 0.4)]), 0.5)])
        assert isinstance(d, Dist)
        probs = dict(d.entries)
        assert set(probs) == {T, F}
        assert abs(probs[T] - 0.8) <= 1e-12
        assert abs(probs[F] - 0.2) <= 1e-12

    def test_merge_then_collapse(self):
        assert mk_dist([(T, 0.3), (T, 0.7)]) is T

    def test_two_entries(self):
        d = mk_dist([(T, 0.6), (F, 0.4)])
        assert isinstance(d, Dist) and d.level == 0 and len(d.entries) == 2

    def test_order_independent(self):
        assert mk_dist([(T, 0.6), (F, 0.4)]) is mk_dist([(F, 0.4), (T, 0.6)])

    def test_sub_distribution_allowed(self):
        d = mk_dist([(T, 0.25)])
        assert isinstance(d, Dist) and d.mass == 0.25

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.5, math.nan, math.inf])
    def test_bad_probability(self, p):
        with pytest.raises(InvalidProbability):
            mk_dist([(T, p)])

    def test_empty(self):
        with pytest.raises(EmptyDistribution):
            mk_dist([])

    @given(st.lists(st.tuples(closed_terms(3), probabilities), min_size=1, max_size=5))
    def test_canonical_form(self, raw):
        scale = sum(p for _, p in raw)
        raw = [(t, p / scale) for t, p in raw]
        d = mk_dist(raw)
        entries = d.entries if isinstance(d, Dist) else ((d, 1.0),)
        assert not any(isinstance(e, Dist) for e, _ in entries)
        assert len({e for e, _ in entries}) == len(entries)
        assert abs(math.fsum(p for _, p in entries) - 1.0) <= 1e-9


class TestInterning:
    @given(terms(2), terms(2))
    def test_identity_iff_structure(self, a, b):
        assert (a is b) == (structure(a) == structure(b))

    @given(terms(3))
    def test_level_oracle(self, t):
        assert t.level == free_level(t)

    @given(terms(2))
    def test_rebuild_gives_same_term(self, t):
        def rebuild(e):
            if isinstance(e, Var):
                return mk_var(e.index)
            if isinstance(e, Lam):
                return mk_lam(rebuild(e.body))
            if isinstance(e, App):
                return mk_app(rebuild(e.fn), rebuild(e.arg))
            return mk_dist([(rebuild(x), p) for x, p in reversed(e.entries)])
        assert rebuild(t) is t

    def test_concurrent_interning(self):
        store = TermStore(seed=3)
        results = [None] * 8

        def work(i):
            t = store.var(1)
            for k in range(200):
                t = store.app(store.lam(t), store.var(k % 5 + 1))
            results[i] = t

        threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        assert all(r is results[0] for r in results)


class TestFingerprint:
    def test_deterministic(self):
        t = mk_app(T, F)
        assert fingerprint(t) == fingerprint(t) < 1 << 128

    def test_dist_order_independent(self):
        a = mk_lam(mk_var(1))
        entries = [(T, 0.2), (F, 0.3), (a, 0.5)]
        fps = {fingerprint(mk_dist(list(p))) for p in itertools.permutations(entries)}
        assert len(fps) == 1

    def test_dist_is_xor_of_entries(self):
        store = default_store()
        d = mk_dist([(T, 0.6), (F, 0.4)])
        assert d.fp == store.entry_fingerprint(T, 0.6) ^ store.entry_fingerprint(F, 0.4)

    def test_seed_changes_fingerprints(self):
        a, b = TermStore(seed=1), TermStore(seed=2)
        assert a.var(1).fp != b.var(1).fp
        assert a.var(1).fp == TermStore(seed=1).var(1).fp

    @settings(max_examples=200)
    @given(terms(1), terms(1))
    def test_consistent_with_structure(self, a, b):
        assert (a.fp == b.fp) == (a is b)

    def test_no_collisions_on_corpus(self):
        rng = random.Random(5)
        pool = [mk_var(1), mk_var(2), T, F]
        while len(pool) < 20_000:
            kind = rng.random()
            if kind < 0.3:
                pool.append(mk_lam(rng.choice(pool)))
            elif kind < 0.8:
                pool.append(mk_app(rng.choice(pool), rng.choice(pool)))
            else:
                p = rng.randint(1, 99) / 100
                pool.append(mk_dist([(rng.choice(pool), p), (rng.choice(pool), 1 - p)]))
        distinct = set(pool)
        assert len({t.fp for t in distinct}) == len(distinct)
        assert len({show(t) for t in distinct}) == len(distinct)
