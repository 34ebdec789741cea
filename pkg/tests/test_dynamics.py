import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catmix.dynamics import (STREAM_AUX, STREAM_MAIN, CensoringScheme, Direction,
                             SweepRandomness, Trajectory, at_step, censored_sweep,
                             coupled_sweep, coupled_sweep_batch, edge_order, monotone_sweep,
                             run_batch, single_directional_sweep, steps_to_sweeps, sweep,
                             sweep_batch, sweep_bits, sweeps_to_steps)
from catmix.permcore import Permutation, order_leq

LTR, RTL = Direction.LEFT_TO_RIGHT, Direction.RIGHT_TO_LEFT


@st.composite
def state_and_randomness(draw, n_min=2, n_max=8):
    n = draw(st.integers(n_min, n_max))
    p = Permutation(tuple(draw(st.permutations(range(1, n + 1)))))
    d = draw(st.sampled_from(list(Direction)))
    bits = tuple(draw(st.lists(st.integers(0, 1), min_size=n - 1, max_size=n - 1)))
    return p, SweepRandomness(d, bits)


def test_edge_order():
    assert list(edge_order(5, LTR)) == [1, 2, 3, 4]
    assert list(edge_order(5, RTL)) == [4, 3, 2, 1]


class TestSweep:
    def test_forced_swap(self):
        assert sweep(Permutation.identity(2), SweepRandomness(LTR, (1,))) == Permutation((2, 1))

    def test_no_swap(self):
        assert sweep(Permutation.identity(2), SweepRandomness(LTR, (0,))) == Permutation.identity(2)

    def test_card_carried_along(self):
        assert sweep(Permutation.identity(3), SweepRandomness(LTR, (1, 1))) == Permutation((2, 3, 1))

    def test_right_to_left(self):
        assert sweep(Permutation.identity(3), SweepRandomness(RTL, (1, 1))) == Permutation((3, 1, 2))

    def test_wrong_bit_count(self):
        with pytest.raises(ValueError):
            sweep(Permutation.identity(3), SweepRandomness(LTR, (1,)))

    def test_single_directional(self):
        assert single_directional_sweep(Permutation.identity(2), [1]) == Permutation((2, 1))

    @given(state_and_randomness())
    def test_batch_matches_scalar(self, case):
        p, r = case
        deck = p.to_array()[None, :].astype(np.int16)
        bits = np.array([[int(r.direction), *r.bits]], dtype=np.uint8)
        for rule, scalar in (("plain", sweep), ("monotone", monotone_sweep)):
            out = sweep_batch(deck.copy(), bits, rule)
            assert tuple(out[0]) == scalar(p, r).mapping


class TestMonotone:
    def test_zero_bit_sorts_descending(self):
        assert monotone_sweep(Permutation.identity(2), SweepRandomness(LTR, (0,))) == Permutation((2, 1))

    def test_one_bit_keeps_ascending(self):
        assert monotone_sweep(Permutation.identity(2), SweepRandomness(LTR, (1,))) == Permutation.identity(2)

    def test_preserves_order_exhaustively_n3(self):
        ps = [Permutation.from_rank(3, r) for r in range(6)]
        outcomes = [SweepRandomness(d, (a, b)) for d in Direction for a in (0, 1) for b in (0, 1)]
        for lo in ps:
            for hi in ps:
                if order_leq(lo, hi):
                    for r in outcomes:
                        assert order_leq(monotone_sweep(lo, r), monotone_sweep(hi, r))


class TestCensoring:
    def test_everything_censored_is_identity(self):
        p = Permutation((3, 1, 2, 4))
        r = SweepRandomness(LTR, (0, 1, 0))
        assert censored_sweep(p, r, CensoringScheme.everything(4), 0) == p

    @given(state_and_randomness())
    def test_nothing_censored_is_monotone(self, case):
        p, r = case
        assert censored_sweep(p, r, CensoringScheme.none(), 3) == monotone_sweep(p, r)

    def test_three_phase_scaled(self):
        s = CensoringScheme.three_phase(0.3, 5, 50)
        assert s.windows == ((0, 4), (46, 50))
        assert s.edges == {1, 3}
        assert s.censored_edges(3) == {1, 3} and s.censored_edges(4) == frozenset()
        assert s.censored_edges(50) == frozenset()

    def test_parse(self):
        s = CensoringScheme.parse("three-phase:eta=0.1", 64)
        assert s.params["K"] == 10 and s.params["eta"] == 0.1
        assert s == CensoringScheme.three_phase(0.1, 64)
        e = CensoringScheme.parse("edges=2,4;windows=0-10,20-", 6)
        assert e.edges == {2, 4} and e.windows == ((0, 10), (20, None))
        assert e.is_censored(25, 2) and not e.is_censored(15, 2)
        assert CensoringScheme.parse("none", 5) == CensoringScheme.none()

    @pytest.mark.parametrize("text", ["bogus", "three-phase:", "edges=1;windows=x-y",
                                      "three-phase:eta=0.1,foo=2", "edges=9;windows=0-1"])
    def test_parse_rejects(self, text):
        with pytest.raises(ValueError):
            CensoringScheme.parse(text, 6)


class TestCoupling:
    @given(state_and_randomness(), st.lists(st.integers(0, 1), min_size=7, max_size=7))
    def test_identical_inputs_stay_identical(self, case, aux):
        p, r = case
        a, b = coupled_sweep(p, p, r, tuple(aux[:p.n - 1]))
        assert a == b == sweep(p, r)

    @given(state_and_randomness(n_min=3), st.data())
    def test_each_marginal_is_a_sweep(self, case, data):
        p, r = case
        q = Permutation(tuple(data.draw(st.permutations(range(1, p.n + 1)))))
        aux = tuple(data.draw(st.lists(st.integers(0, 1), min_size=p.n - 1, max_size=p.n - 1)))
        a, b = coupled_sweep(p, q, r, aux)
        assert sorted(a.mapping) == sorted(b.mapping) == list(range(1, p.n + 1))

    def test_matched_cards_stay_matched(self):
        n, trials = 16, 1000
        rng = np.random.default_rng(1)
        a = np.array([rng.permutation(n) + 1 for _ in range(trials)], dtype=np.int16)
        b = np.array([rng.permutation(n) + 1 for _ in range(trials)], dtype=np.int16)
        ids = np.arange(trials)
        matched = np.zeros((trials, n + 1), dtype=bool)
        violations = 0
        for i in range(200):
            coupled_sweep_batch(a, b, sweep_bits(4, ids, i, n), sweep_bits(4, ids, i, n, STREAM_AUX))
            now = np.zeros_like(matched)
            pos_a = np.argsort(a, axis=1)
            pos_b = np.argsort(b, axis=1)
            now[:, 1:] = pos_a == pos_b
            violations += int((matched & ~now).sum())
            matched = now
        assert violations == 0

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(2)
        n = 7
        for _ in range(200):
            p, q = Permutation.random(n, rng), Permutation.random(n, rng)
            bits = sweep_bits(9, [0], int(rng.integers(1000)), n)
            aux = sweep_bits(9, [0], int(rng.integers(1000)), n, STREAM_AUX)
            r = SweepRandomness(Direction(int(bits[0, 0])), tuple(int(v) for v in bits[0, 1:]))
            a, b = coupled_sweep(p, q, r, tuple(int(v) for v in aux[0, 1:]))
            A, B = p.to_array()[None].astype(np.int16), q.to_array()[None].astype(np.int16)
            coupled_sweep_batch(A, B, bits, aux)
            assert tuple(A[0]) == a.mapping and tuple(B[0]) == b.mapping

    def test_mismatched_sizes(self):
        with pytest.raises(ValueError):
            coupled_sweep(Permutation.identity(3), Permutation.identity(4),
                          SweepRandomness(LTR, (0, 0)), (0, 0))


def test_at_step_swaps_half_the_time():
    rng = np.random.default_rng(0)
    moved = sum(at_step(Permutation.identity(2), rng) != Permutation.identity(2)
                for _ in range(4000))
    assert abs(moved / 4000 - 0.5) < 3 * 0.5 / np.sqrt(4000)


def test_time_units():
    assert sweeps_to_steps(3, 10) == 27
    assert steps_to_sweeps(27, 10) == 3


class TestCounterRng:
    def test_deterministic_and_stream_separated(self):
        a = sweep_bits(7, np.arange(5), 3, 10)
        assert (a == sweep_bits(7, np.arange(5), 3, 10)).all()
        assert not (a == sweep_bits(7, np.arange(5), 3, 10, STREAM_AUX)).all()
        assert a.shape == (5, 10) and set(np.unique(a)) <= {0, 1}

    def test_chunking_does_not_change_trials(self):
        whole = sweep_bits(1, np.arange(10), 0, 6)
        assert (whole[4:] == sweep_bits(1, np.arange(4, 10), 0, 6)).all()

    def test_bits_are_fair(self):
        bits = sweep_bits(11, np.arange(20000), 0, 9, STREAM_MAIN)
        assert np.abs(bits.mean(axis=0) - 0.5).max() < 0.02

    def test_thread_safety(self):
        results = {}

        def work(k):
            decks, _ = run_batch(np.arange(1, 9), 20, 5, trials=np.arange(50))
            results[k] = decks

        threads = [threading.Thread(target=work, args=(k,)) for k in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all((results[k] == results[0]).all() for k in results)


def test_trajectory_round_trip():
    tr = Trajectory.simulate(Permutation.identity(5), 4, seed=3, trial=2)
    assert len(tr.states) == 5 and tr.states[0] == Permutation.identity(5)
    decks, _ = run_batch(np.arange(1, 6), 4, 3, trials=[2])
    assert tr.states[-1].mapping == tuple(decks[0])
    lines = tr.to_jsonl().splitlines()
    assert len(lines) == 5
