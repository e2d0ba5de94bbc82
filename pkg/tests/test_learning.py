import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stdpsim.errors import ConfigurationError, NumericalFault
from stdpsim.learning import (
    LearningScratch, Rule, StdpParams, accumulate_spikes, baseline_stdp_step, batched_update,
    normalize_columns, post_only_stdp_step, potentiation_factor, winner,
)
from stdpsim.neuron import TraceState, update_traces
from stdpsim.topology import SynapticMatrix


def matrix(values):
    return SynapticMatrix(np.array(values, dtype=np.float32))


# --- pairwise / post-only -----------------------------------------------------

def test_depression_with_zero_post_trace_is_noop():
    w = matrix([[0.3, 0.6], [0.2, 0.1]])
    before = w.w.copy()
    tr = TraceState(np.zeros(2), np.zeros(2))
    baseline_stdp_step(w, tr, np.array([True, True]), np.array([False, False]), StdpParams(rule="pairwise"))
    assert np.array_equal(w.w, before)


def test_potentiation_unit_trace_from_zero():
    w = matrix([[0.0]])
    tr = TraceState(np.ones(1), np.zeros(1))
    n = baseline_stdp_step(w, tr, np.array([False]), np.array([True]), StdpParams(rule="pairwise", eta_post=0.01))
    assert w.w[0, 0] == pytest.approx(0.01)
    assert n == 1


def test_potentiation_weight_dependent_mu_half():
    w = matrix([[0.75]])
    tr = TraceState(np.array([0.5]), np.zeros(1))
    p = StdpParams(rule="pairwise", eta_post=0.01, mu=0.5)
    baseline_stdp_step(w, tr, np.array([False]), np.array([True]), p)
    # 0.01 * 0.5 * sqrt(0.25) = 0.0025
    assert w.w[0, 0] == pytest.approx(0.75 + 0.0025, rel=1e-6)


def test_depression_values():
    w = matrix([[0.5, 0.8]])
    tr = TraceState(np.zeros(1), np.array([1.0, 0.5]))
    p = StdpParams(rule="pairwise", eta_pre=0.1, mu=1.0)
    n = baseline_stdp_step(w, tr, np.array([True]), np.array([False, False]), p)
    assert w.w[0].tolist() == pytest.approx([0.5 - 0.05, 0.8 - 0.04], rel=1e-6)
    assert n == 2


def test_post_only_ignores_presynaptic_activity():
    w = matrix([[0.3, 0.6]])
    before = w.w.copy()
    tr = TraceState(np.ones(1), np.ones(2))
    post_only_stdp_step(w, tr, np.array([False, False]), StdpParams(rule="post_only"))
    assert np.array_equal(w.w, before)
    tr0 = TraceState(np.zeros(1), np.ones(2))
    post_only_stdp_step(w, tr0, np.array([True, True]), StdpParams(rule="post_only"))
    assert np.array_equal(w.w, before)


def test_post_only_single_term():
    w = matrix([[0.5]])
    post_only_stdp_step(w, TraceState(np.ones(1), np.zeros(1)), np.array([True]), StdpParams(eta_post=0.01, mu=1.0))
    assert w.w[0, 0] == pytest.approx(0.505, rel=1e-6)


def test_nonfinite_weights_fault():
    w = SynapticMatrix(np.array([[0.5]], dtype=np.float32))
    tr = TraceState(np.array([np.nan]), np.zeros(1))
    with pytest.raises(NumericalFault):
        post_only_stdp_step(w, tr, np.array([True]), StdpParams())


# --- batched rule ---------------------------------------------------------------

def test_potentiation_factor_ceiling():
    assert potentiation_factor(25, 10) == 3
    assert potentiation_factor(1, 10) == 1
    assert potentiation_factor(10, 10) == 1
    assert potentiation_factor(11, 10) == 2


@given(a=st.integers(1, 10_000), b=st.integers(1, 10_000), th=st.integers(1, 100))
def test_k_lower_bound_and_monotone(a, b, th):
    lo, hi = sorted((a, b))
    assert potentiation_factor(lo, th) >= 1
    assert potentiation_factor(lo, th) <= potentiation_factor(hi, th)
    assert potentiation_factor(lo, th) == math.ceil(lo / th)


def test_no_winner_no_update():
    w = matrix([[0.5, 0.5]])
    scratch = LearningScratch.zeros(2, 1)
    n = batched_update(w, scratch, StdpParams(gate_on_window_spike=False), 0)
    assert n == 0 and scratch.update_count == 0
    assert np.all(w.w == 0.5)


def test_batched_scalar_update():
    w = matrix([[0.9]])
    scratch = LearningScratch.zeros(1, 1)
    scratch.n_spikes[0] = 5
    scratch.x_pre_snapshot[0, 0] = 1.0
    scratch.window_spike = True
    batched_update(w, scratch, StdpParams(normalize=False), 4)
    assert w.w[0, 0] == pytest.approx(0.901, rel=1e-6)


def test_batched_only_on_window_boundaries_and_gate():
    w = matrix([[0.5]])
    scratch = LearningScratch.zeros(1, 1)
    scratch.n_spikes[0] = 3
    scratch.x_pre_snapshot[0, 0] = 1.0
    p = StdpParams(normalize=False)
    assert batched_update(w, scratch, p, 3) == 0
    assert batched_update(w, scratch, p, 4) == 0  # no spike in this window
    scratch.window_spike = True
    assert batched_update(w, scratch, p, 8) == 1
    assert not scratch.window_spike


def test_winner_tie_breaks_to_lowest_index():
    assert winner(np.array([2, 5, 5, 1])) == 1


def test_accumulate_latest_wins():
    scratch = LearningScratch.zeros(5, 3)
    tr = TraceState(np.array([0.1, 0.2, 0.3]), np.zeros(5))
    post = np.zeros(5, bool)
    post[4] = True
    accumulate_spikes(scratch, tr, post)
    tr.x_pre[:] = [0.7, 0.8, 0.9]
    accumulate_spikes(scratch, tr, post)
    assert scratch.n_spikes[4] == 2
    assert scratch.x_pre_snapshot[4].tolist() == [0.7, 0.8, 0.9]
    untouched = LearningScratch.zeros(5, 3)
    accumulate_spikes(untouched, tr, np.zeros(5, bool))
    assert not untouched.n_spikes.any() and not untouched.x_pre_snapshot.any()


def test_accumulate_records_distinct_rows():
    # replay oracle: remember the trace vector seen at each neuron's spike
    scratch = LearningScratch.zeros(3, 2)
    tr = TraceState.zeros(2, 3)
    seen = {}
    events = [(np.array([True, False]), np.array([False, True, False])),
              (np.array([False, True]), np.array([False, False, True]))]
    for pre, post in events:
        update_traces(tr, pre, post)
        accumulate_spikes(scratch, tr, post)
        for j in np.flatnonzero(post):
            seen[j] = tr.x_pre.copy()
    assert np.array_equal(scratch.x_pre_snapshot[1], seen[1])
    assert np.array_equal(scratch.x_pre_snapshot[2], seen[2])
    assert not np.array_equal(scratch.x_pre_snapshot[1], scratch.x_pre_snapshot[2])


def test_saturation_fixed_point():
    w = matrix([[1.0, 1.0]])
    scratch = LearningScratch.zeros(2, 1)
    scratch.n_spikes[1] = 40
    scratch.x_pre_snapshot[1, 0] = 1.0
    scratch.window_spike = True
    batched_update(w, scratch, StdpParams(normalize=False), 0)
    assert np.all(w.w == 1.0)


def test_alg1_micro_oracle_2x2_eight_steps():
    """Hand-simulated trace of the batched rule on 2 inputs x 2 neurons.

    d = exp(-1/20).  Steps t = 1..8, updates at t = 4 and t = 8, N_spikes_th = 2.
      t1 pre0                 x_pre = [1, 0]
      t2 post1                x_pre = [d, 0]       N = [0, 1]  snap1 = [d, 0]
      t3 pre1, post0          x_pre = [d^2, 1]     N = [1, 1]  snap0 = [d^2, 1]
      t4 post1                x_pre = [d^3, d]     N = [1, 2]  snap1 = [d^3, d]
         update: winner 1, k = ceil(2/2) = 1, w[:,1] += 0.01 * [d^3, d] * (1 - w[:,1])
      t5 post0                x_pre = [d^4, d^2]   N = [2, 2]  snap0 = [d^4, d^2]
      t6 post0                x_pre = [d^5, d^3]   N = [3, 2]  snap0 = [d^5, d^3]
      t7 pre0, post0          x_pre = [1, d^4]     N = [4, 2]  snap0 = [1, d^4]
      t8 -                    x_pre = [d, d^5]
         update: winner 0, k = ceil(4/2) = 2, w[:,0] += 0.02 * [1, d^4] * (1 - w[:,0])
    """
    d = math.exp(-1 / 20)
    w = matrix([[0.2, 0.5], [0.4, 0.9]])
    p = StdpParams(eta_post=0.01, n_spikes_th=2, t_step=4, normalize=False)
    tr = TraceState.zeros(2, 2, 20.0)
    scratch = LearningScratch.zeros(2, 2)
    script = {1: ([0], []), 2: ([], [1]), 3: ([1], [0]), 4: ([], [1]),
              5: ([], [0]), 6: ([], [0]), 7: ([0], [0]), 8: ([], [])}
    log = []
    for t in range(1, 9):
        pre, post = np.zeros(2, bool), np.zeros(2, bool)
        pre[script[t][0]] = True
        post[script[t][1]] = True
        update_traces(tr, pre, post)
        accumulate_spikes(scratch, tr, post)
        if t % p.t_step == 0:
            j, maxn = winner(scratch.n_spikes), int(scratch.n_spikes.max())
            log.append((t, j, maxn, potentiation_factor(maxn, p.n_spikes_th)))
        batched_update(w, scratch, p, t)

    assert scratch.n_spikes.tolist() == [4, 2]
    assert log == [(4, 1, 2, 1), (8, 0, 4, 2)]
    assert scratch.x_pre_snapshot[1] == pytest.approx([d ** 3, d])
    assert scratch.x_pre_snapshot[0] == pytest.approx([1.0, d ** 4])
    expected = np.array([
        [0.2 + 0.02 * 1.0 * 0.8, 0.5 + 0.01 * d ** 3 * 0.5],
        [0.4 + 0.02 * d ** 4 * 0.6, 0.9 + 0.01 * d * (1 - np.float32(0.9))],
    ])
    assert w.w == pytest.approx(expected, rel=1e-6)
    # delta-w values themselves
    assert w.w[0, 0] - np.float32(0.2) == pytest.approx(0.016, rel=1e-4)
    assert scratch.update_count == 4


# --- normalization ----------------------------------------------------------------

def test_normalize_fixed_point_and_scaling():
    w = matrix([[0.2, 0.4], [0.2, 0.4]])
    normalize_columns(w, 0.8)
    assert w.w[:, 0].tolist() == pytest.approx([0.4, 0.4])
    assert w.w[:, 1].tolist() == pytest.approx([0.4, 0.4])


def test_normalize_zero_column_left_alone():
    w = matrix([[0.0, 0.3], [0.0, 0.1]])
    normalize_columns(w, 1.0)
    assert np.all(w.w[:, 0] == 0)
    with pytest.raises(ConfigurationError):
        normalize_columns(w, 0.0)


@settings(max_examples=50, deadline=None)
@given(col=st.lists(st.floats(0.001, 1.0), min_size=2, max_size=50))
def test_normalize_hits_target(col):
    a = np.array(col, dtype=np.float32)
    target = 0.5 * len(col) * 0.1 + 0.01
    w = SynapticMatrix(a[:, None].copy())
    # oracle: scale in float64 with the builtin sum, no clipping triggered for small targets
    scaled = a.astype(np.float64) * (target / float(np.sum(a.astype(np.float64))))
    normalize_columns(w, target)
    if scaled.max() <= 1.0:
        assert float(np.sum(w.w[:, 0], dtype=np.float64)) == pytest.approx(target, rel=1e-6)
        assert np.allclose(w.w[:, 0], scaled, rtol=1e-6)
    assert w.w.max() <= 1.0


# --- invariants across rules ---------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rule=st.sampled_from(list(Rule)), mu=st.floats(0.1, 1.0))
def test_weights_stay_in_range(seed, rule, mu):
    rng = np.random.default_rng(seed)
    n_in, n_exc = 6, 4
    w = SynapticMatrix(rng.uniform(0, 1, (n_in, n_exc)).astype(np.float32))
    p = StdpParams(rule=rule, eta_pre=0.3, eta_post=0.5, mu=mu, n_spikes_th=1, t_step=2)
    tr = TraceState.zeros(n_in, n_exc)
    scratch = LearningScratch.zeros(n_exc, n_in)
    for t in range(30):
        pre = rng.random(n_in) < 0.4
        post = rng.random(n_exc) < 0.3
        update_traces(tr, pre, post)
        if rule is Rule.PAIRWISE:
            baseline_stdp_step(w, tr, pre, post, p)
        elif rule is Rule.POST_ONLY:
            post_only_stdp_step(w, tr, post, p)
        else:
            accumulate_spikes(scratch, tr, post)
            batched_update(w, scratch, p, t)
        assert w.w.min() >= 0 and w.w.max() <= 1.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_batched_never_decreases_before_normalization(seed):
    rng = np.random.default_rng(seed)
    w = SynapticMatrix(rng.uniform(0, 1, (5, 3)).astype(np.float32))
    scratch = LearningScratch.zeros(3, 5)
    scratch.n_spikes[:] = rng.integers(0, 30, 3)
    scratch.x_pre_snapshot[:] = rng.random((3, 5))
    scratch.window_spike = True
    before = w.w.copy()
    batched_update(w, scratch, StdpParams(normalize=False), 0)
    assert np.all(w.w >= before)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_update_count_ordering_on_identical_streams(seed):
    rng = np.random.default_rng(seed)
    n_in, n_exc, steps = 8, 4, 40
    pre = rng.random((steps, n_in)) < 0.3
    post = rng.random((steps, n_exc)) < 0.2
    counts = {}
    for rule in Rule:
        w = SynapticMatrix(np.full((n_in, n_exc), 0.5, dtype=np.float32))
        tr = TraceState.zeros(n_in, n_exc)
        sc = LearningScratch.zeros(n_exc, n_in)
        p = StdpParams(rule=rule)
        total = 0
        for t in range(steps):
            update_traces(tr, pre[t], post[t])
            if rule is Rule.PAIRWISE:
                total += baseline_stdp_step(w, tr, pre[t], post[t], p)
            elif rule is Rule.POST_ONLY:
                total += post_only_stdp_step(w, tr, post[t], p)
            else:
                accumulate_spikes(sc, tr, post[t])
                total += batched_update(w, sc, p, t)
        counts[rule] = total
    assert counts[Rule.BATCHED] <= counts[Rule.POST_ONLY] <= counts[Rule.PAIRWISE]


@pytest.mark.parametrize("kw", [dict(eta_pre=-1), dict(mu=0), dict(mu=1.5), dict(t_step=0),
                                dict(n_spikes_th=0), dict(w_m=0), dict(norm_target=-1)])
def test_invalid_stdp_params(kw):
    with pytest.raises(ConfigurationError):
        StdpParams(**kw)


def test_default_norm_target():
    assert StdpParams().resolved_norm_target(784) == 60.0
    assert StdpParams(norm_target=78.4).resolved_norm_target(784) == 78.4
