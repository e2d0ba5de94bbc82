"""Presenting images to a network: the compiled fast path and a step-by-step
reference path built from the public operations."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from stdpsim import kernel
from stdpsim.errors import NumericalFault, StructuralError
from stdpsim.learning import (
    LearningScratch, Rule, StdpParams, accumulate_spikes, baseline_stdp_step,
    batched_update, normalize_columns, post_only_stdp_step,
)
from stdpsim.neuron import TraceState, integrate_timestep, update_traces
from stdpsim.topology import InhibitionMode, Network, inhibitory_layer_step, propagate_inhibition

PHASE_TRAIN, PHASE_ASSIGN, PHASE_TEST = 0, 1, 2

_RULE_CODES = {Rule.PAIRWISE: kernel.RULE_PAIRWISE, Rule.POST_ONLY: kernel.RULE_POST_ONLY,
               Rule.BATCHED: kernel.RULE_BATCHED}


@dataclass
class RunCounters:
    """Operation tallies feeding the energy proxy."""

    integration_steps: int = 0
    conductance_accumulations: int = 0
    trace_updates: int = 0
    weight_update_events: int = 0

    @classmethod
    def from_array(cls, a) -> "RunCounters":
        return cls(*(int(v) for v in a[:kernel.N_COUNTERS]))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=np.int64)

    def __add__(self, other: "RunCounters") -> "RunCounters":
        return RunCounters.from_array(self.as_array() + other.as_array())


class Presenter:
    """Reusable scratch buffers for presenting images to one network."""

    def __init__(self, network: Network, stdp: StdpParams | None = None):
        self.network = network
        self.stdp = stdp or StdpParams()
        cfg = network.config
        n_in, n_exc = cfg.n_input, cfg.n_exc
        self.traces = TraceState.zeros(n_in, n_exc, network.exc_params.tau_trace)
        self.scratch = LearningScratch.zeros(n_exc, n_in)
        self.counts = np.zeros(n_exc, dtype=np.int64)
        self._counters = np.zeros(kernel.N_COUNTERS, dtype=np.int64)
        self._empty_f = np.zeros(0)
        self._empty_i = np.zeros(0, dtype=np.int64)

    @property
    def counters(self) -> RunCounters:
        return RunCounters.from_array(self._counters)

    def present(self, spikes: np.ndarray, learn: bool) -> np.ndarray:
        """Run one image through the compiled kernel; returns per-neuron spike counts."""
        net = self.network
        if spikes.shape[1] != net.config.n_input:
            raise StructuralError(f"spike train has {spikes.shape[1]} channels, network expects {net.config.n_input}")
        net.reset_presentation()
        self.traces.reset()
        self.scratch.reset()
        p = self.stdp
        layer = net.inhibition.mode is InhibitionMode.LAYER
        inh = net.inh
        kernel.run_image(
            np.ascontiguousarray(spikes, dtype=np.bool_), net.weights.w,
            net.exc.V, net.exc.theta, net.exc.g_e, net.exc.g_i, net.exc.refrac_left,
            inh.V if layer else self._empty_f, inh.g_e if layer else self._empty_f,
            inh.g_i if layer else self._empty_f, inh.refrac_left if layer else self._empty_i,
            net.pending_inh, self.traces.x_pre, self.traces.x_post,
            self.scratch.n_spikes, self.scratch.x_pre_snapshot,
            net.exc_params.kernel_constants(),
            (net.inh_params.kernel_constants() if layer else net.exc_params.kernel_constants()),
            kernel.MODE_LAYER if layer else kernel.MODE_LATERAL,
            float(net.inhibition.lateral_strength), float(net.inhibition.exc_inh_strength),
            float(net.inhibition.inh_exc_strength), float(net.config.g_exc_strength),
            bool(learn), _RULE_CODES[p.rule], float(p.eta_pre), float(p.eta_post), float(p.mu),
            float(p.w_m), int(p.t_step), int(p.n_spikes_th),
            float(p.resolved_norm_target(net.config.n_input)), bool(p.normalize),
            bool(p.gate_on_window_spike), self.counts, self._counters,
        )
        if not (np.all(np.isfinite(net.exc.V)) and np.all(np.isfinite(net.weights.w))):
            raise NumericalFault("non-finite membrane potential or weight after presentation")
        return self.counts.copy()


def present_stepwise(network: Network, spikes: np.ndarray, stdp: StdpParams, learn: bool,
                     counters: RunCounters | None = None) -> np.ndarray:
    """Reference implementation of one presentation, one timestep at a time.

    Slow; exists so the compiled kernel can be checked against a composition
    of the documented per-step operations.
    """
    net = network
    cfg = net.config
    n_in, n_exc = cfg.n_input, cfg.n_exc
    ctr = counters if counters is not None else RunCounters()
    net.reset_presentation()
    traces = TraceState.zeros(n_in, n_exc, net.exc_params.tau_trace)
    scratch = LearningScratch.zeros(n_exc, n_in)
    counts = np.zeros(n_exc, dtype=np.int64)
    W = net.weights.w
    layer = net.inhibition.mode is InhibitionMode.LAYER

    for t in range(spikes.shape[0]):
        pre = spikes[t]
        rows = np.flatnonzero(pre)
        if rows.size:
            inc_e = np.cumsum(W[rows].astype(np.float64), axis=0)[-1]  # sequential, like the kernel
        else:
            inc_e = np.zeros(n_exc)
        if cfg.g_exc_strength != 1.0:
            inc_e = inc_e * cfg.g_exc_strength
        ctr.conductance_accumulations += rows.size * n_exc
        inc_i = net.pending_inh.copy()

        post = integrate_timestep(net.exc, net.exc_params, inc_e, inc_i, adapt=learn)
        ctr.integration_steps += n_exc
        counts += post
        nspk = int(post.sum())

        net.pending_inh[:] = 0.0
        if layer:
            ctr.conductance_accumulations += nspk
            inh_spikes = inhibitory_layer_step(net.inhibition, post, net.inh, net.inh_params)
            ctr.integration_steps += n_exc
            ninh = int(inh_spikes.sum())
            if ninh:
                net.pending_inh[:] = net.inhibition.inh_exc_strength * (ninh - inh_spikes)
                ctr.conductance_accumulations += ninh * (n_exc - 1)
        elif nspk:
            net.pending_inh[:] = propagate_inhibition(net.inhibition, post)
            ctr.conductance_accumulations += nspk * (n_exc - 1)

        if not learn:
            continue
        update_traces(traces, pre, post, net.exc_params.dt)
        ctr.trace_updates += n_in + n_exc
        if stdp.rule is Rule.BATCHED:
            accumulate_spikes(scratch, traces, post)
            ctr.weight_update_events += batched_update(net.weights, scratch, stdp, t)
        elif stdp.rule is Rule.PAIRWISE:
            ctr.weight_update_events += baseline_stdp_step(net.weights, traces, pre, post, stdp)
        else:
            ctr.weight_update_events += post_only_stdp_step(net.weights, traces, post, stdp)

    if learn and stdp.normalize and stdp.rule is not Rule.BATCHED:
        normalize_columns(net.weights, stdp.resolved_norm_target(n_in))
    return counts
