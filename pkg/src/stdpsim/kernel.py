"""Fused per-image simulation loop.

The step-level operations in :mod:`stdpsim.neuron`, :mod:`stdpsim.topology`
and :mod:`stdpsim.learning` define the semantics; this module runs the same
arithmetic in one compiled loop over all timesteps of an image so a
desk-scale training run finishes in minutes.  ``tests/test_kernel.py``
checks the two paths against each other.

Per-timestep order:

1. excitatory conductance increment from this step's input spikes
2. inhibitory increment queued by the previous step
3. excitatory LIF integration, spike check, threshold adaptation
4. inhibition queued for the next step (lateral or via the inhibitory layer)
5. trace decay/set, then the plasticity rule (training only)
"""

from __future__ import annotations

import numpy as np
from numba import njit

RULE_PAIRWISE = 0
RULE_POST_ONLY = 1
RULE_BATCHED = 2

MODE_LATERAL = 0
MODE_LAYER = 1

# counter slots
C_INTEGRATION = 0
C_CONDUCTANCE = 1
C_TRACE = 2
C_WEIGHT_UPDATE = 3
N_COUNTERS = 4


@njit(cache=True, nogil=True)
def _lif_step(V, theta, ge, gi, refrac, inc_e, inc_i, de, di, dt_over_tau,
              E_rest, E_exc, E_inh, V_reset, V_th, theta_plus, dtheta,
              refrac_steps, adapt, spiked):
    n = V.shape[0]
    nspk = 0
    for j in range(n):
        ge[j] = ge[j] * de + inc_e[j]
        gi[j] = gi[j] * di + inc_i[j]
        if refrac[j] > 0:
            V[j] = V_reset
            refrac[j] -= 1
            spiked[j] = False
        else:
            v = V[j]
            V[j] = v + dt_over_tau * ((E_rest - v) + ge[j] * (E_exc - v) + gi[j] * (E_inh - v))
            if V[j] >= V_th + theta[j]:
                spiked[j] = True
                nspk += 1
                V[j] = V_reset
                refrac[j] = refrac_steps
                if adapt:
                    theta[j] += theta_plus
            else:
                spiked[j] = False
        if adapt:
            theta[j] *= dtheta
    return nspk


@njit(cache=True, nogil=True)
def _normalize_column(w, j, target, w_m):
    s = 0.0
    n_in = w.shape[0]
    for i in range(n_in):
        s += w[i, j]
    if s > 0.0:
        scale = target / s
        for i in range(n_in):
            v = w[i, j] * scale
            w[i, j] = w_m if v > w_m else v


@njit(cache=True, nogil=True)
def run_image(
    spikes_in,      # (T, n_in) bool
    w,              # (n_in, n_exc) float64, mutated when learning
    V, theta, ge, gi, refrac,           # excitatory state, mutated
    Vi, gei, gii, refrac_i,             # inhibitory-layer state (len 0 in lateral mode)
    pending_gi,                          # (n_exc,) inhibition queued for next step
    x_pre, x_post,                       # traces
    n_spikes, snapshot,                  # batched-rule scratch
    exc_p,          # float64[13] excitatory neuron/trace constants, see neuron.kernel_constants
    inh_p,          # float64[13] inhibitory neuron constants
    mode, lateral_strength, c_exc_inh, c_inh_exc, g_exc,
    learn, rule, eta_pre, eta_post, mu, w_m, t_step, n_spikes_th,
    norm_target, normalize, gate,
    counts_out,     # (n_exc,) int64 spike counts for this image, overwritten
    counters,       # int64[N_COUNTERS], accumulated
):
    T = spikes_in.shape[0]
    n_in = spikes_in.shape[1]
    n_exc = V.shape[0]
    n_inh = Vi.shape[0]

    de, di, dt_over_tau = exc_p[0], exc_p[1], exc_p[2]
    E_rest, E_exc, E_inh = exc_p[3], exc_p[4], exc_p[5]
    V_reset, V_th, theta_plus, dtheta = exc_p[6], exc_p[7], exc_p[8], exc_p[9]
    refrac_steps = np.int64(exc_p[10])
    dtrace = exc_p[11]

    inc_e = np.zeros(n_exc)
    inc_i = np.zeros(n_exc)
    spiked = np.zeros(n_exc, dtype=np.bool_)
    inh_inc_e = np.zeros(n_inh)
    inh_inc_i = np.zeros(n_inh)
    inh_spiked = np.zeros(n_inh, dtype=np.bool_)
    inh_theta = np.zeros(n_inh)
    pre_idx = np.zeros(n_in, dtype=np.int64)
    post_idx = np.zeros(n_exc, dtype=np.int64)
    weight_pow = mu != 1.0
    window_spike = False

    for j in range(n_exc):
        counts_out[j] = 0

    for t in range(T):
        # 1. feed-forward excitation
        for j in range(n_exc):
            inc_e[j] = 0.0
        npre = 0
        for i in range(n_in):
            if spikes_in[t, i]:
                pre_idx[npre] = i
                npre += 1
                for j in range(n_exc):
                    inc_e[j] += w[i, j]
        if g_exc != 1.0:
            for j in range(n_exc):
                inc_e[j] *= g_exc
        counters[C_CONDUCTANCE] += npre * n_exc

        # 2. inhibition queued last step
        for j in range(n_exc):
            inc_i[j] = pending_gi[j]
            pending_gi[j] = 0.0

        # 3. excitatory integration
        nspk = _lif_step(V, theta, ge, gi, refrac, inc_e, inc_i, de, di, dt_over_tau,
                         E_rest, E_exc, E_inh, V_reset, V_th, theta_plus, dtheta,
                         refrac_steps, learn, spiked)
        counters[C_INTEGRATION] += n_exc
        npost = 0
        for j in range(n_exc):
            if spiked[j]:
                counts_out[j] += 1
                post_idx[npost] = j
                npost += 1

        # 4. inhibition for the next step
        if mode == MODE_LATERAL:
            if nspk > 0:
                for j in range(n_exc):
                    others = nspk - 1 if spiked[j] else nspk
                    pending_gi[j] = lateral_strength * others
                counters[C_CONDUCTANCE] += nspk * (n_exc - 1)
        else:
            for j in range(n_inh):
                inh_inc_e[j] = c_exc_inh if spiked[j] else 0.0
                inh_inc_i[j] = 0.0
            counters[C_CONDUCTANCE] += nspk
            ninh = _lif_step(Vi, inh_theta, gei, gii, refrac_i, inh_inc_e, inh_inc_i,
                             inh_p[0], inh_p[1], inh_p[2], inh_p[3], inh_p[4], inh_p[5],
                             inh_p[6], inh_p[7], 0.0, 1.0, np.int64(inh_p[10]), False,
                             inh_spiked)
            counters[C_INTEGRATION] += n_inh
            if ninh > 0:
                for j in range(n_exc):
                    others = ninh - 1 if inh_spiked[j] else ninh
                    pending_gi[j] = c_inh_exc * others
                counters[C_CONDUCTANCE] += ninh * (n_exc - 1)

        if not learn:
            continue

        # 5a. traces
        for i in range(n_in):
            x_pre[i] *= dtrace
        for k in range(npre):
            x_pre[pre_idx[k]] = 1.0
        for j in range(n_exc):
            x_post[j] = 1.0 if spiked[j] else x_post[j] * dtrace
        counters[C_TRACE] += n_in + n_exc

        # 5b. plasticity
        if rule == RULE_BATCHED:
            for k in range(npost):
                j = post_idx[k]
                n_spikes[j] += 1
                for i in range(n_in):
                    snapshot[j, i] = x_pre[i]
            if npost > 0:
                window_spike = True
            if t % t_step == 0:
                best = 0
                for j in range(1, n_exc):
                    if n_spikes[j] > n_spikes[best]:
                        best = j
                max_n = n_spikes[best]
                if max_n > 0 and (window_spike or not gate):
                    kf = float((max_n + n_spikes_th - 1) // n_spikes_th)
                    step = kf * eta_post
                    for i in range(n_in):
                        v = w[i, best] + step * snapshot[best, i] * (w_m - w[i, best])
                        if v > w_m:
                            v = w_m
                        elif v < 0.0:
                            v = 0.0
                        w[i, best] = v
                    counters[C_WEIGHT_UPDATE] += n_in
                    if normalize:
                        _normalize_column(w, best, norm_target, w_m)
                window_spike = False
        else:
            if rule == RULE_PAIRWISE:
                for k in range(npre):
                    i = pre_idx[k]
                    for j in range(n_exc):
                        wij = w[i, j]
                        dep = wij ** mu if weight_pow else wij
                        v = wij - eta_pre * x_post[j] * dep
                        w[i, j] = 0.0 if v < 0.0 else (w_m if v > w_m else v)
                    counters[C_WEIGHT_UPDATE] += n_exc
            for k in range(npost):
                j = post_idx[k]
                for i in range(n_in):
                    wij = w[i, j]
                    room = w_m - wij
                    pot = room ** mu if weight_pow else room
                    v = wij + eta_post * x_pre[i] * pot
                    w[i, j] = 0.0 if v < 0.0 else (w_m if v > w_m else v)
                counters[C_WEIGHT_UPDATE] += n_in

    if learn and normalize and rule != RULE_BATCHED:
        for j in range(n_exc):
            _normalize_column(w, j, norm_target, w_m)
