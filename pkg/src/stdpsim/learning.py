"""Plasticity rules for the input -> excitatory weights.

Three rules share the trace machinery:

* ``PAIRWISE`` -- weight-dependent pair STDP: depression on every presynaptic
  spike, potentiation on every postsynaptic spike.
* ``POST_ONLY`` -- the potentiation branch alone.
* ``BATCHED`` -- postsynaptic spikes are counted per neuron over the image
  presentation and the presynaptic trace is recorded at each spike; every
  ``t_step`` steps only the neuron with the most spikes is potentiated, scaled
  by ``k = ceil(max_count / n_spikes_th)``.

Arithmetic is done in float64 and stored to the float32 weight matrix in the
same operation order as the compiled kernel, so both paths agree bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from stdpsim.errors import ConfigurationError, NumericalFault, StructuralError
from stdpsim.neuron import TraceState
from stdpsim.topology import SynapticMatrix


# Default column-sum target per input channel: a sum of 60 for 28x28 inputs.
# The often-quoted 0.1 per input (78.4) learned blurrier prototypes in one pass.
NORM_MEAN_WEIGHT = 60 / 784


class Rule(str, enum.Enum):
    PAIRWISE = "pairwise"
    POST_ONLY = "post_only"
    BATCHED = "batched"


@dataclass(frozen=True)
class StdpParams:
    rule: Rule = Rule.BATCHED
    eta_pre: float = 1e-4
    eta_post: float = 0.01
    mu: float = 0.2  # weight-dependence exponent of the pairwise and post-only rules
    w_m: float = 1.0
    t_step: int = 4
    n_spikes_th: int = 10
    normalize: bool = True
    norm_target: float | None = None  # None -> NORM_MEAN_WEIGHT * n_input * w_m
    # batched rule: skip a window's update unless some neuron spiked inside it
    gate_on_window_spike: bool = True

    def __post_init__(self):
        object.__setattr__(self, "rule", Rule(self.rule))
        if self.eta_pre < 0 or self.eta_post < 0:
            raise ConfigurationError("learning rates must be non-negative")
        if self.w_m <= 0:
            raise ConfigurationError("w_m must be positive")
        if not 0 < self.mu <= 1:
            raise ConfigurationError(f"mu must lie in (0, 1], got {self.mu}")
        if self.t_step < 1 or self.n_spikes_th < 1:
            raise ConfigurationError("t_step and n_spikes_th must be >= 1")
        if self.norm_target is not None and self.norm_target <= 0:
            raise ConfigurationError("norm_target must be positive")

    def resolved_norm_target(self, n_input: int) -> float:
        return self.norm_target if self.norm_target is not None else NORM_MEAN_WEIGHT * n_input * self.w_m


@dataclass
class LearningScratch:
    n_spikes: np.ndarray      # (n_exc,) int64, postsynaptic spikes since image onset
    x_pre_snapshot: np.ndarray  # (n_exc, n_input), presynaptic trace at each neuron's latest spike
    update_count: int = 0
    window_spike: bool = False

    @classmethod
    def zeros(cls, n_exc: int, n_input: int) -> "LearningScratch":
        return cls(np.zeros(n_exc, dtype=np.int64), np.zeros((n_exc, n_input)))

    def reset(self):
        """Image onset."""
        self.n_spikes[:] = 0
        self.window_spike = False


def _check_finite(w: np.ndarray):
    if not np.all(np.isfinite(w)):
        raise NumericalFault("synaptic weights became non-finite")


def _flags(x, n: int, name: str) -> np.ndarray:
    f = np.asarray(x, dtype=bool)
    if f.shape != (n,):
        raise StructuralError(f"{name} has shape {f.shape}, expected ({n},)")
    return f


def _potentiate(W: np.ndarray, x_pre: np.ndarray, post: np.ndarray, p: StdpParams) -> int:
    cols = np.flatnonzero(post)
    if cols.size == 0:
        return 0
    block = W[:, cols].astype(np.float64)
    room = p.w_m - block
    if p.mu != 1.0:
        room = room ** p.mu
    W[:, cols] = np.clip(block + (p.eta_post * x_pre)[:, None] * room, 0.0, p.w_m)
    return cols.size * W.shape[0]


def baseline_stdp_step(
    w: SynapticMatrix,
    traces: TraceState,
    pre_spikes: np.ndarray,
    post_spikes: np.ndarray,
    params: StdpParams,
) -> int:
    """Pair-wise weight-dependent STDP.  Mutates ``w`` and returns the number
    of synapse updates executed (one per synapse touched by a spike)."""
    W = w.w
    n_in, n_exc = W.shape
    pre = _flags(pre_spikes, n_in, "pre_spikes")
    post = _flags(post_spikes, n_exc, "post_spikes")

    count = 0
    rows = np.flatnonzero(pre)
    if rows.size:
        block = W[rows].astype(np.float64)
        dep = block ** params.mu if params.mu != 1.0 else block
        W[rows] = np.clip(block - (params.eta_pre * traces.x_post)[None, :] * dep, 0.0, params.w_m)
        count += rows.size * n_exc
    count += _potentiate(W, traces.x_pre, post, params)
    _check_finite(W)
    return count


def post_only_stdp_step(
    w: SynapticMatrix,
    traces: TraceState,
    post_spikes: np.ndarray,
    params: StdpParams,
) -> int:
    W = w.w
    post = _flags(post_spikes, W.shape[1], "post_spikes")
    count = _potentiate(W, traces.x_pre, post, params)
    _check_finite(W)
    return count


def accumulate_spikes(scratch: LearningScratch, traces: TraceState, post_spikes: np.ndarray) -> LearningScratch:
    """Count each neuron's spikes and record the presynaptic trace at its latest spike."""
    post = _flags(post_spikes, scratch.n_spikes.shape[0], "post_spikes")
    if post.any():
        scratch.n_spikes[post] += 1
        scratch.x_pre_snapshot[post] = traces.x_pre
        scratch.window_spike = True
    return scratch


def potentiation_factor(max_spikes: int, n_spikes_th: int) -> int:
    """``ceil(max_spikes / n_spikes_th)`` in integer arithmetic."""
    return -(-int(max_spikes) // int(n_spikes_th))


def winner(n_spikes: np.ndarray) -> int:
    """Index of the most active neuron; the lowest index wins ties."""
    return int(np.argmax(n_spikes))


def batched_update(w: SynapticMatrix, scratch: LearningScratch, params: StdpParams, t: int) -> int:
    """Potentiate the winning neuron's column if ``t`` closes an update window.

    Returns the number of synapse updates executed (``n_input`` or 0).
    """
    if t % params.t_step:
        return 0
    gate_open = scratch.window_spike or not params.gate_on_window_spike
    scratch.window_spike = False
    j = winner(scratch.n_spikes)
    max_n = int(scratch.n_spikes[j])
    if max_n == 0 or not gate_open:
        return 0

    W = w.w
    k = potentiation_factor(max_n, params.n_spikes_th)
    step = float(k) * params.eta_post
    col = W[:, j].astype(np.float64)
    W[:, j] = np.clip(col + (step * scratch.x_pre_snapshot[j]) * (params.w_m - col), 0.0, params.w_m)
    if params.normalize:
        normalize_columns(w, params.resolved_norm_target(W.shape[0]), columns=[j])
    _check_finite(W)
    scratch.update_count += W.shape[0]
    return W.shape[0]


def normalize_columns(w: SynapticMatrix, norm_target: float, columns=None) -> SynapticMatrix:
    """Scale each selected column to sum to ``norm_target``, then clip at ``w_m``.

    All-zero columns are left as they are.
    """
    if norm_target <= 0:
        raise ConfigurationError("norm_target must be positive")
    W = w.w
    cols = range(W.shape[1]) if columns is None else columns
    for j in cols:
        col = W[:, j].astype(np.float64)
        s = np.cumsum(col)[-1]  # sequential sum, same rounding as the kernel
        if s > 0.0:
            W[:, j] = np.minimum(col * (norm_target / s), w.w_m)
    return w
