"""Conductance-based LIF neurons with adaptive thresholds, plus synaptic traces.

Membrane dynamics follow

    tau_v dV/dt = (E_rest - V) + g_e (E_exc - V) + g_i (E_inh - V)

integrated with one explicit Euler step per ``dt``.  Conductances and traces
decay by precomputed factors ``exp(-dt / tau)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from stdpsim.errors import ConfigurationError, NumericalFault, StructuralError


@dataclass(frozen=True)
class NeuronParams:
    """LIF constants.  Times in ms, potentials in mV."""

    tau_v: float = 100.0
    E_rest: float = -65.0
    E_exc: float = 0.0
    E_inh: float = -100.0
    V_reset: float = -60.0
    V_th: float = -52.0
    theta_plus: float = 0.01
    tau_theta: float = 1e7
    t_refrac: float = 5.0
    tau_ge: float = 1.0
    tau_gi: float = 2.0
    tau_trace: float = 20.0
    dt: float = 1.0

    def __post_init__(self):
        for name in ("tau_v", "tau_ge", "tau_gi", "tau_theta", "tau_trace", "dt"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.E_inh < self.E_rest < self.E_exc:
            raise ConfigurationError("need E_inh < E_rest < E_exc")
        if not self.V_reset < self.V_th:
            raise ConfigurationError("need V_reset < V_th")
        if self.theta_plus < 0 or self.t_refrac < 0:
            raise ConfigurationError("theta_plus and t_refrac must be non-negative")

    @property
    def decay_ge(self) -> float:
        return math.exp(-self.dt / self.tau_ge)

    @property
    def decay_gi(self) -> float:
        return math.exp(-self.dt / self.tau_gi)

    @property
    def decay_theta(self) -> float:
        return math.exp(-self.dt / self.tau_theta)

    @property
    def decay_trace(self) -> float:
        return math.exp(-self.dt / self.tau_trace)

    @property
    def refrac_steps(self) -> int:
        # round() first so 5.0/1.0 can't become 5.000000001 -> 6
        return int(math.ceil(round(self.t_refrac / self.dt, 9)))

    def kernel_constants(self) -> np.ndarray:
        """Flat constant vector in the slot order ``kernel.run_image`` reads."""
        return np.array([
            self.decay_ge, self.decay_gi, self.dt / self.tau_v,
            self.E_rest, self.E_exc, self.E_inh,
            self.V_reset, self.V_th, self.theta_plus, self.decay_theta,
            float(self.refrac_steps), self.decay_trace, self.dt,
        ])


# Inhibitory-layer neurons of the three-layer baseline: fast, non-adaptive.
INHIBITORY_PARAMS = NeuronParams(
    tau_v=10.0, E_rest=-60.0, V_reset=-45.0, V_th=-40.0, theta_plus=0.0, t_refrac=2.0,
)


@dataclass
class NeuronState:
    V: np.ndarray
    theta: np.ndarray
    g_e: np.ndarray
    g_i: np.ndarray
    refrac_left: np.ndarray

    @classmethod
    def at_rest(cls, n: int, params: NeuronParams) -> "NeuronState":
        return cls(
            V=np.full(n, params.E_rest, dtype=np.float64),
            theta=np.zeros(n, dtype=np.float64),
            g_e=np.zeros(n, dtype=np.float64),
            g_i=np.zeros(n, dtype=np.float64),
            refrac_left=np.zeros(n, dtype=np.int64),
        )

    @property
    def n(self) -> int:
        return self.V.shape[0]

    def copy(self) -> "NeuronState":
        return NeuronState(self.V.copy(), self.theta.copy(), self.g_e.copy(),
                           self.g_i.copy(), self.refrac_left.copy())

    def check_consistent(self):
        n = self.V.shape
        for name in ("theta", "g_e", "g_i", "refrac_left"):
            if getattr(self, name).shape != n:
                raise StructuralError(f"NeuronState.{name} has shape {getattr(self, name).shape}, V has {n}")


@dataclass
class TraceState:
    x_pre: np.ndarray
    x_post: np.ndarray
    tau_trace: float = 20.0

    @classmethod
    def zeros(cls, n_input: int, n_exc: int, tau_trace: float = 20.0) -> "TraceState":
        return cls(np.zeros(n_input), np.zeros(n_exc), tau_trace)

    def reset(self):
        self.x_pre[:] = 0.0
        self.x_post[:] = 0.0


def _as_increment(x, n: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(x, dtype=np.float64), (n,)) if np.ndim(x) == 0 else np.asarray(x, dtype=np.float64)
    if arr.shape != (n,):
        raise StructuralError(f"{name} has shape {arr.shape}, expected ({n},)")
    if np.any(arr < 0):
        raise ConfigurationError(f"{name} must be non-negative")
    return arr


def integrate_timestep(
    state: NeuronState,
    params: NeuronParams,
    incoming_exc: np.ndarray | float = 0.0,
    incoming_inh: np.ndarray | float = 0.0,
    adapt: bool = True,
) -> np.ndarray:
    """Advance ``state`` in place by one ``dt`` and return boolean spike flags.

    ``adapt=False`` freezes theta (no increment, no decay), which is how
    inference runs.
    """
    state.check_consistent()
    n = state.n
    inc_e = _as_increment(incoming_exc, n, "incoming_exc")
    inc_i = _as_increment(incoming_inh, n, "incoming_inh")

    state.g_e[:] = state.g_e * params.decay_ge + inc_e
    state.g_i[:] = state.g_i * params.decay_gi + inc_i

    refractory = state.refrac_left > 0
    V = state.V
    drive = (params.E_rest - V) + state.g_e * (params.E_exc - V) + state.g_i * (params.E_inh - V)
    V_new = np.where(refractory, params.V_reset, V + (params.dt / params.tau_v) * drive)
    if not np.all(np.isfinite(V_new)):
        raise NumericalFault("membrane potential became non-finite")

    spikes = ~refractory & (V_new >= params.V_th + state.theta)
    state.refrac_left[refractory] -= 1
    V_new[spikes] = params.V_reset
    state.V[:] = V_new
    state.refrac_left[spikes] = params.refrac_steps
    if adapt:
        state.theta[spikes] += params.theta_plus
        state.theta *= params.decay_theta
    return spikes


def update_traces(traces: TraceState, pre_spikes: np.ndarray, post_spikes: np.ndarray, dt: float = 1.0) -> TraceState:
    """Decay both traces by ``exp(-dt/tau_trace)``, then set spiking channels to 1."""
    pre = np.asarray(pre_spikes, dtype=bool)
    post = np.asarray(post_spikes, dtype=bool)
    if pre.shape != traces.x_pre.shape or post.shape != traces.x_post.shape:
        raise StructuralError(
            f"spike flags {pre.shape}/{post.shape} do not match traces "
            f"{traces.x_pre.shape}/{traces.x_post.shape}"
        )
    decay = math.exp(-dt / traces.tau_trace)
    traces.x_pre *= decay
    traces.x_post *= decay
    traces.x_pre[pre] = 1.0
    traces.x_post[post] = 1.0
    return traces
