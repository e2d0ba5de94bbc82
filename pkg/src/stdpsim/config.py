"""Flat ``key = value`` run configuration.

Every tunable of every module lives in one :class:`RunConfig`.  The text
format is one assignment per line, ``#`` starts a comment, blank lines are
ignored, and unknown keys are rejected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from pathlib import Path

from stdpsim.dse import Budget
from stdpsim.encoding import EncodingParams
from stdpsim.errors import ConfigurationError
from stdpsim.learning import Rule, StdpParams
from stdpsim.neuron import INHIBITORY_PARAMS, NeuronParams
from stdpsim.quantize import QuantizationPolicy
from stdpsim.topology import InhibitionMode, NetworkConfig

_EXC = NeuronParams()
_INH = INHIBITORY_PARAMS
_NET = NetworkConfig()
_STDP = StdpParams()
_ENC = EncodingParams()


@dataclass(frozen=True)
class RunConfig:
    # excitatory neurons
    tau_v: float = _EXC.tau_v
    E_rest: float = _EXC.E_rest
    E_exc: float = _EXC.E_exc
    E_inh: float = _EXC.E_inh
    V_reset: float = _EXC.V_reset
    V_th: float = _EXC.V_th
    theta_plus: float = _EXC.theta_plus
    tau_theta: float = _EXC.tau_theta
    t_refrac: float = _EXC.t_refrac
    tau_ge: float = _EXC.tau_ge
    tau_gi: float = _EXC.tau_gi
    tau_trace: float = _EXC.tau_trace
    dt: float = _EXC.dt
    # inhibitory-layer neurons
    inh_tau_v: float = _INH.tau_v
    inh_E_rest: float = _INH.E_rest
    inh_V_reset: float = _INH.V_reset
    inh_V_th: float = _INH.V_th
    inh_t_refrac: float = _INH.t_refrac
    # topology
    n_input: int = _NET.n_input
    n_exc: int = _NET.n_exc
    inhibition_mode: str = _NET.inhibition_mode.value
    inhibition_ratio: float = _NET.inhibition_ratio
    g_exc_strength: float = _NET.g_exc_strength
    w_max: float = _NET.w_max
    w_init_max: float = _NET.w_init_max
    exc_inh_strength: float = _NET.exc_inh_strength
    inh_exc_strength: float = _NET.inh_exc_strength
    reset_potential: bool = _NET.reset_potential
    # encoding
    t_sim: float = _ENC.t_sim
    rate_scale: float = _ENC.rate_scale
    # plasticity
    rule: str = _STDP.rule.value
    eta_pre: float = _STDP.eta_pre
    eta_post: float = _STDP.eta_post
    mu: float = _STDP.mu
    t_step: int = _STDP.t_step
    n_spikes_th: int = _STDP.n_spikes_th
    normalize: bool = _STDP.normalize
    norm_target: float = 0.0  # 0 -> NORM_MEAN_WEIGHT * n_input * w_max (60 for MNIST)
    gate_on_window_spike: bool = _STDP.gate_on_window_spike
    # run protocol
    seed: int = 0
    n_train: int = 10000
    n_assign: int = 10000
    n_test: int = 2000
    epochs: int = 1
    metrics_interval: int = 1000
    threads: int = 1
    # quantization
    wordlengths: str = "4,8,16,32"
    quantize_weights: bool = True
    quantize_theta: bool = True
    model_wordlength: int = 0  # 0 -> reference precision in saved models
    # design space exploration
    dse_mem: float = 200_000.0
    dse_e_train: float = 1e12
    dse_e_inf: float = 1e12
    dse_n_add: int = 100
    dse_wordlength: int = 8
    dse_n_train: int = 10000
    dse_max_candidates: int = 0  # 0 -> no cap besides the memory budget

    def __post_init__(self):
        # build every derived object once so bad values fail at load time
        self.neuron_params()
        self.inhibitory_params()
        self.network_config()
        self.encoding_params()
        self.stdp_params()
        self.budget()
        for name in ("n_train", "n_assign", "n_test", "epochs", "metrics_interval", "threads", "dse_n_add",
                     "dse_n_train"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.model_wordlength < 0 or self.model_wordlength > 32 or self.dse_max_candidates < 0:
            raise ConfigurationError("model_wordlength must be in [0, 32] and dse_max_candidates >= 0")

    # --- derived parameter objects ---------------------------------------
    def neuron_params(self) -> NeuronParams:
        return NeuronParams(
            tau_v=self.tau_v, E_rest=self.E_rest, E_exc=self.E_exc, E_inh=self.E_inh,
            V_reset=self.V_reset, V_th=self.V_th, theta_plus=self.theta_plus, tau_theta=self.tau_theta,
            t_refrac=self.t_refrac, tau_ge=self.tau_ge, tau_gi=self.tau_gi, tau_trace=self.tau_trace,
            dt=self.dt,
        )

    def inhibitory_params(self) -> NeuronParams:
        return replace(
            INHIBITORY_PARAMS, tau_v=self.inh_tau_v, E_rest=self.inh_E_rest, V_reset=self.inh_V_reset,
            V_th=self.inh_V_th, t_refrac=self.inh_t_refrac, E_exc=self.E_exc, E_inh=self.E_inh,
            tau_ge=self.tau_ge, tau_gi=self.tau_gi, tau_trace=self.tau_trace, dt=self.dt,
        )

    def network_config(self, **overrides) -> NetworkConfig:
        kw = dict(
            n_input=self.n_input, n_exc=self.n_exc, inhibition_mode=InhibitionMode(self.inhibition_mode),
            inhibition_ratio=self.inhibition_ratio, g_exc_strength=self.g_exc_strength, w_max=self.w_max,
            w_init_max=self.w_init_max, exc_inh_strength=self.exc_inh_strength,
            inh_exc_strength=self.inh_exc_strength, reset_potential=self.reset_potential, seed=self.seed,
        )
        kw.update(overrides)
        return NetworkConfig(**kw)

    def encoding_params(self) -> EncodingParams:
        return EncodingParams(t_sim=self.t_sim, dt=self.dt, rate_scale=self.rate_scale, seed=self.seed)

    def stdp_params(self, **overrides) -> StdpParams:
        kw = dict(
            rule=Rule(self.rule), eta_pre=self.eta_pre, eta_post=self.eta_post, mu=self.mu, w_m=self.w_max,
            t_step=self.t_step, n_spikes_th=self.n_spikes_th, normalize=self.normalize,
            norm_target=self.norm_target or None, gate_on_window_spike=self.gate_on_window_spike,
        )
        kw.update(overrides)
        return StdpParams(**kw)

    def quantization_policy(self) -> QuantizationPolicy:
        return QuantizationPolicy(weights=self.quantize_weights, theta=self.quantize_theta)

    def budget(self) -> Budget:
        return Budget(mem=self.dse_mem, E_train=self.dse_e_train, E_inf=self.dse_e_inf)

    # --- text round trip --------------------------------------------------
    def dumps(self) -> str:
        lines = ["# stdpsim run configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **kw) -> "RunConfig":
        unknown = set(kw) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigurationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return replace(self, **kw)


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, enum.Enum):
        return v.value
    return str(v)


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _coerce(name: str, typ: str, raw: str):
    try:
        if typ == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigurationError(f"config key {name!r}: cannot read {raw!r} as {typ}") from None


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, types[key], raw)
    return replace(base or RunConfig(), **values)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
