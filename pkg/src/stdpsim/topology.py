"""Network construction: input -> excitatory layer plus one of two inhibition schemes.

``InhibitionMode.LAYER`` is the three-layer arrangement where every excitatory
neuron drives its own inhibitory neuron, which then inhibits all other
excitatory neurons.  ``InhibitionMode.LATERAL`` drops the inhibitory
population and lets each excitatory spike inhibit the other excitatory
neurons directly, with a strength set as a multiple of the unit excitatory
conductance.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field

import numpy as np

from stdpsim.errors import ConfigurationError, StructuralError
from stdpsim.neuron import INHIBITORY_PARAMS, NeuronParams, NeuronState, integrate_timestep

RATIO_MIN, RATIO_MAX = 2.0, 4.0


class InhibitionMode(str, enum.Enum):
    LATERAL = "lateral"
    LAYER = "layer"


@dataclass(frozen=True)
class NetworkConfig:
    n_input: int = 784
    n_exc: int = 100
    inhibition_mode: InhibitionMode = InhibitionMode.LATERAL
    inhibition_ratio: float = 4.0
    g_exc_strength: float = 1.0
    w_max: float = 1.0
    w_init_max: float = 0.3  # fraction of w_max
    exc_inh_strength: float = 22.5
    inh_exc_strength: float = 17.5
    # return V to E_rest at each image onset instead of carrying it over
    reset_potential: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "inhibition_mode", InhibitionMode(self.inhibition_mode))
        if self.n_input < 1 or self.n_exc < 1:
            raise ConfigurationError(f"n_input and n_exc must be >= 1, got {self.n_input}, {self.n_exc}")
        check_ratio(self.inhibition_ratio)
        if self.g_exc_strength <= 0 or self.w_max <= 0:
            raise ConfigurationError("g_exc_strength and w_max must be positive")
        if not 0 <= self.w_init_max <= 1:
            raise ConfigurationError("w_init_max is a fraction of w_max in [0, 1]")
        if self.exc_inh_strength < 0 or self.inh_exc_strength < 0:
            raise ConfigurationError("inhibitory coupling strengths must be non-negative")


def check_ratio(r: float) -> float:
    if not RATIO_MIN <= r <= RATIO_MAX:
        raise ConfigurationError(f"inhibition ratio {r} outside [{RATIO_MIN}, {RATIO_MAX}]")
    return float(r)


@dataclass
class SynapticMatrix:
    """Plastic input -> excitatory weights, shape (n_input, n_exc), float32."""

    w: np.ndarray
    w_m: float = 1.0

    def __post_init__(self):
        if self.w.ndim != 2:
            raise StructuralError(f"weight matrix must be 2-D, got shape {self.w.shape}")
        if np.any(self.w < 0) or np.any(self.w > self.w_m):
            raise ConfigurationError(f"weights outside [0, {self.w_m}]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.w.shape


@dataclass
class InhibitionStructure:
    mode: InhibitionMode
    lateral_strength: float = 0.0
    exc_inh_strength: float = 0.0
    inh_exc_strength: float = 0.0

    def __post_init__(self):
        if min(self.lateral_strength, self.exc_inh_strength, self.inh_exc_strength) < 0:
            raise ConfigurationError("inhibitory strengths must be non-negative")


@dataclass
class Network:
    config: NetworkConfig
    exc_params: NeuronParams
    weights: SynapticMatrix
    exc: NeuronState
    inhibition: InhibitionStructure
    inh_params: NeuronParams | None = None
    inh: NeuronState | None = None
    # g_i increments produced this step, delivered on the next one
    pending_inh: np.ndarray = field(default=None)
    # FixedPointFormat the stored parameters sit on, None at reference precision
    fmt: object = None

    def __post_init__(self):
        if self.pending_inh is None:
            self.pending_inh = np.zeros(self.config.n_exc)

    @property
    def n_neurons(self) -> int:
        return self.exc.n + (self.inh.n if self.inh is not None else 0)

    @property
    def w(self) -> np.ndarray:
        return self.weights.w

    def clone(self) -> "Network":
        return copy.deepcopy(self)

    def reset_presentation(self):
        """State reset at image onset: conductances and queued inhibition, plus
        V and refractoriness when ``config.reset_potential`` is set.

        theta and the weights are the learned state and persist.
        """
        for st, p in ((self.exc, self.exc_params), (self.inh, self.inh_params)):
            if st is None:
                continue
            st.g_e[:] = 0.0
            st.g_i[:] = 0.0
            if self.config.reset_potential:
                st.V[:] = p.E_rest
                st.refrac_left[:] = 0
        self.pending_inh[:] = 0.0


def build_network(
    config: NetworkConfig,
    exc_params: NeuronParams | None = None,
    inh_params: NeuronParams | None = None,
) -> Network:
    exc_params = exc_params or NeuronParams()
    rng = np.random.default_rng(config.seed)
    hi = config.w_init_max * config.w_max
    w = rng.uniform(0.0, hi, size=(config.n_input, config.n_exc)).astype(np.float32)
    weights = SynapticMatrix(w, config.w_max)

    if config.inhibition_mode is InhibitionMode.LATERAL:
        structure = InhibitionStructure(
            InhibitionMode.LATERAL,
            lateral_strength=config.inhibition_ratio * config.g_exc_strength,
        )
        return Network(config, exc_params, weights, NeuronState.at_rest(config.n_exc, exc_params), structure)

    inh_params = inh_params or INHIBITORY_PARAMS
    structure = InhibitionStructure(
        InhibitionMode.LAYER,
        exc_inh_strength=config.exc_inh_strength,
        inh_exc_strength=config.inh_exc_strength,
    )
    return Network(
        config, exc_params, weights, NeuronState.at_rest(config.n_exc, exc_params), structure,
        inh_params=inh_params, inh=NeuronState.at_rest(config.n_exc, inh_params),
    )


def propagate_inhibition(
    structure: InhibitionStructure,
    exc_spikes: np.ndarray,
    inh_state: NeuronState | None = None,
    inh_params: NeuronParams | None = None,
) -> np.ndarray:
    """Return the g_i increment each excitatory neuron receives from ``exc_spikes``.

    In lateral mode neuron j gets ``lateral_strength`` per *other* spiking
    neuron.  In layer mode the spikes first drive the inhibitory population
    (one-to-one), which is integrated here; only the inhibitory neurons that
    fire contribute, again excluding each one's own partner.
    """
    spikes = np.asarray(exc_spikes, dtype=bool)
    if spikes.ndim != 1:
        raise StructuralError("exc_spikes must be a 1-D flag vector")

    if structure.mode is InhibitionMode.LATERAL:
        return _others(spikes, structure.lateral_strength)

    inh_spikes = inhibitory_layer_step(structure, spikes, inh_state, inh_params)
    return _others(inh_spikes, structure.inh_exc_strength)


def _others(spikes: np.ndarray, strength: float) -> np.ndarray:
    return strength * (spikes.sum() - spikes).astype(np.float64)


def inhibitory_layer_step(
    structure: InhibitionStructure,
    exc_spikes: np.ndarray,
    inh_state: NeuronState | None,
    inh_params: NeuronParams | None,
) -> np.ndarray:
    """Drive each inhibitory neuron from its excitatory partner for one step; return its spike flags."""
    if inh_state is None or inh_params is None:
        raise StructuralError("layer-mode inhibition needs the inhibitory neuron state")
    if inh_state.n != exc_spikes.shape[0]:
        raise StructuralError(f"{exc_spikes.shape[0]} excitatory flags for {inh_state.n} inhibitory neurons")
    drive = structure.exc_inh_strength * exc_spikes.astype(np.float64)
    return integrate_timestep(inh_state, inh_params, drive, 0.0, adapt=False)


def set_inhibition_ratio(network: Network, r: float) -> InhibitionStructure:
    """Rescale lateral inhibition to ``r`` x the unit excitatory conductance."""
    r = check_ratio(r)
    cfg = network.config
    network.config = NetworkConfig(**{**cfg.__dict__, "inhibition_ratio": r})
    if network.inhibition.mode is InhibitionMode.LATERAL:
        network.inhibition.lateral_strength = r * cfg.g_exc_strength
    return network.inhibition
