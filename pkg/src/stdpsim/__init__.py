"""Clock-driven simulation and optimization of unsupervised STDP spiking networks."""

from stdpsim.config import RunConfig, load_config, parse_config
from stdpsim.dse import Budget, ModelRecord, measure_candidate, run_dse
from stdpsim.encoding import EncodingParams, encode_poisson
from stdpsim.errors import (
    ConfigurationError, IdxParseError, InferenceError, ModelFileError, NumericalFault, ParseError,
    StdpSimError, StructuralError,
)
from stdpsim.evaluation import (
    ClassAssignment, EvaluationResult, MemoryReport, assign_classes, energy_proxy, evaluate, memory_report,
    predict,
)
from stdpsim.idx import IdxDataset, load_idx, write_idx
from stdpsim.learning import (
    LearningScratch, Rule, StdpParams, accumulate_spikes, baseline_stdp_step, batched_update,
    normalize_columns, post_only_stdp_step,
)
from stdpsim.modelfile import load_model, save_model
from stdpsim.neuron import NeuronParams, NeuronState, TraceState, integrate_timestep, update_traces
from stdpsim.quantize import FixedPointFormat, quantize_model, quantize_value, sweep_quantization
from stdpsim.simulation import Presenter, RunCounters
from stdpsim.topology import (
    InhibitionMode, Network, NetworkConfig, build_network, propagate_inhibition, set_inhibition_ratio,
)
from stdpsim.training import train

__version__ = "0.1.0"
