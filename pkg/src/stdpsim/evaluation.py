"""Class assignment, inference, confusion matrices, and the memory and energy models."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from stdpsim.encoding import EncodingParams, encode_poisson, image_rng
from stdpsim.errors import ConfigurationError, InferenceError
from stdpsim.simulation import PHASE_ASSIGN, PHASE_TEST, Presenter, RunCounters
from stdpsim.topology import InhibitionMode, Network, NetworkConfig

UNASSIGNED = -1
REFERENCE_BYTES = 4  # float32 reference precision


def response_matrix(
    network: Network,
    images: np.ndarray,
    encoding: EncodingParams,
    *,
    phase: int = PHASE_TEST,
    threads: int = 1,
    counters: RunCounters | None = None,
) -> tuple[np.ndarray, RunCounters]:
    """Spike counts (n_images, n_exc) with learning and threshold adaptation off.

    Each presentation starts from a reset network and uses an RNG stream
    keyed by its index, so shards evaluated on clones in parallel reproduce
    the serial result exactly.
    """
    images = np.asarray(images)
    n = images.shape[0]
    out = np.zeros((n, network.config.n_exc), dtype=np.int64)

    def run(bounds):
        lo, hi = bounds
        pres = Presenter(network.clone() if threads > 1 else network)
        for k in range(lo, hi):
            out[k] = pres.present(encode_poisson(images[k], encoding, image_rng(encoding.seed, phase, k)), learn=False)
        return pres.counters

    edges = np.linspace(0, n, max(1, threads) + 1).astype(int)
    shards = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, shards))
    else:
        parts = [run(shards[0])]
    total = RunCounters()
    for c in parts:
        total = total + c
    if counters is not None:
        for name, v in total.__dict__.items():
            setattr(counters, name, getattr(counters, name) + v)
    return out, total


@dataclass
class ClassAssignment:
    labels: np.ndarray  # (n_exc,) class id, or UNASSIGNED
    # (n_exc, n_classes) accumulated spike counts; None when loaded from a model file
    responses: np.ndarray | None = None
    n_classes: int = 10

    @property
    def n_assigned(self) -> int:
        return int(np.sum(self.labels != UNASSIGNED))


def assignment_from_responses(counts: np.ndarray, labels: np.ndarray, n_classes: int = 10) -> ClassAssignment:
    """Label each neuron with the class whose images made it fire most.

    ``np.argmax`` returns the first maximum, so ties go to the lowest class.
    """
    counts = np.asarray(counts)
    labels = np.asarray(labels)
    if counts.shape[0] == 0:
        raise ConfigurationError("cannot assign classes from an empty set")
    resp = np.zeros((counts.shape[1], n_classes), dtype=np.int64)
    np.add.at(resp.T, labels, counts)
    lab = np.where(resp.sum(axis=1) > 0, resp.argmax(axis=1), UNASSIGNED)
    return ClassAssignment(lab.astype(np.int64), resp, n_classes)


def assign_classes(
    network: Network,
    images: np.ndarray,
    labels: np.ndarray,
    encoding: EncodingParams,
    *,
    n_classes: int = 10,
    threads: int = 1,
) -> ClassAssignment:
    if len(images) == 0:
        raise ConfigurationError("cannot assign classes from an empty training set")
    counts, _ = response_matrix(network, images, encoding, phase=PHASE_ASSIGN, threads=threads)
    return assignment_from_responses(counts, labels, n_classes)


def class_scores(counts: np.ndarray, assignment: ClassAssignment) -> np.ndarray:
    """Mean spike count of the neurons assigned to each class; shape (..., n_classes)."""
    counts = np.asarray(counts, dtype=np.float64)
    scores = np.zeros(counts.shape[:-1] + (assignment.n_classes,))
    for c in range(assignment.n_classes):
        members = assignment.labels == c
        if members.any():
            scores[..., c] = counts[..., members].mean(axis=-1)
    return scores


def predict_counts(counts: np.ndarray, assignment: ClassAssignment) -> tuple[np.ndarray, np.ndarray]:
    """Predicted class per row of ``counts`` plus a low-confidence flag (all scores zero)."""
    if assignment.n_assigned == 0:
        raise InferenceError("no neuron carries a class label; inference is impossible")
    scores = class_scores(counts, assignment)
    return scores.argmax(axis=-1), ~np.any(scores > 0, axis=-1)


def predict(network: Network, assignment: ClassAssignment, image: np.ndarray,
            encoding: EncodingParams) -> int:
    counts, _ = response_matrix(network, np.asarray(image)[None], encoding)
    pred, _ = predict_counts(counts, assignment)
    return int(pred[0])


@dataclass
class EvaluationResult:
    accuracy: float
    confusion: np.ndarray  # rows true class, columns predicted
    low_confidence: int
    counters: RunCounters = field(default_factory=RunCounters)

    @property
    def n(self) -> int:
        return int(self.confusion.sum())


def confusion_matrix(true: np.ndarray, pred: np.ndarray, n_classes: int = 10) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(true), np.asarray(pred)), 1)
    return cm


def evaluate_counts(counts: np.ndarray, labels: np.ndarray, assignment: ClassAssignment) -> EvaluationResult:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ConfigurationError("cannot evaluate on an empty test set")
    pred, low = predict_counts(counts, assignment)
    cm = confusion_matrix(labels, pred, assignment.n_classes)
    return EvaluationResult(float(np.trace(cm) / cm.sum()), cm, int(low.sum()))


def evaluate(
    network: Network,
    assignment: ClassAssignment,
    images: np.ndarray,
    labels: np.ndarray,
    encoding: EncodingParams,
    *,
    threads: int = 1,
) -> EvaluationResult:
    if len(images) == 0:
        raise ConfigurationError("cannot evaluate on an empty test set")
    if assignment.n_assigned == 0:
        raise InferenceError("no neuron carries a class label; inference is impossible")
    counts, ctr = response_matrix(network, images, encoding, phase=PHASE_TEST, threads=threads)
    res = evaluate_counts(counts, labels, assignment)
    res.counters = ctr
    return res


# --- memory model -------------------------------------------------------

@dataclass
class MemoryReport:
    synapse_bytes: float
    neuron_state_bytes: float
    breakdown: dict[str, float]

    @property
    def total_bytes(self) -> float:
        return self.synapse_bytes + self.neuron_state_bytes


def _bytes_per_value(wordlength: int | None) -> float:
    return REFERENCE_BYTES if wordlength is None else wordlength / 8


def memory_report(network: Network | NetworkConfig, wordlength: int | None = None) -> MemoryReport:
    """Stored-parameter footprint at ``wordlength`` bits (None = float32 reference).

    Lateral mode stores the n_exc x (n_exc - 1) lateral connections as
    explicit entries.  Layer mode stores the excitatory->inhibitory and
    inhibitory->excitatory projections as two dense n_exc x n_exc matrices
    and keeps state for twice as many neurons.  Per stored neuron: V, theta,
    g_e, g_i.
    """
    cfg = network.config if isinstance(network, Network) else network
    b = _bytes_per_value(wordlength)
    n_in, n = cfg.n_input, cfg.n_exc
    feedforward = n_in * n
    if cfg.inhibition_mode is InhibitionMode.LATERAL:
        inhibitory = n * (n - 1)
        neurons = n
    else:
        inhibitory = 2 * n * n
        neurons = 2 * n
    breakdown = {
        "input_to_excitatory": feedforward * b,
        "inhibitory_connections": inhibitory * b,
        "neuron_state": 4 * neurons * b,
    }
    return MemoryReport(
        synapse_bytes=breakdown["input_to_excitatory"] + breakdown["inhibitory_connections"],
        neuron_state_bytes=breakdown["neuron_state"],
        breakdown=breakdown,
    )


# --- energy proxy -------------------------------------------------------

ENERGY_WEIGHTS = {
    "integration_steps": 1.0,
    "conductance_accumulations": 0.5,
    "trace_updates": 0.5,
    "weight_update_events": 2.0,
}


@dataclass
class EnergyProxyReport:
    integration_steps: int
    conductance_accumulations: int
    trace_updates: int
    weight_update_events: int

    @property
    def total(self) -> float:
        return sum(w * getattr(self, k) for k, w in ENERGY_WEIGHTS.items())


def energy_proxy(counters: RunCounters) -> EnergyProxyReport:
    """Weighted operation count standing in for measured energy (unitless)."""
    return EnergyProxyReport(
        counters.integration_steps, counters.conductance_accumulations,
        counters.trace_updates, counters.weight_update_events,
    )
