"""Unsupervised training loop with periodic accuracy metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from stdpsim.encoding import EncodingParams, encode_poisson, image_rng
from stdpsim.errors import ConfigurationError
from stdpsim.evaluation import assignment_from_responses, energy_proxy, memory_report, predict_counts
from stdpsim.learning import StdpParams
from stdpsim.simulation import PHASE_TRAIN, Presenter, RunCounters
from stdpsim.topology import Network

log = logging.getLogger(__name__)

METRICS_HEADER = ("epoch", "samples_seen", "accuracy", "proxy_energy", "bytes")


@dataclass
class MetricsRow:
    epoch: int
    samples_seen: int
    accuracy: float
    proxy_energy: float
    bytes: float

    def row(self) -> tuple:
        return (self.epoch, self.samples_seen, repr(self.accuracy), repr(self.proxy_energy), repr(self.bytes))


@dataclass
class TrainResult:
    network: Network
    metrics: list[MetricsRow] = field(default_factory=list)
    counters: RunCounters = field(default_factory=RunCounters)

    @property
    def curve(self) -> list[tuple[int, float]]:
        return [(m.samples_seen, m.accuracy) for m in self.metrics]


def interval_accuracy(counts: np.ndarray, labels: np.ndarray, previous: np.ndarray | None,
                      previous_labels: np.ndarray | None) -> float:
    """Accuracy of one training interval's responses.

    Labels come from the previous interval's responses, so the score is not
    fit to the images it grades; the first interval labels itself.
    """
    if previous is None:
        previous, previous_labels = counts, labels
    asg = assignment_from_responses(previous, previous_labels)
    if asg.n_assigned == 0:
        return 0.0
    pred, _ = predict_counts(counts, asg)
    return float(np.mean(pred == labels))


def train(
    network: Network,
    images: np.ndarray,
    labels: np.ndarray,
    encoding: EncodingParams,
    stdp: StdpParams,
    *,
    epochs: int = 1,
    metrics_interval: int = 1000,
    on_metrics: Callable[[MetricsRow], None] | None = None,
) -> TrainResult:
    """Present every image ``epochs`` times with learning on.

    Every ``metrics_interval`` samples (and at the end) a metrics row is
    produced: online accuracy, the cumulative energy proxy, and the
    reference-precision model size.  Mutates ``network`` in place.
    """
    images = np.asarray(images)
    labels = np.asarray(labels)
    if len(images) == 0:
        raise ConfigurationError("cannot train on an empty set")
    if len(images) != len(labels):
        raise ConfigurationError(f"{len(images)} images but {len(labels)} labels")
    if metrics_interval < 1 or epochs < 1:
        raise ConfigurationError("metrics_interval and epochs must be >= 1")

    pres = Presenter(network, stdp)
    result = TrainResult(network)
    size = memory_report(network).total_bytes
    n = len(images)
    buf = np.zeros((metrics_interval, network.config.n_exc), dtype=np.int64)
    buf_labels = np.zeros(metrics_interval, dtype=np.int64)
    prev = prev_labels = None
    filled = 0
    seen = 0

    def flush(epoch):
        nonlocal prev, prev_labels, filled
        counts, lab = buf[:filled].copy(), buf_labels[:filled].copy()
        acc = interval_accuracy(counts, lab, prev, prev_labels)
        row = MetricsRow(epoch, seen, acc, energy_proxy(pres.counters).total, size)
        result.metrics.append(row)
        log.info("epoch %d samples %d accuracy %.4f", epoch, seen, acc)
        if on_metrics is not None:
            on_metrics(row)
        prev, prev_labels, filled = counts, lab, 0

    for epoch in range(epochs):
        for k in range(n):
            # stream index runs across epochs so repeated images get fresh spike trains
            spikes = encode_poisson(images[k], encoding, image_rng(encoding.seed, PHASE_TRAIN, epoch * n + k))
            buf[filled] = pres.present(spikes, learn=True)
            buf_labels[filled] = labels[k]
            filled += 1
            seen += 1
            if filled == metrics_interval:
                flush(epoch)
        if filled:
            flush(epoch)
    result.counters = pres.counters
    return result


def samples_to_fraction(curve: list[tuple[int, float]], fraction: float = 0.9) -> int | None:
    """Samples seen when the curve first reaches ``fraction`` of its final value."""
    if not curve:
        return None
    target = fraction * curve[-1][1]
    for seen, acc in curve:
        if acc >= target:
            return seen
    return None
