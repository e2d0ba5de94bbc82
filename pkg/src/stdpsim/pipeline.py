"""End-to-end steps shared by the CLI and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from stdpsim.config import RunConfig
from stdpsim.dse import Budget, EvalOutcome, ModelRecord, TrainOutcome, run_dse
from stdpsim.evaluation import (
    ClassAssignment, EvaluationResult, assignment_from_responses, energy_proxy, evaluate, memory_report,
    response_matrix,
)
from stdpsim.simulation import PHASE_ASSIGN, RunCounters
from stdpsim.topology import Network, build_network
from stdpsim.training import MetricsRow, TrainResult, train
from stdpsim.quantize import quantize_model


@dataclass
class TrainedModel:
    network: Network
    assignment: ClassAssignment
    training: TrainResult
    assign_counters: RunCounters = field(default_factory=RunCounters)

    @property
    def e_train(self) -> float:
        """Energy proxy of training plus the class-assignment pass."""
        return energy_proxy(self.training.counters + self.assign_counters).total


def build_from_config(cfg: RunConfig, **network_overrides) -> Network:
    return build_network(cfg.network_config(**network_overrides), cfg.neuron_params(), cfg.inhibitory_params())


def train_and_assign(
    cfg: RunConfig,
    images: np.ndarray,
    labels: np.ndarray,
    *,
    network: Network | None = None,
    n_train: int | None = None,
    stdp_overrides: dict | None = None,
    on_metrics: Callable[[MetricsRow], None] | None = None,
) -> TrainedModel:
    """Train on the first ``n_train`` samples, then label neurons from the first ``n_assign``."""
    net = network if network is not None else build_from_config(cfg)
    n_train = min(n_train or cfg.n_train, len(images))
    n_assign = min(cfg.n_assign, len(images))
    enc = cfg.encoding_params()
    res = train(net, images[:n_train], labels[:n_train], enc, cfg.stdp_params(**(stdp_overrides or {})),
                epochs=cfg.epochs, metrics_interval=cfg.metrics_interval, on_metrics=on_metrics)
    counts, ctr = response_matrix(net, images[:n_assign], enc, phase=PHASE_ASSIGN, threads=cfg.threads)
    return TrainedModel(net, assignment_from_responses(counts, labels[:n_assign]), res, ctr)


def evaluate_model(cfg: RunConfig, network: Network, assignment: ClassAssignment,
                   images: np.ndarray, labels: np.ndarray) -> EvaluationResult:
    n = min(cfg.n_test, len(images))
    return evaluate(network, assignment, images[:n], labels[:n], cfg.encoding_params(), threads=cfg.threads)


def dse_search(cfg: RunConfig, train_images, train_labels, test_images, test_labels,
               budget: Budget | None = None) -> tuple[ModelRecord | None, list[ModelRecord]]:
    """Size scan with models trained on ``dse_n_train`` samples and sized at ``dse_wordlength`` bits.

    E_train is the proxy total of training plus class assignment; E_inf is
    the mean proxy per test image of the quantized model.
    """
    budget = budget or cfg.budget()
    wl = cfg.dse_wordlength

    def size_model(n_exc: int) -> float:
        return memory_report(cfg.network_config(n_exc=n_exc), wl).total_bytes

    def trainer(n_exc: int) -> TrainOutcome:
        model = train_and_assign(cfg, train_images, train_labels, network=build_from_config(cfg, n_exc=n_exc),
                                 n_train=cfg.dse_n_train)
        return TrainOutcome(model, model.e_train)

    def evaluator(model: TrainedModel) -> EvalOutcome:
        q = quantize_model(model.network, wl, cfg.quantization_policy())
        res = evaluate_model(cfg, q, model.assignment, test_images, test_labels)
        return EvalOutcome(res.accuracy, energy_proxy(res.counters).total / res.n)

    return run_dse(budget, cfg.dse_n_add, trainer, evaluator, size_model,
                   max_candidates=cfg.dse_max_candidates or None)
