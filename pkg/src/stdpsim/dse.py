"""Budget-constrained search over network sizes.

Candidates are scanned at n_exc = n_add, 2 n_add, ... while the projected
model size fits the memory budget.  A candidate is trained, checked against
the training-energy budget, then evaluated and checked against the
inference-energy budget.  It replaces the saved model only if its accuracy
is strictly higher, so among equally accurate models the smallest wins.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

from stdpsim.errors import ConfigurationError, StdpSimError

log = logging.getLogger(__name__)

DSE_HEADER = ("n_exc", "bytes", "e_train_proxy", "e_inf_proxy", "accuracy", "feasible", "saved")


@dataclass(frozen=True)
class Budget:
    mem: float       # bytes
    E_train: float   # energy-proxy units
    E_inf: float

    def __post_init__(self):
        if min(self.mem, self.E_train, self.E_inf) < 0:
            raise ConfigurationError("budgets must be non-negative")


@dataclass
class TrainOutcome:
    """What a trainer hands back: the trained model and its training energy."""

    model: Any
    e_train: float


@dataclass
class EvalOutcome:
    accuracy: float
    e_inf: float


@dataclass
class ModelRecord:
    n_exc: int
    bytes: float
    e_train: float | None = None
    e_inf: float | None = None
    accuracy: float | None = None
    model: Any = field(default=None, repr=False)
    mem_ok: bool = True
    train_ok: bool = False
    inf_ok: bool = False
    saved: bool = False

    @property
    def feasible(self) -> bool:
        return self.mem_ok and self.train_ok and self.inf_ok

    def row(self) -> tuple:
        fmt = lambda v: "" if v is None else repr(float(v))
        return (self.n_exc, fmt(self.bytes), fmt(self.e_train), fmt(self.e_inf),
                fmt(self.accuracy), int(self.feasible), int(self.saved))


class CandidateError(StdpSimError):
    def __init__(self, n_exc: int, cause: BaseException):
        super().__init__(f"candidate n_exc={n_exc} failed: {cause}")
        self.n_exc = n_exc


Trainer = Callable[[int], TrainOutcome]
Evaluator = Callable[[Any], EvalOutcome]
SizeModel = Callable[[int], float]


def measure_candidate(n_exc: int, budget: Budget, trainer: Trainer, evaluator: Evaluator,
                      size_model: SizeModel) -> ModelRecord:
    """Train and, if the training energy fits, evaluate one candidate."""
    if n_exc < 1:
        raise ConfigurationError("n_exc must be >= 1")
    rec = ModelRecord(n_exc, float(size_model(n_exc)))
    rec.mem_ok = rec.bytes <= budget.mem
    try:
        trained = trainer(n_exc)
        rec.model, rec.e_train = trained.model, float(trained.e_train)
        rec.train_ok = rec.e_train <= budget.E_train
        if rec.train_ok:
            ev = evaluator(trained.model)
            rec.accuracy, rec.e_inf = float(ev.accuracy), float(ev.e_inf)
            rec.inf_ok = rec.e_inf <= budget.E_inf
    except StdpSimError as exc:
        raise CandidateError(n_exc, exc) from exc
    return rec


def candidate_sizes(budget: Budget, n_add: int, size_model: SizeModel, limit: int | None = None) -> list[int]:
    """Scan order: n_add, 2 n_add, ... while the projected size fits ``budget.mem``."""
    if n_add < 1:
        raise ConfigurationError("n_add must be >= 1")
    sizes = []
    n = n_add
    while size_model(n) <= budget.mem and (limit is None or len(sizes) < limit):
        sizes.append(n)
        n += n_add
    return sizes


def run_dse(
    budget: Budget,
    n_add: int,
    trainer: Trainer,
    evaluator: Evaluator,
    size_model: SizeModel,
    *,
    threads: int = 1,
    max_candidates: int | None = None,
) -> tuple[ModelRecord | None, list[ModelRecord]]:
    """Return (best record or None, every measured record in scan order).

    With ``threads > 1`` candidates are measured concurrently, but the save
    decision is still taken in ascending n_exc order.
    """
    sizes = candidate_sizes(budget, n_add, size_model, max_candidates)
    measure = lambda n: measure_candidate(n, budget, trainer, evaluator, size_model)
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(threads) as ex:
            records = list(ex.map(measure, sizes))
    else:
        records = [measure(n) for n in sizes]

    best = None
    acc_saved = float("-inf")
    for rec in records:
        if rec.feasible and rec.accuracy > acc_saved:
            acc_saved = rec.accuracy
            rec.saved = True  # saved at scan time; later improvements supersede it
            best = rec
        log.info("candidate n_exc=%d bytes=%.0f acc=%s feasible=%s", rec.n_exc, rec.bytes, rec.accuracy, rec.feasible)
    return best, records
