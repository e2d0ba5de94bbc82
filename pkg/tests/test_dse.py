import pytest

from dse_tables import Table, brute_force, random_case
from stdpsim.dse import Budget, CandidateError, EvalOutcome, TrainOutcome, candidate_sizes, measure_candidate, run_dse
from stdpsim.errors import ConfigurationError, NumericalFault


def _table(rows):
    """rows: {n_exc: (bytes, acc)} with zero energies."""
    t = Table.__new__(Table)
    t.bytes = {n: float(b) for n, (b, _) in rows.items()}
    t.acc = {n: a for n, (_, a) in rows.items()}
    t.e_train = {n: 0.0 for n in rows}
    t.e_inf = {n: 0.0 for n in rows}
    t.trained, t.evaluated = [], []
    return t


def test_smaller_model_wins_equal_accuracy():
    t = _table({100: (10, 0.80), 200: (20, 0.85), 300: (30, 0.85), 400: (50, 0.95)})
    best, recs = run_dse(Budget(40, 1, 1), 100, t.trainer, t.evaluator, t.size)
    assert best.n_exc == 200
    assert [r.n_exc for r in recs] == [100, 200, 300]
    assert [r.saved for r in recs] == [True, True, False]
    assert 400 not in t.trained


def test_budget_below_smallest_candidate_gives_none():
    t = _table({100: (10, 0.8)})
    best, recs = run_dse(Budget(5, 1, 1), 100, t.trainer, t.evaluator, t.size)
    assert best is None and recs == [] and t.trained == []


def test_train_budget_guards_inference():
    t = _table({10: (1, 0.9), 20: (2, 0.5)})
    t.e_train[10] = 100.0
    best, recs = run_dse(Budget(5, 50, 50), 10, t.trainer, t.evaluator, t.size)
    assert t.evaluated == [20]
    assert recs[0].accuracy is None and not recs[0].feasible
    assert best.n_exc == 20


def test_inference_budget_excludes():
    t = _table({10: (1, 0.9), 20: (2, 0.5)})
    t.e_inf[10] = 60.0
    best, _ = run_dse(Budget(5, 50, 50), 10, t.trainer, t.evaluator, t.size)
    assert best.n_exc == 20


def test_zero_increment_rejected():
    t = _table({10: (1, 0.9)})
    with pytest.raises(ConfigurationError):
        run_dse(Budget(5, 1, 1), 0, t.trainer, t.evaluator, t.size)


def test_negative_budget_rejected():
    with pytest.raises(ConfigurationError):
        Budget(-1, 0, 0)


def test_trainer_failure_carries_n_exc():
    def bad(n):
        if n == 20:
            raise NumericalFault("nan weights")
        return TrainOutcome(n, 0.0)

    with pytest.raises(CandidateError) as ei:
        run_dse(Budget(100, 1, 1), 10, bad, lambda m: EvalOutcome(0.5, 0.0), lambda n: float(n))
    assert ei.value.n_exc == 20
    assert isinstance(ei.value.__cause__, NumericalFault)


def test_feasible_record_fully_populated_and_deterministic():
    t = _table({10: (1, 0.9)})
    a = measure_candidate(10, Budget(5, 1, 1), t.trainer, t.evaluator, t.size)
    b = measure_candidate(10, Budget(5, 1, 1), t.trainer, t.evaluator, t.size)
    assert a.feasible and None not in (a.bytes, a.e_train, a.e_inf, a.accuracy, a.model)
    assert a.row() == b.row()


def test_scan_is_arithmetic_and_terminates():
    sizes = candidate_sizes(Budget(1000, 0, 0), 7, lambda n: n * n)
    assert sizes == list(range(7, 32, 7))
    assert candidate_sizes(Budget(1e9, 0, 0), 1, lambda n: n, limit=3) == [1, 2, 3]


@pytest.mark.parametrize("seed", range(100))
def test_matches_brute_force(seed):
    t, budget = random_case(seed)
    best, _ = run_dse(budget, t.n_add, t.trainer, t.evaluator, t.size)
    want = brute_force(t, budget)
    assert (best.n_exc if best else None) == want
    if best is not None:
        assert best.bytes <= budget.mem and best.e_train <= budget.E_train and best.e_inf <= budget.E_inf


def test_threads_do_not_change_selection():
    for seed in range(20):
        t1, budget = random_case(seed)
        t2, _ = random_case(seed)
        b1, r1 = run_dse(budget, t1.n_add, t1.trainer, t1.evaluator, t1.size)
        b2, r2 = run_dse(budget, t2.n_add, t2.trainer, t2.evaluator, t2.size, threads=4)
        assert [r.row() for r in r1] == [r.row() for r in r2]
