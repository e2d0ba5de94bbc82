"""Synthetic candidate tables and an independent brute-force DSE selector."""

import numpy as np

from stdpsim.dse import Budget, EvalOutcome, TrainOutcome


class Table:
    """Per-size bytes, training energy, inference energy and accuracy, with call logs."""

    def __init__(self, rng: np.random.Generator, n_add: int, n_rows: int):
        self.n_add = n_add
        sizes = [n_add * (k + 1) for k in range(n_rows)]
        # bytes strictly increasing in n_exc, as any real memory model is
        steps = rng.integers(1, 50, n_rows)
        self.bytes = dict(zip(sizes, np.cumsum(steps).astype(float)))
        self.e_train = {n: float(rng.integers(0, 100)) for n in sizes}
        self.e_inf = {n: float(rng.integers(0, 100)) for n in sizes}
        # few distinct accuracy levels so ties are common
        self.acc = {n: float(rng.choice([0.5, 0.6, 0.7, 0.8])) for n in sizes}
        self.trained, self.evaluated = [], []

    def size(self, n):
        if n in self.bytes:
            return self.bytes[n]
        return max(self.bytes.values()) + n  # beyond the table: grows past any budget used here

    def trainer(self, n):
        self.trained.append(n)
        return TrainOutcome(model=("model", n), e_train=self.e_train[n])

    def evaluator(self, model):
        n = model[1]
        self.evaluated.append(n)
        return EvalOutcome(accuracy=self.acc[n], e_inf=self.e_inf[n])

    def random_budget(self, rng):
        total = max(self.bytes.values())
        return Budget(mem=float(rng.integers(0, int(total) + 2)), E_train=float(rng.integers(0, 110)),
                      E_inf=float(rng.integers(0, 110)))


def brute_force(table: Table, budget: Budget):
    """Largest accuracy among feasible rows; smallest n_exc among ties; None when nothing fits."""
    feasible = [n for n in sorted(table.bytes)
                if table.bytes[n] <= budget.mem and table.e_train[n] <= budget.E_train
                and table.e_inf[n] <= budget.E_inf]
    if not feasible:
        return None
    best = max(table.acc[n] for n in feasible)
    return min(n for n in feasible if table.acc[n] == best)


def random_case(seed: int):
    rng = np.random.default_rng(seed)
    t = Table(rng, int(rng.integers(1, 200)), int(rng.integers(1, 21)))
    return t, t.random_budget(rng)
