import random

import pytest

from crowdrep import _backend
from crowdrep.ingest import Evaluation

from datetime import datetime

ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(_backend.AVAILABLE))
def kernels(request):
    return _backend.AVAILABLE[request.param]


@pytest.fixture
def acceptance_log():
    def record(criterion, ok, detail):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"[{status}] criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def ev(evaluator, worker, value, label, credit=1.0, ts=None):
    return Evaluation(evaluator, worker, float(value), ts or datetime(2004, 1, label), label, float(credit))


def random_log(rng: random.Random, max_actors=6, max_evals=20, max_label=8, scale=3.0, grid=None):
    """Small random log over a shared actor pool (evaluators may also be workers)."""
    actors = [f"a{i}" for i in range(rng.randint(2, max_actors))]
    out = []
    for _ in range(rng.randint(1, max_evals)):
        i, j = rng.sample(actors, 2)
        value = rng.uniform(0, scale) if grid is None else rng.choice(grid)
        label = rng.randint(1, max_label)
        out.append(ev(i, j, value, label, credit=rng.choice([0.5, 1.0, 2.0, 3.5])))
    return out
