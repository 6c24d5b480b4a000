import numpy as np
import pytest

from spectralmc import Dataset, Mask, PosteriorSpec, PriorConfig, Shape


def random_dataset(rng, m, p, frac, with_truth=True):
    observed = rng.random((m, p)) < frac
    observed[0, 0] = True
    mask = Mask.from_bool(observed)
    truth = rng.standard_normal((m, p)) if with_truth else None
    return Dataset(mask, rng.standard_normal(mask.n), truth=truth)


def random_spec(rng, m, p, frac=0.5, tau=1.0, lam=None):
    data = random_dataset(rng, m, p, frac)
    return PosteriorSpec(data, PriorConfig(tau), lam if lam is not None else data.n / 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} -- {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
