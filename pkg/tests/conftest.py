import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shapeboot.dataset import Dataset, write_csv
from shapeboot.synth import SynthPopulation, synth_generate


@pytest.fixture
def tmp_csv(tmp_path):
    """Write CSV text (or a Dataset) to a temp file; returns the writer."""

    def write(content, name="data.csv"):
        path = tmp_path / name
        if isinstance(content, Dataset):
            write_csv(content, path)
        else:
            path.write_text(content)
        return str(path)

    return write


@pytest.fixture
def small_ds():
    return Dataset.from_columns({"x": [1.0, 3.0], "y": [2.0, 4.0]})


@pytest.fixture
def demo_population():
    """Strong inverted-U population with three controls."""
    return SynthPopulation(
        n=110,
        beta0=50.0,
        beta1=12.0,
        beta2=-1.0,
        noise_sd=8.0,
        x_lo=0.0,
        x_hi=12.0,
        gammas=(2.0, -1.0, 0.5),
    )


@pytest.fixture
def demo_ds(demo_population):
    return synth_generate(demo_population, seed=7)


def random_problem(rng: np.random.Generator, n: int, p: int):
    """A random full-rank least-squares problem with dyadic-friendly values."""
    X = np.column_stack(
        [np.ones(n)] + [rng.uniform(-4.0, 4.0, size=n) for _ in range(p - 1)]
    )
    y = rng.uniform(-10.0, 10.0, size=n)
    return X, y


def pytest_runtest_logreport(report):
    """One visible PASS/FAIL line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {name}: {'PASS' if report.passed else 'FAIL'}")
