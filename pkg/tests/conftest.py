from __future__ import annotations

import numpy as np
import pytest

from popsynth.population import draw_sample, synth_population
from popsynth.presets import DESK_SAMPLE_RATE, DESK_SAMPLE_SEED, desk_population_spec
from popsynth.schema import AttributeSchema


@pytest.fixture
def small_schema() -> AttributeSchema:
    return AttributeSchema([("a", ["x", "y"]), ("b", ["p", "q", "r"])])


@pytest.fixture(scope="session")
def desk():
    """Desk population, its schema and the default 5% sample."""
    spec = desk_population_spec()
    population = synth_population(spec)
    sample = draw_sample(population, DESK_SAMPLE_RATE, DESK_SAMPLE_SEED)
    return spec.schema, population, sample


def random_records(rng: np.random.Generator, sizes, n: int) -> np.ndarray:
    return np.stack([rng.integers(0, s, n) for s in sizes], axis=1) if n else np.zeros((0, len(sizes)), np.int64)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
