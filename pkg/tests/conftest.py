import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import evfilt as ev
from synth import moving_bar_stream, benchmark_mix

# Shared synthetic benchmark: one signal scene, mixed with seeded noise
# at several rates. Session-scoped because several acceptance criteria
# reuse the same runs.

BENCH_WIDTH = 640
BENCH_HEIGHT = 480
BENCH_DURATION_US = 1_000_000
BENCH_RATES = (0.01, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0)
BENCH_SEED = 2024


@pytest.fixture(scope="session")
def bar_signal():
    return moving_bar_stream(BENCH_WIDTH, BENCH_HEIGHT, BENCH_DURATION_US,
                             seed=BENCH_SEED)


@pytest.fixture(scope="session")
def bench_mixes(bar_signal):
    return {rate: benchmark_mix(bar_signal, rate, seed=BENCH_SEED + i)
            for i, rate in enumerate(BENCH_RATES)}


@pytest.fixture(scope="session")
def default_config():
    return ev.FilterConfig()
