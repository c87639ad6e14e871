"""Shared fixtures.

The five-seed default runs are expensive (a few seconds each), so they
are computed once per session and shared by the directional acceptance
tests.
"""

from __future__ import annotations

import time

import pytest

from dffc import runner
from dffc.forgeries import DatasetConfig


SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture(scope="session")
def five_seed_runs():
    """Default dffc and vanilla runs for seeds 0..4, plus wall time."""
    start = time.perf_counter()
    runs = {}
    for seed in SEEDS:
        dataset = DatasetConfig(seed=seed)
        dffc_run = runner.run_training(runner.RunConfig(dataset=dataset, seed=seed))
        vanilla_run = runner.run_training(
            runner.RunConfig(dataset=dataset, seed=seed, mode="vanilla")
        )
        runs[seed] = {"dffc": dffc_run, "vanilla": vanilla_run}
    elapsed = time.perf_counter() - start
    return {"runs": runs, "elapsed_seconds": elapsed}


@pytest.fixture()
def small_run_config():
    """A fast configuration for wiring-level runner tests."""
    dataset = DatasetConfig(n_train=60, n_test=20, seed=3)
    return runner.RunConfig(
        dataset=dataset,
        total_epochs=6,
        milestones=(2, 3, 4),
        easy_pool_size=10,
        batch_size=16,
        hidden_units=8,
        seed=3,
    )
