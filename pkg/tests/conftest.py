"""Shared fixtures: one cached synthetic season reused across test modules.

Generating the default 75-day season takes a couple hundred ms; the heavy
suites (trees, forests, cross-validation) all want the same realistic
matrix, so build it once per session.
"""

from __future__ import annotations

import pytest

from shadecount.dataset import group_days, make_folds
from shadecount.features import build_all_examples, to_matrix
from shadecount.synth import SynthConfig, generate


class Season:
    """Bundle of everything downstream of one synthetic generation run."""

    def __init__(self, config: SynthConfig):
        self.config = config
        self.observations, self.kernel = generate(config)
        self.grouped = group_days(self.observations)
        self.days = self.grouped.days
        self.examples = build_all_examples(self.days)
        self.X, self.y, self.dates = to_matrix(self.examples)
        self.day_dates = sorted({d.date for d in self.days})
        self.plan = make_folds(self.day_dates, k=5, seed=config.seed)


@pytest.fixture(scope="session")
def season():
    return Season(SynthConfig(noise_std=8.0, seed=0))


@pytest.fixture(scope="session")
def small_season():
    # 10 days is enough for 5 folds of 2 days each and keeps CV tests fast
    return Season(SynthConfig(n_days=10, noise_std=8.0, seed=7))


def pytest_runtest_logreport(report):
    # one status line per acceptance criterion, printed even on failure
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call":
        status = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.skipped:
        status = "SKIP"
    else:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    print(f"\n[acceptance] {name}: {status} ({report.duration:.2f}s)", flush=True)
