"""Shared fixtures for the trigopt test suite."""

import logging

import numpy as np
import pytest

from trigopt.nlp.expr import var
from trigopt.nlp.problem import NlpProblem
from trigopt.settings import ENV_OVERRIDES, load_settings


@pytest.fixture
def rng():
    """Fixed-seed generator so randomized tests are reproducible."""
    return np.random.default_rng(20240611)


@pytest.fixture
def clean_env(monkeypatch):
    """Remove TRIGOPT_* variables; values a test loads from a .env file are undone too."""
    for variable in ENV_OVERRIDES:
        monkeypatch.setenv(variable, "")
        monkeypatch.delenv(variable)
    return monkeypatch


@pytest.fixture
def settings(clean_env, tmp_path):
    """config/config.yaml without any .env overrides."""
    return load_settings(env_path=tmp_path / "missing.env")


@pytest.fixture
def toy_minlp():
    """
    min x^2 - delta  s.t.  x - 0.5 <= 10 (1 - delta),  x in [-5, 5], delta binary.

    Optimum: delta = 1, x = 0, objective -1.
    """
    x, delta = var(0), var(1)
    problem = NlpProblem.from_exprs(
        n=2,
        objective=x**2 - delta,
        inequalities=[x - 0.5 - 10.0 * (1.0 - delta)],
        lb=[-5.0, 0.0],
        ub=[5.0, 1.0],
    )
    return problem, [1]


@pytest.fixture
def toy_mpvc():
    """
    min (x - 2)^2 - 2 delta  s.t.  delta (x - 1) <= 0 (vanishing),  delta in [0, 1].

    delta = 1 forces x <= 1 (objective -1); delta = 0 gives objective 0.
    """
    x, delta = var(0), var(1)
    problem = NlpProblem.from_exprs(
        n=2,
        objective=(x - 2.0) ** 2 - 2.0 * delta,
        inequalities=[delta * (x - 1.0)],
        lb=[-5.0, 0.0],
        ub=[5.0, 1.0],
        relaxable=[True],
    )
    return problem, [1]


@pytest.fixture
def root_logger():
    """Root logger restored after the test."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield root
    for handler in list(root.handlers):
        root.removeHandler(handler)
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)
