from __future__ import annotations

import pytest

from cyberquote import data
from cyberquote.maturity import MuRecord
from cyberquote.org import Layer
from cyberquote.pricing import LayerEconomics, Scenario


def retail_economics() -> dict[Layer, LayerEconomics]:
    """Online-retail worked example: v, lambda and kappa per layer, alpha=beta=gamma=1."""
    rows = [(1, 0.05, 100_000.0), (2, 0.02, 200_000.0), (3, 0.01, 300_000.0)]
    return {
        Layer(i): LayerEconomics(Layer(i), v, 1.0, 1.0, 1.0, lam, 0.0, lam)
        for i, v, lam in rows
    }


def retail_mus() -> dict[Layer, MuRecord]:
    """m, p_bar and o are 0.5 / 0.6 / 0.7 on layers 1 / 2 / 3."""
    return {Layer(i): MuRecord(Layer(i), x, x, x) for i, x in [(1, 0.5), (2, 0.6), (3, 0.7)]}


@pytest.fixture
def econ():
    return retail_economics()


@pytest.fixture
def mus():
    return retail_mus()


@pytest.fixture
def full_loss():
    return [Scenario(1.0, 0.0)]


@pytest.fixture
def data_dir():
    return data.DATA_DIR
