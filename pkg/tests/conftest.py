import pytest
from fractions import Fraction

from boundchain.ensemble import Ensemble
from boundchain.protocols import CorrectionTable, prepare_smolin_direct, werner_ensemble


@pytest.fixture
def table() -> CorrectionTable:
    return CorrectionTable.calibrate()


@pytest.fixture
def abe() -> Ensemble:
    return prepare_smolin_direct()


@pytest.fixture
def werner_half() -> Ensemble:
    return werner_ensemble(Fraction(1, 2))


@pytest.fixture(autouse=True)
def clean_tolerance_env(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv("BOUNDCHAIN_TOLERANCE_EQ", raising=False)
    monkeypatch.delenv("BOUNDCHAIN_TOLERANCE_PPT", raising=False)
