# -*- coding: utf-8 -*-

import numpy as np
import pytest


from newton_scenarios.catalog import build_catalog
from newton_scenarios.datastore import dal
from newton_scenarios.worker_bank import build_bank, queries_from_bank
from newton_scenarios.worker_dynamics import RAW_FEATURE_LENGTH, STATES_PER_ENTRY
from newton_scenarios.worker_matching import EncoderParams, bank_from_columns
from newton_scenarios.worker_store import BankFile, save_bank


@pytest.fixture(scope="session")
def canonical_bank():
    return build_bank()


@pytest.fixture(scope="session")
def canonical_queries(canonical_bank):
    return queries_from_bank(canonical_bank)


@pytest.fixture(scope="session")
def identity_params(canonical_bank):
    return EncoderParams.identity(
        canonical_bank.descriptor_dim, RAW_FEATURE_LENGTH, len(canonical_bank)
    )


@pytest.fixture
def bank_file(canonical_bank, tmp_path):
    """
    Returns path to a freshly saved canonical bank
    """
    fh = tmp_path / "bank.nbk"
    save_bank(str(fh), BankFile(canonical_bank, RAW_FEATURE_LENGTH))
    return str(fh)


@pytest.fixture
def synthetic_bank():
    """
    Returns factory of random banks over the first k catalog entries
    """

    def _make(k=5, dim=6, seed=0):
        rng = np.random.default_rng(seed)
        catalog = build_catalog()[:k]
        columns = [rng.normal(size=(dim, STATES_PER_ENTRY)) for _ in catalog]
        return bank_from_columns(catalog, columns)

    return _make


@pytest.fixture
def mock_home(tmp_path, monkeypatch):
    home = tmp_path / "home"
    home.mkdir()
    monkeypatch.setenv("HOME", str(home))
    monkeypatch.setenv("USERPROFILE", str(home))
    # set first so teardown also removes values written by configure_app
    for var in ("NEWTON_BANK_DIR", "newton_store"):
        monkeypatch.setenv(var, "")
        monkeypatch.delenv(var)
    return home


@pytest.fixture
def fake_yaml_data():
    return (
        '---\nlog_handlers:\n  - console\n  - file\nloggly_token: "spam"\n'
        'bank_dir: "/data/banks"\nledger: false'
    )


@pytest.fixture
def mock_datastore_session():
    # setUp
    dal.conn = "sqlite:///:memory:"
    dal.engine = None
    dal.connect()
    session = dal.Session()
    yield session

    # tearDown
    session.rollback()
    session.close()
    dal.engine.dispose()
    dal.engine = None
    dal.conn = None
