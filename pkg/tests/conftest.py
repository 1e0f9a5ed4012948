import json
from pathlib import Path

import pytest

ORACLE = json.loads(Path(__file__).with_name("oracle_values.json").read_text())


@pytest.fixture(scope="session")
def oracle():
    return {k: float(v) for k, v in ORACLE.items()}


def rel_close(x, y, digits=10):
    """Agreement to ``digits`` significant digits."""
    return abs(x - y) <= 10.0 ** (-digits) * max(abs(y), 1e-300)
