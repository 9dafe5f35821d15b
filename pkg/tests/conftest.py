import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import MaskOracle


_cache: dict[tuple[int, bool], MaskOracle] = {}


def get_oracle(n: int, multiway: bool) -> MaskOracle:
    key = (n, multiway)
    if key not in _cache:
        _cache[key] = MaskOracle(n, multiway)
    return _cache[key]


@pytest.fixture(scope="session")
def oracle_factory():
    return get_oracle
