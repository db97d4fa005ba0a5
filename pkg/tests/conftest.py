import numpy as np
import pytest

from causerank.model import FamilyTable, FeatureFamily, TimeIndex
from causerank.perf import tune

tune()


@pytest.fixture
def small_index() -> TimeIndex:
    return TimeIndex(start_ts=0, end_ts=199, step=1)


def make_family(key: str, matrix: np.ndarray, metrics=None) -> FeatureFamily:
    names = tuple(f"{key}{{f={i}}}" for i in range(matrix.shape[1]))
    return FeatureFamily(
        family_key=key,
        feature_names=names,
        matrix=matrix,
        metrics=tuple(metrics) if metrics else (),
    )


@pytest.fixture
def three_family_table(small_index) -> FamilyTable:
    rng = np.random.default_rng(7)
    T = len(small_index)
    return FamilyTable(
        small_index,
        [
            make_family("A", rng.standard_normal((T, 2))),
            make_family("B", rng.standard_normal((T, 1))),
            make_family("C", rng.standard_normal((T, 3))),
        ],
    )
