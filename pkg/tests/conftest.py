import numpy as np
import pytest

from unklearn.dataset import Record, numeric_schema, IntegratedSample


def make_sample(values, labels=None, classification=False):
    """1-D sample from axis values; labels default to the values themselves."""
    labels = values if labels is None else labels
    schema = numeric_schema(1, classification)
    recs = [Record((float(v),), str(l) if classification else float(l)) for v, l in zip(values, labels)]
    return IntegratedSample(tuple(recs), schema)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
