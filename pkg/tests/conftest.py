import numpy as np
import pytest

from alertrl.stream import TransactionStream, default_calibration, generate_stream


@pytest.fixture(scope="session")
def small_stream():
    """30 calibrated days; shared across read-only tests."""
    return generate_stream(default_calibration(num_days=30, seed=123))


def make_stream(rows):
    """Build a stream from (day, hour, amount, is_fraud, score) tuples."""
    if not rows:
        empty = np.empty(0)
        return TransactionStream(empty, empty, empty, empty, empty)
    day, hour, amount, is_fraud, score = map(np.asarray, zip(*rows))
    return TransactionStream(day, hour, amount, is_fraud, score)
