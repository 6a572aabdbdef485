import numpy as np
import pytest

from relulasso import DataMatrix, Labels


@pytest.fixture
def demo_X() -> DataMatrix:
    """Three planar points, two of them collinear with the origin."""
    return DataMatrix(np.array([[2.0, 3.0, 1.0], [2.0, 3.0, 0.0]]))


@pytest.fixture
def demo_y() -> Labels:
    return Labels(np.array([1.0, 2.0, 3.0]))
