import math
import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from telereset.protocol import UnknownQubit

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

R2 = 1 / math.sqrt(2)
WORKED = UnknownQubit(1j * R2, (1 + 1j) / 2)
PLUS = UnknownQubit(R2, R2)


@st.composite
def qubits(draw, min_weight: float = 0.0):
    """Random normalized (a, b) with min(|a|^2, |b|^2) >= min_weight."""
    p = draw(st.floats(min_weight, 1 - min_weight))
    pa = draw(st.floats(0, 2 * math.pi))
    pb = draw(st.floats(0, 2 * math.pi))
    a = math.sqrt(p) * complex(math.cos(pa), math.sin(pa))
    b = math.sqrt(1 - p) * complex(math.cos(pb), math.sin(pb))
    return UnknownQubit.normalized(a, b)


def random_qubits(n: int, seed: int, min_weight: float = 0.0) -> list[UnknownQubit]:
    """Haar-ish random qubits, optionally bounded away from the poles."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        v = rng.normal(size=4)
        a, b = complex(v[0], v[1]), complex(v[2], v[3])
        n2 = abs(a) ** 2 + abs(b) ** 2
        if min(abs(a) ** 2, abs(b) ** 2) / n2 <= min_weight:
            continue
        out.append(UnknownQubit.normalized(a, b))
    return out


@pytest.fixture
def worked():
    return WORKED


@pytest.fixture
def plus():
    return PLUS
