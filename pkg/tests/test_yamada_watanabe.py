import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irregular_em import yamada_watanabe as yw
from irregular_em.quadrature import adaptive_simpson

params_st = st.builds(yw.YwParams, st.floats(1.05, 100.0), st.floats(0.001, 0.99))


def _oracle_prime(p, r):
    # integral of psi from the lower end of the support
    if r <= p.lower:
        return 0.0
    v, _ = adaptive_simpson(lambda z: yw.psi(p, z), p.lower, min(r, p.epsilon), 1e-14)
    return float(v)


def _oracle_phi(p, r):
    v, _ = adaptive_simpson(lambda s: np.array([_oracle_prime(p, t) for t in s]),
                            0.0, r, 1e-11, max_depth=20)
    return float(v)


@given(params_st)
@settings(max_examples=40, deadline=None)
def test_psi_normalized(p):
    v, _ = adaptive_simpson(lambda z: yw.psi(p, z), p.lower, p.epsilon, 1e-13)
    assert abs(float(v) - 1.0) <= 1e-10


@given(params_st, st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_psi_dominated(p, t):
    z = p.lower * p.delta ** t
    assert yw.psi(p, z) <= 2.0 / (z * p.log_delta) * (1 + 1e-12)


def test_psi_touches_ceiling_at_log_midpoint():
    p = yw.YwParams(4.0, 0.5)
    z = p.lower * math.sqrt(p.delta)
    assert yw.psi(p, z) == pytest.approx(2.0 / (z * p.log_delta), rel=1e-14)


@given(params_st, st.floats(-3.0, 3.0))
@settings(max_examples=60, deadline=None)
def test_phi_properties(p, x):
    assert abs(x) <= p.epsilon + yw.yw_phi(p, x) + 1e-12
    assert abs(yw.yw_phi_prime(p, x)) <= 1.0
    second = yw.yw_phi_second(p, x)
    r = abs(x)
    if p.lower < r < p.epsilon:
        assert 0.0 <= second <= 2.0 / (r * p.log_delta) * (1 + 1e-12)
    else:
        assert second == 0.0


@pytest.mark.parametrize("delta, eps", [(2.0, 0.1), (30.0, 0.5), (1.2, 0.01)])
def test_closed_forms_match_quadrature(delta, eps):
    p = yw.YwParams(delta, eps)
    for r in np.linspace(0.0, 1.5 * eps, 13):
        assert yw.yw_phi_prime(p, r) == pytest.approx(_oracle_prime(p, r), abs=1e-12)
        assert yw.yw_phi(p, r) == pytest.approx(_oracle_phi(p, r), abs=1e-10)
        assert yw.yw_phi(p, -r) == yw.yw_phi(p, r)


def test_schedule():
    assert yw.schedule(0.25, 100) == yw.YwParams(2.0, 0.1)
    p0 = yw.schedule(0.0, 1000)
    assert p0.delta == pytest.approx(10.0) and p0.epsilon == pytest.approx(1 / math.log(1000))
    with pytest.raises(ValueError):
        yw.schedule(0.0, 2)


def test_params_validation():
    with pytest.raises(ValueError):
        yw.YwParams(1.0, 0.5)
    with pytest.raises(ValueError):
        yw.YwParams(2.0, 1.0)


def test_dump_csv(tmp_path):
    p = yw.YwParams(2.0, 0.5)
    out = tmp_path / "yw.csv"
    yw.dump_csv(p, [0.0, 0.3, 1.0], out)
    lines = out.read_text().splitlines()
    assert lines[0] == "x,phi,phi_prime,phi_second" and len(lines) == 4
