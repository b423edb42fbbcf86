import math

import numpy as np
import pytest

from irregular_em import coefficients as co
from irregular_em import transform as tr


def _box_problem():
    # b = 1[0 < x < 1], sigma = 1: f = -2 * clip(x, 0, 1), phi has a closed form
    drift = co.DriftSpec(co.indicator_gt(0.0) * co.indicator_lt(1.0), None, 1.0, 1.0)
    return co.SdeProblem(drift, co.DiffusionSpec(lambda x: np.ones_like(x), 1.0, 0.5, constant=1.0))


def _box_phi(x):
    x = np.asarray(x, dtype=float)
    inner = (1.0 - np.exp(-2.0 * np.clip(x, 0.0, 1.0))) / 2.0
    return np.where(x < 0.0, x, np.where(x <= 1.0, inner, inner + math.exp(-2.0) * (x - 1.0)))


@pytest.fixture(scope="module")
def box():
    return tr.build_transform(_box_problem(), -3.0, 4.0)


def test_phi_closed_form(box):
    x = np.linspace(-3.0, 4.0, 7777)
    assert np.max(np.abs(tr.phi(box, x) - _box_phi(x))) < 1e-8
    assert np.max(np.abs(box.phi_values - _box_phi(box.grid))) < 1e-11


def test_phi_prime_and_second(box):
    assert tr.phi_prime(box, 0.5) == pytest.approx(math.exp(-1.0), rel=1e-13)
    assert tr.phi_prime(box, -1.0) == pytest.approx(1.0, rel=1e-13)
    assert tr.phi_second(box, 0.5) == pytest.approx(-2.0 * math.exp(-1.0), rel=1e-13)
    assert tr.phi_second(box, 2.0) == 0.0


def test_f_quadrature_matches_nodes(box):
    x = np.array([-2.3, 0.3, 0.77, 3.1])
    assert np.allclose(tr.f_quadrature(box, x), -2.0 * np.clip(x, 0.0, 1.0), atol=1e-11)


def test_inverse(box):
    z = np.linspace(box.phi_lo, box.phi_hi, 5001)
    x = tr.phi_inverse(box, z)
    assert np.max(np.abs(tr.phi(box, x) - z)) <= 10 * box.quad_tol
    assert tr.phi_inverse(box, tr.phi(box, 0.25)) == pytest.approx(0.25, abs=1e-9)


def test_range_errors(box):
    with pytest.raises(tr.TransformRangeError):
        tr.phi(box, 5.0)
    with pytest.raises(tr.TransformRangeError):
        tr.phi_inverse(box, box.phi_hi + 1.0)


def test_non_integrable_rejected():
    with pytest.raises(tr.NonIntegrableDriftError, match="truncate_drift"):
        tr.build_transform(co.gallery_problem("G1"))


@pytest.mark.parametrize("name", ["G2", "G3", "G4", "G6"])
def test_pde_identity_and_slope_bounds(name):
    prob = co.gallery_problem(name)
    tb = tr.build_transform(prob)
    x = np.random.default_rng(0).uniform(tb.x_lo, tb.x_hi, 2000)
    s = prob.diffusion(x)
    resid = prob.drift(x) * tr.phi_prime(tb, x) + 0.5 * s * s * tr.phi_second(tb, x)
    assert np.max(np.abs(resid)) <= 1e-14 * (1 + np.max(np.abs(prob.drift(x) * tr.phi_prime(tb, x))))
    slopes = np.diff(tb.phi_values) / np.diff(tb.grid)
    assert slopes.min() >= 1 / tb.c0 - 1e-9 and slopes.max() <= tb.c0 + 1e-9


def test_finite_difference_of_f_matches_drift():
    prob = co.gallery_problem("G3", beta=0.5)
    tb = tr.build_transform(prob)
    x = np.array([-0.6, -0.2, 0.4, 0.9])
    h = 1e-5
    fd = (tr.f_quadrature(tb, x + h) - tr.f_quadrature(tb, x - h)) / (2 * h)
    assert np.allclose(fd, -2.0 * prob.drift(x), atol=1e-6)


def test_c0():
    assert tr.c0_constant(1.0, 1.0) == pytest.approx(math.e ** 2)


def test_martingale_small():
    prob = co.gallery_problem("G6")
    tb = tr.build_transform(prob)
    rep = tr.martingale_diagnostic(prob, tb, 256, 4000, 5)
    assert abs(rep.z_score) < 4.0 and rep.clamp_count == 0


def test_export_csv(tmp_path, box):
    out = tmp_path / "phi.csv"
    tr.export_csv(box, out)
    rows = out.read_text().splitlines()
    assert rows[0] == "x,f,phi,phi_prime" and len(rows) == len(box.grid) + 1
