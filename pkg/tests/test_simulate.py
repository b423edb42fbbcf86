import io
import math

import numpy as np
import pytest
from scipy import integrate as si

from irregular_em import coefficients as co
from irregular_em import simulate as sim


def test_coarsen_pairwise_is_nested():
    g = sim.sample_grid(1.0, 256, 3, stream=2)
    direct = g.coarse(16)
    twice = sim.coarsen_increments(sim.coarsen_increments(g.increments, 4), 4)
    assert np.array_equal(direct, twice)
    assert math.isclose(direct.sum(), g.increments.sum(), rel_tol=1e-12)


def test_coarsen_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        sim.coarsen_increments(np.zeros(12), 3)
    with pytest.raises(ValueError):
        sim.sample_grid(1.0, 96, 0, base=5)


def test_grid_variance():
    g = sim.sample_grid(2.0, 2 ** 16, 9)
    assert np.var(g.increments) == pytest.approx(2.0 / 2 ** 16, rel=0.03)


@pytest.mark.parametrize("name", ["G1", "G4"])
def test_engine_matches_single_path(name):
    prob = co.gallery_problem(name)
    errs = sim.coupled_errors(prob, (8, 32, 128), 512, 6, 4, block_size=4, chunk=64)
    for s in range(6):
        g = sim.sample_grid(1.0, 512, 4, stream=s)
        ref = sim.em_path(prob, g, 512)
        for i, n in enumerate((8, 32, 128)):
            p = sim.em_path(prob, g, n)
            assert errs.terminal[i, s] == abs(ref.values[-1] - p.values[-1])
            assert errs.sup[i, s] == sim.path_sup_distance(ref, p)


def test_results_independent_of_blocking_and_workers():
    prob = co.gallery_problem("G4")
    a = sim.coupled_errors(prob, (16, 64), 256, 50, 1, block_size=7, workers=1)
    b = sim.coupled_errors(prob, (16, 64), 256, 50, 1, block_size=7, workers=4)
    c = sim.coupled_errors(prob, (16, 64), 256, 50, 1, block_size=50, chunk=16)
    for f in ("terminal", "sup", "stopping"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
        assert np.array_equal(getattr(a, f), getattr(c, f))


def test_env_worker_override(monkeypatch):
    monkeypatch.setenv(sim.THREADS_ENV, "3")
    assert sim.worker_count() == 3
    assert sim.worker_count(2) == 2


def test_stopping_error_bounded_by_sup():
    prob = co.gallery_problem("G1")
    e = sim.coupled_errors(prob, (16, 64), 1024, 200, 2)
    assert np.all(e.stopping <= e.sup) and np.all(e.terminal <= e.sup)


def test_level_must_divide_reference():
    with pytest.raises(ValueError, match="does not divide"):
        sim.coupled_errors(co.gallery_problem("G1"), (48,), 1024, 10, 0)


def test_terminal_values_distribution():
    prob = co.gallery_problem("G5")
    x = sim.terminal_values(prob, 64, 20000, 8)
    assert abs(x.mean()) < 5 / math.sqrt(20000)
    assert x.var() == pytest.approx(1.0, rel=0.05)


def test_modulus_exact_for_brownian_motion():
    # b = 0, sigma = 1: E|W(h/2)|^2 = h/2
    e = sim.modulus_stat(co.gallery_problem("G5"), 64, 2.0, 20000, 1)
    assert e.mean == pytest.approx(1.0 / 128, rel=5 * e.std_error / e.mean)


def _class_a_oracle(n, T=1.0):
    # P(sign change of W between t_k and t_k + u h), integrated over u and summed
    h = T / n
    total = 0.5 * h
    for k in range(1, n):
        t = k * h
        v, _ = si.quad(lambda u: math.acos(math.sqrt(t / (t + u * h))) / math.pi, 0.0, 1.0)
        total += h * v
    return total


@pytest.mark.parametrize("n", [16, 128])
def test_class_a_increment_oracle(n):
    e = sim.class_a_increment_stat(co.gallery_problem("G5"), co.indicator_ge(0.0), n, 1.0,
                                   40000, 12)
    assert abs(e.mean - _class_a_oracle(n)) <= 4 * e.std_error


def test_degenerate_diffusion_rejected():
    diff = co.DiffusionSpec(lambda x: np.abs(x), 1.0, 0.5)
    with pytest.raises(ValueError, match="elliptic"):
        sim.modulus_stat(co.SdeProblem(co.DriftSpec(), diff), 8, 2.0, 10, 0)


def test_binary_dump_roundtrip(tmp_path):
    g = sim.sample_grid(1.5, 64, 1)
    prob = co.gallery_problem("G1", horizon=1.5)
    paths = [sim.em_path(prob, g, 16), sim.em_path(prob, g, 16)]
    buf = io.BytesIO()
    sim.dump_paths(buf, paths, 1.5)
    raw = buf.getvalue()
    assert len(raw) == 24 + 2 * 17 * 8
    assert raw[:8] == np.array([1.5], dtype="<f8").tobytes()
    T, vals = sim.load_paths(io.BytesIO(raw))
    assert T == 1.5 and np.array_equal(vals[0], paths[0].values)
    sim.dump_paths(tmp_path / "p.bin", paths[0], 1.5)
    assert sim.load_paths(tmp_path / "p.bin")[1].shape == (1, 17)
