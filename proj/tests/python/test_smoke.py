import json
import math
import os

import numpy as np
import pytest

import khessian as kh

SOURCE = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def test_elementary_symmetric():
    lam = np.array([1.0, 2.0, 3.0])
    assert kh.elem_sym(lam, 2) == pytest.approx(11.0)
    assert list(kh.elem_sym_all(lam)) == pytest.approx([1.0, 6.0, 11.0, 6.0])
    assert kh.in_gamma_k(np.array([1.0, 1.0, -0.4]), 2)
    assert not kh.in_gamma_k(np.array([1.0, -0.9, -0.9]), 2)


def test_sigma_of_hermitian_matches_eigenvalues():
    rng = np.random.default_rng(3)
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    a = b + b.conj().T
    lam = kh.hermitian_eigenvalues(a)
    assert kh.sigma_k_hermitian(a, 2) == pytest.approx(kh.elem_sym(lam, 2), rel=1e-10, abs=1e-10)


def test_ball_geometry_and_constants():
    d = kh.ball(2)
    assert d.kind == "ball"
    assert kh.inside(d, np.array([0.3, 0.0, 0.0, 0.0]))
    assert kh.signed_distance(d, np.array([0.0, 0.0, 0.5, 0.0])) == pytest.approx(0.5)
    c = kh.glue_constants(d, kh.HessianOrder(2, 1))
    assert c.epsilon1 == pytest.approx(0.0146605, rel=1e-5)
    assert c.r_max == pytest.approx(0.5)


def test_barrier_boundary_values():
    d = kh.ball(2)
    order = kh.HessianOrder(2, 1)
    sub, _ = kh.subsolution(d, order, 0.2)
    assert sub.value(np.array([0.2, 0.0, 0.0, 0.0])) < -1.0
    assert sub.value(np.array([1.0, 0.0, 0.0, 0.0])) == pytest.approx(-1.0, abs=1e-12)


def test_radial_solve_and_report():
    d = kh.ball(2)
    order = kh.HessianOrder(2, 1)
    eps = 0.25 * kh.glue_constants(d, order).epsilon1
    cfg = kh.approx_config(d, order, eps, 0.2)
    p = kh.solve_radial(cfg, order, d, 128)
    assert len(p.rho) == 128
    assert p.f[0] == pytest.approx(cfg.boundary_inner)
    assert p.f[-1] == pytest.approx(cfg.boundary_outer)
    assert np.all(np.diff(np.asarray(p.f)) > 0)
    assert max(abs(x) for x in p.residual) < 1e-8
    exact = kh.solve_radial_exact(cfg, order, d, 128)
    assert max(abs(a - b) for a, b in zip(p.f, exact.f)) < 1e-3
    rep = kh.estimate_report(p, d, order, 0.2)
    assert rep.sandwich_slack >= -1e-9
    doc = json.loads(rep.json())
    assert doc["schema"] == "khessian.estimate_report/1"


def test_errors_are_python_exceptions():
    with pytest.raises(Exception):
        kh.HessianOrder(2, 2)
    d = kh.ball(2)
    order = kh.HessianOrder(2, 1)
    with pytest.raises(kh.ConfigurationError):
        kh.approx_config(d, order, 1.0, 0.2)


def test_cli_round_trip(tmp_path):
    conf = os.path.join(SOURCE, "configs", "ball_n2k1.conf")
    code = kh.run_cli(["solve", "--config", conf, "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "summary.csv").exists()
    assert kh.run_cli(["solve", "--config", str(tmp_path / "missing.conf")]) == 2
