import numpy as np
import pytest
from hypothesis import given, strategies as st

from swipt_secrecy.conic import (
    Affine,
    ConicProgram,
    LmiBlock,
    SolverOptions,
    Status,
    embed_hermitian,
    quad,
    solve,
)

from conftest import random_hermitian


def test_scalar_lower_bound():
    p = ConicProgram()
    x = p.variable()
    p.add_ge(x, 3.0)
    p.minimize(x)
    r = solve(p)
    assert r.status is Status.OPTIMAL
    assert r.objective_value == pytest.approx(3.0, abs=1e-6)
    assert r.max_violation <= 1e-6


def test_trace_above_identity():
    p = ConicProgram()
    X = p.hermitian(2, "X")
    p.add_lmi(X - np.eye(2))
    p.minimize(X.trace().real)
    r = solve(p)
    assert r.status is Status.OPTIMAL
    assert r.objective_value == pytest.approx(2.0, abs=1e-6)
    assert np.allclose(X.value(r.primal), np.eye(2), atol=1e-5)


def test_infeasible_and_unbounded():
    p = ConicProgram()
    x = p.variable()
    p.add_ge(x, 1.0)
    p.add_le(x, 0.0)
    p.minimize(x)
    assert solve(p).status is Status.INFEASIBLE

    q = ConicProgram()
    y = q.variable()
    q.minimize(y)
    assert solve(q).status is Status.UNBOUNDED


def test_mrt_power():
    """max |h^H w|^2 with ||w||^2 <= P via the lifted SDP gives P ||h||^2."""
    h = np.array([1 + 1j, 0.5, -2j])
    P = 3.0
    p = ConicProgram()
    X = p.hermitian(3, "X", psd=True)
    p.add_le(X.trace().real, P)
    p.maximize(quad(h, X))
    r = solve(p)
    assert r.status is Status.OPTIMAL
    assert r.objective_value == pytest.approx(P * np.linalg.norm(h) ** 2, rel=1e-6)


def test_soc_and_exp_cones():
    p = ConicProgram()
    x = p.variable(2)
    t = p.variable()
    p.add_soc(t, x - np.array([3.0, 4.0]))
    p.minimize(t)
    r = solve(p)
    assert r.objective_value == pytest.approx(0.0, abs=1e-6)

    # minimize z subject to exp(x) <= z, x >= 1
    q = ConicProgram()
    x = q.variable()
    z = q.variable()
    q.add_ge(x, 1.0)
    q.add_exp(x, Affine(1.0), z)
    q.minimize(z)
    r = solve(q)
    assert r.status is Status.OPTIMAL
    assert r.objective_value == pytest.approx(np.e, rel=1e-6)


def test_complex_rows_rejected():
    p = ConicProgram()
    w = p.complex_variable(2)
    with pytest.raises(TypeError):
        p.add_ge(w[0])


def test_non_hermitian_lmi_rejected():
    with pytest.raises(ValueError):
        LmiBlock(Affine(np.array([[1.0, 2.0], [0.0, 1.0]])))


def test_embed_example():
    H = np.array([[2, 1j], [-1j, 2]])
    E = embed_hermitian(H)
    assert np.allclose(E, E.T)
    assert np.allclose(np.linalg.eigvalsh(E), [1, 1, 3, 3])


def test_embed_rejects_non_hermitian():
    with pytest.raises(ValueError):
        embed_hermitian(np.array([[1, 1j], [1j, 1]]))


@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_embed_doubles_spectrum(n, seed):
    H = random_hermitian(np.random.default_rng(seed), n)
    ev = np.linalg.eigvalsh(H)
    assert np.allclose(np.linalg.eigvalsh(embed_hermitian(H)), np.sort(np.repeat(ev, 2)), atol=1e-9)


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_hermitian_variable_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, n)
    p = ConicProgram()
    X = p.hermitian(n)
    p.add_eq(X.real, H.real)
    p.add_eq(X.imag, H.imag)
    p.minimize(Affine(0.0) + 0 * X.trace().real)
    r = solve(p)
    assert r.status is Status.OPTIMAL
    assert np.allclose(X.value(r.primal), H, atol=1e-6)


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_lmi_min_eig_matches_embedding(n, seed):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, n)
    blk = LmiBlock(Affine(H))
    assert blk.min_eig(np.zeros(0)) == pytest.approx(np.linalg.eigvalsh(embed_hermitian(H))[0], abs=1e-9)


def test_affine_algebra():
    p = ConicProgram()
    x = p.variable(3)
    A = np.arange(6.0).reshape(2, 3)
    e = A @ x + 2.0
    v = np.array([1.0, -1.0, 0.5])
    assert np.allclose(e.value(v), A @ v + 2)
    assert np.allclose((x - x).value(v), 0)
    assert (3 * x).value(v)[1] == pytest.approx(-3)


def test_dump_writes_listing(tmp_path):
    p = ConicProgram("demo")
    X = p.hermitian(2, psd=True)
    p.add_le(X.trace().real, 1.0)
    p.maximize(X[0, 0].real)
    out = tmp_path / "prog.txt"
    p.dump(out)
    text = out.read_text()
    assert "conic program demo" in text and "lmi" in text


def test_verbose_env(monkeypatch):
    monkeypatch.setenv("SWIPT_SOLVER_VERBOSE", "1")
    assert SolverOptions().resolved_verbose()
    monkeypatch.setenv("SWIPT_SOLVER_VERBOSE", "0")
    assert not SolverOptions().resolved_verbose()
    assert SolverOptions(verbose=True).resolved_verbose()
