"""Joint covariance / artificial-noise designs.

Two families of solvers for  max min_k R_s - R_e,k  over (Q_s, W):

* line search over t in [t_min, 1]: for fixed t the inner problem is a
  linear-fractional SDP, turned into a plain SDP with the Charnes-Cooper
  scaling Q_s = Q_bar / delta, W = W_bar / delta;
* SCA on exponential variables: the objective max_k (1 + SINR_e,k)/(1 + SINR_s)
  becomes exp(y0 - x0 + yk - xk) <= tau, and the concave sides are linearized
  around the current point.

Robust versions replace every quadratic form by its worst case over the
uncertainty ball, written as S-procedure LMIs.  With a zero radius the
S-procedure is only exact in the limit of an infinite multiplier, so zero-radius
rows are written as the plain scalar constraint instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    BeamformerSolution,
    ChannelSet,
    Kind,
    SystemParams,
    UncertaintyModel,
    harvested_energy,
    secrecy_rate,
)
from .conic import Affine, ConicProgram, SolverOptions, Status, quad, solve
from .lmi import s_procedure_lmi, worst_case_quadratic


@dataclass
class AnOptions:
    linesearch_points: int = 100
    refine_points: int = 20
    refine: str = "grid"  # "grid": evenly spaced second pass; "brent": bounded Brent search in log t
    brent_xtol: float = 1e-4
    rank_one_stage: bool = True
    rank_stage_threshold: float = 1e-6  # second stage only when the first answer is further from rank one
    sca_tol: float = 1e-4  # kappa, on |tau(n+1) - tau(n)|
    sca_relative: bool = True  # stop on kappa * min(1, tau): tau is tiny at high SNR
    sca_max_iter: int = 50
    two_dim_points: int = 30
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class LineSearchState:
    t: float
    f_of_t: float
    delta: float
    best_objective: float


@dataclass
class InnerSolution:
    status: Status
    t: float
    f: float = float("nan")
    Q_s: np.ndarray | None = None
    W: np.ndarray | None = None
    delta: float = float("nan")

    def __iter__(self):
        return iter((self.f, self.Q_s, self.W))

    @property
    def objective(self):
        if self.status != Status.OPTIMAL:
            return -np.inf
        return float(np.log2(1.0 + max(self.f, 0.0)) + np.log2(self.t))


@dataclass
class ScaAnState:
    x0: float
    y0: float
    xk: np.ndarray
    yk: np.ndarray
    tau: float
    multipliers: dict = field(default_factory=dict)
    slacks: dict = field(default_factory=dict)


@dataclass
class RankReport:
    eigenvalues: np.ndarray
    residual: float
    extracted_w: np.ndarray


# -- small helpers -------------------------------------------------------------

def default_an_params(n_t, P, eta=0.1, L=1, per_antenna=True):
    """E_l = eta P on every receiver and per-antenna caps 2P/n_t."""
    return SystemParams(n_t, P, p_i=2.0 * P / n_t if per_antenna else None, E_targets=np.full(L, eta * P))


def t_min(ch: ChannelSet, P: float) -> float:
    return 1.0 / (1.0 + P * np.linalg.norm(ch.h_s) ** 2 / ch.sigma_s2)


def psd_repair(X):
    """Hermitian part with negative eigenvalues clipped to zero."""
    X = 0.5 * (X + X.conj().T)
    d, V = np.linalg.eigh(X)
    return (V * np.maximum(d, 0.0)) @ V.conj().T


def extract_rank_one(Q, tol=1e-8) -> RankReport:
    Q = np.asarray(Q, dtype=complex)
    if np.max(np.abs(Q - Q.conj().T)) > 1e-9 * max(1.0, np.max(np.abs(Q))):
        raise ValueError("matrix is not Hermitian")
    d, V = np.linalg.eigh(0.5 * (Q + Q.conj().T))
    if d[0] < -tol:
        raise ValueError(f"matrix is indefinite (min eigenvalue {d[0]:.3e})")
    d, V = d[::-1], V[:, ::-1]
    total = float(np.sum(np.maximum(d, 0.0)))
    residual = 0.0 if total <= 0 else float(max(0.0, 1.0 - d[0] / total))
    return RankReport(d, residual, np.sqrt(max(d[0], 0.0)) * V[:, 0])


def _zeros(n):
    return Affine(np.zeros((n, n), dtype=complex))


def _cov_program(n, use_an, name):
    prog = ConicProgram(name)
    Q = prog.hermitian(n, "Q", psd=True)
    W = prog.hermitian(n, "W", psd=True) if use_an else _zeros(n)
    return prog, Q, W


def _power_rows(prog, X, scale, params, eps_A=None):
    """Tr X <= scale P and the (possibly robust) per-antenna rows."""
    prog.add_le(X.trace().real, scale * params.P)
    if params.p_i is None:
        return
    frob = None
    for i, cap in enumerate(params.p_i):
        lhs = X[i, i].real
        if eps_A is not None and eps_A[i] > 0:
            if frob is None:
                frob = prog.variable(name="frob")
                prog.add_soc(frob, X)
            lhs = lhs + eps_A[i] * frob
        prog.add_le(lhs, scale * cap)


def _robust_ge(prog, M, h, eps, rhs, name):
    """(h + e)^H M (h + e) >= rhs for every ||e|| <= eps; returns the multiplier."""
    if eps == 0:
        prog.add_ge(quad(h, M), rhs)
        return None
    a = prog.variable(name=name, nonneg=True)
    prog.add_lmi(s_procedure_lmi(M, h, eps, rhs, a, name))
    return a


def _value(x, expr):
    return None if expr is None else float(np.real(expr.value(x)))


def _hval(x, X):
    v = X.value(x)
    return 0.5 * (v + v.conj().T)


def _finish_pair(Q, W, ch, status, it, objective, trace, t0, **info):
    Q = psd_repair(Q)
    W = psd_repair(W)
    return BeamformerSolution(
        kind=Kind.COVARIANCE,
        solver_status=status,
        Q_s=Q,
        W=W,
        achieved_rate=secrecy_rate((Q, W), ch),
        achieved_energy=harvested_energy((Q, W), ch),
        iterations=it,
        objective=float(objective),
        trace=list(trace),
        solve_time=time.perf_counter() - t0,
        info=info,
    )


def _check_t(t, tmin):
    if not (tmin * (1 - 1e-12) <= t <= 1.0 + 1e-12):
        raise ValueError(f"t={t} outside [{tmin}, 1]")


# -- perfect CSI: line search ----------------------------------------------------

def inner_f_of_t(t, ch: ChannelSet, params: SystemParams, opts: AnOptions | None = None, use_an=True) -> InnerSolution:
    """f(t): best user SINR with every eavesdropper rate at most log2(1/t)."""
    opts = opts or AnOptions()
    _check_t(t, t_min(ch, params.P))
    n = ch.n_t
    c = 1.0 / t - 1.0
    prog, Qb, Wb = _cov_program(n, use_an, "inner-cc")
    d = prog.variable(name="delta", nonneg=True)
    prog.add_eq(quad(ch.h_s, Wb) + ch.sigma_s2 * d, 1.0)
    for k in range(ch.K):
        prog.add_le(quad(ch.h_e[k], Qb - c * Wb), (c * ch.sigma_e2) * d)
    X = Qb + Wb
    _power_rows(prog, X, d, params)
    E = params.energy_targets(ch.L)
    for l in range(ch.L):
        if E[l] > 0:
            prog.add_ge(quad(ch.h_p[l], X), E[l] * d)
    prog.maximize(quad(ch.h_s, Qb))
    rep = solve(prog, opts.solver)
    if rep.status != Status.OPTIMAL:
        return InnerSolution(rep.status, t)
    delta = _value(rep.primal, d)
    if delta <= 1e-10:
        return InnerSolution(Status.NUMERICAL_FAILURE, t, delta=delta)
    Q = psd_repair(_hval(rep.primal, Qb) / delta)
    W = psd_repair(_hval(rep.primal, Wb) / delta)
    f = _sinr(ch.h_s, Q, W, ch.sigma_s2)
    return InnerSolution(Status.OPTIMAL, t, f, Q, W, delta)


def _sinr(h, Q, W, s2):
    return float(np.vdot(h, Q @ h).real / (np.vdot(h, W @ h).real + s2))


def _rank_one_stage(ch, params, t, f, use_an, opts, um=None):
    """min Tr(Q_s + W) keeping SINR >= f and the t-level eavesdropper rows.

    Any feasible point is optimal for the inner problem; the minimum-power
    one is rank one for Q_s.  A relative slack of 1e-6 on f keeps the
    problem strictly feasible.
    """
    n = ch.n_t
    c = 1.0 / t - 1.0
    fs = f * (1.0 - 1e-6)
    prog, Q, W = _cov_program(n, use_an, "rank-one")
    X = Q + W
    E = params.energy_targets(ch.L)
    if um is None:
        prog.add_ge(quad(ch.h_s, Q - fs * W), fs * ch.sigma_s2)
        for k in range(ch.K):
            prog.add_le(quad(ch.h_e[k], Q - c * W), c * ch.sigma_e2)
        for l in range(ch.L):
            if E[l] > 0:
                prog.add_ge(quad(ch.h_p[l], X), E[l])
        _power_rows(prog, X, 1.0, params)
    else:
        _robust_ge(prog, Q - fs * W, ch.h_s, um.eps_s, fs * ch.sigma_s2, "beta_s")
        for k in range(ch.K):
            _robust_ge(prog, c * W - Q, ch.h_e[k], um.eps_e[k], -c * ch.sigma_e2, f"lambda_e{k}")
        for l in range(ch.L):
            if E[l] > 0:
                _robust_ge(prog, X, ch.h_p[l], um.eps_l[l], E[l], f"alpha_{l}")
        _power_rows(prog, X, 1.0, params, um.eps_A)
    prog.minimize(X.trace().real)
    rep = solve(prog, opts.solver)
    if rep.status != Status.OPTIMAL:
        return None
    return psd_repair(_hval(rep.primal, Q)), psd_repair(_hval(rep.primal, W))


_RETRY = (Status.MAX_ITER, Status.NUMERICAL_FAILURE)


def _with_retry(evaluate, tmin):
    # Clarabel now and then stalls at an isolated t; a relative nudge of
    # 1e-7 is far below the search resolution and usually clears it.
    def wrapped(t):
        e = evaluate(t)
        for s in (1 - 1e-7, 1 + 1e-7):
            if e.status not in _RETRY:
                break
            ts = min(max(t * s, tmin), 1.0)
            if ts != t:
                e = evaluate(ts)
        return e

    return wrapped


def _line_search(evaluate, tmin, opts):
    """Coarse log grid over [tmin, 1] plus one finer pass around the best point."""
    if opts.refine not in ("grid", "brent"):
        raise ValueError(f"unknown refine mode {opts.refine!r}")
    evaluate = _with_retry(evaluate, tmin)
    grid = np.geomspace(tmin, 1.0, max(opts.linesearch_points, 2))
    evals = [evaluate(t) for t in grid]
    history = [(float(e.t), e.objective) for e in evals]
    best_i = int(np.argmax([e.objective for e in evals]))
    best = evals[best_i]
    if best.status != Status.OPTIMAL:
        return best, evals, history
    lo = grid[max(best_i - 1, 0)]
    hi = grid[min(best_i + 1, len(grid) - 1)]
    if opts.refine == "brent":
        from scipy.optimize import minimize_scalar

        seen = {}

        def neg(logt):
            e = evaluate(float(np.exp(logt)))
            seen[logt] = e
            history.append((float(e.t), e.objective))
            return -e.objective if e.status == Status.OPTIMAL else 1e30

        minimize_scalar(neg, bounds=(np.log(lo), np.log(hi)), method="bounded", options={"xatol": opts.brent_xtol})
        for e in seen.values():
            if e.status == Status.OPTIMAL and e.objective > best.objective:
                best = e
    elif opts.refine_points > 0:
        for t in np.geomspace(lo, hi, opts.refine_points + 2)[1:-1]:
            e = evaluate(float(t))
            history.append((float(t), e.objective))
            if e.objective > best.objective:
                best = e
    return best, evals, history


def _linesearch_solution(best, history, ch, params, opts, use_an, t0, um=None):
    if best.status != Status.OPTIMAL:
        statuses = {str(v) for v in (best.status,)}
        status = Status.INFEASIBLE if best.status == Status.INFEASIBLE else best.status
        return BeamformerSolution.failed(Kind.COVARIANCE, status, len(history), history=history, statuses=statuses)
    Q, W = best.Q_s, best.W
    stage = "skipped"
    if opts.rank_one_stage and extract_rank_one(Q).residual > opts.rank_stage_threshold:
        out = _rank_one_stage(ch, params, best.t, best.f, use_an, opts, um)
        if out is None:
            stage = "failed"
        else:
            Q, W = out
            stage = "ok"
    state = LineSearchState(best.t, best.f, best.delta, best.objective)
    rank = extract_rank_one(Q)
    return _finish_pair(
        Q, W, ch, Status.OPTIMAL, len(history), best.objective, [h[1] for h in history], t0,
        state=state, history=history, rank=rank, rank_stage=stage,
    )


def max_secrecy_linesearch(ch: ChannelSet, params: SystemParams, opts: AnOptions | None = None, use_an=True) -> BeamformerSolution:
    opts = opts or AnOptions()
    t0 = time.perf_counter()
    if params.P <= 0:
        raise ValueError("line search needs P > 0")
    best, _, history = _line_search(lambda t: inner_f_of_t(t, ch, params, opts, use_an), t_min(ch, params.P), opts)
    return _linesearch_solution(best, history, ch, params, opts, use_an, t0)


# -- robust line search ------------------------------------------------------------

def robust_inner_f_of_t(t, um: UncertaintyModel, params: SystemParams, opts: AnOptions | None = None, use_an=True) -> InnerSolution:
    """Worst-case f(t): the returned f lower-bounds the user SINR over the whole ball."""
    opts = opts or AnOptions()
    ch = um.nominal
    _check_t(t, t_min(ch, params.P))
    n = ch.n_t
    c = 1.0 / t - 1.0
    prog, Qb, Wb = _cov_program(n, use_an, "robust-inner-cc")
    d = prog.variable(name="delta", nonneg=True)
    tau = prog.variable(name="tau")
    _robust_ge(prog, Qb, ch.h_s, um.eps_s, tau, "lambda_s")
    if use_an:
        _robust_ge(prog, -Wb, ch.h_s, um.eps_s, ch.sigma_s2 * d - 1.0, "mu_s")
    else:
        prog.add_le(ch.sigma_s2 * d, 1.0)
    for k in range(ch.K):
        _robust_ge(prog, c * Wb - Qb, ch.h_e[k], um.eps_e[k], (-c * ch.sigma_e2) * d, f"lambda_e{k}")
    X = Qb + Wb
    E = params.energy_targets(ch.L)
    for l in range(ch.L):
        if E[l] > 0:
            _robust_ge(prog, X, ch.h_p[l], um.eps_l[l], E[l] * d, f"alpha_{l}")
    _power_rows(prog, X, d, params, um.eps_A)
    prog.maximize(tau)
    rep = solve(prog, opts.solver)
    if rep.status != Status.OPTIMAL:
        return InnerSolution(rep.status, t)
    delta = _value(rep.primal, d)
    if delta <= 1e-10:
        return InnerSolution(Status.NUMERICAL_FAILURE, t, delta=delta)
    Q = psd_repair(_hval(rep.primal, Qb) / delta)
    W = psd_repair(_hval(rep.primal, Wb) / delta)
    return InnerSolution(Status.OPTIMAL, t, _value(rep.primal, tau), Q, W, delta)


def robust_max_secrecy_linesearch(um: UncertaintyModel, params: SystemParams, opts: AnOptions | None = None, use_an=True) -> BeamformerSolution:
    opts = opts or AnOptions()
    t0 = time.perf_counter()
    if params.P <= 0:
        raise ValueError("line search needs P > 0")
    ch = um.nominal
    best, _, history = _line_search(lambda t: robust_inner_f_of_t(t, um, params, opts, use_an), t_min(ch, params.P), opts)
    return _linesearch_solution(best, history, ch, params, opts, use_an, t0, um)


# -- SCA on exponential variables -----------------------------------------------

def sca_initial_point(ch: ChannelSet, params: SystemParams, use_an=True):
    """MRT signal with 80% of P plus isotropic AN with 20%, scaled to the per-antenna caps."""
    n, P = ch.n_t, params.P
    h = ch.h_s
    if use_an:
        Q0 = 0.8 * P * np.outer(h, h.conj()) / np.vdot(h, h).real
        W0 = 0.2 * P / n * np.eye(n, dtype=complex)
    else:
        Q0 = P * np.outer(h, h.conj()) / np.vdot(h, h).real
        W0 = np.zeros((n, n), dtype=complex)
    if params.p_i is not None:
        diag = np.real(np.diag(Q0 + W0))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(diag > 0, params.p_i / diag, np.inf)
        s = min(1.0, float(np.min(ratio)))
        Q0, W0 = s * Q0, s * W0
    return Q0, W0


def _worst(M, h, eps, maximize):
    return worst_case_quadratic(M, h, eps, maximize) if eps > 0 else float(np.vdot(h, M @ h).real)


def _y_refs(ch, Q, W, um=None):
    """y-hat at a point: logs of the (worst-case) eavesdropper totals and user interference."""
    X = Q + W
    if um is None:
        yk = np.log(ch.sigma_e2 + np.einsum("ki,ij,kj->k", ch.h_e.conj(), X, ch.h_e).real)
        y0 = np.log(ch.sigma_s2 + np.vdot(ch.h_s, W @ ch.h_s).real)
        return y0, yk
    yk = np.log(ch.sigma_e2 + np.array([_worst(X, ch.h_e[k], um.eps_e[k], True) for k in range(ch.K)]))
    y0 = np.log(ch.sigma_s2 + max(_worst(W, ch.h_s, um.eps_s, True), 0.0))
    return y0, yk


def secrecy_ratio(ch, Q, W):
    """max_k (1 + SINR_e,k) / (1 + SINR_s); the SCA objective tau."""
    X = Q + W
    ts = ch.sigma_s2 + np.vdot(ch.h_s, X @ ch.h_s).real
    rs = ch.sigma_s2 + np.vdot(ch.h_s, W @ ch.h_s).real
    te = ch.sigma_e2 + np.einsum("ki,ij,kj->k", ch.h_e.conj(), X, ch.h_e).real
    re = ch.sigma_e2 + np.einsum("ki,ij,kj->k", ch.h_e.conj(), W, ch.h_e).real
    return float(np.max(te * rs / (ts * re)))


def _sca_step(ch, params, y0_hat, yk_hat, use_an, opts, um=None):
    n, K = ch.n_t, ch.K
    prog, Q, W = _cov_program(n, use_an, "sca-exp" if um is None else "robust-sca-exp")
    X = Q + W
    x0 = prog.variable(name="x0")
    y0 = prog.variable(name="y0")
    xk = prog.variable(K, name="xk")
    yk = prog.variable(K, name="yk")
    log_tau = prog.variable(name="log_tau")
    mult, slacks = {}, {}
    # exp(y0 - x0 + yk - xk) <= tau, kept in log form: tau itself spans many decades at high SNR
    for k in range(K):
        prog.add_le(y0 - x0 + yk[k] - xk[k], log_tau)
    E = params.energy_targets(ch.L)
    if um is None:
        prog.add_exp(x0, 1.0, ch.sigma_s2 + quad(ch.h_s, X))
        for k in range(K):
            prog.add_exp(xk[k], 1.0, ch.sigma_e2 + quad(ch.h_e[k], W))
            ek = np.exp(yk_hat[k])
            prog.add_le(ch.sigma_e2 + quad(ch.h_e[k], X), ek * (yk[k] - yk_hat[k] + 1.0))
        prog.add_le(ch.sigma_s2 + quad(ch.h_s, W), np.exp(y0_hat) * (y0 - y0_hat + 1.0))
        for l in range(ch.L):
            if E[l] > 0:
                prog.add_ge(quad(ch.h_p[l], X), E[l])
        _power_rows(prog, X, 1.0, params)
    else:
        u_s = prog.variable(name="u_s")
        u_e = prog.variable(K, name="u_e")
        v_s = prog.variable(name="v_s")
        v_e = prog.variable(K, name="v_e")
        slacks = {"u_s": u_s, "u_e": u_e, "v_s": v_s, "v_e": v_e}
        prog.add_exp(x0, 1.0, ch.sigma_s2 + u_s)
        mult["lambda_s"] = _robust_ge(prog, X, ch.h_s, um.eps_s, u_s, "lambda_s")
        mult["beta_s"] = _robust_ge(prog, -W, ch.h_s, um.eps_s, -v_s, "beta_s")
        prog.add_le(ch.sigma_s2 + v_s, np.exp(y0_hat) * (y0 - y0_hat + 1.0))
        for k in range(K):
            prog.add_exp(xk[k], 1.0, ch.sigma_e2 + u_e[k])
            mult[f"lambda_e{k}"] = _robust_ge(prog, W, ch.h_e[k], um.eps_e[k], u_e[k], f"lambda_e{k}")
            mult[f"beta_e{k}"] = _robust_ge(prog, -X, ch.h_e[k], um.eps_e[k], -v_e[k], f"beta_e{k}")
            prog.add_le(ch.sigma_e2 + v_e[k], np.exp(yk_hat[k]) * (yk[k] - yk_hat[k] + 1.0))
        for l in range(ch.L):
            if E[l] > 0:
                mult[f"alpha_{l}"] = _robust_ge(prog, X, ch.h_p[l], um.eps_l[l], E[l], f"alpha_{l}")
        _power_rows(prog, X, 1.0, params, um.eps_A)
    prog.minimize(log_tau)
    rep = solve(prog, opts.solver)
    if rep.status != Status.OPTIMAL:
        return rep.status, None
    x = rep.primal
    state = ScaAnState(
        x0=_value(x, x0),
        y0=_value(x, y0),
        xk=np.real(xk.value(x)),
        yk=np.real(yk.value(x)),
        tau=float(np.exp(_value(x, log_tau))),
        multipliers={k: _value(x, v) for k, v in mult.items() if v is not None},
        slacks={k: np.real(v.value(x)) for k, v in slacks.items()},
    )
    return Status.OPTIMAL, (_hval(x, Q), _hval(x, W), state)


def _sca_rank_one_stage(ch, params, Q, W, use_an, opts, um=None):
    """Minimum-power point with the same four (worst-case) quadratic levels."""
    lo, hi = 1.0 - 1e-7, 1.0 + 1e-7
    X = Q + W
    if um is None:
        eps_s, eps_e, eps_l = 0.0, np.zeros(ch.K), np.zeros(ch.L)
    else:
        eps_s, eps_e, eps_l = um.eps_s, um.eps_e, um.eps_l
    a0 = _worst(X, ch.h_s, eps_s, False)
    b0 = _worst(W, ch.h_s, eps_s, True)
    ak = [_worst(W, ch.h_e[k], eps_e[k], False) for k in range(ch.K)]
    bk = [_worst(X, ch.h_e[k], eps_e[k], True) for k in range(ch.K)]
    prog, Qv, Wv = _cov_program(ch.n_t, use_an, "sca-rank-one")
    Xv = Qv + Wv
    _robust_ge(prog, Xv, ch.h_s, eps_s, a0 * lo, "lambda_s")
    if use_an:
        _robust_ge(prog, -Wv, ch.h_s, eps_s, -b0 * hi - 1e-9, "beta_s")
    for k in range(ch.K):
        if use_an:
            _robust_ge(prog, Wv, ch.h_e[k], eps_e[k], ak[k] * lo, f"lambda_e{k}")
        _robust_ge(prog, -Xv, ch.h_e[k], eps_e[k], -bk[k] * hi - 1e-9, f"beta_e{k}")
    E = params.energy_targets(ch.L)
    for l in range(ch.L):
        if E[l] > 0:
            _robust_ge(prog, Xv, ch.h_p[l], eps_l[l], E[l], f"alpha_{l}")
    _power_rows(prog, Xv, 1.0, params, None if um is None else um.eps_A)
    prog.minimize(Xv.trace().real)
    rep = solve(prog, opts.solver)
    if rep.status != Status.OPTIMAL:
        return None
    return psd_repair(_hval(rep.primal, Qv)), psd_repair(_hval(rep.primal, Wv))


def _run_sca(ch, params, opts, use_an, um=None):
    t0 = time.perf_counter()
    if params.P <= 0:
        raise ValueError("SCA needs P > 0")
    Q, W = sca_initial_point(ch, params, use_an)
    y0_hat, yk_hat = _y_refs(ch, Q, W, um)
    tau_prev = secrecy_ratio(ch, Q, W) if um is None else np.exp(y0_hat + np.max(yk_hat))  # loose start value
    trace, states = [], []
    status = Status.MAX_ITER
    best = None
    it = 0
    for it in range(1, opts.sca_max_iter + 1):
        st, out = _sca_step(ch, params, y0_hat, yk_hat, use_an, opts, um)
        if st != Status.OPTIMAL:
            if best is None:
                return BeamformerSolution.failed(Kind.COVARIANCE, st if st == Status.INFEASIBLE else Status.NUMERICAL_FAILURE, it)
            status = Status.MAX_ITER
            break
        Qn, Wn, state = out
        if trace and state.tau > trace[-1]:
            status = Status.OPTIMAL  # no further descent at solver precision
            break
        best = (Qn, Wn, state)
        trace.append(state.tau)
        states.append(state)
        tol = opts.sca_tol * (min(1.0, state.tau) if opts.sca_relative else 1.0)
        done = abs(state.tau - tau_prev) <= tol
        tau_prev = state.tau
        y0_hat, yk_hat = _y_refs(ch, Qn, Wn, um)
        if done:
            status = Status.OPTIMAL
            break
    Q, W, state = best
    stage = "skipped"
    if opts.rank_one_stage and extract_rank_one(psd_repair(Q)).residual > opts.rank_stage_threshold:
        out = _sca_rank_one_stage(ch, params, Q, W, use_an, opts, um)
        if out is None:
            stage = "failed"
        else:
            Q, W = out
            stage = "ok"
    tau = trace[-1]
    return _finish_pair(
        Q, W, ch, status, len(trace), -np.log2(tau), trace, t0,
        state=state, states=states, rank=extract_rank_one(psd_repair(Q)), rank_stage=stage,
    )


def max_secrecy_sca(ch: ChannelSet, params: SystemParams, opts: AnOptions | None = None, use_an=True) -> BeamformerSolution:
    """SCA with exponential-cone rows; objective is -log2(tau) at convergence."""
    return _run_sca(ch, params, opts or AnOptions(), use_an)


def robust_max_secrecy_sca(um: UncertaintyModel, params: SystemParams, opts: AnOptions | None = None, use_an=True) -> BeamformerSolution:
    return _run_sca(um.nominal, params, opts or AnOptions(), use_an, um)


# -- two-dimensional baseline ---------------------------------------------------

def two_dim_search(ch: ChannelSet, params: SystemParams, opts: AnOptions | None = None) -> BeamformerSolution:
    """Grid over (t, rho) with AN fixed to rho P/(N-1) times the projector orthogonal to h_s.

    A labeled comparison baseline only: for each grid pair the signal covariance
    is the best SDP answer with that AN held fixed.
    """
    opts = opts or AnOptions()
    t0 = time.perf_counter()
    n, P = ch.n_t, params.P
    h = ch.h_s
    proj = np.eye(n) - np.outer(h, h.conj()) / np.vdot(h, h).real
    iso = proj / max(n - 1, 1)
    m = opts.two_dim_points
    ts = np.geomspace(t_min(ch, P), 1.0, m)
    rhos = np.linspace(0.0, 1.0, m, endpoint=False) if n > 1 else np.zeros(1)
    E = params.energy_targets(ch.L)
    best = (-np.inf, None, None, None, None)
    for rho in rhos:
        W = rho * P * iso
        for t in ts:
            c = 1.0 / t - 1.0
            prog = ConicProgram("two-dim")
            Q = prog.hermitian(n, "Q", psd=True)
            X = Q + W
            for k in range(ch.K):
                prog.add_le(quad(ch.h_e[k], Q), c * (ch.sigma_e2 + np.vdot(ch.h_e[k], W @ ch.h_e[k]).real))
            for l in range(ch.L):
                if E[l] > 0:
                    prog.add_ge(quad(ch.h_p[l], X), E[l])
            _power_rows(prog, X, 1.0, params)
            prog.maximize(quad(h, Q))
            rep = solve(prog, opts.solver)
            if rep.status != Status.OPTIMAL:
                continue
            Qv = psd_repair(_hval(rep.primal, Q))
            val = np.log2(1.0 + _sinr(h, Qv, W, ch.sigma_s2)) + np.log2(t)
            if val > best[0]:
                best = (val, Qv, W, t, rho)
    if best[1] is None:
        return BeamformerSolution.failed(Kind.COVARIANCE, Status.INFEASIBLE, m * len(rhos))
    val, Q, W, t, rho = best
    return _finish_pair(Q, W, ch, Status.OPTIMAL, m * len(rhos), val, [], t0, t=t, rho=rho)
