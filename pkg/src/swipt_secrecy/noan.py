"""Transmit beamforming without artificial noise.

Power minimization under secrecy/energy targets, bisection on the secrecy
rate, SCA energy maximization, and the worst-case robust counterparts.

EH rows are linearized around a reference r_hat_l = h_l^H w_prev.  Writing
r_hat = m e^{j phi}, the first-order row ||u_hat||^2 + 2 u_hat.(u - u_hat) >= E
is the same as  Re{e^{-j phi} h_l^H w} >= (E + m^2) / (2 m),  which is the form
used below; the robust rows subtract eps_l ||w|| from the left-hand side and
take m as the worst-case margin, so zero radii reproduce the nominal iterates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import (
    BeamformerSolution,
    ChannelSet,
    Kind,
    SystemParams,
    UncertaintyModel,
    harvested_energy,
    mrt,
    secrecy_rate,
)
from .conic import ConicProgram, SolverOptions, Status, solve
from .lmi import nemirovski_robust_lmi, schur_secrecy_lmi


@dataclass
class NoAnOptions:
    sca_tol: float = 1e-5
    sca_max_iter: int = 50
    accelerate: bool = True
    multi_start: bool = True  # power and energy SCA also start from EH-channel directions
    bisection_tol: float = 1e-3
    bisection_max_iter: int = 30
    tau_points: int = 200
    tau_refine: bool = True
    tau_refine_tol: float = 1e-7
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class ScaState:
    u: np.ndarray  # linearization references h_l^H w, one complex number per EH receiver
    t_hat: float | np.ndarray | None = None
    iteration: int = 0
    objective_trace: list = field(default_factory=list)


@dataclass
class _Step:
    status: Status
    w: np.ndarray | None = None
    objective: float = float("nan")
    t_hat: float | np.ndarray | None = None
    extra_delta: float = 0.0


def _check_channels(ch):
    if not np.any(ch.h_s):
        raise ValueError("user channel is identically zero")
    for name, H in (("eavesdropper", ch.h_e), ("EH receiver", ch.h_p)):
        if np.any(~np.any(H, axis=1)):
            raise ValueError(f"an {name} channel is identically zero")


def _start_point(ch, P, energy_rows=()):
    """MRT start, nudged toward any EH channel it is (numerically) orthogonal to."""
    w0 = mrt(ch, max(P, 1e-12))
    scale = np.sqrt(max(P, 1.0))
    for l in energy_rows:
        if abs(np.vdot(ch.h_p[l], w0)) < 1e-6:
            hl = ch.h_p[l]
            w0 = w0 + 1e-3 * scale * hl / np.linalg.norm(hl)
    return w0


def _start_points(ch, P, active, opts):
    """MRT first; with multi_start, full-power beams along each active EH channel too.

    The EH rows fix a phase per receiver, and different starts settle in
    different phase patterns; keeping the cheapest answer avoids the worst of
    those local optima.
    """
    starts = [_start_point(ch, P, active)]
    if opts.multi_start:
        for l in active:
            hl = ch.h_p[l]
            starts.append(np.sqrt(P) * hl / np.linalg.norm(hl))
    return starts


def _energy_starts(ch, P, opts):
    """MRT, then full-power beams along each EH channel and along the top eigenvector of sum h_l h_l^H."""
    starts = [_start_point(ch, P, range(ch.L))]
    if opts.multi_start:
        for hl in ch.h_p:
            starts.append(np.sqrt(P) * hl / np.linalg.norm(hl))
        _, V = np.linalg.eigh(ch.h_p.T @ ch.h_p.conj())
        starts.append(np.sqrt(P) * V[:, -1])
    return starts


def _best_run(runs, maximize=False):
    """Pick the best successful run by final objective; otherwise the first failure."""
    ok = [r for r in runs if r[1] is not None]
    if not ok:
        return runs[0]
    return (max if maximize else min)(ok, key=lambda r: r[2][-1])


def _refs(ch):
    return lambda w: ch.h_p.conj() @ w


def _phase_sca(step, w0, refs, active, opts, maximize, stop_at=None):
    """Run a phase-referenced SCA loop.

    ``step(r_lin, w_prev, t_hat)`` solves the surrogate linearized at the
    complex references ``r_lin``.  Plain steps use r_lin = refs(w_prev), so the
    previous iterate stays feasible and the objective is monotone.  When two
    consecutive plain steps show slow linear rotation of the reference phases,
    an extrapolated reference (damped Aitken estimate of the limit phase) is
    tried and kept only if it improves the objective.  Convergence is declared
    on plain steps only, by ||r_new - r_lin|| <= tol * max(1, ||r_lin||), or
    when a plain step no longer improves beyond solver accuracy.
    """
    active = np.asarray(active, dtype=int)
    state = ScaState(u=refs(w0))
    w_prev = w0
    trace = []
    rots = []
    pending = None
    gain = 0.25
    status = Status.MAX_ITER
    it = 0

    def improvement(a, b):
        return (a - b) if maximize else (b - a)

    while it < opts.sca_max_iter:
        it += 1
        extrap = pending is not None
        r_lin = pending if extrap else state.u
        pending = None
        res = step(r_lin, w_prev, state.t_hat)
        if res.status != Status.OPTIMAL:
            if extrap:
                gain *= 0.25
                rots.clear()
                continue
            if not trace:
                return res.status, None, trace, it, state
            it -= 1
            break
        if trace:
            gained = improvement(res.objective, trace[-1])
            if extrap and gained <= 0:
                gain *= 0.25
                rots.clear()
                continue
            if not extrap and gained < 0:
                # no progress beyond solver accuracy: keep the previous iterate
                it -= 1
                status = Status.OPTIMAL
                break
        r_new = refs(res.w)
        delta = float(np.linalg.norm((r_new - r_lin)[active])) if active.size else 0.0
        scale = max(1.0, float(np.linalg.norm(r_lin[active]))) if active.size else 1.0
        trace.append(float(res.objective))
        w_prev = res.w
        rot = np.angle(r_new * np.conj(r_lin)) if active.size else np.zeros(0)
        state.u = r_new
        state.t_hat = res.t_hat
        state.iteration = it
        if not extrap and delta <= opts.sca_tol * scale and res.extra_delta <= opts.sca_tol:
            status = Status.OPTIMAL
            break
        if stop_at is not None and res.objective <= stop_at:
            status = Status.OPTIMAL
            break
        if extrap:
            gain = min(1.0, gain * 2.0)
            rots.clear()
            continue
        rots.append(rot)
        if opts.accelerate and len(rots) >= 2 and active.size:
            d1, d2 = rots[-2][active], rots[-1][active]
            den = float(d1 @ d1)
            rho = float(d2 @ d1) / den if den > 0 else 0.0
            if 0.5 < rho < 1.0 and np.linalg.norm(d2) > 1e-6:
                beta = gain * min(rho / (1.0 - rho), 50.0)
                step_rot = np.zeros_like(rots[-1])
                step_rot[active] = beta * d2
                pending = r_new * np.exp(1j * step_rot)
    state.objective_trace = trace
    return status, w_prev, trace, it, state


def _vector_program(ch, params, R, power_cap=None, phase=True):
    prog = ConicProgram("no-an")
    n = ch.n_t
    w = prog.complex_variable(n, "w")
    if phase and R > 0:
        zs = ch.h_s.conj() @ w
        prog.add_eq(zs.imag)
        prog.add_ge(zs.real)
    if power_cap is not None:
        prog.add_soc(np.sqrt(power_cap), w)
    if params.p_i is not None:
        for i, cap in enumerate(params.p_i):
            prog.add_soc(np.sqrt(cap), w[i : i + 1])
    return prog, w


def _finish_vector(w, ch, status, it, objective, trace, t0, **info):
    return BeamformerSolution(
        kind=Kind.VECTOR,
        solver_status=status,
        w=w,
        achieved_rate=secrecy_rate(w, ch),
        achieved_energy=harvested_energy(w, ch),
        iterations=it,
        objective=float(objective),
        trace=list(trace),
        solve_time=time.perf_counter() - t0,
        info=info,
    )


def _zero_solution(ch, t0):
    return _finish_vector(np.zeros(ch.n_t, dtype=complex), ch, Status.OPTIMAL, 0, 0.0, [0.0], t0)


def _first_failure(status):
    return status if status == Status.INFEASIBLE else Status.NUMERICAL_FAILURE


def _restored_sca(build, w0, refs, active, opts, E):
    """Power-minimization SCA with a slack-based restoration phase.

    The first phase-locked surrogate can be empty even when the problem is
    feasible (the MRT phases may point the wrong way).  In that case the EH
    rows are relaxed by slacks whose sum is minimized with the same SCA until
    it reaches zero; the main loop then starts from that point.
    """
    status, w, trace, it, state = _phase_sca(lambda r, wp, t: build(r, wp, t, False), w0, refs, active, opts, False)
    if w is not None or status != Status.INFEASIBLE or len(active) == 0:
        return status, w, trace, it, state, 0
    thr = 1e-7 * (1.0 + float(np.sum(E)))
    st1, w1, tr1, it1, _ = _phase_sca(lambda r, wp, t: build(r, wp, t, True), w0, refs, active, opts, False, stop_at=thr)
    if w1 is None or tr1[-1] > thr:
        return Status.INFEASIBLE, None, [], it + it1, state, it1
    status, w, trace, it2, state = _phase_sca(lambda r, wp, t: build(r, wp, t, False), w1, refs, active, opts, False)
    return status, w, trace, it + it1 + it2, state, it1


def _norm_epigraph(prog, w):
    """Shared scalar n >= ||w|| for all worst-case rows of one program."""
    n = getattr(prog, "_wnorm", None)
    if n is None:
        n = prog.variable(name="wnorm")
        prog.add_soc(n, w)
        prog._wnorm = n
    return n


def _eh_lhs(prog, h_l, eps_l, w, r_ref):
    """Re{e^{-j phi} h_l^H w} - eps_l ||w||, phi the phase of the reference."""
    phasor = np.exp(-1j * np.angle(r_ref)) if abs(r_ref) > 0 else 1.0
    lin = (phasor * (h_l.conj() @ w)).real
    if eps_l > 0:
        return lin - eps_l * _norm_epigraph(prog, w)
    return lin


def _eh_target_row(prog, h_l, eps_l, w, r_ref, m_hat, E, slack=None):
    """Linearized |h_l^H w| - eps_l ||w|| >= sqrt(E) around a margin m_hat."""
    rhs = (E + m_hat**2) / (2 * m_hat) if m_hat > 1e-6 else np.sqrt(E)
    lhs = _eh_lhs(prog, h_l, eps_l, w, r_ref)
    prog.add_ge(lhs if slack is None else lhs + slack, rhs)


def _eh_slack_row(prog, h_l, eps_l, w, r_ref, t_hat, t):
    """|h_l^H w| - eps_l ||w|| >= sqrt(t) with sqrt(t) replaced by its tangent at t_hat."""
    rt = np.sqrt(t_hat)
    prog.add_ge(_eh_lhs(prog, h_l, eps_l, w, r_ref) - (rt + (t - t_hat) / (2 * rt)))


def _margins(ch, eps_l, w):
    """Worst-case amplitudes |h_l^H w| - eps_l ||w|| over the EH error balls."""
    return np.abs(ch.h_p.conj() @ w) - np.asarray(eps_l) * np.linalg.norm(w)


# -- perfect CSI ----------------------------------------------------------------

def power_min(R: float, ch: ChannelSet, params: SystemParams, opts: NoAnOptions | None = None) -> BeamformerSolution:
    opts = opts or NoAnOptions()
    if R < 0:
        raise ValueError("rate target must be nonnegative")
    _check_channels(ch)
    t0 = time.perf_counter()
    E = params.energy_targets(ch.L)
    active = [l for l in range(ch.L) if E[l] > 0]
    if R <= 0 and not active:
        return _zero_solution(ch, t0)
    def step(r_lin, w_prev, _, restore):
        prog, w = _vector_program(ch, params, R)
        s = prog.variable(name="s")
        prog.add_soc(s, w)
        if R > 0:
            for k in range(ch.K):
                prog.add_lmi(schur_secrecy_lmi(w, R, ch, k))
        slack = prog.variable(len(active), name="slack", nonneg=True) if restore else None
        for j, l in enumerate(active):
            _eh_target_row(prog, ch.h_p[l], 0.0, w, r_lin[l], abs(r_lin[l]), E[l], None if slack is None else slack[j])
        prog.minimize(slack.sum() if restore else s)
        rep = solve(prog, opts.solver)
        if rep.status != Status.OPTIMAL:
            return _Step(rep.status)
        wv = w.value(rep.primal)
        obj = float(slack.sum().value(rep.primal)) if restore else float(np.vdot(wv, wv).real)
        return _Step(Status.OPTIMAL, wv, obj)

    starts = _start_points(ch, params.P if params.P > 0 else 1.0, active, opts)
    runs = [_restored_sca(step, w0, _refs(ch), active, opts, E[active]) for w0 in starts]
    status, w, trace, it, _, restore_it = _best_run(runs)
    if w is None:
        return BeamformerSolution.failed(Kind.VECTOR, _first_failure(status), it)
    return _finish_vector(w, ch, status, it, trace[-1], trace, t0, restoration_iterations=restore_it, starts=len(starts))


def max_secrecy_rate_bisection(ch: ChannelSet, params: SystemParams, opts: NoAnOptions | None = None) -> BeamformerSolution:
    opts = opts or NoAnOptions()
    r_max = np.log2(1.0 + params.P * np.linalg.norm(ch.h_s) ** 2 / ch.sigma_s2)
    return _bisection(lambda R: power_min(R, ch, params, opts), r_max, ch, params, opts)


def _bisection(power_at, r_max, ch, params, opts):
    t0 = time.perf_counter()
    P = params.P
    E = params.energy_targets(ch.L)
    if P <= 0:
        if np.any(E > 0):
            return BeamformerSolution.failed(Kind.VECTOR, Status.INFEASIBLE, 0)
        return _finish_vector(np.zeros(ch.n_t, dtype=complex), ch, Status.OPTIMAL, 0, 0.0, [], t0,
                              bracket=[(0.0, 0.0)], history=[])

    def feasible(sol):
        return sol.ok and sol.power <= P * (1 + 1e-6)

    base = power_at(0.0)
    history = [(0.0, base.power, feasible(base))]
    if not feasible(base):
        status = base.solver_status if base.solver_status == Status.NUMERICAL_FAILURE else Status.INFEASIBLE
        return BeamformerSolution.failed(Kind.VECTOR, status, 1, history=history)
    best, lo, hi = base, 0.0, float(r_max)
    bracket = [(lo, hi)]
    it = 0
    inner = base.iterations
    while hi - lo > opts.bisection_tol and it < opts.bisection_max_iter:
        it += 1
        mid = 0.5 * (lo + hi)
        sol = power_at(mid)
        inner += sol.iterations
        ok = feasible(sol)
        history.append((mid, sol.power, ok))
        if ok:
            lo, best = mid, sol
        else:
            hi = mid
        bracket.append((lo, hi))
    w = best.w
    pw = float(np.vdot(w, w).real)
    if pw > P:
        w = w * np.sqrt(P / pw)
    status = Status.OPTIMAL if hi - lo <= opts.bisection_tol else Status.MAX_ITER
    return _finish_vector(
        w, ch, status, it, lo, [b[0] for b in bracket], t0,
        bracket=bracket, history=history, inner_iterations=inner, R_min=lo, R_max=hi,
    )


def max_harvested_energy(R: float, ch: ChannelSet, params: SystemParams, opts: NoAnOptions | None = None) -> BeamformerSolution:
    opts = opts or NoAnOptions()
    if R < 0:
        raise ValueError("rate target must be nonnegative")
    _check_channels(ch)
    t0 = time.perf_counter()
    P = params.P
    if P <= 0:
        if R > 0:
            return BeamformerSolution.failed(Kind.VECTOR, Status.INFEASIBLE, 0)
        return _zero_solution(ch, t0)

    def step(r_lin, w_prev, _):
        prog, w = _vector_program(ch, params, R, power_cap=P)
        t = prog.variable(name="t")
        if R > 0:
            for k in range(ch.K):
                prog.add_lmi(schur_secrecy_lmi(w, R, ch, k))
        for l in range(ch.L):
            m = abs(r_lin[l])
            # 2 Re{r_hat^* r} - |r_hat|^2 >= t
            phasor = np.exp(-1j * np.angle(r_lin[l])) if m > 0 else 1.0
            prog.add_ge(2 * m * (phasor * (ch.h_p[l].conj() @ w)).real - m**2 - t)
        prog.maximize(t)
        rep = solve(prog, opts.solver)
        if rep.status != Status.OPTIMAL:
            return _Step(rep.status)
        return _Step(Status.OPTIMAL, w.value(rep.primal), float(t.value(rep.primal)))

    starts = _energy_starts(ch, P, opts)
    runs = [_phase_sca(step, w0, _refs(ch), range(ch.L), opts, maximize=True) for w0 in starts]
    status, w, trace, it, _ = _best_run(runs, maximize=True)
    if w is None:
        return BeamformerSolution.failed(Kind.VECTOR, _first_failure(status), it)
    energy = harvested_energy(w, ch)
    return _finish_vector(w, ch, status, it, float(energy.min()), trace, t0, surrogate=trace[-1], starts=len(starts))


# -- worst-case robust ----------------------------------------------------------

def _robust_user_lhs(prog, um, w):
    lin = (um.nominal.h_s.conj() @ w).real
    if um.eps_s > 0:
        return lin - um.eps_s * _norm_epigraph(prog, w)
    return lin


def _eve_rows(prog, w, level, R, um):
    ch = um.nominal
    for k in range(ch.K):
        lam = prog.variable(name=f"lam{k}", nonneg=True)
        prog.add_lmi(nemirovski_robust_lmi(w, level, R, ch.h_e[k], um.eps_e[k], ch.sigma_e2, lam, f"robust-eve[{k}]"))


def robust_power_min(R: float, um: UncertaintyModel, params: SystemParams, opts: NoAnOptions | None = None) -> BeamformerSolution:
    opts = opts or NoAnOptions()
    if R < 0:
        raise ValueError("rate target must be nonnegative")
    ch = um.nominal
    _check_channels(ch)
    t0 = time.perf_counter()
    E = params.energy_targets(ch.L)
    active = [l for l in range(ch.L) if E[l] > 0]
    if R <= 0 and not active:
        return _zero_solution(ch, t0)
    sig_s = np.sqrt(ch.sigma_s2)
    def t_start(w0):
        return max(2.0**R * (1 + abs(np.vdot(ch.h_e[0], w0)) ** 2 / ch.sigma_e2), 2.0**R - 1 + 1e-6)

    def step(r_lin, w_prev, t_hat, restore, t_init):
        t_hat = t_init if t_hat is None else t_hat
        prog, w = _vector_program(ch, params, R, phase=False)
        s = prog.variable(name="s")
        prog.add_soc(s, w)
        t2 = None
        if R > 0:
            t2 = prog.variable(name="t2")
            rt = np.sqrt(t_hat)
            f = rt + (t2 - t_hat) / (2 * rt)
            prog.add_eq((ch.h_s.conj() @ w).imag)
            prog.add_ge(_robust_user_lhs(prog, um, w) - sig_s * f)
            _eve_rows(prog, w, f, R, um)
        m_hat = _margins(ch, um.eps_l, w_prev)
        slack = prog.variable(len(active), name="slack", nonneg=True) if restore else None
        for j, l in enumerate(active):
            _eh_target_row(prog, ch.h_p[l], um.eps_l[l], w, r_lin[l], m_hat[l], E[l], None if slack is None else slack[j])
        prog.minimize(slack.sum() if restore else s)
        rep = solve(prog, opts.solver)
        if rep.status != Status.OPTIMAL:
            return _Step(rep.status)
        wv = w.value(rep.primal)
        new_t, dt = None, 0.0
        if t2 is not None:
            new_t = max(float(t2.value(rep.primal)), 2.0**R - 1 + 1e-9)
            dt = abs(new_t - t_hat) / max(1.0, abs(t_hat))
        obj = float(slack.sum().value(rep.primal)) if restore else float(np.vdot(wv, wv).real)
        return _Step(Status.OPTIMAL, wv, obj, new_t, 0.0 if restore else dt)

    runs = []
    for w0 in _start_points(ch, params.P if params.P > 0 else 1.0, active, opts):
        build = lambda r, wp, t, restore, ti=t_start(w0): step(r, wp, t, restore, ti)
        runs.append(_restored_sca(build, w0, _refs(ch), active, opts, E[active]))
    status, w, trace, it, state, restore_it = _best_run(runs)
    if w is None:
        return BeamformerSolution.failed(Kind.VECTOR, _first_failure(status), it)
    return _finish_vector(w, ch, status, it, trace[-1], trace, t0, t2=state.t_hat, restoration_iterations=restore_it, starts=len(runs))


def robust_max_secrecy_bisection(um: UncertaintyModel, params: SystemParams, opts: NoAnOptions | None = None) -> BeamformerSolution:
    """Worst-case secrecy-rate maximization by bisection over robust_power_min."""
    opts = opts or NoAnOptions()
    ch = um.nominal
    r_max = np.log2(1.0 + params.P * (np.linalg.norm(ch.h_s) + um.eps_s) ** 2 / ch.sigma_s2)
    return _bisection(lambda R: robust_power_min(R, um, params, opts), r_max, ch, params, opts)


def robust_energy_at_tau(tau, R, um, params, opts=None, start=None):
    """Inner SCA at a fixed user-side level sqrt(tau).

    Returns (t3, w, iterations, status, trace); w is None when the level is infeasible.
    """
    opts = opts or NoAnOptions()
    ch = um.nominal
    g = np.sqrt(max(tau, 0.0))
    sig_s = np.sqrt(ch.sigma_s2)

    def step(r_lin, w_prev, _):
        prog, w = _vector_program(ch, params, R, power_cap=params.P)
        t3 = prog.variable(name="t3")
        if R > 0:
            prog.add_ge(_robust_user_lhs(prog, um, w), sig_s * g)
            _eve_rows(prog, w, g, R, um)
        t_hat = np.maximum(_margins(ch, um.eps_l, w_prev), 1e-4) ** 2
        for l in range(ch.L):
            _eh_slack_row(prog, ch.h_p[l], um.eps_l[l], w, r_lin[l], t_hat[l], t3)
        prog.maximize(t3)
        rep = solve(prog, opts.solver)
        if rep.status != Status.OPTIMAL:
            return _Step(rep.status)
        return _Step(Status.OPTIMAL, w.value(rep.primal), float(t3.value(rep.primal)))

    w0 = start if start is not None else _start_point(ch, params.P, range(ch.L))
    status, w, trace, it, _ = _phase_sca(step, w0, _refs(ch), range(ch.L), opts, maximize=True)
    if w is None:
        return float("-inf"), None, it, _first_failure(status), trace
    return trace[-1], w, it, status, trace


def _level_range(R, um, params, opts):
    """Interval of user-side levels g = sqrt(tau) for which the level problem is feasible."""
    ch = um.nominal
    sig_s = np.sqrt(ch.sigma_s2)
    out = []
    for sense in ("min", "max"):
        prog, w = _vector_program(ch, params, R, power_cap=params.P)
        g = prog.variable(name="g")
        prog.add_ge(g)
        prog.add_ge(_robust_user_lhs(prog, um, w) - sig_s * g)
        _eve_rows(prog, w, g, R, um)
        (prog.minimize if sense == "min" else prog.maximize)(g)
        rep = solve(prog, opts.solver)
        if rep.status != Status.OPTIMAL:
            return None, rep.status
        out.append(float(g.value(rep.primal)))
    return (out[0], out[1]), Status.OPTIMAL


def robust_max_energy(R: float, um: UncertaintyModel, params: SystemParams, opts: NoAnOptions | None = None) -> BeamformerSolution:
    opts = opts or NoAnOptions()
    if R < 0:
        raise ValueError("rate target must be nonnegative")
    ch = um.nominal
    _check_channels(ch)
    t0 = time.perf_counter()
    P = params.P
    if P <= 0:
        if R > 0:
            return BeamformerSolution.failed(Kind.VECTOR, Status.INFEASIBLE, 0)
        return _zero_solution(ch, t0)
    tau_max = P / ch.sigma_s2 * (np.linalg.norm(ch.h_s) + um.eps_s) ** 2

    def finish(val, wv, status, it, trace, **info):
        worst = float(np.min(np.maximum(_margins(ch, um.eps_l, wv), 0.0) ** 2))
        return _finish_vector(wv, ch, status, it, val, trace, t0, worst_energy=worst, tau_max=tau_max, **info)

    if R <= 0:  # secrecy rows are vacuous under the [.]^+ clamp: no level search needed
        val, wv, it, status, trace = robust_energy_at_tau(0.0, 0.0, um, params, opts)
        if wv is None:
            return BeamformerSolution.failed(Kind.VECTOR, status, it)
        return finish(val, wv, status, it, trace, tau=0.0, tau_grid=[0.0])

    rng_, st = _level_range(R, um, params, opts)
    if rng_ is None:
        return BeamformerSolution.failed(Kind.VECTOR, _first_failure(st), 2)
    g_lo, g_hi = rng_
    lo, hi = g_lo**2, min(g_hi**2, tau_max)
    pad = 1e-7 * max(hi - lo, 1e-12)
    lo, hi = lo + pad, max(hi - pad, lo + pad)
    grid = np.linspace(lo, hi, max(opts.tau_points, 1)) if hi > lo else np.array([lo])

    total_it = 2
    evals = {}
    # warm-started chains over the grid: one upward from the default start, and,
    # with multi_start, two more walking outward from the level of the nominal
    # multi-start answer (which pins the zero-radius case to its twin)
    chains = [(grid, None)]
    if opts.multi_start:
        nominal = max_harvested_energy(R, ch, params, opts)
        total_it += nominal.iterations
        if nominal.ok:
            wn = nominal.w
            g = max(abs(np.vdot(ch.h_s, wn)) - um.eps_s * np.linalg.norm(wn), 0.0) / np.sqrt(ch.sigma_s2)
            tau_n = float(np.clip(g**2, lo, hi))
            chains.append((np.concatenate([[tau_n], grid[grid > tau_n]]), wn))
            chains.append((grid[grid < tau_n][::-1], wn))
    for taus, start in chains:
        for tau in taus:
            val, wv, it, status, _ = robust_energy_at_tau(tau, R, um, params, opts, start)
            total_it += it
            if wv is not None:
                if float(tau) not in evals or val > evals[float(tau)][0]:
                    evals[float(tau)] = (val, wv, status)
                start = wv
    if not evals:
        return BeamformerSolution.failed(Kind.VECTOR, Status.INFEASIBLE, total_it)
    best_tau = max(evals, key=lambda t: evals[t][0])
    if opts.tau_refine and len(grid) > 1:
        step = grid[1] - grid[0]
        a, b = max(lo, best_tau - step), min(hi, best_tau + step)
        warm = evals[best_tau][1]

        def neg(tau):
            nonlocal total_it
            val, wv, it, status, _ = robust_energy_at_tau(tau, R, um, params, opts, warm)
            total_it += it
            if wv is None:
                return 1e30  # finite: Brent arithmetic turns inf into nan
            evals[float(tau)] = (val, wv, status)
            return -val

        if b > a:
            minimize_scalar(neg, bounds=(a, b), method="bounded",
                            options={"xatol": opts.tau_refine_tol * max(hi, 1.0)})
        best_tau = max(evals, key=lambda t: evals[t][0])
    val, wv, status = evals[best_tau]
    taus = sorted(evals)
    return finish(
        val, wv, Status.OPTIMAL if status == Status.OPTIMAL else Status.MAX_ITER, total_it,
        [evals[t][0] for t in taus], tau=best_tau, tau_grid=taus, tau_range=(lo, hi),
    )
