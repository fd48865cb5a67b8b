"""Independent checks: brute-force grids, sampled worst cases, SDR, audits.

Nothing here calls the conic formulations of the solver modules except
``sdr_cross_check``, which deliberately solves a different (relaxed) program.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    BeamformerSolution,
    ChannelSet,
    Kind,
    SystemParams,
    UncertaintyModel,
    ball_points,
    harvested_energy,
    secrecy_rate,
)
from .conic import ConicProgram, SolverOptions, Status, quad, solve


class OracleKind(str, enum.Enum):
    SECRECY_MAX = "secrecy-max"
    POWER_MIN = "power-min"
    ENERGY_MAX = "energy-max"

    def __str__(self):
        return self.value


@dataclass
class OracleResult:
    objective: float
    argument: dict
    grid_resolution: dict
    feasible: bool = True


@dataclass
class CertificationReport:
    samples: int
    worst_rate: float
    worst_energy: float
    violations: int
    min_margin: float


# -- no-AN grid ------------------------------------------------------------------

def _require_two(ch):
    if ch.n_t != 2:
        raise ValueError(f"grid oracles need n_t = 2, got {ch.n_t}")


def _directions(n_theta, n_phi):
    theta = np.linspace(0.0, np.pi / 2, n_theta)
    phi = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    T, F = np.meshgrid(theta, phi, indexing="ij")
    U = np.stack([np.cos(T), np.sin(T) * np.exp(1j * F)], axis=-1).reshape(-1, 2)
    return U, T.ravel(), F.ravel()


def _gains(H, U):
    """|h^H u|^2 for every row h of H and every direction u: shape (rows, dirs)."""
    return np.abs(np.atleast_2d(H).conj() @ U.T) ** 2


def _max_power(U, params, total=True):
    """Largest p with p |u_i|^2 <= p_i on every antenna (and p <= P if ``total``)."""
    p = np.full(U.shape[0], params.P if total else np.inf)
    if params.p_i is not None:
        mag = np.abs(U) ** 2
        with np.errstate(divide="ignore"):
            lim = np.where(mag > 0, params.p_i[None, :] / np.where(mag > 0, mag, 1.0), np.inf)
        p = np.minimum(p, lim.min(axis=1))
    return p


def _scan_no_an(kind, ch, params, R, U, T, F, p_values):
    """Best (objective, argument) over the given directions and powers."""
    a = _gains(ch.h_s, U)[0] / ch.sigma_s2
    b = _gains(ch.h_e, U) / ch.sigma_e2  # (K, D)
    c = _gains(ch.h_p, U)  # (L, D)
    E = params.energy_targets(ch.L)
    # power minimization carries no total budget, only the per-antenna caps
    p_cap = _max_power(U, params, total=kind != OracleKind.POWER_MIN)

    if kind == OracleKind.POWER_MIN:
        g = 2.0**R
        need = np.zeros_like(a)
        if R > 0:
            denom = a[None, :] - g * b
            with np.errstate(divide="ignore", invalid="ignore"):
                req = np.where(denom > 0, (g - 1.0) / denom, np.inf)
            need = np.max(req, axis=0)
        for l in range(ch.L):
            if E[l] > 0:
                with np.errstate(divide="ignore"):
                    need = np.maximum(need, np.where(c[l] > 0, E[l] / np.where(c[l] > 0, c[l], 1.0), np.inf))
        ok = np.isfinite(need) & (need <= p_cap * (1 + 1e-12))
        if not ok.any():
            return np.inf, None
        i = int(np.argmin(np.where(ok, need, np.inf)))
        return float(need[i]), {"p": float(need[i]), "theta": float(T[i]), "phi": float(F[i])}

    best, arg = -np.inf, None
    for p in p_values:
        feas = p <= p_cap * (1 + 1e-12)
        en = p * c
        for l in range(ch.L):
            feas &= en[l] >= E[l] * (1 - 1e-12)
        rate = np.maximum(np.log2(1.0 + p * a) - np.max(np.log2(1.0 + p * b), axis=0), 0.0)
        if kind == OracleKind.SECRECY_MAX:
            val = rate
        else:
            feas &= rate >= R - 1e-12
            val = en.min(axis=0)
        val = np.where(feas, val, -np.inf)
        i = int(np.argmax(val))
        if val[i] > best:
            best = float(val[i])
            arg = {"p": float(p), "theta": float(T[i]), "phi": float(F[i])}
    return best, arg


def grid_oracle_no_an(kind, ch: ChannelSet, params: SystemParams, steps=(200, 180, 180), R: float = 0.0, zoom: int = 2) -> OracleResult:
    """Exhaustive search over w = sqrt(p) [cos theta, sin theta e^{j phi}].

    secrecy-max and energy-max scan p on a uniform grid over [0, P]; power-min
    takes, for each direction, the smallest power meeting every target, which is
    exact along the ray because every metric is monotone in p.  ``zoom`` extra
    passes rescan a box four cells wide around the incumbent.
    """
    _require_two(ch)
    kind = OracleKind(kind)
    n_p, n_t, n_f = steps
    P = params.P
    U, T, F = _directions(n_t, n_f)
    p_values = np.linspace(0.0, P, n_p)
    best, arg = _scan_no_an(kind, ch, params, R, U, T, F, p_values)
    res = {"p": P / max(n_p - 1, 1), "theta": np.pi / 2 / max(n_t - 1, 1), "phi": 2 * np.pi / n_f}
    minimize = kind == OracleKind.POWER_MIN
    for _ in range(zoom if arg is not None else 0):
        th = np.clip(np.linspace(arg["theta"] - 2 * res["theta"], arg["theta"] + 2 * res["theta"], n_t), 0.0, np.pi / 2)
        ph = np.linspace(arg["phi"] - 2 * res["phi"], arg["phi"] + 2 * res["phi"], n_f)
        Tz, Fz = np.meshgrid(th, ph, indexing="ij")
        Tz, Fz = Tz.ravel(), Fz.ravel()
        Uz = _unit(Tz, Fz)
        pz = np.clip(np.linspace(arg["p"] - 2 * res["p"], arg["p"] + 2 * res["p"], n_p), 0.0, P)
        val, cand = _scan_no_an(kind, ch, params, R, Uz, Tz, Fz, pz)
        if cand is not None and (val < best if minimize else val > best):
            best, arg = val, cand
        res = {k: 4 * v / max(n - 1, 1) for (k, v), n in zip(res.items(), (n_p, n_t, n_f))}
    feasible = arg is not None
    return OracleResult(best, arg or {}, res, feasible=feasible)


# -- AN inner-problem grid ---------------------------------------------------------

def _unit(theta, phi):
    theta, phi = np.broadcast_arrays(theta, phi)
    return np.stack([np.cos(theta), np.sin(theta) * np.exp(1j * phi)], axis=-1)


def _an_eval(t, ch, params, ta, fa, tb, fb, v):
    """Best SINR for rank-one Q = q aa^H, W = v bb^H at given directions and AN power.

    Arrays broadcast together; q is the largest value the upper-bound rows allow,
    then the EH rows are checked.
    """
    A = _unit(ta, fa)
    B = _unit(tb, fb)
    c = 1.0 / t - 1.0
    hs = ch.h_s

    def g(h, X):
        return np.abs(X @ h.conj()) ** 2  # |h^H x|^2 with x rows of X

    q = np.full(np.broadcast(ta, v).shape, np.inf)
    q = np.minimum(q, params.P - v)
    if params.p_i is not None:
        for i in range(2):
            ai = np.abs(A[..., i]) ** 2
            bi = np.abs(B[..., i]) ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.minimum(q, np.where(ai > 0, (params.p_i[i] - v * bi) / ai, np.where(v * bi <= params.p_i[i], np.inf, -np.inf)))
    for k in range(ch.K):
        ga = g(ch.h_e[k], A)
        rhs = c * (ch.sigma_e2 + v * g(ch.h_e[k], B))
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.minimum(q, np.where(ga > 0, rhs / ga, np.inf))
    feas = q >= 0
    q = np.where(feas, q, 0.0)
    E = params.energy_targets(ch.L)
    for l in range(ch.L):
        feas &= q * g(ch.h_p[l], A) + v * g(ch.h_p[l], B) >= E[l] * (1 - 1e-12)
    sinr = q * g(hs, A) / (v * g(hs, B) + ch.sigma_s2)
    return np.where(feas, sinr, -np.inf), q


def grid_oracle_an(t: float, ch: ChannelSet, params: SystemParams, steps=(24, 40), zoom: int = 3) -> OracleResult:
    """Max user SINR over rank-one (Q, W) for the fixed-t inner problem, n_t = 2.

    ``steps = (angle_points, power_points)``.  After the coarse scan, ``zoom``
    passes rescan a box four cells wide around the best point with the same
    point counts.
    """
    _require_two(ch)
    if not (0 < t <= 1):
        raise ValueError("t must lie in (0, 1]")
    n_ang, n_v = steps
    P = params.P
    spans = {"ta": (0.0, np.pi / 2), "fa": (0.0, 2 * np.pi), "tb": (0.0, np.pi / 2), "fb": (0.0, 2 * np.pi), "v": (0.0, P)}
    counts = {"ta": n_ang, "fa": n_ang, "tb": n_ang, "fb": n_ang, "v": n_v}
    best_val, best_arg = -np.inf, None
    centers = None
    widths = {k: (hi - lo) for k, (lo, hi) in spans.items()}
    for level in range(zoom + 1):
        axes = {}
        for k, (lo, hi) in spans.items():
            n = counts[k]
            if centers is None:
                periodic = k in ("fa", "fb")
                axes[k] = np.linspace(lo, hi, n, endpoint=not periodic)
            else:
                half = widths[k] / 2
                a, b = centers[k] - half, centers[k] + half
                if k not in ("fa", "fb"):
                    a, b = max(a, lo), min(b, hi)
                axes[k] = np.linspace(a, b, n)
        cell = {k: (axes[k][1] - axes[k][0]) if len(axes[k]) > 1 else 0.0 for k in axes}
        TA, FA, TB, FB = np.meshgrid(axes["ta"], axes["fa"], axes["tb"], axes["fb"], indexing="ij", sparse=True)
        for v in axes["v"]:
            val, q = _an_eval(t, ch, params, TA, FA, TB, FB, v)
            i = np.unravel_index(int(np.argmax(val)), val.shape)
            if val[i] > best_val:
                best_val = float(val[i])
                best_arg = {
                    "q": float(q[i]), "v": float(v),
                    "ta": float(axes["ta"][i[0]]), "fa": float(axes["fa"][i[1]]),
                    "tb": float(axes["tb"][i[2]]), "fb": float(axes["fb"][i[3]]),
                }
        if best_arg is None:
            return OracleResult(-np.inf, {}, cell, feasible=False)
        centers = best_arg
        widths = {k: 4 * cell[k] for k in cell}
    return OracleResult(best_val, best_arg, cell)


# -- sampled robustness certification ---------------------------------------------

def _perturbed(um, rng, boundary):
    ch = um.nominal
    n = ch.n_t

    def one(r):
        return ball_points(rng, 1, n, r, None if not boundary else np.array([True]))[0]

    e_s = one(um.eps_s)
    e_e = np.stack([one(r) for r in um.eps_e])
    e_p = np.stack([one(r) for r in um.eps_l])
    return ch.perturbed(e_s, e_e, e_p)


def certify_robust(sol, um: UncertaintyModel, R: float, E, samples: int = 1000, seed: int = 0) -> CertificationReport:
    """Evaluate the design on perturbed channels; even-numbered samples sit on the sphere.

    Sample i uses its own generator seeded by (seed, i), so a longer run
    contains every sample of a shorter one.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    E = np.broadcast_to(np.asarray(E, dtype=float), (um.nominal.L,))
    worst_rate, worst_energy, margin = np.inf, np.inf, np.inf
    bad = 0
    for i in range(samples):
        rng = np.random.default_rng([seed, i])
        ch = _perturbed(um, rng, boundary=(i % 2 == 0))
        r = secrecy_rate(sol, ch)
        en = harvested_energy(sol, ch)
        worst_rate = min(worst_rate, r)
        worst_energy = min(worst_energy, float(en.min()))
        margin = min(margin, r - R, float(np.min(en - E)))
        if r < R - 1e-3 or np.any(en < E - 1e-3):
            bad += 1
    return CertificationReport(samples, float(worst_rate), float(worst_energy), bad, float(margin))


# -- semidefinite relaxation --------------------------------------------------------

def _sdr_min_power(R, ch, params, solver):
    n = ch.n_t
    prog = ConicProgram("sdr")
    Q = prog.hermitian(n, "Q", psd=True)
    g = 2.0**R
    for k in range(ch.K):
        prog.add_ge(quad(ch.h_s, Q) * (1.0 / ch.sigma_s2) - quad(ch.h_e[k], Q) * (g / ch.sigma_e2), g - 1.0)
    E = params.energy_targets(ch.L)
    for l in range(ch.L):
        if E[l] > 0:
            prog.add_ge(quad(ch.h_p[l], Q), E[l])
    if params.p_i is not None:
        for i, cap in enumerate(params.p_i):
            prog.add_le(Q[i, i].real, cap)
    prog.minimize(Q.trace().real)
    rep = solve(prog, solver)
    # an uncertified iterate is fine here: the extracted vector is re-evaluated exactly
    if rep.status not in (Status.OPTIMAL, Status.MAX_ITER):
        return None
    v = Q.value(rep.primal)
    return 0.5 * (v + v.conj().T)


def _rescale(w, params):
    """Largest multiple of w within the total and per-antenna budgets."""
    pw = float(np.vdot(w, w).real)
    if pw <= 0:
        return w
    s = params.P / pw
    if params.p_i is not None:
        mag = np.abs(w) ** 2
        pos = mag > 0
        s = min(s, float(np.min(params.p_i[pos] / mag[pos])))
    return w * np.sqrt(s)


def sdr_solution(ch: ChannelSet, params: SystemParams, tol: float = 1e-3, solver: SolverOptions | None = None) -> BeamformerSolution:
    """Bisection on R over the rank-relaxed power program, then the dominant eigenvector."""
    solver = solver or SolverOptions()
    P = params.P
    hi = float(np.log2(1.0 + P * np.linalg.norm(ch.h_s) ** 2 / ch.sigma_s2))
    base = _sdr_min_power(0.0, ch, params, solver)
    if base is None or np.trace(base).real > P * (1 + 1e-6):
        return BeamformerSolution.failed(Kind.VECTOR, Status.INFEASIBLE)
    lo, best, it = 0.0, base, 0
    while hi - lo > tol:
        it += 1
        mid = 0.5 * (lo + hi)
        Q = _sdr_min_power(mid, ch, params, solver)
        if Q is not None and np.trace(Q).real <= P * (1 + 1e-6):
            lo, best = mid, Q
        else:
            hi = mid
    d, V = np.linalg.eigh(best)
    w = _rescale(np.sqrt(max(d[-1], 0.0)) * V[:, -1], params)
    return BeamformerSolution(
        kind=Kind.VECTOR, solver_status=Status.OPTIMAL, w=w,
        achieved_rate=secrecy_rate(w, ch), achieved_energy=harvested_energy(w, ch),
        iterations=it, objective=lo, info={"relaxed_rank_residual": float(1 - d[-1] / max(d.sum(), 1e-300))},
    )


def sdr_cross_check(ch: ChannelSet, params: SystemParams) -> float:
    return sdr_solution(ch, params).achieved_rate


# -- post-hoc audit -------------------------------------------------------------------

@dataclass
class AuditReport:
    passed: bool
    failures: list = field(default_factory=list)


def audit_solution(
    sol: BeamformerSolution,
    ch: ChannelSet,
    params: SystemParams,
    R: float | None = None,
    tol: float = 1e-6,
    total_cap: bool = True,
) -> AuditReport:
    """Re-evaluate every constraint with the channel metrics.

    Power and per-antenna rows use tol * max(1, budget); energy rows tol * max(1, E).
    Power minimization has no sum-power row, so pass total_cap=False for its output.
    """
    fails = []
    if sol.kind == Kind.VECTOR:
        w = np.asarray(sol.w)
        diag = np.abs(w) ** 2
        total = float(diag.sum())
    else:
        Q, W = np.asarray(sol.Q_s), np.asarray(sol.W)
        for name, M in (("Q_s", Q), ("W", W)):
            if np.max(np.abs(M - M.conj().T)) > 1e-9 * max(1.0, np.max(np.abs(M))):
                fails.append(f"{name} not Hermitian")
            if np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0] < -1e-8:
                fails.append(f"{name} not PSD")
        X = Q + W
        diag = np.real(np.diag(X))
        total = float(diag.sum())
    if total_cap and total > params.P + tol * max(1.0, params.P):
        fails.append(f"total power {total:.6g} > {params.P:.6g}")
    if params.p_i is not None:
        for i, cap in enumerate(params.p_i):
            if diag[i] > cap + tol * max(1.0, cap):
                fails.append(f"antenna {i} power {diag[i]:.6g} > {cap:.6g}")
    E = params.energy_targets(ch.L)
    en = harvested_energy(sol, ch)
    for l in range(ch.L):
        if en[l] < E[l] - tol * max(1.0, E[l]):
            fails.append(f"EH receiver {l} gets {en[l]:.6g} < {E[l]:.6g}")
    rate = secrecy_rate(sol, ch)
    if abs(rate - sol.achieved_rate) > 1e-3:
        fails.append(f"reported rate {sol.achieved_rate:.6g} vs recomputed {rate:.6g}")
    if R is not None and rate < R - 1e-4:
        fails.append(f"rate {rate:.6g} below target {R:.6g}")
    return AuditReport(not fails, fails)
