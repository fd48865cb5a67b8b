"""Reusable LMI blocks for the secrecy constraints.

All builders accept either decision expressions (``Affine``) or plain numpy
values, so the same code builds solver constraints and numeric test matrices.
"""

from __future__ import annotations

import numpy as np

from .conic import Affine, LmiBlock, bmat


def _aff(v):
    return Affine.lift(v)


def _nonneg_multiplier(lam):
    if not isinstance(lam, Affine) and np.any(np.asarray(lam) < 0):
        raise ValueError("S-procedure / Nemirovski multipliers must be nonnegative")
    return _aff(lam)


def schur_blocks(w, level, R, h_e, sigma_e):
    """Pieces of [[level I_2, b], [b^H, level]] with b = [(2^{R/2}/sigma_e) w^H h_e ; sqrt(2^R - 1)]."""
    if R < 0:
        raise ValueError("rate target must be nonnegative")
    w = _aff(w)
    level = _aff(level)
    if level.is_complex:
        level = level.real
    c = 2.0 ** (R / 2) / np.sqrt(sigma_e)
    b1 = c * (np.asarray(h_e).conj() @ w).conj()  # c * w^H h_e
    b2 = np.sqrt(2.0**R - 1.0)
    return level, b1, b2, c


def _schur_matrix(level, b1, b2, corner):
    z = Affine(0.0)
    lv = level.reshape(1, 1)
    zz = z.reshape(1, 1)
    b1 = b1.reshape(1, 1)
    b2m = _aff(np.array([[b2]], dtype=float))
    return bmat(
        [
            [lv, zz, b1],
            [zz, lv, b2m],
            [b1.conj(), b2m, corner.reshape(1, 1)],
        ]
    )


def schur_secrecy_lmi(w, R, ch, k) -> LmiBlock:
    """S_k: PSD iff |h_s^H w|^2/s_s >= 2^R (1 + |h_e^H w|^2/s_e) - 1, under the real-phase convention."""
    w = _aff(w)
    a = (np.asarray(ch.h_s).conj() @ w).real / np.sqrt(ch.sigma_s2)
    level, b1, b2, _ = schur_blocks(w, a, R, ch.h_e[k], ch.sigma_e2)
    return LmiBlock(_schur_matrix(level, b1, b2, level), f"schur[{k}]")


def nemirovski_robust_lmi(w, level, R, h_e, eps, sigma_e2, lam, name="nemirovski") -> LmiBlock:
    """Robust version of the Schur block for all ||e|| <= eps on the eavesdropper channel.

    ``level`` replaces the user-side diagonal (a Taylor surrogate or sqrt(tau));
    ``lam`` is the nonnegative multiplier (an expression or a number).
    """
    if eps < 0:
        raise ValueError("uncertainty radius must be nonnegative")
    lam = _nonneg_multiplier(lam)
    w = _aff(w)
    level, b1, b2, c = schur_blocks(w, level, R, h_e, sigma_e2)
    n = w.shape[0]
    top = _schur_matrix(level, b1, b2, level - lam)
    row = (-eps * c) * w.conj().reshape(1, n)  # -eps * c * w^H
    zeros = Affine(np.zeros((2, n)))
    off = bmat([[row], [zeros]])  # 3 x n
    bottom = lam * np.eye(n)
    return LmiBlock(bmat([[top, off], [off.H, bottom]]), name)


def s_procedure_lmi(M, h, eps, rhs, alpha, name="s-procedure") -> LmiBlock:
    """(h + e)^H M (h + e) >= rhs for every ||e|| <= eps, via one multiplier alpha >= 0.

    Upper bounds are written by negating both M and rhs.
    """
    if eps < 0:
        raise ValueError("uncertainty radius must be nonnegative")
    if not isinstance(M, (Affine, np.ndarray)):
        raise TypeError("M must be an affine Hermitian expression or a matrix")
    alpha = _nonneg_multiplier(alpha)
    M = _aff(M)
    h = np.asarray(h)
    n = h.shape[0]
    Mh = (M @ h).reshape(n, 1)
    corner = (h.conj() @ M @ h).real - rhs - alpha * eps**2
    blk = bmat([[alpha * np.eye(n) + M, Mh], [Mh.H, _aff(corner).reshape(1, 1)]])
    return LmiBlock(blk, name)


def worst_case_quadratic(M, h, eps, maximize=True):
    """Exact max (or min) of (h + e)^H M (h + e) over ||e|| <= eps.

    A trust-region subproblem in the real coordinates of e; solved through the
    eigendecomposition of M and a scalar secular equation.
    """
    from scipy.optimize import brentq

    M = np.asarray(M, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if eps < 0:
        raise ValueError("uncertainty radius must be nonnegative")
    sign = -1.0 if maximize else 1.0
    nominal = float(np.vdot(h, M @ h).real)
    if eps == 0:
        return nominal
    # minimize sign * (h+e)^H M (h+e) = e^H B e + 2 Re(c^H e) + const, with B = sign*M, c = B h
    B = sign * 0.5 * (M + M.conj().T)
    d, V = np.linalg.eigh(B)
    c = V.conj().T @ (B @ h)
    scale = max(1.0, float(np.max(np.abs(d))))
    d_min = d[0]

    def step(mu):
        return -c / (d + mu)

    if d_min > 1e-12 * scale and np.linalg.norm(step(0.0)) <= eps:
        z = step(0.0)
    else:
        lo = max(0.0, -d_min)
        near = np.abs(d - d_min) <= 1e-10 * scale
        hard = np.all(np.abs(c[near]) <= 1e-12 * max(1.0, np.linalg.norm(c)))
        if hard:
            z = np.zeros_like(c)
            z[~near] = -c[~near] / (d[~near] + lo)
            nz = np.linalg.norm(z)
        if hard and nz <= eps:
            i = int(np.flatnonzero(near)[0])
            z[i] = np.sqrt(max(eps**2 - nz**2, 0.0))
        else:
            phi = lambda mu: 1.0 / np.linalg.norm(step(mu)) - 1.0 / eps
            a = lo + 1e-14 * scale
            while phi(a) > 0 and a > lo:
                a = lo + (a - lo) * 1e-3
                if a - lo < 1e-300:
                    break
            b = lo + 1.0
            while phi(b) < 0:
                b = lo + 2.0 * (b - lo)
            mu = brentq(phi, a, b, xtol=1e-15, rtol=1e-14, maxiter=500) if phi(a) < 0 else a
            z = step(mu)
    e = V @ z
    nrm = np.linalg.norm(e)
    if nrm > eps:
        e *= eps / nrm
    return float(np.vdot(h + e, M @ (h + e)).real)
