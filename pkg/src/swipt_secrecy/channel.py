"""Channel data model, metrics and uncertainty-ball sampling."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .conic import Status


def _frozen(a, dtype=complex, ndim=1, name="array"):
    a = np.array(a, dtype=dtype)
    if a.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelSet:
    h_s: np.ndarray
    h_e: np.ndarray  # (K, n_t)
    h_p: np.ndarray  # (L, n_t)
    sigma_s2: float = 1.0
    sigma_e2: float = 1.0

    def __post_init__(self):
        h_s = _frozen(self.h_s, name="h_s")
        h_e = _frozen(np.atleast_2d(np.asarray(self.h_e, dtype=complex)), ndim=2, name="h_e")
        h_p = _frozen(np.atleast_2d(np.asarray(self.h_p, dtype=complex)), ndim=2, name="h_p")
        n = h_s.shape[0]
        if n < 1:
            raise ValueError("need at least one transmit antenna")
        if h_e.shape[0] < 1 or h_p.shape[0] < 1:
            raise ValueError("need at least one eavesdropper and one EH receiver")
        if h_e.shape[1] != n or h_p.shape[1] != n:
            raise ValueError("all channel vectors must have the same length")
        if not (self.sigma_s2 > 0 and self.sigma_e2 > 0):
            raise ValueError("noise powers must be strictly positive")
        for a in (h_s, h_e, h_p):
            if not np.all(np.isfinite(a)):
                raise ValueError("channel entries must be finite")
        object.__setattr__(self, "h_s", h_s)
        object.__setattr__(self, "h_e", h_e)
        object.__setattr__(self, "h_p", h_p)
        object.__setattr__(self, "sigma_s2", float(self.sigma_s2))
        object.__setattr__(self, "sigma_e2", float(self.sigma_e2))

    @property
    def n_t(self):
        return self.h_s.shape[0]

    @property
    def K(self):
        return self.h_e.shape[0]

    @property
    def L(self):
        return self.h_p.shape[0]

    def perturbed(self, e_s, e_e, e_p):
        return replace(self, h_s=self.h_s + e_s, h_e=self.h_e + e_e, h_p=self.h_p + e_p)


@dataclass(frozen=True)
class UncertaintyModel:
    nominal: ChannelSet
    eps_s: float = 0.0
    eps_e: np.ndarray = None
    eps_l: np.ndarray = None
    eps_A: np.ndarray = None

    def __post_init__(self):
        ch = self.nominal
        fill = {"eps_e": ch.K, "eps_l": ch.L, "eps_A": ch.n_t}
        for name, size in fill.items():
            v = getattr(self, name)
            v = np.zeros(size) if v is None else np.broadcast_to(np.asarray(v, dtype=float), (size,)).copy()
            if v.shape != (size,):
                raise ValueError(f"{name} must have length {size}")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if not (self.eps_s >= 0 and np.isfinite(self.eps_s)):
            raise ValueError("eps_s must be finite and nonnegative")
        object.__setattr__(self, "eps_s", float(self.eps_s))

    @classmethod
    def uniform(cls, nominal, eps, eps_A=0.0):
        """Same radius on every channel link; per-antenna matrix radius given separately."""
        return cls(nominal, eps, np.full(nominal.K, eps), np.full(nominal.L, eps), np.full(nominal.n_t, eps_A))

    @property
    def is_exact(self):
        return self.eps_s == 0 and not self.eps_e.any() and not self.eps_l.any() and not self.eps_A.any()


@dataclass(frozen=True)
class SystemParams:
    n_t: int
    P: float
    p_i: np.ndarray | None = None  # None: no per-antenna caps
    E_targets: np.ndarray = None
    R_target: float = 0.0

    def __post_init__(self):
        if int(self.n_t) != self.n_t or self.n_t < 1:
            raise ValueError("n_t must be a positive integer")
        if not (np.isfinite(self.P) and self.P >= 0):
            raise ValueError("P must be finite and nonnegative")
        if self.p_i is not None:
            p = np.broadcast_to(np.asarray(self.p_i, dtype=float), (self.n_t,)).copy()
            if np.any(p < 0) or not np.all(np.isfinite(p)):
                raise ValueError("p_i must be finite and nonnegative")
            p.setflags(write=False)
            object.__setattr__(self, "p_i", p)
        E = np.zeros(1) if self.E_targets is None else np.atleast_1d(np.asarray(self.E_targets, dtype=float)).copy()
        if np.any(E < 0) or not np.all(np.isfinite(E)):
            raise ValueError("E_targets must be finite and nonnegative")
        E.setflags(write=False)
        object.__setattr__(self, "E_targets", E)
        if not (np.isfinite(self.R_target) and self.R_target >= 0):
            raise ValueError("R_target must be finite and nonnegative")
        object.__setattr__(self, "P", float(self.P))
        object.__setattr__(self, "n_t", int(self.n_t))

    def energy_targets(self, L):
        """Targets broadcast to L receivers (a single value applies to all)."""
        E = self.E_targets
        if E.size == 1:
            return np.full(L, E[0])
        if E.size != L:
            raise ValueError(f"expected {L} energy targets, got {E.size}")
        return E

    def with_(self, **kw):
        return replace(self, **kw)


class Kind(str, enum.Enum):
    VECTOR = "vector"
    COVARIANCE = "covariance-pair"

    def __str__(self):
        return self.value


@dataclass
class BeamformerSolution:
    kind: Kind
    solver_status: Status
    w: np.ndarray | None = None
    Q_s: np.ndarray | None = None
    W: np.ndarray | None = None
    achieved_rate: float = 0.0
    achieved_energy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    objective: float = float("nan")
    trace: list = field(default_factory=list)
    solve_time: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.solver_status in (Status.OPTIMAL, Status.MAX_ITER)

    @property
    def power(self):
        if self.kind == Kind.VECTOR:
            return float(np.vdot(self.w, self.w).real) if self.w is not None else float("nan")
        if self.Q_s is None:
            return float("nan")
        return float(np.trace(self.Q_s + self.W).real)

    @property
    def an_power(self):
        if self.kind == Kind.VECTOR or self.W is None:
            return 0.0
        return float(np.trace(self.W).real)

    @classmethod
    def failed(cls, kind, status, iterations=0, **info):
        return cls(kind=kind, solver_status=status, iterations=iterations, info=info)


# -- metrics ---------------------------------------------------------------

def _as_pair(sol, n):
    """Return (Q_s, W) or (w, None) from a solution object, a vector, or a pair."""
    if isinstance(sol, BeamformerSolution):
        if sol.kind == Kind.VECTOR:
            return np.asarray(sol.w, dtype=complex), None
        return np.asarray(sol.Q_s, dtype=complex), np.asarray(sol.W, dtype=complex)
    if isinstance(sol, tuple):
        Q, W = sol
        return np.asarray(Q, dtype=complex), np.asarray(W, dtype=complex)
    return np.asarray(sol, dtype=complex), None


def _check(a, n):
    if a.shape[0] != n or (a.ndim == 2 and a.shape != (n, n)):
        raise ValueError(f"dimension mismatch: expected {n} antennas, got shape {a.shape}")


def _qf(H, X):
    """Rows of H (m, n) against Hermitian X: real h^H X h for each row."""
    return np.einsum("mi,ij,mj->m", H.conj(), X, H).real


def link_sinrs(sol, ch):
    """(user SINR, eavesdropper SINRs) for a vector or covariance-pair design."""
    a, W = _as_pair(sol, ch.n_t)
    _check(a, ch.n_t)
    if W is None:
        g_s = abs(np.vdot(ch.h_s, a)) ** 2 / ch.sigma_s2
        g_e = np.abs(ch.h_e.conj() @ a) ** 2 / ch.sigma_e2
        return g_s, g_e
    _check(W, ch.n_t)
    hs = ch.h_s[None, :]
    g_s = _qf(hs, a)[0] / (_qf(hs, W)[0] + ch.sigma_s2)
    g_e = _qf(ch.h_e, a) / (_qf(ch.h_e, W) + ch.sigma_e2)
    return g_s, g_e


def secrecy_rate(sol, ch: ChannelSet) -> float:
    g_s, g_e = link_sinrs(sol, ch)
    r = np.log2(1.0 + max(g_s, 0.0)) - np.max(np.log2(1.0 + np.maximum(g_e, 0.0)))
    return float(max(r, 0.0))


def harvested_energy(sol, ch: ChannelSet) -> np.ndarray:
    a, W = _as_pair(sol, ch.n_t)
    _check(a, ch.n_t)
    if W is None:
        return np.abs(ch.h_p.conj() @ a) ** 2
    _check(W, ch.n_t)
    return np.maximum(_qf(ch.h_p, a + W), 0.0)


# -- random generation -------------------------------------------------------

def cscg(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_channels(n_t: int, K: int, L: int, seed: int) -> ChannelSet:
    if min(n_t, K, L) < 1:
        raise ValueError("n_t, K and L must be at least 1")
    rng = np.random.default_rng(seed)
    h_s = cscg(rng, n_t)
    h_e = cscg(rng, (K, n_t))
    h_p = cscg(rng, (L, n_t))
    return ChannelSet(h_s, h_e, h_p, 1.0, 1.0)


def ball_points(rng, count, n, radius, boundary=None):
    """count complex n-vectors uniform in the ball of given radius.

    ``boundary`` is an optional boolean mask selecting samples pushed to the sphere.
    """
    g = rng.standard_normal((count, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.uniform(size=count) ** (1.0 / (2 * n))
    if boundary is not None:
        r = np.where(boundary, 1.0, r)
    v = g * (radius * r)[:, None]
    out = v[:, :n] + 1j * v[:, n:]
    if radius > 0:
        nrm = np.linalg.norm(out, axis=1)
        over = nrm > radius
        out[over] *= (radius / nrm[over])[:, None]
    return out


def sample_uncertainty_ball(um: UncertaintyModel, seed: int) -> ChannelSet:
    ch = um.nominal
    rng = np.random.default_rng(seed)
    n = ch.n_t
    e_s = ball_points(rng, 1, n, um.eps_s)[0]
    e_e = np.stack([ball_points(rng, 1, n, r)[0] for r in um.eps_e])
    e_p = np.stack([ball_points(rng, 1, n, r)[0] for r in um.eps_l])
    return ch.perturbed(e_s, e_e, e_p)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def mrt(ch: ChannelSet, P: float) -> np.ndarray:
    nrm = np.linalg.norm(ch.h_s)
    if nrm == 0:
        raise ValueError("user channel is identically zero")
    return np.sqrt(P) * ch.h_s / nrm
