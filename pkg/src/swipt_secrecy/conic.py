"""Small affine-expression modeling layer and a conic program container.

Expressions are affine maps of a flat vector of real scalar variables.
Complex matrices are allowed in expressions (the variables stay real);
Hermitian LMIs are embedded into real symmetric cones before solving.
The interior-point work is delegated to Clarabel.
"""

from __future__ import annotations

import enum
import os
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max-iter"
    NUMERICAL_FAILURE = "numerical-failure"

    def __str__(self):
        return self.value


class Affine:
    """const + coef @ x, with coef carrying a trailing variable axis."""

    __slots__ = ("const", "coef")
    __array_ufunc__ = None  # let numpy defer to the reflected operators

    def __init__(self, const, coef=None):
        const = np.asarray(const)
        if coef is None:
            coef = np.zeros(const.shape + (0,), dtype=const.dtype)
        if coef.shape[:-1] != const.shape:
            raise ValueError(f"coef shape {coef.shape} does not extend const shape {const.shape}")
        self.const = const
        self.coef = coef

    # -- basic properties -------------------------------------------------
    @property
    def shape(self):
        return self.const.shape

    @property
    def ndim(self):
        return self.const.ndim

    @property
    def nvars(self):
        return self.coef.shape[-1]

    @property
    def is_complex(self):
        return np.iscomplexobj(self.const) or np.iscomplexobj(self.coef)

    def __len__(self):
        return self.shape[0]

    def __repr__(self):
        return f"Affine(shape={self.shape}, nvars={self.nvars}, complex={self.is_complex})"

    def padded(self, n):
        k = self.nvars
        if k == n:
            return self.coef
        if k > n:
            raise ValueError("cannot shrink variable axis")
        pad = np.zeros(self.shape + (n - k,), dtype=self.coef.dtype)
        return np.concatenate([self.coef, pad], axis=-1)

    # -- arithmetic -------------------------------------------------------
    @staticmethod
    def lift(v):
        return v if isinstance(v, Affine) else Affine(np.asarray(v))

    def _combine(self, other, sign):
        other = Affine.lift(other)
        n = max(self.nvars, other.nvars)
        const = self.const + sign * other.const
        a = self.padded(n)
        b = other.padded(n)
        shape = const.shape
        coef = np.broadcast_to(a, shape + (n,)) + sign * np.broadcast_to(b, shape + (n,))
        return Affine(const, coef)

    def __add__(self, other):
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1)

    def __rsub__(self, other):
        return (-self)._combine(other, 1)

    def __neg__(self):
        return Affine(-self.const, -self.coef)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Affine):
            if other.nvars == 0 or not other.coef.any():
                other = other.const
            elif self.nvars == 0 or not self.coef.any():
                return other * self.const
            else:
                raise TypeError("product of two variable expressions is not affine")
        c = np.asarray(other)
        const = self.const * c
        coef = self.coef * c[..., None]
        coef = np.broadcast_to(coef, const.shape + (self.nvars,))
        return Affine(const, np.array(coef))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Affine):
            raise TypeError("division by a variable expression")
        return self * (1.0 / np.asarray(other))

    def __matmul__(self, other):
        if isinstance(other, Affine):
            if other.nvars and other.coef.any():
                raise TypeError("product of two variable expressions is not affine")
            other = other.const
        B = np.asarray(other)
        const = self.const @ B
        moved = np.moveaxis(self.coef, -1, 0) @ B
        return Affine(const, np.moveaxis(moved, 0, -1))

    def __rmatmul__(self, other):
        A = np.asarray(other)
        const = A @ self.const
        coef = np.tensordot(A, self.coef, axes=([A.ndim - 1], [0]))
        return Affine(const, coef)

    # -- structural -------------------------------------------------------
    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Affine(self.const[idx], self.coef[idx + (slice(None),)])

    @property
    def T(self):
        if self.ndim < 2:
            return self
        return Affine(self.const.T, np.moveaxis(np.moveaxis(self.coef, -1, 0).swapaxes(-1, -2), 0, -1))

    def conj(self):
        if not self.is_complex:
            return self
        return Affine(self.const.conj(), self.coef.conj())

    @property
    def H(self):
        return self.T.conj()

    @property
    def real(self):
        return Affine(np.real(self.const), np.real(self.coef))

    @property
    def imag(self):
        return Affine(np.imag(self.const), np.imag(self.coef))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        const = self.const.reshape(shape)
        return Affine(const, self.coef.reshape(const.shape + (self.nvars,)))

    def sum(self):
        return Affine(self.const.sum(), self.coef.reshape(-1, self.nvars).sum(axis=0))

    def trace(self):
        return Affine(np.trace(self.const), np.trace(self.coef, axis1=0, axis2=1))

    def diag(self):
        return Affine(np.diagonal(self.const).copy(), np.diagonal(self.coef, axis1=0, axis2=1).T.copy())

    def value(self, x):
        x = np.asarray(x, dtype=float)
        n = self.nvars
        if n > x.size:
            raise ValueError("variable vector shorter than expression")
        return self.const + self.coef @ x[:n]

    def is_constant(self):
        return self.nvars == 0 or not self.coef.any()


def quad(h, X):
    """Real affine scalar h^H X h for constant vector h and Hermitian expression X."""
    h = np.asarray(h)
    return (h.conj() @ X @ h).real


def bmat(blocks):
    """Block matrix from a nested list of Affine / arrays / scalars."""
    rows = [[Affine.lift(b) for b in row] for row in blocks]
    n = max(b.nvars for row in rows for b in row)
    cplx = any(b.is_complex for row in rows for b in row)
    dt = complex if cplx else float
    const = np.block([[b.const.astype(dt) for b in row] for row in rows])
    coef = np.block([[np.moveaxis(b.padded(n), -1, 0).astype(dt) for b in row] for row in rows])
    return Affine(const, np.moveaxis(coef, 0, -1))


def hstack(items):
    items = [Affine.lift(b) for b in items]
    items = [b.reshape(1) if b.ndim == 0 else b for b in items]
    n = max(b.nvars for b in items)
    return Affine(np.concatenate([b.const for b in items]), np.concatenate([b.padded(n) for b in items]))


def embed_hermitian(H, tol=1e-8):
    """Real symmetric [[Re H, -Im H], [Im H, Re H]] of a Hermitian matrix or expression."""
    if isinstance(H, Affine):
        if not H.is_complex:
            return H
        return bmat([[H.real, -H.imag], [H.imag, H.real]])
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, np.abs(H).max(initial=0.0))
    if np.abs(H - H.conj().T).max(initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    if not np.iscomplexobj(H):
        return np.block([[H, np.zeros_like(H)], [np.zeros_like(H), H]]).astype(float)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


@dataclass
class LmiBlock:
    """An affine Hermitian matrix constrained to be PSD."""

    matrix: Affine
    name: str = ""

    def __post_init__(self):
        self.matrix = Affine.lift(self.matrix)
        M = self.matrix
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("LMI matrix must be square")
        for part in (M.const, np.moveaxis(M.coef, -1, 0)):
            scale = max(1.0, np.abs(part).max(initial=0.0))
            if np.abs(part - np.swapaxes(part, -1, -2).conj()).max(initial=0.0) > 1e-9 * scale:
                raise ValueError(f"LMI block {self.name!r} is not Hermitian")

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def real_matrix(self):
        return embed_hermitian(self.matrix)

    def value(self, x):
        return self.matrix.value(x)

    def min_eig(self, x):
        V = self.value(x)
        return float(np.linalg.eigvalsh((V + V.conj().T) / 2).min())


@dataclass
class SolverOptions:
    tol_feas: float = 1e-7
    tol_gap: float = 1e-7
    max_iter: int = 200
    verbose: bool | None = None

    def resolved_verbose(self):
        if self.verbose is not None:
            return self.verbose
        return os.environ.get("SWIPT_SOLVER_VERBOSE", "") == "1"


@dataclass
class SolveReport:
    status: Status
    primal: np.ndarray | None
    objective_value: float
    solve_time: float
    iterations: int = 0
    raw_status: str = ""
    max_violation: float = float("nan")


class ConicProgram:
    def __init__(self, name=""):
        self.name = name
        self.num_vars = 0
        self.var_names = []
        self.objective = Affine(0.0)
        self.sense = "min"
        self.linear_rows = []  # (kind, Affine 1-D real); kind in {"eq", "ge"}
        self.soc_blocks = []  # (t, x): ||x|| <= t
        self.exp_blocks = []  # (x, y, z): y exp(x / y) <= z
        self.lmi_blocks = []

    # -- variables --------------------------------------------------------
    def variable(self, shape=(), name="x", nonneg=False):
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        size = int(np.prod(shape, dtype=int))
        start = self.num_vars
        self.num_vars += size
        self.var_names.append((name, start, self.num_vars))
        coef = np.zeros((size, self.num_vars))
        coef[:, start:] = np.eye(size)
        v = Affine(np.zeros(size), coef).reshape(shape)
        if nonneg:
            self.add_ge(v)
        return v

    def complex_variable(self, n, name="w"):
        re = self.variable(n, name + ".re")
        im = self.variable(n, name + ".im")
        return re + 1j * im

    def hermitian(self, n, name="X", psd=False):
        """Hermitian n x n expression: n real diagonal entries plus Re/Im of the strict upper part."""
        m = n * (n - 1) // 2
        start = self.num_vars
        self.num_vars += n + 2 * m
        self.var_names.append((name, start, self.num_vars))
        coef = np.zeros((n, n, self.num_vars), dtype=complex)
        d = np.arange(n)
        coef[d, d, start + d] = 1.0
        if m:
            iu, ju = np.triu_indices(n, 1)
            re_idx = start + n + np.arange(m)
            im_idx = re_idx + m
            coef[iu, ju, re_idx] = 1.0
            coef[ju, iu, re_idx] = 1.0
            coef[iu, ju, im_idx] = 1j
            coef[ju, iu, im_idx] = -1j
        X = Affine(np.zeros((n, n), dtype=complex), coef)
        if psd:
            self.add_lmi(X, name)
        return X

    # -- constraints ------------------------------------------------------
    def _row(self, expr):
        e = Affine.lift(expr)
        if e.is_complex:
            raise TypeError("inequality rows must be real")
        return e.reshape(-1)

    def add_eq(self, lhs, rhs=0.0):
        e = Affine.lift(lhs) - rhs
        if e.is_complex:
            self.linear_rows.append(("eq", e.real.reshape(-1)))
            self.linear_rows.append(("eq", e.imag.reshape(-1)))
        else:
            self.linear_rows.append(("eq", e.reshape(-1)))

    def add_ge(self, lhs, rhs=0.0):
        self.linear_rows.append(("ge", self._row(Affine.lift(lhs) - rhs)))

    def add_le(self, lhs, rhs=0.0):
        self.linear_rows.append(("ge", self._row(Affine.lift(rhs) - lhs)))

    def add_soc(self, t, x):
        """||x||_2 <= t; complex x is split into real and imaginary parts."""
        t = self._row(t)
        if t.shape != (1,):
            raise ValueError("cone head must be scalar")
        x = Affine.lift(x).reshape(-1)
        if x.is_complex:
            x = hstack([x.real, x.imag])
        self.soc_blocks.append((t, x))

    def add_exp(self, x, y, z):
        """y * exp(x / y) <= z with y > 0."""
        self.exp_blocks.append(hstack([self._row(x), self._row(y), self._row(z)]))

    def add_lmi(self, block, name=""):
        if not isinstance(block, LmiBlock):
            block = LmiBlock(block, name)
        self.lmi_blocks.append(block)
        return block

    def minimize(self, expr):
        self.objective = self._row(expr)
        self.sense = "min"

    def maximize(self, expr):
        self.objective = self._row(expr)
        self.sense = "max"

    # -- export -----------------------------------------------------------
    def dump(self, path):
        """Write a plain-text listing of the program, one block per section."""
        n = self.num_vars
        np.set_printoptions(precision=12, linewidth=200, threshold=10**7)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# conic program {self.name}\nvariables {n}\n")
            for name, a, b in self.var_names:
                fh.write(f"var {name} {a} {b}\n")
            fh.write(f"objective {self.sense}\n{self.objective.const}\n{self.objective.padded(n)}\n")
            for kind, row in self.linear_rows:
                fh.write(f"linear {kind} rows={row.shape[0]}\nconst {row.const}\ncoef {row.padded(n)}\n")
            for t, x in self.soc_blocks:
                fh.write(f"soc dim={x.shape[0] + 1}\n{t.const} {t.padded(n)}\n{x.const}\n{x.padded(n)}\n")
            for e in self.exp_blocks:
                fh.write(f"exp\n{e.const}\n{e.padded(n)}\n")
            for blk in self.lmi_blocks:
                M = blk.real_matrix()
                fh.write(f"lmi {blk.name} dim={M.shape[0]}\nF0\n{M.const}\n")
                coef = M.padded(n)
                for i in np.flatnonzero(np.abs(coef).reshape(-1, n).max(axis=0) > 0):
                    fh.write(f"F{i + 1}\n{coef[:, :, i]}\n")


# -- solving --------------------------------------------------------------

_STATUS_MAP = {
    "Solved": Status.OPTIMAL,
    "AlmostSolved": Status.OPTIMAL,
    "PrimalInfeasible": Status.INFEASIBLE,
    "AlmostPrimalInfeasible": Status.INFEASIBLE,
    "DualInfeasible": Status.UNBOUNDED,
    "AlmostDualInfeasible": Status.UNBOUNDED,
    "MaxIterations": Status.MAX_ITER,
    "MaxTime": Status.MAX_ITER,
}


def max_violation(prog: ConicProgram, x) -> float:
    """Largest violation of any constraint block at x (absolute units)."""
    x = np.asarray(x, dtype=float)
    worst = 0.0
    for kind, row in prog.linear_rows:
        v = np.real(row.value(x))
        worst = max(worst, float(np.max(np.abs(v))) if kind == "eq" else float(np.max(-v, initial=0.0)))
    for t, z in prog.soc_blocks:
        worst = max(worst, float(np.linalg.norm(np.real(z.value(x))) - np.real(t.value(x))[0]))
    for e in prog.exp_blocks:
        a, b, c = np.real(e.value(x))
        if b > 0:
            gap = b * np.exp(min(a / b, 700.0)) - c
        else:
            gap = max(-b, a if c >= 0 else -c)
        worst = max(worst, float(gap))
    for blk in prog.lmi_blocks:
        worst = max(worst, -float(np.linalg.eigvalsh(np.real(blk.real_matrix().value(x)))[0]))
    return max(worst, 0.0)


def _svec_rows(M, n):
    """Rows of the scaled upper-triangle (column-major) vectorization."""
    d = M.shape[0]
    jj, ii = np.tril_indices(d)  # yields (i, j) with i <= j in column-major order
    scale = np.where(ii == jj, 1.0, np.sqrt(2.0) * 0.5)
    const = (M.const[ii, jj] + M.const[jj, ii]) * np.where(ii == jj, 0.5, scale)
    coef = M.padded(n)
    rows = (coef[ii, jj] + coef[jj, ii]) * np.where(ii == jj, 0.5, scale)[:, None]
    return np.real(const).astype(float), np.real(rows).astype(float)


def solve(prog: ConicProgram, options: SolverOptions | None = None) -> SolveReport:
    import clarabel

    opts = options or SolverOptions()
    n = prog.num_vars
    blocks_b, blocks_G, cones = [], [], []

    # Clarabel form: A x + s = b, s in K.  For g(x) = c + G x in K: A = -G, b = c.
    def push(const, coef, cone):
        blocks_b.append(np.asarray(const, dtype=float).reshape(-1))
        blocks_G.append(np.asarray(coef, dtype=float).reshape(-1, n))
        cones.append(cone)

    eqs = [r for k, r in prog.linear_rows if k == "eq"]
    if eqs:
        push(np.concatenate([r.const for r in eqs]), np.concatenate([r.padded(n) for r in eqs]),
             clarabel.ZeroConeT(sum(r.shape[0] for r in eqs)))
    ges = [r for k, r in prog.linear_rows if k == "ge"]
    if ges:
        push(np.concatenate([r.const for r in ges]), np.concatenate([r.padded(n) for r in ges]),
             clarabel.NonnegativeConeT(sum(r.shape[0] for r in ges)))
    for t, x in prog.soc_blocks:
        push(np.concatenate([t.const, x.const]), np.concatenate([t.padded(n), x.padded(n)]),
             clarabel.SecondOrderConeT(x.shape[0] + 1))
    for e in prog.exp_blocks:
        push(e.const, e.padded(n), clarabel.ExponentialConeT())
    for blk in prog.lmi_blocks:
        M = blk.real_matrix()
        c, G = _svec_rows(M, n)
        push(c, G, clarabel.PSDTriangleConeT(M.shape[0]))

    if blocks_b:
        b = np.concatenate(blocks_b)
        A = sp.csc_matrix(-np.concatenate(blocks_G))
    else:
        b = np.zeros(0)
        A = sp.csc_matrix((0, n))
    obj = prog.objective
    q = obj.padded(n).reshape(-1).astype(float)
    if prog.sense == "max":
        q = -q
    Pm = sp.csc_matrix((n, n))

    settings = clarabel.DefaultSettings()
    settings.verbose = opts.resolved_verbose()
    settings.max_iter = opts.max_iter
    settings.tol_feas = opts.tol_feas
    settings.tol_gap_abs = opts.tol_gap
    settings.tol_gap_rel = opts.tol_gap

    t0 = time.perf_counter()
    try:
        solver = clarabel.DefaultSolver(Pm, q, A, b, cones, settings)
        res = solver.solve()
    except Exception as exc:  # surfaced, never raised
        return SolveReport(Status.NUMERICAL_FAILURE, None, float("nan"), time.perf_counter() - t0, 0, repr(exc))
    elapsed = time.perf_counter() - t0
    raw = str(res.status)
    status = _STATUS_MAP.get(raw, Status.NUMERICAL_FAILURE)
    x = np.asarray(res.x, dtype=float)
    if status in (Status.OPTIMAL, Status.MAX_ITER) and np.all(np.isfinite(x)):
        viol = max_violation(prog, x)
        scale = max(1.0, float(np.max(np.abs(b), initial=0.0)), float(np.max(np.abs(x), initial=0.0)))
        if raw.startswith("Almost") and viol > opts.tol_feas * scale:
            # reduced-accuracy answer: keep it as an uncertified iterate when it is
            # close, otherwise report failure
            if viol > 100 * opts.tol_feas * scale:
                return SolveReport(Status.NUMERICAL_FAILURE, None, float("nan"), elapsed, int(res.iterations), raw, viol)
            status = Status.MAX_ITER
        val = float(obj.value(x)) if obj.ndim == 0 else float(obj.value(x)[0])
        return SolveReport(status, x, val, elapsed, int(res.iterations), raw, viol)
    if status in (Status.OPTIMAL, Status.MAX_ITER):
        status = Status.NUMERICAL_FAILURE
    return SolveReport(status, None, float("nan"), elapsed, int(res.iterations), raw)
