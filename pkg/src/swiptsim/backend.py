"""Small conic modeling layer over the Clarabel interior-point solver.

The per-slot solvers assemble their convex subproblems through this module:
complex beamformer vectors, Hermitian matrix blocks and real scalars, with a
linear objective and constraints drawn from {linear, sum-of-squares below an
affine bound, hyperbolic products (quadratic-over-linear), log hypographs,
positive-semidefinite blocks}.

Complex quantities are real-embedded internally: a complex vector becomes
its stacked real/imaginary parts, and a Hermitian PSD block becomes the
standard symmetric embedding [[X, -Y], [Y, X]] fed to the solver's scaled
triangular PSD cone.  Callers only ever see complex semantics.

Each cone block is normalized by its largest coefficient magnitude before
the solve; cones are invariant under positive scaling, so this only
improves conditioning.  Dual values are rescaled back on extraction.
"""

import numpy as np
import scipy.sparse as sp
import clarabel
from dataclasses import dataclass, field

_SQRT2 = np.sqrt(2.0)


_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_F = np.empty(0, dtype=float)


class Affine:
    """Real affine functional c . x + const over the flattened variable vector."""

    __slots__ = ("cols", "vals", "const")

    def __init__(self, cols=None, vals=None, const=0.0):
        self.cols = np.asarray(cols if cols is not None else _EMPTY_I, dtype=np.int64)
        self.vals = np.asarray(vals if vals is not None else _EMPTY_F, dtype=float)
        self.const = float(const)

    @classmethod
    def _raw(cls, cols, vals, const=0.0):
        out = cls.__new__(cls)
        out.cols = cols
        out.vals = vals
        out.const = const
        return out

    @classmethod
    def constant(cls, value):
        return cls(const=value)

    def __add__(self, other):
        if isinstance(other, Affine):
            return Affine._raw(
                np.concatenate([self.cols, other.cols]),
                np.concatenate([self.vals, other.vals]),
                self.const + other.const,
            )
        return Affine._raw(self.cols, self.vals, self.const + float(other))

    __radd__ = __add__

    def __neg__(self):
        return Affine._raw(self.cols, -self.vals, -self.const)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Affine) else -float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def __mul__(self, scalar):
        s = float(scalar)
        return Affine._raw(self.cols, self.vals * s, self.const * s)

    __rmul__ = __mul__


@dataclass
class ComplexAffine:
    """Complex affine scalar held as its real and imaginary parts."""

    re: Affine
    im: Affine


@dataclass
class _Var:
    kind: str          # "complex", "hermitian", "real"
    dim: int
    offset: int
    size: int          # number of real components
    unit: np.ndarray = None   # per-component solver units (real vars only)
    span: np.ndarray = None   # cached column indices


@dataclass
class _Block:
    kind: str          # "zero", "nonneg", "soc", "exp", "psd"
    rows: list         # list of Affine, one per cone row (s_i = row_i(x))
    handle: int
    scale: float = 1.0


@dataclass
class SubproblemSolution:
    """Solver output with the tolerance contract attached.

    ``status == "optimal"`` guarantees the primal feasibility residual and
    relative duality gap reported by the interior-point solver are within
    the requested tolerances.
    """

    status: str
    objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    solve_time: float
    _values: dict = field(default_factory=dict, repr=False)
    _duals: dict = field(default_factory=dict, repr=False)

    def value(self, name):
        return self._values[name]

    def dual(self, handle):
        """Dual vector of one constraint block (where available)."""
        return self._duals.get(handle)

    @property
    def ok(self):
        return self.status == "optimal"


class ConicSubproblem:
    """Builder for one convex conic subproblem."""

    def __init__(self):
        self._vars = {}
        self._n = 0
        self._obj_cols = []
        self._obj_vals = []
        self._obj_const = 0.0
        self._zero_rows = []     # list of (Affine, handle)
        self._nonneg_rows = []   # list of (Affine, handle)
        self._blocks = []        # conic blocks
        self._next_handle = 0
        self._psd_vars = []

    # ----- variables ---------------------------------------------------

    def _register(self, name, kind, dim, size, unit=None):
        if name in self._vars:
            raise ValueError(f"variable {name!r} already declared")
        var = _Var(kind, dim, self._n, size, unit,
                   np.arange(self._n, self._n + size, dtype=np.int64))
        self._vars[name] = var
        self._n += size
        return name

    def add_complex(self, name, dim):
        """Complex vector variable of length dim."""
        return self._register(name, "complex", dim, 2 * dim)

    def add_hermitian(self, name, dim):
        """Hermitian dim x dim matrix variable (not PSD by itself)."""
        return self._register(name, "hermitian", dim, dim * dim)

    def add_reals(self, name, dim=1, lb=None, ub=None, unit=None):
        """Real vector variable with optional box bounds.

        ``unit`` sets the internal solver scale of each component (the value
        seen by callers is unit * internal); pick it near the variable's
        expected magnitude when that magnitude is far from 1.
        """
        if unit is None:
            u = np.ones(dim)
        else:
            u = np.broadcast_to(np.asarray(unit, dtype=float), (dim,)).copy()
            if np.any(u <= 0) or not np.all(np.isfinite(u)):
                raise ValueError("variable units must be positive and finite")
        self._register(name, "real", dim, dim, unit=u)
        if lb is not None:
            lo = np.broadcast_to(np.asarray(lb, dtype=float), (dim,))
            for i in range(dim):
                if np.isfinite(lo[i]):
                    self.add_ineq(self.entry(name, i) - lo[i])
        if ub is not None:
            hi = np.broadcast_to(np.asarray(ub, dtype=float), (dim,))
            for i in range(dim):
                if np.isfinite(hi[i]):
                    self.add_ineq(hi[i] - self.entry(name, i))
        return name

    # ----- affine expression helpers ------------------------------------

    def entry(self, name, i=0):
        var = self._vars[name]
        if var.kind != "real":
            raise ValueError("entry() is for real variables")
        return Affine._raw(var.span[i:i + 1], var.unit[i:i + 1].copy())

    def dot_complex(self, name, c):
        """c^H f as a complex affine scalar, c a constant complex vector."""
        var = self._vars[name]
        if var.kind != "complex":
            raise ValueError("dot_complex() needs a complex variable")
        c = np.asarray(c, dtype=complex)
        cols = var.span
        # f = fr + j fi;  c^H f = (cr - j ci)^T (fr + j fi)
        re = Affine._raw(cols, np.concatenate([c.real, c.imag]))
        im = Affine._raw(cols, np.concatenate([-c.imag, c.real]))
        return ComplexAffine(re, im)

    def re_dot(self, name, c):
        """Re(c^H f) for a complex variable."""
        return self.dot_complex(name, c).re

    def herm_form(self, name, C):
        """<C, F> = tr(C^H F), a real functional of a Hermitian variable."""
        var = self._vars[name]
        if var.kind != "hermitian":
            raise ValueError("herm_form() needs a Hermitian variable")
        C = np.asarray(C, dtype=complex)
        n = var.dim
        iu, ju = np.triu_indices(n, k=1)
        cols = np.concatenate([
            np.arange(var.offset, var.offset + n),                    # diagonal
            var.offset + n + np.arange(iu.size),                      # Re offdiag
            var.offset + n + iu.size + np.arange(iu.size),            # Im offdiag
        ])
        vals = np.concatenate([
            C.real[np.arange(n), np.arange(n)],
            2.0 * C.real[iu, ju],
            2.0 * C.imag[iu, ju],
        ])
        return Affine(cols, vals)

    def trace(self, name):
        var = self._vars[name]
        return Affine(np.arange(var.offset, var.offset + var.dim), np.ones(var.dim))

    # ----- objective -----------------------------------------------------

    def add_objective(self, aff):
        """Accumulate a linear objective term (minimized)."""
        if isinstance(aff, (int, float)):
            self._obj_const += float(aff)
            return
        self._obj_cols.append(aff.cols)
        self._obj_vals.append(aff.vals)
        self._obj_const += aff.const

    # ----- constraints ---------------------------------------------------

    def _handle(self):
        h = self._next_handle
        self._next_handle += 1
        return h

    def add_eq(self, aff):
        """aff == 0."""
        h = self._handle()
        self._zero_rows.append((aff, h))
        return h

    def add_ineq(self, aff):
        """aff >= 0."""
        h = self._handle()
        self._nonneg_rows.append((aff, h))
        return h

    def norm_sq_leq(self, name, bound, scale=1.0):
        """||f||^2 <= bound for a complex (or real) vector variable.

        ``scale`` is a conditioning hint near the magnitude of the bound at
        the expected solution; the cone encodes ||f||^2/scale <= bound/scale.
        """
        var = self._vars[name]
        if isinstance(bound, (int, float)):
            bound = Affine.constant(bound)
        h = self._handle()
        inv, inv_sq = 1.0 / scale, 1.0 / np.sqrt(scale)
        rows = [inv * bound + 1.0]
        rows += [
            Affine([var.offset + i], [2.0 * inv_sq]) for i in range(var.size)
        ]
        rows.append(inv * bound - 1.0)
        self._blocks.append(_Block("soc", rows, h))
        return h

    def add_sq_leq(self, terms, bound, scale=1.0):
        """sum of squared affine terms <= bound (affine).

        Terms may be real or complex affine scalars; complex terms contribute
        both quadrature components.  Encoded as the second-order cone
        ||[2 z; bound - 1]|| <= bound + 1 after dividing through by the
        conditioning hint ``scale``.
        """
        if isinstance(bound, (int, float)):
            bound = Affine.constant(bound)
        stack = []
        for t in terms:
            if isinstance(t, ComplexAffine):
                stack += [t.re, t.im]
            else:
                stack.append(t)
        h = self._handle()
        inv, inv_sq = 1.0 / scale, 1.0 / np.sqrt(scale)
        rows = [inv * bound + 1.0] + [(2.0 * inv_sq) * z for z in stack] \
            + [inv * bound - 1.0]
        self._blocks.append(_Block("soc", rows, h))
        return h

    def add_hyperbolic(self, x, y, w, balance=1.0):
        """x * y >= w^2 with x, y >= 0 implied; w affine or constant.

        This is the rotated-cone encoding used for every quadratic-over-linear
        term: ||[2 w; x - y]|| <= x + y.  ``balance`` rebalances the product
        as (balance x)(y / balance) and should sit near sqrt(y/x) at the
        expected solution when the two factors live on very different scales.
        """
        if isinstance(x, (int, float)):
            x = Affine.constant(x)
        if isinstance(y, (int, float)):
            y = Affine.constant(y)
        if isinstance(w, (int, float)):
            w = Affine.constant(w)
        h = self._handle()
        c = float(balance)
        xs, ys = c * x, (1.0 / c) * y
        self._blocks.append(_Block("soc", [xs + ys, 2.0 * w, xs - ys], h))
        return h

    def add_log_hyp(self, t, u):
        """t <= ln(u) via one exponential cone (t, 1, u)."""
        if isinstance(t, (int, float)):
            t = Affine.constant(t)
        if isinstance(u, (int, float)):
            u = Affine.constant(u)
        h = self._handle()
        self._blocks.append(_Block("exp", [t, Affine.constant(1.0), u], h))
        return h

    def add_psd(self, name):
        """Constrain a Hermitian variable to be positive semidefinite."""
        var = self._vars[name]
        if var.kind != "hermitian":
            raise ValueError("add_psd() needs a Hermitian variable")
        h = self._handle()
        self._psd_vars.append((name, h))
        return h

    # ----- lowering ------------------------------------------------------

    def _psd_block(self, name, handle):
        """Rows of the scaled-triangle cone for the embedded Hermitian block.

        For Hermitian M = X + jY the embedding T = [[X, -Y], [Y, X]] is PSD
        iff M is.  The cone consumes svec(T): column-major upper triangle
        with off-diagonal entries scaled by sqrt(2).
        """
        var = self._vars[name]
        n = var.dim
        iu, ju = np.triu_indices(n, k=1)
        pos = {}  # (i, j) i<=j -> column index of Re / Im parameters
        diag_cols = np.arange(var.offset, var.offset + n)
        re_cols = {}
        im_cols = {}
        for idx in range(iu.size):
            re_cols[(iu[idx], ju[idx])] = var.offset + n + idx
            im_cols[(iu[idx], ju[idx])] = var.offset + n + iu.size + idx

        def T_entry(r, c):
            """Affine for T[r, c] of the 2n x 2n embedding."""
            br, bc = r // n, c // n
            i, j = r % n, c % n
            if br == bc:            # X block: Re M
                if i == j:
                    return Affine([diag_cols[i]], [1.0])
                a, b = (i, j) if i < j else (j, i)
                return Affine([re_cols[(a, b)]], [1.0])
            # off blocks: -Y (top right) or Y (bottom left); Y = Im M, Y_ii = 0
            sign = -1.0 if (br == 0 and bc == 1) else 1.0
            if i == j:
                return Affine.constant(0.0)
            if i < j:
                return Affine([im_cols[(i, j)]], [sign * 1.0])
            return Affine([im_cols[(j, i)]], [-sign * 1.0])

        rows = []
        m = 2 * n
        for c in range(m):
            for r in range(c + 1):
                aff = T_entry(r, c)
                rows.append(aff if r == c else _SQRT2 * aff)
        return _Block("psd", rows, handle)

    def build(self):
        """Assemble (P, q, A, b, cones) plus bookkeeping for extraction."""
        blocks = list(self._blocks) + [
            self._psd_block(name, h) for name, h in self._psd_vars
        ]

        data, rows_idx, cols_idx, b = [], [], [], []
        cones = []
        handle_rows = {}
        handle_scale = {}
        nrow = 0

        def emit(aff, scale):
            nonlocal nrow
            if aff.cols.size:
                data.append(-aff.vals * scale)
                rows_idx.append(np.full(aff.cols.size, nrow, dtype=np.int64))
                cols_idx.append(aff.cols)
            b.append(aff.const * scale)
            nrow += 1

        def row_scale(aff):
            mag = max(
                np.max(np.abs(aff.vals)) if aff.vals.size else 0.0, abs(aff.const)
            )
            if mag <= 0.0 or not np.isfinite(mag):
                return 1.0
            return float(np.clip(1.0 / mag, 1e-10, 1e10))

        for pool, conet in ((self._zero_rows, clarabel.ZeroConeT),
                            (self._nonneg_rows, clarabel.NonnegativeConeT)):
            if not pool:
                continue
            for aff, h in pool:
                s = row_scale(aff)
                handle_rows[h] = (nrow, nrow + 1)
                handle_scale[h] = s
                emit(aff, s)
            cones.append(conet(len(pool)))

        for blk in blocks:
            mag = 0.0
            for aff in blk.rows:
                if aff.vals.size:
                    mag = max(mag, float(np.max(np.abs(aff.vals))))
                mag = max(mag, abs(aff.const))
            s = 1.0 if blk.kind == "exp" else (
                float(np.clip(1.0 / mag, 1e-10, 1e10)) if mag > 0 else 1.0
            )
            handle_rows[blk.handle] = (nrow, nrow + len(blk.rows))
            handle_scale[blk.handle] = s
            for aff in blk.rows:
                emit(aff, s)
            if blk.kind == "soc":
                cones.append(clarabel.SecondOrderConeT(len(blk.rows)))
            elif blk.kind == "exp":
                cones.append(clarabel.ExponentialConeT())
            elif blk.kind == "psd":
                side = int(round((np.sqrt(8 * len(blk.rows) + 1) - 1) / 2))
                cones.append(clarabel.PSDTriangleConeT(side))

        A = sp.csc_matrix(
            (
                np.concatenate(data) if data else np.zeros(0),
                (
                    np.concatenate(rows_idx) if rows_idx else np.zeros(0, np.int64),
                    np.concatenate(cols_idx) if cols_idx else np.zeros(0, np.int64),
                ),
            ),
            shape=(nrow, self._n),
        )
        q = np.zeros(self._n)
        if self._obj_cols:
            np.add.at(q, np.concatenate(self._obj_cols), np.concatenate(self._obj_vals))
        return A, q, np.asarray(b), cones, handle_rows, handle_scale

    def _extract(self, x):
        values = {}
        for name, var in self._vars.items():
            seg = x[var.offset:var.offset + var.size]
            if var.kind == "real":
                values[name] = seg * var.unit
            elif var.kind == "complex":
                values[name] = seg[:var.dim] + 1j * seg[var.dim:]
            else:
                n = var.dim
                iu, ju = np.triu_indices(n, k=1)
                M = np.zeros((n, n), dtype=complex)
                M[np.arange(n), np.arange(n)] = seg[:n]
                off = seg[n:n + iu.size] + 1j * seg[n + iu.size:]
                M[iu, ju] = off
                M[ju, iu] = off.conj()
                values[name] = M
        return values


_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "max-iter",
    "MaxTime": "max-iter",
}


def solve_subproblem(problem, feas_tol=1e-8, gap_tol=1e-8, max_iter=200):
    """Solve a built ConicSubproblem; failures surface as a status, never a raise."""
    A, q, b, cones, handle_rows, handle_scale = problem.build()
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = feas_tol
    settings.tol_gap_rel = gap_tol
    settings.tol_gap_abs = gap_tol
    settings.max_iter = max_iter
    P = sp.csc_matrix((problem._n, problem._n))
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    sol = solver.solve()

    raw = str(sol.status)
    status = _STATUS_MAP.get(raw, "numerical-failure")
    if raw == "AlmostSolved":
        # accept only if the reduced-accuracy answer still meets a loosened
        # version of the contract; otherwise report the failure
        if not (sol.r_prim < 1e3 * feas_tol and sol.r_dual < 1e3 * feas_tol):
            status = "numerical-failure"

    x = np.asarray(sol.x)
    z = np.asarray(sol.z)
    values = problem._extract(x) if x.size == problem._n else {}
    duals = {}
    for h, (r0, r1) in handle_rows.items():
        if z.size >= r1:
            duals[h] = z[r0:r1] * handle_scale[h]
    return SubproblemSolution(
        status=status,
        objective=float(sol.obj_val) + problem._obj_const,
        dual_objective=float(sol.obj_val_dual) + problem._obj_const,
        primal_residual=float(sol.r_prim),
        dual_residual=float(sol.r_dual),
        iterations=int(sol.iterations),
        solve_time=float(sol.solve_time),
        _values=values,
        _duals=duals,
    )
