"""Generator representations: dense matrices, degenerate pencils, regularized pairs.

A pencil (M, L) realizes the multivalued generator through the single-valued
pseudo-resolvent J(lambda) = (lambda M - L)^{-1} M.  The regularized kind
keeps an injective C alongside a dense A and its resolvent carries C on the
right.  All operators are finite matrices; norms are spectral norms.
"""

import json
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .exceptions import DomainError, SingularOperatorError
from .quadrature import geometric_edges, panel_rule

__all__ = [
    "Operator",
    "resolvent",
    "ConditionPReport",
    "check_condition_P",
    "condition_p_grid",
    "ContourSpec",
    "fractional_power_neg",
    "interpolation_norm",
    "operator_to_json",
    "operator_from_json",
]

_SINGULAR_RCOND = 1e13


@dataclass
class Operator:
    """A generator description of kind dense, pencil, or regularized."""

    kind: str
    dim: int
    a: np.ndarray | None = None
    m: np.ndarray | None = None
    l: np.ndarray | None = None
    c: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @staticmethod
    def dense(a):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        _require_square(a, "A")
        return Operator(kind="dense", dim=a.shape[0], a=a)

    @staticmethod
    def pencil(m, l):
        m = np.atleast_2d(np.asarray(m, dtype=float))
        l = np.atleast_2d(np.asarray(l, dtype=float))
        _require_square(m, "M")
        _require_square(l, "L")
        if m.shape != l.shape:
            raise DomainError("pencil matrices must share a shape")
        # regularity probe: det(lambda M - L) must not vanish identically
        rng = np.random.default_rng(12345)
        for _ in range(4):
            lam = complex(rng.normal(), rng.normal()) * 10.0
            if np.linalg.matrix_rank(lam * m - l) == m.shape[0]:
                break
        else:
            raise DomainError("pencil appears singular: det(lambda M - L) == 0 identically")
        return Operator(kind="pencil", dim=m.shape[0], m=m, l=l)

    @staticmethod
    def regularized(a, c):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        c = np.atleast_2d(np.asarray(c, dtype=float))
        _require_square(a, "A")
        _require_square(c, "C")
        if a.shape != c.shape:
            raise DomainError("A and C must share a shape")
        if np.linalg.matrix_rank(c) < c.shape[0]:
            raise DomainError("regularizer C must be injective (full rank)")
        return Operator(kind="regularized", dim=a.shape[0], a=a, c=c)


def _require_square(mat, name):
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DomainError(f"{name} must be a square matrix")


def _solve_factorized(op, lam, rhs):
    """LU-backed solve of (lambda I - A) or (lambda M - L), cached per lambda."""
    key = complex(lam)
    with op._lock:
        fac = op._cache.get(key)
    if fac is None:
        if op.kind == "pencil":
            mat = key * op.m.astype(complex) - op.l
        else:
            mat = key * np.eye(op.dim, dtype=complex) - op.a
        cond = np.linalg.cond(mat)
        if not np.isfinite(cond) or cond > _SINGULAR_RCOND:
            raise SingularOperatorError(
                f"resolvent matrix numerically singular at lambda={key:.6g}", lam=key
            )
        fac = sla.lu_factor(mat)
        with op._lock:
            op._cache[key] = fac
    return sla.lu_solve(fac, rhs)


def resolvent(op: Operator, lam):
    """Single-valued resolvent matrix at ``lam``.

    dense:        (lambda I - A)^{-1}
    pencil:       (lambda M - L)^{-1} M
    regularized:  (lambda I - A)^{-1} C
    """
    rhs = {
        "dense": np.eye(op.dim, dtype=complex),
        "pencil": op.m.astype(complex),
        "regularized": op.c.astype(complex),
    }[op.kind]
    out = _solve_factorized(op, lam, rhs)
    if np.isrealobj(np.asarray(lam)) and np.iscomplexobj(out) and abs(np.imag(lam)) == 0:
        out = out.real.astype(float) if np.max(np.abs(out.imag)) < 1e-13 * max(np.max(np.abs(out.real)), 1.0) else out
    return out


def resolvent_apply(op: Operator, lam, x):
    """resolvent(op, lam) @ x without forming the matrix."""
    x = np.asarray(x)
    if op.kind == "pencil":
        rhs = op.m @ x
    elif op.kind == "regularized":
        rhs = op.c @ x
    else:
        rhs = x
    return _solve_factorized(op, lam, rhs.astype(complex))


# ---------------------------------------------------------------------------
# spectral data (used by the family evaluator)
# ---------------------------------------------------------------------------

def dense_eigendata(a, cond_limit=1e8):
    """Eigendecomposition (w, V, V^{-1}) or None when V is too ill-conditioned."""
    w, v = np.linalg.eig(a)
    if np.linalg.cond(v) > cond_limit:
        return None
    vinv = np.linalg.inv(v)
    if np.max(np.abs(w.imag)) == 0:
        w, v, vinv = w.real, v.real if np.isrealobj(a) and np.max(np.abs(v.imag)) < 1e-12 else v, vinv
    return w, v, vinv


def pencil_eigendata(m, l, residual_tol=1e-8):
    """Finite-spectrum decomposition of J(lambda) = (lambda M - L)^{-1} M.

    Returns (mu, V, Wt) with J(lambda) = V diag(1/(lambda - mu)) Wt and
    Wt = W^T M after biorthonormalization, or None when the pencil is not
    a diagonalizable index-1 pencil at the requested accuracy.
    """
    w, vl, vr = sla.eig(l, m, left=True, right=True)
    finite = np.isfinite(w)
    mu = w[finite]
    if mu.size == 0:
        return None
    vr_f = vr[:, finite]
    vl_f = vl[:, finite]
    scale = np.einsum("ij,jk,ki->i", vl_f.conj().T, m.astype(complex), vr_f)
    if np.any(np.abs(scale) < 1e-12):
        return None
    vr_f = vr_f / scale[None, :]
    wt = vl_f.conj().T @ m
    # verify against a direct solve at a probe point
    lam = 1.2345 + 0.6789j
    direct = np.linalg.solve(lam * m - l, m.astype(complex))
    approx = (vr_f / (lam - mu)[None, :]) @ wt
    err = np.linalg.norm(direct - approx, 2) / max(np.linalg.norm(direct, 2), 1e-30)
    if err > residual_tol:
        return None
    return mu, vr_f, wt


def spectrum_bound(op: Operator):
    """Real parts of the (finite) spectrum, for contour placement."""
    if op.kind == "pencil":
        w = sla.eigvals(op.l, op.m)
        w = w[np.isfinite(w)]
    else:
        w = np.linalg.eigvals(op.a)
    return w


# ---------------------------------------------------------------------------
# condition (P)
# ---------------------------------------------------------------------------

@dataclass
class ConditionPReport:
    holds: bool
    beta_hat: float
    M_hat: float
    c_used: float
    samples: list          # (lambda, resolvent norm) pairs
    failures: list         # lambdas where the resolvent was singular
    max_excess: float      # worst ratio against the fitted envelope, minus 1

    def to_dict(self):
        return {
            "holds": bool(self.holds),
            "beta_hat": float(self.beta_hat),
            "M_hat": float(self.M_hat),
            "c_used": float(self.c_used),
            "max_excess": float(self.max_excess),
            "n_samples": len(self.samples),
            "failures": [[z.real, z.imag] for z in self.failures],
        }


def condition_p_grid(c, r_min=5.0, r_max=1e4, n=25):
    """Sample points on the boundary of Psi_c and on interior rays."""
    lams = []
    for r in np.geomspace(r_min, r_max, n):
        lams.append(complex(-c * (r + 1.0), r))
        lams.append(complex(-c * (r + 1.0), -r))
        lams.append(complex(r, 0.0))
        lams.append(complex(0.0, r))
    return lams


def check_condition_P(op: Operator, c, grid):
    """Probe the resolvent bound ||R(lambda)|| <= M (1+|lambda|)^{-beta} on Psi_c.

    beta is the least-squares slope of log||R|| against -log(1+|lambda|),
    fitted on every other sample; M is the smallest envelope constant over
    the fit subset.  holds is true when every sample (including held-out
    ones) stays within 5% of that envelope and no resolvent was singular.
    """
    if c <= 0:
        raise DomainError("region parameter c must be positive")
    grid = list(grid)
    if not grid:
        raise DomainError("condition (P) grid must be non-empty")
    for lam in grid:
        if lam.real < -c * (abs(lam.imag) + 1.0) - 1e-9:
            raise DomainError(f"grid point {lam} outside the region Psi_c")

    samples, failures = [], []
    for lam in grid:
        try:
            r = resolvent(op, lam)
            samples.append((complex(lam), float(np.linalg.norm(r, 2))))
        except SingularOperatorError:
            failures.append(complex(lam))
    if not samples:
        return ConditionPReport(False, 1.0, 1.0, c, [], failures, np.inf)

    samples.sort(key=lambda p: abs(p[0]))
    lam_abs = np.array([abs(p[0]) for p in samples])
    norms = np.array([p[1] for p in samples])
    fit_idx = np.arange(0, len(samples), 2)
    x = np.log1p(lam_abs)
    y = np.log(norms)
    slope, _ = np.polyfit(x[fit_idx], y[fit_idx], 1)
    beta = float(np.clip(-slope, 1e-6, 1.0))
    m_hat = float(np.max(norms[fit_idx] * (1.0 + lam_abs[fit_idx]) ** beta))
    envelope = m_hat * (1.0 + lam_abs) ** (-beta)
    max_excess = float(np.max(norms / envelope) - 1.0)
    holds = (not failures) and max_excess <= 0.05
    return ConditionPReport(holds, beta, m_hat, c, samples, failures, max_excess)


# ---------------------------------------------------------------------------
# fractional powers and interpolation norms
# ---------------------------------------------------------------------------

@dataclass
class ContourSpec:
    """Parametrization of the power contour around (-inf, 0].

    The curve is lambda(s) = (c - s) +/- i kappa s**beta_shape for s in
    (0, clip]; ``nodes`` are GL nodes per geometric panel.
    """

    c: float
    kappa: float = 1.0
    beta_shape: float = 1.0
    nodes: int = 32
    clip: float | None = None

    def __post_init__(self):
        if self.c <= 0:
            raise DomainError("contour vertex c must be positive")
        if self.nodes < 32:
            raise DomainError("ContourSpec.nodes must be at least 32")
        if self.clip is not None and not (0 < self.clip < np.inf):
            raise DomainError("clip must be finite and positive")


def contour_for_operator(op: Operator, margin=0.5):
    """Default power contour: vertex at half the spectral gap of -A."""
    w = spectrum_bound(op)
    gap = float(np.min(-w.real))
    if gap <= 0:
        raise DomainError("fractional powers need the spectrum of -A in the right half plane")
    return ContourSpec(c=margin * gap)


def _neg_generator_resolvent(op: Operator, lam):
    """(lambda - B)^{-1} for B = -A (dense/regularized A-part) or the pencil analogue."""
    if op.kind == "pencil":
        return -_solve_factorized(op, -lam, op.m.astype(complex))
    n = op.dim
    mat = lam * np.eye(n, dtype=complex) + op.a
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > _SINGULAR_RCOND:
        raise SingularOperatorError(f"power contour hit the spectrum at lambda={lam:.6g}", lam=lam)
    return np.linalg.solve(mat, np.eye(n, dtype=complex))


def fractional_power_neg(op: Operator, theta, spec: ContourSpec | None = None):
    """(-A)^{-theta} by contour quadrature of lambda^{-theta} (lambda - (-A))^{-1}.

    theta in (0, 1]; the principal branch of lambda^{-theta} is used and the
    contour wraps (-inf, 0] with the spectrum of -A to its right.
    """
    if not (0.0 < theta <= 1.0 + 1e-12):
        raise DomainError("fractional_power_neg expects theta in (0, 1]")
    if spec is None:
        spec = contour_for_operator(op)
    clip = spec.clip
    if clip is None:
        clip = min((10.0 / 1e-13) ** (1.0 / theta), 1e60)
    edges = geometric_edges(spec.c * 1e-8, clip, ratio=2.0)
    s, w = panel_rule(edges, spec.nodes)
    lam = (spec.c - s) + 1j * spec.kappa * s ** spec.beta_shape
    dlam = -1.0 + 1j * spec.kappa * spec.beta_shape * s ** (spec.beta_shape - 1.0)
    acc = np.zeros((op.dim, op.dim), dtype=complex)
    for sk, wk, lk, dk in zip(s, w, lam, dlam):
        r = _neg_generator_resolvent(op, lk)
        acc += wk * (lk ** (-theta)) * dk * r
    out = -acc.imag / np.pi
    return out


def interpolation_norm(op: Operator, theta, x, xi_grid=None, refine_tol=1e-8, max_refine=8):
    """Interpolation-space norm ||x|| + sup_xi xi^theta ||xi (xi + A_op)^{-1} x - x||.

    The resolvent is taken at positive real xi (the operator with spectrum
    in the right half plane), so the sup is over a decaying profile.  The
    grid doubles in density until the detected maximum stagnates.
    """
    if not (0.0 < theta < 1.0):
        raise DomainError("interpolation_norm expects theta in (0, 1)")
    x = np.asarray(x, dtype=float)
    if xi_grid is None:
        xi_grid = np.geomspace(1e-4, 1e4, 65)
    else:
        xi_grid = np.asarray(xi_grid, dtype=float)
        if xi_grid.min() > 1e-4 or xi_grid.max() < 1e4:
            raise DomainError("xi grid must cover [1e-4, 1e4]")
    base = float(np.linalg.norm(x))
    if base == 0.0:
        return 0.0

    lo, hi = np.log10(xi_grid.min()), np.log10(xi_grid.max())
    n = xi_grid.size
    prev = -np.inf
    for _ in range(max_refine):
        xis = np.logspace(lo, hi, n)
        vals = np.empty_like(xis)
        for i, xi in enumerate(xis):
            q = xi * resolvent_apply(op, xi, x) - x
            vals[i] = xi ** theta * np.linalg.norm(q)
        cur = float(np.max(vals))
        if abs(cur - prev) < refine_tol:
            break
        prev = cur
        n = 2 * n - 1
    return base + cur


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def _encode_matrix(mat):
    if mat is None:
        return None
    if np.iscomplexobj(mat):
        return [[[float(v.real), float(v.imag)] for v in row] for row in mat]
    return [[float(v) for v in row] for row in mat]


def _decode_matrix(data):
    if data is None:
        return None
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3:  # complex encoded as [re, im] pairs
        return arr[..., 0] + 1j * arr[..., 1]
    return arr


def operator_to_json(op: Operator) -> str:
    doc = {"kind": op.kind, "dim": op.dim}
    for name in ("a", "m", "l", "c"):
        mat = getattr(op, name)
        if mat is not None:
            doc[name] = _encode_matrix(mat)
    return json.dumps(doc)


def operator_from_json(doc) -> Operator:
    if isinstance(doc, str):
        doc = json.loads(doc)
    kind = doc.get("kind")
    mats = {name: _decode_matrix(doc.get(name)) for name in ("a", "m", "l", "c")}
    if kind == "dense":
        op = Operator.dense(mats["a"])
    elif kind == "pencil":
        op = Operator.pencil(mats["m"], mats["l"])
    elif kind == "regularized":
        op = Operator.regularized(mats["a"], mats["c"])
    else:
        raise DomainError(f"unknown operator kind {kind!r}")
    if op.dim != doc.get("dim", op.dim):
        raise DomainError("dim field inconsistent with matrix shape")
    return op
