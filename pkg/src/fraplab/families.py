"""Base semigroup T(t) and the subordinated families T_{g,nu}, S_g, P_g, R_g.

The subordination integral  t^{g nu} * int_0^inf s^nu Phi_g(s) T(s t^g) x ds
is evaluated by Gauss-Legendre panels on a geometric grid in s; the base
semigroup comes from an eigendecomposition (dense diagonalizable), from
scipy's expm (dense non-normal), from e^{tA} C (regularized), or from
contour quadrature of the resolvent along the region boundary (pencil).

For arguments far outside the quadrature window the scalar subordination
engine switches to the algebraic Mittag-Leffler expansion, which the Laplace
identity makes exact there; inside the window everything is honest Wright
quadrature.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import DomainError, QuadratureError
from .operators import (
    Operator,
    dense_eigendata,
    pencil_eigendata,
    spectrum_bound,
)
from .quadrature import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    geometric_edges,
    panel_rule,
)
from .specfun import (
    DEFAULT_SPECFUN,
    SpecialFnConfig,
    ml_algebraic_tail,
    _ml_exp_branch,
    wright,
)

__all__ = [
    "FamilyEvaluator",
    "DecayFit",
    "fit_decay",
    "measure_family_constants",
    "norm_curve_csv",
]

_CHUNK = 4096


class FamilyEvaluator:
    """Evaluate T(t) and the subordinated families for one (operator, gamma).

    mode: 'auto', 'eigen', 'contour', or 'scaling-squaring'.  Pencils always
    use the contour for the base semigroup.  Instances are immutable after
    construction; evaluation at distinct times is independent.
    """

    def __init__(self, op: Operator, gamma_, quad: QuadratureConfig | None = None,
                 mode="auto", beta_hat=1.0, contour_c=None,
                 specfun_cfg: SpecialFnConfig | None = None):
        if not (0.0 < gamma_ < 1.0):
            raise DomainError("subordination order gamma must lie in (0, 1)")
        self.op = op
        self.gamma = float(gamma_)
        self.quad = quad or DEFAULT_QUADRATURE
        self.beta_hat = float(beta_hat)
        self.cfg = specfun_cfg or DEFAULT_SPECFUN

        self._s, w = self.quad.subordination_rule()
        phi = wright(self.gamma, self._s, self.cfg)
        self._w_phi = w * phi
        self._momw = {}          # nu -> weighted vector  w * phi * s^nu

        self.mode = self._resolve_mode(mode)
        self._eig = None
        self._contour = None
        self._pencil_modes = None
        if self.mode == "eigen":
            if op.kind == "pencil":
                self._pencil_modes = pencil_eigendata(op.m, op.l)
                if self._pencil_modes is None:
                    raise DomainError("pencil not diagonalizable; use contour mode")
            else:
                self._eig = dense_eigendata(op.a)
                if self._eig is None:
                    raise DomainError("operator not safely diagonalizable; use scaling-squaring")
        elif self.mode == "contour":
            if contour_c is None:
                w_spec = spectrum_bound(op)
                gap = float(np.min(-np.real(w_spec))) if w_spec.size else 1.0
                if gap <= 0:
                    raise DomainError("contour placement needs Re(spectrum) < 0")
                contour_c = min(0.5 * gap, 1.0)
            self._c = float(contour_c)
            # smooth far-reaching node set for the subordinated families;
            # the lambda-integrand decays only algebraically there
            self._fam_contour = self._build_nodes(self._c, 3e8, ratio=2.0)
            self._semi_contours = {}
            # spectral shortcut for solvers when the pencil is diagonalizable
            if op.kind == "pencil":
                self._pencil_modes = pencil_eigendata(op.m, op.l)

    # -- construction helpers ------------------------------------------------

    def _resolve_mode(self, mode):
        if mode == "auto":
            if self.op.kind == "pencil":
                return "contour"
            if dense_eigendata(self.op.a) is not None:
                return "eigen"
            return "scaling-squaring"
        if mode not in ("eigen", "contour", "scaling-squaring"):
            raise DomainError(f"unknown mode {mode!r}")
        if self.op.kind == "pencil" and mode == "scaling-squaring":
            raise DomainError("pencil kind has no matrix exponential; use contour")
        return mode

    def _build_nodes(self, c, H, ratio):
        """GL panels on the boundary lam = -c(eta+1) + i eta for eta in (0, H]."""
        edges = geometric_edges(self.quad.contour_eta_min, H, ratio=ratio)
        eta, w = panel_rule(edges, self.quad.contour_nodes)
        lam = -c * (eta + 1.0) + 1j * eta
        dlam = (-c + 1j) * np.ones_like(lam)
        if self.op.kind == "pencil":
            mats = [np.linalg.solve(l * self.op.m.astype(complex) - self.op.l,
                                    self.op.m.astype(complex)) for l in lam]
        else:
            eye = np.eye(self.op.dim, dtype=complex)
            mats = [np.linalg.solve(l * eye - self.op.a, eye) for l in lam]
        return {"c": c, "eta": eta, "w": w, "lam": lam, "dlam": dlam,
                "mats": np.array(mats)}

    def _semigroup_contour(self, t):
        """Oscillation-resolving node set serving times in the decade of t."""
        bucket = int(np.floor(np.log10(t)))
        ct = self._semi_contours.get(bucket)
        if ct is None:
            t_lo = 10.0 ** bucket
            H = 42.0 / (self._c * t_lo)
            ct = self._build_nodes(self._c, H, ratio=1.25)
            self._semi_contours[bucket] = ct
        return ct

    def _momvec(self, nu):
        if nu not in self._momw:
            self._momw[nu] = self._w_phi * self._s ** nu if nu else self._w_phi
        return self._momw[nu]

    # -- scalar subordination engine ------------------------------------------

    def _e_nu(self, z, nu):
        """int_0^inf s^nu Phi_g(s) e^{s z} ds for an array of arguments z.

        Quadrature inside |z| <= ml_quad_cut; the algebraic Mittag-Leffler
        far field (exact there by the Laplace identity) outside.  Requires
        Re z <= 0 or |z| small; nu in {0, 1} plus any nu > -1 inside the
        quadrature window.
        """
        g = self.gamma
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty_like(z)
        cut = self.quad.ml_quad_cut
        near = np.abs(z) <= cut
        if np.any(np.real(z[near]) > 1e-9) and np.any(np.real(z[near]) * self.quad.wright_s_max > 30):
            raise QuadratureError("subordination tail not certifiable for growing semigroup input")
        if np.any(near):
            zn = z[near]
            mom = self._momvec(nu)
            vals = np.empty(zn.shape, dtype=complex)
            for k in range(0, zn.size, _CHUNK):
                blk = zn[k:k + _CHUNK]
                vals[k:k + _CHUNK] = mom @ np.exp(np.outer(self._s, blk))
            out[near] = vals
        far = ~near
        if np.any(far):
            if nu == 0:
                b = 1.0
            elif nu == 1:
                b = g
            else:
                raise DomainError("far-field subordination only implemented for nu in {0, 1}")
            zf = z[far]
            vals = ml_algebraic_tail(g, b, zf)
            expa = np.abs(np.angle(zf)) <= 0.75 * np.pi * g
            if np.any(expa):
                vals[expa] = _ml_exp_branch(g, b, zf[expa])
            if nu == 1:
                vals = vals / g
            out[far] = vals
        return out

    def e_masses(self, z):
        """int Phi_g(s) (e^{s z} - 1)/z ds, the integrated-kernel helper.

        Equals (E_g(z) - 1)/z; stable for z near 0 via the moment expansion.
        """
        g = self.gamma
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty_like(z)
        small = np.abs(z) < 1e-6
        if np.any(small):
            m1 = float(np.sum(self._momvec(1)))
            m2 = float(np.sum(self._momvec(2)))
            zs = z[small]
            out[small] = m1 + zs * m2 / 2.0
        rest = ~small
        if np.any(rest):
            zr = z[rest]
            out[rest] = (self._e_nu(zr, 0) - 1.0) / zr
        return out

    # -- base semigroup --------------------------------------------------------

    def semigroup_apply(self, t, x):
        """T(t) x; t = 0 allowed only for dense/regularized kinds."""
        x = np.asarray(x, dtype=float)
        if t < 0:
            raise DomainError("semigroup time must be nonnegative")
        if t == 0.0:
            if self.op.kind == "dense":
                return x.copy()
            if self.op.kind == "regularized":
                return self.op.c @ x
            raise DomainError("pencil semigroup has a (removable) singularity at t = 0")
        if self.op.kind == "pencil":
            ct = self._semigroup_contour(t)
            coeff = ct["w"] * np.exp(ct["lam"] * t) * ct["dlam"]
            acc = np.tensordot(coeff, ct["mats"], axes=(0, 0)) @ x.astype(complex)
            return np.imag(acc) / np.pi
        tm = self.semigroup_matrix(t)
        return tm @ x

    def semigroup_matrix(self, t):
        if t < 0:
            raise DomainError("semigroup time must be nonnegative")
        if self.op.kind == "pencil":
            if t == 0.0:
                raise DomainError("pencil semigroup has a (removable) singularity at t = 0")
            ct = self._semigroup_contour(t)
            coeff = ct["w"] * np.exp(ct["lam"] * t) * ct["dlam"]
            return np.imag(np.tensordot(coeff, ct["mats"], axes=(0, 0))) / np.pi
        if self._eig is not None:
            w, v, vinv = self._eig
            out = (v * np.exp(w * t)[None, :]) @ vinv
            out = out.real if np.iscomplexobj(out) and np.max(np.abs(out.imag)) < 1e-12 * max(1.0, np.max(np.abs(out.real))) else out
        else:
            out = sla.expm(t * self.op.a)
        if self.op.kind == "regularized":
            out = out @ self.op.c
        return out

    def richardson_delta(self, t):
        """Contour refinement check: change in T(t) under node doubling."""
        if self.op.kind != "pencil":
            raise DomainError("richardson_delta is a pencil-contour diagnostic")
        base = self.semigroup_matrix(t)
        dense_quad = QuadratureConfig(
            wright_s_max=self.quad.wright_s_max, wright_s_min=self.quad.wright_s_min,
            wright_nodes=self.quad.wright_nodes,
            contour_nodes=2 * self.quad.contour_nodes,
            contour_eta_min=self.quad.contour_eta_min,
            contour_t_min=self.quad.contour_t_min,
        )
        fine = FamilyEvaluator(self.op, self.gamma, quad=dense_quad, mode="contour",
                               contour_c=self._c)
        return float(np.linalg.norm(base - fine.semigroup_matrix(t), 2))

    # -- subordinated families -------------------------------------------------

    def subordinate(self, nu, t, x=None):
        """T_{g,nu}(t) x  =  t^{g nu} int s^nu Phi_g(s) T(s t^g) x ds."""
        if t <= 0:
            raise DomainError("subordinated families require t > 0")
        if nu <= -self.beta_hat:
            raise DomainError(f"subordination moment nu={nu} must exceed -beta_hat={-self.beta_hat}")
        pref = t ** (self.gamma * nu)
        tg = t ** self.gamma

        if self._eig is not None:
            w, v, vinv = self._eig
            e = self._e_nu(w * tg, nu)
            if x is None:
                out = (v * e[None, :]) @ vinv
                if self.op.kind == "regularized":
                    out = out @ self.op.c.astype(out.dtype)
            else:
                rhs = np.asarray(x, dtype=complex)
                if self.op.kind == "regularized":
                    rhs = self.op.c @ rhs
                out = v @ (e * (vinv @ rhs))
            return pref * _real_if_close(out)

        if self.mode == "contour":
            ct = self._fam_contour
            e = self._e_nu(ct["lam"] * tg, nu)
            coeff = ct["w"] * e * ct["dlam"]
            if x is None:
                acc = np.tensordot(coeff, ct["mats"], axes=(0, 0))
                return pref * np.imag(acc) / np.pi
            acc = np.tensordot(coeff, ct["mats"], axes=(0, 0)) @ np.asarray(x, dtype=complex)
            return pref * np.imag(acc) / np.pi

        # scaling-squaring: direct matrix quadrature (slow, small problems)
        mom = self._momvec(nu)
        live = mom != 0.0
        acc = np.zeros((self.op.dim, self.op.dim))
        for sk, wk in zip(self._s[live], mom[live]):
            term = sla.expm(sk * tg * self.op.a)
            acc += wk * term
        if self.op.kind == "regularized":
            acc = acc @ self.op.c
        if x is None:
            return pref * acc
        return pref * (acc @ np.asarray(x, dtype=float))

    def S_gamma(self, t, x=None):
        """S_g(t) = T_{g,0}(t); at t = 0 the identity (dense) or C (regularized)."""
        if t == 0.0:
            if self.op.kind == "dense":
                return np.eye(self.op.dim) if x is None else np.asarray(x, dtype=float).copy()
            if self.op.kind == "regularized":
                return self.op.c.copy() if x is None else self.op.c @ np.asarray(x, dtype=float)
            raise DomainError("S_gamma(0) undefined for pencil kind (use t > 0)")
        return self.subordinate(0, t, x)

    def P_gamma(self, t, x=None):
        """P_g(t) = g T_{g,1}(t) / t^g."""
        if t <= 0:
            raise DomainError("P_gamma requires t > 0")
        return self.gamma * self.subordinate(1, t, x) / t ** self.gamma

    def R_gamma(self, t, x=None):
        """R_g(t) = t^{g-1} P_g(t)."""
        return t ** (self.gamma - 1.0) * self.P_gamma(t, x)

    def family_scalar_table(self, nu, z):
        """Expose the scalar engine for solvers/tests: int s^nu Phi e^{sz} ds."""
        return self._e_nu(z, nu)

    def operator_norm_curve(self, family, t_grid):
        """Spectral norms of S/P/R along a positive, sorted time grid."""
        t_grid = np.asarray(t_grid, dtype=float)
        if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
            raise DomainError("norm-curve grid must be positive and increasing")
        fn = {"S": self.S_gamma, "P": self.P_gamma, "R": self.R_gamma}[family]
        return np.array([np.linalg.norm(fn(t), 2) for t in t_grid])


def _real_if_close(arr):
    if np.iscomplexobj(arr) and np.max(np.abs(arr.imag)) < 1e-11 * max(1.0, np.max(np.abs(arr.real))):
        return arr.real
    return arr


# ---------------------------------------------------------------------------
# decay fits and family constants
# ---------------------------------------------------------------------------

@dataclass
class DecayFit:
    window: tuple
    slope: float
    intercept: float
    max_violation: float

    def to_dict(self):
        return {"window": [float(self.window[0]), float(self.window[1])],
                "slope": float(self.slope), "intercept": float(self.intercept),
                "max_violation": float(self.max_violation)}


def fit_decay(t_grid, norms, window):
    """Least-squares log-log slope of a norm curve on a window in [1, inf)."""
    t_grid = np.asarray(t_grid, dtype=float)
    norms = np.asarray(norms, dtype=float)
    lo, hi = window
    if lo < 1.0 or hi <= lo:
        raise DomainError("decay window must satisfy 1 <= lo < hi")
    mask = (t_grid >= lo) & (t_grid <= hi)
    if np.count_nonzero(mask) < 8:
        raise DomainError("decay fit needs at least 8 samples in the window")
    tt, nn = t_grid[mask], norms[mask]
    if np.all(nn < 1e-300):
        raise DomainError("norms degenerate (all below 1e-300); nothing to fit")
    slope, intercept = np.polyfit(np.log(tt), np.log(nn), 1)
    fitted = np.exp(intercept) * tt ** slope
    return DecayFit((lo, hi), float(slope), float(intercept),
                    float(np.max(nn / fitted) - 1.0))


def measure_family_constants(ev: FamilyEvaluator, beta=1.0,
                             small_grid=None, large_grid=None):
    """Measured (M1, M2): the short-time envelope constant of
    ||S|| + ||P|| <= M1 t^{g(beta-1)} on (0, 1], and the long-time constants
    sup t^g ||S||, sup t^{2g} ||P|| on [1, T]."""
    g = ev.gamma
    if small_grid is None:
        small_grid = np.geomspace(1e-3, 1.0, 25)
    if large_grid is None:
        large_grid = np.geomspace(1.0, 1e3, 33)
    s_small = ev.operator_norm_curve("S", small_grid)
    p_small = ev.operator_norm_curve("P", small_grid)
    shape = small_grid ** (g * (beta - 1.0))
    m1 = float(np.max((s_small + p_small) / shape))
    s_large = ev.operator_norm_curve("S", large_grid)
    p_large = ev.operator_norm_curve("P", large_grid)
    m2 = float(max(np.max(s_large * large_grid ** g),
                   np.max(p_large * large_grid ** (2 * g))))
    return m1, m2


def norm_curve_csv(path, t_grid, s_norms, p_norms, r_norms):
    """Write a norm-curve table with columns t, norm_S, norm_P, norm_R."""
    with open(path, "w") as fh:
        fh.write("t,norm_S,norm_P,norm_R\n")
        for t, s, p, r in zip(t_grid, s_norms, p_norms, r_norms):
            fh.write(f"{t:.17g},{s:.17g},{p:.17g},{r:.17g}\n")
    return path
