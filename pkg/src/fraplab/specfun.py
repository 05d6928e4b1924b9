"""Special functions: Gamma, Mittag-Leffler, the Wright function and power kernels.

Evaluation strategy
-------------------
* ``mittag_leffler``: power series while the largest term stays within a
  cancellation budget; a branch-cut (spectral) integral for real arguments
  left of ``-1.5``; exponential-plus-algebraic asymptotics for large
  arguments elsewhere.  The flat series/asymptotic switch at ``|z| = 10``
  is kept as an upper limit but the cancellation guard takes over earlier
  for small orders, where the series loses all digits well inside that
  radius.
* ``wright``: defining series with the same cancellation guard, else a
  parabolic Hankel contour through the saddle of ``s - t*s**g``.  The
  contour integrand is cancellation-free, which makes it the stable
  representation in the far field.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _scipy_gamma
from scipy.special import rgamma as _rgamma

from .exceptions import ConvergenceError, DomainError, PoleError, QuadratureError
from .quadrature import geometric_edges, panel_rule

__all__ = [
    "SpecialFnConfig",
    "DEFAULT_SPECFUN",
    "Kernel",
    "gamma_fn",
    "g_kernel",
    "mittag_leffler",
    "wright",
    "wright_moment",
]

# ratio max|term|/|sum| above which a double-precision series is distrusted
_CANCEL_GUARD = 1e6


@dataclass
class SpecialFnConfig:
    """Tolerances and switchover knobs for the special-function evaluators."""

    series_tol: float = 1e-12
    max_terms: int = 2000
    asymptotic_switch: float = 10.0

    def __post_init__(self):
        if self.series_tol <= 0:
            raise DomainError("series_tol must be positive")
        if self.max_terms < 16:
            raise DomainError("max_terms must be at least 16")
        if self.asymptotic_switch <= 0:
            raise DomainError("asymptotic_switch must be positive")


DEFAULT_SPECFUN = SpecialFnConfig()


@dataclass(frozen=True)
class Kernel:
    """Riemann-Liouville power kernel of order ``alpha``: t**(alpha-1)/Gamma(alpha)."""

    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise DomainError("kernel order alpha must be positive")


def gamma_fn(x, cfg: SpecialFnConfig = DEFAULT_SPECFUN):
    """Gamma function with explicit pole detection at non-positive integers."""
    arr = np.asarray(x, dtype=float)
    poles = (arr <= 0) & (arr == np.floor(arr))
    if np.any(poles):
        raise PoleError(f"Gamma pole at x={arr[poles].ravel()[0]!r}")
    out = _scipy_gamma(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def g_kernel(kernel: Kernel, t):
    """Evaluate t**(alpha-1)/Gamma(alpha) for t > 0."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("g_kernel requires t > 0")
    out = arr ** (kernel.alpha - 1.0) * _rgamma(kernel.alpha)
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Mittag-Leffler
# ---------------------------------------------------------------------------

def _ml_series_real(g, b, z, cfg):
    """Vectorized power series sum with per-element cancellation bookkeeping.

    Returns (sum, ok) where ok is False for elements whose largest term
    exceeded the cancellation budget or that failed to converge.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    total = np.zeros_like(z)
    coeff = np.ones_like(z)
    maxmag = np.zeros_like(z)
    active = np.ones(z.shape, dtype=bool)
    smallrun = np.zeros(z.shape, dtype=int)
    converged = np.zeros(z.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(cfg.max_terms):
            term = coeff * _rgamma(b + g * n)
            ok_term = np.isfinite(term)
            total[active & ok_term] += term[active & ok_term]
            np.maximum(maxmag, np.abs(term), out=maxmag, where=active & ok_term)
            active &= ok_term
            coeff = coeff * z
            bad = ~np.isfinite(coeff)
            if np.any(bad):
                active &= ~bad
                coeff[bad] = 0.0
            tiny = np.abs(term) < cfg.series_tol * 1e-4 * np.maximum(np.abs(total), 1e-290)
            smallrun = np.where(tiny & active, smallrun + 1, 0)
            done = (smallrun >= 4) & (n > 6)
            converged |= done & active
            active &= ~done
            if not np.any(active):
                break
    ok = converged & (maxmag <= _CANCEL_GUARD * np.maximum(np.abs(total), 1e-290))
    return total, ok


def _ml_spectral_neg(g, b, x, cfg):
    """E_{g,b}(-x) for x > 0 via the branch-cut integral.

    Valid for 0 < g < 1 and b < 1 + g (weight u**(g-b) integrable at 0);
    the head [0, 0.5] is computed with the exact substitution v = u**(1+g-b).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = 1.0 + g - b
    uc = 0.5
    sinb = np.sin(np.pi * b)
    singb = np.sin(np.pi * (g - b))
    cosg = np.cos(np.pi * g)

    def core(u):
        # integrand without the u**(g-b) weight
        ug = u ** g
        num = ug * sinb - x[:, None] * singb
        den = u ** (2 * g) + 2.0 * x[:, None] * ug * cosg + x[:, None] ** 2
        return np.exp(-u) * num / den

    vc = uc ** m
    vh, wh = panel_rule(geometric_edges(vc * 1e-12, vc), 20)
    uh = vh ** (1.0 / m)
    head = (core(uh) * wh).sum(axis=1) / m

    ub, wb = panel_rule(geometric_edges(uc, 90.0, ratio=np.sqrt(2.0), include_zero=False), 20)
    body = (core(ub) * (ub ** (g - b)) * wb).sum(axis=1)
    return (head + body) / np.pi


def _ml_neg_real(g, b, x, cfg):
    """E_{g,b}(-x) for arrays x > 0 with the beta-reduction bookkeeping."""
    if abs(b - (g + 1.0)) < 1e-12:
        # exact index identity E_{g,g+1}(z) = (E_g(z) - 1)/z
        return (_ml_neg_real(g, 1.0, x, cfg) - 1.0) / (-x)
    if b >= 1.0 + g - 0.05:
        # shift beta down once: E_{g,b}(z) = (E_{g,b-g}(z) - rgamma(b-g))/z
        return (_ml_neg_real(g, b - g, x, cfg) - _rgamma(b - g)) / (-x)
    return _ml_spectral_neg(g, b, x, cfg)


def ml_algebraic_tail(g, b, z, kmax=60, tol=1e-16):
    """Algebraic far-field expansion -sum_{k>=1} z**-k / Gamma(b - g k).

    Valid for 0 < g < 1 when |arg z| is outside the exponential sector.
    ``z`` may be a complex array.  Truncates at the smallest term.
    """
    z = np.atleast_1d(np.asarray(z))
    zinv = 1.0 / z
    p = zinv.copy()
    total = np.zeros_like(z)
    prev = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, kmax + 1):
        rg = _rgamma(b - g * k)
        term = -p * rg
        mag = np.abs(term)
        growing = (mag > prev) & (rg != 0.0)
        active &= ~growing
        total = np.where(active, total + term, total)
        prev = np.where(rg != 0.0, mag, prev)
        p = p * zinv
        if np.all(mag[active] < tol * np.maximum(np.abs(total[active]), 1e-290)) and k > 3:
            break
    return total


def _ml_exp_branch(g, b, z):
    """Exponential sector asymptotics: (1/g) z**((1-b)/g) exp(z**(1/g)) + tail."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    lead = (1.0 / g) * z ** ((1.0 - b) / g) * np.exp(z ** (1.0 / g))
    return lead + ml_algebraic_tail(g, b, z)


def _ml_scalar_complex(g, b, z, cfg):
    total, ok = 0.0 + 0.0j, False
    coeff, maxmag, smallrun = 1.0 + 0.0j, 0.0, 0
    for n in range(cfg.max_terms):
        term = coeff * _rgamma(b + g * n)
        total += term
        maxmag = max(maxmag, abs(term))
        coeff *= z
        if not np.isfinite(coeff):
            break
        if abs(term) < cfg.series_tol * 1e-4 * max(abs(total), 1e-290):
            smallrun += 1
            if smallrun >= 4 and n > 6:
                ok = True
                break
        else:
            smallrun = 0
    if ok and maxmag <= _CANCEL_GUARD * max(abs(total), 1e-290):
        return total
    if abs(np.angle(z)) >= 0.75 * np.pi * g:
        return complex(ml_algebraic_tail(g, b, np.array([z]))[0])
    if g < 1.0:
        return complex(_ml_exp_branch(g, b, np.array([z]))[0])
    raise ConvergenceError(
        f"Mittag-Leffler series exhausted at |z|={abs(z):.3g} with no usable asymptotic branch"
    )


def mittag_leffler(gamma_, beta, z, cfg: SpecialFnConfig = DEFAULT_SPECFUN):
    """Two-parameter Mittag-Leffler function E_{gamma,beta}(z).

    gamma_ in (0, 1], beta > 0.  ``z`` may be a real scalar/array or a
    complex scalar.  For real negative arguments the branch-cut integral
    keeps full accuracy arbitrarily deep in the left half line.
    """
    if not (0.0 < gamma_ <= 1.0):
        raise DomainError("mittag_leffler requires gamma in (0, 1]")
    if beta <= 0:
        raise DomainError("mittag_leffler requires beta > 0")
    scalar = np.isscalar(z) or np.ndim(z) == 0

    if np.iscomplexobj(z) or isinstance(z, complex):
        zc = complex(z) if scalar else np.asarray(z, dtype=complex)
        if scalar:
            if zc.imag == 0.0:
                out = mittag_leffler(gamma_, beta, zc.real, cfg)
                return complex(out)
            return _ml_scalar_complex(gamma_, beta, zc, cfg)
        return np.array([_ml_scalar_complex(gamma_, beta, complex(v), cfg) for v in zc.ravel()]).reshape(zc.shape)

    if gamma_ == 1.0 and beta == 1.0:
        out = np.exp(np.asarray(z, dtype=float))
        return float(out) if scalar else out

    zarr = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty_like(zarr)
    spectral = zarr <= -1.5
    if gamma_ < 1.0 and np.any(spectral):
        out[spectral] = _ml_neg_real(gamma_, beta, -zarr[spectral], cfg)
    elif np.any(spectral):
        # gamma == 1: series is safe on the real line for any practical argument
        spectral[:] = False

    rest = ~spectral
    if np.any(rest):
        vals, ok = _ml_series_real(gamma_, beta, zarr[rest], cfg)
        bad = ~ok
        if np.any(bad):
            zb = zarr[rest][bad]
            fixed = np.empty_like(zb)
            for i, zv in enumerate(zb):
                if zv > cfg.asymptotic_switch and gamma_ < 1.0:
                    fixed[i] = np.real(_ml_exp_branch(gamma_, beta, np.array([zv]))[0])
                elif zv < 0 and gamma_ < 1.0:
                    fixed[i] = _ml_neg_real(gamma_, beta, np.array([-zv]), cfg)[0]
                else:
                    raise ConvergenceError(
                        f"Mittag-Leffler series failed at z={zv:.4g} (gamma={gamma_}, beta={beta})"
                    )
            vals[bad] = fixed
        out[rest] = vals
    return float(out[0]) if scalar else out.reshape(np.shape(z))


# ---------------------------------------------------------------------------
# Wright function
# ---------------------------------------------------------------------------

def _wright_series(g, t, cfg):
    """Defining series with recursive coefficients; returns (value, ok)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    total = np.zeros_like(t)
    coeff = np.ones_like(t)
    maxmag = np.zeros_like(t)
    active = np.ones(t.shape, dtype=bool)
    smallrun = np.zeros(t.shape, dtype=int)
    converged = np.zeros(t.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(cfg.max_terms):
            rg = _rgamma(1.0 - g - g * n)
            term = coeff * rg
            ok_term = np.isfinite(term)
            total[active & ok_term] += term[active & ok_term]
            np.maximum(maxmag, np.abs(term), out=maxmag, where=active & ok_term)
            active &= ok_term
            coeff = coeff * (-t) / (n + 1.0)
            bad = ~np.isfinite(coeff)
            if np.any(bad):
                active &= ~bad
                coeff[bad] = 0.0
            # the coefficient check guards against rgamma dips near its zeros
            tiny = (np.abs(term) < 1e-17 * np.maximum(np.abs(total), 1e-290)) & (
                np.abs(coeff) < 1e-14 * np.maximum(np.abs(total), 1e-290)
            )
            smallrun = np.where(tiny & active, smallrun + 1, 0)
            done = (smallrun >= 4) & (n > 8)
            converged |= done & active
            active &= ~done
            if not np.any(active):
                break
    ok = converged & (maxmag <= _CANCEL_GUARD * np.maximum(np.abs(total), 1e-290))
    return total, ok


def _wright_contour(g, t):
    """Parabolic Hankel contour through the saddle of s - t s**g.

    The integrand has no cancellation (max magnitude ~ 50x the result), so
    this branch is accurate wherever the series is not.
    """
    sstar = (g * t) ** (1.0 / (1.0 - g))
    theta_max = np.sqrt(46.0 / sstar) + 3.0
    n_theta = min(max(400, int(40 * theta_max)), 40000)
    th = np.linspace(0.0, theta_max, n_theta + 1)
    w = np.full_like(th, theta_max / n_theta)
    w[0] *= 0.5
    w[-1] *= 0.5
    u = 1.0 + 1j * th
    s = sstar * u * u
    with np.errstate(over="ignore", invalid="ignore"):
        f = np.exp(s - t * s ** g) * s ** (g - 1.0) * (2j * sstar * u)
        f = np.where(np.isfinite(f), f, 0.0)
    return float(np.sum(w * f.imag) / np.pi)


def wright(gamma_, t, cfg: SpecialFnConfig = DEFAULT_SPECFUN):
    """Wright function Phi_gamma(t) = sum (-t)^n / (n! Gamma(1 - gamma - gamma n)).

    Nonnegative on t >= 0; series for moderate t, saddle-point contour in
    the far field.  ``t`` may be a scalar or array of nonnegative reals.
    """
    if not (0.0 < gamma_ < 1.0):
        raise DomainError("wright requires gamma in (0, 1)")
    scalar = np.isscalar(t) or np.ndim(t) == 0
    tarr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tarr < 0):
        raise DomainError("wright requires t >= 0")
    out, ok = _wright_series(gamma_, tarr, cfg)
    for idx in np.flatnonzero(~ok):
        out[idx] = _wright_contour(gamma_, tarr[idx])
    return float(out[0]) if scalar else out.reshape(np.shape(t))


def _moment_tail_bound(gamma_, r, s):
    """min over m of s**(r-m) * Gamma(1+m)/Gamma(1+gamma m), a Chebyshev-type tail bound."""
    ms = np.arange(max(2, int(np.ceil(r)) + 1), 61)
    vals = s ** (r - ms) * _scipy_gamma(1.0 + ms) * _rgamma(1.0 + gamma_ * ms)
    return float(np.min(vals))


def wright_moment(gamma_, r, cfg: SpecialFnConfig = DEFAULT_SPECFUN):
    """Numerically integrate t**r Phi_gamma(t) over (0, inf).

    The closed form is Gamma(1+r)/Gamma(1+gamma r); this routine is the
    independent quadrature side of that identity.  Truncation is certified
    by a moment tail bound; raises QuadratureError when no truncation point
    within reach certifies the requested tolerance.
    """
    if r <= -1.0:
        raise DomainError("wright_moment requires r > -1")
    tol = max(cfg.series_tol, 1e-13)
    s_max = 40.0
    for _ in range(9):
        bound = _moment_tail_bound(gamma_, r, s_max)
        if bound < tol:
            break
        s_max *= 2.0
    else:
        raise QuadratureError(
            f"tail bound {bound:.2e} not below {tol:.1e} at s_max={s_max:.1f}", bound=bound
        )

    # head with the exact weight substitution v = t**(r+1)
    uc = 0.5
    m = r + 1.0
    vh, wh = panel_rule(geometric_edges((uc ** m) * 1e-12, uc ** m), 20)
    th_ = vh ** (1.0 / m)
    head = float(np.sum(wh * wright(gamma_, th_, cfg)) / m)
    tb, wb = panel_rule(geometric_edges(uc, s_max, ratio=np.sqrt(2.0), include_zero=False), 20)
    body = float(np.sum(wb * (tb ** r) * wright(gamma_, tb, cfg)))
    return head + body
