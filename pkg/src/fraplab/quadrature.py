"""Gauss-Legendre panel quadrature helpers and the shared quadrature config."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

_GL_CACHE = {}


def gauss_legendre(n):
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def panel_rule(edges, nodes_per_panel=16):
    """Composite Gauss-Legendre rule over consecutive panels.

    edges: increasing 1-D array of panel boundaries.
    Returns (nodes, weights) flattened over all panels.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise DomainError("panel_rule needs at least two edges")
    if np.any(np.diff(edges) <= 0):
        raise DomainError("panel edges must be strictly increasing")
    xs, ws = gauss_legendre(nodes_per_panel)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
    weights = (half[:, None] * ws[None, :]).ravel()
    return nodes, weights


def geometric_edges(lo, hi, ratio=2.0, cap=None, include_zero=True):
    """Panel edges growing geometrically from lo to hi.

    With ``include_zero`` a leading [0, lo] panel is prepended, so the rule
    integrates from 0; otherwise integration starts at lo.  ``cap``
    optionally limits the width of any single panel (used when the
    integrand oscillates on a known scale).
    """
    if not (0 < lo < hi):
        raise DomainError("need 0 < lo < hi")
    edges = [0.0, lo] if include_zero else [lo]
    v = lo
    while v < hi:
        step = v * (ratio - 1.0)
        if cap is not None:
            step = min(step, cap)
        v = min(v + step, hi)
        edges.append(v)
    return np.array(edges)


@dataclass
class QuadratureConfig:
    """Node counts and truncation bounds for the singular/improper integrals.

    wright_s_max      : truncation of the subordination integral over s
    wright_s_min      : first geometric panel edge near s = 0
    wright_nodes      : GL nodes per subordination panel
    contour_nodes     : GL nodes per panel on the semigroup contour
    contour_eta_min   : first panel edge in the contour parameter
    contour_t_min     : smallest time the precomputed contour must support
    tail_tol          : certified tail mass required of improper integrals
    ml_quad_cut       : |z| above which the Mittag-Leffler far-field branch is used
    """

    wright_s_max: float = 40.0
    wright_s_min: float = 1e-10
    wright_nodes: int = 16
    contour_nodes: int = 24
    contour_eta_min: float = 1e-4
    contour_t_min: float = 1e-2
    tail_tol: float = 1e-12
    ml_quad_cut: float = 30.0

    def __post_init__(self):
        if self.wright_s_max <= 0 or self.wright_s_min <= 0:
            raise DomainError("subordination truncation bounds must be positive")
        if self.wright_nodes < 4 or self.contour_nodes < 4:
            raise DomainError("need at least 4 GL nodes per panel")

    def subordination_rule(self):
        edges = geometric_edges(self.wright_s_min, self.wright_s_max)
        return panel_rule(edges, self.wright_nodes)


DEFAULT_QUADRATURE = QuadratureConfig()
