"""Composite Gauss-Legendre helpers shared by the Abel and ray integrators."""

import numpy as np

GL_ORDER = 32
GL_X, GL_W = np.polynomial.legendre.leggauss(GL_ORDER)

_RULES = {GL_ORDER: (GL_X, GL_W)}


def gauss_rule(order):
    """Return cached Gauss-Legendre nodes and weights on [-1, 1]."""
    if order not in _RULES:
        _RULES[order] = np.polynomial.legendre.leggauss(order)
    return _RULES[order]


def refine(breaks, max_width):
    """Split every interval of ``breaks`` so no piece is wider than ``max_width``."""
    breaks = np.asarray(breaks, dtype=float)
    out = [breaks[:1]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        pieces = max(1, int(np.ceil((b - a) / max_width)))
        out.append(a + (b - a) * np.arange(1, pieces + 1) / pieces)
    return np.concatenate(out)


def composite_rule(breaks, order=GL_ORDER):
    """Nodes and weights of a composite Gauss-Legendre rule.

    Parameters
    ----------
    breaks : array_like
        Increasing panel boundaries.
    order : int
        Points per panel.

    Returns
    -------
    x, w : ndarray
        Flattened nodes and weights.
    """
    breaks = np.asarray(breaks, dtype=float)
    gx, gw = gauss_rule(order)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    half = 0.5 * (b - a)
    x = (half * gx + 0.5 * (a + b)).ravel()
    w = (half * gw).ravel()
    return x, w


def doubling_breaks(start, stop):
    """Geometric breakpoints start, 2*start, 4*start, ... closed by ``stop``."""
    pts = [start]
    if start > 0:
        while 2.0 * pts[-1] < stop:
            pts.append(2.0 * pts[-1])
    pts.append(stop)
    return np.asarray(pts)
