"""Quadrature rules on [0, 1], the reference triangle and panel pairs."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def composite_gauss01(n: int, pieces: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule with ``n`` points on each of ``pieces`` equal subintervals."""
    x, w = gauss01(n)
    left = np.arange(pieces) / pieces
    nodes = (left[:, None] + x[None, :] / pieces).ravel()
    weights = np.tile(w / pieces, pieces)
    return nodes, weights


@lru_cache(maxsize=None)
def log_gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for the weight ``-log(x)`` on (0, 1).

    Returns nodes and positive weights such that
    ``sum(w * f(x)) ~ int_0^1 -log(x) f(x) dx``.

    The recurrence coefficients come from a discretized Stieltjes procedure on
    the measure ``-log(x) dx = int_0^1 ds int_0^1 dt [x = s t]`` sampled by a
    tensor Gauss rule, which is exact for polynomials of degree < 2 * m.
    """
    m = max(4 * n, 64)
    s, ws = gauss01(m)
    pts = np.outer(s, s).ravel()
    wts = np.outer(ws, ws).ravel()

    alpha = np.zeros(n)
    beta = np.zeros(n)
    p_prev = np.zeros_like(pts)
    p_cur = np.ones_like(pts)
    norm_prev = 1.0
    for k in range(n):
        norm_cur = np.sum(wts * p_cur**2)
        alpha[k] = np.sum(wts * pts * p_cur**2) / norm_cur
        beta[k] = norm_cur if k == 0 else norm_cur / norm_prev
        p_next = (pts - alpha[k]) * p_cur - (beta[k] * p_prev if k > 0 else 0.0)
        p_prev, p_cur, norm_prev = p_cur, p_next, norm_cur

    jacobi = np.diag(alpha) + np.diag(np.sqrt(beta[1:]), 1) + np.diag(np.sqrt(beta[1:]), -1)
    nodes, vecs = np.linalg.eigh(jacobi)
    weights = beta[0] * vecs[0, :] ** 2
    return nodes, weights


@lru_cache(maxsize=None)
def triangle_rule() -> tuple[np.ndarray, np.ndarray]:
    """Points (7, 2) and weights (7,) of the degree-5 Dunavant rule.

    Weights sum to the reference area 1/2.
    """
    a1 = (1.0 - 0.0597158717897698) / 2.0
    a2 = (1.0 - 0.7974269853530873) / 2.0
    bary = np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [0.0597158717897698, a1, a1],
            [a1, 0.0597158717897698, a1],
            [a1, a1, 0.0597158717897698],
            [0.7974269853530873, a2, a2],
            [a2, 0.7974269853530873, a2],
            [a2, a2, 0.7974269853530873],
        ]
    )
    w = np.array(
        [0.225] + [0.1323941527885062] * 3 + [0.1259391805448271] * 3
    )
    return bary[:, 1:].copy(), 0.5 * w


class SingularPairRule:
    """Node sets for a log-singular integral over the unit square.

    An integrand ``a(u, v) * log|x(u) - z(v)| + b(u, v)`` is split into
    ``a * log(rho) + [a * log(|x - z| / rho) + b]`` where ``rho`` vanishes on
    the singular set and the bracket is smooth in the transformed variables.

    Attributes
    ----------
    u, v, w, rho
        Regular set: ``sum(w * F(u, v))`` integrates smooth ``F``; ``rho`` is
        the local singular coordinate at each node.
    lu, lv, lw
        Log set: ``sum(lw * a(lu, lv))`` approximates ``int a * log(rho)``.
    """

    def __init__(self, u, v, w, rho, lu, lv, lw):
        self.u, self.v, self.w, self.rho = u, v, w, rho
        self.lu, self.lv, self.lw = lu, lv, lw


@lru_cache(maxsize=None)
def identical_panel_rule(n: int) -> SingularPairRule:
    """Rule for test and trial on the same panel (singular on u == v).

    With ``r = |u - v|`` each triangle of the square becomes
    ``int_0^1 dr int_0^1 dsigma (1 - r)`` and ``rho = r``.
    """
    g, gw = gauss01(n)
    lg, lgw = log_gauss01(n)

    def build(r, wr):
        r_ = r[:, None]
        s_ = g[None, :]
        w_ = (wr[:, None] * gw[None, :]) * (1.0 - r_)
        hi = r_ + (1.0 - r_) * s_
        lo = (1.0 - r_) * s_
        # triangle v < u, then triangle v > u
        u = np.concatenate([hi.ravel(), lo.ravel()])
        v = np.concatenate([lo.ravel(), hi.ravel()])
        w = np.concatenate([w_.ravel(), w_.ravel()])
        rho = np.concatenate([np.broadcast_to(r_, hi.shape).ravel()] * 2)
        return u, v, w, rho

    u, v, w, rho = build(g, gw)
    lu, lv, lw, _ = build(lg, -lgw)
    return SingularPairRule(u, v, w, rho, lu, lv, lw)


@lru_cache(maxsize=None)
def adjacent_panel_rule(n: int, test_end: bool) -> SingularPairRule:
    """Rule for panels sharing one endpoint (singular at that corner).

    ``test_end=True``: the end of the test panel (u = 1) meets the start of
    the trial panel (v = 0); otherwise u = 0 meets v = 1. Duffy coordinates
    around the corner give ``rho`` as the polar-like radius, with Jacobian rho.
    """
    g, gw = gauss01(n)
    lg, lgw = log_gauss01(n)

    def build(rh, wrh):
        r_ = rh[:, None]
        t_ = g[None, :]
        w_ = (wrh[:, None] * gw[None, :]) * r_
        big = np.broadcast_to(r_, (rh.size, n))
        small = r_ * t_
        # p, q: distances of u and v from the shared corner
        p = np.concatenate([big.ravel(), small.ravel()])
        q = np.concatenate([small.ravel(), big.ravel()])
        w = np.concatenate([w_.ravel(), w_.ravel()])
        rho = np.concatenate([big.ravel(), big.ravel()])
        if test_end:
            return 1.0 - p, q, w, rho
        return p, 1.0 - q, w, rho

    u, v, w, rho = build(g, gw)
    lu, lv, lw, _ = build(lg, -lgw)
    return SingularPairRule(u, v, w, rho, lu, lv, lw)
