"""Quadrature rules and panel-pair integration for flat-panel Galerkin BEM.

Rules live on the reference interval [0, 1]. Panel pairs are classified as
coincident, adjacent (one shared node), near (distance below twice the
largest panel length) or far, and each class gets its own rule:

* far: tensor Gauss-Legendre;
* near: iterated composite Gauss, the outer variable graded toward the
  points facing the other panel's endpoints and the inner one toward the
  projection of each outer node;
* adjacent: composite Gauss on L-shaped cells graded geometrically toward
  the shared node;
* coincident: the kernel is split as ``c(x, y) log|x - y| + smooth``; the
  logarithmic part uses a log-weighted rule in the difference variable and
  the smooth part a tensor Gauss rule.
"""

import math
import os
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

COINCIDENT, ADJACENT, NEAR, FAR = "coincident", "adjacent", "near", "far"


@dataclass(frozen=True)
class QuadRule:
    """Nodes and positive weights on [0, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, f):
        return np.dot(self.weights, f(self.nodes))


@lru_cache(maxsize=None)
def _gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadRule(nodes, weights, 2 * order - 1)


def gauss_legendre(order):
    """Gauss-Legendre rule on [0, 1], exact up to degree ``2*order - 1``."""
    if not (isinstance(order, (int, np.integer)) and 1 <= order <= 64):
        raise ValueError(f"Gauss-Legendre order must be in [1, 64], got {order}")
    return _gauss_legendre(int(order))


def _recurrence_from_moments(moments, n):
    """Chebyshev algorithm: three-term recurrence from exact moments."""
    alpha = [Fraction(0)] * n
    beta = [Fraction(0)] * n
    sig_prev = [Fraction(0)] * (2 * n)
    sig = list(moments[: 2 * n])
    alpha[0] = moments[1] / moments[0]
    beta[0] = moments[0]
    for k in range(1, n):
        new = [Fraction(0)] * (2 * n)
        for m in range(k, 2 * n - k):
            new[m] = sig[m + 1] - alpha[k - 1] * sig[m] - beta[k - 1] * sig_prev[m]
        alpha[k] = new[k + 1] / new[k] - sig[k] / sig[k - 1]
        beta[k] = new[k] / sig[k - 1]
        sig_prev, sig = sig, new
    return alpha, beta


@lru_cache(maxsize=None)
def _gauss_log(order):
    moments = [Fraction(1, (k + 1) ** 2) for k in range(2 * order)]
    alpha, beta = _recurrence_from_moments(moments, order)
    a = np.array([float(t) for t in alpha])
    b = np.sqrt(np.array([float(t) for t in beta[1:]]))
    jac = np.diag(a) + np.diag(b, 1) + np.diag(b, -1)
    nodes, vecs = np.linalg.eigh(jac)
    weights = float(beta[0]) * vecs[0] ** 2
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadRule(nodes, weights, 2 * order - 1)


def gauss_log(order):
    """Gauss rule for ``int_0^1 f(x) log(1/x) dx``.

    The recurrence coefficients come from the exact moments ``1/(k+1)^2``
    in rational arithmetic, so no precision is lost before the final
    eigenvalue problem.
    """
    if not (isinstance(order, (int, np.integer)) and 1 <= order <= 32):
        raise ValueError(f"log-weighted Gauss order must be in [1, 32], got {order}")
    return _gauss_log(int(order))


# ------------------------------------------------------------- orders


@dataclass(frozen=True)
class QuadOrders:
    """Quadrature orders for each panel-pair class.

    ``near_levels`` is the minimum dyadic grading depth for near pairs; the
    depth grows when panels are much closer than their length.
    ``corner_levels`` is the geometric grading depth for adjacent pairs.
    """

    far: int = 6
    near: int = 12
    coincident_log: int = 10
    coincident_gauss: int = 10
    near_levels: int = 4
    corner_levels: int = 24

    def doubled(self):
        return replace(
            self,
            far=2 * self.far,
            near=2 * self.near,
            coincident_log=2 * self.coincident_log,
            coincident_gauss=2 * self.coincident_gauss,
        )

    @classmethod
    def from_env(cls, var="MTF_QUAD_ORDER"):
        """Defaults overridden by ``MTF_QUAD_ORDER="far=8,near=16"``."""
        text = os.environ.get(var, "").strip()
        if not text:
            return cls()
        names = {f.name for f in fields(cls)}
        values = {}
        for item in text.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in names:
                raise ValueError(f"{var}: unknown quadrature field {key!r}")
            values[key] = int(val)
        return cls(**values)


# ------------------------------------------------------- panel classes


def segment_distance(a1, b1, a2, b2):
    """Distance between segments plus the closest parameters on each.

    Arrays broadcast; the segments are assumed not to cross. Returns
    ``(dist, s, t)`` with closest points ``a1 + s (b1 - a1)`` and
    ``a2 + t (b2 - a2)``.
    """
    d1 = b1 - a1
    d2 = b2 - a2

    def project(p, a, d):
        t = np.einsum("...i,...i->...", p - a, d) / np.einsum("...i,...i->...", d, d)
        t = np.clip(t, 0.0, 1.0)
        q = a + t[..., None] * d
        return np.linalg.norm(p - q, axis=-1), t

    cand = []
    dd, t = project(a1, a2, d2)
    cand.append((dd, np.zeros_like(t), t))
    dd, t = project(b1, a2, d2)
    cand.append((dd, np.ones_like(t), t))
    dd, s = project(a2, a1, d1)
    cand.append((dd, s, np.zeros_like(s)))
    dd, s = project(b2, a1, d1)
    cand.append((dd, s, np.ones_like(s)))
    dist = np.stack([c[0] for c in cand])
    k = np.argmin(dist, axis=0)
    pick = lambda i: np.choose(k, [c[i] for c in cand])  # noqa: E731
    return pick(0), pick(1), pick(2)


def classify_pairs(local_panels, a, b):
    """Classify every ordered panel pair of one closed boundary.

    Parameters
    ----------
    local_panels : ndarray of int, shape (P, 2)
        Endpoint node numbers.
    a, b : ndarray, shape (P, 2)
        Panel start and end points.

    Returns
    -------
    cls : ndarray of str, shape (P, P)
    dist : ndarray, shape (P, P)
    """
    P = len(local_panels)
    hmax = float(np.max(np.linalg.norm(b - a, axis=1)))
    dist, _, _ = segment_distance(a[:, None], b[:, None], a[None, :], b[None, :])
    cls = np.full((P, P), FAR, dtype=object)
    cls[dist < 2.0 * hmax] = NEAR
    e = local_panels
    shared = (
        (e[:, None, 0] == e[None, :, 0])
        | (e[:, None, 0] == e[None, :, 1])
        | (e[:, None, 1] == e[None, :, 0])
        | (e[:, None, 1] == e[None, :, 1])
    )
    cls[shared] = ADJACENT
    cls[np.arange(P), np.arange(P)] = COINCIDENT
    return cls, dist


# ------------------------------------------------------ composite rules


def graded_rule_1d(target, levels, order):
    """Composite Gauss rule on [0, 1] graded dyadically toward ``target``."""
    g = gauss_legendre(order)
    edges = []

    def toward_zero(length):
        cuts = [0.0] + [length * 2.0 ** (-k) for k in range(levels, -1, -1)]
        return cuts

    if target <= 0.0:
        cuts = toward_zero(1.0)
    elif target >= 1.0:
        cuts = [1.0 - c for c in toward_zero(1.0)][::-1]
    else:
        left = [target - c for c in toward_zero(target)][::-1]
        right = [target + c for c in toward_zero(1.0 - target)]
        cuts = left[:-1] + right
    edges = np.asarray(cuts)
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    x = (lo[:, None] + (hi - lo)[:, None] * g.nodes[None, :]).ravel()
    w = ((hi - lo)[:, None] * g.weights[None, :]).ravel()
    return x, w


def near_levels(panel_length, distance, base):
    """Dyadic depth so the finest cell is no larger than the gap."""
    if distance <= 0:
        return 40
    need = math.ceil(math.log2(max(panel_length / distance, 1.0))) + 1
    return int(min(max(base, need), 40))


@lru_cache(maxsize=None)
def corner_rule(levels, order):
    """Rule on [0,1]^2 graded toward the corner (0, 0).

    L-shaped shells ``[0, 2^-k]^2 minus [0, 2^-k-1]^2`` made of three
    squares each, plus the final corner square. Returns ``(sigma, tau, w)``.
    """
    g = gauss_legendre(order)
    gx, gy = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    gw = np.outer(g.weights, g.weights)
    sig, tau, wts = [], [], []

    def cell(x0, y0, size):
        sig.append(x0 + size * gx.ravel())
        tau.append(y0 + size * gy.ravel())
        wts.append(size * size * gw.ravel())

    for k in range(levels):
        hi = 2.0 ** (-k)
        lo = 0.5 * hi
        cell(lo, 0.0, lo)
        cell(0.0, lo, lo)
        cell(lo, lo, lo)
    cell(0.0, 0.0, 2.0 ** (-levels))
    out = tuple(np.concatenate(v) for v in (sig, tau, wts))
    for v in out:
        v.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def coincident_rule(log_order, gauss_order):
    """Rules on the unit square for a coincident pair.

    Returns ``(s, t, w)`` for the smooth part (tensor Gauss) and
    ``(s, t, w)`` for the log part, the latter integrating
    ``f(s, t) log|s - t|`` (the log factor is folded into the weights).
    """
    g = gauss_legendre(gauss_order)
    s, t = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    smooth = (s.ravel(), t.ravel(), np.outer(g.weights, g.weights).ravel())
    lg = gauss_log(log_order)
    d, tau = np.meshgrid(lg.nodes, g.nodes, indexing="ij")
    # log|s-t| = -log(1/d); t = (1-d) tau on the triangle s > t
    w = -(1.0 - d) * np.outer(lg.weights, g.weights)
    lo = (1.0 - d) * tau
    hi = lo + d
    log_part = (
        np.concatenate([hi.ravel(), lo.ravel()]),
        np.concatenate([lo.ravel(), hi.ravel()]),
        np.concatenate([w.ravel(), w.ravel()]),
    )
    for arr in smooth + log_part:
        arr.flags.writeable = False
    return smooth, log_part


@lru_cache(maxsize=None)
def _graded_toward_zero(levels, order):
    """Composite Gauss rule on [0, 1] graded dyadically toward 0."""
    x, w = graded_rule_1d(0.0, levels, order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _project(p, a, b):
    d = b - a
    u = float(np.dot(p - a, d) / np.dot(d, d))
    u = min(max(u, 0.0), 1.0)
    return u, float(np.linalg.norm(p - (a + u * d)))


def _graded_multi(targets, length, order):
    """Composite rule on [0, 1] graded toward several points.

    ``targets`` holds ``(position, distance)`` pairs; the grading depth at
    each position follows :func:`near_levels` with the given distance.
    """
    depth = {}
    for u, dist in targets:
        lev = near_levels(length, dist, 0)
        depth[u] = max(depth.get(u, 0), lev)
    cuts = sorted(set([0.0, 1.0]) | set(depth))
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0.0:
            continue
        half = 0.5 * (hi - lo)
        for end, sign in ((lo, 1.0), (hi, -1.0)):
            x, w = _graded_toward_zero(max(depth.get(end, 0), 1), order)
            xs.append(end + sign * half * x)
            ws.append(half * w)
    return np.concatenate(xs), np.concatenate(ws)


def near_rule(pa, pb, qa, qb, orders):
    """Iterated rule on [0, 1]^2 for two close, non-touching panels.

    The outer variable ``s`` (panel ``pa-pb``) is graded toward the points
    closest to the endpoints of the other panel; for every outer node the
    inner variable ``t`` is graded toward the projection of ``x(s)``. This
    resolves near-singularities spread along a whole diagonal, as happens
    for parallel panels across a thin gap.

    Returns
    -------
    s, t, w : ndarray
    """
    pa, pb, qa, qb = (np.asarray(v, dtype=float) for v in (pa, pb, qa, qb))
    len_x = float(np.linalg.norm(pb - pa))
    len_y = float(np.linalg.norm(qb - qa))
    dist, s_star, _ = segment_distance(pa, pb, qa, qb)
    targets = [_project(qa, pa, pb), _project(qb, pa, pb), (float(s_star), float(dist))]
    s_out, w_out = _graded_multi(targets, len_x, orders.near)
    x = pa[None, :] + s_out[:, None] * (pb - pa)[None, :]
    d = qb - qa
    u = np.clip((x - qa) @ d / float(d @ d), 0.0, 1.0)
    gap = np.linalg.norm(x - (qa[None, :] + u[:, None] * d[None, :]), axis=1)
    levels = near_levels(len_y, float(gap.min()), orders.near_levels)
    xi, wi = _graded_toward_zero(levels, orders.near)
    # left piece [0, u] graded toward u, right piece [u, 1] graded toward u
    t = np.concatenate([u[:, None] * (1.0 - xi[None, :]), u[:, None] + (1.0 - u)[:, None] * xi[None, :]], axis=1)
    w = np.concatenate([u[:, None] * wi[None, :], (1.0 - u)[:, None] * wi[None, :]], axis=1)
    w = w * w_out[:, None]
    keep = w > 0
    s = np.broadcast_to(s_out[:, None], t.shape)[keep]
    return s, t[keep], w[keep]


# ------------------------------------------------ generic pair integral


@dataclass(frozen=True)
class PairKernel:
    """Integrand over a panel pair.

    ``value(x, y)`` evaluates the kernel at point arrays of shape (m, 2).
    ``split(x, y)``, needed for coincident pairs, returns
    ``(smooth, log_coeff)`` with
    ``value = log_coeff * log|x - y| + smooth``.
    """

    value: object
    split: object = None


def classify_pair(pa, pb, qa, qb, tol=1e-14):
    """Class of a single ordered pair of segments ``[pa,pb]`` x ``[qa,qb]``."""
    pa, pb, qa, qb = (np.asarray(v, dtype=float) for v in (pa, pb, qa, qb))
    scale = max(np.linalg.norm(pb - pa), np.linalg.norm(qb - qa))
    same = lambda u, v: np.linalg.norm(u - v) <= tol * scale  # noqa: E731
    if (same(pa, qa) and same(pb, qb)) or (same(pa, qb) and same(pb, qa)):
        return COINCIDENT
    if same(pa, qa) or same(pa, qb) or same(pb, qa) or same(pb, qb):
        return ADJACENT
    dist, _, _ = segment_distance(pa, pb, qa, qb)
    return NEAR if dist < 2.0 * scale else FAR


def integrate_panel_pair(kernel, panel_x, panel_y, pair_class=None, orders=None):
    """Integrate ``kernel(x, y)`` over ``panel_x`` x ``panel_y`` (arc length).

    Parameters
    ----------
    kernel : PairKernel or callable
        A plain callable is wrapped as ``PairKernel(value=callable)``.
    panel_x, panel_y : array_like, shape (2, 2)
        Segment endpoints.
    pair_class : str, optional
        Computed from the geometry when omitted.
    orders : QuadOrders, optional

    Returns
    -------
    complex
    """
    if not isinstance(kernel, PairKernel):
        kernel = PairKernel(value=kernel)
    orders = orders or QuadOrders()
    pa, pb = (np.asarray(v, dtype=float) for v in panel_x)
    qa, qb = (np.asarray(v, dtype=float) for v in panel_y)
    cls = pair_class or classify_pair(pa, pb, qa, qb)
    lx = float(np.linalg.norm(pb - pa))
    ly = float(np.linalg.norm(qb - qa))
    jac = lx * ly
    point = lambda a, b, u: a + u[:, None] * (b - a)  # noqa: E731

    if cls == COINCIDENT:
        if kernel.split is None:
            raise ValueError("coincident pairs need a kernel with a log split")
        if np.allclose(pa, qb) and np.allclose(pb, qa):
            qa, qb = qb, qa
        (s, t, w), (sl, tl, wl) = coincident_rule(orders.coincident_log, orders.coincident_gauss)
        x, y = point(pa, pb, s), point(qa, qb, t)
        smooth, coeff = kernel.split(x, y)
        total = np.dot(w, smooth + coeff * math.log(lx))
        x, y = point(pa, pb, sl), point(qa, qb, tl)
        _, coeff = kernel.split(x, y)
        total += np.dot(wl, coeff)
        return complex(total * jac)
    if cls == ADJACENT:
        ends_x = (pa, pb)
        ends_y = (qa, qb)
        ix, iy = min(
            ((i, j) for i in range(2) for j in range(2)),
            key=lambda ij: np.linalg.norm(ends_x[ij[0]] - ends_y[ij[1]]),
        )
        sig, tau, w = corner_rule(orders.corner_levels, orders.near)
        s = sig if ix == 0 else 1.0 - sig
        t = tau if iy == 0 else 1.0 - tau
    elif cls == NEAR:
        s, t, w = near_rule(pa, pb, qa, qb, orders)
    elif cls == FAR:
        g = gauss_legendre(orders.far)
        s = np.repeat(g.nodes, orders.far)
        t = np.tile(g.nodes, orders.far)
        w = np.outer(g.weights, g.weights).ravel()
    else:
        raise ValueError(f"unknown panel-pair class {cls!r}")
    vals = kernel.value(point(pa, pb, s), point(qa, qb, t))
    return complex(np.dot(w, vals) * jac)
