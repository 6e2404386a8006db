"""Galerkin matrices of the Calderon operators and the duality pairing.

Traces are continuous P1 functions on each subdomain boundary. The
multi-trace layout stores, per subdomain ``j``, all Dirichlet coefficients
followed by all Neumann coefficients. Neumann data are normal derivatives
along the outward normal of the subdomain.

For one boundary, with ``G(x, y) = (i/4) H0(kappa |x - y|)``::

    V[i, j]  = <V phi_j, phi_i>   single layer
    K[i, j]  = <K phi_j, phi_i>   double layer, kernel d/dn(y) G
    W[i, j]  = <W phi_j, phi_i>   hypersingular, integrated by parts

The Calderon operator ``A = 2 [[-K, V], [W, K']]`` acts on (Dirichlet,
Neumann) pairs. Its pairing matrix ``B[r, c] = <<e_r, A e_c>>`` with
``<<(v, q), (u, p)>> = <v, p> - <u, q>`` is::

    [[ 2W,  2K^T],
     [ 2K,  -2V ]]

and the duality matrix ``M[r, c] = <<e_r, e_c>>`` is ``[[0, m], [-m, 0]]``
with ``m`` the P1 mass matrix, so that ``inv(M) @ B`` represents ``A``.
"""

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import build_adjacency_tree, induce_boundary_meshes, mesh_skeleton
from .quadrature import (
    ADJACENT,
    COINCIDENT,
    NEAR,
    QuadOrders,
    classify_pairs,
    coincident_rule,
    corner_rule,
    gauss_legendre,
    near_rule,
)
from .specfun import green_and_h1, log_split

ROLES = ("A", "M", "PI", "L_ALPHA", "A_DIAG", "A_OFF")


# --------------------------------------------------------------- layout


@dataclass(frozen=True, eq=False)
class MultiTraceDofMap:
    """Multi-trace coefficient layout.

    Attributes
    ----------
    sizes : tuple of int
        Number of boundary nodes of each subdomain.
    offsets : tuple of int
        Start of each subdomain block in the global vector.
    node_curve : tuple of ndarray
        Interface index of each local node, per subdomain.
    correspondence : tuple
        One ``(j, local_j, k, local_k)`` entry per interface, where the
        index arrays list matching nodes of the two copies.
    """

    sizes: tuple
    offsets: tuple
    node_curve: tuple
    correspondence: tuple

    @property
    def dim(self):
        return self.offsets[-1] + 2 * self.sizes[-1]

    @property
    def n_subdomains(self):
        return len(self.sizes)

    def dirichlet(self, j):
        o = self.offsets[j]
        return slice(o, o + self.sizes[j])

    def neumann(self, j):
        o = self.offsets[j] + self.sizes[j]
        return slice(o, o + self.sizes[j])

    def block(self, j):
        o = self.offsets[j]
        return slice(o, o + 2 * self.sizes[j])

    def split(self, vec):
        """Per-subdomain ``(dirichlet, neumann)`` views of ``vec``."""
        return [(vec[self.dirichlet(j)], vec[self.neumann(j)]) for j in range(len(self.sizes))]

    def join(self, parts):
        out = np.zeros(self.dim, dtype=np.result_type(*[np.asarray(p[0]) for p in parts]))
        for j, (u, p) in enumerate(parts):
            out[self.dirichlet(j)] = u
            out[self.neumann(j)] = p
        return out

    def describe(self):
        """JSON-ready layout description."""
        return {
            "dim": self.dim,
            "subdomains": [
                {
                    "index": j,
                    "nodes": self.sizes[j],
                    "dirichlet": [self.dirichlet(j).start, self.dirichlet(j).stop],
                    "neumann": [self.neumann(j).start, self.neumann(j).stop],
                }
                for j in range(len(self.sizes))
            ],
        }


def build_dofmap(partition, skeleton, meshes):
    sizes = tuple(m.n_nodes for m in meshes)
    offsets = tuple(int(v) for v in np.concatenate([[0], np.cumsum(2 * np.array(sizes))[:-1]]))
    local = []
    for m in meshes:
        table = np.full(skeleton.nodes.shape[0], -1, dtype=np.intp)
        table[m.nodes] = np.arange(m.n_nodes)
        local.append(table)
    corr = []
    for i, f in enumerate(partition.interfaces):
        nodes = skeleton.curve_nodes(i)
        lj, lk = local[f.outer][nodes], local[f.inner][nodes]
        if np.any(lj < 0) or np.any(lk < 0):
            raise ValueError(f"interface {i}: incomplete node correspondence")
        corr.append((f.outer, lj, f.inner, lk))
    return MultiTraceDofMap(sizes, offsets, tuple(m.node_curve for m in meshes), tuple(corr))


@dataclass(frozen=True, eq=False)
class Discretization:
    """Everything derived from a partition and a mesh width."""

    partition: object
    skeleton: object
    meshes: list
    dofmap: MultiTraceDofMap
    tree: object
    orders: QuadOrders = field(default_factory=QuadOrders)

    @property
    def h(self):
        return self.skeleton.h

    @property
    def kappas(self):
        return self.partition.kappas


def discretize(partition, h, orders=None):
    """Mesh a partition and build its multi-trace layout."""
    skeleton = mesh_skeleton(partition, h)
    meshes = induce_boundary_meshes(partition, skeleton)
    dofmap = build_dofmap(partition, skeleton, meshes)
    tree = build_adjacency_tree(partition)
    return Discretization(
        partition, skeleton, meshes, dofmap, tree, orders or QuadOrders.from_env()
    )


# -------------------------------------------------------- matrix object


@dataclass(frozen=True, eq=False)
class GalerkinMatrix:
    """Dense matrix over the multi-trace layout with a role tag."""

    data: np.ndarray
    role: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def shape(self):
        return self.data.shape

    def write(self, path, dofmap=None):
        """Binary dump plus a JSON sidecar ``<path>.json``.

        Layout: uint64 dimension, 8 ASCII bytes of role tag, then
        little-endian float64 (re, im) pairs in row-major order.
        """
        n = self.data.shape[0]
        tag = self.role.encode("ascii")[:8].ljust(8, b" ")
        body = np.ascontiguousarray(self.data, dtype="<c16")
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", n))
            fh.write(tag)
            fh.write(body.view("<f8").tobytes())
        meta = {"dim": n, "role": self.role, "dtype": "complex128-le-interleaved"}
        if dofmap is not None:
            meta["layout"] = dofmap.describe()
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @staticmethod
    def read(path):
        with open(path, "rb") as fh:
            (n,) = struct.unpack("<Q", fh.read(8))
            role = fh.read(8).decode("ascii").strip()
            raw = np.frombuffer(fh.read(), dtype="<f8")
        if raw.size != 2 * n * n:
            raise ValueError(f"{path}: expected {2 * n * n} float64 values, found {raw.size}")
        return GalerkinMatrix(raw.view("<c16").reshape(n, n).copy(), role)


# -------------------------------------------------------- element level


def mass_matrix(mesh, skeleton):
    """P1 mass matrix of one boundary."""
    _, _, length, _, _ = mesh.geometry(skeleton)
    n = mesh.n_nodes
    e = mesh.local_panels
    rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
    vals = np.concatenate([length / 3, length / 3, length / 6, length / 6])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).toarray()


def _pair_sums(starts, kernel, basis):
    """Per-pair sums of ``kernel * basis[:, c]`` over contiguous segments."""
    return np.stack(
        [np.add.reduceat(kernel * basis[:, c], starts) for c in range(basis.shape[1])],
        axis=-1,
    )


def _kernels(kappa, diff, n_y):
    """Kernel values ``G`` and ``dG/dn(y)`` for difference vectors ``x - y``."""
    r = np.hypot(diff[..., 0], diff[..., 1])
    g, f = green_and_h1(kappa, r)
    dn = f * (diff[..., 0] * n_y[..., 0] + diff[..., 1] * n_y[..., 1]) / r
    return g, dn


def _phi(u):
    return np.stack([1.0 - u, u], axis=-1)


def _far_pairs(kappa, a, b, length, normal, order):
    """Tensor Gauss element integrals for every ordered pair."""
    g = gauss_legendre(order)
    P = len(length)
    pts = (a[:, None, :] + g.nodes[None, :, None] * (b - a)[:, None, :]).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    same = np.repeat(np.arange(P), order)
    block = same[:, None] == same[None, :]
    r = np.where(block, 1.0, r)
    gval, fval = green_and_h1(kappa, r)
    ny = np.repeat(normal, order, axis=0)
    dn = fval * (diff[..., 0] * ny[None, :, 0] + diff[..., 1] * ny[None, :, 1]) / r
    gval[block] = 0.0
    dn[block] = 0.0
    wphi = (g.weights[None, :, None] * length[:, None, None]) * _phi(g.nodes)[None, :, :]
    shape = (P, order, P, order)
    V = np.einsum("eafb,eai,fbj->efij", gval.reshape(shape), wphi, wphi, optimize=True)
    K = np.einsum("eafb,eai,fbj->efij", dn.reshape(shape), wphi, wphi, optimize=True)
    return V, K


def _batched(kappa, pairs, build, chunk_points=400_000):
    """Evaluate V and K element integrals for a list of pairs.

    ``build(batch)`` returns ``(pair_id, diff, n_y, phi_x, phi_y, w)`` for a
    slice of pairs, with ``pair_id`` local to the slice.
    """
    n = len(pairs)
    V = np.zeros((n, 2, 2), dtype=complex)
    K = np.zeros((n, 2, 2), dtype=complex)
    start = 0
    while start < n:
        stop = start + 1
        est = build.points(pairs[start])
        while stop < n and est + build.points(pairs[stop]) <= chunk_points:
            est += build.points(pairs[stop])
            stop += 1
        pid, diff, ny, px, py, w = build(pairs[start:stop])
        g, dn = _kernels(kappa, diff, ny)
        basis = (px[:, :, None] * py[:, None, :]).reshape(-1, 4) * w[:, None]
        starts = np.flatnonzero(np.r_[True, pid[1:] != pid[:-1]])
        m = stop - start
        V[start:stop] = _pair_sums(starts, g, basis).reshape(m, 2, 2)
        K[start:stop] = _pair_sums(starts, dn, basis).reshape(m, 2, 2)
        start = stop
    return V, K


class _AdjacentBuilder:
    def __init__(self, mesh_panels, xy, length, normal, orders):
        self.e = mesh_panels
        self.xy = xy
        self.length = length
        self.normal = normal
        self.sig, self.tau, self.w = corner_rule(orders.corner_levels, orders.near)

    def points(self, pair):
        return len(self.w)

    def __call__(self, pairs):
        pairs = np.asarray(pairs)
        ei, fi = pairs[:, 0], pairs[:, 1]
        pe, pf = self.e[ei], self.e[fi]
        # shared endpoint position on each panel
        ia = np.where((pe[:, 0] == pf[:, 0]) | (pe[:, 0] == pf[:, 1]), 0, 1)
        ib = np.where(pf[:, 0] == pe[np.arange(len(pe)), ia], 0, 1)
        corner = self.xy[pe[np.arange(len(pe)), ia]]
        ue = self.xy[pe[np.arange(len(pe)), 1 - ia]] - corner
        uf = self.xy[pf[np.arange(len(pf)), 1 - ib]] - corner
        m = len(self.w)
        sig = self.sig[None, :]
        tau = self.tau[None, :]
        diff = sig[..., None] * ue[:, None, :] - tau[..., None] * uf[:, None, :]
        s = np.where(ia[:, None] == 0, sig, 1.0 - sig)
        t = np.where(ib[:, None] == 0, tau, 1.0 - tau)
        w = self.w[None, :] * (self.length[ei] * self.length[fi])[:, None]
        ny = np.broadcast_to(self.normal[fi][:, None, :], diff.shape)
        pid = np.repeat(np.arange(len(pairs)), m)
        return (
            pid,
            diff.reshape(-1, 2),
            ny.reshape(-1, 2),
            _phi(s.ravel()),
            _phi(t.ravel()),
            w.ravel(),
        )


class _NearBuilder:
    def __init__(self, a, b, length, normal, orders):
        self.a, self.b = a, b
        self.length = length
        self.normal = normal
        self.orders = orders
        self.cache = {}

    def rule(self, pair):
        key = (int(pair[0]), int(pair[1]))
        if key not in self.cache:
            e, f = key
            self.cache[key] = near_rule(self.a[e], self.b[e], self.a[f], self.b[f], self.orders)
        return self.cache[key]

    def points(self, pair):
        return len(self.rule(pair)[2])

    def __call__(self, pairs):
        pid, diff, ny, px, py, w = [], [], [], [], [], []
        for k, pair in enumerate(pairs):
            e, f = int(pair[0]), int(pair[1])
            s, t, wt = self.rule(pair)
            d = (self.a[e] - self.a[f])[None, :] + s[:, None] * (self.b[e] - self.a[e]) - t[
                :, None
            ] * (self.b[f] - self.a[f])
            pid.append(np.full(len(s), k))
            diff.append(d)
            ny.append(np.broadcast_to(self.normal[f], d.shape))
            px.append(_phi(s))
            py.append(_phi(t))
            w.append(wt * self.length[e] * self.length[f])
        self.cache.clear()
        return (
            np.concatenate(pid),
            np.vstack(diff),
            np.vstack(ny),
            np.vstack(px),
            np.vstack(py),
            np.concatenate(w),
        )


def _coincident(kappa, length, orders):
    """Single-layer element integrals on each panel with itself."""
    (s, t, w), (sl, tl, wl) = coincident_rule(orders.coincident_log, orders.coincident_gauss)
    bs = (_phi(s)[:, :, None] * _phi(t)[:, None, :]).reshape(-1, 4)
    bl = (_phi(sl)[:, :, None] * _phi(tl)[:, None, :]).reshape(-1, 4)
    r = np.abs(s - t)[None, :] * length[:, None]
    smooth, coeff = log_split(kappa, r)
    smooth = smooth + coeff * np.log(length)[:, None]
    V = (smooth * w[None, :]) @ bs
    _, coeff_l = log_split(kappa, np.abs(sl - tl)[None, :] * length[:, None])
    V = V + (coeff_l * wl[None, :]) @ bl
    return (V * (length**2)[:, None]).reshape(-1, 2, 2)


def layer_operators(mesh, skeleton, kappa, orders=None):
    """Galerkin matrices ``V``, ``K`` and ``W`` of one boundary.

    Parameters
    ----------
    mesh : BoundaryMesh
    skeleton : SkeletonMesh
    kappa : float
    orders : QuadOrders, optional

    Returns
    -------
    V, K, W : ndarray, shape (N, N)
        Node-based matrices with rows indexing test functions.
    """
    orders = orders or QuadOrders()
    a, b, length, _, normal = mesh.geometry(skeleton)
    xy = skeleton.nodes[mesh.nodes]
    cls, _ = classify_pairs(mesh.local_panels, a, b)
    Vp, Kp = _far_pairs(kappa, a, b, length, normal, orders.far)

    adj = np.argwhere(cls == ADJACENT)
    if len(adj):
        builder = _AdjacentBuilder(mesh.local_panels, xy, length, normal, orders)
        v, k = _batched(kappa, adj, builder)
        Vp[adj[:, 0], adj[:, 1]] = v
        Kp[adj[:, 0], adj[:, 1]] = k
    near = np.argwhere(cls == NEAR)
    if len(near):
        builder = _NearBuilder(a, b, length, normal, orders)
        v, k = _batched(kappa, near, builder)
        Vp[near[:, 0], near[:, 1]] = v
        Kp[near[:, 0], near[:, 1]] = k
    diag = np.arange(len(length))
    Vp[diag, diag] = _coincident(kappa, length, orders)
    Kp[diag, diag] = 0.0  # (x - y).n(y) = 0 on a flat panel

    dphi = np.column_stack([-1.0 / length, 1.0 / length])
    gsum = Vp.sum(axis=(2, 3))
    nn = normal @ normal.T
    Wp = dphi[:, None, :, None] * dphi[None, :, None, :] * gsum[:, :, None, None]
    Wp = Wp - (kappa**2) * nn[:, :, None, None] * Vp

    n = mesh.n_nodes
    e = mesh.local_panels
    rows = np.broadcast_to(e[:, None, :, None], Vp.shape).ravel()
    cols = np.broadcast_to(e[None, :, None, :], Vp.shape).ravel()

    def scatter(vals):
        out = np.zeros((n, n), dtype=complex)
        np.add.at(out, (rows, cols), vals.ravel())
        return out

    return scatter(Vp), scatter(Kp), scatter(Wp)


# ---------------------------------------------------------- global level


def assemble_duality(disc):
    """Skew duality matrix ``M`` (role "M"), real and exactly antisymmetric."""
    dm = disc.dofmap
    M = np.zeros((dm.dim, dm.dim))
    for j, mesh in enumerate(disc.meshes):
        m = mass_matrix(mesh, disc.skeleton)
        M[dm.dirichlet(j), dm.neumann(j)] = m
        M[dm.neumann(j), dm.dirichlet(j)] = -m.T
    return GalerkinMatrix(M, "M")


def calderon_block(V, K, W):
    """Pairing matrix of one subdomain in (Dirichlet, Neumann) order."""
    return np.block([[2.0 * W, 2.0 * K.T], [2.0 * K, -2.0 * V]])


def assemble_calderon(disc, kappas=None):
    """Block-diagonal pairing matrix ``B_A`` of the Calderon operators (role "A")."""
    kappas = tuple(disc.kappas if kappas is None else kappas)
    if len(kappas) != disc.dofmap.n_subdomains or any(not k > 0 for k in kappas):
        raise ValueError("one positive wave number per subdomain is required")
    dm = disc.dofmap
    B = np.zeros((dm.dim, dm.dim), dtype=complex)
    for j, mesh in enumerate(disc.meshes):
        V, K, W = layer_operators(mesh, disc.skeleton, kappas[j], disc.orders)
        B[dm.block(j), dm.block(j)] = calderon_block(V, K, W)
    return GalerkinMatrix(B, "A")


# ------------------------------------------------------------ potentials


def _potential_points(x, a, b, length, order):
    """Quadrature on every panel, subdivided where ``x`` is close."""
    d = b - a
    t = np.clip(np.einsum("ij,ij->i", x - a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    dist = np.linalg.norm(x - (a + t[:, None] * d), axis=1)
    if np.any(dist < length / 10.0):
        raise ValueError("field point too close to the boundary (closer than h/10)")
    nsub = np.clip(np.ceil(2.0 * length / dist), 1, 64).astype(int)
    g = gauss_legendre(order)
    pan, u, w = [], [], []
    for e in range(len(length)):
        k = nsub[e]
        lo = np.arange(k) / k
        uu = (lo[:, None] + g.nodes[None, :] / k).ravel()
        pan.append(np.full(uu.size, e))
        u.append(uu)
        w.append(np.tile(g.weights / k, k) * length[e])
    return np.concatenate(pan), np.concatenate(u), np.concatenate(w)


def eval_potential(disc, j, dirichlet, neumann, points, kappa=None, order=12):
    """Potential of subdomain ``j`` generated by P1 trace data.

    Evaluates ``SL(p)(x) - DL(u)(x)`` with
    ``SL(p)(x) = int G(x, y) p(y) ds(y)`` and
    ``DL(u)(x) = int dG/dn(y)(x, y) u(y) ds(y)``, the outward normal of
    subdomain ``j`` being used. For traces of a Helmholtz solution in the
    subdomain this reproduces the field inside and gives zero outside.

    Parameters
    ----------
    disc : Discretization
    j : int
    dirichlet, neumann : array_like
        Nodal coefficients on the boundary of subdomain ``j``.
    points : array_like, shape (m, 2)
    kappa : float, optional
        Defaults to the wave number of subdomain ``j``.

    Returns
    -------
    ndarray of complex, shape (m,)
    """
    mesh = disc.meshes[j]
    kappa = disc.kappas[j] if kappa is None else kappa
    a, b, length, _, normal = mesh.geometry(disc.skeleton)
    e = mesh.local_panels
    u = np.asarray(dirichlet, dtype=complex)
    p = np.asarray(neumann, dtype=complex)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(pts), dtype=complex)
    for i, x in enumerate(pts):
        pan, s, w = _potential_points(x, a, b, length, order)
        y = a[pan] + s[:, None] * (b - a)[pan]
        g, dn = _kernels(kappa, x[None, :] - y, normal[pan])
        phi = _phi(s)
        uy = phi[:, 0] * u[e[pan, 0]] + phi[:, 1] * u[e[pan, 1]]
        py = phi[:, 0] * p[e[pan, 0]] + phi[:, 1] * p[e[pan, 1]]
        out[i] = np.sum(w * (g * py - dn * uy))
    return out


def plane_wave_traces(disc, j, direction, kappa, amplitude=1.0):
    """Nodal Dirichlet and Neumann traces of a plane wave on boundary ``j``.

    The Neumann trace uses the node normals (average of the two adjacent
    panel normals), oriented outward from subdomain ``j``.
    """
    d = np.asarray(direction, dtype=float)
    if not math.isclose(float(np.hypot(*d)), 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError("plane-wave direction must be a unit vector")
    mesh = disc.meshes[j]
    xy = disc.skeleton.nodes[mesh.nodes]
    nrm = mesh.node_normals(disc.skeleton)
    u = amplitude * np.exp(1j * kappa * (xy @ d))
    return u, 1j * kappa * (nrm @ d) * u


def field_traces(disc, value, gradient):
    """Multi-trace vector of a global smooth field.

    ``value(xy)`` and ``gradient(xy)`` evaluate the field and its gradient
    at node arrays; each subdomain uses its own outward node normals.
    """
    parts = []
    for mesh in disc.meshes:
        xy = disc.skeleton.nodes[mesh.nodes]
        nrm = mesh.node_normals(disc.skeleton)
        grad = gradient(xy)
        parts.append((value(xy), grad[:, 0] * nrm[:, 0] + grad[:, 1] * nrm[:, 1]))
    return disc.dofmap.join(parts)
