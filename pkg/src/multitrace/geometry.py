"""Junction-free partitions of the plane and their skeleton meshes.

Subdomain 0 is the unbounded exterior. Every interface is a closed curve
shared by exactly two subdomains, and the interfaces are pairwise disjoint.
The adjacency graph is a tree rooted at 0. On an interface the subdomain
further from the root (the child) lies inside the curve.

Skeleton curves are discretized counterclockwise, so the panel normal
``n = (t_y, -t_x)`` points out of the child. The parent sees each panel
reversed (orientation sign -1).
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Invalid partition or mesh request."""


# ---------------------------------------------------------------- curves


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_touch(p1, p2, q1, q2, tol):
    """True if closed segments [p1,p2] and [q1,q2] intersect or touch."""
    d1, d2 = p2 - p1, q2 - q1
    o1 = _cross(d1, q1 - p1)
    o2 = _cross(d1, q2 - p1)
    o3 = _cross(d2, p1 - q1)
    o4 = _cross(d2, p2 - q1)
    scale = tol * max(np.linalg.norm(d1), np.linalg.norm(d2), 1.0) ** 2
    if ((o1 > scale and o2 < -scale) or (o1 < -scale and o2 > scale)) and (
        (o3 > scale and o4 < -scale) or (o3 < -scale and o4 > scale)
    ):
        return True
    return min(
        _point_segment_distance(q1, p1, p2),
        _point_segment_distance(q2, p1, p2),
        _point_segment_distance(p1, q1, q2),
        _point_segment_distance(p2, q1, q2),
    ) <= tol * max(np.linalg.norm(d1), np.linalg.norm(d2), 1.0)


def _point_segment_distance(p, a, b):
    d = b - a
    t = float(np.dot(p - a, d) / np.dot(d, d))
    t = min(max(t, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


@dataclass(frozen=True)
class ClosedCurve:
    """A circle or a simple polygon, stored counterclockwise.

    Parameters
    ----------
    kind : {"circle", "polygon"}
    center, radius : circle data.
    vertices : polygon vertices, shape (m, 2); reordered counterclockwise.
    counterclockwise : True when the stored traversal is counterclockwise,
        which is always the case after construction.
    """

    kind: str
    center: tuple = (0.0, 0.0)
    radius: float = 0.0
    vertices: tuple = ()
    counterclockwise: bool = True

    @staticmethod
    def circle(center, radius):
        if not radius > 0:
            raise GeometryError(f"circle radius must be positive, got {radius}")
        c = tuple(float(t) for t in center)
        return ClosedCurve("circle", center=c, radius=float(radius))

    @staticmethod
    def polygon(vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("a polygon needs at least 3 two-dimensional vertices")
        m = len(v)
        for i in range(m):
            for j in range(i + 1, m):
                if np.allclose(v[i], v[j], rtol=0, atol=1e-14):
                    raise GeometryError("polygon vertices must be distinct")
        for i in range(m):
            for j in range(i + 1, m):
                if j == i + 1 or (i == 0 and j == m - 1):
                    continue
                if _segments_touch(v[i], v[(i + 1) % m], v[j], v[(j + 1) % m], 1e-12):
                    raise GeometryError("polygon is not simple (edges intersect)")
        area = _signed_area(v)
        if abs(area) < 1e-14:
            raise GeometryError("degenerate polygon")
        if area < 0:
            v = v[::-1]
        return ClosedCurve("polygon", vertices=tuple(map(tuple, v)))

    def vertex_array(self):
        return np.asarray(self.vertices, dtype=float)

    def length(self):
        if self.kind == "circle":
            return 2.0 * math.pi * self.radius
        v = self.vertex_array()
        return float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))

    def panel_counts(self, h):
        """Panels per polygon edge, or a one-element list for a circle."""
        if self.kind == "circle":
            return [math.ceil(self.length() / h - 1e-9)]
        v = self.vertex_array()
        edges = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        return [max(1, math.ceil(e / h - 1e-9)) for e in edges]

    def discretize(self, h):
        """Counterclockwise mesh nodes with target width ``h``."""
        counts = self.panel_counts(h)
        if sum(counts) < 3:
            raise GeometryError(
                f"mesh width h={h} is too coarse: fewer than 3 panels on a curve"
            )
        if self.kind == "circle":
            n = counts[0]
            t = 2.0 * math.pi * np.arange(n) / n
            c = np.asarray(self.center)
            return c + self.radius * np.column_stack([np.cos(t), np.sin(t)])
        v = self.vertex_array()
        pts = []
        for i, m in enumerate(counts):
            a, b = v[i], v[(i + 1) % len(v)]
            s = np.arange(m)[:, None] / m
            pts.append(a + s * (b - a))
        return np.vstack(pts)

    def contains(self, p):
        """Strict interior test (points on the curve are not tested for)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "circle":
            return float(np.linalg.norm(p - np.asarray(self.center))) < self.radius
        v = self.vertex_array()
        inside = False
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            if (a[1] > p[1]) != (b[1] > p[1]):
                x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
                if x > p[0]:
                    inside = not inside
        return inside

    def sample_point(self):
        if self.kind == "circle":
            return np.asarray(self.center) + np.array([self.radius, 0.0])
        return self.vertex_array()[0]


def curves_touch(a, b, tol=1e-12):
    """True if two closed curves intersect or share a point."""
    if a.kind == "circle" and b.kind == "circle":
        d = float(np.linalg.norm(np.asarray(a.center) - np.asarray(b.center)))
        scale = tol * max(a.radius, b.radius, 1.0)
        return abs(a.radius - b.radius) - scale <= d <= a.radius + b.radius + scale
    if a.kind == "circle":
        a, b = b, a
    if b.kind == "circle":
        c = np.asarray(b.center)
        v = a.vertex_array()
        scale = tol * max(b.radius, 1.0)
        for i in range(len(v)):
            p, q = v[i], v[(i + 1) % len(v)]
            dmin = _point_segment_distance(c, p, q)
            dmax = max(np.linalg.norm(p - c), np.linalg.norm(q - c))
            if dmin - scale <= b.radius <= dmax + scale:
                return True
        return False
    va, vb = a.vertex_array(), b.vertex_array()
    for i in range(len(va)):
        for j in range(len(vb)):
            if _segments_touch(
                va[i], va[(i + 1) % len(va)], vb[j], vb[(j + 1) % len(vb)], tol
            ):
                return True
    return False


# ------------------------------------------------------------ partition


@dataclass(frozen=True)
class Interface:
    """Interface curve between ``outer`` (parent) and ``inner`` (child)."""

    outer: int
    inner: int
    curve: ClosedCurve


@dataclass(frozen=True)
class AdjacencyTree:
    """Tree of subdomains rooted at the exterior 0."""

    nodes: tuple
    edges: tuple
    parent: dict = field(hash=False)

    def children(self, j):
        return tuple(k for k, p in self.parent.items() if p == j)

    def depth(self, j):
        d = 0
        while j != 0:
            j = self.parent[j]
            d += 1
        return d

    def longest_chain(self):
        """Number of edges on the longest simple path."""
        adj = {v: [] for v in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)

        def farthest(src):
            dist = {src: 0}
            queue = deque([src])
            while queue:
                u = queue.popleft()
                for w in adj[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        queue.append(w)
            far = max(dist, key=dist.get)
            return far, dist[far]

        end, _ = farthest(self.nodes[0])
        return farthest(end)[1]


def _tree_from_pairs(n_sub, pairs):
    adj = {j: [] for j in range(n_sub)}
    for a, b in pairs:
        adj[a].append(b)
        adj[b].append(a)
    if len(pairs) != n_sub - 1:
        raise GeometryError(
            f"adjacency graph has {len(pairs)} edges for {n_sub} subdomains; "
            "a tree needs exactly n-1 (cycle detected or disconnected)"
        )
    parent = {}
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w in seen:
                continue
            seen.add(w)
            parent[w] = u
            queue.append(w)
    if len(seen) != n_sub:
        raise GeometryError("adjacency graph is not connected (cycle detected)")
    return parent


@dataclass(frozen=True)
class SubdomainPartition:
    """Validated subdomain partition.

    Attributes
    ----------
    kappas : tuple of float
        Wave number per subdomain; index 0 is the exterior.
    interfaces : tuple of Interface
        One entry per interface curve.
    name : str
        Geometry identifier used in reports.
    """

    kappas: tuple
    interfaces: tuple
    name: str = "custom"

    @property
    def n_subdomains(self):
        return len(self.kappas)

    def interfaces_of(self, j):
        return [i for i, f in enumerate(self.interfaces) if j in (f.outer, f.inner)]

    def with_kappas(self, kappas):
        kappas = tuple(float(k) for k in kappas)
        if len(kappas) != self.n_subdomains:
            raise GeometryError("one wave number per subdomain is required")
        if any(not k > 0 for k in kappas):
            raise GeometryError("wave numbers must be positive")
        return SubdomainPartition(kappas, self.interfaces, self.name)


def _parse_curve(spec):
    kind = spec.get("kind")
    if kind == "circle":
        return ClosedCurve.circle(spec.get("center", (0.0, 0.0)), spec["radius"])
    if kind == "polygon":
        return ClosedCurve.polygon(spec["vertices"])
    raise GeometryError(f"unknown curve kind {kind!r}")


def build_partition(config, name=None):
    """Validate a partition description.

    Parameters
    ----------
    config : dict
        ``{"subdomains": [{"kappa": ...}, ...], "curves": [{"kind": ...,
        "between": [j, k], ...}, ...]}``. Circles take ``center`` and
        ``radius``; polygons take ``vertices``.
    name : str, optional
        Geometry identifier; defaults to ``config.get("name", "custom")``.

    Returns
    -------
    SubdomainPartition

    Raises
    ------
    GeometryError
        On junctions, non-simple polygons, nonpositive wave numbers, or a
        non-tree adjacency structure.
    """
    try:
        kappas = tuple(float(s["kappa"]) for s in config["subdomains"])
        raw = config["curves"]
    except (KeyError, TypeError) as exc:
        raise GeometryError(f"malformed partition config: {exc}") from exc
    if len(kappas) < 2:
        raise GeometryError("at least two subdomains are required")
    if any(not (k > 0 and math.isfinite(k)) for k in kappas):
        raise GeometryError("wave numbers must be positive")
    curves, pairs = [], []
    for spec in raw:
        j, k = (int(t) for t in spec["between"])
        if j == k or not (0 <= j < len(kappas) and 0 <= k < len(kappas)):
            raise GeometryError(f"invalid subdomain pair {spec['between']}")
        curves.append(_parse_curve(spec))
        pairs.append((j, k))
    if len(set(frozenset(p) for p in pairs)) != len(pairs):
        raise GeometryError("two curves separate the same pair (cycle detected)")
    for a in range(len(curves)):
        for b in range(a + 1, len(curves)):
            if curves_touch(curves[a], curves[b]):
                raise GeometryError(
                    f"junction detected: curves {a} and {b} intersect or touch "
                    "(interfaces must be disjoint closed curves)"
                )
    parent = _tree_from_pairs(len(kappas), pairs)
    interfaces = []
    for c, (j, k) in zip(curves, pairs):
        inner = k if parent.get(k) == j else j
        interfaces.append(Interface(parent[inner], inner, c))

    # containment must agree with the tree: D lies inside C iff D's inner
    # subdomain is in the subtree below C
    def below(node, top):
        while node != 0:
            if node == top:
                return True
            node = parent[node]
        return False

    for a, fa in enumerate(interfaces):
        for b, fb in enumerate(interfaces):
            if a == b:
                continue
            inside = fa.curve.contains(fb.curve.sample_point())
            if inside != below(fb.inner, fa.inner):
                raise GeometryError(
                    f"curve {b} nesting is inconsistent with the declared "
                    f"subdomain pairs of curve {a}"
                )
    return SubdomainPartition(kappas, tuple(interfaces), name or config.get("name", "custom"))


def build_adjacency_tree(partition):
    """Adjacency tree with edges ``(parent, child)``."""
    pairs = [(f.outer, f.inner) for f in partition.interfaces]
    parent = _tree_from_pairs(partition.n_subdomains, pairs)
    return AdjacencyTree(
        nodes=tuple(range(partition.n_subdomains)), edges=tuple(pairs), parent=parent
    )


# --------------------------------------------------------------- meshes


@dataclass(frozen=True, eq=False)
class SkeletonMesh:
    """Flat-panel mesh of all interfaces.

    Attributes
    ----------
    nodes : ndarray, shape (N, 2)
    panels : ndarray of int, shape (P, 2)
        Counterclockwise panel endpoints along each curve.
    panel_interface : ndarray of int, shape (P,)
        Interface index owning each panel.
    node_interface : ndarray of int, shape (N,)
    h : float
        Target width.
    """

    nodes: np.ndarray
    panels: np.ndarray
    panel_interface: np.ndarray
    node_interface: np.ndarray
    h: float

    def panel_lengths(self):
        d = self.nodes[self.panels[:, 1]] - self.nodes[self.panels[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def curve_panels(self, i):
        return np.flatnonzero(self.panel_interface == i)

    def curve_nodes(self, i):
        return np.flatnonzero(self.node_interface == i)


def mesh_skeleton(partition, h):
    """Mesh every interface with panels of width close to ``h``.

    Polygon vertices are always nodes (each edge gets ``ceil(edge/h)``
    panels); circles get ``ceil(2 pi R/h)`` equal chords.
    """
    if not h > 0:
        raise GeometryError("mesh width must be positive")
    nodes, panels, p_tag, n_tag = [], [], [], []
    offset = 0
    for i, f in enumerate(partition.interfaces):
        pts = f.curve.discretize(h)
        m = len(pts)
        idx = offset + np.arange(m)
        nodes.append(pts)
        panels.append(np.column_stack([idx, np.roll(idx, -1)]))
        p_tag.append(np.full(m, i))
        n_tag.append(np.full(m, i))
        offset += m
    return SkeletonMesh(
        nodes=np.vstack(nodes),
        panels=np.vstack(panels).astype(np.intp),
        panel_interface=np.concatenate(p_tag).astype(np.intp),
        node_interface=np.concatenate(n_tag).astype(np.intp),
        h=float(h),
    )


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Mesh of one subdomain boundary, oriented by its outward normal.

    Attributes
    ----------
    subdomain : int
    panels : ndarray of int
        Skeleton panel indices.
    signs : ndarray of int
        +1 where the skeleton orientation gives the outward normal, -1 where
        the panel is traversed backwards.
    nodes : ndarray of int
        Skeleton node ids of the boundary, in skeleton order. The local node
        number is the position in this array.
    local_panels : ndarray of int, shape (P, 2)
        Oriented panel endpoints in local node numbers.
    node_curve : ndarray of int
        Interface index of each local node.
    """

    subdomain: int
    panels: np.ndarray
    signs: np.ndarray
    nodes: np.ndarray
    local_panels: np.ndarray
    node_curve: np.ndarray
    interfaces: tuple

    @property
    def n_nodes(self):
        return len(self.nodes)

    def geometry(self, skeleton):
        """Panel start points, end points, lengths, unit tangents and normals."""
        xy = skeleton.nodes[self.nodes]
        a = xy[self.local_panels[:, 0]]
        b = xy[self.local_panels[:, 1]]
        d = b - a
        length = np.hypot(d[:, 0], d[:, 1])
        t = d / length[:, None]
        n = np.column_stack([t[:, 1], -t[:, 0]])
        return a, b, length, t, n

    def node_normals(self, skeleton):
        """Normalized average of the two adjacent panel normals per node."""
        _, _, _, _, n = self.geometry(skeleton)
        acc = np.zeros((self.n_nodes, 2))
        np.add.at(acc, self.local_panels[:, 0], n)
        np.add.at(acc, self.local_panels[:, 1], n)
        return acc / np.linalg.norm(acc, axis=1)[:, None]


def induce_boundary_meshes(partition, skeleton):
    """Boundary mesh of every subdomain, including the exterior 0."""
    meshes = []
    for j in range(partition.n_subdomains):
        ifaces = tuple(partition.interfaces_of(j))
        pan, sgn, nod, curve = [], [], [], []
        for i in ifaces:
            s = 1 if partition.interfaces[i].inner == j else -1
            p = skeleton.curve_panels(i)
            pan.append(p)
            sgn.append(np.full(len(p), s))
            nn = skeleton.curve_nodes(i)
            nod.append(nn)
            curve.append(np.full(len(nn), i))
        panels = np.concatenate(pan)
        signs = np.concatenate(sgn)
        nodes = np.concatenate(nod)
        local = np.empty(skeleton.nodes.shape[0], dtype=np.intp)
        local[nodes] = np.arange(len(nodes))
        ends = local[skeleton.panels[panels]]
        ends = np.where(signs[:, None] > 0, ends, ends[:, ::-1])
        meshes.append(
            BoundaryMesh(
                subdomain=j,
                panels=panels,
                signs=signs,
                nodes=nodes,
                local_panels=ends,
                node_curve=np.concatenate(curve),
                interfaces=ifaces,
            )
        )
    return meshes


# -------------------------------------------------------------- presets


def square(half_width, center=(0.0, 0.0)):
    cx, cy = center
    w = half_width
    return [[cx - w, cy - w], [cx + w, cy - w], [cx + w, cy + w], [cx - w, cy + w]]


def fig1_config(kappas=(1.0, 1.0, 1.0)):
    """Square of side 2 containing a concentric circle of radius 0.5."""
    return {
        "name": "fig1-circle-in-square",
        "subdomains": [{"kappa": k} for k in kappas],
        "curves": [
            {"kind": "polygon", "vertices": square(1.0), "between": [0, 1]},
            {"kind": "circle", "center": [0.0, 0.0], "radius": 0.5, "between": [1, 2]},
        ],
    }


def two_domain_circle_config(kappas=(1.0, 1.0), radius=1.0):
    return {
        "name": "two-domain-circle",
        "subdomains": [{"kappa": k} for k in kappas],
        "curves": [
            {"kind": "circle", "center": [0.0, 0.0], "radius": radius, "between": [0, 1]}
        ],
    }


def gap_config(delta, kappas=(1.0, 1.0, 1.0)):
    """Two rectangles ``[-1,-delta/2]x[-0.5,0.5]`` and its mirror image."""
    if not delta > 0:
        raise GeometryError(
            f"gap width delta={delta} must be positive: a closed gap creates "
            "junction points, which the no-junction hypothesis excludes"
        )
    g = 0.5 * delta
    left = [[-1.0, -0.5], [-g, -0.5], [-g, 0.5], [-1.0, 0.5]]
    right = [[g, -0.5], [1.0, -0.5], [1.0, 0.5], [g, 0.5]]
    return {
        "name": f"gap({delta:g})",
        "subdomains": [{"kappa": k} for k in kappas],
        "curves": [
            {"kind": "polygon", "vertices": left, "between": [0, 1]},
            {"kind": "polygon", "vertices": right, "between": [0, 2]},
        ],
    }
