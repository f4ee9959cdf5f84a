"""Curved-triangle meshes of the disk B and panel meshes of closed curves."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import SIGMA_RADIUS, Circle, Curve, RadialCurve
from .quadrature import composite_gauss01, gauss01

COARSE_TRIANGLES = 14
COARSE_BOUNDARY_EDGES = 8
COARSE_VERTICES = 12
COARSE_EDGES = 25


@dataclass(frozen=True)
class DiskMesh:
    """Conforming triangulation of the disk of radius ``radius``.

    ``triangles[t] = (i, j, k)`` is positively oriented. For curved triangles
    (``curved[t]``) the edge ``(i, j)`` lies on the circle and ``arc[t]`` holds
    its polar angles ``(theta_i, theta_j)`` with ``theta_j > theta_i``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    curved: np.ndarray
    arc: np.ndarray
    boundary_loop: np.ndarray
    boundary_angles: np.ndarray
    level: int = 0
    radius: float = SIGMA_RADIUS

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_multiplicity(self) -> dict:
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        keys, counts = np.unique(e, axis=0, return_counts=True)
        return {tuple(k): int(c) for k, c in zip(keys, counts)}

    def dump(self, path) -> None:
        """Write ``v x y`` and ``t i j k [curved-edge-index]`` lines."""
        with open(path, "w") as fh:
            for x, y in self.vertices:
                fh.write(f"v {x:.17g} {y:.17g}\n")
            for (i, j, k), c in zip(self.triangles, self.curved):
                fh.write(f"t {i} {j} {k}" + (" 0\n" if c else "\n"))


def build_coarse_disk_mesh(radius: float = SIGMA_RADIUS) -> DiskMesh:
    """Level-0 mesh: inner square of 2 triangles plus a ring of 12 triangles."""
    inner_angles = np.pi / 4 + np.arange(4) * np.pi / 2
    outer_angles = np.arange(8) * np.pi / 4
    inner = 0.5 * radius * np.column_stack([np.cos(inner_angles), np.sin(inner_angles)])
    outer = radius * np.column_stack([np.cos(outer_angles), np.sin(outer_angles)])
    vertices = np.vstack([inner, outer])

    def o(j):
        return 4 + j % 8

    tris, curved, arc = [[0, 1, 2], [0, 2, 3]], [False, False], [[np.nan, np.nan]] * 2
    for j in range(4):
        for m in (2 * j, 2 * j + 1):
            tris.append([o(m), o(m + 1), j])
            curved.append(True)
            arc.append([outer_angles[m], outer_angles[m] + np.pi / 4])
        tris.append([j, o(2 * j + 2), (j + 1) % 4])
        curved.append(False)
        arc.append([np.nan, np.nan])

    return DiskMesh(
        vertices=vertices,
        triangles=np.array(tris, dtype=np.int64),
        curved=np.array(curved),
        arc=np.array(arc, dtype=float),
        boundary_loop=np.arange(4, 12),
        boundary_angles=outer_angles.copy(),
        level=0,
        radius=radius,
    )


def refine(mesh: DiskMesh) -> DiskMesh:
    """Split every triangle into four; midpoints of arcs stay on the circle."""
    verts = list(map(tuple, mesh.vertices))
    midpoint: dict = {}

    def mid(i, j, theta=None):
        key = (min(i, j), max(i, j))
        if key not in midpoint:
            if theta is None:
                p = 0.5 * (mesh.vertices[i] + mesh.vertices[j])
            else:
                p = mesh.radius * np.array([np.cos(theta), np.sin(theta)])
            midpoint[key] = len(verts)
            verts.append(tuple(p))
        return midpoint[key]

    tris, curved, arc = [], [], []
    for (a, b, c), is_curved, (t0, t1) in zip(mesh.triangles, mesh.curved, mesh.arc):
        if is_curved:
            tm = 0.5 * (t0 + t1)
            ab = mid(a, b, tm)
        else:
            ab = mid(a, b)
        bc, ca = mid(b, c), mid(c, a)
        tris += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
        if is_curved:
            curved += [True, True, False, False]
            arc += [[t0, tm], [tm, t1], [np.nan] * 2, [np.nan] * 2]
        else:
            curved += [False] * 4
            arc += [[np.nan] * 2] * 4

    loop = mesh.boundary_loop
    n = len(loop)
    new_loop, new_angles = [], []
    for j in range(n):
        a, b = loop[j], loop[(j + 1) % n]
        new_loop += [a, midpoint[(min(a, b), max(a, b))]]
        t0 = mesh.boundary_angles[j]
        new_angles += [t0, t0 + np.pi / n]

    return DiskMesh(
        vertices=np.array(verts),
        triangles=np.array(tris, dtype=np.int64),
        curved=np.array(curved),
        arc=np.array(arc, dtype=float),
        boundary_loop=np.array(new_loop, dtype=np.int64),
        boundary_angles=np.array(new_angles),
        level=mesh.level + 1,
        radius=mesh.radius,
    )


@lru_cache(maxsize=None)
def disk_mesh(level: int) -> DiskMesh:
    """Cached level-``level`` mesh of B."""
    if level < 0:
        raise ValueError("level must be non-negative")
    if level == 0:
        return build_coarse_disk_mesh()
    return refine(disk_mesh(level - 1))


def dof_counts(level: int) -> tuple[int, int]:
    """FE vertex count and BE piecewise-constant count (Sigma + Gamma) at ``level``.

    Uses the recurrences of uniform refinement, so no mesh is built.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    v, e, f = COARSE_VERTICES, COARSE_EDGES, COARSE_TRIANGLES
    for _ in range(level):
        v, e, f = v + e, 2 * e + 3 * f, 4 * f
    panels = COARSE_BOUNDARY_EDGES * 2**level
    return v, 2 * panels


@dataclass
class BoundaryMesh:
    """Panels ``[tau_j, tau_{j+1}]`` of a closed curve.

    Piecewise-constant DoF ``j`` lives on panel ``j``; piecewise-linear DoF
    ``j`` is the hat centred at ``tau_j`` (linear in the curve parameter).
    ``normal_sign`` is +1 for the outward normal (right of the counterclockwise
    tangent) and -1 for the inward one.
    """

    curve: Curve
    breakpoints: np.ndarray
    normal_sign: int
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 4 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be increasing with at least 3 panels")
        if not np.isclose(bp[-1] - bp[0], 2 * np.pi, rtol=0, atol=1e-12):
            raise ValueError("breakpoints must span one period")
        self.breakpoints = bp

    @property
    def n_panels(self) -> int:
        return self.breakpoints.size - 1

    @property
    def n_const(self) -> int:
        return self.n_panels

    @property
    def n_linear(self) -> int:
        return self.n_panels

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def params(self, panels, u) -> np.ndarray:
        """Curve parameter of local coordinate ``u`` on ``panels``."""
        return self.breakpoints[panels] + self.widths[panels] * u

    def geometry(self, panels, u):
        """Points, unit normals and Jacobians ``|gamma'| * width`` at ``u``."""
        panels = np.asarray(panels)
        tau = self.params(panels, u)
        if isinstance(self.curve, RadialCurve):
            pts, d = self.curve.point_and_derivative(tau)
        else:
            pts, d = self.curve.point(tau), self.curve.derivative(tau)
        speed = np.hypot(d[..., 0], d[..., 1])
        normals = self.normal_sign * np.stack([d[..., 1], -d[..., 0]], axis=-1) / speed[..., None]
        return pts, normals, speed * self.widths[panels]

    def nodes(self, order: int, pieces: int = 1):
        """Cached per-panel quadrature data for a (composite) Gauss rule.

        Returns ``(u, w, pts, normals, jac)`` with shapes ``(q,)``, ``(q,)``,
        ``(n, q, 2)``, ``(n, q, 2)``, ``(n, q)``.
        """
        key = (order, pieces)
        if key not in self._cache:
            u, w = composite_gauss01(order, pieces) if pieces > 1 else gauss01(order)
            panels = np.arange(self.n_panels)[:, None]
            pts, nrm, jac = self.geometry(panels, u[None, :])
            self._cache[key] = (u, w, pts, nrm, jac)
        return self._cache[key]

    def panel_lengths(self) -> np.ndarray:
        u, w, _, _, jac = self.nodes(16)
        return jac @ w

    def panel_centers(self) -> np.ndarray:
        pts, _, _ = self.geometry(np.arange(self.n_panels), 0.5)
        return pts

    def vertex_points(self) -> np.ndarray:
        return self.curve.point(self.breakpoints[:-1])


def build_sigma_mesh(mesh: DiskMesh) -> BoundaryMesh:
    """Boundary mesh of Sigma induced by the disk mesh; normals leave B.

    Linear DoF ``j`` corresponds to FE vertex ``mesh.boundary_loop[j]``.
    """
    bp = np.append(mesh.boundary_angles, mesh.boundary_angles[0] + 2 * np.pi)
    return BoundaryMesh(Circle(mesh.radius), bp, normal_sign=+1, name="sigma")


def uniform_breakpoints(level: int) -> np.ndarray:
    n = COARSE_BOUNDARY_EDGES * 2**level
    return 2 * np.pi * np.arange(n + 1) / n


def build_gamma_mesh(y, level: int, ellipse=None, spec=None) -> BoundaryMesh:
    """Panel mesh of the sampled boundary with normals pointing into D."""
    kwargs = {}
    if ellipse is not None:
        kwargs["ellipse"] = ellipse
    if spec is not None:
        kwargs["spec"] = spec
    curve = RadialCurve(y, **kwargs)
    curve.check_clearance()
    return BoundaryMesh(curve, uniform_breakpoints(level), normal_sign=-1, name="gamma")


def build_curve_mesh(curve: Curve, level: int, normal_sign: int = -1) -> BoundaryMesh:
    """Panel mesh of an arbitrary closed curve (e.g. a synthetic circle)."""
    return BoundaryMesh(curve, uniform_breakpoints(level), normal_sign=normal_sign, name="gamma")
