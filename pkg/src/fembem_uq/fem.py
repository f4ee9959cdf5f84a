"""P1 finite elements on the curved disk mesh.

Curved elements use a blended map: the affine map plus a correction
``(1 - eta) * d(xi / (1 - eta))`` where ``d`` is the deviation of the circular
arc from its chord. Basis functions are barycentric coordinates pulled back
through this map, so their traces on Sigma are linear in the polar angle.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .mesh import DiskMesh, disk_mesh
from .quadrature import triangle_rule

_REF_GRAD = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class ElementQuadrature:
    """Mapped quadrature data for every element of a mesh.

    Shapes: ``points (T, Q, 2)``, ``weights (T, Q)`` (including |det J|),
    ``basis (Q, 3)``, ``grads (T, Q, 3, 2)``.
    """

    points: np.ndarray
    weights: np.ndarray
    basis: np.ndarray
    grads: np.ndarray


def element_map(mesh: DiskMesh, xi: np.ndarray, eta: np.ndarray):
    """Physical points and Jacobians at reference points (xi, eta) of every element.

    Returns ``x (T, Q, 2)`` and ``J (T, Q, 2, 2)`` with ``J[..., :, 0] = dx/dxi``.
    """
    p = mesh.vertices[mesh.triangles]  # (T, 3, 2)
    p0, p1, p2 = p[:, 0, None, :], p[:, 1, None, :], p[:, 2, None, :]
    xi_, eta_ = xi[None, :, None], eta[None, :, None]
    x = p0 + (p1 - p0) * xi_ + (p2 - p0) * eta_
    dxi = np.broadcast_to(p1 - p0, x.shape).copy()
    deta = np.broadcast_to(p2 - p0, x.shape).copy()

    c = np.flatnonzero(mesh.curved)
    if c.size:
        t0, t1 = mesh.arc[c, 0, None], mesh.arc[c, 1, None]
        s = xi[None, :] / (1.0 - eta[None, :])
        theta = t0 + s * (t1 - t0)
        arc_pt = mesh.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        arc_d = (mesh.radius * (t1 - t0))[..., None] * np.stack(
            [-np.sin(theta), np.cos(theta)], axis=-1
        )
        a, b = p0[c], p1[c]
        chord = b - a
        dev = arc_pt - (a + s[..., None] * chord)
        ddev = arc_d - chord
        x[c] += (1.0 - eta[None, :, None]) * dev
        dxi[c] += ddev
        deta[c] += -dev + s[..., None] * ddev
    jac = np.stack([dxi, deta], axis=-1)
    return x, jac


@lru_cache(maxsize=None)
def element_quadrature(level: int) -> ElementQuadrature:
    return quadrature_for(disk_mesh(level))


def quadrature_for(mesh: DiskMesh) -> ElementQuadrature:
    ref, w = triangle_rule()
    x, jac = element_map(mesh, ref[:, 0], ref[:, 1])
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    if np.any(det <= 0):
        raise ValueError("element map is not orientation preserving")
    inv_t = np.empty_like(jac)  # J^{-T}
    inv_t[..., 0, 0] = jac[..., 1, 1] / det
    inv_t[..., 0, 1] = -jac[..., 1, 0] / det
    inv_t[..., 1, 0] = -jac[..., 0, 1] / det
    inv_t[..., 1, 1] = jac[..., 0, 0] / det
    grads = np.einsum("tqij,aj->tqai", inv_t, _REF_GRAD)
    basis = np.column_stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])
    return ElementQuadrature(x, det * w[None, :], basis, grads)


def _scatter(mesh: DiskMesh, local: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def assemble_stiffness(mesh: DiskMesh, quad: ElementQuadrature | None = None) -> sp.csr_matrix:
    """Stiffness matrix ``A[k, k'] = int_B grad phi_k' . grad phi_k``."""
    q = quad or quadrature_for(mesh)
    local = np.einsum("tq,tqai,tqbi->tab", q.weights, q.grads, q.grads)
    local = 0.5 * (local + local.transpose(0, 2, 1))
    return _scatter(mesh, local)


def assemble_mass(mesh: DiskMesh, quad: ElementQuadrature | None = None) -> sp.csr_matrix:
    q = quad or quadrature_for(mesh)
    local = np.einsum("tq,qa,qb->tab", q.weights, q.basis, q.basis)
    return _scatter(mesh, local)


def assemble_load(mesh: DiskMesh, source, quad: ElementQuadrature | None = None) -> np.ndarray:
    """Load vector ``int_B f phi_k`` for a vectorized source ``f(points)``."""
    q = quad or quadrature_for(mesh)
    vals = source(q.points) * q.weights
    local = vals @ q.basis
    return np.bincount(mesh.triangles.ravel(), local.ravel(), minlength=mesh.n_vertices)


def mesh_area(mesh: DiskMesh) -> float:
    return float(np.sum(quadrature_for(mesh).weights))


def newton_potential(x):
    """Closed-form Newton potential ``-(x1^2 + x2^2) / 4`` for ``f = 1``."""
    x = np.asarray(x, dtype=float)
    return -(x[..., 0] ** 2 + x[..., 1] ** 2) / 4.0


def newton_gradient(x):
    return -0.5 * np.asarray(x, dtype=float)


def dirichlet_data(points):
    """Reduced Dirichlet data ``g - N_f`` with ``g = 0``."""
    return -newton_potential(points)


@dataclass
class FeFunction:
    """Nodal P1 coefficients on the level-``level`` disk mesh."""

    level: int
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        n = disk_mesh(self.level).n_vertices
        if self.coefficients.shape != (n,):
            raise ValueError(f"expected {n} coefficients, got {self.coefficients.shape}")

    @property
    def mesh(self) -> DiskMesh:
        return disk_mesh(self.level)

    @classmethod
    def interpolate(cls, level: int, func) -> "FeFunction":
        return cls(level, func(disk_mesh(level).vertices))

    def values_at_quadrature(self) -> np.ndarray:
        q = element_quadrature(self.level)
        return self.coefficients[self.mesh.triangles] @ q.basis.T

    def gradients_at_quadrature(self) -> np.ndarray:
        q = element_quadrature(self.level)
        return np.einsum("ta,tqai->tqi", self.coefficients[self.mesh.triangles], q.grads)

    def __add__(self, other: "FeFunction") -> "FeFunction":
        if other.level != self.level:
            raise ValueError("level mismatch")
        return FeFunction(self.level, self.coefficients + other.coefficients)


def zero_function(points):
    return np.zeros(points.shape[:-1])


def evaluate_qoi(u: FeFunction, u_bar=zero_function) -> float:
    """L2-tracking functional ``1/2 int_B |u - u_bar|^2``."""
    q = element_quadrature(u.level)
    diff = u.values_at_quadrature() - u_bar(q.points)
    return 0.5 * float(np.sum(q.weights * diff**2))


def integrate(u: FeFunction) -> float:
    """``int_B u``; a functional linear in ``u``."""
    q = element_quadrature(u.level)
    return float(np.sum(q.weights * u.values_at_quadrature()))


def error_norms(u: FeFunction, reference) -> tuple[float, float]:
    """L2 and full H1 norms of ``u - reference`` on B.

    ``reference(points)`` returns ``(values, gradients)`` for points of shape
    ``(..., 2)``.
    """
    q = element_quadrature(u.level)
    val, grad = reference(q.points)
    dv = u.values_at_quadrature() - val
    dg = u.gradients_at_quadrature() - grad
    l2sq = float(np.sum(q.weights * dv**2))
    semi = float(np.sum(q.weights * np.sum(dg**2, axis=-1)))
    return np.sqrt(l2sq), np.sqrt(l2sq + semi)
