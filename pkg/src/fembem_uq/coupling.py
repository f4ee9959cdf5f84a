"""Block FEM-BEM system for one boundary sample and one level.

Unknowns are the nodal values of the harmonic correction on B, the Neumann
data on Sigma and the Neumann data on Gamma (both piecewise constant):

    [ A + W_SS     K_SS^T - B_S^T   K_SG^T ] [u      ]   [ -W_GS       ]
    [ B_S - K_SS   V_SS             V_GS   ] [sigma_S] = [  K_GS       ] G_G^-1 g
    [ -K_SG        V_SG             V_GG   ] [sigma_G]   [  K_GG - B_G ]

``X_PQ`` has trial space on P and test space on Q (S = Sigma, G = Gamma).
Solves eliminate the interior FE unknowns with a cached sparse factorization,
then factor the remaining dense boundary system with partial pivoting.
"""

import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import bem
from .fem import FeFunction, assemble_stiffness, dirichlet_data, element_quadrature, newton_potential
from .geometry import DEFAULT_PERTURBATION, PerturbationSpec
from .mesh import BoundaryMesh, build_gamma_mesh, build_sigma_mesh, disk_mesh

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-10


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class SigmaBlocks:
    """Sample-independent blocks of one level, shared read-only by all solves."""

    level: int
    A: sp.csr_matrix
    boundary: np.ndarray
    interior: np.ndarray
    interior_lu: object
    schur: np.ndarray
    sigma: BoundaryMesh
    V_SS: np.ndarray
    K_SS: np.ndarray
    W_SS: np.ndarray
    B_S: np.ndarray


def _build_sigma_blocks(level: int, order_scale: int = 1) -> SigmaBlocks:
    mesh = disk_mesh(level)
    A = assemble_stiffness(mesh, element_quadrature(level)).tocsr()
    boundary = mesh.boundary_loop
    interior = np.setdiff1d(np.arange(mesh.n_vertices), boundary)
    A_II = A[interior][:, interior].tocsc()
    A_Ib = A[interior][:, boundary].toarray()
    A_bb = A[boundary][:, boundary].toarray()
    lu = spla.splu(A_II)
    schur = A_bb - A_Ib.T @ lu.solve(A_Ib)
    sigma = build_sigma_mesh(mesh)
    ops = bem.assemble_layer_matrices(sigma, sigma, order_scale)
    return SigmaBlocks(
        level=level,
        A=A,
        boundary=boundary,
        interior=interior,
        interior_lu=lu,
        schur=0.5 * (schur + schur.T),
        sigma=sigma,
        V_SS=ops.V,
        K_SS=ops.K,
        W_SS=ops.W,
        B_S=bem.assemble_mass_B(sigma),
    )


@lru_cache(maxsize=None)
def sigma_blocks(level: int, order_scale: int = 1) -> SigmaBlocks:
    """Cached :class:`SigmaBlocks` for ``level``."""
    logger.debug("assembling Sigma blocks at level %d", level)
    return _build_sigma_blocks(level, order_scale)


@dataclass
class BlockSystem:
    """The 3x3 block system; the FE block is kept sparse.

    ``blocks`` holds ``A`` (sparse, all vertices) and the dense boundary
    blocks ``W_SS, K_SS, B_S, V_SS, V_GS, V_SG, K_SG, V_GG``. Sigma linear DoF
    ``j`` is FE vertex ``boundary[j]``.
    """

    level: int
    sigma: SigmaBlocks
    gamma: BoundaryMesh
    blocks: dict
    rhs_parts: tuple
    projected_data: np.ndarray
    n_fe: int
    n_sigma: int
    n_gamma: int
    extra: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.n_fe + self.n_sigma + self.n_gamma

    @property
    def rhs(self) -> np.ndarray:
        r1 = np.zeros(self.n_fe)
        r1[self.sigma.boundary] = self.rhs_parts[0]
        return np.concatenate([r1, self.rhs_parts[1], self.rhs_parts[2]])

    def fe_block(self) -> sp.csr_matrix:
        """``A + W_SS`` with ``W_SS`` embedded at the boundary vertices."""
        b = self.sigma.boundary
        n = self.n_fe
        P = sp.csr_matrix((np.ones(b.size), (b, np.arange(b.size))), shape=(n, b.size))
        return (self.blocks["A"] + P @ sp.csr_matrix(self.blocks["W_SS"]) @ P.T).tocsr()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        blk, b = self.blocks, self.sigma.boundary
        u = x[: self.n_fe]
        s = x[self.n_fe : self.n_fe + self.n_sigma]
        t = x[self.n_fe + self.n_sigma :]
        ub = u[b]
        r1 = blk["A"] @ u
        r1[b] += blk["W_SS"] @ ub + (blk["K_SS"].T - blk["B_S"].T) @ s + blk["K_SG"].T @ t
        r2 = (blk["B_S"] - blk["K_SS"]) @ ub + blk["V_SS"] @ s + blk["V_GS"] @ t
        r3 = -blk["K_SG"] @ ub + blk["V_SG"] @ s + blk["V_GG"] @ t
        return np.concatenate([r1, r2, r3])

    def dense(self) -> np.ndarray:
        """Full dense matrix; only sensible at coarse levels."""
        blk, b = self.blocks, self.sigma.boundary
        nf, ns = self.n_fe, self.n_sigma
        M = np.zeros((self.size, self.size))
        M[:nf, :nf] = self.fe_block().toarray()
        M[b, nf : nf + ns] = blk["K_SS"].T - blk["B_S"].T
        M[b, nf + ns :] = blk["K_SG"].T
        M[nf : nf + ns, b] = blk["B_S"] - blk["K_SS"]
        M[nf : nf + ns, nf : nf + ns] = blk["V_SS"]
        M[nf : nf + ns, nf + ns :] = blk["V_GS"]
        M[nf + ns :, b] = -blk["K_SG"]
        M[nf + ns :, nf : nf + ns] = blk["V_SG"]
        M[nf + ns :, nf + ns :] = blk["V_GG"]
        return M


@dataclass
class CoupledSolution:
    u_tilde: FeFunction
    sigma_sigma: np.ndarray
    sigma_gamma: np.ndarray
    residual: float


def assemble_system(
    y=None,
    level: int = 1,
    *,
    gamma: BoundaryMesh | None = None,
    dirichlet=dirichlet_data,
    spec: PerturbationSpec = DEFAULT_PERTURBATION,
    order_scale: int = 1,
) -> BlockSystem:
    """Assemble the block system for sample ``y`` (or a prebuilt ``gamma`` mesh).

    ``dirichlet(points)`` gives the reduced Dirichlet data on Gamma; by
    default minus the Newton potential.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    if gamma is None:
        if y is None:
            raise ValueError("either a sample or a gamma mesh is required")
        gamma = build_gamma_mesh(y, level, spec=spec)
    S = sigma_blocks(level, order_scale)
    sigma = S.sigma
    gg = bem.assemble_layer_matrices(gamma, gamma, order_scale)
    gs = bem.assemble_layer_matrices(gamma, sigma, order_scale, reverse=True)

    G_G = bem.assemble_mass_G(gamma)
    B_G = bem.assemble_mass_B(gamma)
    g = bem.assemble_load(gamma, dirichlet)
    projected = scipy.linalg.solve(G_G, g, assume_a="pos")

    blocks = {
        "A": S.A,
        "W_SS": S.W_SS,
        "K_SS": S.K_SS,
        "B_S": S.B_S,
        "V_SS": S.V_SS,
        "V_GS": gs.V,
        "V_SG": gs.V.T.copy(),
        "K_SG": gs.K_reverse,
        "V_GG": gg.V,
    }
    rhs_parts = (
        -gs.W @ projected,
        gs.K @ projected,
        (gg.K - B_G) @ projected,
    )
    return BlockSystem(
        level=level,
        sigma=S,
        gamma=gamma,
        blocks=blocks,
        rhs_parts=rhs_parts,
        projected_data=projected,
        n_fe=S.A.shape[0],
        n_sigma=sigma.n_panels,
        n_gamma=gamma.n_panels,
        extra={"W_GS": gs.W, "K_GS": gs.K, "K_GG": gg.K, "B_G": B_G, "G_G": G_G, "g": g},
    )


def solve(system: BlockSystem) -> CoupledSolution:
    """Direct solve; raises :class:`SingularSystemError` on breakdown."""
    S, blk = system.sigma, system.blocks
    nb, ns, ng = S.boundary.size, system.n_sigma, system.n_gamma
    M = np.empty((nb + ns + ng, nb + ns + ng))
    M[:nb, :nb] = S.schur + blk["W_SS"]
    M[:nb, nb : nb + ns] = blk["K_SS"].T - blk["B_S"].T
    M[:nb, nb + ns :] = blk["K_SG"].T
    M[nb : nb + ns, :nb] = blk["B_S"] - blk["K_SS"]
    M[nb : nb + ns, nb : nb + ns] = blk["V_SS"]
    M[nb : nb + ns, nb + ns :] = blk["V_GS"]
    M[nb + ns :, :nb] = -blk["K_SG"]
    M[nb + ns :, nb : nb + ns] = blk["V_SG"]
    M[nb + ns :, nb + ns :] = blk["V_GG"]
    rhs = np.concatenate(system.rhs_parts)

    n_fe = system.n_fe
    if not np.any(rhs):
        x = np.zeros(system.size)
        return CoupledSolution(FeFunction(system.level, x[:n_fe]), x[n_fe : n_fe + ns], x[n_fe + ns :], 0.0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    except (ValueError, np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise SingularSystemError(str(exc)) from exc
    if np.any(np.diag(lu) == 0.0):
        raise SingularSystemError("singular system: zero pivot")
    z = scipy.linalg.lu_solve((lu, piv), rhs)

    u = np.empty(n_fe)
    ub = z[:nb]
    u[S.boundary] = ub
    A_Ib = S.A[S.interior][:, S.boundary]
    u[S.interior] = -S.interior_lu.solve(A_Ib @ ub)
    x = np.concatenate([u, z[nb:]])

    full_rhs = system.rhs
    residual = float(np.linalg.norm(system.matvec(x) - full_rhs) / np.linalg.norm(full_rhs))
    if not residual <= RESIDUAL_TOLERANCE:
        raise SingularSystemError(f"residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE}")
    return CoupledSolution(
        u_tilde=FeFunction(system.level, u),
        sigma_sigma=x[n_fe : n_fe + ns],
        sigma_gamma=x[n_fe + ns :],
        residual=residual,
    )


def solve_sample(
    y, level: int, *, spec: PerturbationSpec = DEFAULT_PERTURBATION, gamma=None
) -> FeFunction:
    """``u_h = I_h N_f + u_tilde_h`` on B for one boundary sample."""
    sol = solve(assemble_system(y, level, gamma=gamma, spec=spec))
    return FeFunction.interpolate(level, newton_potential) + sol.u_tilde
