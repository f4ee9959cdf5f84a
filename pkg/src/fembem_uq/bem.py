"""Galerkin layer operators of the 2D Laplacian on panel meshes.

Conventions: matrices are indexed ``[test, trial]``. The single layer ``V``
pairs piecewise constants; the double layer ``K`` maps piecewise-linear trial
functions to piecewise-constant tests; the hypersingular ``W`` pairs
piecewise-linear functions and is assembled with the Maue identity
``<W u, v> = <V du/dt, dv/dt>``.

Panel pairs are integrated according to their separation: identical and
adjacent panels by log-singularity subtraction in transformed coordinates,
close pairs by composite Gauss rules, well separated pairs by low-order
tensor Gauss rules.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .mesh import BoundaryMesh
from .quadrature import SingularPairRule, adjacent_panel_rule, identical_panel_rule

INV_2PI = 1.0 / (2.0 * np.pi)

# separation ratio = centre distance / longer panel length
FAR_RATIO = 8.0
MID_RATIO = 3.0
FAR_ORDER = 6
MID_ORDER = 10
NEAR_ORDER = 16
MAX_PIECES = 16


def quadrature_orders(width: float) -> dict:
    """Gauss orders for panels of parameter width ``width``.

    Wide panels resolve several oscillations of the boundary perturbation and
    need more points in every class.
    """
    if width > np.pi / 8:
        return dict(far=FAR_ORDER + 8, mid=MID_ORDER + 8, near=NEAR_ORDER + 8, singular=24)
    if width > np.pi / 32:
        return dict(far=FAR_ORDER, mid=MID_ORDER, near=NEAR_ORDER, singular=16)
    return dict(far=FAR_ORDER, mid=MID_ORDER, near=NEAR_ORDER, singular=10)


class CoincidentPointsError(ValueError):
    pass


def fundamental_solution(x, z):
    """``-(1 / 2 pi) log |x - z|``."""
    d = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0):
        raise CoincidentPointsError("coincident points")
    return -INV_2PI * np.log(r)


@dataclass
class LayerMatrices:
    """Galerkin matrices for one (trial, test) mesh pair.

    ``V`` (test panels x trial panels), ``K`` (test panels x trial vertices),
    ``W`` (test vertices x trial vertices). ``K_reverse`` holds the double
    layer with the roles of the meshes swapped (test on ``trial``).
    """

    V: np.ndarray
    K: np.ndarray
    W: np.ndarray
    K_reverse: np.ndarray | None = None


_LOCAL_NAMES = ("V", "Vu", "Kf0", "Kf1", "Kr0", "Kr1")


def _kernel_sums(x, nx, jx, u, z, nz, jz, v, w, rho=None):
    """Local integrals of one batch of panel pairs, summed over the last axis.

    ``x, z`` (P, M, 2) points, ``nx, nz`` normals, ``jx, jz`` (P, M) Jacobians,
    ``u, v`` local coordinates, ``w`` weights. With ``rho`` the single layer
    omits the ``-(1/2pi) log(rho)`` part, which the caller adds.
    """
    d = x - z
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    logr = 0.5 * np.log(r2)
    if rho is not None:
        logr = logr - np.log(rho)
    G = -INV_2PI * logr
    base = w * jx * jz
    kz = base * INV_2PI * (d[..., 0] * nz[..., 0] + d[..., 1] * nz[..., 1]) / r2
    kx = -base * INV_2PI * (d[..., 0] * nx[..., 0] + d[..., 1] * nx[..., 1]) / r2
    return {
        "V": np.sum(base * G, axis=-1),
        "Vu": np.sum(w * G, axis=-1),
        "Kf0": np.sum(kz * (1.0 - v), axis=-1),
        "Kf1": np.sum(kz * v, axis=-1),
        "Kr0": np.sum(kx * (1.0 - u), axis=-1),
        "Kr1": np.sum(kx * u, axis=-1),
    }


@numba.njit(cache=True, nogil=True)
def _dense_kernel(xp, xn, xj, zp, zn, zj, u, w, out):  # pragma: no cover - compiled
    n, q = xj.shape
    m = zj.shape[0]
    for i in range(n):
        for j in range(m):
            V = Vu = kf0 = kf1 = kr0 = kr1 = 0.0
            for a in range(q):
                x0, x1 = xp[i, a, 0], xp[i, a, 1]
                nx0, nx1 = xn[i, a, 0], xn[i, a, 1]
                wa = w[a]
                wxa = wa * xj[i, a]
                for b in range(q):
                    d0 = x0 - zp[j, b, 0]
                    d1 = x1 - zp[j, b, 1]
                    r2 = d0 * d0 + d1 * d1
                    if r2 == 0.0:
                        continue  # coincident nodes: pair is overwritten later
                    g = np.log(r2)
                    wb = w[b]
                    base = wxa * wb * zj[j, b]
                    V += base * g
                    Vu += wa * wb * g
                    kz = base * (d0 * zn[j, b, 0] + d1 * zn[j, b, 1]) / r2
                    kf0 += kz * (1.0 - u[b])
                    kf1 += kz * u[b]
                    kx = base * (d0 * nx0 + d1 * nx1) / r2
                    kr0 += kx * (1.0 - u[a])
                    kr1 += kx * u[a]
            out[0, i, j] = -0.5 * V
            out[1, i, j] = -0.5 * Vu
            out[2, i, j] = kf0
            out[3, i, j] = kf1
            out[4, i, j] = -kr0
            out[5, i, j] = -kr1


def _dense_locals(test, trial, order):
    """Tensor Gauss rule of ``order`` applied to every panel pair."""
    u, w, xp, xn, xj = test.nodes(order)
    _, _, zp, zn, zj = trial.nodes(order)
    out = np.empty((6, test.n_panels, trial.n_panels))
    _dense_kernel(xp, xn, xj, zp, zn, zj, u, w, out)
    out *= INV_2PI
    return dict(zip(_LOCAL_NAMES, out))


def _gathered_locals(test, trial, I, J, order, pieces):
    """Tensor (composite) Gauss rule on the pairs ``(I[p], J[p])``."""
    u, wu, xp, xn, xj = test.nodes(order, pieces)
    v, wv, zp, zn, zj = trial.nodes(order, pieces)
    q = u.size
    w = (wu[:, None] * wv[None, :]).ravel()
    uu, vv = np.repeat(u, q), np.tile(v, q)
    P = I.size

    def expand(a, first):
        a = a[:, :, None] if first else a[:, None, :]
        shape = (P, q, q) + a.shape[3:]
        return np.broadcast_to(a, shape).reshape((P, q * q) + a.shape[3:])

    return _kernel_sums(
        expand(xp[I], True), expand(xn[I], True), expand(xj[I], True), uu,
        expand(zp[J], False), expand(zn[J], False), expand(zj[J], False), vv, w,
    )


def _rule_geometry(mesh: BoundaryMesh, rule: SingularPairRule, key):
    """Per-panel geometry at every local coordinate used by ``rule`` (cached)."""
    cache_key = ("singular",) + key
    if cache_key not in mesh._cache:
        coords = np.concatenate([rule.u, rule.v, rule.lu, rule.lv])
        uniq, inv = np.unique(coords, return_inverse=True)
        sizes = np.cumsum([0, rule.u.size, rule.v.size, rule.lu.size, rule.lv.size])
        index = [inv[sizes[k] : sizes[k + 1]] for k in range(4)]
        geo = mesh.geometry(np.arange(mesh.n_panels)[:, None], uniq[None, :])
        mesh._cache[cache_key] = (geo, index)
    return mesh._cache[cache_key]


def _singular_locals(mesh, I, J, rule: SingularPairRule, key):
    """Identical or adjacent panel pairs on one mesh."""
    (pts, nrm, jac), (iu, iv, ilu, ilv) = _rule_geometry(mesh, rule, key)
    out = _kernel_sums(
        pts[I][:, iu], nrm[I][:, iu], jac[I][:, iu], rule.u,
        pts[J][:, iv], nrm[J][:, iv], jac[J][:, iv], rule.v,
        rule.w, rho=rule.rho,
    )
    out["V"] = out["V"] - INV_2PI * np.sum(rule.lw * jac[I][:, ilu] * jac[J][:, ilv], axis=-1)
    out["Vu"] = out["Vu"] - INV_2PI * np.sum(rule.lw)
    return out


def _min_distances(test, trial, I, J):
    _, _, xp, _, _ = test.nodes(8)
    _, _, zp, _, _ = trial.nodes(8)
    d = xp[I][:, :, None, :] - zp[J][:, None, :, :]
    return np.sqrt(np.min(np.sum(d**2, axis=-1), axis=(1, 2)))


def assemble_layer_matrices(
    trial: BoundaryMesh, test: BoundaryMesh, order_scale: int = 1, reverse: bool = False
) -> LayerMatrices:
    """Single, double and hypersingular Galerkin matrices for a mesh pair.

    ``order_scale`` multiplies every Gauss order (used for saturation checks).
    ``trial is test`` selects the singular treatment of coincident panels.
    """
    same = trial is test
    n, m = test.n_panels, trial.n_panels
    width = float(max(np.max(test.widths), np.max(trial.widths)))
    orders = {k: v * order_scale for k, v in quadrature_orders(width).items()}
    loc = _dense_locals(test, trial, orders["far"])

    def put(I, J, values):
        for k in _LOCAL_NAMES:
            loc[k][I, J] = values[k]

    I, J = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    I, J = I.ravel(), J.ravel()
    regular = np.ones(I.size, dtype=bool)
    if same:
        shift = (J - I) % n
        order = orders["singular"]
        for mask, rule, key in (
            (shift == 0, identical_panel_rule(order), ("same", order)),
            (shift == 1, adjacent_panel_rule(order, True), ("next", order)),
            (shift == n - 1, adjacent_panel_rule(order, False), ("prev", order)),
        ):
            put(I[mask], J[mask], _singular_locals(test, I[mask], J[mask], rule, key))
            regular &= ~mask

    ct, cr = test.panel_centers(), trial.panel_centers()
    lt, lr = test.panel_lengths(), trial.panel_lengths()
    longer = np.maximum(lt[I], lr[J])
    ratio = np.hypot(*(ct[I] - cr[J]).T) / longer

    mid = regular & (ratio >= MID_RATIO) & (ratio < FAR_RATIO)
    if mid.any():
        put(I[mid], J[mid], _gathered_locals(test, trial, I[mid], J[mid], orders["mid"], 1))

    near = regular & (ratio < MID_RATIO)
    if near.any():
        In, Jn = I[near], J[near]
        dmin = _min_distances(test, trial, In, Jn)
        need = np.maximum(longer[near] / np.maximum(dmin, 1e-300), 1.0)
        pieces = np.minimum(2 ** np.ceil(np.log2(need)).astype(int), MAX_PIECES)
        for p in np.unique(pieces):
            sel = pieces == p
            put(In[sel], Jn[sel], _gathered_locals(
                test, trial, In[sel], Jn[sel], orders["near"], int(p)))

    K = loc["Kf0"] + np.roll(loc["Kf1"], 1, axis=1)
    W = (test.normal_sign * trial.normal_sign) * (
        _diff_matrix(n).T @ loc["Vu"] @ _diff_matrix(m)
    )
    Kr = None
    if reverse:
        Kr = loc["Kr0"].T + np.roll(loc["Kr1"].T, 1, axis=1)
    return LayerMatrices(V=loc["V"], K=K, W=W, K_reverse=Kr)


def _diff_matrix(n: int) -> np.ndarray:
    """Maps linear DoFs to the per-panel derivative in local coordinates."""
    D = -np.eye(n)
    D[np.arange(n), (np.arange(n) + 1) % n] = 1.0
    return D


def assemble_single_layer(trial, test, order_scale=1):
    return assemble_layer_matrices(trial, test, order_scale).V


def assemble_double_layer(trial, test, order_scale=1):
    return assemble_layer_matrices(trial, test, order_scale).K


def assemble_hypersingular(trial, test, order_scale=1):
    return assemble_layer_matrices(trial, test, order_scale).W


def assemble_mass_B(mesh: BoundaryMesh) -> np.ndarray:
    """``B[k, k'] = 1/2 (phi_k', psi_k)``: constant tests, linear trials."""
    u, w, _, _, jac = mesh.nodes(NEAR_ORDER)
    n = mesh.n_panels
    left = jac @ (w * (1.0 - u))
    right = jac @ (w * u)
    B = np.zeros((n, n))
    idx = np.arange(n)
    B[idx, idx] += 0.5 * left
    B[idx, (idx + 1) % n] += 0.5 * right
    return B


def assemble_mass_G(mesh: BoundaryMesh) -> np.ndarray:
    """Periodic piecewise-linear mass matrix."""
    u, w, _, _, jac = mesh.nodes(NEAR_ORDER)
    n = mesh.n_panels
    m00 = jac @ (w * (1.0 - u) ** 2)
    m01 = jac @ (w * u * (1.0 - u))
    m11 = jac @ (w * u**2)
    G = np.zeros((n, n))
    idx = np.arange(n)
    nxt = (idx + 1) % n
    np.add.at(G, (idx, idx), m00)
    np.add.at(G, (nxt, nxt), m11)
    np.add.at(G, (idx, nxt), m01)
    np.add.at(G, (nxt, idx), m01)
    return G


def assemble_load(mesh: BoundaryMesh, func) -> np.ndarray:
    """``g[k] = (func, phi_k)`` for a vectorized ``func(points)``."""
    u, w, pts, _, jac = mesh.nodes(NEAR_ORDER)
    vals = func(pts) * jac
    left = vals @ (w * (1.0 - u))
    right = vals @ (w * u)
    return left + np.roll(right, 1)


def linear_to_quadrature(mesh: BoundaryMesh, coeffs, order=NEAR_ORDER, pieces=1):
    """Values of a piecewise-linear function at the panel quadrature nodes."""
    u, *_ = mesh.nodes(order, pieces)
    c = np.asarray(coeffs)
    return c[:, None] * (1.0 - u) + np.roll(c, -1)[:, None] * u


def single_layer_potential(mesh: BoundaryMesh, density, points, order=32, pieces=4):
    """``int G(x, z) sigma(z) dsigma_z`` for piecewise-constant ``density``."""
    u, w, zp, _, zj = mesh.nodes(order, pieces)
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    d = x[:, None, None, :] - zp[None]
    G = -INV_2PI * 0.5 * np.log(np.sum(d**2, axis=-1))
    vals = np.einsum("pnq,nq,q,n->p", G, zj, w, np.asarray(density, dtype=float))
    return vals.reshape(np.shape(points)[:-1])


def double_layer_potential(mesh: BoundaryMesh, coeffs, points, order=32, pieces=4):
    """``int dG/dn_z(x, z) u(z) dsigma_z`` for piecewise-linear ``coeffs``."""
    u, w, zp, zn, zj = mesh.nodes(order, pieces)
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    d = x[:, None, None, :] - zp[None]
    r2 = np.sum(d**2, axis=-1)
    k = INV_2PI * np.sum(d * zn[None], axis=-1) / r2
    dens = linear_to_quadrature(mesh, coeffs, order, pieces) * zj * w
    vals = np.einsum("pnq,nq->p", k, dens)
    return vals.reshape(np.shape(points)[:-1])
