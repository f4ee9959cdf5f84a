"""Reference ellipse, random radial Fourier perturbation and boundary curves.

Sample vectors hold the Fourier coefficients ``y_k``, ``k = -64..64``, in the
order ``k = 0, +1, -1, +2, -2, ...`` so that the heavily weighted coordinates
come first. ``y_k`` (k >= 0) multiplies ``cos(k phi)`` and ``y_{-k}``
multiplies ``sin(k phi)``.
"""

from dataclasses import dataclass, field

import numba
import numpy as np

SIGMA_RADIUS = 0.2
DEGENERACY_RADIUS = 0.25


class DegenerateBoundaryError(ValueError):
    """The sampled boundary comes too close to the fixed disk."""


@dataclass(frozen=True)
class EllipseReference:
    semi_axis_a: float = 0.6
    semi_axis_b: float = 0.4

    def __post_init__(self):
        if self.semi_axis_a <= 0 or self.semi_axis_b <= 0:
            raise ValueError("semi-axes must be positive")


@dataclass(frozen=True)
class PerturbationSpec:
    epsilon: float = 0.05
    k_max: int = 64

    @property
    def dimension(self) -> int:
        return 2 * self.k_max + 1

    def weight(self, k):
        """Weight ``w_k``: 1 for |k| <= 5, (|k| - 5)^-6 up to k_max, else 0."""
        k = np.abs(np.asarray(k, dtype=float))
        with np.errstate(divide="ignore"):
            tail = np.where(k > 5, (k - 5.0) ** -6, 1.0)
        return np.where(k > self.k_max, 0.0, tail)


DEFAULT_ELLIPSE = EllipseReference()
DEFAULT_PERTURBATION = PerturbationSpec()


def coordinate_wavenumbers(k_max: int = 64) -> np.ndarray:
    """Signed wavenumber ``k`` of each sample coordinate: 0, 1, -1, 2, -2, ..."""
    ks = np.zeros(2 * k_max + 1, dtype=int)
    ks[1::2] = np.arange(1, k_max + 1)
    ks[2::2] = -np.arange(1, k_max + 1)
    return ks


def sample_from_coefficients(coeffs: dict, k_max: int = 64) -> np.ndarray:
    """Build a sample vector from ``{k: y_k}``; unspecified entries are zero."""
    y = np.zeros(2 * k_max + 1)
    index = {int(k): i for i, k in enumerate(coordinate_wavenumbers(k_max))}
    for k, value in coeffs.items():
        y[index[int(k)]] = value
    return y


def validate_sample(y, k_max: int = 64) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (2 * k_max + 1,):
        raise ValueError(f"sample must have {2 * k_max + 1} entries, got {y.shape}")
    if np.any(np.abs(y) >= 0.5):
        raise ValueError("sample entries must lie in (-0.5, 0.5)")
    return y


def reference_radius(phi, ellipse: EllipseReference = DEFAULT_ELLIPSE):
    """Polar radius of the ellipse at angle ``phi``."""
    a, b = ellipse.semi_axis_a, ellipse.semi_axis_b
    return a * b / np.sqrt((b * np.cos(phi)) ** 2 + (a * np.sin(phi)) ** 2)


def reference_radius_derivative(phi, ellipse: EllipseReference = DEFAULT_ELLIPSE):
    a, b = ellipse.semi_axis_a, ellipse.semi_axis_b
    c, s = np.cos(phi), np.sin(phi)
    q = (b * c) ** 2 + (a * s) ** 2
    return -a * b * (a * a - b * b) * s * c / q**1.5


def _complex_coefficients(y, spec: PerturbationSpec) -> np.ndarray:
    """``c_k`` with ``Re(c_k e^{ik phi}) = eps w_k (y_k cos + y_{-k} sin)``."""
    y = np.asarray(y, dtype=float)
    km = spec.k_max
    cos_part = np.concatenate([[y[0]], y[1::2]])
    sin_part = np.concatenate([[0.0], y[2::2]])
    w = spec.weight(np.arange(km + 1))
    return spec.epsilon * w * (cos_part - 1j * sin_part)


def _horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    acc = np.full(z.shape, coeffs[-1], dtype=complex)
    for c in coeffs[-2::-1]:
        acc *= z
        acc += c
    return acc


@numba.njit(cache=True, nogil=True)
def _horner_pair(coeffs, dcoeffs, phi):
    """Real parts of both polynomials at ``exp(i phi)`` in one pass."""
    n = phi.size
    val = np.empty(n)
    der = np.empty(n)
    m = coeffs.size
    for p in range(n):
        z = np.exp(1j * phi[p])
        a = coeffs[m - 1]
        b = dcoeffs[m - 1]
        for k in range(m - 2, -1, -1):
            a = a * z + coeffs[k]
            b = b * z + dcoeffs[k]
        val[p] = a.real
        der[p] = b.real
    return val, der


def perturbation(y, phi, spec: PerturbationSpec = DEFAULT_PERTURBATION):
    """Radial perturbation ``eps * sum_k w_k (y_-k sin(k phi) + y_k cos(k phi))``."""
    phi = np.asarray(phi, dtype=float)
    c = _complex_coefficients(y, spec)
    return _horner(c, np.exp(1j * phi)).real


def perturbation_derivative(y, phi, spec: PerturbationSpec = DEFAULT_PERTURBATION):
    phi = np.asarray(phi, dtype=float)
    c = _complex_coefficients(y, spec)
    dc = 1j * np.arange(c.size) * c
    return _horner(dc, np.exp(1j * phi)).real


class Curve:
    """Closed curve ``gamma(tau)``, ``tau`` in [0, 2 pi), counterclockwise."""

    def point(self, tau) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, tau) -> np.ndarray:
        raise NotImplementedError


class Circle(Curve):
    def __init__(self, radius: float, center=(0.0, 0.0)):
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def point(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.center + self.radius * np.stack([np.cos(tau), np.sin(tau)], axis=-1)

    def derivative(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.radius * np.stack([-np.sin(tau), np.cos(tau)], axis=-1)

    def __repr__(self):
        return f"Circle(radius={self.radius})"


@dataclass
class RadialCurve(Curve):
    """Star-shaped curve ``(r_ref(phi) + delta(y, phi)) (cos phi, sin phi)``."""

    y: np.ndarray
    ellipse: EllipseReference = DEFAULT_ELLIPSE
    spec: PerturbationSpec = DEFAULT_PERTURBATION
    _coeffs: np.ndarray = field(init=False, repr=False)
    _dcoeffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.y = validate_sample(self.y, self.spec.k_max)
        self._coeffs = _complex_coefficients(self.y, self.spec)
        self._dcoeffs = 1j * np.arange(self._coeffs.size) * self._coeffs

    def radius(self, phi):
        phi = np.asarray(phi, dtype=float)
        z = np.exp(1j * phi)
        return reference_radius(phi, self.ellipse) + _horner(self._coeffs, z).real

    def _radius_and_slope(self, phi):
        flat = np.ascontiguousarray(phi, dtype=float).ravel()
        d, dd = _horner_pair(self._coeffs, self._dcoeffs, flat)
        r = reference_radius(phi, self.ellipse) + d.reshape(phi.shape)
        dr = reference_radius_derivative(phi, self.ellipse) + dd.reshape(phi.shape)
        return r, dr

    def point(self, tau):
        tau = np.asarray(tau, dtype=float)
        r = self.radius(tau)
        return np.stack([r * np.cos(tau), r * np.sin(tau)], axis=-1)

    def derivative(self, tau):
        tau = np.asarray(tau, dtype=float)
        r, dr = self._radius_and_slope(tau)
        c, s = np.cos(tau), np.sin(tau)
        return np.stack([dr * c - r * s, dr * s + r * c], axis=-1)

    def point_and_derivative(self, tau):
        tau = np.asarray(tau, dtype=float)
        r, dr = self._radius_and_slope(tau)
        c, s = np.cos(tau), np.sin(tau)
        return (
            np.stack([r * c, r * s], axis=-1),
            np.stack([dr * c - r * s, dr * s + r * c], axis=-1),
        )

    def check_clearance(self, samples: int = 4096, margin: float = DEGENERACY_RADIUS):
        """Raise if the radius drops below ``margin`` anywhere on a fine grid."""
        phi = 2.0 * np.pi * np.arange(samples) / samples
        r_min = float(np.min(self.radius(phi)))
        if r_min < margin:
            raise DegenerateBoundaryError(
                f"degenerate boundary: minimum radius {r_min:.4f} < {margin}"
            )
        return r_min


def _check_radius(r):
    r_min = np.min(r)
    if r_min < DEGENERACY_RADIUS:
        raise DegenerateBoundaryError(
            f"degenerate boundary: radius {r_min:.4f} < {DEGENERACY_RADIUS}"
        )


def boundary_point(y, phi, ellipse=DEFAULT_ELLIPSE, spec=DEFAULT_PERTURBATION):
    """Point of the perturbed boundary at polar angle ``phi``."""
    curve = RadialCurve(y, ellipse, spec)
    phi = np.asarray(phi, dtype=float)
    _check_radius(curve.radius(phi))
    return curve.point(phi)


def boundary_tangent(y, phi, ellipse=DEFAULT_ELLIPSE, spec=DEFAULT_PERTURBATION):
    """Derivative of :func:`boundary_point` with respect to ``phi``."""
    curve = RadialCurve(y, ellipse, spec)
    phi = np.asarray(phi, dtype=float)
    _check_radius(curve.radius(phi))
    return curve.derivative(phi)
