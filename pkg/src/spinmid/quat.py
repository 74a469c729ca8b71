"""Quaternion algebra, the extended Hopf map, and collective Hamiltonians.

Quaternions are (..., 4) float arrays ``[a, b, c, d]`` for ``a + b i + c j +
d k`` with the Hamilton products ``ij = k``, ``jk = i``, ``ki = j``.  A
quaternion configuration is an (n, 4) array of nonzero rows; it projects to a
spin configuration through the extended Hopf map

    pi(z) = (1/4) z k conj(z)   (componentwise),

whose image is purely imaginary and is identified with R^3 via (i, j, k) <->
(x, y, z).  Pulling a spin Hamiltonian back through pi gives a *collective*
Hamiltonian on the quaternion space, where the dynamics is canonical and the
classical midpoint rule applies verbatim; projecting the result back down
reproduces the sphere-intrinsic midpoint steppers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HamiltonianModel, RAY_EPSILON, as_spin_array, spin_norms
from .errors import ConfigurationError, GeometryError, SingularRayError

QI = np.array([0.0, 1.0, 0.0, 0.0])
QJ = np.array([0.0, 0.0, 1.0, 0.0])
QK = np.array([0.0, 0.0, 0.0, 1.0])
QONE = np.array([1.0, 0.0, 0.0, 0.0])

# Pure-imaginary assertions use this absolute tolerance scaled by |z|^2.
IMAG_TOL = 1e-12


def qmul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product, broadcasting over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=-1,
    )


def qconj(q: np.ndarray) -> np.ndarray:
    out = np.array(q, dtype=float, copy=True)
    out[..., 1:] *= -1.0
    return out


def qnorm(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.sqrt(np.sum(q * q, axis=-1))


def qinv(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n2 = np.sum(q * q, axis=-1)
    if np.any(n2 == 0.0):
        raise SingularRayError("cannot invert a zero quaternion")
    return qconj(q) / n2[..., None]


def as_quat_array(z) -> np.ndarray:
    """Coerce to a float (n, 4) array of quaternion components."""
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 1 and arr.size == 4:
        arr = arr.reshape(1, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ConfigurationError(f"expected an (n, 4) quaternion array, got shape {arr.shape}")
    return arr


def _imaginary_part(q: np.ndarray, what: str) -> np.ndarray:
    """Drop the real component after checking it vanishes."""
    scale = np.maximum(np.sum(q * q, axis=-1), 1.0)
    excess = np.abs(q[..., 0]) / scale
    if np.any(excess > IMAG_TOL):
        raise ConfigurationError(f"{what}: real part {excess.max():.3e} exceeds tolerance")
    return q[..., 1:]


def hopf(z) -> np.ndarray:
    """Extended Hopf map (1/4) z k conj(z), an (n, 3) spin array.

    Homogeneous of degree two: |hopf(z)_i| = |z_i|^2 / 4, and invariant under
    the per-component circle action z_i -> z_i exp(k theta_i).
    """
    arr = as_quat_array(z)
    if np.any(np.sum(arr * arr, axis=-1) == 0.0):
        raise SingularRayError("hopf undefined at zero quaternions")
    img = qmul(qmul(arr, QK), qconj(arr))
    return 0.25 * _imaginary_part(img, "hopf image")


def double_cover(z) -> np.ndarray:
    """Componentwise squaring of complex numbers, |out_i| = |z_i|^2."""
    arr = np.asarray(z, dtype=complex)
    return arr * arr


def hopf_tangent(z, u) -> np.ndarray:
    """Derivative of hopf at z in direction u: (1/4)(u k conj(z) + z k conj(u))."""
    zq = as_quat_array(z)
    uq = as_quat_array(u)
    if zq.shape != uq.shape:
        raise ConfigurationError("hopf_tangent requires matching shapes")
    img = qmul(qmul(uq, QK), qconj(zq)) + qmul(qmul(zq, QK), qconj(uq))
    # the real component cancels exactly by conjugation symmetry
    return 0.25 * img[..., 1:]


def hopf_tangent_adjoint(z, v) -> np.ndarray:
    """Adjoint of hopf_tangent(z, .): the (n, 4) direction u* with
    <hopf_tangent(z, u), v> = <u, u*> for every u.

    Closed form from the quaternion product: u* = -(1/2) v z k, embedding v
    as a pure-imaginary quaternion.
    """
    zq = as_quat_array(z)
    varr = as_spin_array(v)
    if varr.shape[0] != zq.shape[0]:
        raise ConfigurationError("hopf_tangent_adjoint requires matching lengths")
    vq = np.concatenate([np.zeros((len(varr), 1)), varr], axis=1)
    return -0.5 * qmul(qmul(vq, zq), QK)


@dataclass(frozen=True)
class CollectiveModel:
    """Pullback H o hopf of a spin Hamiltonian to quaternion space."""

    base: HamiltonianModel

    def value(self, z) -> float:
        return self.base.value(hopf(z))

    def gradient(self, z) -> np.ndarray:
        zq = as_quat_array(z)
        return hopf_tangent_adjoint(zq, self.base.gradient(hopf(zq)))


def collective_model(base: HamiltonianModel) -> CollectiveModel:
    return CollectiveModel(base=base)


def quat_hamiltonian_vf(F, z) -> np.ndarray:
    """Hamiltonian vector field on the quaternion space.

    Componentwise right multiplication of the gradient by the conjugate of
    k; the orientation is fixed so that the Hopf projection carries this
    field onto the spin-space field w x dH/dw.
    """
    zq = as_quat_array(z)
    return -qmul(np.asarray(F.gradient(zq), dtype=float), QK)


def _rotation_quaternion_from_z_axis(u: np.ndarray) -> np.ndarray:
    """Unit quaternions q with q k conj(q) = (unit directions u), rows (n, 3).

    Uses the half-angle form q ~ 1 + u_z + (e_z x u); for directions within
    1e-6 of -e_z it switches to a chart rotated by pi about the x-axis.
    """
    n = len(u)
    q = np.zeros((n, 4))
    south = u[:, 2] < -1.0 + 1e-6
    reg = ~south
    if np.any(reg):
        ur = u[reg]
        q[reg, 0] = 1.0 + ur[:, 2]
        q[reg, 1] = -ur[:, 1]
        q[reg, 2] = ur[:, 0]
    if np.any(south):
        # rotate k to -u (well conditioned near the south pole), then flip
        # k -> -k with the quaternion i
        us = -u[south]
        q2 = np.zeros((int(south.sum()), 4))
        q2[:, 0] = 1.0 + us[:, 2]
        q2[:, 1] = -us[:, 1]
        q2[:, 2] = us[:, 0]
        q[south] = qmul(q2, QI)
    return q / qnorm(q)[:, None]


def hopf_section(w) -> np.ndarray:
    """A right inverse of hopf: hopf(hopf_section(w)) = w, |z_i| = 2 sqrt|w_i|.

    The fibre phase is an arbitrary smooth choice; downstream results are
    certified to be independent of it.
    """
    arr = as_spin_array(w)
    norms = spin_norms(arr)
    if np.any(norms <= RAY_EPSILON):
        raise SingularRayError("hopf_section undefined near the origin")
    q = _rotation_quaternion_from_z_axis(arr / norms[:, None])
    return 2.0 * np.sqrt(norms)[:, None] * q


def phase_align(z, Z) -> np.ndarray:
    """Rotate each Z_i along its fibre circle to minimize |Z_i e^{k theta} - z_i|.

    The optimum is closed form: with beta = conj(z) Z, the minimizing phase
    satisfies (cos t, sin t) ~ (beta_0, -beta_3).  Raises if the optimum is
    degenerate (antipodal fibres).
    """
    zq = as_quat_array(z)
    Zq = as_quat_array(Z)
    beta = qmul(qconj(zq), Zq)
    c, s = beta[:, 0], -beta[:, 3]
    r = np.sqrt(c * c + s * s)
    scale = qnorm(zq) * qnorm(Zq)
    if np.any(r <= 1e-12 * np.maximum(scale, 1.0)):
        raise GeometryError("fibre phase alignment degenerate (antipodal lift)")
    phase = np.zeros_like(Zq)
    phase[:, 0] = c / r
    phase[:, 3] = s / r
    return qmul(Zq, phase)
