"""Domain types and spin-space primitives.

States live on products of 2-spheres embedded in R^3: a configuration is n
nonzero 3-vectors ``w_1, ..., w_n``.  A Hamiltonian model supplies an energy
``H(w)`` and its ambient gradient ``dH/dw_i``; the induced dynamics is

    dw_i/dt = w_i x dH/dw_i ,

which preserves both the energy and the individual norms ``|w_i|``.  This
module provides the state/model containers, a small model catalog, and the
geometric primitives (ray projection, chordal midpoints, Poisson bracket)
that the midpoint steppers are built from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AntipodalError, ConfigurationError, SingularRayError

# Guards for the two genuine singularities: the origin (rays undefined) and
# antipodal pairs (chordal midpoint undefined).  Fail loudly near either.
RAY_EPSILON = 1e-8
ANTIPODAL_EPSILON = 1e-8

# Unit-norm slack accepted by constructors and steppers that require states
# on the unit spheres.
NORM_TOL = 1e-8


def spin_norms(arr: np.ndarray) -> np.ndarray:
    """Euclidean norm of each 3-vector in an (n, 3) array."""
    return np.sqrt((arr * arr).sum(axis=-1))


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product of (n, 3) arrays.

    Equivalent to np.cross but without its axis-dispatch overhead, which
    dominates the implicit-solver inner loop at small n.
    """
    out = np.empty_like(a)
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def as_spin_array(w) -> np.ndarray:
    """Coerce a SpinConfiguration or array-like to a float (n, 3) array."""
    if isinstance(w, SpinConfiguration):
        return w.spins
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ConfigurationError(f"expected an (n, 3) array of spins, got shape {arr.shape}")
    return arr


class SpinConfiguration:
    """n nonzero 3-vectors; the state of a spin system.

    The wrapped array is read-only.  With ``unit=True`` construction also
    requires every norm to be within ``norm_tol`` of one.
    """

    __slots__ = ("spins",)

    def __init__(self, spins, *, unit: bool = False, norm_tol: float = NORM_TOL):
        arr = as_spin_array(spins).copy()
        norms = spin_norms(arr)
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("spin components must be finite")
        if np.any(norms == 0.0):
            raise ConfigurationError("spin vectors must be nonzero")
        if unit and np.max(np.abs(norms - 1.0)) > norm_tol:
            raise ConfigurationError(
                f"unit configuration requested but max | |w_i| - 1 | = {np.max(np.abs(norms - 1.0)):.3e}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "spins", arr)

    def __setattr__(self, name, value):
        raise AttributeError("SpinConfiguration is immutable")

    @property
    def n(self) -> int:
        return self.spins.shape[0]

    def norms(self) -> np.ndarray:
        return spin_norms(self.spins)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"SpinConfiguration({self.spins.tolist()!r})"


@dataclass(frozen=True)
class HamiltonianModel:
    """Energy function with ambient gradient on (R^3 \\ {0})^n.

    ``value_fn`` and ``gradient_fn`` act on raw (n, 3) arrays.  Models are
    immutable and safe to share across concurrent runs.  ``ray_constant``
    declares H(lam * w) = H(w) for componentwise positive scalings; steppers
    that need this property check the flag.
    """

    name: str
    n: int
    value_fn: Callable[[np.ndarray], float]
    gradient_fn: Callable[[np.ndarray], np.ndarray]
    ray_constant: bool = False
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def _check(self, arr: np.ndarray) -> np.ndarray:
        if arr.shape[0] != self.n:
            raise ConfigurationError(f"model '{self.name}' expects n={self.n}, got n={arr.shape[0]}")
        return arr

    def value(self, w) -> float:
        return float(self.value_fn(self._check(as_spin_array(w))))

    def gradient(self, w) -> np.ndarray:
        return np.asarray(self.gradient_fn(self._check(as_spin_array(w))), dtype=float)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly spaced time series of states with per-step solver diagnostics.

    ``states`` has shape (m, n, 3) with m = steps + 1; row 0 is the initial
    state, for which the solver diagnostics are zero.
    """

    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    norms: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def n_spins(self) -> int:
        return self.states.shape[1]

    def state(self, k: int) -> SpinConfiguration:
        return SpinConfiguration(self.states[k])

    def __len__(self) -> int:
        return len(self.times)


def eval_vector_field(model: HamiltonianModel, w) -> np.ndarray:
    """Spin-space Hamiltonian vector field, componentwise w_i x dH/dw_i."""
    arr = as_spin_array(w)
    if arr.shape[0] != model.n:
        raise ConfigurationError(f"model '{model.name}' expects n={model.n}, got n={arr.shape[0]}")
    return cross3(arr, model.gradient_fn(arr))


def _unit(arr: np.ndarray, eps: float = RAY_EPSILON) -> np.ndarray:
    norms = spin_norms(arr)
    if np.any(norms <= eps):
        raise SingularRayError(
            f"spin norm {norms.min():.3e} <= {eps:.1e}; ray projection undefined near the origin"
        )
    return arr / norms[:, None]


def ray_project(w) -> SpinConfiguration:
    """Project each spin to its unit direction (the ray through it)."""
    return SpinConfiguration(_unit(as_spin_array(w)))


def _gamma(warr: np.ndarray, Warr: np.ndarray) -> np.ndarray:
    s = warr + Warr
    s_norms = spin_norms(s)
    if np.any(s_norms <= ANTIPODAL_EPSILON):
        raise AntipodalError(
            f"|w_i + W_i| = {s_norms.min():.3e} <= {ANTIPODAL_EPSILON:.1e}; chordal midpoint undefined"
        )
    radii = np.sqrt(spin_norms(warr) * spin_norms(Warr))
    return s * (radii / s_norms)[:, None]


def gamma_midpoint(w, W) -> SpinConfiguration:
    """Chordal midpoint rescaled to the geometric mean of the two radii.

    The result points along w_i + W_i with norm sqrt(|w_i| |W_i|); in
    particular it is a fixed point on the diagonal: gamma(w, w) = w.
    """
    warr, Warr = as_spin_array(w), as_spin_array(W)
    if warr.shape != Warr.shape:
        raise ConfigurationError("gamma_midpoint requires configurations of equal size")
    return SpinConfiguration(_gamma(warr, Warr))


def poisson_bracket(F: HamiltonianModel, G: HamiltonianModel, w) -> float:
    """Lie-Poisson bracket sum_k (dF/dw_k x dG/dw_k) . w_k."""
    arr = as_spin_array(w)
    if F.n != G.n or arr.shape[0] != F.n:
        raise ConfigurationError("poisson_bracket requires matching spin counts")
    gf = F.gradient_fn(arr)
    gg = G.gradient_fn(arr)
    return float(np.sum(cross3(np.asarray(gf, dtype=float), np.asarray(gg, dtype=float)) * arr))


# ---------------------------------------------------------------------------
# Model catalog
# ---------------------------------------------------------------------------


def _chain_indices(n: int):
    idx = np.arange(n)
    return (idx - 1) % n, (idx + 1) % n


def _chain_value(arr: np.ndarray, nxt: np.ndarray, periodic: bool) -> float:
    dots = (arr * arr[nxt]).sum(axis=1)
    return float(dots.sum() if periodic else dots[:-1].sum())


def _chain_gradient(arr: np.ndarray, prv: np.ndarray, nxt: np.ndarray, periodic: bool) -> np.ndarray:
    if periodic:
        return arr[prv] + arr[nxt]
    g = np.zeros_like(arr)
    g[:-1] += arr[1:]
    g[1:] += arr[:-1]
    return g


def _vortex_value(arr: np.ndarray, strengths: np.ndarray) -> float:
    total = 0.0
    for i in range(len(arr)):
        dots = arr[i + 1 :] @ arr[i]
        total -= np.sum(strengths[i] * strengths[i + 1 :] * np.log(2.0 - 2.0 * dots))
    return float(total)


def _vortex_gradient(arr: np.ndarray, strengths: np.ndarray) -> np.ndarray:
    dots = arr @ arr.T
    coef = strengths[:, None] * strengths[None, :]
    denom = 1.0 - dots
    np.fill_diagonal(denom, 1.0)
    coef = coef / denom
    np.fill_diagonal(coef, 0.0)
    return coef @ arr


def make_model(kind: str, **params) -> HamiltonianModel:
    """Build a model from the catalog.

    Kinds:
      chain       -- nearest-neighbour exchange H = sum_i w_i . w_{i+1};
                     params: n >= 2, periodic (default True)
      rigid_body  -- H = sum_i (1/2) sum_a (w_i)_a^2 / I_a, uncoupled bodies;
                     params: inertia (3 positive reals), n (default 1)
      field       -- H = sum_i w_i . B; params: b (3-vector), n (default 1)
      vortices    -- point vortices, H = -sum_{i<j} g_i g_j log(2 - 2 u_i.u_j)
                     evaluated on unit directions; params: strengths (nonzero)
    """
    if kind == "chain":
        n = int(params.pop("n"))
        periodic = bool(params.pop("periodic", True))
        if params:
            raise ConfigurationError(f"unknown chain params: {sorted(params)}")
        if n < 2:
            raise ConfigurationError("chain model requires n >= 2")
        prv, nxt = _chain_indices(n)
        return HamiltonianModel(
            name=f"chain(n={n}{'' if periodic else ', open'})",
            n=n,
            value_fn=lambda arr: _chain_value(arr, nxt, periodic),
            gradient_fn=lambda arr: _chain_gradient(arr, prv, nxt, periodic),
            kind="chain",
            params={"n": n, "periodic": periodic},
        )

    if kind == "rigid_body":
        inertia = np.asarray(params.pop("inertia"), dtype=float)
        n = int(params.pop("n", 1))
        if params:
            raise ConfigurationError(f"unknown rigid_body params: {sorted(params)}")
        if inertia.shape != (3,) or np.any(inertia <= 0):
            raise ConfigurationError("rigid_body requires three positive moments of inertia")
        inv_inertia = 1.0 / inertia
        return HamiltonianModel(
            name=f"rigid_body(I={inertia.tolist()}, n={n})",
            n=n,
            value_fn=lambda arr: float(0.5 * np.sum(arr * arr * inv_inertia)),
            gradient_fn=lambda arr: arr * inv_inertia,
            kind="rigid_body",
            params={"inertia": inertia.tolist(), "n": n},
        )

    if kind == "field":
        b = np.asarray(params.pop("b"), dtype=float)
        n = int(params.pop("n", 1))
        if params:
            raise ConfigurationError(f"unknown field params: {sorted(params)}")
        if b.shape != (3,):
            raise ConfigurationError("field model requires a 3-vector b")
        return HamiltonianModel(
            name=f"field(b={b.tolist()}, n={n})",
            n=n,
            value_fn=lambda arr: float(np.sum(arr @ b)),
            gradient_fn=lambda arr: np.broadcast_to(b, arr.shape).copy(),
            kind="field",
            params={"b": b.tolist(), "n": n},
        )

    if kind == "vortices":
        strengths = np.asarray(params.pop("strengths"), dtype=float)
        if params:
            raise ConfigurationError(f"unknown vortices params: {sorted(params)}")
        if strengths.ndim != 1 or len(strengths) < 2 or np.any(strengths == 0):
            raise ConfigurationError("vortices require >= 2 nonzero strengths")
        n = len(strengths)
        return HamiltonianModel(
            name=f"vortices(n={n})",
            n=n,
            value_fn=lambda arr: _vortex_value(arr, strengths),
            gradient_fn=lambda arr: _vortex_gradient(arr, strengths),
            kind="vortices",
            params={"strengths": strengths.tolist()},
        )

    raise ConfigurationError(f"unknown model kind '{kind}'")


def ray_extension(model: HamiltonianModel) -> HamiltonianModel:
    """Ray-constant extension H(w/|w|) of a model, with the exact gradient.

    The extension's vector field equals the original field evaluated on unit
    directions, so unit-sphere dynamics is unchanged while the energy becomes
    constant along rays.
    """

    def value(arr: np.ndarray) -> float:
        return model.value_fn(_unit(arr))

    def gradient(arr: np.ndarray) -> np.ndarray:
        norms = spin_norms(arr)
        if np.any(norms <= RAY_EPSILON):
            raise SingularRayError("ray extension gradient undefined near the origin")
        u = arr / norms[:, None]
        g = np.asarray(model.gradient_fn(u), dtype=float)
        g_tan = g - (g * u).sum(axis=1)[:, None] * u
        return g_tan / norms[:, None]

    return HamiltonianModel(
        name=f"ray[{model.name}]",
        n=model.n,
        value_fn=value,
        gradient_fn=gradient,
        ray_constant=True,
        kind=f"ray_{model.kind}",
        params=dict(model.params),
    )


def rotate_model(model: HamiltonianModel, rotation: np.ndarray) -> HamiltonianModel:
    """Conjugate a model by a common rotation: H_R(w) = H(R^-1 w) per spin."""
    R = np.asarray(rotation, dtype=float)
    if R.shape != (3, 3):
        raise ConfigurationError("rotation must be a 3x3 matrix")
    # rows w_i: R^-1 w_i == w_i @ R for orthogonal R
    return HamiltonianModel(
        name=f"rot[{model.name}]",
        n=model.n,
        value_fn=lambda arr: model.value_fn(arr @ R),
        gradient_fn=lambda arr: np.asarray(model.gradient_fn(arr @ R)) @ R.T,
        ray_constant=model.ray_constant,
        kind=f"rot_{model.kind}",
        params=dict(model.params),
    )
