"""Weighted-particle phase-space ensembles and Problem A/B symmetrization."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Domain, HalfSpace

__all__ = [
    "Frame",
    "Ensemble",
    "InitialCondition",
    "FrameMismatch",
    "AsymmetricInput",
    "UnsupportedDensity",
    "symmetrize",
    "restrict",
    "kinetic_energy",
    "potential_energy",
    "sample_initial",
]

# particles sampled exactly on the boundary are nudged inward by this
# fraction of the domain scale (the initial trace set is measure zero)
BOUNDARY_NUDGE = 1e-12


class FrameMismatch(ValueError):
    """Operation applied to an ensemble in the wrong frame."""


class AsymmetricInput(ValueError):
    """ProblemB ensemble is not closed under the mirror map."""


class UnsupportedDensity(ValueError):
    """Initial-condition sampler kind not recognized."""


class Frame(enum.Enum):
    PROBLEM_A = "problem_a"   # lives in the closed domain
    PROBLEM_B = "problem_b"   # whole space, closed under (x, v) -> (x', v')


@dataclass(frozen=True)
class Ensemble:
    """Immutable snapshot of weighted phase-space samples.

    Arrays are copied and frozen on construction.  ``alive`` marks particles
    still inside the finite phase-space box (blown-up particles are frozen
    and excluded from fields and observables; their weights are untouched).
    """

    x: np.ndarray
    v: np.ndarray
    w: np.ndarray
    domain: Domain | None = None
    frame: Frame = Frame.PROBLEM_A
    alive: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        v = np.array(self.v, dtype=float)
        w = np.array(self.w, dtype=float)
        alive = self.alive
        alive = np.ones(len(w), dtype=bool) if alive is None else np.array(alive, dtype=bool)
        if x.shape != v.shape or x.shape[:1] != w.shape:
            raise ValueError("inconsistent particle array shapes")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if self.frame is Frame.PROBLEM_A and self.domain is not None and len(x):
            if np.min(self.domain.signed_distance(x)) < -1e-9 * self.domain.scale:
                raise ValueError("ProblemA particles must lie in the closed domain")
        for a in (x, v, w, alive):
            a.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "alive", alive)

    def __len__(self):
        return len(self.w)

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def total_mass(self):
        return float(np.sum(self.w * self.alive))

    def with_state(self, x=None, v=None, alive=None):
        """New snapshot with updated positions/velocities; weights never change."""
        return replace(
            self,
            x=self.x if x is None else x,
            v=self.v if v is None else v,
            alive=self.alive if alive is None else alive,
        )


def _mirror_xv(x, v):
    xm = np.array(x, dtype=float)
    vm = np.array(v, dtype=float)
    xm[:, 0] = -xm[:, 0]
    vm[:, 0] = -vm[:, 0]
    return xm, vm


def symmetrize(e: Ensemble) -> Ensemble:
    """Even extension: append the mirror (x', v', w) of every particle.

    Output has 2N particles and twice the mass; the usual factor 1/2 lives
    in the observables that compare the two frames, not in the weights.
    Particle i's mirror sits at index i + N.
    """
    if e.frame is not Frame.PROBLEM_A:
        raise FrameMismatch("symmetrize expects a ProblemA ensemble")
    if not isinstance(e.domain, HalfSpace):
        raise FrameMismatch("symmetrize is defined for half-space ensembles")
    xm, vm = _mirror_xv(e.x, e.v)
    return Ensemble(
        x=np.concatenate([e.x, xm]),
        v=np.concatenate([e.v, vm]),
        w=np.concatenate([e.w, e.w]),
        domain=e.domain,
        frame=Frame.PROBLEM_B,
        alive=np.concatenate([e.alive, e.alive]),
    )


def mirror_pair_indices(e: Ensemble, tol=1e-9):
    """Index ``m`` with ``m[i]`` the mirror partner of particle i.

    Raises AsymmetricInput if some particle has no partner within ``tol``
    (relative to the domain scale) in mirrored phase space.
    """
    from scipy.spatial import cKDTree

    scale = e.domain.scale if e.domain is not None else 1.0
    z = np.concatenate([e.x, e.v, e.w[:, None]], axis=1)
    xm, vm = _mirror_xv(e.x, e.v)
    zm = np.concatenate([xm, vm, e.w[:, None]], axis=1)
    dist, idx = cKDTree(zm).query(z, k=1)
    if np.any(dist > tol * max(scale, 1.0)):
        raise AsymmetricInput("ensemble is not closed under the mirror map")
    return idx


def restrict(e: Ensemble) -> Ensemble:
    """Keep the half-space representative of an even-symmetric ensemble.

    Inverse of ``symmetrize`` up to ordering: keeps x_1 > 0, and one member
    of each mirror pair sitting exactly on the plane.
    """
    if e.frame is not Frame.PROBLEM_B:
        raise FrameMismatch("restrict expects a ProblemB ensemble")
    if len(e) == 0:
        return Ensemble(
            x=e.x, v=e.v, w=e.w, domain=e.domain, frame=Frame.PROBLEM_A, alive=e.alive
        )
    partner = mirror_pair_indices(e)
    keep = e.x[:, 0] > 0
    on_plane = np.flatnonzero(e.x[:, 0] == 0)
    taken = set()
    for i in on_plane:
        j = int(partner[i])
        key = (min(int(i), j), max(int(i), j))
        if key in taken:
            continue
        taken.add(key)
        keep[min(int(i), j)] = True
    return Ensemble(
        x=e.x[keep],
        v=e.v[keep],
        w=e.w[keep],
        domain=e.domain,
        frame=Frame.PROBLEM_A,
        alive=e.alive[keep],
    )


def kinetic_energy(e: Ensemble) -> float:
    """sum_i w_i |v_i|^2 (no 1/2: the energy ledger uses the bare second moment)."""
    return float(np.sum(e.w * e.alive * np.sum(e.v**2, axis=1)))


def potential_energy(e: Ensemble, kind, params) -> float:
    """Double-sum interaction energy; see fields.interaction_energy."""
    from . import fields

    return fields.interaction_energy(e, kind, e.domain, params)


@dataclass(frozen=True)
class InitialCondition:
    """Sampler recipe for the initial phase-space density.

    kinds:
      uniform_box : positions uniform on ``x_bounds`` (rejection-clipped to
                    the domain), velocities uniform on ``v_bounds``
      maxwellian  : positions uniform on ``x_bounds`` (clipped to the
                    domain), velocities isotropic normal with variance
                    ``temperature`` per component around ``v_center``
      delta       : n copies of the single point (``x0``, ``v0``)
      explicit    : particle arrays given directly (weights mass/n)
    """

    kind: str
    n: int
    mass: float = 1.0
    x_bounds: tuple | None = None   # (lo, hi) arrays
    v_bounds: tuple | None = None
    temperature: float = 1.0
    v_center: np.ndarray | None = None
    x0: np.ndarray | None = None
    v0: np.ndarray | None = None
    x: np.ndarray | None = None
    v: np.ndarray | None = None


def _sample_box(rng, lo, hi, n):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return lo + (hi - lo) * rng.random((n, lo.size))


def _sample_positions(rng, ic, domain, n):
    lo, hi = ic.x_bounds
    out = np.empty((n, np.asarray(lo).size))
    have = 0
    while have < n:
        cand = _sample_box(rng, lo, hi, n - have)
        if domain is not None:
            cand = cand[domain.signed_distance(cand) >= 0]
        out[have : have + len(cand)] = cand
        have += len(cand)
    return out


def sample_initial(ic: InitialCondition, domain=None, seed=0, frame=Frame.PROBLEM_A) -> Ensemble:
    """Draw N equal-weight particles from the initial-condition recipe.

    Deterministic for a fixed seed.  Particles landing exactly on the
    boundary are nudged inward along the normal by 1e-12 * scale.
    """
    rng = np.random.default_rng(seed)
    n = ic.n
    if ic.kind == "uniform_box":
        x = _sample_positions(rng, ic, domain, n)
        v = _sample_box(rng, *ic.v_bounds, n)
    elif ic.kind == "maxwellian":
        x = _sample_positions(rng, ic, domain, n)
        d = x.shape[1]
        center = np.zeros(d) if ic.v_center is None else np.asarray(ic.v_center, dtype=float)
        v = center + np.sqrt(ic.temperature) * rng.standard_normal((n, d))
    elif ic.kind == "delta":
        x = np.tile(np.asarray(ic.x0, dtype=float), (n, 1))
        v = np.tile(np.asarray(ic.v0, dtype=float), (n, 1))
    elif ic.kind == "explicit":
        x = np.array(ic.x, dtype=float)
        v = np.array(ic.v, dtype=float)
        if len(x) != n:
            raise ValueError("explicit particle count does not match n")
    else:
        raise UnsupportedDensity(f"unknown initial-condition kind {ic.kind!r}")

    if domain is not None and len(x):
        dist = domain.signed_distance(x)
        on_boundary = dist == 0.0
        if np.any(on_boundary):
            x = np.array(x)
            nudge = BOUNDARY_NUDGE * domain.scale
            x[on_boundary] += nudge * domain.inward_normal(x[on_boundary])
    w = np.full(n, ic.mass / n if n else 0.0)
    return Ensemble(x=x, v=v, w=w, domain=domain, frame=frame)
