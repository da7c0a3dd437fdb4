"""Kernels, Green functions, regularizations, and pairwise field evaluation.

Two regularization routes coexist, matching the two halves of the theory:

* the *whole-space route* (Problem B): a mollified kernel ``H_eps`` (Plummer
  softening) and a smoothed sign ``s_bar`` replacing sgn(x_1);
* the *domain route*: the exact image-charge Green function of the domain,
  cut off at short pair separations (``delta``) and near the boundary
  (``zeta``).

The short-range cutoff is applied per kernel term, keyed on that term's own
separation (|x-z| for the direct term, the image separation for the image
term).  A single global factor r((|x-z|)/delta) would kill the finite
self-image interaction at x = z, which both the force and the energy ledger
need; with the per-term cutoff the same object appears in the force and in
the energy, and the energy identity closes.

All pairwise sums run in a fixed order (ascending source index per target),
so results do not depend on chunking or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Ball, Domain

__all__ = [
    "GreenKind",
    "RegularizationParams",
    "DimensionTooSmall",
    "CoincidentPoints",
    "NegativeArgument",
    "c_d",
    "cutoff_rbar",
    "cutoff_rbar_prime",
    "smooth_sign",
    "boundary_cutoff",
    "green",
    "grad_green",
    "green_cut",
    "grad_green_cut",
    "kernel_plummer",
    "field_halfspace_A",
    "field_problem_b",
    "field_regularized",
    "field_batch",
    "interaction_energy",
    "make_field_factory",
]


class DimensionTooSmall(ValueError):
    """The theory requires dimension d >= 3."""


class CoincidentPoints(ValueError):
    """Green function evaluated at x = z."""


class NegativeArgument(ValueError):
    """Cutoff profile takes arguments >= 0 only."""


class GreenKind:
    """Which Green function generates the field."""

    WHOLE_SPACE = "whole_space"
    HALF_SPACE_IMAGE = "half_space_image"
    BALL_IMAGE = "ball_image"

    ALL = (WHOLE_SPACE, HALF_SPACE_IMAGE, BALL_IMAGE)


@dataclass(frozen=True)
class RegularizationParams:
    """The four regularization knobs.

    eps_mollify : Plummer softening length of the mollified kernel
    r_sign      : half-width of the smoothed sign
    zeta        : boundary cutoff length (field vanishes within zeta of the
                  boundary, is untouched beyond 2 zeta)
    delta       : short-range Green cutoff (pairs closer than delta do not
                  interact, pairs beyond 2 delta are untouched)

    The knobs are independent here; the coupled schedules used in the
    convergence theory are a choice of test configuration, not a constraint
    of the data structure.
    """

    eps_mollify: float
    r_sign: float
    zeta: float
    delta: float

    def __post_init__(self):
        for name in ("eps_mollify", "r_sign", "zeta", "delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    def validate_for_domain(self, domain: Domain):
        """For a ball the cutoff shell must stay clear of the center."""
        if isinstance(domain, Ball) and 2 * self.zeta >= domain.radius:
            raise ValueError(
                f"zeta={self.zeta} too large for ball radius {domain.radius}: "
                "boundary cutoff must be supported in a collar (2*zeta < R)"
            )


def c_d(d: int) -> float:
    """Normalization making div(x |x|^-d) = delta_0 / c_d.

    Equals the reciprocal surface area of the unit (d-1)-sphere:
    c_3 = 1/(4 pi), c_4 = 1/(2 pi^2).
    """
    if d < 3:
        raise DimensionTooSmall(f"need d >= 3, got {d}")
    return math.gamma(d / 2.0) / (2.0 * math.pi ** (d / 2.0))


def _h_amp(d: int) -> float:
    # amplitude of the fundamental solution H(x) = c_d/(d-2) |x|^(2-d)
    return c_d(d) / (d - 2)


# -----------------------------------------------------------------------------
# cutoff profiles
# -----------------------------------------------------------------------------

def cutoff_rbar(s):
    """Monotone C^2 cutoff: 0 on [0,1], 1 on [2,inf), quintic smoothstep between.

    r(1+t) = 6 t^5 - 15 t^4 + 10 t^3 on [0,1]; max slope 1.875 <= 2.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise NegativeArgument("cutoff argument must be >= 0")
    t = np.clip(s - 1.0, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def cutoff_rbar_prime(s):
    """Derivative of ``cutoff_rbar``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise NegativeArgument("cutoff argument must be >= 0")
    t = s - 1.0
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (t - 1.0) ** 2, 0.0)


def smooth_sign(r_sign, x1):
    """Odd C^1 regularization of sgn: +-1 outside [-r, r], (3u - u^3)/2 inside."""
    u = np.clip(np.asarray(x1, dtype=float) / r_sign, -1.0, 1.0)
    return 0.5 * u * (3.0 - u * u)


def smooth_sign_mismatch(r_sign, x1):
    """sgn(x1) - s_bar(x1): the energy-error weight of the whole-space route."""
    x1 = np.asarray(x1, dtype=float)
    return np.sign(x1) - smooth_sign(r_sign, x1)


def boundary_cutoff(domain: Domain, zeta, x):
    """r(dist(x, boundary)/zeta): 0 within zeta of the boundary, 1 beyond 2 zeta."""
    return cutoff_rbar(domain.signed_distance(x) / zeta)


def _boundary_cutoff_or_one(domain, zeta, x, kind):
    if kind == GreenKind.WHOLE_SPACE:
        return np.ones(np.asarray(x, dtype=float).shape[:-1])
    return boundary_cutoff(domain, zeta, x)


# -----------------------------------------------------------------------------
# Green functions (exact, image charges)
# -----------------------------------------------------------------------------

def _pair_separations(kind, domain, x, z):
    """Direct separation u = |x-z| and, for image kinds, the image separation.

    For the half-space the image separation is |x - z'| (mirror charge);
    for the ball it is the symmetric form s = sqrt(|x|^2|z|^2/R^2 - 2 x.z + R^2),
    which equals |z|/R times the distance to the Kelvin image point and is
    well defined down to z = 0.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    u = np.linalg.norm(x - z, axis=-1)
    if kind == GreenKind.WHOLE_SPACE:
        return u, None
    if kind == GreenKind.HALF_SPACE_IMAGE:
        diff = x - z
        s = np.sqrt(np.sum(diff[..., 1:] ** 2, axis=-1) + (x[..., 0] + z[..., 0]) ** 2)
        return u, s
    if kind == GreenKind.BALL_IMAGE:
        R = domain.radius
        s2 = (
            np.sum(x * x, axis=-1) * np.sum(z * z, axis=-1) / R**2
            - 2.0 * np.sum(x * z, axis=-1)
            + R**2
        )
        return u, np.sqrt(np.maximum(s2, 0.0))
    raise ValueError(f"unknown Green kind {kind!r}")


def green(kind, domain, x, z):
    """Green function G(x, z) of the chosen kind (no regularization).

    Symmetric in (x, z); nonnegative and vanishing on the boundary for the
    image kinds.  Raises CoincidentPoints at x = z.
    """
    d = domain.dim if domain is not None else np.asarray(x).shape[-1]
    u, s = _pair_separations(kind, domain, x, z)
    if np.any(u == 0.0):
        raise CoincidentPoints("green(x, z) requires x != z")
    h = _h_amp(d)
    g = h * u ** (2.0 - d)
    if s is not None:
        g = g - h * s ** (2.0 - d)
    return g


def grad_green(kind, domain, x, z):
    """Gradient of G with respect to x (no regularization)."""
    d = domain.dim if domain is not None else np.asarray(x).shape[-1]
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    u, s = _pair_separations(kind, domain, x, z)
    if np.any(u == 0.0):
        raise CoincidentPoints("grad_green(x, z) requires x != z")
    cd = c_d(d)
    g = -cd * u[..., None] ** (-float(d)) * (x - z)
    if kind == GreenKind.HALF_SPACE_IMAGE:
        zm = z.copy()
        zm[..., 0] = -zm[..., 0]
        g = g + cd * s[..., None] ** (-float(d)) * (x - zm)
    elif kind == GreenKind.BALL_IMAGE:
        R = domain.radius
        w = x * (np.sum(z * z, axis=-1) / R**2)[..., None] - z
        g = g + cd * s[..., None] ** (-float(d)) * w
    return g


def _cut_radial(d, delta, sep):
    """g(sep) = r(sep/delta) * H(sep) with the 0*inf at sep < delta removed."""
    sep = np.asarray(sep, dtype=float)
    live = sep > delta
    safe = np.where(live, sep, 1.0)
    return np.where(live, cutoff_rbar(safe / delta) * _h_amp(d) * safe ** (2.0 - d), 0.0)


def _cut_radial_prime(d, delta, sep):
    """d/dsep of the cut radial profile."""
    sep = np.asarray(sep, dtype=float)
    live = sep > delta
    safe = np.where(live, sep, 1.0)
    h = _h_amp(d)
    val = h * (
        cutoff_rbar_prime(safe / delta) / delta * safe ** (2.0 - d)
        + cutoff_rbar(safe / delta) * (2.0 - d) * safe ** (1.0 - d)
    )
    return np.where(live, val, 0.0)


def green_cut(kind, domain, params: RegularizationParams, x, z):
    """Short-range-cut Green function G^delta(x, z).

    Each kernel term is multiplied by r(separation/delta) with its own
    separation, so the direct term dies for |x-z| <= delta while a finite
    self-image interaction survives.  Total function (defined at x = z).
    """
    d = domain.dim if domain is not None else np.asarray(x).shape[-1]
    u, s = _pair_separations(kind, domain, x, z)
    g = _cut_radial(d, params.delta, u)
    if s is not None:
        g = g - _cut_radial(d, params.delta, s)
    return g


def grad_green_cut(kind, domain, delta, x, z):
    """Gradient with respect to x of the per-term-cut Green function."""
    d = domain.dim if domain is not None else np.asarray(x).shape[-1]
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    u, s = _pair_separations(kind, domain, x, z)
    gu = _cut_radial_prime(d, delta, u)
    safe_u = np.where(u > 0, u, 1.0)
    g = (gu / safe_u)[..., None] * (x - z)
    if kind == GreenKind.HALF_SPACE_IMAGE:
        zm = z.copy()
        zm[..., 0] = -zm[..., 0]
        gs = _cut_radial_prime(d, delta, s)
        g = g - (gs / s)[..., None] * (x - zm)
    elif kind == GreenKind.BALL_IMAGE:
        R = domain.radius
        gs = _cut_radial_prime(d, delta, s)
        w = x * (np.sum(z * z, axis=-1) / R**2)[..., None] - z
        g = g - (gs / s)[..., None] * w
    return g


# -----------------------------------------------------------------------------
# mollified whole-space kernel (Plummer softening)
# -----------------------------------------------------------------------------

def plummer_potential(d, eps, sep):
    """H_eps(sep) = c_d/(d-2) (sep^2 + eps^2)^((2-d)/2); H_eps(0) is finite."""
    sep = np.asarray(sep, dtype=float)
    return _h_amp(d) * (sep**2 + eps**2) ** ((2.0 - d) / 2.0)


def kernel_plummer(eps, dx):
    """Softened kernel K_eps(dx) = dx (|dx|^2 + eps^2)^(-d/2).

    Equals -grad H_eps / c_d; exactly antisymmetric, zero at dx = 0.
    """
    dx = np.asarray(dx, dtype=float)
    d = dx.shape[-1]
    r2 = np.sum(dx * dx, axis=-1, keepdims=True)
    return dx * (r2 + eps**2) ** (-d / 2.0)


def _sign_source(x1):
    # odd-density weight of a source: sgn with sgn(0) = 0 (plane carries none)
    return np.sign(np.asarray(x1, dtype=float))


def _sign_prefactor(x1):
    # hard-sign field prefactor; the boundary plane uses the upper branch
    return np.where(np.asarray(x1, dtype=float) < 0.0, -1.0, 1.0)


# -----------------------------------------------------------------------------
# field evaluation
# -----------------------------------------------------------------------------

def _chunks(n, size):
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


_CHUNK_TARGETS = 256


def _source_arrays(ens):
    w = ens.w * ens.alive
    return ens.x, w


def field_halfspace_A(ens, params: RegularizationParams, x):
    """Half-space field of Problem A: softened kernel against the odd-reflected density.

    E(x) = c_d sum_j w_j [K_eps(x - x_j) - K_eps(x - x_j')], where x' flips
    the first coordinate.  Tangential components vanish on the boundary
    plane by the image antisymmetry.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    src, w = _source_arrays(ens)
    d = src.shape[-1]
    cd = c_d(d)
    eps = params.eps_mollify
    src_m = src.copy()
    src_m[:, 0] = -src_m[:, 0]
    out = np.zeros_like(x)
    for lo, hi in _chunks(x.shape[0], _CHUNK_TARGETS):
        t = x[lo:hi, None, :]
        contrib = kernel_plummer(eps, t - src[None, :, :]) - kernel_plummer(
            eps, t - src_m[None, :, :]
        )
        out[lo:hi] = cd * np.sum(w[None, :, None] * contrib, axis=1)
    return out


def field_problem_b(ens, params: RegularizationParams, x, hard_sign=False):
    """Whole-space field of Problem B from a symmetrized ensemble.

    E(x) = pref(x_1) * c_d sum_j sgn(x_j1) w_j K_eps(x - x_j), with pref the
    smoothed sign (the regularized problem) or the hard sign (the limit
    problem; used by the fold backend, where it makes the folded flow agree
    with the event-driven half-space flow exactly).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    src, w = _source_arrays(ens)
    d = src.shape[-1]
    cd = c_d(d)
    eps = params.eps_mollify
    wo = _sign_source(src[:, 0]) * w
    out = np.zeros_like(x)
    for lo, hi in _chunks(x.shape[0], _CHUNK_TARGETS):
        t = x[lo:hi, None, :]
        contrib = kernel_plummer(eps, t - src[None, :, :])
        out[lo:hi] = cd * np.sum(wo[None, :, None] * contrib, axis=1)
    if hard_sign:
        pref = _sign_prefactor(x[:, 0])
    else:
        pref = smooth_sign(params.r_sign, x[:, 0])
    return pref[:, None] * out


def _field_domain_route(domain, kind, ens, params, x):
    """Domain-route field: -r^zeta(x) * sum_j w_j grad_x G^delta(x, x_j)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    src, w = _source_arrays(ens)
    out = np.zeros_like(x)
    for lo, hi in _chunks(x.shape[0], _CHUNK_TARGETS):
        t = x[lo:hi, None, :]
        g = grad_green_cut(kind, domain, params.delta, t, src[None, :, :])
        out[lo:hi] = -np.sum(w[None, :, None] * g, axis=1)
    rz = _boundary_cutoff_or_one(domain, params.zeta, x, kind)
    return rz[:, None] * out


def field_regularized(domain, kind, ens, params: RegularizationParams, x):
    """Regularized self-consistent field at positions x.

    Dispatch: a ProblemB-framed ensemble with the whole-space kind uses the
    smooth-sign mollified route; everything else uses the domain route
    (cut Green gradient with the boundary cutoff; for the whole-space kind
    there is no image term and the boundary cutoff is identically 1).
    """
    if kind == GreenKind.WHOLE_SPACE and getattr(ens.frame, "name", "") == "PROBLEM_B":
        return field_problem_b(ens, params, x)
    if kind != GreenKind.WHOLE_SPACE:
        params.validate_for_domain(domain)
    return _field_domain_route(domain, kind, ens, params, x)


def field_batch(domain, kind, ens, params: RegularizationParams, targets=None, workers=1):
    """Field at every particle position (or explicit targets).

    The direct diagonal term vanishes on its own: the delta-cutoff kills it
    on the domain route, and K_eps(0) = 0 on the mollified route.  Summation
    order per target is fixed (ascending source index), so the result is
    independent of chunking and of ``workers``, which only sizes the chunks.
    """
    x = ens.x if targets is None else np.atleast_2d(np.asarray(targets, dtype=float))
    if workers and workers > 1:
        # scheduling-only knob: chunk the target range; per-target sums are
        # row-local so the split cannot change any result bit
        out = np.empty_like(x)
        size = max(1, -(-x.shape[0] // int(workers)))
        for lo, hi in _chunks(x.shape[0], size):
            out[lo:hi] = field_regularized(domain, kind, ens, params, x[lo:hi])
        return out
    return field_regularized(domain, kind, ens, params, x)


def make_field_factory(domain, kind, params: RegularizationParams, hard_sign=False, workers=1):
    """Factory: snapshot ensemble -> batch field closure over positions."""

    def factory(ens):
        if hard_sign:
            def field_fn(x):
                return field_problem_b(ens, params, x, hard_sign=True)

            field_fn.plane_split = True  # discontinuous across {x_1 = 0}
        else:
            def field_fn(x):
                return field_batch(domain, kind, ens, params, targets=x, workers=workers)
        return field_fn

    return factory


# -----------------------------------------------------------------------------
# interaction energy (double sums; used by ensemble.potential_energy)
# -----------------------------------------------------------------------------

def interaction_energy(ens, kind, domain, params: RegularizationParams):
    """Double sum sum_{i,j} w_i w_j G^delta(x_i, x_j), all pairs including i = j.

    The delta-cutoff removes the singular direct self-term while keeping the
    finite self-image term, so this is the potential energy whose gradient
    is the domain-route force.  ProblemB-framed ensembles with the
    whole-space kind instead use the mollified kernel against the odd
    density (signed weights), matching the smooth-sign force.
    """
    src, w = _source_arrays(ens)
    d = src.shape[-1]
    if kind == GreenKind.WHOLE_SPACE and getattr(ens.frame, "name", "") == "PROBLEM_B":
        wo = _sign_source(src[:, 0]) * w
        total = 0.0
        for lo, hi in _chunks(src.shape[0], _CHUNK_TARGETS):
            sep = np.linalg.norm(src[lo:hi, None, :] - src[None, :, :], axis=-1)
            h = plummer_potential(d, params.eps_mollify, sep)
            total += float(np.sum(wo[lo:hi, None] * wo[None, :] * h))
        return total
    total = 0.0
    for lo, hi in _chunks(src.shape[0], _CHUNK_TARGETS):
        g = green_cut(kind, domain, params, src[lo:hi, None, :], src[None, :, :])
        total += float(np.sum(w[lo:hi, None] * w[None, :] * g))
    return total
