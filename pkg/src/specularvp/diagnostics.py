"""Diagnostics: every quantitative identity the scheme is supposed to satisfy.

All diagnostics are pure folds over recorded run data (snapshots, events,
trajectories); nothing here mutates a run.

Conventions worth pinning down once:

* The energy ledger tracks  total(t) - total(0) - int_0^t K  where
  K = 2 sum_i w_i (1 - rbar^zeta(x_i)) v_i . S_i  and  S_i is the *uncut-
  by-zeta* gradient sum  sum_j w_j grad_x G^delta(x_i, x_j)  (equivalently
  minus the field before the boundary cutoff).  A naive implementation
  using the cut field gives identically zero.
* K jumps when a particle reflects (v flips against a nonzero S), so the
  trapezoid K-integral carries an event correction  J h (1/2 - theta)  per
  event; without it the ledger loses an order of accuracy at bounces.
* The whole-space (Problem B) route replaces (1 - rbar^zeta) S by
  (sgn - sbar)(x_1) times the mollified-kernel sum against the odd density.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ensemble import Ensemble, Frame, kinetic_energy, potential_energy
from .fields import (
    GreenKind,
    boundary_cutoff,
    c_d,
    grad_green,
    grad_green_cut,
    green,
    kernel_plummer,
    smooth_sign,
)
from .flow import RunRecord, Trajectory

__all__ = [
    "EnergyLedger",
    "SeparationProbe",
    "GridMismatch",
    "PairMismatch",
    "StencilReflected",
    "SupportViolation",
    "k_tau",
    "energy_audit",
    "energy_bound_check",
    "make_separation_probe",
    "phi_functional",
    "phi_series",
    "phi_growth_check",
    "SeparableBump",
    "bump_library",
    "weakform_residual",
    "incompressibility_probe",
    "blowup_monitor",
    "audit_green",
    "write_ledger_csv",
    "write_phi_csv",
    "write_residual_jsonl",
]


class GridMismatch(ValueError):
    """Run was not recorded densely enough for this diagnostic."""


class PairMismatch(ValueError):
    """Separation probe families are not aligned."""


class StencilReflected(RuntimeError):
    """A tracer of the incompressibility stencil hit the boundary."""


class SupportViolation(ValueError):
    """Test function fails the grazing/initial-corner support exclusion."""


# -----------------------------------------------------------------------------
# energy ledger
# -----------------------------------------------------------------------------

def _uncut_gradient_sum(e: Ensemble, kind, domain, params, at=None):
    """S_i = sum_j w_j grad_x G^delta(x_i, x_j) (no boundary cutoff)."""
    x = e.x if at is None else np.atleast_2d(at)
    w = e.w * e.alive
    out = np.zeros_like(x)
    for lo in range(0, x.shape[0], 256):
        hi = min(lo + 256, x.shape[0])
        g = grad_green_cut(kind, domain, params.delta, x[lo:hi, None, :], e.x[None, :, :])
        out[lo:hi] = np.sum(w[None, :, None] * g, axis=1)
    return out


def _odd_kernel_sum(e: Ensemble, params, at=None):
    """[grad H_eps * rho_odd](x_i) = -c_d sum_j sgn(x_j1) w_j K_eps(x_i - x_j)."""
    x = e.x if at is None else np.atleast_2d(at)
    w = np.sign(e.x[:, 0]) * e.w * e.alive
    cd = c_d(e.dim)
    out = np.zeros_like(x)
    for lo in range(0, x.shape[0], 256):
        hi = min(lo + 256, x.shape[0])
        k = kernel_plummer(params.eps_mollify, x[lo:hi, None, :] - e.x[None, :, :])
        out[lo:hi] = -cd * np.sum(w[None, :, None] * k, axis=1)
    return out


def k_tau(e: Ensemble, params, kind, hard_sign=False) -> float:
    """Instantaneous energy-error power K of the regularized system.

    Domain route:   K = 2 sum_i w_i (1 - rbar^zeta(x_i)) v_i . S_i,
    vanishing as soon as every particle sits beyond 2 zeta of the boundary
    (and identically for the plain whole-space kind).

    Problem B route: K = 2 sum_i w_i (sgn - sbar)(x_i1) v_i . T_i with T_i
    the mollified-kernel sum against the odd density, vanishing when no
    particle sits within the smoothed-sign strip.  A hard-sign run has no
    sign mismatch at all: its K is identically zero.
    """
    w = e.w * e.alive
    if e.frame is Frame.PROBLEM_B and kind == GreenKind.WHOLE_SPACE:
        if hard_sign:
            return 0.0
        mismatch = np.sign(e.x[:, 0]) - smooth_sign(params.r_sign, e.x[:, 0])
        if not np.any(mismatch):
            return 0.0
        t_sum = _odd_kernel_sum(e, params)
        return 2.0 * float(np.sum(w * mismatch * np.sum(e.v * t_sum, axis=1)))
    if kind == GreenKind.WHOLE_SPACE:
        return 0.0
    one_minus = 1.0 - boundary_cutoff(e.domain, params.zeta, e.x)
    if not np.any(one_minus):
        return 0.0
    s_sum = _uncut_gradient_sum(e, kind, e.domain, params)
    return 2.0 * float(np.sum(w * one_minus * np.sum(e.v * s_sum, axis=1)))


@dataclass
class EnergyLedger:
    """Kinetic/potential/total series plus the accumulated K-integral.

    drift = total(t) - total(0) - int_0^t K; drift[0] == 0 by construction.
    """

    times: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    total: np.ndarray
    k_tau: np.ndarray
    k_integral: np.ndarray
    drift: np.ndarray

    @property
    def max_abs_drift(self) -> float:
        return float(np.max(np.abs(self.drift)))


def _event_corrections(run: RunRecord, params, kind, domain, times):
    """Trapezoid corrections J h (1/2 - theta) from the recorded bounces.

    K jumps by J = 2 w_i (1 - rbar^zeta)(x*) (v_plus - v_minus) . S_i(x*)
    at a reflection; sources are taken from the snapshot entering the step
    (an O(dt) approximation of an O(dt) term).
    """
    corr = np.zeros(len(times))
    if kind == GreenKind.WHOLE_SPACE:
        return corr
    for ev in run.events:
        k = int(np.searchsorted(times, ev.t) - 1)
        if k < 0 or k + 1 >= len(times):
            continue
        e_snap = run.snapshots[k][1]
        s_at = _uncut_gradient_sum(e_snap, kind, domain, params, at=ev.x)[0]
        one_minus = 1.0 - float(boundary_cutoff(domain, params.zeta, ev.x[None, :])[0])
        jump = (
            2.0 * e_snap.w[ev.particle] * one_minus
            * float(np.dot(ev.v_plus - ev.v_minus, s_at))
        )
        h = times[k + 1] - times[k]
        theta = (ev.t - times[k]) / h
        corr[k + 1] += jump * h * (0.5 - theta)
    return corr


def energy_audit(run: RunRecord, params=None, kind=None, event_correction=True) -> EnergyLedger:
    """Recompute the energy ledger from a run's snapshots.

    Requires one snapshot per step (GridMismatch otherwise); params/kind
    default to the values the run was made with.
    """
    if run.snapshot_every != 1:
        raise GridMismatch("energy audit needs one snapshot per step")
    params = params if params is not None else run.meta.get("params")
    kind = kind if kind is not None else run.meta.get("kind")
    if params is None or kind is None:
        raise ValueError("params and kind must be given or recorded in run.meta")
    domain = run.snapshots[0][1].domain

    hard_sign = bool(run.meta.get("hard_sign", False))
    times = np.array([t for t, _ in run.snapshots])
    ke = np.array([kinetic_energy(s) for _, s in run.snapshots])
    pe = np.array([potential_energy(s, kind, params) for _, s in run.snapshots])
    kt = np.array([k_tau(s, params, kind, hard_sign=hard_sign) for _, s in run.snapshots])
    total = ke + pe
    k_int = np.concatenate([[0.0], np.cumsum(0.5 * (kt[1:] + kt[:-1]) * np.diff(times))])
    if event_correction and run.events:
        k_int = k_int + np.cumsum(_event_corrections(run, params, kind, domain, times))
    drift = total - total[0] - k_int
    return EnergyLedger(times, ke, pe, total, kt, k_int, drift)


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    min_margin: float
    margins: np.ndarray


def energy_bound_check(ledger: EnergyLedger, tol=1e-4, tol_abs=0.0) -> BoundCheck:
    """total(t) <= total(0) (1 + tol) + |int K|(t) + tol_abs, for all t."""
    if len(ledger.times) == 0:
        raise ValueError("empty ledger")
    bound = ledger.total[0] * (1.0 + tol) + np.abs(ledger.k_integral) + tol_abs
    margins = bound - ledger.total
    return BoundCheck(bool(np.all(margins >= 0.0)), float(np.min(margins)), margins)


# -----------------------------------------------------------------------------
# trajectory-separation functional (uniqueness monitor)
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparationProbe:
    """Paired base/perturbed trajectory families sharing initial pairing.

    delta and zeta are the functional's own parameters (both in (0, 1)),
    unrelated to the field regularization knobs.
    """

    times: np.ndarray
    x_base: np.ndarray
    v_base: np.ndarray
    x_pert: np.ndarray
    v_pert: np.ndarray
    w: np.ndarray
    delta: float
    zeta: float

    def __post_init__(self):
        if not (0 < self.delta < 1 and 0 < self.zeta < 1):
            raise ValueError("delta and zeta must lie in (0, 1)")


def make_separation_probe(run_base: RunRecord, run_pert: RunRecord,
                          delta, zeta) -> SeparationProbe:
    """Pair two runs by particle id; raises PairMismatch on misalignment."""
    if run_base.traj_x is None or run_pert.traj_x is None:
        raise PairMismatch("both runs need store_trajectories=True")
    if run_base.traj_x.shape != run_pert.traj_x.shape:
        raise PairMismatch("trajectory families differ in shape")
    if not np.allclose(run_base.traj_times, run_pert.traj_times, rtol=0, atol=1e-12):
        raise PairMismatch("trajectory families differ in time grid")
    w_b = run_base.snapshots[0][1].w
    w_p = run_pert.snapshots[0][1].w
    if not np.array_equal(w_b, w_p):
        raise PairMismatch("trajectory families differ in weights")
    return SeparationProbe(
        times=run_base.traj_times,
        x_base=run_base.traj_x,
        v_base=run_base.traj_v,
        x_pert=run_pert.traj_x,
        v_pert=run_pert.traj_v,
        w=w_b,
        delta=delta,
        zeta=zeta,
    )


def phi_series(probe: SeparationProbe):
    """Phi(t) on the probe's whole grid: weighted mean log separation."""
    dx = np.linalg.norm(probe.x_base - probe.x_pert, axis=2)
    dv = np.linalg.norm(probe.v_base - probe.v_pert, axis=2)
    logs = np.log1p(dx / (probe.zeta * probe.delta) + dv / probe.delta)
    return np.sum(probe.w[None, :] * logs, axis=1) / np.sum(probe.w)


def phi_functional(probe: SeparationProbe, t) -> float:
    """Phi at one sample time (must lie on the probe grid)."""
    idx = np.flatnonzero(np.isclose(probe.times, t, rtol=0, atol=1e-12))
    if len(idx) != 1:
        raise PairMismatch(f"t={t} is not a probe sample time")
    return float(phi_series(probe)[idx[0]])


@dataclass(frozen=True)
class PhiGrowthReport:
    max_slope: float
    bound_shape: float     # 1/zeta + zeta + zeta log(1/(zeta delta)), C not asserted
    fitted_c: float
    slopes: np.ndarray


def phi_growth_check(probe: SeparationProbe, window=None) -> PhiGrowthReport:
    """Max finite-difference dPhi/dt against the theoretical bound shape.

    The constant in front of the bound is fitted, never asserted; callers
    compare fitted constants across refinements.
    """
    times = probe.times
    if len(times) < 2 or np.max(np.diff(times)) > 0.1 + 1e-12:
        raise ValueError("phi series must be sampled with at least 10 points per unit time")
    series = phi_series(probe)
    if window is not None:
        mask = (times >= window[0]) & (times <= window[1])
        times, series = times[mask], series[mask]
    slopes = np.diff(series) / np.diff(times)
    max_slope = float(np.max(slopes)) if len(slopes) else 0.0
    shape = (
        1.0 / probe.zeta
        + probe.zeta
        + probe.zeta * np.log(1.0 / (probe.zeta * probe.delta))
    )
    return PhiGrowthReport(max_slope, float(shape), max_slope / shape, slopes)


# -----------------------------------------------------------------------------
# weak-form residual
# -----------------------------------------------------------------------------

def _bump(s):
    # C^2 compactly supported profile on [0, 1)
    out = np.where(s < 1.0, (1.0 - np.minimum(s, 1.0) ** 2) ** 3, 0.0)
    return out


def _bump_ratio(s):
    # b'(s)/s, finite at s = 0
    return np.where(s < 1.0, -6.0 * (1.0 - np.minimum(s, 1.0) ** 2) ** 2, 0.0)


class SeparableBump:
    """Test function psi1(t) psi2(x) psi3(v) from C^2 radial bumps.

    psi3 carries an even C^1 factor q(v_1) that vanishes on
    |v_1| <= graze_cut and saturates at 2*graze_cut, honoring the exclusion
    of grazing boundary velocities; psi1 is supported away from t = 0, so
    the initial-corner exclusion holds automatically.

    All evaluators broadcast: t of shape S with x, v of shape (S, d) give
    shape-S values and (S, d) gradients (``supports_batch``).
    """

    supports_batch = True

    def __init__(self, t_center, t_radius, x_center, x_radius,
                 v_center, v_radius, graze_cut=0.0, amplitude=1.0):
        self.t_center = float(t_center)
        self.t_radius = float(t_radius)
        self.x_center = np.asarray(x_center, dtype=float)
        self.x_radius = float(x_radius)
        self.v_center = np.asarray(v_center, dtype=float)
        self.v_radius = float(v_radius)
        self.graze_cut = float(graze_cut)
        self.amplitude = float(amplitude)
        self.t0_margin = max(self.t_center - self.t_radius, 0.0)

    def _parts(self, t, x, v):
        st = np.abs(np.asarray(t, dtype=float) - self.t_center) / self.t_radius
        ux = np.linalg.norm(x - self.x_center, axis=-1) / self.x_radius
        uv = np.linalg.norm(v - self.v_center, axis=-1) / self.v_radius
        return st, ux, uv

    def _q(self, v1):
        if self.graze_cut == 0.0:
            return np.ones_like(np.asarray(v1, dtype=float)), 0.0
        u = np.clip((np.abs(v1) - self.graze_cut) / self.graze_cut, 0.0, 1.0)
        q = u * u * (3.0 - 2.0 * u)
        dq = 6.0 * u * (1.0 - u) / self.graze_cut * np.sign(v1)
        return q, dq

    def value(self, t, x, v):
        st, ux, uv = self._parts(t, x, v)
        q, _ = self._q(np.asarray(v, dtype=float)[..., 0])
        return self.amplitude * _bump(st) * _bump(ux) * _bump(uv) * q

    def grad_t(self, t, x, v):
        st, ux, uv = self._parts(t, x, v)
        q, _ = self._q(np.asarray(v, dtype=float)[..., 0])
        db = _bump_ratio(st) * (np.asarray(t, dtype=float) - self.t_center) / self.t_radius**2
        return self.amplitude * db * _bump(ux) * _bump(uv) * q

    def grad_x(self, t, x, v):
        st, ux, uv = self._parts(t, x, v)
        q, _ = self._q(np.asarray(v, dtype=float)[..., 0])
        db = _bump_ratio(ux)[..., None] / self.x_radius**2 * (x - self.x_center)
        return self.amplitude * (_bump(st) * _bump(uv) * q)[..., None] * db

    def grad_v(self, t, x, v):
        st, ux, uv = self._parts(t, x, v)
        v = np.asarray(v, dtype=float)
        q, dq = self._q(v[..., 0])
        db = _bump_ratio(uv)[..., None] / self.v_radius**2 * (v - self.v_center)
        out = self.amplitude * (_bump(st) * _bump(ux) * q)[..., None] * db
        out[..., 0] += self.amplitude * _bump(st) * _bump(ux) * _bump(uv) * dq
        return out


def bump_library(d=3, t_span=(0.05, 1.0), speed=1.0, length=1.0, graze_cut=0.05):
    """The fixed test-function library used by the residual acceptance runs.

    Separable bumps with varied centers and radii; every member vanishes
    for |v_1| below 2*graze_cut*speed (grazing exclusion) and is supported
    away from t = 0 (initial-corner exclusion).
    """
    t0, t1 = t_span
    tc = 0.5 * (t0 + t1)
    tr = 0.6 * (t1 - t0)
    gc = graze_cut * speed

    def vec(first, rest=0.0):
        out = np.full(d, rest, dtype=float)
        out[0] = first
        return out

    lib = [
        SeparableBump(tc, tr, vec(0.5 * length), 1.5 * length,
                      vec(0.8 * speed), 2.0 * speed, graze_cut=gc),
        SeparableBump(tc, tr, vec(0.5 * length), 1.5 * length,
                      vec(-0.8 * speed), 2.0 * speed, graze_cut=gc),
        SeparableBump(0.8 * tc, 0.8 * tr, vec(1.0 * length, 0.2 * length), 2.0 * length,
                      vec(0.0), 2.5 * speed, graze_cut=gc, amplitude=0.7),
        SeparableBump(1.2 * tc, 0.7 * tr, vec(0.3 * length), 1.0 * length,
                      vec(0.5 * speed, -0.3 * speed), 1.8 * speed, graze_cut=gc,
                      amplitude=1.3),
        SeparableBump(tc, 0.9 * tr, vec(0.8 * length, -0.4 * length), 2.5 * length,
                      vec(-0.5 * speed, 0.4 * speed), 2.2 * speed, graze_cut=gc,
                      amplitude=0.9),
    ]
    return lib


def _support_ok(phi, domain, t, x, v, value):
    """Admissibility at one sample: phi vanishes on the grazing set and at
    the initial boundary corner."""
    if value == 0.0 or domain is None:
        return True
    if float(domain.signed_distance(x)) > 1e-9 * domain.scale:
        return True
    if t <= 1e-12:
        return False
    n = domain.inward_normal(domain.project_boundary(x))
    vn = abs(float(np.dot(v, n)))
    threshold = max(getattr(phi, "graze_cut", 0.0), 1e-12 * float(np.linalg.norm(v)))
    return vn >= threshold


def weakform_residual(traj: Trajectory, phi, domain=None) -> float:
    """Residual of the renormalized transport identity along one trajectory.

    residual = phi(T, Z_T) - phi(0, Z_0)
               - int_0^T (d_t phi + v . grad_x phi + E . grad_v phi)(Z_t) dt
               - sum_events [phi(t*, x*, v_plus) - phi(t*, x*, v_minus)]

    The time quadrature is trapezoid over the recorded samples, subdivided
    at event times with one-sided velocity values, so the residual shrinks
    at second order under dt refinement.  The event sum is the Lagrangian
    face of the boundary-trace pairing of phi(x, v) with phi(x, R_x v).
    Raises SupportViolation if phi is nonzero at a grazing boundary sample.
    """
    nodes = [(float(t), traj.x[k], traj.v[k], traj.e_field[k])
             for k, t in enumerate(traj.times)]
    for ev, ef in zip(traj.events, traj.event_fields):
        nodes.append((float(ev.t), ev.x, ev.v_minus, ef))
        nodes.append((float(ev.t) + 0.0, ev.x, ev.v_plus, ef))
    # stable sort keeps the minus node before the plus node at equal times
    nodes.sort(key=lambda nd: nd[0])

    tt = np.array([nd[0] for nd in nodes])
    if getattr(phi, "supports_batch", False):
        xx = np.array([nd[1] for nd in nodes])
        vv = np.array([nd[2] for nd in nodes])
        ee = np.array([nd[3] for nd in nodes])
        vals = phi.value(tt, xx, vv)
        if domain is not None:
            live = np.flatnonzero(vals != 0.0)
            near = live[domain.signed_distance(xx[live]) <= 1e-9 * domain.scale]
            for k in near:
                if not _support_ok(phi, domain, tt[k], xx[k], vv[k], float(vals[k])):
                    raise SupportViolation(
                        "test function violates the grazing-set exclusion")
        g = (
            phi.grad_t(tt, xx, vv)
            + np.sum(vv * phi.grad_x(tt, xx, vv), axis=-1)
            + np.sum(ee * phi.grad_v(tt, xx, vv), axis=-1)
        )
    else:
        g = np.empty(len(nodes))
        for k, (t, x, v, e_val) in enumerate(nodes):
            val = phi.value(t, x, v)
            if not _support_ok(phi, domain, t, x, v, val):
                raise SupportViolation(
                    "test function violates the grazing-set exclusion")
            g[k] = (
                phi.grad_t(t, x, v)
                + float(np.dot(v, phi.grad_x(t, x, v)))
                + float(np.dot(e_val, phi.grad_v(t, x, v)))
            )
    integral = float(np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(tt)))

    jumps = sum(
        phi.value(ev.t, ev.x, ev.v_plus) - phi.value(ev.t, ev.x, ev.v_minus)
        for ev in traj.events
    )
    t0, tN = float(traj.times[0]), float(traj.times[-1])
    boundary_term = (
        phi.value(tN, traj.x[-1], traj.v[-1]) - phi.value(t0, traj.x[0], traj.v[0])
    )
    return boundary_term - integral - jumps


# -----------------------------------------------------------------------------
# incompressibility probe
# -----------------------------------------------------------------------------

def _run_field_schedule(run: RunRecord, params, kind):
    """Per-step frozen field closures reconstructed from the snapshots."""
    if run.snapshot_every != 1:
        raise GridMismatch("incompressibility probe needs one snapshot per step")
    from .fields import field_problem_b, field_regularized

    domain = run.snapshots[0][1].domain

    def field_at(step_index):
        e = run.snapshots[min(step_index, len(run.snapshots) - 1)][1]
        if e.frame is Frame.PROBLEM_B and kind == GreenKind.WHOLE_SPACE:
            return lambda x: field_problem_b(e, params, x)
        return lambda x: field_regularized(domain, kind, e, params, x)

    return field_at, domain


def incompressibility_probe(run: RunRecord, seed_point, h=1e-5, t_end=1.0,
                            dt=1e-3, params=None, kind=None) -> float:
    """|det J - 1| of the finite-difference flow-map Jacobian at one point.

    A stencil of 4d+1 passive tracers (center and +-h along every phase
    coordinate) rides the run's recorded per-step frozen fields; any tracer
    reaching the boundary raises StencilReflected (the map is not smooth
    across events, so the stencil must stay reflection-free).
    """
    params = params if params is not None else run.meta.get("params")
    kind = kind if kind is not None else run.meta.get("kind")
    field_at, domain = _run_field_schedule(run, params, kind)

    z0 = np.asarray(seed_point, dtype=float)
    d = z0.size // 2
    stencil = [z0.copy()]
    for j in range(2 * d):
        for s in (+1.0, -1.0):
            z = z0.copy()
            z[j] += s * h
            stencil.append(z)
    z = np.array(stencil)
    x, v = z[:, :d].copy(), z[:, d:].copy()

    n_steps = int(round(t_end / dt))
    steps_per_field = run.dt / dt
    for k in range(n_steps):
        field_fn = field_at(int(k / steps_per_field) if steps_per_field >= 1 else k)
        e0 = field_fn(x)
        v_half = v + 0.5 * dt * e0
        x_new = x + dt * v_half
        if domain is not None and np.any(domain.signed_distance(x_new) < 0.0):
            raise StencilReflected("tracer stencil reached the boundary")
        v = v_half + 0.5 * dt * field_fn(x_new)
        x = x_new

    z_end = np.concatenate([x, v], axis=1)
    jac = np.empty((2 * d, 2 * d))
    for j in range(2 * d):
        jac[:, j] = (z_end[1 + 2 * j] - z_end[2 + 2 * j]) / (2.0 * h)
    return float(abs(np.linalg.det(jac) - 1.0))


# -----------------------------------------------------------------------------
# blow-up monitor
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupReport:
    times: np.ndarray
    loglog_moment: np.ndarray
    total_variation: float
    integrand_bound: np.ndarray


def blowup_monitor(run: RunRecord, params=None, kind=None) -> BlowupReport:
    """Per-sample sum_i w_i loglog(2 + |Z_i|) and its drive-term bound.

    The moment's total variation staying finite under refinement is the
    discrete face of trajectories not blowing up in finite time; the bound
    series integrates |b(Z)| / ((1 + |Z|) log(2 + |Z|)).
    """
    params = params if params is not None else run.meta.get("params")
    kind = kind if kind is not None else run.meta.get("kind")
    from .fields import field_problem_b, field_regularized

    times = np.array([t for t, _ in run.snapshots])
    moment = np.empty(len(times))
    bound = np.empty(len(times))
    for k, (_, e) in enumerate(run.snapshots):
        znorm = np.sqrt(np.sum(e.x**2, axis=1) + np.sum(e.v**2, axis=1))
        w = e.w * e.alive
        moment[k] = float(np.sum(w * np.log(np.log(2.0 + znorm))))
        if e.frame is Frame.PROBLEM_B and kind == GreenKind.WHOLE_SPACE:
            e_val = field_problem_b(e, params, e.x)
        else:
            e_val = field_regularized(e.domain, kind, e, params, e.x)
        bnorm = np.sqrt(np.sum(e.v**2, axis=1) + np.sum(e_val**2, axis=1))
        bound[k] = float(np.sum(w * bnorm / ((1.0 + znorm) * np.log(2.0 + znorm))))
    tv = float(np.sum(np.abs(np.diff(moment))))
    return BlowupReport(times, moment, tv, bound)


# -----------------------------------------------------------------------------
# Green-function bound audit
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class GreenAudit:
    passed: bool
    max_value_ratio: float
    max_gradient_ratio: float
    max_boundary_potential: float
    pairs: int


def _random_interior(rng, domain, n):
    from .geometry import Ball

    d = domain.dim
    if isinstance(domain, Ball):
        out = np.empty((n, d))
        have = 0
        while have < n:
            cand = domain.radius * (2.0 * rng.random((n - have, d)) - 1.0)
            cand = cand[np.linalg.norm(cand, axis=1) < domain.radius * 0.999]
            out[have : have + len(cand)] = cand
            have += len(cand)
        return out
    out = rng.random((n, d)) * 2.0 - 1.0
    out[:, 0] = rng.random(n) * 2.0 + 1e-6
    return out


def _random_boundary(rng, domain, n):
    from .geometry import Ball

    d = domain.dim
    if isinstance(domain, Ball):
        u = rng.standard_normal((n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return domain.radius * u
    out = rng.random((n, d)) * 2.0 - 1.0
    out[:, 0] = 0.0
    return out


def audit_green(domain, kind, n_pairs=10_000, seed=0, n_boundary=100,
                n_sources=32) -> GreenAudit:
    """Audit the pointwise Green bounds and the grounded-boundary property.

    Bounds checked on random interior pairs:
      0 <= G <= C_v |x-z|^(2-d)      with C_v = 2 c_d / (d-2),
      |grad_x G| <= C_g |x-z|^(1-d)  with C_g = 2 c_d
    (the two constants agree at d = 3; the gradient bound needs the larger
    one in higher dimension).  The boundary check evaluates the potential
    of a random ensemble at boundary points, relative to the direct-kernel
    scale.
    """
    rng = np.random.default_rng(seed)
    d = domain.dim
    cv = 2.0 * c_d(d) / (d - 2)
    cg = 2.0 * c_d(d)

    x = _random_interior(rng, domain, n_pairs)
    z = _random_interior(rng, domain, n_pairs)
    sep = np.linalg.norm(x - z, axis=1)
    ok = sep > 1e-12 * domain.scale
    x, z, sep = x[ok], z[ok], sep[ok]
    g = green(kind, domain, x, z)
    gg = np.linalg.norm(grad_green(kind, domain, x, z), axis=1)
    vr = float(np.max(g / (cv * sep ** (2.0 - d))))
    gr = float(np.max(gg / (cg * sep ** (1.0 - d))))
    nonneg = bool(np.min(g) >= -1e-15 * np.max(np.abs(g)))

    src = _random_interior(rng, domain, n_sources)
    w = rng.random(n_sources)
    xb = _random_boundary(rng, domain, n_boundary)
    pot = np.sum(w[None, :] * green(kind, domain, xb[:, None, :], src[None, :, :]), axis=1)
    typical = np.sum(
        w[None, :]
        * (c_d(d) / (d - 2))
        * np.linalg.norm(xb[:, None, :] - src[None, :, :], axis=-1) ** (2.0 - d),
        axis=1,
    )
    br = float(np.max(np.abs(pot) / typical))

    passed = nonneg and vr <= 1.0 and gr <= 1.0 and br < 1e-10
    return GreenAudit(passed, vr, gr, br, int(len(sep)))


# -----------------------------------------------------------------------------
# writers (diff-friendly, deterministic)
# -----------------------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def write_ledger_csv(ledger: EnergyLedger, path):
    lines = ["t,kinetic,potential,total,K_integral,drift"]
    for k in range(len(ledger.times)):
        lines.append(",".join(_fmt(c[k]) for c in (
            ledger.times, ledger.kinetic, ledger.potential,
            ledger.total, ledger.k_integral, ledger.drift,
        )))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_ledger_csv(path) -> EnergyLedger:
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    kt = np.zeros(len(data))
    return EnergyLedger(
        times=np.asarray(data["t"], dtype=float),
        kinetic=np.asarray(data["kinetic"], dtype=float),
        potential=np.asarray(data["potential"], dtype=float),
        total=np.asarray(data["total"], dtype=float),
        k_tau=kt,
        k_integral=np.asarray(data["K_integral"], dtype=float),
        drift=np.asarray(data["drift"], dtype=float),
    )


def write_phi_csv(probe: SeparationProbe, path):
    series = phi_series(probe)
    slopes = np.concatenate([[0.0], np.diff(series) / np.diff(probe.times)])
    lines = ["t,phi,slope"]
    for t, p, s in zip(probe.times, series, slopes):
        lines.append(f"{_fmt(t)},{_fmt(p)},{_fmt(s)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_residual_jsonl(records, path):
    """One JSON record per (trajectory, test function) residual."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
