"""Configuration parsing, run orchestration, and deterministic artifacts.

Config grammar (strict): ``[section]`` headers and ``key = value`` lines;
``#`` starts a comment; unknown sections or keys are errors.  Sections:

    [domain]          kind = halfspace | ball; dim = 3; radius = 1.0
    [field]           kind = whole_space | halfspace_image | ball_image |
                             halfspace_mollified
    [regularization]  eps_mollify, r_sign, zeta, delta
    [initial]         type = uniform_box | maxwellian | delta | explicit
                      n, mass, seed, and the sampler's own keys
                      (x_min/x_max/v_min/v_max as comma vectors,
                      temperature, v_center, x0, v0)
    [particles]       0 = x..., v..., w   (rows of an explicit list)
    [stepper]         dt, t_end, backend = event | fold,
                      max_reflections, frozen_field
    [output]          cadence_snapshot, cadence_ledger, store_trajectories
    [picard]          t0, n_max, tol, w1

A run emits snapshots.csv (t, id, x[0..d), v[0..d), w), events.csv
(t, id, x, v_minus, v_plus), ledger.csv (t, kinetic, potential, total,
K_integral, drift), diagnostics.json, and manifest.json listing every file
with its content hash.  Outputs are byte-identical for identical
(config, seed); the worker count only chunks field evaluation and is
deliberately absent from the manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    audit_green,
    blowup_monitor,
    energy_audit,
    energy_bound_check,
    read_ledger_csv,
    write_ledger_csv,
)
from .ensemble import Ensemble, Frame, InitialCondition, sample_initial, symmetrize
from .fields import GreenKind, RegularizationParams, field_halfspace_A, make_field_factory
from .flow import Backend, StepperConfig, fold_halfspace, integrate
from .geometry import Ball, HalfSpace
from .selfconsistent import picard_iterate

__all__ = [
    "ParseError",
    "ValidationError",
    "RunConfig",
    "parse_config",
    "run",
    "main",
    "bounce3d_ensemble",
    "bounce3d_config_text",
]


class ParseError(ValueError):
    def __init__(self, message, line, col):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class ValidationError(ValueError):
    """A parsed value violates a module invariant."""


_SCHEMA = {
    "domain": {"kind", "dim", "radius"},
    "field": {"kind"},
    "regularization": {"eps_mollify", "r_sign", "zeta", "delta"},
    "initial": {
        "type", "n", "mass", "seed", "x_min", "x_max", "v_min", "v_max",
        "temperature", "v_center", "x0", "v0",
    },
    "particles": None,  # numbered rows
    "stepper": {"dt", "t_end", "backend", "max_reflections", "frozen_field"},
    "output": {"cadence_snapshot", "cadence_ledger", "store_trajectories"},
    "picard": {"t0", "n_max", "tol", "w1"},
}

_FIELD_KINDS = {
    "whole_space": GreenKind.WHOLE_SPACE,
    "halfspace_image": GreenKind.HALF_SPACE_IMAGE,
    "ball_image": GreenKind.BALL_IMAGE,
    "halfspace_mollified": "halfspace_mollified",
}


@dataclass
class RunConfig:
    domain: object
    field_kind: object
    params: RegularizationParams
    initial: InitialCondition
    seed: int
    dt: float
    t_end: float
    backend: Backend
    max_reflections: int
    frozen_field: bool
    cadence_snapshot: int = 1
    cadence_ledger: int = 1
    store_trajectories: bool = False
    picard: dict | None = None
    source_text: str = ""


def _read_sections(text):
    sections = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        body = stripped.strip()
        if body.startswith("["):
            col = raw.index("[") + 1
            if not body.endswith("]"):
                raise ParseError("unterminated section header", ln, col)
            name = body[1:-1].strip()
            if name not in _SCHEMA:
                raise ParseError(f"unknown section [{name}]", ln, col)
            if name in sections:
                raise ParseError(f"duplicate section [{name}]", ln, col)
            sections[name] = {}
            current = name
            continue
        if current is None:
            raise ParseError("key before any [section]", ln, 1)
        if "=" not in body:
            raise ParseError("expected 'key = value'", ln, 1)
        key, value = body.split("=", 1)
        key = key.strip()
        value = value.strip()
        col = raw.index("=") + 1
        allowed = _SCHEMA[current]
        if allowed is None:
            if not key.isdigit():
                raise ParseError(f"particle rows are numbered, got {key!r}", ln, col)
        elif key not in allowed:
            raise ParseError(f"unknown key {key!r} in [{current}]", ln, col)
        if key in sections[current]:
            raise ParseError(f"duplicate key {key!r} in [{current}]", ln, col)
        sections[current][key] = (value, ln, col)
    return sections


def _get(sections, section, key, conv, default=None, required=False):
    entry = sections.get(section, {}).get(key)
    if entry is None:
        if required:
            raise ValidationError(f"[{section}] {key} is required")
        return default
    value, ln, col = entry
    try:
        return conv(value)
    except ValueError as exc:
        raise ParseError(f"bad value for {key}: {exc}", ln, col) from None


def _vector(text):
    return np.array([float(p) for p in text.split(",")], dtype=float)


def _boolean(text):
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def parse_config(path) -> RunConfig:
    """Strict parse of a sectioned key=value run configuration."""
    text = Path(path).read_text()
    sections = _read_sections(text)

    dkind = _get(sections, "domain", "kind", str, required=True)
    dim = _get(sections, "domain", "dim", int, default=3)
    try:
        if dkind == "halfspace":
            domain = HalfSpace(dim)
        elif dkind == "ball":
            domain = Ball(dim, _get(sections, "domain", "radius", float, default=1.0))
        else:
            raise ValidationError(f"unknown domain kind {dkind!r}")
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    fkind_name = _get(sections, "field", "kind", str, default=(
        "halfspace_image" if dkind == "halfspace" else "ball_image"))
    if fkind_name not in _FIELD_KINDS:
        raise ValidationError(f"unknown field kind {fkind_name!r}")
    field_kind = _FIELD_KINDS[fkind_name]

    try:
        params = RegularizationParams(
            eps_mollify=_get(sections, "regularization", "eps_mollify", float, required=True),
            r_sign=_get(sections, "regularization", "r_sign", float, required=True),
            zeta=_get(sections, "regularization", "zeta", float, required=True),
            delta=_get(sections, "regularization", "delta", float, required=True),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    itype = _get(sections, "initial", "type", str, required=True)
    n = _get(sections, "initial", "n", int, default=0)
    mass = _get(sections, "initial", "mass", float, default=1.0)
    seed = _get(sections, "initial", "seed", int, default=0)
    if itype == "uniform_box":
        ic = InitialCondition(
            kind="uniform_box", n=n, mass=mass,
            x_bounds=(_get(sections, "initial", "x_min", _vector, required=True),
                      _get(sections, "initial", "x_max", _vector, required=True)),
            v_bounds=(_get(sections, "initial", "v_min", _vector, required=True),
                      _get(sections, "initial", "v_max", _vector, required=True)),
        )
    elif itype == "maxwellian":
        ic = InitialCondition(
            kind="maxwellian", n=n, mass=mass,
            x_bounds=(_get(sections, "initial", "x_min", _vector, required=True),
                      _get(sections, "initial", "x_max", _vector, required=True)),
            temperature=_get(sections, "initial", "temperature", float, default=1.0),
            v_center=_get(sections, "initial", "v_center", _vector, default=None),
        )
    elif itype == "delta":
        ic = InitialCondition(
            kind="delta", n=n, mass=mass,
            x0=_get(sections, "initial", "x0", _vector, required=True),
            v0=_get(sections, "initial", "v0", _vector, required=True),
        )
    elif itype == "explicit":
        rows = sections.get("particles", {})
        if not rows:
            raise ValidationError("explicit initial condition needs a [particles] section")
        order = sorted(rows, key=int)
        table = []
        for key in order:
            value, ln, col = rows[key]
            vec = _vector(value)
            if vec.size != 2 * dim + 1:
                raise ParseError(
                    f"particle row needs {2 * dim + 1} numbers (x, v, w)", ln, col)
            table.append(vec)
        table = np.array(table)
        ic = InitialCondition(
            kind="explicit", n=len(table), mass=float(np.sum(table[:, -1])),
            x=table[:, :dim], v=table[:, dim:2 * dim],
        )
        ic = (ic, table[:, -1])  # carry explicit weights
    else:
        raise ValidationError(f"unknown initial type {itype!r}")

    backend_name = _get(sections, "stepper", "backend", str, default="event")
    if backend_name not in ("event", "fold"):
        raise ValidationError(f"unknown backend {backend_name!r}")
    dt = _get(sections, "stepper", "dt", float, required=True)
    t_end = _get(sections, "stepper", "t_end", float, required=True)
    if dt <= 0:
        raise ValidationError("dt must be > 0")
    if t_end < 0:
        raise ValidationError("t_end must be >= 0")

    picard = None
    if "picard" in sections:
        picard = {
            "t0": _get(sections, "picard", "t0", float, default=0.05),
            "n_max": _get(sections, "picard", "n_max", int, default=6),
            "tol": _get(sections, "picard", "tol", float, default=0.0),
            "w1": _get(sections, "picard", "w1", _boolean, default=False),
        }

    return RunConfig(
        domain=domain,
        field_kind=field_kind,
        params=params,
        initial=ic,
        seed=seed,
        dt=dt,
        t_end=t_end,
        backend=Backend.FOLD_HALFSPACE if backend_name == "fold" else Backend.EVENT_DRIVEN,
        max_reflections=_get(sections, "stepper", "max_reflections", int, default=8),
        frozen_field=_get(sections, "stepper", "frozen_field", _boolean, default=False),
        cadence_snapshot=_get(sections, "output", "cadence_snapshot", int, default=1),
        cadence_ledger=_get(sections, "output", "cadence_ledger", int, default=1),
        store_trajectories=_get(sections, "output", "store_trajectories", _boolean,
                                default=False),
        picard=picard,
        source_text=text,
    )


# -----------------------------------------------------------------------------
# run orchestration
# -----------------------------------------------------------------------------

def _build_ensemble(cfg: RunConfig, seed):
    if isinstance(cfg.initial, tuple):
        ic, weights = cfg.initial
        e = sample_initial(ic, domain=cfg.domain, seed=seed)
        e = Ensemble(x=e.x, v=e.v, w=weights, domain=cfg.domain, frame=Frame.PROBLEM_A)
    else:
        e = sample_initial(cfg.initial, domain=cfg.domain, seed=seed)
    if cfg.backend is Backend.FOLD_HALFSPACE:
        e = symmetrize(e)
    return e


def _build_field_factory(cfg: RunConfig, workers=1):
    if cfg.backend is Backend.FOLD_HALFSPACE:
        return make_field_factory(cfg.domain, GreenKind.WHOLE_SPACE, cfg.params,
                                  hard_sign=True)
    if cfg.field_kind == "halfspace_mollified":
        def factory(ens):
            def field_fn(x):
                return field_halfspace_A(ens, cfg.params, x)
            return field_fn
        return factory
    return make_field_factory(cfg.domain, cfg.field_kind, cfg.params, workers=workers)


def _ledger_kind(cfg: RunConfig):
    if cfg.backend is Backend.FOLD_HALFSPACE:
        return GreenKind.WHOLE_SPACE
    if cfg.field_kind == "halfspace_mollified":
        return None  # the mollified A-route has no matching cut-Green ledger
    return cfg.field_kind


def _fmt(x) -> str:
    return repr(float(x))


def _write_snapshots_csv(path, run, cadence, dim):
    header = (
        ["t", "id"]
        + [f"x{i}" for i in range(dim)]
        + [f"v{i}" for i in range(dim)]
        + ["w"]
    )
    lines = [",".join(header)]
    for idx, (t, snap) in enumerate(run.snapshots):
        if idx % cadence and idx != len(run.snapshots) - 1:
            continue
        for pid in range(len(snap)):
            row = [_fmt(t), str(pid)]
            row += [_fmt(c) for c in snap.x[pid]]
            row += [_fmt(c) for c in snap.v[pid]]
            row.append(_fmt(snap.w[pid]))
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_events_csv(path, run, dim):
    header = (
        ["t", "id"]
        + [f"x{i}" for i in range(dim)]
        + [f"vm{i}" for i in range(dim)]
        + [f"vp{i}" for i in range(dim)]
    )
    lines = [",".join(header)]
    for ev in run.events:
        row = [_fmt(ev.t), str(ev.particle)]
        row += [_fmt(c) for c in ev.x]
        row += [_fmt(c) for c in ev.v_minus]
        row += [_fmt(c) for c in ev.v_plus]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run(cfg: RunConfig, out_dir, seed=None, workers=1,
        cadence_snapshot=None, cadence_ledger=None) -> int:
    """Execute a configured run and emit artifacts; returns the exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    cad_snap = cadence_snapshot or cfg.cadence_snapshot
    cad_ledger = cadence_ledger or cfg.cadence_ledger
    manifest = {
        "version": __version__,
        "seed": int(seed),
        "config_sha256": hashlib.sha256(cfg.source_text.encode()).hexdigest(),
        "complete": False,
        "files": {},
    }
    try:
        e0 = _build_ensemble(cfg, seed)
        factory = _build_field_factory(cfg, workers=workers)
        stepper = StepperConfig(
            dt=cfg.dt,
            max_reflections_per_step=cfg.max_reflections,
            backend=cfg.backend,
            frozen_field=cfg.frozen_field,
        )
        kind = _ledger_kind(cfg)
        rec = integrate(
            e0, factory, stepper, cfg.t_end,
            snapshot_every=1,
            store_trajectories=cfg.store_trajectories,
            meta={"params": cfg.params, "kind": kind,
                  "hard_sign": cfg.backend is Backend.FOLD_HALFSPACE},
        )
        dim = e0.dim
        _write_snapshots_csv(out / "snapshots.csv", rec, cad_snap, dim)
        _write_events_csv(out / "events.csv", rec, dim)
        diag = {"events": len(rec.events), "particles": len(e0), "t_end": cfg.t_end}
        if kind is not None:
            ledger = energy_audit(rec, cfg.params, kind)
            if cad_ledger > 1:
                sl = slice(None, None, cad_ledger)
                from .diagnostics import EnergyLedger
                ledger = EnergyLedger(*(getattr(ledger, f)[sl] for f in (
                    "times", "kinetic", "potential", "total", "k_tau",
                    "k_integral", "drift")))
            write_ledger_csv(ledger, out / "ledger.csv")
            check = energy_bound_check(ledger)
            blow = blowup_monitor(rec, cfg.params, kind)
            diag.update({
                "max_abs_drift": ledger.max_abs_drift,
                "energy_bound_passed": check.passed,
                "energy_bound_min_margin": check.min_margin,
                "loglog_total_variation": blow.total_variation,
            })
        (out / "diagnostics.json").write_text(
            json.dumps(diag, sort_keys=True, indent=2) + "\n")
        manifest["complete"] = True
    finally:
        for name in sorted(p.name for p in out.iterdir() if p.name != "manifest.json"):
            manifest["files"][name] = _sha256(out / name)
        (out / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return 0


# -----------------------------------------------------------------------------
# acceptance fixtures
# -----------------------------------------------------------------------------

def bounce3d_ensemble():
    """The bounce3d fixture: 64 particles in the half-space, one bouncer.

    A light bulk cloud plus one member launched at the wall so that it
    crosses the boundary-cutoff shell and reflects; regularization sized so
    the self-image energy exchange is visible in the ledger.
    """
    rng = np.random.default_rng(7)
    n = 64
    domain = HalfSpace(3)
    x = np.c_[1.0 + 1.0 * rng.random(n), rng.normal(size=(n, 2)) * 0.5]
    v = rng.normal(size=(n, 3)) * 0.5
    x[0] = [0.6, 0.0, 0.0]
    v[0] = [-1.0, 0.0, 0.0]
    w = np.full(n, 0.5 / n)
    e0 = Ensemble(x=x, v=v, w=w, domain=domain, frame=Frame.PROBLEM_A)
    params = RegularizationParams(eps_mollify=0.05, r_sign=0.05, zeta=0.1, delta=0.1)
    return e0, params


def bounce3d_config_text(dt=1e-3, t_end=2.0):
    """Config-file text reproducing the bounce3d fixture via explicit particles."""
    e0, params = bounce3d_ensemble()
    lines = [
        "[domain]",
        "kind = halfspace",
        "dim = 3",
        "",
        "[field]",
        "kind = halfspace_image",
        "",
        "[regularization]",
        f"eps_mollify = {params.eps_mollify!r}",
        f"r_sign = {params.r_sign!r}",
        f"zeta = {params.zeta!r}",
        f"delta = {params.delta!r}",
        "",
        "[initial]",
        "type = explicit",
        "",
        "[particles]",
    ]
    for i in range(len(e0)):
        row = np.concatenate([e0.x[i], e0.v[i], [e0.w[i]]])
        lines.append(f"{i} = " + ",".join(repr(float(c)) for c in row))
    lines += [
        "",
        "[stepper]",
        f"dt = {dt!r}",
        f"t_end = {t_end!r}",
        "backend = event",
        "",
        "[output]",
        "cadence_snapshot = 10",
        "cadence_ledger = 1",
    ]
    return "\n".join(lines) + "\n"


# -----------------------------------------------------------------------------
# subcommands
# -----------------------------------------------------------------------------

def _cmd_simulate(args):
    cfg = parse_config(args.config)
    return run(cfg, args.out, seed=args.seed, workers=args.workers,
               cadence_snapshot=args.cadence_snapshot,
               cadence_ledger=args.cadence_ledger)


def _cmd_picard(args):
    cfg = parse_config(args.config)
    pc = cfg.picard or {"t0": 0.05, "n_max": 6, "tol": 0.0, "w1": False}
    if args.t0 is not None:
        pc["t0"] = args.t0
    if args.n_max is not None:
        pc["n_max"] = args.n_max
    e0 = _build_ensemble(cfg, cfg.seed if args.seed is None else args.seed)
    stepper = StepperConfig(dt=cfg.dt, backend=cfg.backend,
                            max_reflections_per_step=cfg.max_reflections)
    kind = GreenKind.WHOLE_SPACE if cfg.backend is Backend.FOLD_HALFSPACE else cfg.field_kind
    state = picard_iterate(e0, cfg.params, stepper, pc["t0"], n_max=pc["n_max"],
                           tol=pc["tol"], kind=kind, domain=cfg.domain,
                           compute_w1=pc["w1"] or args.w1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["n,Z_n,ratio,w1_exact"]
    for k, z in enumerate(state.z_values):
        ratio = repr(state.ratios[k - 1]) if k >= 1 else ""
        w1v = repr(state.w1_values[k]) if k < len(state.w1_values) else ""
        lines.append(f"{k + 1},{z!r},{ratio},{w1v}")
    (out / "contraction.csv").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0


def _cmd_diagnose(args):
    ledger = read_ledger_csv(args.ledger)
    check = energy_bound_check(ledger, tol=args.tol)
    verdict = "PASS" if check.passed else "FAIL"
    print(f"energy bound: {verdict} (min margin {check.min_margin!r}, "
          f"max |drift| {ledger.max_abs_drift!r})")
    return 0 if check.passed else 1


def _cmd_compare_backends(args):
    cfg = parse_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    if not isinstance(cfg.domain, HalfSpace):
        print("compare-backends needs a half-space configuration", file=sys.stderr)
        return 2
    if isinstance(cfg.initial, tuple):
        ic, weights = cfg.initial
        base = sample_initial(ic, domain=cfg.domain, seed=seed)
        base = Ensemble(x=base.x, v=base.v, w=weights, domain=cfg.domain)
    else:
        base = sample_initial(cfg.initial, domain=cfg.domain, seed=seed)
    n = len(base)
    stepper = StepperConfig(dt=cfg.dt, max_reflections_per_step=cfg.max_reflections)

    def a_factory(ens):
        def field_fn(x):
            return field_halfspace_A(ens, cfg.params, x)
        return field_fn

    rec_a = integrate(base, a_factory, stepper, cfg.t_end)
    rec_b = integrate(
        symmetrize(base),
        make_field_factory(cfg.domain, GreenKind.WHOLE_SPACE, cfg.params, hard_sign=True),
        StepperConfig(dt=cfg.dt, backend=Backend.FOLD_HALFSPACE,
                      max_reflections_per_step=cfg.max_reflections),
        cfg.t_end,
    )
    dev = 0.0
    for (_, sa), (_, sb) in zip(rec_a.snapshots, rec_b.snapshots):
        xf, vf = fold_halfspace(sb.x[:n], sb.v[:n])
        dev = max(dev, float(np.max(np.abs(np.c_[xf, vf] - np.c_[sa.x, sa.v]))))
    allowed = 10.0 * cfg.dt**2 * max(cfg.t_end, 1.0)
    print(f"max folded deviation: {dev!r} (allowed {allowed!r})")
    return 0 if dev <= allowed else 1


def _cmd_audit_green(args):
    if args.domain == "ball":
        domain = Ball(args.dim, args.radius)
        kind = GreenKind.BALL_IMAGE
    else:
        domain = HalfSpace(args.dim)
        kind = GreenKind.HALF_SPACE_IMAGE
    report = audit_green(domain, kind, n_pairs=args.pairs, seed=args.seed)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"green audit [{args.domain}, d={args.dim}]: {verdict} "
          f"(value ratio {report.max_value_ratio:.3e}, "
          f"gradient ratio {report.max_gradient_ratio:.3e}, "
          f"boundary potential {report.max_boundary_potential:.3e})")
    return 0 if report.passed else 1


def _add_common(p):
    p.add_argument("--config", required=True, help="path to the run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--workers", type=int, default=1,
                   help="field-evaluation chunking; never changes results")
    p.add_argument("--out", default="run", help="output directory")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="specularvp",
        description="Vlasov-Poisson particle runs with specular reflection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a configured simulation")
    _add_common(p)
    p.add_argument("--cadence-snapshot", type=int, default=None)
    p.add_argument("--cadence-ledger", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("picard", help="run the Picard contraction loop")
    _add_common(p)
    p.add_argument("--t0", type=float, default=None, help="contraction horizon T_0")
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--w1", action="store_true", help="also compute exact W_1 per iterate")
    p.set_defaults(func=_cmd_picard)

    p = sub.add_parser("diagnose", help="check an emitted ledger")
    p.add_argument("--ledger", required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("compare-backends",
                       help="event-driven vs fold backend on one config")
    _add_common(p)
    p.set_defaults(func=_cmd_compare_backends)

    p = sub.add_parser("audit-green", help="sample the Green-function bounds")
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--domain", choices=("halfspace", "ball"), default="halfspace")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--radius", type=float, default=1.0)
    p.set_defaults(func=_cmd_audit_green)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
