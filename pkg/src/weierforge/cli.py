"""Command-line front end: ``build``, ``flux`` and ``check``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from fractions import Fraction

import numpy as np

from . import builder
from .deform import WedgeRotation, rotate_point
from .holo_core import (CompactSet, Exp, Laurent, OneForm, Path, default_config,
                        residue_loop)
from .periods import NewtonDiverged, RankDeficient, catenoid_problem, solve_periods
from .weierstrass import (Immersion, catenoid, conformality_defect, enneper,
                          flux, from_spin_data,
                          harmonicity_slopes, obj_text, csv_text,
                          real_periods, SpinData)
from .wedge import Wedge, dist_to_wedge

DEFAULT_HS = (1 / 16, 1 / 32, 1 / 64)


# --------------------------------------------------------------- output

def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default)


# ---------------------------------------------------------------- suites

def suite_nullity() -> list[tuple]:
    z = np.exp(2j * np.pi * np.arange(64) / 64) * 0.9
    rows = []
    for name, sd in (("enneper", enneper()), ("catenoid", catenoid())):
        t = from_spin_data(sd)
        r = float(np.max(np.abs(t.nullity_residual(z))))
        rows.append((f"nullity {name}", r, 1e-12, r <= 1e-12))
    im = builder.init_stage(builder.StageConfig(max_stage=1, grid=(16, 16))).immersion
    r = float(np.max(np.abs(im.triple.nullity_residual(z + 1j))))
    rows.append(("nullity stage 1", r, 1e-12, r <= 1e-12))
    return rows


def exp_chart_enneper() -> Immersion:
    """Enneper surface in the chart z = e^w: g = e^w, phi3 = e^{2w} dw."""
    w = Laurent.monomial(1)
    sd = SpinData(Exp(w), OneForm(Exp(2.0 * w)))
    dom = CompactSet.rectangle(-1.0, 1.0, -1.0, 1.0)
    return Immersion(from_spin_data(sd, dom), 0.0, np.zeros(3), dom)


def suite_harmonicity(hs=DEFAULT_HS) -> list[tuple]:
    slopes = harmonicity_slopes(exp_chart_enneper(), -0.25, -0.25, 0.5, hs)
    return [(f"laplacian slope x{k + 1}", float(s), 1.9, bool(s >= 1.9))
            for k, s in enumerate(slopes)]


def suite_residues() -> list[tuple]:
    rows = []
    for k in range(-5, 6):
        v = residue_loop(k)
        want = 2j * math.pi if k == -1 else 0.0
        err = abs(v - want)
        rows.append((f"loop z^{k}", err, 1e-10, err <= 1e-10))
    return rows


def suite_wedge() -> list[tuple]:
    rng = np.random.default_rng(0)
    rows = []
    for d, th in ((1.0, 0.3), (2.0, 0.5), (5.0, 0.7)):
        x1 = rng.uniform(-10, 10, 100)
        x2 = rng.uniform(-10, 10, 100)
        p = np.stack([x1, x2, d - math.tan(th) * x1], axis=1)
        q = rotate_point(WedgeRotation(th, d), p)
        err = float(np.max(np.abs(q[:, 2] - d)))
        rows.append((f"rotation ({d:g},{th:g}) to x3={d:g}", err, 1e-12, err <= 1e-12))
        inside = p - np.array([0, 0, 1.0])
        dist = float(np.max(dist_to_wedge(Wedge(d, th), inside)))
        rows.append((f"wedge ({d:g},{th:g}) distance of interior", dist, 0.0, dist == 0.0))
    return rows


def suite_conformality() -> list[tuple]:
    rows = []
    z = 0.3 + 0.9 * (np.random.default_rng(1).random(200)
                     + 1j * np.random.default_rng(2).random(200))
    for name, sd in (("enneper", enneper()), ("catenoid", catenoid())):
        im = Immersion(from_spin_data(sd), 1.0, np.zeros(3), CompactSet.disk(0, 2))
        a, b = conformality_defect(im, z)
        rows.append((f"conformality {name}", max(a, b), 1e-12, max(a, b) <= 1e-12))
    return rows


def suite_flux_homology() -> list[tuple]:
    t = from_spin_data(catenoid())
    rows = []
    for name, loop, want in (
            ("unit circle", Path.circle(0, 1.0), 2 * math.pi),
            ("homologous circle r=3", Path.circle(0, 3.0), 2 * math.pi),
            ("shifted square", Path.rectangle(-0.5, 2.0, -1.0, 1.5), 2 * math.pi),
            ("null-homologous", Path.circle(2.0, 1.0), 0.0)):
        f = flux(t, loop)
        rp = real_periods(t, loop)
        err = float(np.max(np.abs(f - [0.0, 0.0, want])))
        rows.append((f"flux {name}", err, 1e-8, err <= 1e-8))
        rows.append((f"real periods {name}", float(np.max(np.abs(rp))), 1e-10,
                     float(np.max(np.abs(rp))) <= 1e-10))
    return rows


SUITES = {
    "nullity": suite_nullity,
    "harmonicity": suite_harmonicity,
    "residues": suite_residues,
    "wedge": suite_wedge,
    "conformality": suite_conformality,
    "flux-homology": suite_flux_homology,
}


# -------------------------------------------------------------- commands

def _grid(s: str) -> tuple[int, int]:
    try:
        w, h = s.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 128x128, got {s!r}")


def _vec3(s: str) -> np.ndarray:
    try:
        v = np.array([float(x) for x in s.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a,b,c, got {s!r}")
    if v.size != 3:
        raise argparse.ArgumentTypeError(f"expected three components, got {s!r}")
    return v


def _hs(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(Fraction(x)) for x in s.split(","))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected h values like 1/16,1/32, got {s!r}")


def stage_config(args) -> builder.StageConfig:
    tol = os.environ.get("WEIERFORGE_QUAD_TOL")
    return builder.StageConfig(epsilon=args.epsilon, max_stage=args.stages,
                               grid=args.grid, seed=args.seed, lift=args.lift,
                               quad_tol=float(tol) if tol else default_config().quad_rtol)


def write_stages(out: str, states, cfg: builder.StageConfig) -> None:
    os.makedirs(out, exist_ok=True)
    xs, ys = builder.cert_grid(cfg)
    for st in states:
        write_atomic(os.path.join(out, f"stage_{st.n}.obj"), obj_text(st.values))
        write_atomic(os.path.join(out, f"stage_{st.n}.csv"), csv_text(xs, ys, st.values))


def cmd_build(args) -> int:
    try:
        cfg = stage_config(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        states = builder.run(cfg)
    except builder.StageFailed as e:
        write_stages(args.out, e.partial, cfg)
        if e.partial:
            write_atomic(os.path.join(args.out, "report.json"),
                         dumps(builder.report(e.partial, cfg)))
        print(dumps(e.payload), file=sys.stderr)
        return 1
    write_stages(args.out, states, cfg)
    rep = builder.report(states, cfg)
    write_atomic(os.path.join(args.out, "report.json"), dumps(rep))
    for r in rep:
        m = r["cert_margins"]
        print(f"stage {r['stage']}: lambda={r['lambda']:.6g} mu={r['mu']} "
              + " ".join(f"{k}={'-' if v is None else f'{v:.6g}'}" for k, v in m.items()))
    return 0


def cmd_flux(args) -> int:
    if args.preset != "catenoid":
        print(f"error: unknown preset {args.preset!r}", file=sys.stderr)
        return 2
    pp = catenoid_problem(args.target, args.degree)
    try:
        _, rep = solve_periods(pp)
    except RankDeficient as e:
        print(dumps({"error": "RankDeficient", "detail": str(e)}))
        return 3
    except NewtonDiverged as e:
        print(dumps({"error": "NewtonDiverged", "detail": str(e),
                     "history": e.history}))
        return 3
    rep["target"] = [float(v) for v in args.target]
    print(dumps(rep))
    return 0


def run_suites(names, hs=DEFAULT_HS) -> tuple[bool, list[tuple]]:
    rows = []
    for name in names:
        fn = SUITES[name]
        got = fn(hs) if name == "harmonicity" else fn()
        rows.extend((name,) + r for r in got)
    return all(r[4] for r in rows), rows


def cmd_check(args) -> int:
    names = list(SUITES) if args.suite is None else [args.suite]
    for n in names:
        if n not in SUITES:
            print(f"error: unknown suite {n!r}; choose from {', '.join(SUITES)}",
                  file=sys.stderr)
            return 2
    ok, rows = run_suites(names, args.h)
    for suite, name, val, thr, passed in rows:
        print(f"{'PASS' if passed else 'FAIL'}  {suite:<14} {name:<44} "
              f"{val:.3e}  (threshold {thr:g})")
    return 0 if ok else 1


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weierforge")
    sub = p.add_subparsers(dest="cmd", required=True)
    b = sub.add_parser("build", help="run the staged construction")
    b.add_argument("--stages", type=int, default=3)
    b.add_argument("--epsilon", type=float, default=0.5)
    b.add_argument("--grid", type=_grid, default=(128, 128))
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--lift", type=float, default=builder.StageConfig.lift,
                   help="extra height of the first stage above its wedge")
    b.set_defaults(fn=cmd_build)
    f = sub.add_parser("flux", help="prescribe flux on a preset annulus")
    f.add_argument("--preset", default="catenoid")
    f.add_argument("--target", type=_vec3, default=_vec3("0,0,6.283185307179586"))
    f.add_argument("--degree", type=int, default=4)
    f.set_defaults(fn=cmd_flux)
    c = sub.add_parser("check", help="run invariant suites")
    c.add_argument("--suite", default=None)
    c.add_argument("--h", type=_hs, default=DEFAULT_HS)
    c.set_defaults(fn=cmd_check)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
