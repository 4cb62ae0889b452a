"""``plan`` command line: run seeded campaigns, generate worlds, inspect fillets."""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .bench import Campaign, run_campaign, write_outputs
from .fillets import ReversalError, any_geometry, make_kind
from .geometry import turn_angle
from .planners import PLANNERS, PRIMITIVES, PlannerConfig
from .sampling import REGIMES
from .workspace import (GridParseError, InvalidWorldError, format_world_spec, load_world,
                        save_grid)


def _add_run(sub):
    p = sub.add_parser("run", help="run a seeded trial campaign")
    p.add_argument("--world", required=True, help="world spec file or preset name[:scale]")
    p.add_argument("--planner", choices=PLANNERS, default="fb-rrt-star")
    p.add_argument("--sampler", choices=REGIMES, default="biased")
    p.add_argument("--primitive", choices=PRIMITIVES, default=None,
                   help="default: line for rrt/rrt-star, arc for fb-rrt-star")
    p.add_argument("--kappa-max", type=float, default=2.0)
    p.add_argument("--eta", type=float, default=3.0)
    p.add_argument("--rho", type=float, default=3.0)
    p.add_argument("--alpha", type=int, default=100)
    p.add_argument("--bt", type=int, default=50)
    p.add_argument("--bb", type=int, default=3)
    p.add_argument("--beacon-radius", type=float, default=3.0)
    p.add_argument("--continuity", choices=("paper", "legacy"), default="paper")
    p.add_argument("--gamma-max", type=float, default=math.pi / 2)
    p.add_argument("--d-init", type=float, default=1.0)
    p.add_argument("--w-psi", type=float, default=1.0)
    p.add_argument("--resolution", type=float, default=0.01, help="path sampling step for collision checks")
    p.add_argument("--budget-seconds", type=float, default=None)
    p.add_argument("--budget-iters", type=int, default=None)
    p.add_argument("--stop-on-solution", action="store_true")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clock", choices=("wall", "steps"), default="wall",
                   help="steps: time = iteration x tick, which makes outputs reproducible")
    p.add_argument("--tick", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, type=Path)


def _add_world(sub):
    p = sub.add_parser("world", help="generate a world and save its spec and grid")
    p.add_argument("world", help="world spec file or preset name[:scale]")
    p.add_argument("--out", required=True, type=Path, help="output prefix (.world, .pgm and .meta files)")


def _add_fillet(sub):
    p = sub.add_parser("fillet", help="evaluate one fillet and print its geometry")
    p.add_argument("points", nargs="+", help="3 or 4 points as x,y or x,y,direction; with 4 the first is the previous corner")
    p.add_argument("--primitive", choices=PRIMITIVES[1:], default="arc")
    p.add_argument("--kappa-max", type=float, default=2.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plan", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_world(sub)
    _add_fillet(sub)
    return ap


def cmd_run(args) -> int:
    world = load_world(args.world)
    primitive = args.primitive or ("arc" if args.planner == "fb-rrt-star" else "line")
    cfg = PlannerConfig(
        planner=args.planner, primitive=primitive, sampler=args.sampler, eta=args.eta, rho=args.rho,
        alpha=args.alpha, kappa_max=args.kappa_max, d_init=args.d_init, b_t=args.bt, b_b=args.bb,
        beacon_radius=args.beacon_radius, continuity=args.continuity, gamma_max=args.gamma_max,
        max_iterations=args.budget_iters, max_seconds=args.budget_seconds, seed=args.seed,
        resolution=args.resolution, w_psi=args.w_psi, stop_on_solution=args.stop_on_solution)
    camp = Campaign(world, cfg, args.trials, args.seed, args.clock, args.tick, args.workers)
    records = run_campaign(camp)
    extra = {"world": args.world, "planner": cfg.planner, "primitive": cfg.primitive,
             "sampler": cfg.sampler, "seed": args.seed, "clock": args.clock}
    files = write_outputs(records, args.out, camp.budget_seconds, extra)
    solved = sum(r.solved for r in records)
    print(f"{solved}/{len(records)} trials solved; wrote {', '.join(str(f) for f in files.values())}")
    return 0


def cmd_world(args) -> int:
    world = load_world(args.world)
    prefix = args.out
    prefix.parent.mkdir(parents=True, exist_ok=True)
    spec_file = prefix.with_suffix(".world")
    grid_file = prefix.with_suffix(".pgm")
    spec_file.write_text(format_world_spec(world.spec))
    save_grid(world.grid, grid_file)
    g = world.grid
    print(f"{world.spec.kind}: {g.width}x{g.height} cells at {g.resolution} m, "
          f"occupied fraction {g.bits.mean():.4f}; wrote {spec_file} and {grid_file}")
    return 0


def _parse_point(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) not in (2, 3):
        raise ValueError(f"bad point {text!r}; expected x,y or x,y,direction")
    return tuple(parts[:2]) + ((int(parts[2]),) if len(parts) == 3 else ())


def cmd_fillet(args) -> int:
    pts = [_parse_point(p) for p in args.points]
    if len(pts) not in (3, 4):
        raise ValueError("give 3 or 4 points")
    kind = make_kind(args.primitive, args.kappa_max)
    if args.primitive.startswith("rev"):
        # reverse fillets need a travel direction on every point (forward by default)
        pts = [p if len(p) == 3 else p + (1,) for p in pts]
    else:
        pts = [p[:2] for p in pts]
    x0 = pts[0] if len(pts) == 4 else None
    x1, x2, x3 = pts[-3:]
    gamma, zeta = turn_angle(x1[:2], x2[:2], x3[:2])
    print(f"gamma = {gamma!r}")
    print(f"zeta = {zeta}")
    try:
        print(f"d_gamma = {kind.distance(gamma)!r}")
    except ReversalError as e:
        print(f"d_gamma = undefined ({e})")
    g = any_geometry(kind, x0, x1, x2, x3)
    if g is None:
        print("feasible = False")
        return 0
    print("feasible = True")
    print(f"d_prev = {g.d_prev!r}")
    print(f"total_length = {g.total_length!r}")
    print(f"switch_s = 0.0 {g.s1!r} {g.s2!r} {g.s3!r}")
    path = g.sample()
    print(f"samples = {len(path)}")
    print(f"max_abs_kappa = {float(abs(path.kappa).max())!r}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "world": cmd_world, "fillet": cmd_fillet}[args.command]
    try:
        return handler(args)
    except (InvalidWorldError, GridParseError, ValueError, OSError) as e:
        print(f"plan: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
