"""Command line entry point: ``beamcharge <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, kernels
from .errors import ConfigError


def _load(args):
    from .config import load_config
    return load_config(args.config, seed=args.seed, out_dir=args.out, rounds=args.rounds)


def cmd_run(args) -> int:
    from .experiment import run_experiment
    cfg = _load(args)
    res = run_experiment(cfg)
    print(f"{'algorithm':<10} {'mean':>10} {'final10%':>10} {'alpha_regret':>14} {'ub_regret':>12}")
    for row in res.summary:
        print(f"{row['algorithm']:<10} {row['mean_reward']:>10.4f} {row['mean_reward_final10']:>10.4f} "
              f"{row['alpha_regret']:>14.3f} {row['ub_regret']:>12.3f}")
    print(f"window={res.window} V={res.variation:.4g} out={res.out_dir}")
    for v in res.violations[:20]:
        print(f"VIOLATION: {v}", file=sys.stderr)
    return 1 if res.violations else 0


def cmd_sweep(args) -> int:
    from .experiment import sweep
    cfg = _load(args)
    rows = sweep(cfg, args.axis, args.values)
    for r in rows:
        print(f"{r['axis']}={r['value']:<8g} {r['algorithm']:<10} {r['mean_reward_final10']:.4f}")
    return 0


def _read_instance(path):
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict) or "powers" not in raw or "energies" not in raw:
        raise ConfigError("an instance needs 'powers' (policies x sensors) and 'energies'")
    return raw


def cmd_oracle(args) -> int:
    from .energy import UtilitySpec
    from .oracle import RoundParams, exhaustive_opt, gmq, gua, schedule_value, guarantee_condition, upper_bound_p1
    inst = _read_instance(args.instance)
    P = np.asarray(inst["powers"], dtype=float)
    x = np.asarray(inst["energies"], dtype=float)
    params = RoundParams(int(inst.get("n_slots", 10)), float(inst.get("slot_duration", 1.0)),
                         float(inst.get("deadline", inst.get("n_slots", 10))), float(inst.get("zeta", 2.0)),
                         float(inst.get("capacity", 1.0)), float(inst.get("eta", 1.0)))
    spec = UtilitySpec(inst.get("utility", "U1"), x.size, inst.get("utility_table"))
    sched = gua(P, x, spec, params)
    reward = schedule_value(P, x, spec, params, sched)
    alloc, ub = upper_bound_p1(P, x, spec, params)
    out = {
        "schedule": list(sched.slots),
        "reward": reward,
        "gmq_reward": schedule_value(P, x, spec, params, gmq(P, params)),
        "p1_bound": ub,
        "p1_allocation": [float(v) for v in alloc.t],
        "ratio_to_p1": reward / ub if ub > 0 else 1.0,
        "guarantee_applies": guarantee_condition(spec, params.zeta, params.rates(x), params.deadline, params.capacity),
    }
    if P.shape[0] ** params.n_slots <= args.exhaustive_limit:
        _, opt = exhaustive_opt(P, x, spec, params)
        out["optimum"] = opt
        out["ratio_to_optimum"] = reward / opt if opt > 0 else 1.0
    print(json.dumps(out, indent=2))
    return 0


def cmd_bound(args) -> int:
    from .geometry import ratio_bound
    print(f"{ratio_bound(args.d1, args.epsilon, args.gamma):.10g}")
    return 0


def cmd_beamscan(args) -> int:
    """In-grid power ratio against the discretization bound for beams from one stop."""
    from .channel import UlaConfig, beam_sector, build_codebook, in_grid_power_ratio, power_field
    from .geometry import Area, discretization_ratio_bound, grid_centers, half_diagonal, min_distance_ok
    cfg = _load(args)
    area = Area(cfg.width, cfg.height, cfg.epsilon)
    ula = UlaConfig(cfg.n_antennas, cfg.antenna_spacing, cfg.frequency)
    book = build_codebook(cfg.codebook_size, ula)
    centers = grid_centers(area)
    stop = args.stop if args.stop is not None else len(centers) // 2
    charger = tuple(float(v) for v in centers[stop])
    h = half_diagonal(cfg.epsilon)
    rows = []
    for m in range(len(book)):
        for g, center in enumerate(centers):
            if g == stop:
                continue
            sector = beam_sector(charger, tuple(center), cfg.epsilon, book[m], ula)
            covered = (sector.beam_covered and sector.theta_01 < sector.theta_l
                       and sector.theta_r < sector.theta_02 and 1.25 < sector.gamma <= 2.5
                       and min_distance_ok(sector.d1 - h, cfg.epsilon, sector))
            ratio = in_grid_power_ratio(charger, tuple(center), cfg.epsilon, book[m], ula)
            bound = discretization_ratio_bound(sector, cfg.epsilon) if sector.d1 > h else math.inf
            rows.append((m, g, covered, ratio, bound))
    inside = [r for r in rows if r[2]]
    bad = [r for r in inside if r[3] > r[4] * (1 + 1e-9)]
    print(f"stop={stop} at {charger}; {len(inside)} of {len(rows)} (codeword, grid) pairs meet the preconditions")
    for m, g, _, ratio, bound in inside:
        print(f"  codeword {m} grid {g:3d}: ratio {ratio:8.4f}  bound {bound:8.4f}")
    if args.field:
        xs = np.linspace(0, cfg.width, 101)
        ys = np.linspace(0, cfg.height, 101)
        field = power_field(charger, book[args.codeword], ula, xs, ys)
        np.savetxt(args.field, field, delimiter=",")
        print(f"power field written to {args.field}")
    return 1 if bad else 0


def cmd_validate(args) -> int:
    from .validation import validate
    report = validate(quick=args.quick, only=args.only, echo=print)
    report["version"] = __version__
    report["kernel_backend"] = kernels.BACKEND
    text = json.dumps(report, indent=2)
    if args.json:
        Path(args.json).write_text(text + "\n")
    print(text)
    return 1 if report["hard_failures"] else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beamcharge", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def overrides(sp):
        sp.add_argument("config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--rounds", type=int)

    sp = sub.add_parser("run", help="run one seeded experiment")
    overrides(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="final-10%% mean reward over Q or N")
    overrides(sp)
    sp.add_argument("--axis", choices=("Q", "N"), required=True)
    sp.add_argument("--values", type=float, nargs="+", required=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="schedule one instance with full information")
    sp.add_argument("instance")
    sp.add_argument("--exhaustive-limit", type=int, default=200_000)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("bound", help="discretization ratio bound")
    sp.add_argument("--d1", type=float, required=True)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--gamma", type=float, default=2.0)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("beamscan", help="check in-grid power ratios from one stop")
    overrides(sp)
    sp.add_argument("--stop", type=int)
    sp.add_argument("--codeword", type=int, default=0)
    sp.add_argument("--field", help="write the power field of --codeword to this CSV")
    sp.set_defaults(func=cmd_beamscan)

    sp = sub.add_parser("validate", help="run the self-check battery")
    sp.add_argument("--quick", action="store_true", help="skip the desk-scale experiments")
    sp.add_argument("--only", nargs="+")
    sp.add_argument("--json", help="also write the report here")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
