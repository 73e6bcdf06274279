"""Command-line front end: ``sim run | passes | budget | sweep | profiles``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .engine import InvariantViolation, budget_at, run, sweep
from .geometry import find_contacts
from .scenario import ScenarioError, read_scenario
from .terminal import beam_divergence, builtin_profiles

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INVARIANT = 3


def _write(path: str | None, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    elif path:
        Path(path).write_text(text)


def _fmt_opt(v, spec: str) -> str:
    return "-" if v is None else format(v, spec)


def _cmd_run(args) -> int:
    sc = read_scenario(args.file)
    rep = run(sc, args.seed)
    _write(args.csv, rep.csv_text())
    _write(args.json, rep.to_json() + "\n")
    _write(args.events, rep.events_csv_text())
    if args.json != "-" and args.csv != "-":
        print(f"scenario {rep.scenario}  seed {rep.seed}  steps {rep.steps}  dt {rep.dt_s} s")
        for lid, lk in rep.links.items():
            print(
                f"  {lid:<16} acq {_fmt_opt(lk['acquisition_time_s'], '.2f'):>8} s"
                f"  avail {lk['availability']:.4f}"
                f"  delivered {lk['delivered_bits']:.4e} bit"
                f"  margin min/mean {_fmt_opt(lk['min_margin_db'], '+.2f')}/{_fmt_opt(lk['mean_margin_db'], '+.2f')} dB"
            )
    return EXIT_OK


def _cmd_passes(args) -> int:
    sc = read_scenario(args.file)
    try:
        lk = sc.link(args.link)
    except KeyError:
        raise ScenarioError([("--link", f"no link {args.link!r} in scenario")]) from None
    pa, pb = sc.platform(lk.a), sc.platform(lk.b)
    # report the elevation seen from the lower (ground-side) endpoint
    side = "a" if pa.orbit is None and pb.orbit is not None else "b"
    passes = find_contacts(
        pa.spec,
        pb.spec,
        math.radians(lk.min_elevation_a_deg),
        math.radians(lk.min_elevation_b_deg),
        (sc.time.t0_s, sc.time.t1_s),
        args.step,
        elevation_of=side,
    )
    rows = [
        {
            "aos_s": p.aos_s,
            "los_s": p.los_s,
            "duration_s": p.duration_s,
            "max_elevation_deg": math.degrees(p.max_elevation_rad),
        }
        for p in passes
    ]
    if args.json:
        _write(args.json, json.dumps({"link": lk.link_id, "passes": rows}, indent=2) + "\n")
        if args.json == "-":
            return EXIT_OK
    print(f"{'aos_s':>12} {'los_s':>12} {'duration_s':>11} {'max_el_deg':>10}")
    for r in rows:
        print(f"{r['aos_s']:12.1f} {r['los_s']:12.1f} {r['duration_s']:11.1f} {r['max_elevation_deg']:10.2f}")
    print(f"{len(rows)} pass(es) for {lk.link_id}")
    return EXIT_OK


def _cmd_budget(args) -> int:
    sc = read_scenario(args.file)
    try:
        bud = budget_at(sc, args.link, args.at, args.power)
    except KeyError:
        raise ScenarioError([("--link", f"no link {args.link!r} in scenario")]) from None
    except ValueError as exc:
        raise ScenarioError([("--at", str(exc))]) from None
    if args.json:
        _write(args.json, bud.to_json(indent=2) + "\n")
        if args.json == "-":
            return EXIT_OK
    print(f"{args.link} at t = {args.at} s, range {bud.notes['range_m'] / 1e3:.3f} km")
    print(bud.table())
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        v = float(tok)
        out.append(int(v) if v.is_integer() and "." not in tok and "e" not in tok.lower() else v)
    return out


def _cmd_sweep(args) -> int:
    sc = read_scenario(args.file)
    values = _parse_values(args.values)
    try:
        reports = sweep(sc, args.param, values, workers=args.workers)
    except KeyError as exc:
        raise ScenarioError([("--param", str(exc.args[0]) if exc.args else args.param)]) from None
    table = []
    for v, rep in zip(values, reports):
        for lid, lk in rep.links.items():
            table.append(
                {
                    "value": v,
                    "seed": rep.seed,
                    "link": lid,
                    "availability": lk["availability"],
                    "delivered_bits": lk["delivered_bits"],
                    "min_margin_db": lk["min_margin_db"],
                    "mean_margin_db": lk["mean_margin_db"],
                }
            )
    if args.json:
        _write(args.json, json.dumps({"param": args.param, "runs": [r.summary() for r in reports]}, indent=2) + "\n")
        if args.json == "-":
            return EXIT_OK
    print(f"{'value':>12} {'seed':>6} {'link':<16} {'avail':>7} {'delivered_bits':>15} {'min_dB':>8} {'mean_dB':>8}")
    for r in table:
        print(
            f"{r['value']:>12} {r['seed']:>6} {r['link']:<16} {r['availability']:7.4f} {r['delivered_bits']:15.4e}"
            f" {_fmt_opt(r['min_margin_db'], '+8.2f'):>8} {_fmt_opt(r['mean_margin_db'], '+8.2f'):>8}"
        )
    return EXIT_OK


def _cmd_profiles(args) -> int:
    profiles = builtin_profiles()
    if args.json:
        _write(args.json, json.dumps({k: p.to_dict() for k, p in profiles.items()}, indent=2) + "\n")
        if args.json == "-":
            return EXIT_OK
    hdr = f"{'name':<7} {'aperture_m':>10} {'field_of_regard':>18} {'band':>7} {'tx/rx_nm':>11} {'rate_Gbps':>9} {'div_urad':>9} {'mass_kg':>7}  max-range scenario"
    print(hdr)
    for p in profiles.values():
        f = p.field_of_regard
        fr = f"{f.azimuth_full_deg:g}x{f.elevation_min_deg:+g}/{f.elevation_max_deg:+g}"
        wl = f"{p.wavelength_tx_m * 1e9:.0f}/{p.wavelength_rx_m * 1e9:.0f}"
        print(
            f"{p.name:<7} {p.aperture_m:>10.2f} {fr:>18} {'C-band':>7} {wl:>11} {p.data_rate_bps / 1e9:>9g}"
            f" {beam_divergence(p) * 1e6:>9.2f} {_fmt_opt(p.mass_kg, 'g'):>7}  {p.max_range_scenario}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sim", description="Free-space optical link simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario file (or builtin:<name>)")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--csv", help="time-series CSV output path ('-' for stdout)")
    p.add_argument("--json", help="summary JSON output path ('-' for stdout)")
    p.add_argument("--events", help="PAT transition CSV output path")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("passes", help="list visibility windows of one link")
    p.add_argument("file")
    p.add_argument("--link", required=True, help="link id A-B")
    p.add_argument("--step", type=float, default=10.0, help="coarse sampling step, s")
    p.add_argument("--json")
    p.set_defaults(func=_cmd_passes)

    p = sub.add_parser("budget", help="itemised link budget of direction A->B at one instant")
    p.add_argument("file")
    p.add_argument("--link", required=True, help="direction A-B (A transmits)")
    p.add_argument("--at", type=float, required=True, help="time, s")
    p.add_argument("--power", type=float, default=None, help="transmit power override, W")
    p.add_argument("--json")
    p.set_defaults(func=_cmd_budget)

    p = sub.add_parser("sweep", help="one run per value of a numeric scenario parameter")
    p.add_argument("file")
    p.add_argument("--param", required=True, help="dotted path, e.g. platforms.leo.orbit.altitude_m")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("profiles", help="print the built-in terminal profiles")
    p.add_argument("--json")
    p.set_defaults(func=_cmd_profiles)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for loc, msg in exc.errors:
            print(f"error: {loc}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
