"""Command-line front end: ``replica-lab <subcommand> [flags]``.

Every run prints (or writes to ``--out``) its results together with the fully
resolved configuration. Exit codes: 0 success, 1 usage error, 2 capacity
exceeded, 3 internal check failed.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import replica_moments as rm
from . import rsb_groups as rg
from . import special_gamma as sg
from . import thermo, threshold_lab
from ._parallel import default_workers
from .errors import CapacityError, ReplicaLabError, VerificationError
from .ksat_core import (
    EnsembleParams,
    KSatInstance,
    count_violated_direct,
    energy,
    export_dimacs,
    generate_instance,
    import_dimacs,
    spins_from_index,
)

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_INTERNAL = 0, 1, 2, 3
AGREEMENT_TOL = 1e-9
# not part of the reproducibility record: they cannot change results
_UNRECORDED = {"workers", "out", "config", "func", "deterministic"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_grid(text: str) -> list[float]:
    """``"3:6:0.25"`` (inclusive) or ``"1,0.5,0.25"``."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def _grid_arg(text):
    try:
        return parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _read_config(path: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


# --- shared flags ---------------------------------------------------------------------


def _add_common(p, formats=("json", "csv")):
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--out", help="write output to this path instead of stdout")
    p.add_argument("--deterministic", action="store_true", help="omit the timestamp field")
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--config", help="key=value file; explicit flags take precedence")


def _add_ensemble(p, temp=True):
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--m", type=int)
    group.add_argument("--alpha", type=float)
    if temp:
        p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


def _add_instance_source(p):
    p.add_argument("--dimacs", help="read the instance from a DIMACS file instead of generating it")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--m", type=int)
    group.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int, default=0)


def _params(args, temp=None) -> EnsembleParams:
    if args.n is None or args.k is None:
        raise UsageError("--n and --k are required")
    return EnsembleParams(n=args.n, k=args.k, m=args.m, alpha=args.alpha,
                          T=temp if temp is not None else getattr(args, "temp", 1.0), seed=args.seed)


def _instance(args) -> KSatInstance:
    if getattr(args, "dimacs", None):
        return import_dimacs(Path(args.dimacs).read_text())
    return generate_instance(_params(args, temp=1.0))


# --- subcommands ------------------------------------------------------------------------


def cmd_gen(args):
    inst = _instance(args)
    if args.format == "json":
        return {"method": "generate", "instance": inst.to_json()}
    return {"_text": export_dimacs(inst)}


def cmd_energy(args):
    inst = _instance(args)
    if args.assignment:
        a = args.assignment.strip()
        if set(a) <= {"+", "-"}:
            spins = [1 if ch == "+" else -1 for ch in a]
        else:
            spins = [1 if int(x) > 0 else -1 for x in a.replace(",", " ").split()]
        configs = [np.array(spins)]
    else:
        if inst.n > 16:
            raise CapacityError("listing all assignments is limited to n <= 16; pass --assignment")
        configs = [spins_from_index(i, inst.n) for i in range(1 << inst.n)]
    rows = []
    for s in configs:
        h = energy(inst, s)
        direct = count_violated_direct(inst, s)
        if h != direct:
            raise VerificationError(f"Hamiltonian {h} != direct count {direct}")
        rows.append({"assignment": "".join("+" if v > 0 else "-" for v in s), "energy": h, "direct_count": direct})
    return {"method": "hamiltonian+direct-count", "m": inst.m, "rows": rows}


def cmd_partition(args):
    params = _params(args, temp=args.temps[0])
    if args.samples:
        rows = []
        for T in args.temps:
            p = EnsembleParams(n=params.n, k=params.k, m=params.m, T=T, seed=params.seed)
            row = {"T": T}
            for est in thermo.ESTIMATORS:
                avg = thermo.disorder_average(est, p, args.samples, workers=args.workers)
                row[est] = avg.mean
                row[f"{est}_stderr"] = avg.std_error
            rows.append(row)
        return {"method": "exhaustive-gray-code/disorder-average", "samples": args.samples, "rows": rows}
    inst = generate_instance(params)
    e0, degeneracy = thermo.ground_energy(inst)
    return {
        "method": "exhaustive-gray-code",
        "ground_energy": e0,
        "degeneracy": degeneracy,
        "rows": thermo.thermo_table(inst, args.temps),
    }


def cmd_moments(args):
    params = _params(args)
    methods = {"both": ["histogram", "bruteforce"], "all": ["histogram", "bruteforce", "ensemble"]}.get(
        args.method, [args.method]
    )
    results = []
    for method in methods:
        if method == "histogram":
            res = rm.moment_exact_histogram(params, args.r)
        elif method == "bruteforce":
            res = rm.moment_bruteforce(params, args.r)
        else:
            res = rm.moment_instance_ensemble(params, args.r)
        results.append(res.to_dict())
    values = [r["log_moment"] for r in results] + [r["ensemble_log_moment"] for r in results if "ensemble_log_moment" in r]
    spread = max(values) - min(values)
    rel = spread / max(abs(v) for v in values) if any(values) else spread
    if rel > AGREEMENT_TOL:
        raise VerificationError(f"exact moment methods disagree (relative spread {rel:.3e})")
    return {"results": results, "relative_spread": rel,
            "rows": [{"method": r["method"], "log_moment": r["log_moment"]} for r in results]}


def cmd_limitcheck(args):
    if args.dimacs or args.n is not None:
        inst = _instance(args)
        rows, monotone, log_z = rm.log_limit_check(inst, args.temp, args.rs)
    else:
        raise UsageError("give an instance (--dimacs or --n/--k)")
    return {
        "method": "scalar-expm1",
        "log_z": log_z,
        "monotone": monotone,
        "rows": [{"r": row.r, "value": row.value, "error": row.error} for row in rows],
    }


def cmd_saddle(args):
    ansatze = {"full": ["full-simplex"], "rs": ["replica-symmetric"], "both": ["full-simplex", "replica-symmetric"]}[args.ansatz]
    results = [rm.saddle_maximize(args.alpha, args.k, args.temp, args.r, a, seed=args.seed).to_dict() for a in ansatze]
    return {"method": "multistart-projected-ascent", "results": results,
            "rows": [{"ansatz": r["ansatz"], "f_max": r["f_max"], "grad_norm": r["grad_norm"]} for r in results]}


def cmd_chains(args):
    report = rg.chain_report(args.n)
    report["method"] = "divisor-chain-enumeration"
    report["rows"] = [{"blocks": " ".join(map(str, c)), "length": len(c)} for c in report["chains"]]
    return report


def cmd_kmax(args):
    value = rg.k_max(args.n)
    out = {"n": args.n, "k_max": value, "method": "prime-factor-count"}
    if args.n <= 360:
        brute = rg.k_max_bruteforce(args.n)
        if brute != value:
            raise VerificationError(f"k_max mismatch: factorization {value}, enumeration {brute}")
        out["enumeration_agrees"] = True
    return out


def cmd_witness(args):
    n, chain = rg.witness_n_for_k(args.k)
    check = rg.chain_valid(chain)
    if not check:
        raise VerificationError(f"witness chain invalid at step {check.failed_step}: {check.reason}")
    return {"k": args.k, "n": str(n), "blocks": [str(b) for b in chain.blocks], "valid": True, "method": "powers-of-two"}


_GROUPS = {
    "klein": rg.klein_four_group,
    "s3": lambda: rg.symmetric_group(3),
    "d4": lambda: rg.dihedral_group(4),
    "q8": rg.quaternion_group,
}


def cmd_cayley(args):
    if args.table_file:
        data = json.loads(Path(args.table_file).read_text())
        group = rg.GroupTable(data["table"], data.get("identity", 0), data.get("name", args.table_file))
    elif args.group.startswith("cyclic:"):
        group = rg.cyclic_group(int(args.group.split(":", 1)[1]))
    elif args.group in _GROUPS:
        group = _GROUPS[args.group]()
    else:
        raise UsageError(f"unknown group {args.group!r}")
    perms = rg.cayley_embed(group)
    return {
        "group": group.name,
        "order": group.order,
        "method": "left-translation",
        "permutations": [p.to_list() for p in perms],
        "rows": [{"element": i, "image": " ".join(map(str, p.to_list()))} for i, p in enumerate(perms)],
    }


def cmd_gamma_table(args):
    rows = sg.gamma_factorial_table(args.n_max, tuple(args.alphas))
    worst = max(r["relative_gap"] for r in rows if r["cardinal"])
    return {"method": "lanczos-vs-exact-factorial", "max_relative_gap": worst, "rows": rows, "_csv": sg.table_to_csv(rows)}


def cmd_threshold(args):
    curve = threshold_lab.p_sat_curve(args.k, args.n, args.alpha_grid, args.samples, args.seed, workers=args.workers)
    out = {"method": "dpll-coupled-samples", "rows": curve.to_rows()}
    try:
        out["estimate"] = threshold_lab.estimate_threshold(curve, seed=args.seed).to_dict()
    except ReplicaLabError as exc:
        out["estimate"] = {"error": str(exc)}
    if args.export_failures:
        out["exported"] = threshold_lab.export_unsat_instances(curve, args.export_failures)
    return out


def cmd_energy_scan(args):
    scan = threshold_lab.energy_density_scan(args.k, args.n, args.alpha_grid, args.samples, args.seed, workers=args.workers)
    return {"method": "exhaustive-max-sat-coupled-samples", "rows": scan.to_rows()}


# --- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="replica-lab", description="Finite-size replica and random k-SAT laboratory")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate an instance (DIMACS by default)")
    _add_instance_source(p)
    _add_common(p, formats=("dimacs", "json"))
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("energy", help="violated-clause count of assignments")
    _add_instance_source(p)
    p.add_argument("--assignment", help="'+-+..' or '1 0 1 ..'; omit to list all assignments")
    _add_common(p)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("partition", help="log Z, free energy and mean energy on a temperature grid")
    _add_ensemble(p, temp=False)
    p.add_argument("--temps", type=_grid_arg, default=[1.0])
    p.add_argument("--samples", type=int, default=0, help="disorder-average over this many instances")
    _add_common(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("moments", help="exact integer moments E[Z^r]")
    _add_ensemble(p)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--method", choices=("histogram", "bruteforce", "ensemble", "both", "all"), default="histogram")
    _add_common(p)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("limitcheck", help="(Z^r - 1)/r against ln Z as r -> 0")
    _add_instance_source(p)
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--rs", type=_grid_arg, default=[10.0**-i for i in range(1, 7)])
    _add_common(p)
    p.set_defaults(func=cmd_limitcheck)

    p = sub.add_parser("saddle", help="maximize the rate function")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--ansatz", choices=("full", "rs", "both"), default="both")
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_saddle)

    for name, func, help_text in (
        ("chains", cmd_chains, "all breaking chains of n"),
        ("kmax", cmd_kmax, "longest breaking chain of n"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--n", type=int, required=True)
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("witness", help="system size admitting k+1 nested breakings")
    p.add_argument("--k", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("cayley", help="Cayley embedding of a group table")
    p.add_argument("--group", default="klein", help="cyclic:N, klein, s3, d4 or q8")
    p.add_argument("--table-file", help="JSON {table, identity, name}")
    _add_common(p)
    p.set_defaults(func=cmd_cayley)

    p = sub.add_parser("gamma-table", help="Gamma(n+1) against exact n!")
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--alphas", type=_grid_arg, default=[0.5, 1.5, 2.5])
    _add_common(p)
    p.set_defaults(func=cmd_gamma_table)

    for name, func, help_text in (
        ("threshold", cmd_threshold, "P(sat) curve and logistic threshold estimate"),
        ("energy-scan", cmd_energy_scan, "ground-energy density against clause density"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--k", type=int, default=3)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--alpha-grid", type=_grid_arg, required=True)
        p.add_argument("--samples", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        if name == "threshold":
            p.add_argument("--export-failures", metavar="DIR", help="write each UNSAT sampled instance as DIMACS")
        _add_common(p)
        p.set_defaults(func=func)
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = _read_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subparser._actions}
        unknown = set(values) - set(known)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        defaults = {}
        for key, value in values.items():
            if isinstance(known[key], argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = value
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _record(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED}


def _to_csv(rows: list[dict], config: dict) -> str:
    lines = ["# config: " + json.dumps(config, sort_keys=True)]
    if rows:
        lines.append(thermo.rows_to_csv(rows).rstrip("\n"))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def render(args, result: dict) -> str:
    config = _record(args)
    if "_text" in result:
        header = "c replica-lab " + json.dumps(config, sort_keys=True) + "\n"
        return header + result["_text"]
    if args.format == "csv":
        if "_csv" in result:
            return "# config: " + json.dumps(config, sort_keys=True) + "\n" + result["_csv"]
        return _to_csv(_jsonable(result.get("rows", [])), config)
    doc = {k: v for k, v in result.items() if not k.startswith("_")}
    doc["command"] = args.command
    doc["config"] = config
    if not args.deterministic:
        doc["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
        text = render(args, args.func(args))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (VerificationError, AssertionError) as exc:
        print(f"internal check failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ReplicaLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
