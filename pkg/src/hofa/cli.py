"""Command-line front end.

Every run emits one JSON report (stdout unless --out is given) of the form
{"schema": ..., "command": ..., "params": ..., "result": ...} with sorted
keys, so identical inputs give byte-identical output.

Parameter precedence: command-line flags, then HOFA_<NAME> environment
variables, then `key = value` lines of the --config file, then built-in
defaults.

Exit codes: 0 success, 2 invalid input, 3 a contract or assertion failed,
4 I/O error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import acceptance, decompose, forms, gowers, nilgroup, orbits, patterns
from .exprlang import eval_expr, parse_expr
from .funcspace import DomainSpec, FunctionFileError, load_function

SCHEMA = "hofa.report/1"

EXIT_OK, EXIT_INVALID, EXIT_CONTRACT, EXIT_IO = 0, 2, 3, 4


class ContractFailure(RuntimeError):
    pass


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return str(obj)


def _clean(obj):
    """Replace non-finite floats so the report stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def render(command, params, result):
    doc = {"schema": SCHEMA, "version": __version__, "command": command,
           "params": params, "result": result}
    text = json.dumps(doc, default=_json_default, sort_keys=True)
    return json.dumps(_clean(json.loads(text)), sort_keys=True, indent=2) + "\n"


# config -----------------------------------------------------------------------------------

def read_config(path):
    """`key = value` lines; '#' starts a comment; keys use dashes or underscores."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            out[key.strip().replace("-", "_")] = value.strip().strip('"')
    return out


def env_config(environ=None):
    environ = os.environ if environ is None else environ
    return {k[5:].lower(): v for k, v in environ.items() if k.startswith("HOFA_") and len(k) > 5}


def _truthy(text):
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# argument parsing -------------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--deterministic", action="store_true")


def _add_function_input(p):
    p.add_argument("--input", help="function file (.json or .csv)")
    p.add_argument("--expr", help="expression to sample instead of --input")
    p.add_argument("--N", type=int, help="domain size for --expr")
    p.add_argument("--domain", choices=["interval", "cyclic"])


def build_parser():
    parser = argparse.ArgumentParser(prog="hofa", description="Higher-order Fourier analysis toolkit")
    parser.add_argument("--version", action="version", version=f"hofa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gowers", help="Gowers U^k norm of a function")
    _add_function_input(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--ntilde", default="AUTO")
    p.add_argument("--method", choices=["direct", "fft"], default="direct")
    p.add_argument("--allow-large-k", action="store_true")
    _add_common(p)

    p = sub.add_parser("count", help="multilinear pattern average")
    _add_function_input(p)
    p.add_argument("--forms", default="n; n+d; n+2d")
    p.add_argument("--gvn", action="store_true", help="also run the von Neumann comparison")
    _add_common(p)

    p = sub.add_parser("csc", help="Cauchy-Schwarz complexity")
    p.add_argument("--forms", default="n; n+d; n+2d")
    _add_common(p)

    p = sub.add_parser("flag", help="power flag of a form system")
    p.add_argument("--forms", default="n; n+d; n+2d; n+3d")
    p.add_argument("--s", type=int, default=2)
    _add_common(p)

    p = sub.add_parser("leibman", help="Leibman group of a form system")
    p.add_argument("--group", default="heisenberg")
    p.add_argument("--forms", default="n; n+d; n+2d; n+3d")
    _add_common(p)

    p = sub.add_parser("equidist", help="equidistribution witness for an orbit")
    p.add_argument("--group", default=None)
    p.add_argument("--seq", required=False, help="sequence JSON file")
    p.add_argument("--N", type=int, default=2000)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--max-complexity", type=int, default=10)
    _add_common(p)

    p = sub.add_parser("count-lemma", help="orbit count against the Leibman Haar integral")
    p.add_argument("--group", default=None)
    p.add_argument("--seq", help="sequence JSON file (default: irrational Heisenberg data)")
    p.add_argument("--forms", default="n; n+d; n+2d")
    p.add_argument("--N", type=int, default=500)
    p.add_argument("--samples", type=float, default=1e5)
    _add_common(p)

    p = sub.add_parser("decompose", help="three-part regularization")
    _add_function_input(p)
    p.add_argument("--s", type=int, default=1)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--growth", choices=sorted(decompose.GROWTH), default="exp")
    p.add_argument("--m0", type=float, default=1.0)
    p.add_argument("--cap", type=float, default=1e4)
    p.add_argument("--report", help="alias for --out")
    _add_common(p)

    p = sub.add_parser("bhk", help="BHK weighted AP count on a synthetic set")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--construction", default="bohr:alpha=0.618,delta=0.15")
    p.add_argument("--N", type=int, default=5000)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--eps-prime", type=float)
    p.add_argument("--csv", help="write the per-difference profile here")
    _add_common(p)

    p = sub.add_parser("gw-check", help="statement-level check under top-power independence")
    p.add_argument("--forms", default="n; n+d; n+2d")
    p.add_argument("--s", type=int, default=1)
    p.add_argument("--N", type=int, default=64)
    _add_common(p)

    p = sub.add_parser("selftest", help="run the acceptance criteria")
    p.add_argument("--only", help="comma-separated criterion numbers")
    _add_common(p)
    return parser


def _apply_defaults(parser, argv, environ=None):
    """Layer config file and environment values under the command-line flags."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    layered = {}
    if known.config:
        layered.update(read_config(known.config))
    layered.update(env_config(environ))
    if not layered:
        return
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            dests = {a.dest: a for a in sp._actions}
            updates = {}
            for key, value in layered.items():
                if key in dests and key not in ("help", "config"):
                    a = dests[key]
                    if isinstance(a, argparse._StoreTrueAction):
                        updates[key] = _truthy(value)
                    else:
                        updates[key] = value
            sp.set_defaults(**updates)


# helpers --------------------------------------------------------------------------------------

def _validate(cond, message):
    if not cond:
        raise ValueError(message)


def _load_input(args):
    if args.input:
        return load_function(args.input, args.domain)
    if args.expr:
        _validate(args.N is not None and args.N >= 1, "--expr needs --N >= 1")
        kind = args.domain or "interval"
        return eval_expr(parse_expr(args.expr), DomainSpec(kind, args.N))
    raise ValueError("give --input or --expr")


def _default_sequence(group):
    from fractions import Fraction
    irr = [Fraction(math.sqrt(2) - 1).limit_denominator(10 ** 12),
           Fraction(math.sqrt(3) - 1).limit_denominator(10 ** 12)]
    coords = [0] * group.dim
    lin = [0] * group.dim
    for j, x in zip(group.block(1), irr):
        lin[j] = x
    return nilgroup.PolySequence.from_coords(group, [coords, lin])


def _load_sequence(args):
    group = nilgroup.builtin_group(args.group) if args.group else None
    if args.seq:
        with open(args.seq) as fh:
            return nilgroup.sequence_from_json(json.load(fh), group)
    return _default_sequence(group or nilgroup.heisenberg())


# commands -------------------------------------------------------------------------------------

def cmd_gowers(args):
    _validate(args.k >= 1, "--k must be >= 1")
    f = _load_input(args)
    ntilde = None if str(args.ntilde).upper() == "AUTO" else int(args.ntilde)
    res = gowers.gowers_norm(f, args.k, ntilde=ntilde, deterministic=args.deterministic,
                             method=args.method, allow_large_k=args.allow_large_k,
                             threads=args.threads)
    return res.to_json()


def cmd_count(args):
    psi = forms.parse_forms(args.forms)
    f = _load_input(args)
    fs = [f] * psi.t
    domain = f.domain.kind
    value = patterns.multilinear_average(fs, psi, domain)
    out = {"value": [value.real, value.imag], "abs": abs(value), "system": psi.to_json(),
           "domain": domain, "N": f.N}
    if args.gvn:
        check = patterns.gvn_check(fs, psi, domain)
        out["gvn"] = check
        if check["pass"] is False:
            raise ContractFailure(f"von Neumann bound violated: {check}")
    return out


def cmd_csc(args):
    psi = forms.parse_forms(args.forms)
    return {"system": psi.to_json(), "complexity": forms.cs_complexity(psi),
            "pairwiseIndependent": forms.pairwise_independent(psi)}


def cmd_flag(args):
    _validate(args.s >= 1, "--s must be >= 1")
    psi = forms.parse_forms(args.forms)
    flag = forms.power_flag(psi, args.s)
    return {"system": psi.to_json(), "flag": flag.to_json(),
            "topPowerIndependent": forms.top_power_independence(psi, args.s)}


def cmd_leibman(args):
    group = nilgroup.builtin_group(args.group)
    _validate(group.s <= 2, "Leibman groups are supported for step <= 2")
    psi = forms.parse_forms(args.forms)
    lg = orbits.leibman_group(group, psi)
    return {"group": group.to_json(), "system": psi.to_json(), "dim": lg.dim,
            "generators": [{"vector": [int(x) for x in v], "degree": d} for v, d in lg.generators]}


def cmd_equidist(args):
    _validate(args.N >= 1 and args.delta > 0, "--N must be >= 1 and --delta > 0")
    seq = _load_sequence(args)
    disc = orbits.orbit_discrepancy(seq, args.N)
    w = orbits.equidist_witness(seq, args.N, args.delta, args.max_complexity)
    return {"discrepancy": disc, "witness": w.to_json() if w else None,
            "equidistributed": w is None}


def cmd_count_lemma(args):
    samples = int(args.samples)
    _validate(samples >= 1 and args.N >= 1, "--samples and --N must be >= 1")
    seq = _load_sequence(args)
    psi = forms.parse_forms(args.forms)
    rows = orbits.counting_report(seq, psi, args.N, samples, args.seed)
    worst = max(rows, key=lambda r: r.residual)
    return {"empirical": worst.empirical, "haar": worst.haar, "stderr": worst.stderr,
            "residual": worst.residual, "function": worst.name,
            "rows": [r.to_json() for r in rows]}


def cmd_decompose(args):
    _validate(args.s >= 1 and args.eps > 0, "--s must be >= 1 and --eps > 0")
    f = _load_input(args)
    try:
        res = decompose.regularize(f, args.s, args.eps, args.growth, cap=args.cap,
                                   m0=args.m0, seed=args.seed)
    except decompose.BudgetOverflow as exc:
        raise ContractFailure(f"budget overflow: {exc}",
                              {"error": str(exc), "partial": exc.partial}) from exc
    out = res.to_json()
    if not res.ok:
        raise ContractFailure(f"certificates failed: {res.certificates}")
    return out


def cmd_bhk(args):
    _validate(args.N >= 10 and args.eps > 0, "--N must be >= 10 and --eps > 0")
    report = patterns.bhk_verify_synthetic(args.k, args.construction, args.eps, args.N,
                                           args.eps_prime, args.seed)
    if args.csv:
        con = patterns.build_construction(args.construction, args.N, args.seed)
        patterns.ap_profile(con.indicator, args.k).to_csv(args.csv)
    return report


def cmd_gw_check(args):
    psi = forms.parse_forms(args.forms)
    return patterns.gw_statement_check(psi, args.s, args.N)


def cmd_selftest(args):
    only = [int(x) for x in args.only.split(",")] if args.only else None
    results = acceptance.run_all(only, echo=lambda line: print(line, file=sys.stderr))
    out = {"criteria": [r.to_json() for r in results],
           "passed": sum(r.passed for r in results), "total": len(results)}
    if not all(r.passed for r in results):
        raise ContractFailure("selftest failed", out)
    return out


COMMANDS = {
    "gowers": cmd_gowers, "count": cmd_count, "csc": cmd_csc, "flag": cmd_flag,
    "leibman": cmd_leibman, "equidist": cmd_equidist, "count-lemma": cmd_count_lemma,
    "decompose": cmd_decompose, "bhk": cmd_bhk, "gw-check": cmd_gw_check,
    "selftest": cmd_selftest,
}


def _params(args):
    skip = {"command", "out", "config", "report"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, text):
    path = args.out or getattr(args, "report", None)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None, environ=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_defaults(parser, argv, environ)
    except OSError as exc:
        print(f"hofa: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"hofa: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        result = COMMANDS[args.command](args)
        _emit(args, render(args.command, _params(args), result))
        return EXIT_OK
    except ContractFailure as exc:
        payload = exc.args[1] if len(exc.args) > 1 else {"error": str(exc)}
        try:
            _emit(args, render(args.command, _params(args), payload))
        except OSError:
            pass
        print(f"hofa: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONTRACT
    except decompose.OracleBreach as exc:
        print(f"hofa: oracle contract breach: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (OSError, FunctionFileError) as exc:
        print(f"hofa: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"hofa: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
