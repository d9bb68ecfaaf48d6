"""Command-line interface: ``bqp {inspect,simulate,interlace,verify}``.

Exit codes: 0 success, 1 a check failed, 2 usage or input error,
3 numeric precondition failure (divergent Green function, non-excessive
measure, super-Markovian intensity, ...).
"""

import argparse
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .bmc import SamplerCaps, sample_biased_bmc, sample_bmc, sample_spine
from .errors import BQPError, NumericPreconditionError
from .forest import write_forest_stream
from .io import resolve_measure, resolve_model, state_token
from .rng import run_chunks

REPORT_SCHEMA = "bqp-report v1"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _states(text):
    return [state_token(t) for t in text.replace(",", " ").split()]


def _fmt(a):
    return np.array2string(np.asarray(a), precision=12, max_line_width=120)


@contextmanager
def _output(path):
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            yield fh


def _B(args, model):
    if args.B is not None:
        return _states(args.B)
    if model.B is None:
        raise UsageError("no B given and the model declares none")
    return list(model.B)


def _caps(args):
    return SamplerCaps(args.max_generations, args.max_population)


# -- inspect ------------------------------------------------------------------

def cmd_inspect(args):
    from .decorability import criteria_report
    from .model import normed_model
    from .potential import taboo_return_kernel

    model = resolve_model(args.model)
    out = sys.stdout
    print(f"# {REPORT_SCHEMA}", file=out)
    print(f"model: {model.name}", file=out)
    print(f"states: {' '.join(map(str, model.states))}", file=out)
    print(f"mean offspring m_x: {_fmt(model.mean_offspring)}", file=out)
    print(f"Q:\n{_fmt(model.Q)}", file=out)
    print(f"spectral radius: {model.spectral_radius:.12g}", file=out)
    out.flush()
    print(f"G:\n{_fmt(model.G)}", file=out)
    if args.B is None and model.B is None:
        return EXIT_OK
    B = _B(args, model)
    nm = normed_model(model, B)
    print(f"B: {' '.join(map(str, B))}", file=out)
    print(f"h: {_fmt(nm.h)}", file=out)
    print(f"p^h:\n{_fmt(nm.ph)}", file=out)
    print(f"Q^B:\n{_fmt(taboo_return_kernel(model, B))}", file=out)
    print("decorability:", file=out)
    print(criteria_report(model, B, args.depth_k).text(model.states), file=out)
    return EXIT_OK


# -- simulate -----------------------------------------------------------------

def _simulate_chunk(rng, size, kind, model, B, x, caps):
    out = []
    for _ in range(size):
        if kind == "bmc":
            out.append(sample_bmc(model, x, rng, caps))
        elif kind == "biased":
            out.append(sample_biased_bmc(model, B, x, rng, caps))
        else:
            out.append(sample_spine(model, B, x, rng, caps))
    return out


def cmd_simulate(args):
    model = resolve_model(args.model)
    if args.x is None:
        raise UsageError("--x is required")
    x = model.index(state_token(args.x))
    B = _B(args, model) if args.kind != "bmc" else None
    caps = _caps(args)
    chunks = run_chunks(_simulate_chunk, args.n, args.seed, args.kind, model, B, x, caps,
                        workers=args.workers)
    items = [it for c in chunks for it in c]
    with _output(args.out) as fh:
        for i, it in enumerate(items):
            head = {"kind": args.kind, "model": model.name, "index": i, "seed": args.seed,
                    "x": args.x, "caps": str(caps)}
            if args.kind == "spine":
                head["status"] = it.status
                fh.write("# " + " ".join(f"{k}={v}" for k, v in head.items()) + "\n")
                for k, s in enumerate(it.states):
                    fh.write(f"{k} {model.states[s]}\n")
                fh.write("\n")
            else:
                write_forest_stream(fh, [it], head, model.states)
    return EXIT_OK


# -- interlace ----------------------------------------------------------------

def _interlace_chunk(rng, size, nu, model, B, u, caps):
    from .interlacement import InterlacementSampler

    sampler = InterlacementSampler(nu, model, B, caps)
    return [sampler.sample(u, rng) for _ in range(size)]


def cmd_interlace(args):
    from .interlacement import occupation_csv, occupation_z_scores, tree_occupations
    from .potential import entrance_measure

    model = resolve_model(args.model)
    B = _B(args, model)
    if args.nu is None:
        raise UsageError("--nu is required (e.g. 'green-row 0' or a measure file)")
    nu = resolve_measure(model, args.nu)
    if args.u < 0:
        raise UsageError("--u must be non-negative")
    caps = _caps(args)
    if args.Bprime is not None and not set(B) <= set(_states(args.Bprime)):
        raise UsageError("--Bprime must contain every state of --B")
    from .interlacement import _require_sub_markovian
    _require_sub_markovian(model)
    target = entrance_measure(nu, model, B) @ np.asarray(model.G)
    samples = [s for c in run_chunks(_interlace_chunk, args.n, args.seed, nu, model, B,
                                     args.u, caps, workers=args.workers) for s in c]
    sums = np.zeros(model.n)
    squares = np.zeros(model.n)
    for s in samples:
        _, prog = tree_occupations(s, model, B)
        sums += prog.sum(axis=0)
        squares += (prog ** 2).sum(axis=0)
    runs = max(len(samples), 1)
    z = occupation_z_scores(sums, squares, args.u * runs, target)
    csv = occupation_csv(model.states, sums / runs, args.u * target, z)
    status = EXIT_OK
    check = None
    if args.Bprime is not None:
        from .verify import interlacement_qp_test
        check = interlacement_qp_test(model, B, _states(args.Bprime), nu, args.u, args.n,
                                      args.seed, args.workers, caps)
        status = EXIT_OK if check.passed else EXIT_FAIL
    if args.out is None:
        sys.stdout.write(csv)
        if check is not None:
            print("\n".join(check.lines()))
        return status
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "occupation.csv").write_text(csv)
    mass = samples[0].intensity_mass if samples else float("nan")
    nu_txt = args.nu.replace(" ", ":")
    B_txt = ",".join(map(str, B))
    with open(out / "interlacement.txt", "w") as fh:
        for r, s in enumerate(samples):
            head = {"replica": r, "nu": nu_txt, "B": B_txt, "u": args.u, "seed": args.seed,
                    "caps": str(caps), "mass": f"{mass:.12g}"}
            write_forest_stream(fh, s.trees, head, model.states)
    if check is not None:
        (out / "progeny_check.txt").write_text("\n".join(check.lines()) + "\n")
    return status


# -- verify -------------------------------------------------------------------

def cmd_verify(args):
    from . import acceptance

    keys = sorted(acceptance.CRITERIA) if args.criteria is None else [
        int(k) for k in args.criteria.replace(",", " ").split()]
    for k in keys:
        if k not in acceptance.CRITERIA:
            raise UsageError(f"unknown criterion {k}")
    reports = []
    if args.debug_corrupt_h is not None:
        from .model import reference_model
        model = reference_model("A")
        acceptance.corrupt_h(model, [0], args.debug_corrupt_h)
        reports.append(acceptance.criterion_4(args.seed, args.scale, args.workers, model=model))
        reports[-1].name = "spine identity with corrupted h"
    for k in keys:
        rep = acceptance.CRITERIA[k](seed=args.seed, scale=args.scale, workers=args.workers)
        reports.append(rep)
        print(rep.line(), flush=True)
    if args.debug_corrupt_h is not None:
        print(reports[0].line())
    ok = all(r.passed for r in reports)
    summary = {
        "schema": REPORT_SCHEMA,
        "seed": args.seed,
        "scale": args.scale,
        "passed": ok,
        "reports": [{"name": r.name, "statistic": r.statistic, "threshold": r.threshold,
                     "passed": r.passed, "n_samples": r.n_samples,
                     "lines": r.lines()} for r in reports],
    }
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, default=str) + "\n")
        rows = ["name,statistic,threshold,passed,n_samples,seed"]
        for r in reports:
            rows += [",".join(str(v) for v in row) for row in r.csv_rows()]
        (out / "summary.csv").write_text("\n".join(rows) + "\n")
    else:
        print(json.dumps({"passed": ok, "failed": [r.name for r in reports if not r.passed]}))
    return EXIT_OK if ok else EXIT_FAIL


# -- parser ---------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="bqp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--model", default="A",
                        help="A, B, C, a model file, or FILE:NAME (default A)")
        sp.add_argument("--B", help="norming region, e.g. '0' or '0,1' (default: model's)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--workers", type=int, default=1)
            sp.add_argument("--max-generations", type=int, default=10_000)
            sp.add_argument("--max-population", type=int, default=1_000_000)

    sp = sub.add_parser("inspect", help="exact operators of a model")
    common(sp, seed=False)
    sp.add_argument("--depth", "--depth-k", dest="depth_k", type=int, default=500,
                    help="truncation depth of the criteria sums (default 500)")
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("simulate", help="sample trees or spines")
    sp.add_argument("kind", choices=["bmc", "biased", "spine"])
    common(sp)
    sp.add_argument("--x", help="start state")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--out", help="output file (default stdout)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("interlace", help="sample branching interlacements")
    common(sp)
    sp.add_argument("--nu", help="'green-row STATE' or a measure file of 'state value' lines")
    sp.add_argument("--u", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=1, help="number of independent replicas")
    sp.add_argument("--Bprime", help="a superset B' of B: also check entrance-progeny "
                    "occupation for B' and for B among the B' trees (exit 1 on failure)")
    sp.add_argument("--out", help="output directory (default: CSV to stdout)")
    sp.set_defaults(func=cmd_interlace)

    sp = sub.add_parser("verify", help="run the acceptance matrix")
    sp.add_argument("--seed", type=int, default=2024)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--scale", type=float, default=1.0,
                    help="multiplier for all Monte Carlo sample sizes")
    sp.add_argument("--criteria", help="subset, e.g. '1,2,3'")
    sp.add_argument("--out", help="directory for summary.json and summary.csv")
    sp.add_argument("--debug-corrupt-h", type=float, metavar="FACTOR",
                    help="scale h off B by FACTOR and rerun the spine check (must fail)")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericPreconditionError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, BQPError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
