"""Command-line experiment driver.

Every subcommand writes CSV (17 significant digits) to ``--out`` or stdout and,
where a fit applies, a JSON FitReport to ``--json``.  Files are written
atomically.  Exit codes: 0 success, 1 acceptance verdict failure, 2 usage
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import weights as W
from .errors import CondlabError
from .fitting import fit_log_power, fit_power, ratio_stabilization
from .io import csv_text, emit, read_csv, write_json
from .series import GrowthSeries, Kind

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- configuration ----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Flat key=value experiment description; values are kept as strings."""

    subcommand: str
    params: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"subcommand={self.subcommand}"]
        lines += [f"{k}={v}" for k, v in sorted(self.params.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        params = {}
        sub = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"config line without '=': {raw!r}")
            key, value = key.strip(), value.strip()
            if key == "subcommand":
                sub = value
            else:
                params[key] = value
        return cls(sub or "", params)

    def argv(self):
        out = []
        for k, v in self.params.items():
            if k == "inputs":
                out += v.split()
                continue
            flag = "--" + k.replace("_", "-")
            if v in ("true", "True"):
                out.append(flag)
            elif v not in ("false", "False", "", "None"):
                out += [flag, v]
        return out


def parse_range(text: str):
    """``a..b`` (every integer), ``a..b*2`` (doubling), or a comma list of either."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, _, hi = part.partition("..")
            factor = None
            if "*" in hi:
                hi, _, f = hi.partition("*")
                factor = int(f)
            lo, hi = int(lo), int(hi)
            if lo > hi or lo < 1:
                raise UsageError(f"bad range {part!r}")
            if factor:
                if factor < 2:
                    raise UsageError(f"bad range step in {part!r}")
                v = lo
                while v <= hi:
                    out.append(v)
                    v *= factor
            else:
                out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty range {text!r}")
    return sorted(set(out))


def _dyadic(lo, hi):
    out, v = [], 1
    while v <= hi:
        if v >= lo:
            out.append(v)
        v *= 2
    return out


def _system_text(arg: str) -> str:
    """An inline constructor expression, or a file holding one (optionally as system=...)."""
    p = Path(arg)
    if p.is_file():
        text = p.read_text()
        for line in text.splitlines():
            if line.strip().startswith("system="):
                return line.split("=", 1)[1].strip()
        return " ".join(line for line in text.splitlines() if not line.strip().startswith("#")).strip()
    return arg


def _build(arg):
    from .systems import build

    return build(_system_text(arg))


def _need_seed(args, why):
    if args.seed is None:
        raise UsageError(f"--seed is required for {why}")


def _fit_out(args, report):
    d = report.to_json() if hasattr(report, "to_json") else report
    if args.json:
        write_json(args.json, d)
    else:
        print(json.dumps(d, sort_keys=True), file=sys.stderr)


def _pool_map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _series_fit(series, model):
    try:
        return fit_log_power(series) if model == "log-power" else fit_power(series)
    except (ValueError, CondlabError):
        return None


# -- subcommands ------------------------------------------------------------------


def cmd_wcoef(args):
    table = W.get_table(args.lam, args.nmax, args.tol)
    emit(csv_text(["n", "w_hat"], enumerate(table.coeffs.tolist())), args.out)


def cmd_dirichlet(args):
    ms = _dyadic(args.mmin, args.mmax)
    table = W.get_table(args.lam, 2 * ms[-1])
    vals = [W.dirichlet_norm(args.lam, m, table) for m in ms]
    emit(csv_text(["m", "norm"], zip(ms, vals)), args.out)
    if len(ms) >= 5:
        _fit_out(args, fit_power(ms, vals))


def cmd_fm(args):
    norms = W.fm_norm_series(args.alpha, args.mmax)
    H = np.cumsum(1.0 / np.arange(1, args.mmax + 1))
    ms = list(range(1, args.mmax + 1)) if args.all else _dyadic(1, args.mmax)
    rows = [(m, norms[m - 1], norms[m - 1] ** 2 / H[m - 1]) for m in ms]
    emit(csv_text(["m", "norm", "norm_sq_over_H"], rows), args.out)
    dy = np.array(_dyadic(args.mmin, args.mmax))
    if len(dy) >= 5:
        fr = fit_power(H[dy - 1], norms[dy - 1] ** 2)
        fr.model = "power-in-H"
        _fit_out(args, fr)


def cmd_gram(args):
    S = _build(args.system)
    G = S.gram
    if G is None:
        raise UsageError(f"system {S.label} has no Gram matrix (not a Hilbert-space system)")
    G = np.asarray(G)
    if np.iscomplexobj(G):
        raise UsageError("complex Gram matrices are not exported; use field='real'")
    emit(csv_text([f"c{j}" for j in range(G.shape[1])], G.tolist()), args.out)


def _kmeasure_one(job):
    from .conditionality import k_measure, ktilde_measure

    text, m, which, mode, seed = job
    S = _build(text)
    fn = ktilde_measure if which == "ktilde" else k_measure
    r = fn(S, m, mode=mode, seed=seed)
    return r.m, r.value, r.kind.value, S.label


def cmd_kmeasure(args):
    if args.mode == "heuristic":
        _need_seed(args, "heuristic mode")
    text = _system_text(args.system)
    ms = parse_range(args.m)
    seed = args.seed or 0
    res = _pool_map(_kmeasure_one, [(text, m, args.which, args.mode, seed) for m in ms], args.jobs)
    series = GrowthSeries(args.which, res[0][3])
    for m, v, k, _ in res:
        series.add(m, v, k)
    emit(series.to_csv(), args.out)
    fr = _series_fit(series, args.model)
    if fr is not None:
        _fit_out(args, fr)


def cmd_delta(args):
    from .conditionality import ccdom_lower, delta_between

    if args.mode == "heuristic":
        _need_seed(args, "heuristic mode")
    S1, S2 = _build(args.system1), _build(args.system2)
    ms = parse_range(args.m)
    if args.ccdom:
        series = GrowthSeries("ccdom", f"{S1.label} <> {S2.label}")
        for m in ms:
            ccdom_lower(S1, S2, m).add_to(series)
    else:
        name = "delta" if args.full else "delta_tilde"
        series = GrowthSeries(name, f"{S1.label} / {S2.label}")
        for m in ms:
            delta_between(S1, S2, m, tilde=not args.full, mode=args.mode, seed=args.seed or 0).add_to(series)
    emit(series.to_csv(), args.out)
    fr = _series_fit(series, "power")
    if fr is not None:
        _fit_out(args, fr)


def cmd_phi(args):
    from .conditionality import phi_fundamental

    if args.sign_mode != "all_signs_exact":
        _need_seed(args, "sampled sign mode")
    S = _build(args.system)
    series = GrowthSeries("phi", S.label)
    for m in parse_range(args.m):
        phi_fundamental(S, m, args.sign_mode, seed=args.seed or 0).add_to(series)
    emit(series.to_csv(), args.out)
    fr = _series_fit(series, "power")
    if fr is not None:
        _fit_out(args, fr)


def cmd_transform(args):
    from .conditionality import transform_norms
    from .spaces import parse_space

    _need_seed(args, "the randomised part of the test battery")
    S = _build(args.system)
    U = parse_space(args.space)
    scales = parse_range(args.scales) if args.scales else None
    rep = transform_norms(S, U, args.direction, scales, seed=args.seed)
    emit(csv_text(["scale", "ratio", "extremal"], zip(rep.scales, rep.per_scale, rep.argmax)), args.out)
    if len(rep.scales) >= 5:
        st = ratio_stabilization(rep.scales, rep.per_scale)
        _fit_out(args, {"direction": rep.direction, "space": rep.space, "constant": rep.constant,
                        "limit": st.limit, "spread": st.spread, "slope": st.slope, "verdict": st.verdict})


def cmd_dkk(args):
    from .conditionality import ktilde_measure
    from .systems import almost_greedy_system

    B = _build(args.inner)
    Y = almost_greedy_system(B, args.space, args.K)
    ms = parse_range(args.m) if args.m else _dyadic(4, Y.dim)
    series = GrowthSeries("ktilde", Y.label)
    for m in ms:
        ktilde_measure(Y, m, mode=args.mode, seed=args.seed or 0).add_to(series)
    emit(series.to_csv(), args.out)
    fr = _series_fit(series, "log-power")
    if fr is not None:
        _fit_out(args, fr)


def cmd_greedy(args):
    from .acceptance import greedy_vectors
    from .conditionality import greedy_ratio_batch
    from .systems import DkkSystem

    _need_seed(args, "random test vectors")
    S = _build(args.system)
    rng = np.random.default_rng(args.seed)
    rows = []
    for s in parse_range(args.supports):
        if isinstance(S, DkkSystem):
            Ss = S.section(int(S.sigma.stops[min(S.sigma.complete_blocks(s), S.sigma.K - 1)]))
            F = greedy_vectors(rng, Ss, s, args.count)
        else:
            if s > S.dim:
                raise UsageError(f"support {s} exceeds dimension {S.dim}")
            Ss = S.section(s)
            F = rng.standard_normal((args.count, s))
        m = max(1, int(s * args.fraction))
        budget = args.budget if args.budget else 4 * m
        _, _, r = greedy_ratio_batch(Ss, F, m, seed=args.seed + s, budget=budget)
        rows.append((s, m, float(r.max()), float(r.mean())))
    emit(csv_text(["support", "m", "max_ratio", "mean_ratio"], rows), args.out)
    if len(rows) >= 5:
        _fit_out(args, fit_power([r[0] for r in rows], [r[2] for r in rows]))


def cmd_fit(args):
    header, rows = read_csv(args.input)
    if header[:5] == ["quantity", "system", "m", "value", "kind"]:
        table = GrowthSeries.from_csv(Path(args.input).read_text())
        keys = list(table)
        if args.quantity:
            keys = [k for k in keys if k[0] == args.quantity]
        if len(keys) != 1:
            raise UsageError(f"--input holds {len(keys)} matching series; select one with --quantity")
        m, v = table[keys[0]].select((Kind.EXACT, Kind.LOWER))
    else:
        try:
            xi, yi = header.index(args.x), header.index(args.y)
        except ValueError:
            raise UsageError(f"columns {args.x!r}/{args.y!r} not in header {header}")
        m = np.array([float(r[xi]) for r in rows])
        v = np.array([float(r[yi]) for r in rows])
    if args.model == "stability":
        st = ratio_stabilization(m, v, threshold=args.threshold)
        out = {"limit": st.limit, "spread": st.spread, "slope": st.slope,
               "threshold": st.threshold, "verdict": st.verdict}
    else:
        out = (fit_log_power(m, v) if args.model == "log-power" else fit_power(m, v)).to_json()
    if args.json:
        write_json(args.json, out)
    else:
        print(json.dumps(out, indent=2, sort_keys=True))


def cmd_accept(args):
    from .acceptance import run_suite

    only = set(parse_range(args.only)) if args.only else None
    results = run_suite(only, jobs=args.jobs, echo=print)
    if args.out:
        rows = [(r.number, r.title, "pass" if r.passed else "fail", r.elapsed,
                 json.dumps(r.details, sort_keys=True, default=str)) for r in results]
        emit(csv_text(["criterion", "title", "verdict", "seconds", "details"], rows), args.out)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failing: {', '.join(map(str, failed))}" if failed else ""))
    return EXIT_VERDICT if failed else EXIT_OK


def _md_table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(lines)


def cmd_report(args):
    parts = ["# condlab report", ""]
    for path in args.inputs:
        header, rows = read_csv(path)
        parts.append(f"## {Path(path).name}")
        parts.append("")
        if header[:5] == ["quantity", "system", "m", "value", "kind"]:
            for (q, s), series in GrowthSeries.from_csv(Path(path).read_text()).items():
                parts.append(f"### {q} for {s}")
                parts.append("")
                parts.append(_md_table(["m", "value", "kind"],
                                       [(m, f"{v:.6g}", k.value) for m, v, k in series.entries]))
                fr = _series_fit(series, args.model)
                if fr is not None:
                    parts.append("")
                    parts.append(f"Fitted {fr.model} exponent {fr.gamma:.4f} (R² {fr.r2:.4f}, "
                                 f"{fr.points_used} points over m = {fr.range[0]:g}..{fr.range[1]:g}).")
                parts.append("")
        else:
            def cell(c):
                try:
                    return f"{float(c):.6g}"
                except ValueError:
                    return c
            parts.append(_md_table(header, [[cell(c) for c in r] for r in rows]))
            parts.append("")
    emit("\n".join(parts).rstrip() + "\n", args.out)


# -- parser -----------------------------------------------------------------------

SUBCOMMANDS = {
    "wcoef": (cmd_wcoef, "Fourier coefficient table of the power weight |t|^lambda on [-1/2, 1/2]."),
    "dirichlet": (cmd_dirichlet, "Dirichlet kernel norms in H_lambda; reproduces the growth "
                                 "||D_m|| ~ m^((1-lambda)/2) with a power-law fit."),
    "fm": (cmd_fm, "Norms in H_{-alpha} of f_m = sum n^(-(1+alpha)/2) tau_n; reproduces the "
                   "estimate ||f_m||^2 ~ H_m (harmonic numbers)."),
    "gram": (cmd_gram, "Gram matrix of a Hilbert-space system given by a constructor tree."),
    "kmeasure": (cmd_kmeasure, "Conditionality constants k_m or k~_m (exact enumeration or seeded "
                               "heuristic search) as a growth series."),
    "delta": (cmd_delta, "Domination constants between two systems, or the lower bound "
                         "(1/2) max(delta~_m) for k~_2m of their diamond (--ccdom)."),
    "phi": (cmd_phi, "Fundamental function: largest norm of signed sums of m basis vectors."),
    "transform": (cmd_transform, "Measured besselian / hilbertian constants of a system against a "
                                 "sequence space, per dyadic scale, with a flat-ratio verdict."),
    "dkk": (cmd_dkk, "Witness k~_m series of the almost greedy basis built from an inner basis, "
                     "a subsymmetric space and dyadic blocks; reproduces (log m)^gamma growth."),
    "greedy": (cmd_greedy, "Greedy-to-best approximation ratios of the thresholding algorithm "
                           "on seeded random vectors, per support size."),
    "fit": (cmd_fit, "Power, log-power or flat-ratio fit of a CSV series."),
    "accept": (cmd_accept, "Run the acceptance suite; exit 1 if any criterion fails."),
    "report": (cmd_report, "Merge CSV outputs into a Markdown summary (gnuplot-ready columns kept)."),
}


def _add_common(p):
    p.add_argument("--config", help="key=value file; explicit flags override its entries")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (required by heuristic modes)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results reduced in order)")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--json", help="FitReport JSON path (default: one line on stderr)")
    p.add_argument("--emit-config", help="write the resolved key=value config to this path")


def build_parser():
    parser = argparse.ArgumentParser(prog="condlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"condlab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    ps = {}
    for name, (_, helptext) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=helptext, description=helptext)
        _add_common(p)
        ps[name] = p

    ps["wcoef"].add_argument("--lambda", dest="lam", type=float, required=True)
    ps["wcoef"].add_argument("--nmax", type=int, required=True)
    ps["wcoef"].add_argument("--tol", type=float, default=W.DEFAULT_TOL)

    ps["dirichlet"].add_argument("--lambda", dest="lam", type=float, required=True)
    ps["dirichlet"].add_argument("--mmax", type=int, required=True)
    ps["dirichlet"].add_argument("--mmin", type=int, default=16)

    ps["fm"].add_argument("--alpha", type=float, required=True)
    ps["fm"].add_argument("--mmax", type=int, required=True)
    ps["fm"].add_argument("--mmin", type=int, default=64)
    ps["fm"].add_argument("--all", action="store_true", help="every m instead of powers of two")

    ps["gram"].add_argument("--system", required=True, help="constructor expression or file")

    p = ps["kmeasure"]
    p.add_argument("--system", required=True, help="constructor expression or file")
    p.add_argument("--m", required=True, help="range: 1..12, 4..1024*2 or a comma list")
    p.add_argument("--mode", choices=["exact", "heuristic"], default="exact")
    p.add_argument("--which", choices=["ktilde", "k"], default="ktilde")
    p.add_argument("--model", choices=["power", "log-power"], default="power")

    p = ps["delta"]
    p.add_argument("--system1", required=True)
    p.add_argument("--system2", required=True)
    p.add_argument("--m", required=True)
    p.add_argument("--mode", choices=["exact", "heuristic"], default="exact")
    p.add_argument("--full", action="store_true", help="delta_m over all |A| = m instead of A = [m]")
    p.add_argument("--ccdom", action="store_true", help="emit the diamond lower bound at index 2m")

    p = ps["phi"]
    p.add_argument("--system", required=True)
    p.add_argument("--m", required=True)
    p.add_argument("--sign-mode", choices=["all_signs_exact", "sampled"], default="all_signs_exact")

    p = ps["transform"]
    p.add_argument("--system", required=True)
    p.add_argument("--space", required=True, help="lp:p, lorentz:p,q or wlorentz:<file>,q")
    p.add_argument("--direction", choices=["besselian", "hilbertian"], default="besselian")
    p.add_argument("--scales", help="scale range (default: dyadic up to the dimension)")

    p = ps["dkk"]
    p.add_argument("--inner", required=True, help="inner basis constructor expression or file")
    p.add_argument("--space", default="lp:2")
    p.add_argument("--K", type=int, default=10, help="number of dyadic blocks |sigma_n| = 2^n")
    p.add_argument("--m", help="range (default: powers of two from 16)")
    p.add_argument("--mode", choices=["exact", "heuristic"], default="exact")

    p = ps["greedy"]
    p.add_argument("--system", required=True)
    p.add_argument("--supports", required=True, help="range of support sizes, e.g. 64..1024*2")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--fraction", type=float, default=0.25, help="m = fraction * support")
    p.add_argument("--budget", type=int, default=0, help="swap proposals per vector (default 4m)")

    p = ps["fit"]
    p.add_argument("--input", required=True)
    p.add_argument("--model", choices=["power", "log-power", "stability"], default="power")
    p.add_argument("--quantity")
    p.add_argument("--x", default="m")
    p.add_argument("--y", default="value")
    p.add_argument("--threshold", type=float, default=0.02)

    ps["accept"].add_argument("--only", help="criterion numbers, e.g. 1..6 or 2,5")

    ps["report"].add_argument("inputs", nargs="+")
    ps["report"].add_argument("--model", choices=["power", "log-power"], default="power")
    return parser


_NOT_CONFIG = {"config", "emit_config", "subcommand"}


def _resolve(parser, argv):
    """Splice ``--config`` entries in ahead of the explicit flags, so flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        cfg = ExperimentConfig.from_text(Path(known.config).read_text())
        subs = [a for a in rest if a in SUBCOMMANDS]
        sub = subs[0] if subs else cfg.subcommand
        if not sub:
            raise UsageError("--config names no subcommand; give one on the command line")
        if cfg.subcommand and cfg.subcommand != sub:
            raise UsageError(f"--config is for {cfg.subcommand!r}, not {sub!r}")
        if subs:
            rest.remove(sub)
        argv = [sub] + cfg.argv() + rest
    return parser.parse_args(argv)


_SYSTEM_KEYS = {"system", "system1", "system2", "inner"}


def config_of(args) -> ExperimentConfig:
    params = {}
    for k, v in sorted(vars(args).items()):
        if k in _NOT_CONFIG or v is None or v is False:
            continue
        params[k] = " ".join(map(str, v)) if isinstance(v, list) else str(v)
        if k in _SYSTEM_KEYS:
            params[k] = _system_text(params[k])
    if "lam" in params:
        params["lambda"] = params.pop("lam")
    return ExperimentConfig(args.subcommand, params)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _resolve(parser, argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (UsageError, OSError) as exc:
        print(f"condlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.jobs < 1:
        print("condlab: usage error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.emit_config:
            from .io import atomic_write_text

            atomic_write_text(args.emit_config, config_of(args).to_text())
        code = SUBCOMMANDS[args.subcommand][0](args)
        return EXIT_OK if code is None else code
    except UsageError as exc:
        print(f"condlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CondlabError as exc:
        if isinstance(exc, ValueError):
            print(f"condlab: usage error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"condlab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"condlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
