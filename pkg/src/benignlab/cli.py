"""Command-line front end.

Each subcommand prints its primary output (CSV or JSON) to stdout and, when
an output directory is configured (``--out-dir`` or ``BENIGNLAB_OUTPUT_DIR``),
also writes it to ``<out-dir>/<name>.csv|json``. Options may come from a
JSON file given with ``--config``; explicit flags override it.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 size cap exceeded. Errors are reported as JSON on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BenignLabError, ConfigError, NumericalError, SizeCapExceeded
from .ranks import DEFAULT_B, is_inf, rank_profile
from .report import (
    RISK_COLUMNS, SCAN_COLUMNS, append_csv_row, csv_text, dumps, jsonable, profile_csv,
)
from .risk import eigen_concentration_probe, exact_risk, mc_risk
from .sampling import Z_DISTS, RegressionInstance, make_theta_star
from .spectrum import (
    DEFAULT_TOL, ExplicitSpectrum, FamilySpec, Spectrum, make_explicit, spectrum_from_ranks,
    truncate,
)
from .theory import benign_scan

OUTPUT_DIR_ENV = "BENIGNLAB_OUTPUT_DIR"

_KEY_ALIASES = {"a": "alpha", "b": "beta", "e": "eps"}


# ---------------------------------------------------------------------------
# family strings


def parse_family(text: str) -> FamilySpec | ExplicitSpectrum:
    """Parse ``name:key=value,...``.

    ``explicit:values=1;0.5;0.25`` (or ``explicit:1;0.5;0.25``) gives an
    explicit spectrum; other names map to :class:`FamilySpec` variants and
    their values may be rate rules in n such as ``n^1.5`` or ``ceil(n^2)``.
    """
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower()
    if not name:
        raise ConfigError(f"empty family name in {text!r}")
    if name == "explicit":
        body = rest.split("=", 1)[1] if rest.startswith("values=") else rest
        try:
            return make_explicit(float(v) for v in body.split(";") if v.strip())
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad explicit values {body!r}") from None
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"expected key=value, got {item!r}")
        key = _KEY_ALIASES.get(key.strip().lower(), key.strip().lower())
        params[key] = value.strip()
    return FamilySpec.make(name, **params)


def load_covariance(path) -> tuple[ExplicitSpectrum, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors of a dense symmetric CSV matrix."""
    try:
        M = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read covariance {path}: {exc}") from None
    if M.shape[0] != M.shape[1]:
        raise ConfigError(f"covariance must be square, got {M.shape}")
    if not np.allclose(M, M.T, rtol=1e-10, atol=1e-12):
        raise ConfigError("covariance is not symmetric")
    w, V = np.linalg.eigh((M + M.T) / 2)
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    # round-off can push zero eigenvalues slightly negative
    w[np.abs(w) <= 1e-12 * max(abs(w[0]), 1.0)] = 0.0
    return make_explicit(w), V


def _family_label(source) -> tuple[str, str]:
    if isinstance(source, FamilySpec):
        return source.variant, ";".join(f"{k}={r}" for k, r in source.params)
    return "explicit", f"p={source.length}"


def _resolve_source(args):
    if getattr(args, "covariance", None):
        spec, V = load_covariance(args.covariance)
        return spec, V
    if not args.family:
        raise ConfigError("one of --family or --covariance is required")
    return parse_family(args.family), None


def _spectrum_at(source, n: int | None) -> Spectrum:
    if isinstance(source, FamilySpec):
        if n is None:
            if source.depends_on_n:
                raise ConfigError(f"family {source} depends on n; pass --n")
            n = 1
        return source.at(n)
    return source


def _finite(spec: Spectrum, p: int | None) -> Spectrum:
    if p is not None:
        return truncate(spec, p)[0]
    if spec.length is None:
        raise ConfigError("this command needs a finite spectrum; pass --truncate P")
    return spec


def _theta(args, p: int, basis) -> np.ndarray:
    vector = None
    if args.theta_mode == "explicit":
        if not args.theta_file:
            raise ConfigError("--theta-mode explicit needs --theta-file")
        vector = np.loadtxt(args.theta_file, delimiter=",", ndmin=1).ravel()
        if basis is not None:
            if vector.shape != (basis.shape[0],):
                raise ConfigError(f"theta has {vector.size} entries, covariance is {basis.shape[0]}")
            vector = basis.T @ vector
    return make_theta_star(p, args.theta_norm, args.theta_mode, seed=args.seed, vector=vector)


# ---------------------------------------------------------------------------
# output


def resolved_config(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _out_dir(args) -> Path | None:
    d = args.out_dir or os.environ.get(OUTPUT_DIR_ENV)
    if not d:
        return None
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(args, text: str, ext: str, stdout: bool = True) -> None:
    if stdout:
        sys.stdout.write(text)
    d = _out_dir(args)
    if d is not None:
        (d / f"{args.name or args.command}.{ext}").write_text(text)


def _json_payload(args, body: dict) -> dict:
    return {**body, "config": resolved_config(args), "version": __version__}


def _csv_header(args, extra: dict | None = None) -> dict:
    return {**(extra or {}), "config": resolved_config(args), "version": __version__}


# ---------------------------------------------------------------------------
# subcommands


def cmd_ranks(args) -> None:
    source, _ = _resolve_source(args)
    spec = _spectrum_at(source, args.n)
    if args.kmax is None and args.n is None:
        raise ConfigError("ranks needs --kmax or --n")
    prof = rank_profile(spec, args.n, args.b, args.kmax, args.tol)
    if len(prof.r) == 0:
        raise ConfigError("spectrum has no positive eigenvalue")
    text = profile_csv(prof, {"config": resolved_config(args)})
    _emit(args, text, "csv")


def cmd_kstar(args) -> None:
    source, _ = _resolve_source(args)
    spec = _spectrum_at(source, args.n)
    prof = rank_profile(spec, args.n, args.b, args.kmax, args.tol)
    body = {"k_star": prof.k_star, "variance_term": prof.variance_term}
    if is_inf(prof.k_star):
        body["reason"] = prof.k_star_reason
    _emit(args, dumps(_json_payload(args, body)), "json")


def _instance(args):
    source, basis = _resolve_source(args)
    spec = _finite(_spectrum_at(source, args.n), args.truncate)
    theta = _theta(args, spec.length, basis)
    inst = RegressionInstance.from_spectrum(
        spec, args.n, theta, sigma=args.sigma, z_dist=args.z_dist, seed=args.seed)
    return source, spec, inst


def _risk_output(args, source, spec, report) -> None:
    prof = rank_profile(spec, args.n, args.b)
    body = {**report.to_dict(), "kstar": prof.k_star, "variance_term": prof.variance_term}
    _emit(args, dumps(_json_payload(args, body)), "json")
    if args.csv:
        variant, params = _family_label(source)
        append_csv_row(args.csv, RISK_COLUMNS, [
            report.n, report.p, variant, params, report.seed, report.bias_term,
            report.trace_c, report.expected_risk_given_X, report.mc_mean, report.mc_stderr,
            prof.k_star, prof.variance_term,
        ])


def cmd_risk_exact(args) -> None:
    source, spec, inst = _instance(args)
    _risk_output(args, source, spec, exact_risk(inst, args.rcond))


def cmd_risk_mc(args) -> None:
    source, spec, inst = _instance(args)
    report = mc_risk(inst, args.replicas, args.mode, args.rcond, args.threads,
                     args.allow_degenerate)
    _risk_output(args, source, spec, report)


def _n_grid(text) -> list[int]:
    if isinstance(text, list):
        return [int(v) for v in text]
    try:
        grid = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad n grid {text!r}") from None
    if not grid or min(grid) < 1:
        raise ConfigError("n grid must list positive integers")
    return grid


def cmd_benign_scan(args) -> None:
    source, _ = _resolve_source(args)
    if not isinstance(source, FamilySpec):
        raise ConfigError("benign-scan needs a parametric family")
    res = benign_scan(
        source, _n_grid(args.n_grid), args.b, args.seeds, args.replicas, args.sigma,
        args.theta_norm, args.theta_mode, args.z_dist, not args.no_mc, args.seed,
        args.threads, args.allow_degenerate,
    )
    rows = ([getattr(r, c) for c in SCAN_COLUMNS] for r in res.rows)
    text = csv_text(SCAN_COLUMNS, rows, _csv_header(args, {"family": res.family, "b": res.b}))
    sidecar = _json_payload(args, {
        "family": res.family,
        "rules": {k: str(r) for k, r in source.params},
        "b": res.b,
        "verdict": res.verdict.to_dict(),
        "notes": res.notes,
    })
    _emit(args, text, "csv")
    _emit(args, dumps(sidecar), "json", stdout=False)
    if args.verdict_json:
        Path(args.verdict_json).write_text(dumps(sidecar))


def _spectrum_outputs(args, spec: Spectrum, count: int, extra: dict | None = None) -> None:
    lam = spec.eigenvalues(1, count)
    payload = _json_payload(args, {"spectrum": spec.to_dict(), **(extra or {})})
    _emit(args, dumps(payload), "json")
    text = csv_text(["i", "lambda"], ((i, v) for i, v in enumerate(lam, start=1)),
                    _csv_header(args, {"spectrum": spec.to_dict()}))
    _emit(args, text, "csv", stdout=False)
    if args.csv:
        Path(args.csv).write_text(text)


def cmd_spectrum_gen(args) -> None:
    source, _ = _resolve_source(args)
    spec = _spectrum_at(source, args.n)
    count = args.m if args.m is not None else (spec.length if spec.length is not None else 100)
    extra = {"eigenvalues": spec.eigenvalues(1, count).tolist(), "norm": spec.norm}
    if spec.length is not None:
        extra["trace"] = spec.tail_sum(0, 1).value
    _spectrum_outputs(args, spec, count, extra)


def _u_values(args) -> list[float]:
    if args.u_file:
        return np.loadtxt(args.u_file, delimiter=",", ndmin=1).ravel().tolist()
    if args.u is None:
        raise ConfigError("spectrum-from-ranks needs --u or --u-file")
    if isinstance(args.u, list):
        return [float(v) for v in args.u]
    try:
        return [float(v) for v in str(args.u).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad rank sequence {args.u!r}") from None


def cmd_spectrum_from_ranks(args) -> None:
    spec = spectrum_from_ranks(_u_values(args), args.m, args.scale)
    extra = {"eigenvalues": spec.values.tolist(), "remainder": spec.remainder}
    _spectrum_outputs(args, spec, spec.length, extra)


def cmd_probe(args) -> None:
    source, _ = _resolve_source(args)
    spec = _finite(_spectrum_at(source, args.n), args.truncate)
    rep = eigen_concentration_probe(spec, args.n, args.k, args.seeds, args.z_dist,
                                    args.seed, args.threads)
    _emit(args, dumps(_json_payload(args, rep.to_dict())), "json")


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option values; flags override it")
    p.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_DIR_ENV})")
    p.add_argument("--name", help="output file stem (default: subcommand name)")
    p.add_argument("--threads", type=int, default=1)


def _source(p, n_required=False) -> None:
    p.add_argument("--family", help="name:key=value,... e.g. expiso:tau=1,eps=1e-3,p=1000")
    p.add_argument("--covariance", help="CSV file holding a dense covariance matrix")
    p.add_argument("--n", type=int, required=False, default=None,
                   help="sample size" + (" (required)" if n_required else ""))


def _instance_opts(p) -> None:
    p.add_argument("--truncate", type=int, help="keep the first P eigenvalues")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--theta-norm", type=float, default=1.0)
    p.add_argument("--theta-mode", choices=("first", "uniform", "explicit"), default="first")
    p.add_argument("--theta-file", help="CSV vector for --theta-mode explicit")
    p.add_argument("--z-dist", choices=Z_DISTS, default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rcond", type=float, default=1e-10)
    p.add_argument("--b", type=float, default=DEFAULT_B)
    p.add_argument("--csv", help="append a summary row to this CSV file")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="benignlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        _common(p)
        subs[name] = p
        return p

    p = add("ranks", cmd_ranks, "effective ranks r_k, R_k as CSV")
    _source(p)
    p.add_argument("--kmax", type=int)
    p.add_argument("--b", type=float, default=DEFAULT_B)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)

    p = add("kstar", cmd_kstar, "k* and the variance term k*/n + n/R_k*")
    _source(p, True)
    p.add_argument("--kmax", type=int)
    p.add_argument("--b", type=float, default=DEFAULT_B)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)

    p = add("risk-exact", cmd_risk_exact, "bias term and tr(C) for one sampled design")
    _source(p, True)
    _instance_opts(p)

    p = add("risk-mc", cmd_risk_mc, "Monte Carlo excess risk")
    _source(p, True)
    _instance_opts(p)
    p.add_argument("--mode", choices=("fixed", "full"), default="fixed")
    p.add_argument("--replicas", type=int, default=2000)
    p.add_argument("--allow-degenerate", action="store_true")

    p = add("benign-scan", cmd_benign_scan, "trend table and benign verdict for a family")
    p.add_argument("--family")
    p.add_argument("--covariance")
    p.add_argument("--n-grid", default="64,128,256")
    p.add_argument("--b", type=float, default=DEFAULT_B)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--replicas", type=int, default=2)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--theta-norm", type=float, default=1.0)
    p.add_argument("--theta-mode", choices=("first", "uniform"), default="first")
    p.add_argument("--z-dist", choices=Z_DISTS, default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-mc", action="store_true", help="analytic columns only")
    p.add_argument("--allow-degenerate", action="store_true")
    p.add_argument("--verdict-json", help="also write the verdict sidecar here")

    p = add("spectrum-gen", cmd_spectrum_gen, "eigenvalues of a family as JSON/CSV")
    _source(p)
    p.add_argument("--m", type=int, help="number of eigenvalues to list")
    p.add_argument("--csv", help="write the (i, lambda) table here")

    p = add("spectrum-from-ranks", cmd_spectrum_from_ranks, "spectrum with prescribed r_k")
    p.add_argument("--u", help="comma-separated rank sequence, each entry > 1")
    p.add_argument("--u-file", help="CSV file of the rank sequence")
    p.add_argument("--m", type=int)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--csv", help="write the (i, lambda) table here")

    p = add("probe-concentration", cmd_probe, "extreme eigenvalues of A_k against their scale")
    _source(p, True)
    p.add_argument("--truncate", type=int)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--z-dist", choices=Z_DISTS, default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    return parser, subs


_N_REQUIRED = {"kstar", "risk-exact", "risk-mc", "probe-concentration"}


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        sp = subs[args.command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {unknown}")
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    if args.command in _N_REQUIRED and args.n is None:
        raise ConfigError(f"{args.command} needs --n")
    if getattr(args, "threads", 1) < 1:
        raise ConfigError("--threads must be >= 1")
    return args


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, SizeCapExceeded):
        return 4
    if isinstance(exc, NumericalError):
        return 3
    return 2


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        args.func(args)
    except BenignLabError as exc:
        sys.stderr.write(json.dumps(jsonable(exc.to_dict()), sort_keys=True) + "\n")
        return exit_code(exc)
    except (ValueError, OverflowError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
