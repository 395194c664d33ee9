"""Command-line front end.

Every command writes its artifacts plus ``manifest.json`` into ``--out``.
The manifest records the fully resolved argument list, so
``divsample replay --manifest DIR/manifest.json --out OTHER`` regenerates
byte-identical artifacts.

Exit status: 0 success, 2 usage error, 3 data error, 4 degenerate input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, DivsampleError, UsageError
from .features import as_feature_matrix, load_features, pca_fit, pca_project
from .guidance import GuidanceConfig, mean_pairwise_distance, mode_coverage
from .hierarchy import build_tree, tree_export
from .subsample import (
    fps,
    kmeans_representatives,
    make_sampler,
    random_subset,
    uniformization,
)
from .tailstats import (
    first_pc_kurtosis,
    first_pc_projection,
    fit_two_gaussian_mixture_1d,
    gaussian_kurtosis_baseline,
    histogram,
)
from .toygmm import (
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    DEFAULT_T_MAX,
    GaussianMixture,
    InverseProblem,
    gmm_posterior,
    gmm_sample,
    linear_schedule,
    make_fig4_mixture,
    sample_batch,
    schedule_to_dict,
)

SCHEMA_VERSION = "1"
INPUT_FLAGS = ("input", "mixture", "set")


# --------------------------------------------------------------------------
# output helpers


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv_text(x: np.ndarray) -> str:
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in x)


def _with_version(obj: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, **obj}


def _load_mixture(name: str) -> GaussianMixture:
    if name == "fig4":
        return make_fig4_mixture()
    path = Path(name)
    if not path.is_file():
        raise DataError(f"mixture file not found: {name}")
    return GaussianMixture.from_json(path.read_text(encoding="utf-8"))


def _parse_matrix(text: str, flag: str) -> np.ndarray:
    """Rows separated by ';', entries by ','."""
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise UsageError(f"{flag}: expected numbers like '1,0;0,1', got {text!r}") from None
    if len({len(r) for r in rows}) != 1:
        raise UsageError(f"{flag}: rows have different lengths")
    return np.array(rows)


# --------------------------------------------------------------------------
# commands; each returns {file name: text}


def cmd_subsample(args) -> dict[str, str]:
    if args.n < 1:
        raise UsageError(f"--n must be at least 1, got {args.n}")
    x = load_features(args.input, has_header=args.has_header)
    if args.method != "fps" and args.l is not None:
        raise UsageError("--l only applies to --method fps")
    if args.method != "uniformization" and (args.k is not None or args.tau is not None):
        raise UsageError("--k and --tau only apply to --method uniformization")
    if args.method != "kmeans" and args.max_iter is not None:
        raise UsageError("--max-iter only applies to --method kmeans")
    if args.pca_dim is not None:
        x = pca_project(pca_fit(x, args.pca_dim), x)
    if args.method == "fps":
        result = fps(x, args.n, l=args.l, seed=args.seed)
    elif args.method == "kmeans":
        max_iter = 300 if args.max_iter is None else args.max_iter
        result = kmeans_representatives(x, args.n, seed=args.seed, max_iter=max_iter)
    elif args.method == "uniformization":
        k = 6 if args.k is None else args.k
        tau = 1.0 if args.tau is None else args.tau
        result = uniformization(x, args.n, k=k, tau=tau, seed=args.seed)
    else:
        result = random_subset(args.n, x.shape[0], seed=args.seed)
    return {"selection.json": _json_text(_with_version(result.to_dict()))}


def cmd_tail_stats(args) -> dict[str, str]:
    if args.baseline == (args.input is not None):
        raise UsageError("give exactly one of --input (data mode) or --baseline")
    if args.baseline:
        if args.fit_gmm2 or args.hist is not None:
            raise UsageError("--fit-gmm2 and --hist apply to --input mode only")
        missing = [f for f in ("dim", "n_samples", "trials") if getattr(args, f) is None]
        if missing:
            raise UsageError("--baseline requires " + ", ".join("--" + m.replace("_", "-") for m in missing))
        stats = gaussian_kurtosis_baseline(args.dim, args.n_samples, args.trials, seed=args.seed)
        return {"tail_stats.json": _json_text(_with_version({"mode": "baseline", **stats.to_dict()}))}
    if any(getattr(args, f) is not None for f in ("dim", "n_samples", "trials")):
        raise UsageError("--dim, --n-samples and --trials apply to --baseline mode only")
    x = load_features(args.input, has_header=args.has_header)
    proj = first_pc_projection(x)
    report = {
        "mode": "data",
        "n_samples": int(x.shape[0]),
        "dim": int(x.shape[1]),
        "kurtosis": first_pc_kurtosis(x).to_dict(),
    }
    if args.fit_gmm2:
        report["gmm2"] = fit_two_gaussian_mixture_1d(proj, seed=args.seed).to_dict()
    out = {"tail_stats.json": _json_text(_with_version(report))}
    if args.hist is not None:
        rows = histogram(proj, args.hist)
        out["histogram.csv"] = "bin_left,bin_right,count\n" + "".join(
            f"{lo!r},{hi!r},{c}\n" for lo, hi, c in rows
        )
    return out


def cmd_toy_gen(args) -> dict[str, str]:
    g = _load_mixture(args.mixture)
    if args.n < 1:
        raise UsageError(f"--n must be at least 1, got {args.n}")
    return {"samples.csv": _csv_text(gmm_sample(g, args.n, seed=args.seed))}


def cmd_toy_posterior(args) -> dict[str, str]:
    g = _load_mixture(args.mixture)
    h = _parse_matrix(args.h, "--h")
    y = _parse_matrix(args.y, "--y").ravel()
    if args.sigma_y <= 0:
        raise UsageError("--sigma-y must be positive; noiseless posteriors are not supported")
    prob = InverseProblem(h, args.sigma_y, y)
    return {"posterior.json": _json_text(gmm_posterior(g, prob).to_dict())}


def cmd_toy_sample(args) -> dict[str, str]:
    g = _load_mixture(args.mixture)
    if args.n < 1:
        raise UsageError(f"--n must be at least 1, got {args.n}")
    if (args.eta is None) != (args.dmax is None):
        raise UsageError("--eta and --dmax must be given together")
    schedule = linear_schedule(args.t_max, args.beta_start, args.beta_end)
    cfg = None
    if args.eta is not None:
        cfg = GuidanceConfig(args.eta, args.dmax, args.s if args.s is not None else g.dim)
    batch = sample_batch(g, args.n, schedule, seed=args.seed, guidance=cfg)
    out = {"batch.csv": _csv_text(batch)}
    if args.n >= 2:
        report = mean_pairwise_distance(batch).to_dict()
        report["schedule"] = schedule_to_dict(args.t_max, args.beta_start, args.beta_end)
        report["guidance"] = cfg.to_dict() if cfg is not None else None
        out["diversity.json"] = _json_text(_with_version(report))
    return out


def cmd_toy_modes(args) -> dict[str, str]:
    g = _load_mixture(args.mixture)
    pts = load_features(args.set)
    count = mode_coverage(pts, g, args.radius)
    body = {"mode_coverage": count, "n_components": g.n_components, "radius_sigmas": args.radius}
    return {"modes.json": _json_text(_with_version(body))}


def cmd_tree(args) -> dict[str, str]:
    if args.n < 2:
        raise UsageError(f"--n must be at least 2, got {args.n}")
    x = load_features(args.input, has_header=args.has_header)
    params = {"k": args.k} if args.sampler == "uniformization" else {}
    tree = build_tree(x, args.n, make_sampler(args.sampler, **params), seed=args.seed)
    return {f"tree.{args.format}": tree_export(tree, args.format)}


# --------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: usage error: {message}\n")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = _Parser(prog="divsample", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"divsample {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands: dict[tuple[str, ...], argparse.ArgumentParser] = {}

    def add_out(p):
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("subsample", help="choose N representatives from a feature CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--method", required=True, choices=["fps", "kmeans", "uniformization", "random"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--l", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--pca-dim", type=int)
    add_out(p)
    p.set_defaults(func=cmd_subsample)
    commands[("subsample",)] = p

    p = sub.add_parser("tail-stats", help="first-PC kurtosis of a collection or a Gaussian baseline")
    p.add_argument("--input")
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--dim", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--fit-gmm2", action="store_true")
    p.add_argument("--hist", type=int, metavar="BINS")
    add_out(p)
    p.set_defaults(func=cmd_tail_stats)
    commands[("tail-stats",)] = p

    toy = sub.add_parser("toy", help="Gaussian-mixture restoration testbed")
    toy_sub = toy.add_subparsers(dest="toy_command", required=True, parser_class=_Parser)

    p = toy_sub.add_parser("gen", help="draw samples from a mixture")
    p.add_argument("--mixture", required=True, help="'fig4' or a mixture JSON file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    add_out(p)
    p.set_defaults(func=cmd_toy_gen)
    commands[("toy", "gen")] = p

    p = toy_sub.add_parser("posterior", help="exact posterior under y = Hx + noise")
    p.add_argument("--mixture", required=True)
    p.add_argument("--h", required=True, help="measurement matrix, e.g. '1,0'")
    p.add_argument("--sigma-y", type=float, required=True)
    p.add_argument("--y", required=True, help="measurement vector, e.g. '1.39'")
    add_out(p)
    p.set_defaults(func=cmd_toy_posterior)
    commands[("toy", "posterior")] = p

    p = toy_sub.add_parser("sample", help="run the analytic diffusion sampler")
    p.add_argument("--mixture", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t-max", type=int, default=DEFAULT_T_MAX)
    p.add_argument("--beta-start", type=float, default=DEFAULT_BETA_START)
    p.add_argument("--beta-end", type=float, default=DEFAULT_BETA_END)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--eta", type=float)
    p.add_argument("--dmax", type=float)
    p.add_argument("--s", type=int, help="number of unknowns (default: dimension)")
    add_out(p)
    p.set_defaults(func=cmd_toy_sample)
    commands[("toy", "sample")] = p

    p = toy_sub.add_parser("modes", help="count mixture modes covered by a point set")
    p.add_argument("--set", required=True)
    p.add_argument("--mixture", required=True)
    p.add_argument("--radius", type=float, default=3.0)
    add_out(p)
    p.set_defaults(func=cmd_toy_modes)
    commands[("toy", "modes")] = p

    p = sub.add_parser("tree", help="hierarchical exploration tree")
    p.add_argument("--input", required=True)
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sampler", choices=["fps", "kmeans", "uniformization"], default="fps")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--format", choices=["json", "dot"], default="json")
    add_out(p)
    p.set_defaults(func=cmd_tree)
    commands[("tree",)] = p

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("--manifest", required=True)
    add_out(p)
    commands[("replay",)] = p
    return parser, commands


def _canonical_argv(path: tuple[str, ...], sub: argparse.ArgumentParser, args) -> list[str]:
    """Fully resolved argument list (defaults included, ``--out`` excluded)."""
    argv = list(path)
    for action in sub._actions:
        if action.dest in ("help", "out") or not action.option_strings:
            continue
        value = getattr(args, action.dest)
        flag = action.option_strings[0]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is not None:
            if action.dest in INPUT_FLAGS and value != "fig4":
                value = str(Path(value).resolve())
            argv += [flag, str(value)]
    return argv


def _run(argv: list[str]) -> int:
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        manifest_path = Path(args.manifest)
        if not manifest_path.is_file():
            raise DataError(f"manifest not found: {manifest_path}")
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            replay_argv = list(manifest["argv"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"malformed manifest: {exc}") from None
        return _run(replay_argv + ["--out", args.out])

    path = (args.command,) if args.command != "toy" else ("toy", args.toy_command)
    canonical = _canonical_argv(path, commands[path], args)
    files = args.func(args)
    out = Path(args.out)
    for name, text in files.items():
        _write_atomic(out / name, text)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "divsample",
        "version": __version__,
        "command": " ".join(path),
        "argv": canonical,
        "seed": getattr(args, "seed", None),
        "inputs": {
            f: str(Path(getattr(args, f)).resolve())
            for f in INPUT_FLAGS
            if getattr(args, f, None) not in (None, "fig4")
        },
        "outputs": sorted(files),
    }
    _write_atomic(out / "manifest.json", _json_text(manifest))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return _run(argv)
    except DivsampleError as exc:
        print(f"divsample: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"divsample: numerical error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
