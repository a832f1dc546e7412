"""``bifurclab`` command line.

Exit codes: 0 success, 2 invalid input (config, flags, files), 3 numerical
failure. Every run that is given ``--out PREFIX`` writes its outputs plus
``PREFIX.manifest.json``; ``bifurclab replay`` re-runs a manifest and checks
that the outputs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, families, kernels
from .divisors import DEFAULT_LEVEL, trace_divisor_measure, trace_zero_count
from .dsl import parse_family
from .errors import BifurclabError, ConfigError, NumericalError, ValidationError
from .grid import ScanField, ScanGrid
from .io import (OutputWriter, RunManifest, encode_divisor_csv, encode_field_csv, encode_image,
                 encode_json, encode_points_csv)
from .lyapunov import chi_exterior, chi_spectrum_qr, chi_top, dual_spectrum_check
from .measures import (BURN_IN, CHAINS, THINNING, furstenberg_check, limit_set_render,
                       stationarity_check, stationary_sample)
from .proximality import SCAN_THRESHOLD, TOL_GAP, stability_scan
from .scan import THETA_DEFAULT, calibrate, t_bif
from .volumes import graph_volume, mean_graph_volume
from .walk import measure_from_config, parse_word

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_RES = 64
# flags that name inputs/outputs rather than the computation; dropped from manifests
LOCATION_FLAGS = ("--config", "--family", "--out")


# -- argument helpers -------------------------------------------------------------

def parse_complex(text: str) -> complex:
    """``RE,IM`` or ``RE`` (also Python complex syntax such as ``1+2j``)."""
    parts = [p.strip() for p in str(text).split(",")]
    try:
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
        if len(parts) == 1:
            return complex(parts[0].replace("i", "j"))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected RE,IM or a complex number, got {text!r}")


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_count(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a count, got {text!r}") from None
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer count, got {text!r}")
    return int(v)


def parse_grid(text: str) -> ScanGrid:
    try:
        return ScanGrid.parse(text)
    except BifurclabError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([complex(p.strip().replace("i", "j")) for p in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated coordinates, got {text!r}") from None


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    return cfg


def check_config(cfg) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if "schema_version" not in cfg:
        raise ConfigError("config is missing the required 'schema_version' field")
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg['schema_version']!r} (expected {SCHEMA_VERSION})")
    if "family" not in cfg:
        raise ConfigError("config is missing the 'family' block")
    return cfg


def strip_location_flags(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in LOCATION_FLAGS:
            skip = True
            continue
        if any(a.startswith(f + "=") for f in LOCATION_FLAGS):
            continue
        out.append(a)
    return out


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bifurclab", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"bifurclab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output prefix; files are PREFIX_<name>.<ext>")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: BIFURCLAB_THREADS or 1)")
    common.add_argument("--seed", type=int, default=0)

    fam = argparse.ArgumentParser(add_help=False, parents=[common])
    src = fam.add_mutually_exclusive_group()
    src.add_argument("--config", help="JSON run config (schema_version, family, walk)")
    src.add_argument("--family", choices=families.names(), help="use a built-in reference config")

    gridp = argparse.ArgumentParser(add_help=False)
    gridp.add_argument("--grid", type=parse_grid, default=None,
                       help="RE0,RE1,IM0,IM1,NX,NY (default: family domain at 64x64)")

    imgp = argparse.ArgumentParser(add_help=False)
    imgp.add_argument("--colormap", default="heat", help="heat, gray or blue")
    imgp.add_argument("--png", action="store_true", help="also write PNG images")

    s = sub.add_parser("lyap", parents=[fam], help="Lyapunov exponents at one parameter")
    s.add_argument("--lambda", dest="lam", type=parse_complex, required=True)
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--method", choices=("top", "spectrum", "exterior"), default="spectrum")

    s = sub.add_parser("scan", parents=[fam, gridp, imgp], help="χ fields, T1, Td, T_bif and support")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--trials", type=int, default=64)
    s.add_argument("--theta", type=float, default=THETA_DEFAULT, help="support noise-floor factor")
    s.add_argument("--estimator", choices=("increment", "plain"), default="increment")

    s = sub.add_parser("stability", parents=[fam, gridp, imgp], help="empirical proximal stability scan")
    s.add_argument("--lengths", type=parse_int_list, default=[4, 8, 16])
    s.add_argument("--words", type=int, default=16, help="sampled words per length")
    s.add_argument("--threshold", type=float, default=SCAN_THRESHOLD)
    s.add_argument("--exhaustive", type=int, default=None, metavar="L",
                   help="use all words up to length L instead of sampling")

    s = sub.add_parser("tracezeros", parents=[fam, gridp, imgp], help="zeros of tr - t")
    s.add_argument("--t", type=parse_complex, default=complex(DEFAULT_LEVEL))
    s.add_argument("--n", type=int, default=20)
    s.add_argument("--words", type=int, default=16)
    s.add_argument("--word", default=None, help="count zeros of one word in --cell instead")
    s.add_argument("--cell", default=None, help="RE0,RE1,IM0,IM1 for --word")
    s.add_argument("--allow-asymmetric", action="store_true")

    s = sub.add_parser("graphvol", parents=[fam, gridp], help="graph volumes and their growth")
    s.add_argument("--v0", type=parse_vector, default=None, help="start vector (default e1)")
    s.add_argument("--lengths", type=parse_int_list, default=[10, 20, 40, 80])
    s.add_argument("--trials", type=int, default=16)
    s.add_argument("--order", choices=("left", "right"), default="left")
    s.add_argument("--dual", action="store_true")
    s.add_argument("--word", default=None, help="volume of one word's graph instead")
    s.add_argument("--ref-n", type=int, default=100, help="walk length for the reference T1 mass")
    s.add_argument("--ref-trials", type=int, default=64)
    s.add_argument("--no-reference", action="store_true")

    s = sub.add_parser("limitset", parents=[fam, imgp], help="stationary measure and limit set image")
    s.add_argument("--lambda", dest="lam", type=parse_complex, required=True)
    s.add_argument("--count", type=parse_count, default=200000)
    s.add_argument("--burnin", type=int, default=BURN_IN)
    s.add_argument("--thin", type=int, default=THINNING)
    s.add_argument("--chains", type=int, default=CHAINS)
    s.add_argument("--chart", default="0", help="affine chart index or 'sphere' (d = 2)")
    s.add_argument("--res", type=int, default=1024)
    s.add_argument("--dual", action="store_true")
    s.add_argument("--furstenberg", action="store_true", help="also check the Furstenberg integral")

    s = sub.add_parser("dualcheck", parents=[fam], help="spectrum of the dual walk vs reversed spectrum")
    s.add_argument("--lambda", dest="lam", type=parse_complex, required=True)
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--trials", type=int, default=100)

    s = sub.add_parser("calibrate", parents=[common], help="dd^c normalisation self-test")
    s.add_argument("--n", type=int, default=201)
    s.add_argument("--center", type=parse_complex, default=complex(0.3))

    s = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    s.add_argument("manifest")
    s.add_argument("--out", default=None, help="new output prefix (default: PREFIX.replay)")
    s.add_argument("--threads", type=int, default=None)
    return p


# -- commands -----------------------------------------------------------------------

class Context:
    def __init__(self, args, config):
        self.args = args
        self.config = config
        self.writer = OutputWriter(args.out) if getattr(args, "out", None) else None
        self.tolerances: dict = {}
        if config is not None:
            self.family = parse_family(config["family"])
            self.mu = measure_from_config(config.get("walk"), self.family.generators)

    def grid(self) -> ScanGrid:
        if self.args.grid is not None:
            return self.args.grid
        r0, r1, i0, i1 = self.family.domain
        return ScanGrid(r0, r1, i0, i1, DEFAULT_RES, DEFAULT_RES)

    def emit(self, suffix: str, data: bytes):
        if self.writer is not None:
            self.writer.write(suffix, data)

    def field(self, name: str, fld: ScanField, image: bool = True, scale: str = "linear"):
        self.emit(f"_{name}.csv", encode_field_csv(fld))
        if image:
            a = self.args
            scales = ("linear", "log") if scale == "both" else (scale,)
            for sc in scales:
                tag = f"_{name}" if len(scales) == 1 else f"_{name}_{sc}"
                self.emit(tag + ".ppm", encode_image(fld, a.colormap, sc))
                if a.png:
                    self.emit(tag + ".png", encode_image(fld, a.colormap, sc, "png"))


def cmd_lyap(ctx: Context) -> dict:
    a = ctx.args
    out = {"lambda": a.lam, "n": a.n, "trials": a.trials, "seed": a.seed, "method": a.method}
    out["chi_top"] = chi_top(ctx.family, a.lam, ctx.mu, a.n, a.trials, a.seed).as_dict()
    if a.method == "spectrum":
        spec = chi_spectrum_qr(ctx.family, a.lam, ctx.mu, a.n, a.trials, a.seed)
        out["spectrum"] = [e.as_dict() for e in spec]
        out["sum"] = sum(e.value for e in spec)
    elif a.method == "exterior":
        out["exterior"] = [chi_exterior(ctx.family, a.lam, ctx.mu, a.n, a.trials, a.seed, k).as_dict()
                           for k in range(1, ctx.family.dimension + 1)]
    return out


def cmd_scan(ctx: Context) -> dict:
    a = ctx.args
    g = ctx.grid()
    res = t_bif(ctx.family, ctx.mu, g, a.n, a.trials, a.seed, a.theta, a.estimator)
    ctx.tolerances.update({"eps_disc": res.meta["eps_disc"], "theta": a.theta})
    ctx.field("chi_top", res.chi_top)
    ctx.field("chi_bottom", res.chi_bottom)
    ctx.field("t1", res.t1, scale="both")
    ctx.field("td", res.td, scale="both")
    ctx.field("tbif", res.tbif, scale="both")
    ctx.field("support", ScanField(g, res.support.astype(float), None, {"kind": "support"}))
    return {"grid": g.as_dict(), **res.summary()}


def cmd_stability(ctx: Context) -> dict:
    a = ctx.args
    g = ctx.grid()
    rep = stability_scan(ctx.family, ctx.mu, g, a.lengths, a.words, a.seed, a.threshold,
                         exhaustive_max_length=a.exhaustive)
    ctx.tolerances.update({"tol_gap": TOL_GAP, "threshold": a.threshold})
    ctx.field("flagged", rep.flagged_field())
    ctx.field("proximal", rep.proximal_field())
    return rep.summary(ctx.family.generators)


def _cell(text: str):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        vals = ()
    if len(vals) != 4 or not (vals[1] > vals[0] and vals[3] > vals[2]):
        raise ConfigError(f"--cell must be RE0,RE1,IM0,IM1 with positive extents, got {text!r}")
    return vals


def cmd_tracezeros(ctx: Context) -> dict:
    a = ctx.args
    if a.word is not None:
        if a.cell is None:
            raise ConfigError("--word needs --cell")
        w = parse_word(a.word, ctx.family.generators)
        cell = _cell(a.cell)
        return {"word": a.word, "cell": list(cell), "t": a.t,
                "zeros": trace_zero_count(ctx.family, w, a.t, cell)}
    g = ctx.grid()
    dm = trace_divisor_measure(ctx.family, ctx.mu, a.t, g, a.n, a.words, a.seed,
                               allow_asymmetric=a.allow_asymmetric)
    ctx.emit("_zeros.csv", encode_divisor_csv(dm.cloud))
    ctx.field("density", dm.density, scale="both")
    return {"grid": g.as_dict(), "t": a.t, "n": a.n, "words": a.words,
            "degenerate_words": dm.cloud.meta["degenerate_words"],
            "masked_cells": dm.masked_cells, "zeros": len(dm.cloud),
            "total_multiplicity": dm.cloud.total_multiplicity,
            "mass": dm.density.total() * g.cell_area}


def cmd_graphvol(ctx: Context) -> dict:
    a = ctx.args
    g = ctx.grid()
    d = ctx.family.dimension
    v0 = a.v0 if a.v0 is not None else np.eye(d)[0]
    if a.word is not None:
        rec = graph_volume(ctx.family, parse_word(a.word, ctx.family.generators), v0, g, a.order)
        return {"grid": g.as_dict(), "word": a.word, **rec.as_dict()}
    ref = None
    if not a.no_reference:
        tb = t_bif(ctx.family, ctx.mu, g, a.ref_n, a.ref_trials, a.seed)
        ref = tb.td.total() if a.dual else tb.t1.total()
        ctx.tolerances["eps_disc"] = tb.meta["eps_disc"]
    rep = mean_graph_volume(ctx.family, ctx.mu, v0, g, a.lengths, a.trials, a.seed,
                            dual=a.dual, order=a.order, reference_mass=ref)
    out = rep.as_dict()
    out["records"] = [r.as_dict() for r in rep.records]
    return out


def cmd_limitset(ctx: Context) -> dict:
    a = ctx.args
    cloud = stationary_sample(ctx.family, a.lam, ctx.mu, a.burnin, a.count, a.thin, a.seed,
                              dual=a.dual, chains=a.chains)
    chart = "sphere" if a.chart == "sphere" else int(a.chart)
    img = limit_set_render(cloud, chart, a.res)
    ctx.emit("_cloud.csv", encode_points_csv(cloud))
    ctx.emit("_limitset.ppm", encode_image(img, a.colormap, "log"))
    if a.png:
        ctx.emit("_limitset.png", encode_image(img, a.colormap, "log", "png"))
    out = {"lambda": a.lam, "count": len(cloud), "burn_in": a.burnin, "thinning": a.thin,
           "chains": cloud.meta["chains"], "dual": a.dual, "chart": chart,
           "extent": img.grid.as_dict(), "outside": img.meta["outside"],
           "stationarity_passed": stationarity_check(ctx.family, a.lam, ctx.mu, cloud, a.seed).passed}
    if a.furstenberg:
        out["furstenberg"] = furstenberg_check(ctx.family, a.lam, ctx.mu, cloud, seed=a.seed).as_dict()
    return out


def cmd_dualcheck(ctx: Context) -> dict:
    a = ctx.args
    rep = dual_spectrum_check(ctx.family, a.lam, ctx.mu, a.n, a.trials, a.seed)
    return {"lambda": a.lam, "n": a.n, "trials": a.trials, "seed": a.seed, **rep.as_dict()}


def cmd_calibrate(ctx: Context) -> dict:
    res = calibrate(ctx.args.n, ctx.args.center)
    ctx.tolerances["eps_disc"] = res["eps_disc"]
    return res


COMMANDS = {"lyap": cmd_lyap, "scan": cmd_scan, "stability": cmd_stability,
            "tracezeros": cmd_tracezeros, "graphvol": cmd_graphvol, "limitset": cmd_limitset,
            "dualcheck": cmd_dualcheck, "calibrate": cmd_calibrate}


def _execute(args, argv, config) -> int:
    if args.threads is not None:
        kernels.set_threads(args.threads)
    if args.command != "calibrate":
        if config is None:
            if args.config:
                config = load_config(args.config)
            elif args.family:
                config = families.config(args.family)
            else:
                raise ConfigError("one of --config or --family is required")
        config = check_config(config)
    ctx = Context(args, config)
    t0 = time.perf_counter()
    report = COMMANDS[args.command](ctx)
    body = encode_json(report)
    ctx.emit("_summary.json", body)
    sys.stdout.write(body.decode("utf-8"))
    if args.command == "calibrate" and not report["passed"]:
        raise NumericalError(f"Lelong calibration failed: mass {report['mass']:.6f}")
    if ctx.writer is not None:
        kept = strip_location_flags(argv)
        if args.command in kept:
            kept.remove(args.command)
        man = RunManifest(args.command, kept, config, args.seed, __version__,
                          ctx.tolerances, time.perf_counter() - t0, dict(ctx.writer.digests),
                          kernels.get_threads())
        Path(f"{args.out}.manifest.json").write_bytes(encode_json(man.as_dict()))
    return EXIT_OK


def _replay(args) -> int:
    p = Path(args.manifest)
    if not p.is_file():
        raise ConfigError(f"manifest not found: {p}")
    man = RunManifest.from_dict(json.loads(p.read_text()))
    if man.command not in COMMANDS:
        raise ConfigError(f"manifest has unknown command {man.command!r}")
    prefix = args.out or str(p).removesuffix(".manifest.json") + ".replay"
    argv = [man.command, *man.argv, "--out", prefix]
    if args.threads is not None:
        argv += ["--threads", str(args.threads)]
    new_args = build_parser().parse_args(argv)
    code = _execute(new_args, argv, man.config)
    fresh = json.loads(Path(f"{prefix}.manifest.json").read_text())["outputs"]
    mismatched = sorted(k for k in set(man.outputs) | set(fresh) if man.outputs.get(k) != fresh.get(k))
    if mismatched:
        print(f"replay: outputs differ: {', '.join(mismatched)}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"replay: {len(fresh)} outputs identical", file=sys.stderr)
    return code


def run(argv=None, config: dict | None = None) -> int:
    """Run the CLI; returns the exit code instead of exiting."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "replay":
            return _replay(args)
        return _execute(args, argv, config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BifurclabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        kernels.set_threads(None)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
