"""Command-line front end: ``bsvmodes <subcommand> --config scenario.toml``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from bsvmodes import __version__
from bsvmodes.config import ConfigError, Setup, default_grid, load_config
from bsvmodes.gain import gain_scan, renormalized_eigenvalues, schmidt_number, write_gain_scan
from bsvmodes.kernel import HarmonicTruncationError
from bsvmodes.observables import (
    DEFAULT_PIXEL_MRAD,
    PixelError,
    correlators,
    covariance_fwhm,
    cut_pixels,
    mean_photon_spectrum,
    spectrum_2d,
    variance_difference,
    write_columns,
)
from bsvmodes.oracle import OracleTruncationError, compare_with_wick, pixel_sets
from bsvmodes.pipeline import principal_axis, solve_modes, with_grid
from bsvmodes.schmidt import FactorizationError, JointModes

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("bsvmodes")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


@dataclass
class RunManifest:
    """Record of one CLI run, written next to the data files."""

    subcommand: str
    config: dict
    config_hash: str
    grid: dict
    outputs: list[str] = field(default_factory=list)
    wall_time_s: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / f"manifest_{self.subcommand}.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass
class Context:
    setup: Setup
    raw: dict
    out: Path
    manifest: RunManifest
    started: float = field(default_factory=time.perf_counter)

    def header(self, normalization: str, extra: list[str] | None = None) -> list[str]:
        g = self.manifest.grid
        lines = [
            f"bsvmodes {__version__}",
            f"config_hash: {self.manifest.config_hash}",
            f"grid: n_points={g['n_points']} n_max={g['n_max']} q_max={g['q_max']:.10g}",
            f"normalization: {normalization}",
        ]
        return lines + (extra or [])

    def emit(self, name: str) -> Path:
        path = self.out / name
        self.manifest.outputs.append(str(path))
        return path


def _load(args, subcommand: str) -> Context:
    try:
        setup, raw = load_config(args.config)
    except FileNotFoundError as exc:
        raise UsageError(f"config not found: {args.config}") from exc
    except ConfigError as exc:
        raise UsageError(f"invalid config: {exc}") from exc
    except ValueError as exc:  # TOML syntax
        raise UsageError(f"unreadable config: {exc}") from exc
    try:
        setup = with_grid(setup, args.grid_points, args.n_max)
        if args.gain is not None:
            setup = setup.with_gain(args.gain)
        grid = default_grid(setup)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.n_max is not None:
        raw = {**raw, "grid": {**raw.get("grid", {}), "n_max": args.n_max}}
    if args.grid_points is not None:
        raw = {**raw, "grid": {**raw.get("grid", {}), "n_points": args.grid_points}}
    raw = {**raw, "gain": setup.gain}
    grid_info = {"n_points": grid.n_points, "n_max": grid.n_harmonics, "q_max": grid.q_max}
    manifest = RunManifest(subcommand, raw, config_hash(raw), grid_info)
    return Context(setup, raw, out, manifest)


def _modes(ctx: Context):
    modes = solve_modes(ctx.setup)
    kernel = modes.kernel
    ctx.manifest.diagnostics.update(
        harmonic_loss=float(kernel.harmonic_loss),
        truncation_loss=float(modes.truncation_loss),
        n_modes=len(modes),
        solver="joint" if isinstance(modes, JointModes) else "cylindrical",
    )
    return modes


def _gain_tag(G: float) -> str:
    return f"{G:g}".replace(".", "p")


def cmd_spectrum(args) -> int:
    ctx = _load(args, "spectrum")
    G = ctx.setup.gain
    if G == 0.0:
        log.warning("G = 0: no photons are generated; the spectrum is identically zero")
    modes = _modes(ctx)
    k = ctx.setup.signal_wavenumber
    norm = "max1" if args.normalize else "raw"
    extra = [f"G: {G:.10g}"]
    if args.two_d:
        axis = np.arange(-args.theta_max, args.theta_max + 0.5 * args.step, args.step)
        img = spectrum_2d(modes, G, axis, axis, k, normalize=args.normalize)
        tx, ty = np.meshgrid(axis, axis, indexing="xy")
        path = ctx.emit(f"spectrum2d_G{_gain_tag(G)}.csv")
        write_columns(path, {"theta_x_mrad": tx.ravel(), "theta_y_mrad": ty.ravel(), "intensity": img.ravel()},
                      ctx.header(norm, extra))
    else:
        theta = np.arange(-args.theta_max, args.theta_max + 0.5 * args.step, args.step)
        cut = principal_axis(ctx.setup)
        spec = mean_photon_spectrum(modes, G, theta, k, normalize=args.normalize, axis=cut)
        path = ctx.emit(f"spectrum_G{_gain_tag(G)}.csv")
        write_columns(path, {"theta_mrad": spec.theta, "intensity": spec.intensity},
                      ctx.header(norm, extra + [f"cut_axis: {cut}"]))
    _finish(ctx)
    return EXIT_OK


def cmd_modes(args) -> int:
    ctx = _load(args, "modes")
    modes = _modes(ctx)
    G = ctx.setup.gain
    K0 = schmidt_number(renormalized_eigenvalues(modes, 0.0))
    KG = schmidt_number(renormalized_eigenvalues(modes, G))
    header = ctx.header("sum(lambda)=1", [f"K(G=0): {K0:.12g}", f"K(G={G:g}): {KG:.12g}"])
    top = min(args.profiles, len(modes))
    if isinstance(modes, JointModes):
        write_columns(ctx.emit("eigenvalues.csv"), {"index": np.arange(len(modes)), "lambda": modes.lam}, header)
    else:
        modes.to_csv(ctx.emit("eigenvalues.csv"), ctx.emit("profiles.csv"), header, top)
    print(f"modes: {len(modes)}  sum(lambda): {modes.lam.sum():.12f}  K(0): {K0:.6f}  K({G:g}): {KG:.6f}")
    _finish(ctx)
    return EXIT_OK


def cmd_variance_diff(args) -> int:
    ctx = _load(args, "variance-diff")
    G = ctx.setup.gain
    if G == 0.0:
        raise UsageError("variance of the difference needs G > 0")
    modes = _modes(ctx)
    pixels = cut_pixels(args.theta_max, args.width, principal_axis(ctx.setup))
    for theta0 in args.theta0:
        try:
            pixels.index_of(theta0)
        except PixelError as exc:
            raise UsageError(str(exc)) from exc
    try:
        tables = correlators(modes, G, pixels, ctx.setup.signal_wavenumber)
    except PixelError as exc:
        raise UsageError(str(exc)) from exc
    N = tables.N
    for theta0 in args.theta0:
        p0 = pixels.index_of(theta0)
        if N[p0] < 1e-12 * N.max():
            log.warning("theta0=%g mrad lies outside the emission; the curve follows Var N(theta)", theta0)
        curve = variance_difference(tables, theta0, normalize=True)
        path = ctx.emit(f"variance_diff_theta0_{_gain_tag(theta0)}.csv")
        write_columns(path, {"theta_mrad": curve.theta, "variance_difference": curve.intensity},
                      ctx.header("max1", [f"G: {G:.10g}", f"theta0_mrad: {theta0:g}",
                                          f"pixel_mrad: {args.width:g}"]))
    _finish(ctx)
    return EXIT_OK


def cmd_gain_scan(args) -> int:
    if args.g_min > args.g_max:
        raise UsageError("--g-min must not exceed --g-max")
    if args.n_steps < 1:
        raise UsageError("--n-steps must be at least 1")
    if args.g_min < 0:
        raise UsageError("gains must be non-negative")
    ctx = _load(args, "gain-scan")
    modes = _modes(ctx)
    G_list = np.linspace(args.g_min, args.g_max, args.n_steps) if args.n_steps > 1 else np.array([args.g_min])
    rows = gain_scan(modes, G_list)
    k = ctx.setup.signal_wavenumber
    widths = []
    for G in G_list:
        try:
            widths.append(covariance_fwhm(modes, G, k, args.theta_max, args.width) if G > 0 else float("nan"))
        except ValueError as exc:
            raise NumericalFailure(f"covariance width at G={G:g}: {exc}") from exc
    path = ctx.emit("gain_scan.csv")
    write_gain_scan(rows, path, ctx.header("lambda_tilde sums to 1"),
                    {"covariance_fwhm_mrad": np.array(widths)})
    _finish(ctx)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    lines = []
    for r in args.r:
        for pairs in (1, 2):
            rs = [r] * pairs
            for name, E in pixel_sets(2 * pairs).items():
                label = f"r={r:g} pairs={pairs} {name} "
                try:
                    rows = compare_with_wick(rs, args.cutoff, E)
                except OracleTruncationError as exc:
                    failures += 1
                    lines.append(f"FAIL {label}truncation: {exc}")
                    continue
                for row in rows:
                    status = "PASS" if row.passed else "FAIL"
                    failures += not row.passed
                    lines.append(f"{status} {label}{row.name:<14} wick={row.wick:.12e} "
                                 f"oracle={row.oracle:.12e} rel_err={row.rel_error:.2e}")
    report = out / "oracle_check.txt"
    report.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    if failures:
        print(f"{failures} oracle comparison(s) failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _finish(ctx: Context) -> None:
    ctx.manifest.wall_time_s = round(time.perf_counter() - ctx.started, 3)
    ctx.manifest.write(ctx.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bsvmodes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bsvmodes {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario(p):
        p.add_argument("--config", required=True, help="scenario TOML file")
        p.add_argument("--gain", type=float, default=None, help="override the configured gain G")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--grid-points", type=int, default=None, help="radial quadrature nodes")
        p.add_argument("--n-max", type=int, default=None, help="largest azimuthal harmonic")

    p = sub.add_parser("spectrum", help="mean photon-number angular spectrum")
    scenario(p)
    p.add_argument("--two-d", action="store_true", help="2-D (theta_x, theta_y) map instead of a cut")
    p.add_argument("--theta-max", type=float, default=20.0, help="half-width of the window (mrad)")
    p.add_argument("--step", type=float, default=0.1, help="angular step (mrad)")
    p.add_argument("--raw", dest="normalize", action="store_false", help="do not normalise to the maximum")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("modes", help="Schmidt eigenvalues and radial profiles")
    scenario(p)
    p.add_argument("--profiles", type=int, default=20, help="number of mode profiles to write")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("variance-diff", help="Var(N(theta) - N(theta0)) along a cut")
    scenario(p)
    p.add_argument("--theta0", type=float, nargs="+", default=[3.0, 4.0, 5.0], help="reference angles (mrad)")
    p.add_argument("--theta-max", type=float, default=10.0, help="half-width of the cut (mrad)")
    p.add_argument("--width", type=float, default=DEFAULT_PIXEL_MRAD, help="pixel size (mrad)")
    p.set_defaults(func=cmd_variance_diff)

    p = sub.add_parser("gain-scan", help="Schmidt number and covariance width versus G")
    scenario(p)
    p.add_argument("--g-min", type=float, default=0.01)
    p.add_argument("--g-max", type=float, default=10.0)
    p.add_argument("--n-steps", type=int, default=30)
    p.add_argument("--theta-max", type=float, default=15.0, help="half-width of the cut (mrad)")
    p.add_argument("--width", type=float, default=DEFAULT_PIXEL_MRAD, help="pixel size (mrad)")
    p.set_defaults(func=cmd_gain_scan)

    p = sub.add_parser("oracle-check", help="compare Gaussian moments with the Fock-space oracle")
    p.add_argument("--r", type=float, nargs="+", default=[0.5, 1.0, 1.5], help="squeezing parameters")
    p.add_argument("--cutoff", type=int, default=60, help="largest photon number per mode")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, HarmonicTruncationError, FactorizationError, OracleTruncationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
