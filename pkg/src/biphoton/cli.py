"""Command-line interface.

Subcommands cover the full pipeline: derived parameters, joint
distributions, uncertainty and EPR scans, revival finding, turbulence
scans, OAM spectra, and synthetic frame generation/analysis. Every command
reads experiment constants from a flat key=value config file, writes CSV
artifacts plus a run manifest into --out, and prints a short summary.

Exit codes: 0 success, 1 computation failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .angular import (
    angle_grid,
    angle_kernel_coeffs,
    conditional_angle_sigma,
    joint_angle_pd_closed_form,
    joint_angle_pd_quadrature,
)
from .certify import ENTANGLEMENT_BOUND, epr_scan, find_revival
from .coincidence import (
    coincidence_sectors,
    coincidence_strips,
    fit_angle_map,
    fit_position_map,
)
from .errors import BiphotonError, ConfigError
from .frames import (
    FrameGeometry,
    clean_pair_sampler,
    generate_frames,
    read_stack,
    turbulent_pair_sampler,
    write_stack,
)
from .oam import oam_uncertainty
from .optics import (
    conditional_momentum_sigma,
    conditional_position_sigma,
    derive_params,
    joint_position_pd,
)
from .turbulence import (
    conditional_angle_sigma_turbulent,
    derive_turbulence,
    oam_spectrum_turbulent,
)

# Paper-derived measured constants used as CLI defaults; the library itself
# never assumes them.
DEFAULT_DELTA_L_CLEAN = 0.72
DEFAULT_DELTA_L_TURBULENT = 0.94
DEFAULT_DELTA_P_INV_MM = 1.97

_CONFIG_KEYS = {
    "w0_um": float,
    "L_mm": float,
    "lambda_p_nm": float,
    "r_mm": float,
    "d_cm": float,
    "sigma_r_mm": float,
    "seed": int,
    "n_realizations": int,
    "delta_l": float,
    "delta_p_inv_mm": float,
}


def load_config(path) -> dict:
    """Parse a flat key=value config file. Unknown or duplicate keys and
    unparsable values are rejected."""
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key: {key}")
        if key in cfg:
            raise ConfigError(f"{path}:{lineno}: duplicate config key: {key}")
        try:
            cfg[key] = _CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: bad value for {key}: {value!r}"
            ) from exc
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config key: {key}")
    return cfg[key]


def params_from_config(cfg: dict):
    w0 = _require(cfg, "w0_um") * 1e-6
    L = _require(cfg, "L_mm") * 1e-3
    lambda_p = _require(cfg, "lambda_p_nm") * 1e-9
    return derive_params(w0, L, lambda_p)


def turbulence_from_config(cfg: dict, params):
    d = _require(cfg, "d_cm") * 1e-2
    r = _require(cfg, "r_mm") * 1e-3
    sigma_r = cfg["sigma_r_mm"] * 1e-3 if "sigma_r_mm" in cfg else None
    return derive_turbulence(
        params,
        d,
        r,
        sigma_r=sigma_r,
        n_realizations=cfg.get("n_realizations", 20000),
        seed=cfg.get("seed", 0),
    )


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(outdir: Path, command: str, entries: dict) -> None:
    import scipy

    lines = [f"command={command}"]
    lines += [f"{k}={_fmt(v)}" for k, v in entries.items()]
    lines += [
        f"biphoton_version={__version__}",
        f"numpy_version={np.__version__}",
        f"scipy_version={scipy.__version__}",
        f"python_version={sys.version.split()[0]}",
    ]
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_dist_csv(path: Path, axis1, axis2, values) -> None:
    with open(path, "w") as fh:
        fh.write("axis1,axis2,value\n")
        for i, a in enumerate(axis1):
            sa = _fmt(float(a))
            for j, b in enumerate(axis2):
                fh.write(f"{sa},{_fmt(float(b))},{_fmt(float(values[i, j]))}\n")


def _write_map_csv(path: Path, cmap) -> None:
    rows = []
    n_i, n_j = cmap.net.shape
    for i in range(n_i):
        for j in range(n_j):
            rows.append(
                (
                    i,
                    j,
                    float(cmap.coord_i[i]),
                    float(cmap.coord_j[j]),
                    float(cmap.true_term[i, j]),
                    float(cmap.accidental_term[i, j]),
                    float(cmap.net[i, j]),
                    int(cmap.excluded[i, j]),
                )
            )
    _write_rows(path, "i,j,coord_i,coord_j,true,accidental,net,excluded", rows)


def _config_entries(args, cfg: dict) -> dict:
    entries = {"config_path": str(args.config)}
    entries.update(cfg)
    return entries


# ---------------------------------------------------------------- commands


def cmd_params(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    outdir = _outdir(args)
    rows = [
        ("w0_m", params.w0),
        ("L_m", params.L),
        ("lambda_p_m", params.lambda_p),
        ("k_per_m", params.k),
        ("sigma0_m", params.sigma0),
    ]
    _write_rows(outdir / "params.csv", "key,value", rows)
    _write_manifest(outdir, "params", _config_entries(args, cfg))
    for key, value in rows:
        print(f"{key} = {_fmt(value)}")
    return 0


def cmd_position_dist(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    dist = joint_position_pd(params, args.z)
    outdir = _outdir(args)
    _write_dist_csv(outdir / "position_dist.csv", dist.axis1, dist.axis2, dist.values)
    entries = _config_entries(args, cfg)
    entries.update({"z_m": args.z, "points": dist.axis1.size})
    _write_manifest(outdir, "position-dist", entries)
    print(f"wrote {dist.axis1.size}x{dist.axis2.size} joint position density")
    return 0


def cmd_angle_dist(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    outdir = _outdir(args)
    if args.method == "quadrature":
        pd = joint_angle_pd_quadrature(params, args.z, n_theta=args.n_theta)
        theta_s, theta_i, values = pd.theta_s, pd.theta_i, pd.values
    else:
        theta = angle_grid(args.n_theta)
        co = angle_kernel_coeffs(params, args.z)
        prof = joint_angle_pd_closed_form(
            co, np.arange(args.n_theta) * (2.0 * math.pi / args.n_theta)
        )
        prof = prof / prof.max()
        idx = (np.arange(args.n_theta)[:, None] - np.arange(args.n_theta)[None, :]) % args.n_theta
        theta_s, theta_i, values = theta, theta.copy(), prof[idx]
    _write_dist_csv(outdir / "angle_dist.csv", theta_s, theta_i, values)
    entries = _config_entries(args, cfg)
    entries.update({"z_m": args.z, "n_theta": args.n_theta, "method": args.method})
    _write_manifest(outdir, "angle-dist", entries)
    print(f"wrote {args.n_theta}x{args.n_theta} joint angle density ({args.method})")
    return 0


def _z_grid(args) -> np.ndarray:
    if args.zmin <= 0 or args.zmax <= args.zmin:
        raise ConfigError("need 0 < zmin < zmax")
    if args.spacing == "log":
        return np.geomspace(args.zmin, args.zmax, args.n)
    return np.linspace(args.zmin, args.zmax, args.n)


def cmd_uncertainty_scan(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    zs = _z_grid(args)
    rows = []
    for z in zs:
        if args.basis == "position":
            est = conditional_position_sigma(params, z)
        else:
            est = conditional_angle_sigma(params, z, method=args.method)
        rows.append((float(z), est.value))
    outdir = _outdir(args)
    _write_rows(outdir / "uncertainty_scan.csv", "z,sigma", rows)
    entries = _config_entries(args, cfg)
    entries.update(
        {"basis": args.basis, "zmin_m": args.zmin, "zmax_m": args.zmax, "n": args.n}
    )
    if args.basis == "angle":
        entries["method"] = args.method
    _write_manifest(outdir, "uncertainty-scan", entries)
    print(f"wrote {len(rows)} ({args.basis}) uncertainty samples")
    return 0


def _resolve_delta(cfg: dict, args, turbulent: bool):
    if args.basis == "position-momentum":
        return cfg.get("delta_p_inv_mm", DEFAULT_DELTA_P_INV_MM) * 1e3
    if "delta_l" in cfg:
        return cfg["delta_l"]
    return DEFAULT_DELTA_L_TURBULENT if turbulent else DEFAULT_DELTA_L_CLEAN


def cmd_epr_scan(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    turb = None
    if args.turbulent:
        if args.basis != "angle-oam":
            raise ConfigError("--turbulent applies to the angle-oam basis only")
        turb = turbulence_from_config(cfg, params)
    delta = _resolve_delta(cfg, args, args.turbulent)
    zs = _z_grid(args)
    if turb is not None:
        zs = zs[zs > turb.d]
        if zs.size < 2:
            raise ConfigError("z grid must contain at least 2 planes beyond the screen")
    result = epr_scan(params, args.basis, zs, delta, turb=turb)
    outdir = _outdir(args)
    _write_rows(
        outdir / "epr_scan.csv",
        "z,product",
        list(zip(result.zs.tolist(), result.products.tolist())),
    )
    entries = _config_entries(args, cfg)
    entries.update(
        {
            "basis": args.basis,
            "delta_conjugate": delta,
            "turbulent": int(args.turbulent),
            "zmin_m": args.zmin,
            "zmax_m": args.zmax,
            "n": args.n,
        }
    )
    _write_manifest(outdir, "epr-scan", entries)
    for c in result.crossings:
        print(f"{c.direction} near z = {_fmt(c.z)} m")
    if not result.crossings:
        print("no bound crossings in range")
    return 0


def cmd_revival(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    turb = turbulence_from_config(cfg, params) if args.turbulent else None
    delta_l = cfg.get("delta_l")
    if delta_l is None:
        delta_l = DEFAULT_DELTA_L_TURBULENT if args.turbulent else DEFAULT_DELTA_L_CLEAN
    result = find_revival(params, turb, delta_l, z_range=(args.zmin, args.zmax))
    outdir = _outdir(args)
    _write_rows(
        outdir / "revival_scan.csv",
        "z,product",
        list(zip(result.zs.tolist(), result.products.tolist())),
    )
    _write_rows(
        outdir / "crossings.csv",
        "z,direction",
        [(c.z, c.direction) for c in result.crossings],
    )
    entries = _config_entries(args, cfg)
    entries.update(
        {
            "delta_l": delta_l,
            "turbulent": int(args.turbulent),
            "zmin_m": args.zmin,
            "zmax_m": args.zmax,
        }
    )
    _write_manifest(outdir, "revival", entries)
    if result.crossings:
        print(f"{'direction':<10} {'z (m)':>10}")
        for c in result.crossings:
            print(f"{c.direction:<10} {c.z:>10.4f}")
    else:
        print("no bound crossings in range")
    return 0


def cmd_turbulence_scan(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    turb = turbulence_from_config(cfg, params)
    delta_l = cfg.get("delta_l", DEFAULT_DELTA_L_TURBULENT)
    zmin = max(args.zmin, turb.d + 1e-3)
    if args.zmax <= zmin:
        raise ConfigError(f"zmax must exceed the screen distance {turb.d} m")
    zs = np.linspace(zmin, args.zmax, args.n)
    rows = []
    for z in zs:
        est = conditional_angle_sigma_turbulent(params, turb, z, window=None)
        rows.append((float(z), est.value, est.value * delta_l))
    outdir = _outdir(args)
    _write_rows(outdir / "turbulence_scan.csv", "z,delta_theta_sigma,product", rows)
    entries = _config_entries(args, cfg)
    entries.update(
        {"delta_l": delta_l, "zmin_m": zmin, "zmax_m": args.zmax, "n": args.n}
    )
    _write_manifest(outdir, "turbulence-scan", entries)
    below = [r for r in rows if r[2] < ENTANGLEMENT_BOUND]
    print(
        f"wrote {len(rows)} planes; {len(below)} below the {ENTANGLEMENT_BOUND} bound"
    )
    return 0


def cmd_oam_spectrum(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    turb = turbulence_from_config(cfg, params)
    dist = oam_spectrum_turbulent(turb, args.z, Lmax=args.lmax)
    outdir = _outdir(args)
    _write_rows(
        outdir / "oam_spectrum.csv",
        "l,probability",
        list(zip(dist.ls.tolist(), dist.probabilities.tolist())),
    )
    entries = _config_entries(args, cfg)
    entries.update({"z_m": args.z, "lmax": args.lmax})
    _write_manifest(outdir, "oam-spectrum", entries)
    width = oam_uncertainty(dist)
    print(f"spectrum width = {_fmt(width.value)} hbar over l in [-{args.lmax}, {args.lmax}]")
    return 0


def cmd_frames_gen(args) -> int:
    cfg = load_config(args.config)
    params = params_from_config(cfg)
    if args.frames < 1:
        raise ConfigError(f"--frames must be >= 1, got {args.frames}")
    if args.pair_rate < 0 or args.background_rate < 0:
        raise ConfigError("rates must be nonnegative")
    if not (0.0 < args.qe <= 1.0):
        raise ConfigError(f"--qe must be in (0, 1], got {args.qe}")
    geometry = FrameGeometry(
        width=args.width,
        height=args.height,
        pixel_pitch=args.pitch_um * 1e-6,
        magnification=args.mag,
    )
    if args.turbulent:
        turb = turbulence_from_config(cfg, params)
        model = turbulent_pair_sampler(params, turb, args.z)
    else:
        model = clean_pair_sampler(params, args.z)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    stack = generate_frames(
        model,
        geometry,
        n_frames=args.frames,
        pair_rate=args.pair_rate,
        background_rate=args.background_rate,
        qe=args.qe,
        seed=seed,
    )
    outdir = _outdir(args)
    path = outdir / args.out_file
    write_stack(stack, path)
    entries = _config_entries(args, cfg)
    entries.update(
        {
            "z_m": args.z,
            "frames": args.frames,
            "pair_rate": args.pair_rate,
            "background_rate": args.background_rate,
            "qe": args.qe,
            "width": args.width,
            "height": args.height,
            "pixel_pitch_um": args.pitch_um,
            "magnification": args.mag,
            "turbulent": int(args.turbulent),
            "seed": seed,
            "stack_file": str(path),
        }
    )
    _write_manifest(outdir, "frames gen", entries)
    print(f"wrote {args.frames} frames to {path}")
    return 0


def cmd_frames_analyze(args) -> int:
    stack = read_stack(args.infile)
    outdir = _outdir(args)
    entries = {"stack_file": str(args.infile)}
    entries.update(stack.metadata)

    pos_map = coincidence_strips(stack, args.strips)
    _write_map_csv(outdir / "position_map.csv", pos_map)
    fit, est = fit_position_map(pos_map)
    print(
        f"position fit: sigma1 = {_fmt(fit.sigma1)} m, sigma2 = {_fmt(fit.sigma2)} m, "
        f"delta = {_fmt(est.value)} m"
    )
    entries.update(
        {
            "strip_height_px": args.strips,
            "fit_sigma1_m": fit.sigma1,
            "fit_sigma2_m": fit.sigma2,
            "fit_delta_m": est.value,
        }
    )

    if args.sectors:
        ang_map = coincidence_sectors(stack, args.sectors)
        _write_map_csv(outdir / "angle_map.csv", ang_map)
        afit, aest = fit_angle_map(ang_map)
        peak = "0" if afit.q < 0 else "pi"
        print(
            f"angle fit: q = {_fmt(afit.q)}, c = {_fmt(afit.c)} rad "
            f"(peak near delta-theta = {peak}), sigma = {_fmt(aest.value)} rad"
        )
        entries.update(
            {
                "n_sectors": args.sectors,
                "fit_q": afit.q,
                "fit_c_rad": afit.c,
                "fit_angle_sigma_rad": aest.value,
            }
        )

    _write_manifest(outdir, "frames analyze", entries)
    return 0


# ----------------------------------------------------------------- parser


def _add_common(sp, config=True):
    if config:
        sp.add_argument("--config", required=True, help="key=value config file")
    sp.add_argument("--out", default=".", help="output directory for artifacts")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="biphoton",
        description="Biphoton propagation, turbulence, and EPR certification",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("params", help="derived experiment constants")
    _add_common(sp)
    sp.set_defaults(func=cmd_params)

    sp = sub.add_parser("position-dist", help="joint position density at a plane")
    _add_common(sp)
    sp.add_argument("--z", type=float, required=True, help="propagation distance (m)")
    sp.set_defaults(func=cmd_position_dist)

    sp = sub.add_parser("angle-dist", help="joint angle density at a plane")
    _add_common(sp)
    sp.add_argument("--z", type=float, required=True, help="propagation distance (m)")
    sp.add_argument("--n-theta", type=int, default=256)
    sp.add_argument(
        "--method", choices=["quadrature", "closed-form"], default="quadrature"
    )
    sp.set_defaults(func=cmd_angle_dist)

    sp = sub.add_parser("uncertainty-scan", help="conditional width vs distance")
    _add_common(sp)
    sp.add_argument("--basis", choices=["position", "angle"], required=True)
    sp.add_argument("--zmin", type=float, default=1e-3)
    sp.add_argument("--zmax", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=25)
    sp.add_argument("--spacing", choices=["log", "linear"], default="log")
    sp.add_argument(
        "--method",
        choices=["stddev-quadrature", "fwhm-closed-form"],
        default="stddev-quadrature",
        help="angle basis only",
    )
    sp.set_defaults(func=cmd_uncertainty_scan)

    sp = sub.add_parser("epr-scan", help="EPR product vs distance")
    _add_common(sp)
    sp.add_argument(
        "--basis", choices=["position-momentum", "angle-oam"], required=True
    )
    sp.add_argument("--zmin", type=float, default=1e-3)
    sp.add_argument("--zmax", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=25)
    sp.add_argument("--spacing", choices=["log", "linear"], default="log")
    sp.add_argument("--turbulent", action="store_true")
    sp.set_defaults(func=cmd_epr_scan)

    sp = sub.add_parser("revival", help="locate entanglement bound crossings")
    _add_common(sp)
    sp.add_argument("--zmin", type=float, default=1e-3)
    sp.add_argument("--zmax", type=float, default=1.0)
    sp.add_argument("--turbulent", action="store_true")
    sp.set_defaults(func=cmd_revival)

    sp = sub.add_parser(
        "turbulence-scan", help="angle width and EPR product behind the screen"
    )
    _add_common(sp)
    sp.add_argument("--zmin", type=float, default=0.0)
    sp.add_argument("--zmax", type=float, default=0.8)
    sp.add_argument("--n", type=int, default=20)
    sp.set_defaults(func=cmd_turbulence_scan)

    sp = sub.add_parser("oam-spectrum", help="signal OAM spectrum behind the screen")
    _add_common(sp)
    sp.add_argument("--z", type=float, default=0.3, help="observation plane (m)")
    sp.add_argument("--lmax", type=int, default=15)
    sp.set_defaults(func=cmd_oam_spectrum)

    fp = sub.add_parser("frames", help="synthetic camera frame stacks")
    fsub = fp.add_subparsers(dest="frames_command", required=True)

    sp = fsub.add_parser("gen", help="generate a frame stack")
    _add_common(sp)
    sp.add_argument("--z", type=float, required=True)
    sp.add_argument("--frames", type=int, required=True)
    sp.add_argument("--pair-rate", type=float, default=150.0)
    sp.add_argument("--background-rate", type=float, default=0.0)
    sp.add_argument("--qe", type=float, default=0.6)
    sp.add_argument("--width", type=int, default=512)
    sp.add_argument("--height", type=int, default=512)
    sp.add_argument("--pitch-um", type=float, default=16.0)
    sp.add_argument("--mag", type=float, default=1.0)
    sp.add_argument("--turbulent", action="store_true")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out-file", default="stack.bin")
    sp.set_defaults(func=cmd_frames_gen)

    sp = fsub.add_parser("analyze", help="coincidence maps and fits from a stack")
    _add_common(sp, config=False)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--strips", type=int, default=4, help="strip height in pixels")
    sp.add_argument("--sectors", type=int, default=36, help="0 to skip the angle map")
    sp.set_defaults(func=cmd_frames_analyze)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BiphotonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
