"""Batch command-line front end.

Subcommands: bands, fermi, state, disintegrate.  All diagnostics go to
stderr, all data to files or stdout; artifacts embed the config and the
schema version and are byte-identical across runs with the same config.

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 empty Fermi
surface, 5 gap violation / critical level, 6 eigenstate defect above the
state tolerance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

SCHEMA_VERSION = "fermi-spectra/1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_EMPTY_SURFACE = 4
EXIT_CRITICAL = 5
EXIT_DEFECT = 6


def _apply_thread_cap():
    cap = os.environ.get("FERMI_SPECTRA_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_artifact(config: dict, payload: dict) -> str:
    doc = {"schema": SCHEMA_VERSION, "config": config}
    doc.update(payload)
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def _parse_grid(text: str) -> tuple:
    parts = text.lower().split("x")
    sizes = tuple(int(p) for p in parts)
    if any(g < 16 for g in sizes):
        raise ValueError("grid sizes must be at least 16")
    return sizes


def _parse_sweep(text: str) -> list:
    lo, hi, count = text.split(":")
    lo, hi, count = float(lo), float(hi), int(count)
    if count < 1:
        raise ValueError("sweep count must be >= 1")
    if count == 1:
        return [lo]
    return [lo + i * (hi - lo) / (count - 1) for i in range(count)]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fermi-spectra",
        description="band structures, Fermi surfaces and eigenstate functionals "
                    "of matrix-valued torus symbols",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_lambda=False):
        p.add_argument("--model", required=True,
                       help="builtin name (graphene, crossing, cos-sz) or a "
                            "trig-polynomial symbol JSON file")
        p.add_argument("--gamma", type=float, default=1.0)
        p.add_argument("--grid", default="256")
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--lambda-sweep", dest="lam_sweep", default=None,
                       metavar="MIN:MAX:COUNT")
        p.add_argument("--tol-levelset", type=float, default=None)
        p.add_argument("--tol-grad-floor", type=float, default=1e-6)
        p.add_argument("--tol-gap-floor", type=float, default=1e-6)
        p.add_argument("--tol-state", type=float, default=1e-3)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=0)

    p_bands = sub.add_parser("bands", help="band values and the spectrum union")
    common(p_bands)

    p_fermi = sub.add_parser("fermi", help="Fermi surface mesh and fiber measure")
    common(p_fermi)

    p_state = sub.add_parser("state", help="Fermi eigenstate functional report")
    common(p_state)
    p_state.add_argument("--observable", default=None,
                         help="builtin (identity, hamiltonian, diag10) or a "
                              "symbol JSON file")

    p_dis = sub.add_parser("disintegrate",
                           help="1-D pushforward density and fiber measures")
    p_dis.add_argument("--model", required=True,
                       help="identity | square | trig | linear-square")
    p_dis.add_argument("--gamma", type=float, default=1.0)
    p_dis.add_argument("--ell", type=float, default=1.0)
    p_dis.add_argument("--grid", default="512")
    p_dis.add_argument("--lambda", dest="lam", type=float, default=None)
    p_dis.add_argument("--lambda-sweep", dest="lam_sweep", default=None)
    p_dis.add_argument("--format", choices=("json", "csv"), default="json")
    p_dis.add_argument("--out", default=None)
    p_dis.add_argument("--seed", type=int, default=0)
    return parser


def _resolve_symbol(args):
    from . import models
    from .bands import TrigPolynomialSymbol

    name = args.model
    if name == "graphene":
        return models.graphene_symbol(args.gamma)
    if name == "crossing":
        return models.crossing_symbol()
    if name == "cos-sz":
        return models.cosine_sz_symbol()
    if os.path.exists(name):
        return TrigPolynomialSymbol.load(name)
    raise ValueError(f"unknown model {name!r}")


def _levels(args) -> list:
    if args.lam_sweep:
        return _parse_sweep(args.lam_sweep)
    if args.lam is not None:
        return [args.lam]
    return []


def _config_dict(args, grid=None) -> dict:
    cfg = {
        "command": args.command,
        "model": args.model,
        "format": args.format,
        "seed": args.seed,
    }
    if grid is not None:
        cfg["grid"] = list(grid)
    for key in ("gamma", "ell", "lam", "lam_sweep", "tol_levelset",
                "tol_grad_floor", "tol_gap_floor", "tol_state"):
        if hasattr(args, key) and getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    return cfg


def cmd_bands(args) -> int:
    from .bands import sample_bands, spectrum_union

    grid = _parse_grid(args.grid)
    symbol = _resolve_symbol(args)
    bs = sample_bands(symbol, grid if len(grid) == symbol.dim else grid[0])
    intervals = spectrum_union(bs)
    config = _config_dict(args, bs.grid_sizes)
    if args.format == "csv":
        lines = ["# " + SCHEMA_VERSION + " " + json.dumps(config, sort_keys=True)]
        header = ",".join(f"k{i+1}" for i in range(bs.dim))
        header += "," + ",".join(f"eps{j}" for j in range(bs.fiber_dim))
        lines.append(header)
        mesh = bs.bands.reshape(-1, bs.fiber_dim)
        import numpy as np
        pts = np.stack(np.meshgrid(*bs.axes, indexing="ij"), axis=-1).reshape(-1, bs.dim)
        for k, row in zip(pts, mesh):
            lines.append(",".join(_fmt(x) for x in list(k) + list(row)))
        _emit("\n".join(lines) + "\n", args.out)
    else:
        payload = {
            "spectrum": [[lo, hi] for lo, hi in intervals],
            "axes": [list(map(float, ax)) for ax in bs.axes],
            "bands": bs.bands.tolist(),
        }
        _emit(_json_artifact(config, payload), args.out)
    return EXIT_OK


def _build_state(args, lam):
    from .bands import extract_fermi_surface, fermi_measure, sample_bands
    from .bands import FermiState

    grid = _parse_grid(args.grid)
    symbol = _resolve_symbol(args)
    bs = sample_bands(symbol, grid if len(grid) == symbol.dim else grid[0])
    mesh = extract_fermi_surface(bs, lam, args.tol_levelset, args.tol_grad_floor)
    measure = fermi_measure(bs, mesh, symbol, args.tol_gap_floor)
    return symbol, bs, mesh, measure, FermiState(measure=measure, symbol=symbol,
                                                 level=float(lam))


def cmd_fermi(args) -> int:
    levels = _levels(args)
    if not levels:
        raise ValueError("fermi requires --lambda or --lambda-sweep")
    results = []
    for lam in levels:
        symbol, bs, mesh, measure, _ = _build_state(args, lam)
        results.append((lam, bs, mesh, measure))

    config = _config_dict(args, results[0][1].grid_sizes)
    if args.format == "csv":
        lines = ["# " + SCHEMA_VERSION + " " + json.dumps(config, sort_keys=True),
                 "k1,k2,band,weight,grad"]
        for lam, bs, mesh, measure in results:
            for node in measure.nodes:
                k = list(node.k) + [0.0] * (2 - len(node.k))
                lines.append(",".join([
                    _fmt(k[0]), _fmt(k[1]), str(node.band),
                    _fmt(node.weight), _fmt(node.grad),
                ]))
        _emit("\n".join(lines) + "\n", args.out)
    else:
        payload_levels = []
        for lam, bs, mesh, measure in results:
            payload_levels.append({
                "level": lam,
                "gap": measure.gap if measure.gap != float("inf") else "inf",
                "total_mass": measure.total_weight,
                "segments": [
                    {
                        "band": poly.band,
                        "points": poly.points.tolist(),
                        "grads": poly.node_grads.tolist(),
                    }
                    for poly in mesh.segments
                ],
                "measure_nodes": [
                    {
                        "k": node.k.tolist(),
                        "weight": node.weight,
                        "band": node.band,
                        "grad": node.grad,
                    }
                    for node in measure.nodes
                ],
            })
        _emit(_json_artifact(config, {"levels": payload_levels}), args.out)
    return EXIT_OK


def cmd_state(args) -> int:
    import numpy as np

    from . import models

    levels = _levels(args)
    if not levels:
        raise ValueError("state requires --lambda or --lambda-sweep")

    reports = []
    worst_defect = 0.0
    for lam in levels:
        symbol, bs, mesh, measure, state = _build_state(args, lam)
        omega_1 = state.expect_identity()
        omega_h = state.expect_hamiltonian()
        defect = state.quadratic_defect()
        worst_defect = max(worst_defect, defect)
        report = {
            "level": lam,
            "omega_1": omega_1,
            "omega_H": omega_h,
            "eigen_defect": defect,
        }
        if getattr(args, "observable", None):
            obs = args.observable
            if obs == "identity":
                value = complex(omega_1)
            elif obs == "hamiltonian":
                value = complex(omega_h)
            elif obs == "diag10":
                value = state.expect(np.diag([1.0, 0.0]).astype(complex))
            elif os.path.exists(obs):
                from .bands import TrigPolynomialSymbol
                value = state.expect(TrigPolynomialSymbol.load(obs))
            else:
                raise ValueError(f"unknown observable {obs!r}")
            report["omega_obs"] = [value.real, value.imag]
        reports.append(report)

    config = _config_dict(args, _parse_grid(args.grid))
    if args.format == "csv":
        lines = ["# " + SCHEMA_VERSION + " " + json.dumps(config, sort_keys=True),
                 "level,omega_1,omega_H,eigen_defect"]
        for r in reports:
            lines.append(",".join(_fmt(r[k]) for k in
                                  ("level", "omega_1", "omega_H", "eigen_defect")))
        _emit("\n".join(lines) + "\n", args.out)
    else:
        payload = {"levels": reports} if len(reports) > 1 else reports[0]
        _emit(_json_artifact(config, payload), args.out)
    return EXIT_DEFECT if worst_defect > args.tol_state else EXIT_OK


def cmd_disintegrate(args) -> int:
    from . import disintegration as dis
    from . import models

    grid = _parse_grid(args.grid)[0]
    levels = _levels(args)
    config = _config_dict(args, (grid,))

    if args.model == "linear-square":
        rho = dis.linear_difference_pushforward(args.ell, grid)
        fibers = [dis.linear_difference_fiber(args.ell, lam) for lam in levels]
        fiber_payload = [
            {
                "level": fm.level,
                "kind": fm.kind,
                "atoms": [[list(map(float, x)), float(w)] for x, w in fm.atoms],
            }
            for fm in fibers
        ]
    else:
        import numpy as np

        if args.model == "identity":
            f = dis.GridFunction1D.from_callable(lambda x: x, 0.0, 1.0, 1024,
                                                 df=lambda x: 1.0)
        elif args.model == "square":
            f = dis.GridFunction1D.from_callable(lambda x: x * x, -1.0, 1.0, 1024,
                                                 df=lambda x: 2.0 * x)
        elif args.model == "trig":
            tf, tdf = models.trig_band_function(args.gamma)
            f = dis.GridFunction1D.from_callable(tf, -2 * np.pi, 2 * np.pi, 2048,
                                                 df=tdf)
        else:
            raise ValueError(f"unknown 1-D function {args.model!r}")
        rho = dis.pushforward_1d(f, grid)
        fibers = [dis.disintegrate_1d(f, lam) for lam in levels]
        fiber_payload = [
            {
                "level": fm.level,
                "kind": fm.kind,
                "atoms": [[float(x), float(w)] for x, w in fm.atoms],
            }
            for fm in fibers
        ]

    if args.format == "csv":
        lines = ["# " + SCHEMA_VERSION + " " + json.dumps(config, sort_keys=True),
                 "y,density"]
        for y, d in zip(rho.grid, rho.density):
            lines.append(f"{_fmt(y)},{_fmt(d)}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        payload = {
            "range": [rho.ymin, rho.ymax],
            "density_grid": [float(y) for y in rho.grid],
            "density": [float(d) for d in rho.density],
            "total_mass": rho.total_mass,
            "fibers": fiber_payload,
        }
        _emit(_json_artifact(config, payload), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0

    from .errors import (
        ConvergenceError,
        CriticalLevelError,
        CriticalValueError,
        EmptyFermiSurfaceError,
        EmptyFiberError,
        FermiSpectraError,
        GapViolationError,
        NonHermitianError,
        NormalizationError,
        ZeroLambdaError,
    )

    handlers = {
        "bands": cmd_bands,
        "fermi": cmd_fermi,
        "state": cmd_state,
        "disintegrate": cmd_disintegrate,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, json.JSONDecodeError, NonHermitianError,
            ZeroLambdaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptyFermiSurfaceError, EmptyFiberError) as exc:
        print(f"empty level set: {exc}", file=sys.stderr)
        return EXIT_EMPTY_SURFACE
    except (GapViolationError, CriticalLevelError, CriticalValueError) as exc:
        print(f"critical level: {exc}", file=sys.stderr)
        return EXIT_CRITICAL
    except (ConvergenceError, NormalizationError, FermiSpectraError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
