"""Command-line entry point: ``surfreg {rigid,arap,synth,info}``.

Exit codes: 0 success, 1 usage error, 2 I/O or input-data error, 3 numerical
failure (singular system, degenerate normals, or non-convergence under
``--require-convergence``). Nothing is written unless the run succeeds.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from enum import IntEnum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from surfreg.arap import ArapConfig, register_arap
from surfreg.energy import Weights
from surfreg.errors import InvalidInputError, ObjParseError, RegistrationError
from surfreg.fileio import Mesh, RunConfig, read_obj, write_iteration_log, write_obj
from surfreg.rigid import RigidConfig, register_rigid
from surfreg.synth import SCENARIOS

log = logging.getLogger("surfreg")

_RUN_FLAGS = ("w1", "w2", "w3", "w4", "tikhonov", "max_iters", "stop_tol")


class ExitStatus(IntEnum):
    OK = 0
    USAGE = 1
    IO = 2
    NUMERICAL = 3


class UsageError(Exception):
    pass


class _Failure(Exception):
    def __init__(self, status: ExitStatus, message: str):
        super().__init__(message)
        self.status = status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().rstrip()}\n{self.prog}: error: {message}")


def _add_run_flags(p: argparse.ArgumentParser, arap: bool) -> None:
    iters = 100 if arap else 50
    p.add_argument("--source", help="source mesh (OBJ)")
    p.add_argument("--target", help="target mesh or point set (OBJ)")
    p.add_argument("--out", help="write the registered source here (OBJ)")
    p.add_argument("--w1", type=float, help="point-to-point weight (default 1)")
    p.add_argument("--w2", type=float, help="global rigid weight (default 1)")
    if arap:
        p.add_argument("--w3", type=float, help="as-rigid-as-possible weight (default 1)")
    p.add_argument("--w4", type=float, help="point-to-plane weight, 0 disables it (default 0)")
    p.add_argument("--tikhonov", type=float, help="rotation damping (default 1e-6)")
    p.add_argument("--iters", dest="max_iters", type=int, help=f"maximum iterations (default {iters})")
    p.add_argument("--tol", dest="stop_tol", type=float, help="stopping tolerance (default 1e-6)")
    p.add_argument("--log", help="per-iteration CSV log")
    p.add_argument("--report", help="JSON run report")
    p.add_argument("--config", help="JSON run config; explicit flags take precedence")
    p.add_argument("--require-convergence", action="store_true", help="exit 3 if max iterations is reached")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="surfreg", description="Rigid and as-rigid-as-possible surface registration.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    rp = sub.add_parser("rigid", help="rigid ICP registration")
    ap = sub.add_parser("arap", help="non-rigid registration (source needs faces)")
    _add_run_flags(rp, arap=False)
    _add_run_flags(ap, arap=True)
    parser.subcommands = {"rigid": rp, "arap": ap}
    sp = sub.add_parser("synth", help="write a synthetic scenario")
    sp.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True)
    ip = sub.add_parser("info", help="print mesh counts and bounding box")
    ip.add_argument("file")
    return parser


def _resolve_config(args, parser) -> RunConfig:
    mode = args.command
    base = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise _Failure(ExitStatus.IO, f"cannot read config {args.config}: {exc.strerror or exc}") from None
        try:
            cfg = RunConfig.from_json(text)
        except (ValueError, TypeError) as exc:
            raise UsageError(f"invalid config {args.config}: {exc}") from None
        if cfg.mode != mode:
            raise UsageError(f"config is for mode {cfg.mode!r} but the subcommand is {mode!r}")
        base = cfg.to_dict()
        if "max_iters" not in json.loads(text):
            base["max_iters"] = None
    base["mode"] = mode
    for name in _RUN_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            base[name] = v
    for name, key in (("source", "source"), ("target", "target"), ("out", "output"), ("log", "log")):
        v = getattr(args, name)
        if v is not None:
            base[key] = v
    try:
        cfg = RunConfig(**base)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    for key, flag in (("source", "--source"), ("target", "--target")):
        if not getattr(cfg, key):
            parser.error(f"the following arguments are required: {flag}")
    return cfg


def _load(path: str) -> Mesh:
    try:
        return read_obj(path)
    except OSError as exc:
        raise _Failure(ExitStatus.IO, f"cannot read {path}: {exc.strerror or exc}") from None
    except (ObjParseError, InvalidInputError) as exc:
        raise _Failure(ExitStatus.IO, f"{path}: {exc}") from None


def _commit(files: dict[str, str]) -> None:
    """Write every file or none: stage to temporaries, then rename."""
    staged = []
    try:
        for path, text in files.items():
            parent = os.path.dirname(os.path.abspath(path))
            fd, tmp = tempfile.mkstemp(dir=parent, prefix=".surfreg-")
            staged.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        for tmp, path in staged:
            os.replace(tmp, path)
    except OSError as exc:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise _Failure(ExitStatus.IO, f"cannot write output: {exc.strerror or exc}") from None


def _energies_dict(e) -> dict:
    return {k: float(getattr(e, k)) for k in ("e_fit", "e_rigid", "e_arap", "e_plane", "e_reg", "e_total")}


def build_report(result, cfg: RunConfig) -> dict:
    last = result.reports[-1].energies if result.reports else None
    return {
        "mode": result.mode,
        "iterations": result.iterations,
        "converged": bool(result.converged),
        "final_energies": _energies_dict(last) if last is not None else None,
        "transform": {
            "rotation": np.asarray(result.transform.rotation).tolist(),
            "translation": np.asarray(result.transform.translation).tolist(),
        },
        "rmsd": float(result.rmsd),
        "config": {k: getattr(cfg, k) for k in _RUN_FLAGS if not (cfg.mode == "rigid" and k == "w3")},
    }


def _dumps(obj) -> str:
    # json writes floats with repr, the shortest round-trip form
    return json.dumps(obj, indent=2) + "\n"


def _cmd_register(args, parser) -> ExitStatus:
    cfg = _resolve_config(args, parser)
    try:
        w = Weights(cfg.w1, cfg.w2, cfg.w3 if cfg.mode == "arap" else 0.0, cfg.w4, cfg.tikhonov)
        common = dict(weights=w, max_iters=cfg.max_iters, stop_tol=cfg.stop_tol, use_point_to_plane=cfg.w4 > 0)
        run_cfg = RigidConfig(**common) if cfg.mode == "rigid" else ArapConfig(**common)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None

    source = _load(cfg.source)
    target = _load(cfg.target)
    if cfg.mode == "arap" and len(source.faces) == 0:
        raise _Failure(ExitStatus.IO, f"{cfg.source}: arap needs a source mesh with faces")
    try:
        if cfg.mode == "rigid":
            result = register_rigid(source, target, run_cfg)
        else:
            result = register_arap(source, target, run_cfg)
    except InvalidInputError as exc:
        raise _Failure(ExitStatus.IO, str(exc)) from None
    except (RegistrationError, ArithmeticError) as exc:
        raise _Failure(ExitStatus.NUMERICAL, str(exc)) from None

    if args.require_convergence and not result.converged:
        raise _Failure(ExitStatus.NUMERICAL, f"did not converge within {cfg.max_iters} iterations")

    files = {}
    if cfg.output:
        normals = None
        if cfg.mode == "rigid" and source.normals is not None:
            normals = source.normals @ result.transform.rotation.T
        files[cfg.output] = write_obj(source.with_vertices(result.final_points, normals))
    if cfg.log:
        files[cfg.log] = write_iteration_log(result.reports)
    if args.report:
        files[args.report] = _dumps(build_report(result, cfg))
    _commit(files)
    state = "converged" if result.converged else "not converged"
    print(f"{cfg.mode}: {result.iterations} iterations, {state}, rmsd {result.rmsd!r}")
    return ExitStatus.OK


def _cmd_synth(args) -> ExitStatus:
    sc = SCENARIOS[args.scenario](args.seed)
    gt = None
    if sc.ground_truth is not None:
        gt = {
            "rotation": np.asarray(sc.ground_truth.rotation).tolist(),
            "translation": np.asarray(sc.ground_truth.translation).tolist(),
        }
    meta = {"scenario": sc.name, "seed": args.seed, "params": sc.params, "ground_truth": gt}
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _Failure(ExitStatus.IO, f"cannot create {out}: {exc.strerror or exc}") from None
    _commit(
        {
            str(out / "source.obj"): write_obj(sc.source),
            str(out / "target.obj"): write_obj(sc.target),
            str(out / "ground_truth.json"): _dumps(meta),
        }
    )
    print(f"wrote {sc.name} scenario to {out}")
    return ExitStatus.OK


def _cmd_info(args) -> ExitStatus:
    mesh = _load(args.file)
    print(f"vertices {mesh.n_vertices}")
    print(f"faces {len(mesh.faces)}")
    print(f"normals {'yes' if mesh.normals is not None else 'no'}")
    if mesh.n_vertices:
        lo, hi = mesh.bbox()
        print("bbox_min " + " ".join(repr(float(v)) for v in lo))
        print("bbox_max " + " ".join(repr(float(v)) for v in hi))
        print(f"bbox_diagonal {mesh.bbox_diagonal()!r}")
    return ExitStatus.OK


def run(argv: Optional[Sequence[str]] = None) -> ExitStatus:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
        )
        if args.command in ("rigid", "arap"):
            return _cmd_register(args, parser.subcommands[args.command])
        if args.command == "synth":
            return _cmd_synth(args)
        return _cmd_info(args)
    except UsageError as exc:
        msg = str(exc)
        print(msg if msg.startswith("usage:") else f"surfreg: error: {msg}", file=sys.stderr)
        return ExitStatus.USAGE
    except _Failure as exc:
        print(f"surfreg: error: {exc}", file=sys.stderr)
        return exc.status
    except SystemExit as exc:
        # --help
        return ExitStatus(exc.code or 0)


def main(argv: Optional[Sequence[str]] = None) -> int:
    return int(run(argv))


if __name__ == "__main__":
    sys.exit(main())
