"""Command-line entry point: ``fuselens {fuse,eval,batch,phantom}``.

Exit codes: 0 success, 2 input/validation error, 3 I/O error, 4 numerical
divergence.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

from . import config
from .errors import FuseLensError, InputError, OutputError, ShapeError
from .fuse import INITS, OptimConfig, fuse_average, fuse_laplacian, fuse_variational
from .image import GrayImage, PatchSpec, RegisteredPair, load_image, save_image
from .losses import LossWeights, Objective
from .metrics import evaluate_all
from .phantom import make_phantom
from . import report

log = logging.getLogger("fuselens")

METHODS = ("variational", "average", "laplacian")
TRACE_SUFFIX = ".trace.json"


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    ct_path: Path
    mr_path: Path
    fused_path: Optional[Path] = None


@dataclass(frozen=True)
class Manifest:
    entries: List[ManifestEntry]
    root: Path

    @classmethod
    def load(cls, path) -> "Manifest":
        """Parse a JSON manifest; relative paths resolve against ``root``.

        ``root`` defaults to the manifest's directory and is itself taken
        relative to it.
        """
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise InputError(f"{path}: manifest not found") from exc
        except (OSError, ValueError) as exc:
            raise InputError(f"{path}: unreadable manifest ({exc})") from exc
        if not isinstance(doc, dict) or not isinstance(doc.get("entries", []), list):
            raise InputError(f"{path}: manifest must be an object with an 'entries' list")
        root = path.parent / doc.get("root", ".")
        entries, seen = [], set()
        for i, raw in enumerate(doc.get("entries", [])):
            try:
                ident = str(raw["id"])
                paths = [raw["ct_path"], raw["mr_path"]]
            except (KeyError, TypeError) as exc:
                raise InputError(f"{path}: entry {i} needs id, ct_path and mr_path") from exc
            if ident in seen:
                raise InputError(f"{path}: duplicate id {ident!r}")
            seen.add(ident)
            fused = raw.get("fused_path")
            resolved = [root / p for p in paths + ([fused] if fused else [])]
            for p in resolved:
                if not p.is_file():
                    raise InputError(f"{path}: entry {ident!r} references missing file {p}")
            entries.append(ManifestEntry(ident, resolved[0], resolved[1], resolved[2] if fused else None))
        return cls(entries, root)


@dataclass(frozen=True)
class RunConfig:
    method: str = "variational"
    optim: OptimConfig = field(default_factory=OptimConfig)
    levels: int = 4
    out_dir: Path = Path(".")
    report_format: str = "csv"
    ext: str = "png"

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.report_format not in ("csv", "json"):
            raise InputError(f"report format must be csv or json, got {self.report_format!r}")


def _load_pair(ct_path, mr_path) -> RegisteredPair:
    ct, mr = load_image(ct_path), load_image(mr_path)
    if ct.shape != mr.shape:
        raise ShapeError(f"{ct_path} is {ct.width}x{ct.height} but {mr_path} is {mr.width}x{mr.height}")
    return RegisteredPair(ct, mr)


def _trace_doc(run: RunConfig, x: RegisteredPair, fused: GrayImage, result=None):
    doc = {"method": run.method}
    if result is not None:
        doc.update(
            config=_jsonable(asdict(run.optim)),
            iterations_run=result.iterations_run,
            converged=result.converged,
            initial=result.loss_trace[0].to_dict(),
            iterations=[r.to_dict() for r in result.loss_trace[1:]],
        )
    else:
        cfg = run.optim
        final, _ = Objective(x, cfg.weights, cfg.sl_spec, cfg.mef_spec, cfg.mef_c)(fused.data)
        doc.update(iterations_run=0, converged=None, initial=final.to_dict(), iterations=[])
        if run.method == "laplacian":
            doc["levels"] = run.levels
    return doc


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=str))


def fuse_pair(x: RegisteredPair, run: RunConfig):
    """Fuse one pair; returns ``(fused, trace_doc)``."""
    if run.method == "variational":
        result = fuse_variational(x, run.optim)
        return result.fused, _trace_doc(run, x, result.fused, result)
    fused = fuse_average(x) if run.method == "average" else fuse_laplacian(x, run.levels)
    return fused, _trace_doc(run, x, fused)


def _write_text(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"{path}: cannot write ({exc})") from exc


def _ensure_dir(path: Path):
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"{path}: cannot create output directory ({exc})") from exc


def cmd_fuse(ct_path, mr_path, run: RunConfig, name: str = "fused") -> Path:
    x = _load_pair(ct_path, mr_path)
    _ensure_dir(run.out_dir)
    fused, trace = fuse_pair(x, run)
    out = run.out_dir / f"{name}.{run.ext}"
    save_image(fused, out)
    _write_text(run.out_dir / f"{name}{TRACE_SUFFIX}", json.dumps(trace, indent=2) + "\n")
    return out


def cmd_eval(ct_path, mr_path, fused_path, fmt: str = "csv", ident: Optional[str] = None) -> str:
    x = _load_pair(ct_path, mr_path)
    y = load_image(fused_path)
    if y.shape != x.shape:
        raise ShapeError(f"fused image {fused_path} does not match source shape")
    rep = evaluate_all(x, y)
    if fmt == "json":
        return json.dumps(report.record_dict(rep), indent=2) + "\n"
    if fmt != "csv":
        raise InputError(f"format must be csv or json, got {fmt!r}")
    return report.to_csv([(ident or Path(fused_path).stem, rep)])


def _process_entry(entry: ManifestEntry, run: RunConfig):
    x = _load_pair(entry.ct_path, entry.mr_path)
    if entry.fused_path is not None:
        fused = load_image(entry.fused_path)
        if fused.shape != x.shape:
            raise ShapeError(f"{entry.fused_path} does not match source shape")
    else:
        fused, trace = fuse_pair(x, run)
        save_image(fused, run.out_dir / f"{entry.id}.{run.ext}")
        _write_text(run.out_dir / f"{entry.id}{TRACE_SUFFIX}", json.dumps(trace, indent=2) + "\n")
    return evaluate_all(x, fused)


def cmd_batch(manifest_path, run: RunConfig, jobs: int = 1):
    """Fuse and evaluate every manifest entry.

    Returns ``(rows, errors)``; rows are ``(id, MetricReport)`` in manifest
    order, errors map id to the exception raised for that entry.
    """
    manifest = Manifest.load(manifest_path)
    if not manifest.entries:
        raise InputError("empty manifest")
    if jobs < 1:
        raise InputError(f"--jobs must be at least 1, got {jobs}")
    _ensure_dir(run.out_dir)

    def attempt(entry):
        try:
            return _process_entry(entry, run), None
        except FuseLensError as exc:
            return None, exc

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        outcomes = list(pool.map(attempt, manifest.entries))

    rows, errors = [], {}
    for entry, (rep, err) in zip(manifest.entries, outcomes):
        if err is None:
            rows.append((entry.id, rep))
        else:
            errors[entry.id] = err
            log.error("entry %s failed: %s", entry.id, err)

    mean = report.aggregate([r for _, r in rows]) if rows else None
    if run.report_format == "csv":
        text = report.to_csv(rows + ([(report.AGGREGATE_ID, mean)] if mean else []))
    else:
        text = report.to_json(rows, mean)
    _write_text(run.out_dir / f"report.{run.report_format}", text)
    if errors:
        err_doc = {k: {"error": str(v), "exit_code": v.exit_code} for k, v in errors.items()}
        _write_text(run.out_dir / "errors.json", json.dumps(err_doc, indent=2) + "\n")
    return rows, errors


def cmd_phantom(out_dir, count: int, seed: int = 0, size: int = 256, ext: str = "png") -> Path:
    if count < 1:
        raise InputError(f"count must be at least 1, got {count}")
    out_dir = Path(out_dir)
    _ensure_dir(out_dir)
    entries = []
    for i in range(count):
        pair = make_phantom(size, seed, i)
        ct_name, mr_name = f"ct_{i:03d}.{ext}", f"mr_{i:03d}.{ext}"
        save_image(pair.ct, out_dir / ct_name)
        save_image(pair.mr, out_dir / mr_name)
        entries.append({"id": f"slice_{i:03d}", "ct_path": ct_name, "mr_path": mr_name})
    manifest = out_dir / "manifest.json"
    _write_text(manifest, json.dumps({"root": ".", "entries": entries}, indent=2) + "\n")
    return manifest


def _add_fusion_options(p):
    g = p.add_argument_group("fusion")
    g.add_argument("--method", choices=METHODS, default="variational",
                   help="fusion method (default: variational)")
    g.add_argument("--alpha", type=float, default=config.ALPHA,
                   help="semantic-loss weight (default: 0.005)")
    g.add_argument("--beta", type=float, default=config.BETA,
                   help="MEF-SSIM loss weight (default: 1)")
    g.add_argument("--lr", type=float, default=config.LEARNING_RATE,
                   help="Adam learning rate (default: 0.001)")
    g.add_argument("--iters", type=int, default=config.MAX_ITERS,
                   help="maximum optimizer steps (default: 300)")
    g.add_argument("--tol", type=float, default=config.TOL,
                   help="stop when the composite loss changes less than this (default: 1e-6)")
    g.add_argument("--sl-patch", type=int, default=config.SL_PATCH,
                   help="semantic-loss patch size (default: 5)")
    g.add_argument("--sl-stride", type=int, default=config.SL_STRIDE,
                   help="semantic-loss patch stride (default: 3)")
    g.add_argument("--mef-patch", type=int, default=config.MEF_PATCH,
                   help="MEF-SSIM patch size (default: 7)")
    g.add_argument("--mef-stride", type=int, default=config.MEF_STRIDE,
                   help="MEF-SSIM patch stride (default: 1)")
    g.add_argument("--mef-c", type=float, default=config.MEF_C,
                   help="MEF-SSIM stabilizing constant C (default: 9e-4)")
    g.add_argument("--bg-threshold", type=float, default=config.BACKGROUND_THRESHOLD,
                   help="background patch threshold for the semantic loss (default: 0.01)")
    g.add_argument("--init", choices=INITS, default="average",
                   help="optimizer starting image (default: average)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    g.add_argument("--levels", type=int, default=4,
                   help="Laplacian pyramid levels (default: 4)")
    g.add_argument("--ext", choices=("png", "pgm"), default="png",
                   help="fused image format (default: png)")


def _run_config(args, out_dir, report_format="csv") -> RunConfig:
    optim = OptimConfig(
        weights=LossWeights(args.alpha, args.beta),
        sl_spec=PatchSpec(args.sl_patch, args.sl_stride, args.bg_threshold),
        mef_spec=PatchSpec(args.mef_patch, args.mef_stride, 0.0),
        mef_c=args.mef_c,
        learning_rate=args.lr,
        max_iters=args.iters,
        tol=args.tol,
        init=args.init,
        seed=args.seed,
    )
    return RunConfig(args.method, optim, args.levels, Path(out_dir), report_format, args.ext)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fuselens",
        description="Semantic-aware fusion and evaluation of registered CT/MR image pairs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse one registered pair")
    p.add_argument("--ct", required=True)
    p.add_argument("--mr", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default="fused", help="output file stem (default: fused)")
    _add_fusion_options(p)

    p = sub.add_parser("eval", help="score a fused image against its sources")
    p.add_argument("--ct", required=True)
    p.add_argument("--mr", required=True)
    p.add_argument("--fused", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--id", default=None, help="record id for csv output (default: fused file stem)")
    p.add_argument("--output", default=None, help="write the record here instead of stdout")

    p = sub.add_parser("batch", help="fuse and evaluate every pair in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel entries (default: 1)")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="report format (default: csv)")
    _add_fusion_options(p)

    p = sub.add_parser("phantom", help="generate synthetic registered CT/MR pairs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=13, help="number of pairs (default: 13)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--size", type=int, default=256, help="image side in pixels (default: 256)")
    p.add_argument("--ext", choices=("png", "pgm"), default="png")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fuse":
            cmd_fuse(args.ct, args.mr, _run_config(args, args.out), args.name)
        elif args.command == "eval":
            text = cmd_eval(args.ct, args.mr, args.fused, args.format, args.id)
            if args.output:
                _write_text(Path(args.output), text)
            else:
                sys.stdout.write(text)
        elif args.command == "batch":
            _, errors = cmd_batch(args.manifest, _run_config(args, args.out, args.format), args.jobs)
            if errors:
                first = next(iter(errors.values()))
                print(f"fuselens: {len(errors)} entries failed", file=sys.stderr)
                return first.exit_code
        elif args.command == "phantom":
            cmd_phantom(args.out, args.count, args.seed, args.size, args.ext)
    except FuseLensError as exc:
        print(f"fuselens: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fuselens: {exc}", file=sys.stderr)
        return OutputError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
