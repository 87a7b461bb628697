"""``maskgan`` command line: train, sample, gradcheck, phantom, nifti-info.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(unreadable or malformed inputs), 3 numeric failure (non-finite values or
a failed gradient check).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import parse_config
from .data.dataset import PairDataset, load_nifti_pairs
from .data.nifti import header_summary
from .data.phantom import PhantomSpec, load_phantom, phantom_dataset, write_phantom
from .errors import (CheckpointError, ConfigError, DataError, NiftiError, NonFiniteError)
from .gradcheck import DEFAULT_TOL, run_suite
from .models import Generator, GeneratorConfig
from .training.checkpoint import read_tensors
from .training.metrics import export_sample_grid
from .training.trainer import generate, run_training

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="maskgan", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", allow_abbrev=False, help="train on the configured dataset",
                       description="Extra --key=value options override the config file.")
    t.add_argument("--config", type=Path, help="key=value config file (default: built-in)")
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--resume", type=Path, help="continue from an MFG1 checkpoint")
    t.add_argument("--quiet", action="store_true")

    s = sub.add_parser("sample", help="generate images for condition masks")
    s.add_argument("--checkpoint", type=Path, required=True)
    s.add_argument("--masks", type=Path, required=True,
                   help=".npy array of masks (n,1,S,S) or (n,S,S), or a phantom directory")
    s.add_argument("--out", type=Path, required=True)

    g = sub.add_parser("gradcheck", help="run the finite-difference gradient suite")
    g.add_argument("--instances", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path)

    ph = sub.add_parser("phantom", help="write a synthetic phantom dataset")
    ph.add_argument("--count", type=int, default=200)
    ph.add_argument("--size", type=int, default=64)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--out", type=Path, required=True)

    n = sub.add_parser("nifti-info", help="print NIfTI-1 header fields")
    n.add_argument("path", type=Path)
    n.add_argument("--out", type=Path, help="also write the fields to <out>/header.txt")
    return p


def load_dataset(cfg) -> PairDataset:
    """The training pairs named by a resolved :class:`~maskgan.config.RunConfig`."""
    run, data = cfg.train, cfg.data
    if data.dataset == "phantom":
        spec = PhantomSpec(size=run.image_size, seed=data.phantom_seed)
        return phantom_dataset(spec, data.phantom_count)
    if data.dataset == "phantom_dir":
        return load_phantom(data.data_dir)
    return load_nifti_pairs(data.pairs(), cfg.labels, data.condition.split(","),
                            run.image_size, data.exclude_empty)


def _cmd_train(args, overrides, out):
    text = args.config.read_text() if args.config else ""
    cfg = parse_config(text, overrides)
    run = cfg.train
    ds = load_dataset(cfg)
    if ds.image_size != run.image_size:
        raise DataError(f"dataset images are {ds.image_size}px but image_size={run.image_size}")
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "resolved.cfg").write_text(cfg.echo())
    out(cfg.echo().rstrip())
    heldout = None
    if run.heldout_count:
        ds, heldout = ds.split(run.heldout_count)
    resume = args.resume.read_bytes() if args.resume else None
    result = run_training(run, ds, args.out, heldout, resume, log=None if args.quiet else out)
    for e in result["eval"]:
        out(f"eval iter {e['iter']}: l1={e['l1']:.5f} mse={e['mse']:.5f} ssim={e['ssim']:.4f}")
    return EXIT_OK


def generator_from_tensors(named: dict, image_size: int) -> Generator:
    """Rebuild the generator stored in a checkpoint; its widths come from the tensor shapes."""
    params = {k[2:]: v for k, v in named.items()
              if k.startswith("G.") and not k.startswith("G.buf.")}
    buffers = {k[6:]: v for k, v in named.items() if k.startswith("G.buf.")}
    enc = [params[f"enc{i}.conv.weight"] for i in range(len(params))
           if f"enc{i}.conv.weight" in params]
    if not enc or "out.conv.weight" not in params:
        raise CheckpointError("checkpoint holds no generator")
    out_w = params["out.conv.weight"]
    cfg = GeneratorConfig(depth=len(enc), base_channels=enc[0].shape[0],
                          channel_cap=max(w.shape[0] for w in enc), in_channels=enc[0].shape[1],
                          out_channels=out_w.shape[0], image_size=image_size,
                          kernel=enc[0].shape[2], out_kernel=out_w.shape[2])
    return Generator(cfg, params, buffers)


def _cmd_sample(args, overrides, out):
    if overrides:
        raise UsageError(f"unrecognized arguments: {' '.join(overrides)}")
    targets = None
    if args.masks.is_dir():
        ds = load_phantom(args.masks)
        masks, targets = ds.conditions, ds.targets
    else:
        try:
            masks = np.load(args.masks)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read masks from {args.masks}: {exc}") from None
        if masks.ndim == 3:
            masks = masks[:, None]
        if masks.ndim != 4 or masks.shape[-1] != masks.shape[-2]:
            raise DataError(f"masks must be (n,1,S,S) or (n,S,S), got {masks.shape}")
        if masks.min() < 0 or masks.max() > 1:
            raise DataError("mask values must lie in [0, 1]")
    g = generator_from_tensors(read_tensors(args.checkpoint.read_bytes()), masks.shape[-1])
    gen = generate(g, masks)
    if not np.all(np.isfinite(gen)):
        raise NonFiniteError("generator produced non-finite values")
    args.out.mkdir(parents=True, exist_ok=True)
    np.save(args.out / "generated.npy", gen)
    blank = np.zeros_like(gen) if targets is None else targets
    export_sample_grid(masks, gen, blank, args.out / "samples.pgm")
    out(f"wrote {len(gen)} samples to {args.out}")
    return EXIT_OK


def _cmd_gradcheck(args, overrides, out):
    if overrides:
        raise UsageError(f"unrecognized arguments: {' '.join(overrides)}")
    results = run_suite(instances=args.instances, seed=args.seed)
    lines = []
    for name, r in results.items():
        status = "ok" if r.ok else "FAIL"
        lines.append(f"{name:24s} max_rel_err={r.max_error:.3e} coords={r.coords_checked} "
                     f"kinks_skipped={r.kinks_skipped} {status}")
    failed = [n for n, r in results.items() if not r.ok]
    lines.append(f"{len(results) - len(failed)}/{len(results)} cases below {DEFAULT_TOL:g}")
    out("\n".join(lines))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "gradcheck.txt").write_text("\n".join(lines) + "\n")
    return EXIT_NUMERIC if failed else EXIT_OK


def _cmd_phantom(args, overrides, out):
    if overrides:
        raise UsageError(f"unrecognized arguments: {' '.join(overrides)}")
    if args.count < 1:
        raise UsageError("--count must be positive")
    path = write_phantom(PhantomSpec(size=args.size, seed=args.seed), args.count, args.out)
    out(f"wrote {args.count} pairs ({args.size}x{args.size}, seed {args.seed}); manifest {path}")
    return EXIT_OK


def _cmd_nifti_info(args, overrides, out):
    if overrides:
        raise UsageError(f"unrecognized arguments: {' '.join(overrides)}")
    try:
        data = args.path.read_bytes()
    except OSError as exc:
        raise DataError(str(exc)) from None
    info = header_summary(data)
    text = "\n".join(f"{k}: {'x'.join(map(str, v)) if k == 'dims' else v}"
                     for k, v in info.items())
    out(text)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "header.txt").write_text(text + "\n")
    return EXIT_OK


COMMANDS = {"train": _cmd_train, "sample": _cmd_sample, "gradcheck": _cmd_gradcheck,
            "phantom": _cmd_phantom, "nifti-info": _cmd_nifti_info}


def main(argv=None, out=print, err=None) -> int:
    err = err or (lambda m: print(m, file=sys.stderr))
    parser = _build_parser()
    try:
        args, rest = parser.parse_known_args(argv)
        overrides = [a for a in rest if a.startswith("--") and "=" in a]
        extra = [a for a in rest if a not in overrides]
        if extra or (overrides and args.command != "train"):
            raise UsageError(f"unrecognized arguments: {' '.join(rest)}")
        return COMMANDS[args.command](args, overrides, out)
    except (UsageError, ConfigError) as exc:
        err(f"error: {exc}")
        return EXIT_USAGE
    except (DataError, NiftiError, CheckpointError, OSError) as exc:
        err(f"data error: {exc}")
        return EXIT_DATA
    except NonFiniteError as exc:
        err(f"numeric failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
