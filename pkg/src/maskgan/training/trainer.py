"""Alternating discriminator/generator optimization and the training run."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ..autodiff import Tape, detach
from ..data.dataset import PairDataset, TrainingPair, batch_iterator
from ..errors import NonFiniteError
from ..layers import sigmoid
from ..models import (Discriminator, Generator, build_discriminator, build_generator,
                      discriminator_forward, generator_forward)
from ..objectives import bce_gan_losses, generator_objective, l1_recon, lsgan_d_loss
from ..optim import AdamState, adam_step
from ..rng import Rng
from .checkpoint import EMA_KEYS, TrainState, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .metrics import discriminator_accuracy, ema_update, export_sample_grid, l1, mse, ssim

METRICS_HEADER = ("iter", "g_loss", "d_loss", "d_acc_real", "d_acc_fake",
                  "g_loss_ema", "d_loss_ema", "acc_real_ema", "acc_fake_ema")
EVAL_HEADER = ("iter", "l1", "mse", "ssim")


@dataclass(frozen=True)
class MetricsRow:
    iteration: int
    g_loss: float
    d_loss: float
    d_acc_real: float
    d_acc_fake: float
    g_loss_ema: float
    d_loss_ema: float
    acc_real_ema: float
    acc_fake_ema: float

    def csv_fields(self) -> list[str]:
        vals = [getattr(self, f.name) for f in fields(self)]
        return [str(vals[0])] + [np.format_float_positional(v, trim="-") for v in vals[1:]]


def init_state(cfg: TrainConfig) -> TrainState:
    """Fresh models and optimizers; parameters are a pure function of ``cfg.seed``."""
    root = Rng(cfg.seed)
    kw = dict(slope=cfg.leaky_slope, bn_momentum=cfg.bn_momentum, bn_eps=cfg.bn_eps)
    g = build_generator(cfg.generator_config(), root.fork(1), **kw)
    d = build_discriminator(cfg.discriminator_config(), root.fork(2), **kw)
    return TrainState(g, d, AdamState.for_params(g.params, **cfg.adam_hyper()),
                      AdamState.for_params(d.params, **cfg.adam_hyper()), root.fork(3))


def _check(value, term: str, iteration: int) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise NonFiniteError(f"iteration {iteration}: {term} is {value}", where=term,
                             iteration=iteration)
    return value


def _adam(params, grads, opt, term, iteration):
    try:
        return adam_step(params, grads, opt)
    except NonFiniteError as exc:
        raise NonFiniteError(f"iteration {iteration}: {exc}", where=f"{term}:{exc.where}",
                             iteration=iteration) from None


def _d_losses(d_real, d_fake, mode):
    """Discriminator loss and the scores used for accuracy."""
    if mode == "bce":
        p_real, p_fake = sigmoid(d_real), sigmoid(d_fake)
        return bce_gan_losses(p_real, p_fake)[0], p_real.value, p_fake.value
    return lsgan_d_loss(d_real, d_fake), d_real.value, d_fake.value


def _g_loss(d_fake, x, fake, cfg):
    if cfg.loss_mode == "bce":
        adv = bce_gan_losses(np.ones_like(d_fake.value), sigmoid(d_fake))[1]
        recon = l1_recon(x, fake)
        return adv * cfg.lam + recon if cfg.lam else recon
    return generator_objective(d_fake, x, fake, cfg.weights())


def train_step(batch: TrainingPair, state: TrainState, cfg: TrainConfig,
               freeze_d: bool = False, update: bool = True) -> dict:
    """One iteration: a discriminator step, then a generator step.

    The generator output computed (in train mode) for the discriminator step
    is reused, still taped, for the generator step, where the freshly updated
    discriminator weights enter as constants without touching their running
    statistics. ``freeze_d`` skips the discriminator update (a test hook);
    ``update=False`` evaluates the losses without changing anything.
    Returns the raw ``g_loss``, ``d_loss`` and the two accuracies.
    """
    it = state.iteration + 1 if update else state.iteration
    y, x = batch.condition, batch.target
    g, d = state.g, state.d
    stats = update
    tg = Tape()
    wg = tg.watch(g.params)
    fake = generator_forward(g, y, wg, mode="train", update_stats=stats)

    td = Tape()
    wd = td.watch(d.params)
    d_real = discriminator_forward(d, x, y, wd, "train", update_stats=stats)
    d_fake = discriminator_forward(d, detach(fake), y, wd, "train", update_stats=stats)
    d_loss, s_real, s_fake = _d_losses(d_real, d_fake, cfg.loss_mode)
    d_val = _check(d_loss.value, "d_loss", it)
    if update and not freeze_d:
        grads = td.backward(d_loss)
        d.params, state.opt_d = _adam(d.params, {k: grads[v] for k, v in wd.items()},
                                      state.opt_d, "D", it)

    d_fake_g = discriminator_forward(d, fake, y, None, "train", update_stats=False)
    g_loss = _g_loss(d_fake_g, x, fake, cfg)
    g_val = _check(g_loss.value, "g_loss", it)
    if update:
        grads = tg.backward(g_loss)
        g.params, state.opt_g = _adam(g.params, {k: grads[v] for k, v in wg.items()},
                                      state.opt_g, "G", it)
        state.iteration = it
    return {"g_loss": g_val, "d_loss": d_val,
            "acc_real": discriminator_accuracy(s_real, True),
            "acc_fake": discriminator_accuracy(s_fake, False)}


def record(state: TrainState, raw: dict, decay: float) -> MetricsRow:
    """Fold ``raw`` into the state's moving averages and build the logged row."""
    state.ema = {k: ema_update(state.ema.get(k), raw[k], decay) for k in EMA_KEYS}
    return MetricsRow(state.iteration, raw["g_loss"], raw["d_loss"], raw["acc_real"],
                      raw["acc_fake"], *(state.ema[k] for k in EMA_KEYS))


def generator_only_steps(batch: TrainingPair, state: TrainState, cfg: TrainConfig,
                         steps: int) -> list[float]:
    """Repeated generator updates on one batch with the discriminator frozen.

    Returns the batch L1 before each step and after the last one.
    """
    history = []
    for _ in range(steps):
        tape = Tape()
        w = tape.watch(state.g.params)
        fake = generator_forward(state.g, batch.condition, w, mode="train")
        history.append(float(l1_recon(batch.target, fake.value).value))
        d_fake = discriminator_forward(state.d, fake, batch.condition, None, "train",
                                       update_stats=False)
        loss = _g_loss(d_fake, batch.target, fake, cfg)
        _check(loss.value, "g_loss", state.iteration + 1)
        grads = tape.backward(loss)
        state.g.params, state.opt_g = _adam(state.g.params,
                                            {k: grads[v] for k, v in w.items()},
                                            state.opt_g, "G", state.iteration + 1)
        state.iteration += 1
    fake = generator_forward(state.g, batch.condition, mode="train", update_stats=False)
    history.append(float(l1_recon(batch.target, fake.value).value))
    return history


def generate(g: Generator, conditions, batch_size: int = 16) -> np.ndarray:
    """Standalone inference (running batch-norm statistics)."""
    conditions = np.asarray(conditions, dtype=np.float32)
    out = [generator_forward(g, conditions[i:i + batch_size]).value
           for i in range(0, len(conditions), batch_size)]
    return np.concatenate(out)


def evaluate(g: Generator, heldout: PairDataset) -> dict:
    """Mean per-sample L1, MSE and SSIM of generated vs target images."""
    gen = generate(g, heldout.conditions)
    tgt = heldout.targets
    return {"l1": float(np.mean([l1(a, b) for a, b in zip(gen, tgt)])),
            "mse": float(np.mean([mse(a, b) for a, b in zip(gen, tgt)])),
            "ssim": float(np.mean([ssim(a[0], b[0]) for a, b in zip(gen, tgt)]))}


def resolved_config_text(cfg: TrainConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(e) for e in v)
        lines.append(f"{f.name}={v}")
    return "\n".join(lines) + "\n"


def run_training(cfg: TrainConfig, dataset: PairDataset, out_dir, heldout: PairDataset | None = None,
                 resume: bytes | None = None, log=None) -> dict:
    """Train for ``cfg.iterations`` iterations and write all outputs to ``out_dir``.

    Outputs: ``metrics.csv`` (row 0 is a forward-only evaluation, then one row
    per iteration), ``eval.csv`` (held-out L1/MSE/SSIM at iteration 0, every
    milestone and the end), ``samples_iter_<N>.pgm`` and
    ``checkpoint_iter_<N>.mfg`` at each milestone, ``checkpoint_final.mfg``
    and ``config.txt``. With ``resume`` (checkpoint bytes) training continues
    from the saved iteration and the CSVs hold only the rows after it.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if dataset.image_size != cfg.image_size:
        raise ValueError(f"dataset is {dataset.image_size}px, config expects {cfg.image_size}px")
    (out / "config.txt").write_text(resolved_config_text(cfg))
    state = init_state(cfg)
    if resume is not None:
        state = load_checkpoint(resume, state.g, state.d)
    grid = heldout[np.arange(min(cfg.grid_samples, len(heldout)))] if heldout else None
    milestones = set(cfg.milestones)
    evals = []

    def checkpoint_and_eval(final=False):
        it = state.iteration
        if heldout:
            evals.append({"iter": it, **evaluate(state.g, heldout)})
            with open(out / "eval.csv", "w", newline="") as fh:
                w = csv.DictWriter(fh, EVAL_HEADER)
                w.writeheader()
                w.writerows({k: _fmt(v) for k, v in e.items()} for e in evals)
        if it in milestones:
            if grid is not None:
                export_sample_grid(grid.condition, generate(state.g, grid.condition),
                                   grid.target, out / f"samples_iter_{it}.pgm")
            (out / f"checkpoint_iter_{it}.mfg").write_bytes(save_checkpoint(state))
        if final:
            (out / "checkpoint_final.mfg").write_bytes(save_checkpoint(state))

    batches = batch_iterator(dataset, cfg.batch_size, state.rng, start=state.iteration)
    # non-finite values are detected explicitly and raised as NonFiniteError
    with threadpool_limits(limits=cfg.parallelism), np.errstate(over="ignore", invalid="ignore"), \
            open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        try:
            if state.iteration == 0:
                # forward-only evaluation on the first batch, then the first milestone
                first = next(batch_iterator(dataset, cfg.batch_size, state.rng))
                writer.writerow(record(state, train_step(first, state, cfg, update=False),
                                       cfg.ema_decay).csv_fields())
                checkpoint_and_eval()
            while state.iteration < cfg.iterations:
                row = record(state, train_step(next(batches), state, cfg), cfg.ema_decay)
                writer.writerow(row.csv_fields())
                if log and (state.iteration % 100 == 0 or state.iteration == cfg.iterations):
                    log(f"iter {row.iteration}: g_loss={row.g_loss:.4f} d_loss={row.d_loss:.4f}")
                if state.iteration in milestones and state.iteration != cfg.iterations:
                    fh.flush()
                    checkpoint_and_eval()
        finally:
            fh.flush()
        checkpoint_and_eval(final=True)
    return {"state": state, "eval": evals}


def _fmt(v):
    return v if isinstance(v, int) else np.format_float_positional(v, trim="-")
