"""Teacher-forced mini-batch training with Adam, masking, and freezing.

The batch loss is the mean over sentences of each sentence's negative
log-likelihood divided by its real prediction count (target tokens plus the
end-of-sequence emission). Padding contributes exactly zero. Frozen blocks
still receive gradients but are excluded from the update, which keeps them
bitwise-unchanged for as long as the freeze lasts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import TrainingDiverged
from .models import PaddedBatch, batched_logps, encoder_input
from .vocab import BOS_ID, EOS_ID, PAD_ID


def _pad_rows(rows, width: int) -> np.ndarray:
    out = np.full((len(rows), width), PAD_ID, dtype=np.int64)
    for i, row in enumerate(rows):
        out[i, : len(row)] = row
    return out


def make_batch(records) -> PaddedBatch:
    """Pad a list of (src, tgt[, draft]) id-sequence records into one batch."""
    records = list(records)
    if not records:
        raise ValueError("make_batch: empty batch")
    has_draft = len(records[0]) == 3
    src_rows = [encoder_input(r[0]) for r in records]
    tgt_in_rows = [[BOS_ID] + list(r[1]) for r in records]
    tgt_out_rows = [list(r[1]) + [EOS_ID] for r in records]
    widest_out = max(len(r) for r in tgt_out_rows)
    tgt_out = _pad_rows(tgt_out_rows, widest_out)
    batch = PaddedBatch(
        src=_pad_rows(src_rows, max(len(r) for r in src_rows)),
        tgt_in=_pad_rows(tgt_in_rows, widest_out),
        tgt_out=tgt_out,
        tgt_mask=(tgt_out != PAD_ID).astype(np.int64),
        draft=_pad_rows([encoder_input(r[2]) for r in records],
                        max(len(encoder_input(r[2])) for r in records)) if has_draft else None,
    )
    if not np.array_equal(batch.tgt_mask == 0, batch.tgt_out == PAD_ID):
        raise ValueError("make_batch: mask does not match padding")
    return batch


def batch_loss(model, batch: PaddedBatch) -> Tensor:
    """Scalar loss: mean over sentences of per-token negative log-likelihood."""
    counts = batch.tgt_mask.sum(axis=1)
    if batch.size == 0 or (counts == 0).any():
        raise ValueError("batch_loss: batch contains a fully masked sentence")
    logps = batched_logps(model, batch)
    picked = ad.pick(logps, batch.tgt_out.reshape(-1))
    dtype = model.dtype
    w = (batch.tgt_mask / (counts[:, None] * batch.size)).astype(dtype).reshape(-1)
    return ad.neg((picked * Tensor(w, dtype=dtype)).sum())


class Adam:
    """Bias-corrected adaptive updates; one slot pair per parameter tensor."""

    def __init__(self, tensors, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.tensors = list(tensors)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data, dtype=np.float64) for p in self.tensors]
        self.v = [np.zeros_like(p.data, dtype=np.float64) for p in self.tensors]

    def step(self, grads) -> None:
        if len(grads) != len(self.tensors):
            raise ValueError(f"adam: {len(grads)} gradients for {len(self.tensors)} tensors")
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, m, v, g in zip(self.tensors, self.m, self.v, grads):
            if g.shape != p.data.shape:
                raise ValueError(f"adam: gradient shape {g.shape} for parameter {p.data.shape}")
            g = g.astype(np.float64, copy=False)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p.data -= update.astype(p.data.dtype)


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads)))


def clip_by_global_norm(grads, max_norm: float):
    """Scale all gradients down when their joint norm exceeds max_norm."""
    norm = global_norm(grads)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


@dataclass
class TrainLog:
    steps: list = field(default_factory=list)  # (step, loss)
    validations: list = field(default_factory=list)  # (step, epoch, val_loss)
    skipped: list = field(default_factory=list)  # steps skipped on non-finite gradients
    best_val: float | None = None
    best_step: int | None = None

    def lines(self) -> list:
        out = [f"step={s} loss={v:.6f}" for s, v in self.steps]
        out += [f"step={s} epoch={e} val_loss={v:.6f}" for s, e, v in self.validations]
        out += [f"step={s} skipped=non-finite-gradient" for s in self.skipped]
        if self.best_val is not None:
            out.append(f"best_step={self.best_step} best_val_loss={self.best_val:.6f}")
        return out


def evaluate_loss(model, records, batch_size: int) -> float:
    """Mean per-sentence normalized NLL over a whole record list, without gradients."""
    total = 0.0
    count = 0
    with ad.no_grad():
        for lo in range(0, len(records), batch_size):
            chunk = records[lo: lo + batch_size]
            total += batch_loss(model, make_batch(chunk)).item() * len(chunk)
            count += len(chunk)
    return total / count


def train(model, train_records, dev_records, steps: int, batch_size: int,
          learning_rate: float, seed, clip_norm: float = 0.0,
          log_every: int = 50) -> TrainLog:
    """Run up to ``steps`` updates; keep and restore the best-validation parameters.

    Shuffling and batching derive from ``seed`` alone, so equal seeds give
    identical runs. A non-finite loss halts training; a non-finite gradient
    only skips that update and is recorded in the log.
    """
    if not train_records:
        raise ValueError("train: empty corpus")
    rng = np.random.default_rng(seed)
    updatable = [(name, t) for name, t in model.blocks() if name not in model.frozen]
    opt = Adam([t for _, t in updatable], lr=learning_rate)
    log = TrainLog()
    batch_size = min(batch_size, len(train_records))

    def validate(step: int, epoch: int) -> None:
        if not dev_records:
            return
        val = evaluate_loss(model, dev_records, batch_size)
        log.validations.append((step, epoch, val))
        if log.best_val is None or val < log.best_val:
            log.best_val = val
            log.best_step = step
            for (_, t), keep in zip(model.blocks(), best):
                keep[...] = t.data

    best = [t.data.copy() for _, t in model.blocks()]
    step = 0
    epoch = 0
    while step < steps:
        epoch += 1
        order = rng.permutation(len(train_records))
        for lo in range(0, len(order), batch_size):
            if step >= steps:
                break
            chunk = [train_records[i] for i in order[lo: lo + batch_size]]
            loss = batch_loss(model, make_batch(chunk))
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss {value} at step {step + 1}; "
                    "reduce the learning rate or enable clip_norm"
                )
            grads = ad.gradients(loss, [t for _, t in updatable])
            step += 1
            if step == 1 or step % log_every == 0 or step == steps:
                log.steps.append((step, value))
            if not all(np.isfinite(g).all() for g in grads):
                log.skipped.append(step)
                continue
            grads, _ = clip_by_global_norm(grads, clip_norm)
            opt.step(grads)
        validate(step, epoch)
    if log.best_val is not None:
        for (_, t), keep in zip(model.blocks(), best):
            t.data[...] = keep
    return log
