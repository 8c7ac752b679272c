"""GPT-style Transformer and GRU language models, training, checkpoints.

Models are ``torch.nn.Module`` subclasses; gradients come from torch's
reverse-mode autodiff and are checked against finite differences in the
test-suite.
"""

from __future__ import annotations

import copy
import io
import math
import struct
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .errors import ContextTooLong, Diverged, LinecompError, ShapeError

ARCHS = ("transformer", "gru")


class DegenerateBatch(UserWarning):
    """A batch without a single real target position."""


# ------------------------------------------------------------------ config


@dataclass
class ModelConfig:
    arch: str = "transformer"
    vocab_size: int = 0
    d_model: int = 128
    d_embed: int = 128
    d_ff: int = 512
    n_heads: int = 4
    n_layers: int = 4
    max_len: int = 1500
    dropout_keep: float = 0.9
    gru_hidden: int = 512
    gru_layers: int = 1
    tie_output_to_embedding: bool = True
    pad_id: int = 0

    def validate(self):
        if self.arch not in ARCHS:
            raise ShapeError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.vocab_size <= 0:
            raise ShapeError("vocab_size must be positive")
        if self.arch == "transformer":
            if self.d_model % self.n_heads:
                raise ShapeError("d_model must be divisible by n_heads")
            if self.d_model % 2:
                raise ShapeError("d_model must be even for sinusoidal positions")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ShapeError("dropout_keep must lie in (0, 1]")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        kw = {}
        for f in fields(cls):
            if f.name in d:
                v = d[f.name]
                if f.type in ("int", int):
                    v = int(v)
                elif f.type in ("float", float):
                    v = float(v)
                elif f.type in ("bool", bool):
                    v = v if isinstance(v, bool) else str(v).lower() == "true"
                kw[f.name] = v
        return cls(**kw)


def transformer_param_count(cfg: ModelConfig) -> int:
    """Closed-form parameter count of the Transformer configuration.

    Embedding V*e; input/output projections when d_embed != d_model; per layer
    two layer norms (4d), fused QKV (3d^2+3d), attention output (d^2+d) and the
    feed-forward pair (2*d*f + f + d); final layer norm 2d; an untied head V*e.
    With the default sizes this is 128*V + 793344.
    """
    V, d, e, f, L = cfg.vocab_size, cfg.d_model, cfg.d_embed, cfg.d_ff, cfg.n_layers
    per_layer = 4 * d + (3 * d * d + 3 * d) + (d * d + d) + (2 * d * f + f + d)
    n = V * e + L * per_layer + 2 * d
    if e != d:
        n += 2 * e * d
    if not cfg.tie_output_to_embedding:
        n += V * e
    return n


# ------------------------------------------------------------------ models


def sinusoidal_pe(max_len: int, d_model: int) -> torch.Tensor:
    if d_model % 2:
        raise ShapeError("d_model must be even")
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    i = np.arange(0, d_model, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, i / d_model)
    table = np.zeros((max_len, d_model))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return torch.from_numpy(table)


class CausalSelfAttention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.qkv = nn.Linear(cfg.d_model, 3 * cfg.d_model)
        self.proj = nn.Linear(cfg.d_model, cfg.d_model)
        self.drop = nn.Dropout(1.0 - cfg.dropout_keep)

    def forward(self, x, key_pad):
        B, T, D = x.shape
        H = self.n_heads
        q, k, v = self.qkv(x).split(D, dim=2)
        q, k, v = (t.view(B, T, H, D // H).transpose(1, 2) for t in (q, k, v))
        scores = q @ k.transpose(-2, -1) / math.sqrt(D // H)
        causal = torch.ones(T, T, dtype=torch.bool, device=x.device).triu(1)
        # A position always sees itself, so rows of padding stay finite.
        self_pos = torch.eye(T, dtype=torch.bool, device=x.device)
        blocked = (causal[None, None] | key_pad[:, None, None, :]) & ~self_pos
        scores = scores.masked_fill(blocked, float("-inf"))
        att = self.drop(torch.softmax(scores, dim=-1))
        y = (att @ v).transpose(1, 2).reshape(B, T, D)
        return self.proj(y)


class Block(nn.Module):
    """Pre-norm residual block: x + Attn(LN(x)), then x + FF(LN(x))."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.attn = CausalSelfAttention(cfg)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.ff1 = nn.Linear(cfg.d_model, cfg.d_ff)
        self.ff2 = nn.Linear(cfg.d_ff, cfg.d_model)
        self.drop = nn.Dropout(1.0 - cfg.dropout_keep)

    def forward(self, x, key_pad):
        x = x + self.drop(self.attn(self.ln1(x), key_pad))
        return x + self.drop(self.ff2(F.gelu(self.ff1(self.ln2(x)))))


class LanguageModel(nn.Module):
    """Shared embedding / output logic for both architectures."""

    cfg: ModelConfig

    def _init_io(self, cfg: ModelConfig, hidden: int):
        self.embed = nn.Embedding(cfg.vocab_size, cfg.d_embed)
        nn.init.normal_(self.embed.weight, std=0.02)
        self.out_proj = nn.Linear(hidden, cfg.d_embed, bias=False) if hidden != cfg.d_embed else None
        self.head = None
        if not cfg.tie_output_to_embedding:
            self.head = nn.Linear(cfg.d_embed, cfg.vocab_size, bias=False)
            nn.init.normal_(self.head.weight, std=0.02)
        self.drop = nn.Dropout(1.0 - cfg.dropout_keep)

    @property
    def output_weight(self) -> torch.Tensor:
        # Tied: the same storage as the input embedding, used transposed.
        return self.embed.weight if self.head is None else self.head.weight

    def _logits(self, h):
        if self.out_proj is not None:
            h = self.out_proj(h)
        return h @ self.output_weight.t()

    def _check(self, ids):
        if ids.dim() != 2:
            raise ShapeError(f"expected (batch, time) indices, got shape {tuple(ids.shape)}")
        if ids.numel() and (int(ids.max()) >= self.cfg.vocab_size or int(ids.min()) < 0):
            raise ShapeError("symbol index outside the vocabulary")

    def log_probs(self, ids: torch.Tensor) -> torch.Tensor:
        return torch.log_softmax(self(ids), dim=-1)


class TransformerLM(LanguageModel):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg.validate()
        self._init_io(cfg, cfg.d_model)
        self.in_proj = nn.Linear(cfg.d_embed, cfg.d_model, bias=False) if cfg.d_embed != cfg.d_model else None
        self.register_buffer("positions", sinusoidal_pe(cfg.max_len, cfg.d_model).float(), persistent=False)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """Next-symbol logits, shape (batch, time, vocab)."""
        self._check(ids)
        T = ids.shape[1]
        if T > self.cfg.max_len:
            raise ContextTooLong(f"sequence length {T} exceeds max_len {self.cfg.max_len}")
        h = self.embed(ids)
        if self.in_proj is not None:
            h = self.in_proj(h)
        h = self.drop(h + self.positions[:T].to(h.dtype))
        key_pad = ids == self.cfg.pad_id
        for blk in self.blocks:
            h = blk(h, key_pad)
        return self._logits(self.ln_f(h))


class GruLM(LanguageModel):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg.validate()
        self._init_io(cfg, cfg.gru_hidden)
        self.gru = nn.GRU(cfg.d_embed, cfg.gru_hidden, num_layers=cfg.gru_layers, batch_first=True)

    def forward(self, ids, h0=None, return_state=False):
        self._check(ids)
        out, h = self.gru(self.drop(self.embed(ids)), h0)
        logits = self._logits(self.drop(out))
        return (logits, h) if return_state else logits


def build_model(cfg: ModelConfig, seed: int | None = None, dtype=torch.float32) -> LanguageModel:
    if seed is not None:
        torch.manual_seed(seed)
    cls = TransformerLM if cfg.arch == "transformer" else GruLM
    model = cls(cfg)
    if cfg.arch == "transformer":
        model.positions = model.positions.to(dtype)
    return model.to(dtype)


# ------------------------------------------------------------------ batches


@dataclass
class Batch:
    inputs: torch.Tensor   # (B, T) symbols, <bos> first, <pad> fill
    targets: torch.Tensor  # (B, T) next symbols, <pad> fill
    mask: torch.Tensor     # (B, T) 1.0 for real targets
    lengths: torch.Tensor  # (B,) number of real targets

    @property
    def n_tokens(self) -> int:
        return int(self.mask.sum())


def make_batch(seqs: Sequence[Sequence[int]], pad_id: int, dtype=torch.float32) -> Batch:
    """Each sequence starts with ``<bos>``; inputs drop the last symbol, targets the first."""
    if not seqs:
        raise ShapeError("empty batch")
    T = max(len(s) for s in seqs) - 1
    if T < 1:
        raise ShapeError("sequences need at least <bos> and one symbol")
    B = len(seqs)
    inputs = torch.full((B, T), pad_id, dtype=torch.long)
    targets = torch.full((B, T), pad_id, dtype=torch.long)
    mask = torch.zeros((B, T), dtype=dtype)
    lengths = torch.zeros(B, dtype=torch.long)
    for b, s in enumerate(seqs):
        n = len(s) - 1
        inputs[b, :n] = torch.as_tensor(s[:-1])
        targets[b, :n] = torch.as_tensor(s[1:])
        mask[b, :n] = 1.0
        lengths[b] = n
    return Batch(inputs, targets, mask, lengths)


# ------------------------------------------------------- forward / loss / grad


def forward(model: LanguageModel, batch: Batch) -> torch.Tensor:
    """Per-position next-symbol log-probabilities, shape (B, T, V)."""
    return model.log_probs(batch.inputs)


def loss_terms(log_probs: torch.Tensor, batch: Batch) -> tuple[torch.Tensor, int]:
    """Summed negative log-likelihood over real targets, and their count."""
    if log_probs.shape[:2] != batch.targets.shape:
        raise ShapeError("log-prob and target shapes disagree")
    nll = -log_probs.gather(-1, batch.targets.unsqueeze(-1)).squeeze(-1)
    return (nll * batch.mask.to(nll.dtype)).sum(), batch.n_tokens


def loss(log_probs: torch.Tensor, batch: Batch) -> torch.Tensor:
    """Mean negative log-likelihood per real target token."""
    total, n = loss_terms(log_probs, batch)
    if n == 0:
        warnings.warn("batch has no real target positions", DegenerateBatch, stacklevel=2)
        return total * 0.0
    return total / n


def backward(model: LanguageModel, batch: Batch) -> dict[str, torch.Tensor]:
    """Gradients of the mean loss w.r.t. every named parameter."""
    model.zero_grad(set_to_none=True)
    value = loss(forward(model, batch), batch)
    params = dict(model.named_parameters())
    grads = torch.autograd.grad(value, list(params.values()), allow_unused=True)
    return {
        name: (g if g is not None else torch.zeros_like(p))
        for (name, p), g in zip(params.items(), grads)
    }


def sequence_log_prob(model: LanguageModel, prefix: Sequence[int], continuation: Sequence[int],
                      mask_fn: Callable | None = None) -> float:
    """Teacher-forced log-probability of ``continuation`` after ``prefix``.

    ``mask_fn(step, symbols_so_far)`` may return a boolean mask of allowed
    symbols; the distribution is then renormalized over the allowed set.
    """
    seq = list(prefix) + list(continuation)
    with torch.no_grad():
        logits = model(torch.tensor([seq[:-1]]))[0]
    total = 0.0
    for j, sym in enumerate(continuation):
        row = logits[len(prefix) - 1 + j]
        if mask_fn is not None:
            row = row.masked_fill(~mask_fn(j, list(continuation[:j])), float("-inf"))
        total += float(torch.log_softmax(row, dim=-1)[sym])
    return total


# ------------------------------------------------------------ incremental use


class Scorer:
    """Next-symbol log-probabilities for beam hypotheses sharing one context.

    The Transformer recomputes the full prefix each step (the reference,
    non-cached semantics); the GRU carries its hidden state.
    """

    def __init__(self, model: LanguageModel, context: Sequence[int]):
        self.model = model
        self.context = list(context)
        if not self.context:
            raise ShapeError("context must contain at least <bos>")
        model.eval()
        self.gru = isinstance(model, GruLM)

    @torch.no_grad()
    def initial(self):
        if self.gru:
            logits, h = self.model(torch.tensor([self.context]), return_state=True)
            return (h, torch.log_softmax(logits[0, -1], dim=-1))
        return ()

    @torch.no_grad()
    def log_probs(self, states: list) -> torch.Tensor:
        if self.gru:
            return torch.stack([s[1] for s in states])
        ids = torch.tensor([self.context + list(s) for s in states])
        if ids.shape[1] > self.model.cfg.max_len:
            raise ContextTooLong(f"hypothesis length {ids.shape[1]} exceeds max_len")
        return torch.log_softmax(self.model(ids)[:, -1], dim=-1)

    @torch.no_grad()
    def extend(self, states: list, symbols: list[int]) -> list:
        if not states:
            return []
        if self.gru:
            h = torch.cat([s[0] for s in states], dim=1)
            logits, h = self.model(torch.tensor(symbols)[:, None], h0=h, return_state=True)
            lp = torch.log_softmax(logits[:, -1], dim=-1)
            return [(h[:, i:i + 1].contiguous(), lp[i]) for i in range(len(states))]
        return [tuple(s) + (sym,) for s, sym in zip(states, symbols)]


# ------------------------------------------------------------------ training


@dataclass
class TrainConfig:
    lr: float = 2.5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 1.0
    batch_size: int | None = None  # default: 4 Transformer, 8 GRU
    epochs: int = 10
    patience: int = 3
    seed: int = 0
    stop_below: float | None = None  # stop once an epoch's training loss is below this

    def resolved_batch_size(self, arch: str) -> int:
        if self.batch_size:
            return self.batch_size
        return 4 if arch == "transformer" else 8

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_valid: float = float("inf")
    seconds: float = 0.0
    stopped_early: bool = False

    @property
    def final_train_loss(self) -> float:
        return self.epochs[-1]["train_loss"] if self.epochs else float("nan")


def evaluate_loss(model: LanguageModel, seqs, batch_size: int = 8) -> float:
    """Mean per-token NLL over a dataset, dropout off."""
    was_training = model.training
    model.eval()
    total, count = 0.0, 0
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        for i in range(0, len(seqs), batch_size):
            b = make_batch(seqs[i:i + batch_size], model.cfg.pad_id, dtype)
            s, n = loss_terms(forward(model, b), b)
            total += float(s)
            count += n
    model.train(was_training)
    return total / count if count else 0.0


def train(train_seqs: Sequence[Sequence[int]], model_cfg: ModelConfig, train_cfg: TrainConfig,
          valid_seqs: Sequence[Sequence[int]] | None = None, *,
          callback: Callable[[dict], None] | None = None,
          dtype=torch.float32) -> tuple[LanguageModel, TrainLog]:
    """Adam with gradient-norm clipping and early stopping on validation loss.

    Returns the model restored to the epoch with the best validation loss
    (or the last epoch when no validation data is given).
    """
    longest = max((len(s) - 1 for s in train_seqs), default=0)
    if longest > model_cfg.max_len:
        raise ShapeError(f"training sequence of length {longest} exceeds max_len; filter at prep")
    if not train_seqs:
        raise ShapeError("no training sequences")
    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    model = build_model(model_cfg, dtype=dtype)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.lr,
                           betas=(train_cfg.beta1, train_cfg.beta2), eps=train_cfg.eps)
    bs = train_cfg.resolved_batch_size(model_cfg.arch)
    log = TrainLog()
    best_state = None
    bad = 0
    t0 = time.perf_counter()
    for epoch in range(train_cfg.epochs):
        model.train()
        order = rng.permutation(len(train_seqs))
        total, count = 0.0, 0
        for i in range(0, len(order), bs):
            b = make_batch([train_seqs[j] for j in order[i:i + bs]], model_cfg.pad_id, dtype)
            opt.zero_grad(set_to_none=True)
            s, n = loss_terms(forward(model, b), b)
            value = s / max(n, 1)
            if not torch.isfinite(value):
                raise Diverged(f"non-finite loss at epoch {epoch}")
            value.backward()
            if train_cfg.clip:
                nn.utils.clip_grad_norm_(model.parameters(), train_cfg.clip)
            opt.step()
            total += float(s.detach())
            count += n
        entry = {"epoch": epoch, "train_loss": total / max(count, 1), "train_sum": total,
                 "train_tokens": count}
        if valid_seqs:
            v = evaluate_loss(model, valid_seqs, bs)
            if not math.isfinite(v):
                raise Diverged(f"non-finite validation loss at epoch {epoch}")
            entry["valid_loss"] = v
            if v < log.best_valid:
                log.best_valid, log.best_epoch, bad = v, epoch, 0
                best_state = copy.deepcopy(model.state_dict())
            else:
                bad += 1
        else:
            log.best_epoch = epoch
        log.epochs.append(entry)
        if callback:
            callback(entry)
        if valid_seqs and train_cfg.patience and bad >= train_cfg.patience:
            log.stopped_early = True
            break
        if train_cfg.stop_below is not None and entry["train_loss"] < train_cfg.stop_below:
            break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    log.seconds = time.perf_counter() - t0
    return model, log


# --------------------------------------------------------------- checkpoints

MAGIC = b"LCMP"
FORMAT_VERSION = 1


def _config_text(model_cfg: ModelConfig, extra: dict | None) -> str:
    items = {f"model.{k}": v for k, v in model_cfg.to_dict().items()}
    for k, v in (extra or {}).items():
        items[k] = v
    lines = []
    for k in sorted(items):
        v = items[k]
        text = str(v).lower() if isinstance(v, bool) else str(v)
        if "\n" in text or "=" in k:
            raise ValueError(f"config entry {k!r} cannot be serialized on one line")
        lines.append(f"{k}={text}")
    return "\n".join(lines) + "\n"


def checkpoint_bytes(model: LanguageModel, extra: dict | None = None) -> bytes:
    buf = io.BytesIO()
    text = _config_text(model.cfg, extra).encode("utf-8")
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<I", len(text)))
    buf.write(text)
    for name, tensor in model.state_dict().items():
        raw = name.encode("utf-8")
        arr = tensor.detach().cpu().to(torch.float32).numpy().astype("<f4", copy=False)
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr).tobytes())
    return buf.getvalue()


def save_checkpoint(path, model: LanguageModel, extra: dict | None = None):
    Path(path).write_bytes(checkpoint_bytes(model, extra))


def load_checkpoint(path) -> tuple[LanguageModel, dict]:
    """Return the model (float32, eval mode) and the full key=value config."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise LinecompError(f"{path}: not a linecomp checkpoint")
    version, n = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise LinecompError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    text = data[pos:pos + n].decode("utf-8")
    pos += n
    config = dict(line.split("=", 1) for line in text.splitlines() if line)
    model_cfg = ModelConfig.from_dict(
        {k[len("model."):]: v for k, v in config.items() if k.startswith("model.")}
    )
    state = {}
    while pos < len(data):
        (ln,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + ln].decode("utf-8")
        pos += ln
        (rank,) = struct.unpack_from("<I", data, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(dims)
        pos += 4 * count
        state[name] = torch.from_numpy(arr.astype(np.float32))
    model = build_model(model_cfg)
    expected = set(model.state_dict())
    if set(state) != expected:
        raise ShapeError(f"checkpoint tensors {sorted(set(state) ^ expected)} do not match the config")
    model.load_state_dict(state)
    model.eval()
    return model, config


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
