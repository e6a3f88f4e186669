"""Contrastive predictive pretext task.

A window is cut into L contiguous segments; a linear encoder maps each
segment to a D-dim embedding.  A random subset of positions is replaced by a
learned mask embedding, a causal single-layer tanh recurrence plus projection
produces a context vector per position, and at each masked position the
context must identify the true embedding among k distractors via a softmax
over dot products (chance level ln(k+1)).

Distractors come either from other positions of the same sequence or from
sequences of other recordings in the batch.  All gradients are computed
manually, including the paths through the positive and distractor embeddings
back into the encoder, and one optimizer step is taken per batch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .learn import AdamaxState, adamax_step, log_softmax, softmax
from .normalize import WindowTensor
from .util import rng_for


class DistractorMode(enum.Enum):
    SAME_RECORDING = "same"
    CROSS_RECORDING = "cross"

    @classmethod
    def parse(cls, text: str) -> "DistractorMode":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"invalid mode {text!r}: valid values are same|cross") from None


@dataclass(frozen=True)
class CpcConfig:
    """Pretext-task knobs; 20 s windows for same-recording distractors, 2 s
    windows for cross-recording ones."""

    window_len_s: float = 20.0
    seg_len_s: float = 1.0
    embed_dim: int = 16
    mask_rate: float = 0.1
    mask_span: int = 1
    n_distractors: int = 20
    mode: DistractorMode = DistractorMode.SAME_RECORDING
    batch_size: int = 128
    epochs: int = 10
    lr: float = 0.002

    def __post_init__(self):
        ratio = self.window_len_s / self.seg_len_s
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ValueError(
                f"window_len_s={self.window_len_s} not divisible by "
                f"seg_len_s={self.seg_len_s}"
            )
        if self.n_distractors < 1:
            raise ValueError("need at least one distractor")
        if not (0.0 < self.mask_rate <= 1.0):
            raise ValueError(f"mask_rate must be in (0, 1], got {self.mask_rate}")
        if self.mask_span < 1:
            raise ValueError("mask_span must be >= 1")

    @property
    def seq_len(self) -> int:
        return round(self.window_len_s / self.seg_len_s)


@dataclass(frozen=True)
class CpcModel:
    """Linear segment encoder, mask embedding, causal tanh recurrence, projection."""

    w_enc: np.ndarray
    b_enc: np.ndarray
    mask_emb: np.ndarray
    w_in: np.ndarray
    w_rec: np.ndarray
    b_rec: np.ndarray
    w_proj: np.ndarray
    b_proj: np.ndarray

    KEYS = ("w_enc", "b_enc", "mask_emb", "w_in", "w_rec", "b_rec", "w_proj", "b_proj")

    @classmethod
    def init(cls, input_dim: int, embed_dim: int, rng: np.random.Generator) -> "CpcModel":
        d = embed_dim
        return cls(
            w_enc=rng.normal(0.0, 1.0 / np.sqrt(input_dim), (d, input_dim)),
            b_enc=np.zeros(d),
            mask_emb=rng.uniform(-0.01, 0.01, d),
            w_in=rng.normal(0.0, 1.0 / np.sqrt(d), (d, d)),
            w_rec=rng.normal(0.0, 1.0 / np.sqrt(d), (d, d)),
            b_rec=np.zeros(d),
            w_proj=rng.normal(0.0, 1.0 / np.sqrt(d), (d, d)),
            b_proj=np.zeros(d),
        )

    @classmethod
    def zero_init(cls, input_dim: int, embed_dim: int, rng: np.random.Generator | None = None) -> "CpcModel":
        d = embed_dim
        mask = (
            rng.uniform(-0.01, 0.01, d) if rng is not None else np.zeros(d)
        )
        return cls(
            w_enc=np.zeros((d, input_dim)),
            b_enc=np.zeros(d),
            mask_emb=mask,
            w_in=np.zeros((d, d)),
            w_rec=np.zeros((d, d)),
            b_rec=np.zeros(d),
            w_proj=np.zeros((d, d)),
            b_proj=np.zeros(d),
        )

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in self.KEYS}

    @classmethod
    def from_params(cls, params: dict[str, np.ndarray]) -> "CpcModel":
        return cls(**{k: params[k] for k in cls.KEYS})

    @property
    def embed_dim(self) -> int:
        return self.w_enc.shape[0]


@dataclass
class CpcBatch:
    """Segment-feature sequences plus mask and distractor bookkeeping.

    `x` is (B, L, F) raw flattened segments; `distractors[(b, t)]` is a
    (k, 2) array of (sequence, position) references that never point at the
    positive and, in cross-recording mode, never at the anchor's recording.
    """

    x: np.ndarray
    rec_ids: tuple[str, ...]
    masked: tuple[tuple[int, ...], ...]
    distractors: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    mode: DistractorMode = DistractorMode.SAME_RECORDING

    @property
    def n_sequences(self) -> int:
        return self.x.shape[0]

    @property
    def seq_len(self) -> int:
        return self.x.shape[1]


def split_segments(window: WindowTensor, seg_len_s: float, window_len_s: float) -> np.ndarray:
    """Cut a C x S window into L contiguous segments, shape (L, C, S/L)."""
    ratio = window_len_s / seg_len_s
    n_seg = round(ratio)
    if abs(ratio - n_seg) > 1e-9 or n_seg < 1:
        raise ValueError(f"window {window_len_s} s not divisible into {seg_len_s} s segments")
    c, s = window.data.shape
    if s % n_seg != 0:
        raise ValueError(f"{s} samples not divisible into {n_seg} segments")
    return np.swapaxes(window.data.reshape(c, n_seg, s // n_seg), 0, 1).copy()


def select_masks(length: int, rate: float, span: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Random mask positions: anchors drawn at rate/span, spans clipped to L.

    If no anchor is drawn, one uniform anchor is forced so every sequence
    contributes at least one prediction.
    """
    if length < 1:
        raise ValueError("sequence length must be >= 1")
    anchors = np.nonzero(rng.random(length) < rate / span)[0]
    idx: set[int] = set()
    for a in anchors:
        idx.update(range(a, min(a + span, length)))
    if not idx:
        a = int(rng.integers(length))
        idx.update(range(a, min(a + span, length)))
    return tuple(sorted(idx))


def sample_distractors(
    batch: CpcBatch,
    anchor: tuple[int, int],
    k: int,
    mode: DistractorMode,
    rng: np.random.Generator,
) -> np.ndarray:
    """k (sequence, position) references for one anchor, with replacement."""
    b, t = anchor
    length = batch.seq_len
    if mode is DistractorMode.SAME_RECORDING:
        if length < 2:
            raise ValueError("same-recording sampling needs at least 2 positions")
        pos = rng.integers(0, length - 1, size=k)
        pos = pos + (pos >= t)  # skip the anchor position
        return np.column_stack([np.full(k, b), pos])
    anchor_rec = batch.rec_ids[b]
    seq_ok = np.array([rid != anchor_rec for rid in batch.rec_ids])
    candidates = np.nonzero(seq_ok)[0]
    if candidates.size == 0:
        raise ValueError(
            "cross-recording sampling needs a batch with >= 2 distinct recordings"
        )
    seqs = candidates[rng.integers(0, candidates.size, size=k)]
    positions = rng.integers(0, length, size=k)
    return np.column_stack([seqs, positions])


def assemble_batch(
    windows: list[WindowTensor],
    cfg: CpcConfig,
    rng: np.random.Generator,
) -> CpcBatch:
    """Flatten windows into sequences and draw masks and distractors."""
    if not windows:
        raise ValueError("empty batch")
    seqs = []
    for win in windows:
        segs = split_segments(win, cfg.seg_len_s, cfg.window_len_s)
        seqs.append(segs.reshape(segs.shape[0], -1))
    x = np.stack(seqs)
    batch = CpcBatch(
        x=x,
        rec_ids=tuple(w.recording_id for w in windows),
        masked=tuple(
            select_masks(cfg.seq_len, cfg.mask_rate, cfg.mask_span, rng)
            for _ in windows
        ),
        mode=cfg.mode,
    )
    for b, slots in enumerate(batch.masked):
        for t in slots:
            batch.distractors[(b, t)] = sample_distractors(
                batch, (b, t), cfg.n_distractors, cfg.mode, rng
            )
    return batch


def info_nce(
    pred: np.ndarray, pos: np.ndarray, distractors: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Softmax cross-entropy over [pred.pos, pred.d_1, ..., pred.d_k].

    Returns the loss and exact gradients for pred, pos, and each distractor.
    """
    emb = np.vstack([pos[None, :], distractors])
    logits = emb @ pred
    loss = float(-log_softmax(logits)[0])
    dlogits = softmax(logits)
    dlogits[0] -= 1.0
    grads = {
        "pred": dlogits @ emb,
        "pos": dlogits[0] * pred,
        "distractors": dlogits[1:, None] * pred[None, :],
    }
    return loss, grads


def _rnn_forward(model: CpcModel, inp: np.ndarray) -> np.ndarray:
    """Causal recurrence over (B, L, D) inputs; returns hidden states."""
    b, length, d = inp.shape
    h = np.zeros((b, length, d))
    prev = np.zeros((b, d))
    for t in range(length):
        prev = np.tanh(inp[:, t] @ model.w_in.T + prev @ model.w_rec.T + model.b_rec)
        h[:, t] = prev
    return h


def contextualize(seq: np.ndarray, model: CpcModel) -> np.ndarray:
    """Causal contexts for one (L, D) sequence or a (B, L, D) batch.

    The output at position t is a function of inputs at positions <= t only.
    """
    single = seq.ndim == 2
    inp = seq[None, ...] if single else seq
    h = _rnn_forward(model, inp)
    ctx = h @ model.w_proj.T + model.b_proj
    return ctx[0] if single else ctx


def cpc_loss_and_grads(
    model: CpcModel, batch: CpcBatch
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean masked-slot loss and exact gradients for every model parameter.

    Gradients flow through the prediction path (projection, recurrence, mask
    embedding, encoder) and through the positive/distractor embeddings, which
    are encoder outputs of the same batch.
    """
    x = batch.x
    n_batch, length, _ = x.shape
    e = x @ model.w_enc.T + model.b_enc  # true embeddings (B, L, D)

    inp = e.copy()
    for b, slots in enumerate(batch.masked):
        for t in slots:
            inp[b, t] = model.mask_emb
    h = _rnn_forward(model, inp)
    ctx = h @ model.w_proj.T + model.b_proj

    slots = [(b, t) for b, ts in enumerate(batch.masked) for t in ts]
    if not slots:
        raise ValueError("batch has no masked slots")
    inv = 1.0 / len(slots)

    total = 0.0
    d_ctx = np.zeros_like(ctx)
    d_e = np.zeros_like(e)
    for b, t in slots:
        refs = batch.distractors[(b, t)]
        pred = ctx[b, t]
        emb = np.vstack([e[b, t][None, :], e[refs[:, 0], refs[:, 1]]])
        logits = emb @ pred
        total += float(-log_softmax(logits)[0])
        dlogits = softmax(logits)
        dlogits[0] -= 1.0
        dlogits *= inv
        d_ctx[b, t] += dlogits @ emb
        d_e[b, t] += dlogits[0] * pred
        np.add.at(d_e, (refs[:, 0], refs[:, 1]), dlogits[1:, None] * pred[None, :])
    loss = total * inv

    # projection
    g_w_proj = np.einsum("bti,btj->ij", d_ctx, h)
    g_b_proj = d_ctx.sum(axis=(0, 1))
    d_h = d_ctx @ model.w_proj

    # backprop through time
    g_w_in = np.zeros_like(model.w_in)
    g_w_rec = np.zeros_like(model.w_rec)
    g_b_rec = np.zeros_like(model.b_rec)
    d_inp = np.zeros_like(inp)
    carry = np.zeros((n_batch, model.embed_dim))
    for t in range(length - 1, -1, -1):
        da = (d_h[:, t] + carry) * (1.0 - h[:, t] ** 2)
        g_w_in += da.T @ inp[:, t]
        prev_h = h[:, t - 1] if t > 0 else np.zeros_like(da)
        g_w_rec += da.T @ prev_h
        g_b_rec += da.sum(axis=0)
        d_inp[:, t] = da @ model.w_in
        carry = da @ model.w_rec

    # mask embedding vs encoder input split
    g_mask = np.zeros_like(model.mask_emb)
    for b, ts in enumerate(batch.masked):
        for t in ts:
            g_mask += d_inp[b, t]
            d_inp[b, t] = 0.0
    d_e += d_inp

    g_w_enc = np.einsum("btd,btf->df", d_e, x)
    g_b_enc = d_e.sum(axis=(0, 1))

    grads = {
        "w_enc": g_w_enc,
        "b_enc": g_b_enc,
        "mask_emb": g_mask,
        "w_in": g_w_in,
        "w_rec": g_w_rec,
        "b_rec": g_b_rec,
        "w_proj": g_w_proj,
        "b_proj": g_b_proj,
    }
    return loss, grads


def cpc_eval_loss(model: CpcModel, batch: CpcBatch) -> float:
    """Mean masked-slot loss without gradients."""
    e = batch.x @ model.w_enc.T + model.b_enc
    inp = e.copy()
    for b, ts in enumerate(batch.masked):
        for t in ts:
            inp[b, t] = model.mask_emb
    ctx = _rnn_forward(model, inp) @ model.w_proj.T + model.b_proj
    losses = []
    for b, ts in enumerate(batch.masked):
        for t in ts:
            refs = batch.distractors[(b, t)]
            emb = np.vstack([e[b, t][None, :], e[refs[:, 0], refs[:, 1]]])
            losses.append(float(-log_softmax(emb @ ctx[b, t])[0]))
    return float(np.mean(losses))


def cpc_train_step(
    batch: CpcBatch, model: CpcModel, opt_state: AdamaxState
) -> tuple[float, CpcModel, AdamaxState]:
    """One optimization step; a non-finite loss freezes parameters and flags
    collapse instead of raising."""
    loss, grads = cpc_loss_and_grads(model, batch)
    if not np.isfinite(loss):
        return loss, model, replace(opt_state, collapsed=True)
    params, opt_state = adamax_step(model.params(), grads, opt_state)
    if opt_state.collapsed:
        return loss, model, opt_state
    return loss, CpcModel.from_params(params), opt_state


@dataclass
class CpcResult:
    mode: DistractorMode
    seed: int
    best_loss: float
    final_loss: float
    history: list[tuple[int, float, float]]  # (epoch, train loss, test loss)
    collapsed: bool

    @property
    def metric(self) -> float:
        return self.best_loss


def _batch_slices(
    windows: list[WindowTensor], cfg: CpcConfig, rng: np.random.Generator
) -> list[list[WindowTensor]]:
    """Shuffled batch partition; cross-recording batches are merged backwards
    until each holds >= 2 distinct recordings."""
    order = rng.permutation(len(windows))
    shuffled = [windows[i] for i in order]
    chunks = [
        shuffled[i : i + cfg.batch_size]
        for i in range(0, len(shuffled), cfg.batch_size)
    ]
    if cfg.mode is DistractorMode.CROSS_RECORDING:
        merged: list[list[WindowTensor]] = []
        for chunk in chunks:
            if merged and len({w.recording_id for w in chunk}) < 2:
                merged[-1].extend(chunk)
            else:
                merged.append(chunk)
        if merged and len({w.recording_id for w in merged[-1]}) < 2:
            if len(merged) == 1:
                raise ValueError("cross-recording training needs >= 2 recordings")
            merged[-2].extend(merged.pop())
        chunks = merged
    return chunks


def evaluate_cpc(
    model: CpcModel,
    windows: list[WindowTensor],
    cfg: CpcConfig,
    rng: np.random.Generator,
) -> float:
    losses = []
    weights = []
    for chunk in _batch_slices(windows, cfg, rng):
        batch = assemble_batch(chunk, cfg, rng)
        losses.append(cpc_eval_loss(model, batch))
        weights.append(sum(len(ts) for ts in batch.masked))
    return float(np.average(losses, weights=weights))


def train_cpc(
    train_windows: list[WindowTensor],
    test_windows: list[WindowTensor],
    cfg: CpcConfig,
    seed: int,
) -> CpcResult:
    """Train for cfg.epochs, evaluating after each; reports the best epoch."""
    if not train_windows or not test_windows:
        raise ValueError("need non-empty train and test window sets")
    feat_dim = split_segments(train_windows[0], cfg.seg_len_s, cfg.window_len_s)[0].size
    model = CpcModel.init(feat_dim, cfg.embed_dim, rng_for(seed, "cpc-init"))
    opt = AdamaxState.init(model.params(), lr=cfg.lr)

    history: list[tuple[int, float, float]] = []
    for epoch in range(cfg.epochs):
        erng = rng_for(seed, "cpc-epoch", epoch)
        epoch_losses = []
        for chunk in _batch_slices(train_windows, cfg, erng):
            batch = assemble_batch(chunk, cfg, erng)
            loss, model, opt = cpc_train_step(batch, model, opt)
            epoch_losses.append(loss)
            if opt.collapsed:
                break
        if opt.collapsed:
            history.append((epoch, float("nan"), float("nan")))
            break
        test_loss = evaluate_cpc(
            model, test_windows, cfg, rng_for(seed, "cpc-eval", epoch)
        )
        history.append((epoch, float(np.mean(epoch_losses)), test_loss))

    collapsed = opt.collapsed
    finite = [t for _, _, t in history if np.isfinite(t)]
    best = min(finite) if finite and not collapsed else float("nan")
    final = finite[-1] if finite and not collapsed else float("nan")
    return CpcResult(
        mode=cfg.mode,
        seed=seed,
        best_loss=best,
        final_loss=final,
        history=history,
        collapsed=collapsed,
    )
