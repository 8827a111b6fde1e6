"""Sequence-to-sequence usage/goal summarization, implemented from scratch.

An LSTM encoder reads the source tokens; an LSTM decoder generates the
summary, optionally attending over encoder states with additive scoring
(the context vector is concatenated with the decoder state before the
output projection). Training is teacher-forced cross-entropy under Adam
with inverted dropout on non-recurrent connections; gradients are
hand-derived and verified against central finite differences. Checkpoints
are taken on a fixed cadence and the one with the best validation BLEU is
returned.

All math runs in float64; model files store float32 tensors.
"""

from __future__ import annotations

import json
import logging
import struct
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .metrics import corpus_bleu

log = logging.getLogger(__name__)

MODEL_MAGIC = b"CPKS"
MODEL_VERSION = 1

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<s>", "</s>", "<unk>")


class TrainingError(RuntimeError):
    pass


class Vocab:
    """Token table with reserved pad/bos/eos/unk entries."""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[:4]) != RESERVED:
            tokens = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def build(cls, sequences: Iterable[Sequence[str]], min_count: int = 2) -> "Vocab":
        counts: Counter = Counter()
        for seq in sequences:
            counts.update(seq)
        kept = sorted(
            (t for t, n in counts.items() if n >= min_count and t not in RESERVED),
            key=lambda t: (-counts[t], t),
        )
        return cls(list(RESERVED) + kept)

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.index.get(t, UNK) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


@dataclass(frozen=True)
class SummarizerConfig:
    layers: int = 1
    attention: bool = True
    dropout: float = 0.0
    hidden_dim: int = 256
    embed_dim: int = 128
    batch_size: int = 128
    max_iterations: int = 100_000
    lr: float = 0.001
    seed: int = 1
    max_decode_len: int = 12
    checkpoint_every: int = 1000
    min_count: int = 2
    clip_norm: float = 5.0
    init_scale: float = 0.08

    def __post_init__(self):
        if self.layers not in (1, 2):
            raise ValueError("layers must be 1 or 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if min(self.hidden_dim, self.embed_dim, self.batch_size) <= 0:
            raise ValueError("dims must be positive")

    def describe(self) -> str:
        return f"{self.layers}-layer" + ("-att" if self.attention else "")


Params = dict[str, np.ndarray]


def init_params(config: SummarizerConfig, src_size: int, tgt_size: int) -> Params:
    rng = np.random.default_rng(config.seed)
    s = config.init_scale
    H, D = config.hidden_dim, config.embed_dim

    def uniform(*shape):
        return rng.uniform(-s, s, size=shape)

    params: Params = {
        "E_src": uniform(src_size, D),
        "E_tgt": uniform(tgt_size, D),
    }
    for side in ("enc", "dec"):
        for layer in range(config.layers):
            in_dim = D if layer == 0 else H
            params[f"{side}{layer}_Wx"] = uniform(4 * H, in_dim)
            params[f"{side}{layer}_Wh"] = uniform(4 * H, H)
            bias = np.zeros(4 * H)
            bias[H : 2 * H] = 1.0  # forget-gate bias
            params[f"{side}{layer}_b"] = bias
    if config.attention:
        params["att_Wq"] = uniform(H, H)
        params["att_Wk"] = uniform(H, H)
        params["att_v"] = uniform(H)
    out_dim = 2 * H if config.attention else H
    params["W_out"] = uniform(tgt_size, out_dim)
    params["b_out"] = np.zeros(tgt_size)
    return params


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _lstm_forward(xs, mask, Wx, Wh, b, h0, c0):
    """Run one LSTM layer over time-major inputs ``xs`` (T, B, in).

    ``mask`` (T, B) carries the previous state through padded steps so the
    final state equals the state at each sequence's true length.
    """
    T, B, _ = xs.shape
    H = Wh.shape[1]
    hs = np.empty((T, B, H))
    h, c = h0, c0
    caches = []
    for t in range(T):
        z = xs[t] @ Wx.T + h @ Wh.T + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        if mask is not None:
            m = mask[t][:, None]
            h_next = m * h_new + (1.0 - m) * h
            c_next = m * c_new + (1.0 - m) * c
        else:
            h_next, c_next = h_new, c_new
        caches.append((h, c, i, f, g, o, tc))
        h, c = h_next, c_next
        hs[t] = h
    return hs, h, c, caches


def _lstm_backward(xs, mask, Wx, Wh, caches, dhs, dh_final, dc_final):
    T, B, _ = xs.shape
    H = Wh.shape[1]
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * H)
    dxs = np.zeros_like(xs)
    dh = dh_final.copy()
    dc = dc_final.copy()
    for t in range(T - 1, -1, -1):
        dh = dh + dhs[t]
        h_prev, c_prev, i, f, g, o, tc = caches[t]
        if mask is not None:
            m = mask[t][:, None]
            dh_new = m * dh
            dc_new = m * dc
            dh_carry = (1.0 - m) * dh
            dc_carry = (1.0 - m) * dc
        else:
            dh_new, dc_new = dh, dc
            dh_carry = dc_carry = 0.0
        do = dh_new * tc
        dc_total = dc_new + dh_new * o * (1.0 - tc * tc)
        di = dc_total * g
        df = dc_total * c_prev
        dg = dc_total * i
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dWx += dz.T @ xs[t]
        dWh += dz.T @ h_prev
        db += dz.sum(axis=0)
        dxs[t] = dz @ Wx
        dh = dz @ Wh + dh_carry
        dc = dc_total * f + dc_carry
    return dxs, dh, dc, dWx, dWh, db


def _dropout_mask(rng, shape, p: float):
    if p <= 0.0 or rng is None:
        return None
    return (rng.random(shape) >= p) / (1.0 - p)


def _apply(x, mask):
    return x if mask is None else x * mask


def loss_and_grads(
    params: Params,
    config: SummarizerConfig,
    src: np.ndarray,
    src_mask: np.ndarray,
    dec_in: np.ndarray,
    targets: np.ndarray,
    tgt_mask: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[float, Params]:
    """Teacher-forced mean cross-entropy and gradients for one batch.

    ``src``/``dec_in``/``targets`` are time-major id matrices; the masks
    flag real (non-pad) positions. ``dropout_rng`` enables inverted dropout
    on embeddings, inter-layer inputs, and the pre-projection vector.
    """
    H = config.hidden_dim
    T_e, B = src.shape
    T_d = dec_in.shape[0]
    grads: Params = {k: np.zeros_like(v) for k, v in params.items()}
    n_tokens = float(tgt_mask.sum())
    if T_d == 0 or n_tokens == 0.0:
        return 0.0, grads
    p = config.dropout

    # Encoder.
    emb_src = params["E_src"][src]
    m_emb_src = _dropout_mask(dropout_rng, emb_src.shape, p)
    xs = _apply(emb_src, m_emb_src)
    enc_caches = []
    enc_inputs = []
    enc_inter_masks = []
    h_finals, c_finals = [], []
    zero = np.zeros((B, H))
    for layer in range(config.layers):
        if layer > 0:
            m_inter = _dropout_mask(dropout_rng, xs.shape, p)
            enc_inter_masks.append(m_inter)
            xs = _apply(xs, m_inter)
        enc_inputs.append(xs)
        hs, h_fin, c_fin, caches = _lstm_forward(
            xs,
            src_mask,
            params[f"enc{layer}_Wx"],
            params[f"enc{layer}_Wh"],
            params[f"enc{layer}_b"],
            zero,
            zero,
        )
        enc_caches.append(caches)
        h_finals.append(h_fin)
        c_finals.append(c_fin)
        xs = hs
    enc_out = xs  # (T_e, B, H) top layer

    # Decoder LSTM over the whole teacher-forced sequence.
    emb_tgt = params["E_tgt"][dec_in]
    m_emb_tgt = _dropout_mask(dropout_rng, emb_tgt.shape, p)
    ys = _apply(emb_tgt, m_emb_tgt)
    dec_caches = []
    dec_inputs = []
    dec_inter_masks = []
    for layer in range(config.layers):
        if layer > 0:
            m_inter = _dropout_mask(dropout_rng, ys.shape, p)
            dec_inter_masks.append(m_inter)
            ys = _apply(ys, m_inter)
        dec_inputs.append(ys)
        hs, _, _, caches = _lstm_forward(
            ys,
            None,
            params[f"dec{layer}_Wx"],
            params[f"dec{layer}_Wh"],
            params[f"dec{layer}_b"],
            h_finals[layer],
            c_finals[layer],
        )
        dec_caches.append(caches)
        ys = hs
    dec_top = ys  # (T_d, B, H)

    # Attention and output projection.
    if config.attention:
        q_proj = dec_top @ params["att_Wq"].T  # (T_d, B, A)
        k_proj = enc_out @ params["att_Wk"].T  # (T_e, B, A)
        u = np.tanh(q_proj[:, None, :, :] + k_proj[None, :, :, :])  # (T_d, T_e, B, A)
        scores = u @ params["att_v"]  # (T_d, T_e, B)
        scores = scores + (src_mask[None, :, :] - 1.0) * 1e9
        scores -= scores.max(axis=1, keepdims=True)
        alpha = np.exp(scores)
        alpha /= alpha.sum(axis=1, keepdims=True)
        ctx = np.einsum("deb,ebh->dbh", alpha, enc_out)
        out_in = np.concatenate([dec_top, ctx], axis=2)
    else:
        out_in = dec_top
    m_out = _dropout_mask(dropout_rng, out_in.shape, p)
    out_dropped = _apply(out_in, m_out)
    logits = out_dropped @ params["W_out"].T + params["b_out"]  # (T_d, B, V)

    shifted = logits - logits.max(axis=2, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=2, keepdims=True)
    t_idx, b_idx = np.meshgrid(np.arange(T_d), np.arange(B), indexing="ij")
    gold_logprob = np.log(probs[t_idx, b_idx, targets])
    loss = float(-(gold_logprob * tgt_mask).sum() / n_tokens)

    # ----- backward -----
    dlogits = probs.copy()
    dlogits[t_idx, b_idx, targets] -= 1.0
    dlogits *= tgt_mask[:, :, None] / n_tokens
    grads["W_out"] = np.einsum("dbv,dbo->vo", dlogits, out_dropped)
    grads["b_out"] = dlogits.sum(axis=(0, 1))
    dout_in = _apply(dlogits @ params["W_out"], m_out)

    denc_out = np.zeros_like(enc_out)
    if config.attention:
        ddec_top = dout_in[:, :, :H].copy()
        dctx = dout_in[:, :, H:]
        dalpha = np.einsum("dbh,ebh->deb", dctx, enc_out)
        denc_out += np.einsum("deb,dbh->ebh", alpha, dctx)
        dot = (dalpha * alpha).sum(axis=1, keepdims=True)
        dscores = alpha * (dalpha - dot)
        grads["att_v"] = np.einsum("deba,deb->a", u, dscores)
        dpre = dscores[..., None] * params["att_v"] * (1.0 - u * u)
        dq_proj = dpre.sum(axis=1)  # (T_d, B, A)
        dk_proj = dpre.sum(axis=0)  # (T_e, B, A)
        grads["att_Wq"] = np.einsum("dba,dbh->ah", dq_proj, dec_top)
        grads["att_Wk"] = np.einsum("eba,ebh->ah", dk_proj, enc_out)
        ddec_top += dq_proj @ params["att_Wq"]
        denc_out += dk_proj @ params["att_Wk"]
    else:
        ddec_top = dout_in.copy()

    # Decoder layers, top down.
    dh_init = [np.zeros((B, H)) for _ in range(config.layers)]
    dc_init = [np.zeros((B, H)) for _ in range(config.layers)]
    dhs = ddec_top
    for layer in range(config.layers - 1, -1, -1):
        dxs, dh0, dc0, dWx, dWh, db = _lstm_backward(
            dec_inputs[layer],
            None,
            params[f"dec{layer}_Wx"],
            params[f"dec{layer}_Wh"],
            dec_caches[layer],
            dhs,
            np.zeros((B, H)),
            np.zeros((B, H)),
        )
        grads[f"dec{layer}_Wx"] += dWx
        grads[f"dec{layer}_Wh"] += dWh
        grads[f"dec{layer}_b"] += db
        dh_init[layer] = dh0
        dc_init[layer] = dc0
        if layer > 0:
            dhs = _apply(dxs, dec_inter_masks[layer - 1])
        else:
            demb_tgt = _apply(dxs, m_emb_tgt)
            np.add.at(grads["E_tgt"], dec_in, demb_tgt)

    # Encoder layers, top down; the top layer also feeds attention.
    dhs = denc_out
    for layer in range(config.layers - 1, -1, -1):
        dxs, _, _, dWx, dWh, db = _lstm_backward(
            enc_inputs[layer],
            src_mask,
            params[f"enc{layer}_Wx"],
            params[f"enc{layer}_Wh"],
            enc_caches[layer],
            dhs,
            dh_init[layer],
            dc_init[layer],
        )
        grads[f"enc{layer}_Wx"] += dWx
        grads[f"enc{layer}_Wh"] += dWh
        grads[f"enc{layer}_b"] += db
        if layer > 0:
            dhs = _apply(dxs, enc_inter_masks[layer - 1])
        else:
            demb_src = _apply(dxs, m_emb_src)
            np.add.at(grads["E_src"], src, demb_src)

    return loss, grads


def make_batch(
    pairs: Sequence[tuple[list[int], list[int]]]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pad encoded (source_ids, target_ids) pairs into time-major matrices."""
    B = len(pairs)
    T_e = max(len(src) for src, _ in pairs)
    T_d = max(len(tgt) for _, tgt in pairs) + 1  # room for EOS
    src = np.full((T_e, B), PAD, dtype=np.int64)
    src_mask = np.zeros((T_e, B))
    dec_in = np.full((T_d, B), PAD, dtype=np.int64)
    targets = np.full((T_d, B), PAD, dtype=np.int64)
    tgt_mask = np.zeros((T_d, B))
    for j, (s, t) in enumerate(pairs):
        src[: len(s), j] = s
        src_mask[: len(s), j] = 1.0
        dec_in[0, j] = BOS
        dec_in[1 : len(t) + 1, j] = t
        targets[: len(t), j] = t
        targets[len(t), j] = EOS
        tgt_mask[: len(t) + 1, j] = 1.0
    return src, src_mask, dec_in, targets, tgt_mask


class Adam:
    def __init__(self, params: Params, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for key, grad in grads.items():
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            params[key] -= self.lr * (m / correction1) / (
                np.sqrt(v / correction2) + self.eps
            )


def _clip(grads: Params, max_norm: float) -> None:
    if max_norm <= 0:
        return
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


class SummarizerModel:
    def __init__(
        self,
        params: Params,
        src_vocab: Vocab,
        tgt_vocab: Vocab,
        config: SummarizerConfig,
        training_log: list[tuple[int, float, float]] | None = None,
        best_iteration: int = 0,
    ):
        self.params = params
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.config = config
        self.training_log = training_log or []
        self.best_iteration = best_iteration

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<B", MODEL_VERSION))
            for blob in (
                json.dumps(asdict(self.config)).encode("utf-8"),
                json.dumps(self.src_vocab.tokens, ensure_ascii=False).encode("utf-8"),
                json.dumps(self.tgt_vocab.tokens, ensure_ascii=False).encode("utf-8"),
            ):
                fh.write(struct.pack("<I", len(blob)))
                fh.write(blob)
            fh.write(struct.pack("<I", len(self.params)))
            for name in sorted(self.params):
                tensor = self.params[name]
                raw = name.encode("utf-8")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<B", tensor.ndim))
                for dim in tensor.shape:
                    fh.write(struct.pack("<I", dim))
                fh.write(tensor.astype("<f4").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "SummarizerModel":
        with open(path, "rb") as fh:
            if fh.read(4) != MODEL_MAGIC:
                raise ValueError("not a summarizer model file")
            (version,) = struct.unpack("<B", fh.read(1))
            if version != MODEL_VERSION:
                raise ValueError(f"unsupported model version {version}")

            def read_blob():
                (n,) = struct.unpack("<I", fh.read(4))
                return fh.read(n)

            config = SummarizerConfig(**json.loads(read_blob()))
            src_vocab = Vocab(json.loads(read_blob()))
            tgt_vocab = Vocab(json.loads(read_blob()))
            (count,) = struct.unpack("<I", fh.read(4))
            params: Params = {}
            for _ in range(count):
                (name_len,) = struct.unpack("<H", fh.read(2))
                name = fh.read(name_len).decode("utf-8")
                (ndim,) = struct.unpack("<B", fh.read(1))
                shape = tuple(
                    struct.unpack("<I", fh.read(4))[0] for _ in range(ndim)
                )
                size = int(np.prod(shape)) if shape else 1
                data = np.frombuffer(fh.read(size * 4), dtype="<f4")
                params[name] = data.astype(np.float64).reshape(shape)
        return cls(params, src_vocab, tgt_vocab, config)


def _encode_pairs(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    src_vocab: Vocab,
    tgt_vocab: Vocab,
) -> list[tuple[list[int], list[int]]]:
    # Source always ends with EOS so even an empty source has one step.
    return [
        (src_vocab.encode(src) + [EOS], tgt_vocab.encode(tgt)) for src, tgt in pairs
    ]


def _group_references(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]]
) -> list[tuple[tuple[str, ...], list[list[str]]]]:
    grouped: dict[tuple[str, ...], list[list[str]]] = {}
    order: list[tuple[str, ...]] = []
    for src, tgt in pairs:
        key = tuple(src)
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(list(tgt))
    return [(key, grouped[key]) for key in order]


def evaluate_bleu(
    model: "SummarizerModel", pairs: Sequence[tuple[Sequence[str], Sequence[str]]]
) -> float:
    """Corpus BLEU of greedy decodes against reference groups."""
    groups = _group_references(pairs)
    candidates = [summarize(model, list(src)) for src, _ in groups]
    references = [refs for _, refs in groups]
    return corpus_bleu(candidates, references).score


def train(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    val_pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    config: SummarizerConfig,
) -> SummarizerModel:
    """Train and return the checkpoint with the highest validation BLEU.

    A non-finite loss aborts training and returns the best checkpoint seen
    so far. With an empty validation set the final parameters win.
    """
    if not pairs:
        raise ValueError("training set is empty")
    src_vocab = Vocab.build((src for src, _ in pairs), config.min_count)
    tgt_vocab = Vocab.build((tgt for _, tgt in pairs), config.min_count)
    encoded = _encode_pairs(pairs, src_vocab, tgt_vocab)
    params = init_params(config, len(src_vocab), len(tgt_vocab))
    optimizer = Adam(params, config.lr)
    rng = np.random.default_rng(config.seed)

    model = SummarizerModel(params, src_vocab, tgt_vocab, config)
    best_params = {k: v.copy() for k, v in params.items()}
    best_bleu = -1.0
    best_iteration = 0
    training_log: list[tuple[int, float, float]] = []

    def checkpoint(iteration: int, window_loss: float) -> None:
        nonlocal best_params, best_bleu, best_iteration
        if val_pairs:
            bleu = evaluate_bleu(model, val_pairs)
        else:
            bleu = 0.0
        training_log.append((iteration, window_loss, bleu))
        log.info(
            "%s iter=%d loss=%.4f val_bleu=%.4f",
            config.describe(), iteration, window_loss, bleu,
        )
        if not val_pairs or bleu > best_bleu:
            best_bleu = bleu
            best_iteration = iteration
            best_params = {k: v.copy() for k, v in params.items()}

    order = rng.permutation(len(encoded))
    cursor = 0
    window: list[float] = []
    aborted = False
    for iteration in range(1, config.max_iterations + 1):
        if cursor + config.batch_size > len(order):
            order = rng.permutation(len(encoded))
            cursor = 0
        batch_ids = order[cursor : cursor + config.batch_size]
        if len(batch_ids) == 0:
            batch_ids = order
        cursor += config.batch_size
        batch = [encoded[i] for i in batch_ids]
        src, src_mask, dec_in, targets, tgt_mask = make_batch(batch)
        loss, grads = loss_and_grads(
            params, config, src, src_mask, dec_in, targets, tgt_mask,
            dropout_rng=rng if config.dropout > 0 else None,
        )
        if not np.isfinite(loss):
            log.warning("non-finite loss at iteration %d; aborting training", iteration)
            aborted = True
            break
        window.append(loss)
        _clip(grads, config.clip_norm)
        optimizer.step(params, grads)
        if iteration % config.checkpoint_every == 0 or iteration == config.max_iterations:
            checkpoint(iteration, float(np.mean(window)))
            window = []

    if not aborted and not training_log:
        checkpoint(config.max_iterations, float(np.mean(window)) if window else 0.0)
    model.params = best_params
    model.training_log = training_log
    model.best_iteration = best_iteration
    return model


def _decode_step(model, token_id, states, enc_out, src_mask):
    """One greedy step; returns (probs, attention weights, new states)."""
    config = model.config
    params = model.params
    H = config.hidden_dim
    x = params["E_tgt"][np.asarray([token_id])]  # (1, D)
    new_states = []
    for layer in range(config.layers):
        h, c = states[layer]
        z = (
            x @ params[f"dec{layer}_Wx"].T
            + h @ params[f"dec{layer}_Wh"].T
            + params[f"dec{layer}_b"]
        )
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        new_states.append((h, c))
        x = h
    h_top = x  # (1, H)
    attn = None
    if config.attention:
        q = h_top @ params["att_Wq"].T
        k = enc_out @ params["att_Wk"].T  # (T_e, 1, A)
        u = np.tanh(q[None, :, :] + k)
        scores = (u @ params["att_v"])[:, 0]  # (T_e,)
        scores = scores + (src_mask[:, 0] - 1.0) * 1e9
        scores -= scores.max()
        attn = np.exp(scores)
        attn /= attn.sum()
        ctx = (attn[:, None, None] * enc_out).sum(axis=0)
        out_in = np.concatenate([h_top, ctx], axis=1)
    else:
        out_in = h_top
    logits = (out_in @ params["W_out"].T + params["b_out"])[0]
    shifted = logits - logits.max()
    probs = np.exp(shifted)
    probs /= probs.sum()
    return probs, attn, new_states


def decode_with_details(
    model: SummarizerModel, source_tokens: Sequence[str]
) -> list[tuple[int, np.ndarray, np.ndarray | None]]:
    """Greedy decode returning (token_id, probs, attention) per step."""
    config = model.config
    params = model.params
    src_ids = model.src_vocab.encode(source_tokens) + [EOS]
    src = np.asarray(src_ids)[:, None]
    src_mask = np.ones((len(src_ids), 1))
    xs = params["E_src"][src]
    states = []
    zero = np.zeros((1, config.hidden_dim))
    for layer in range(config.layers):
        hs, h_fin, c_fin, _ = _lstm_forward(
            xs,
            src_mask,
            params[f"enc{layer}_Wx"],
            params[f"enc{layer}_Wh"],
            params[f"enc{layer}_b"],
            zero,
            zero,
        )
        states.append((h_fin, c_fin))
        xs = hs
    enc_out = xs

    steps: list[tuple[int, np.ndarray, np.ndarray | None]] = []
    token = BOS
    for _ in range(config.max_decode_len):
        probs, attn, states = _decode_step(model, token, states, enc_out, src_mask)
        token = int(np.argmax(probs))
        steps.append((token, probs, attn))
        if token == EOS:
            break
    return steps


def summarize(model: SummarizerModel, source_tokens: Sequence[str]) -> list[str]:
    """Greedy summary; BOS/EOS excluded, unknowns rendered as "<unk>"."""
    ids = [t for t, _, _ in decode_with_details(model, source_tokens) if t != EOS]
    return model.tgt_vocab.decode(ids)


def write_training_log(path, rows: Sequence[tuple[int, float, float]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,train_loss,val_bleu\n")
        for iteration, loss, bleu in rows:
            fh.write(f"{iteration},{loss:.6f},{bleu:.6f}\n")


def gradient_check(
    attention: bool = True,
    layers: int = 1,
    seed: int = 0,
    h: float = 1e-4,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs a tiny model (hidden 6, vocab ~12) on a fixed 3-pair batch with
    unequal lengths so masking is exercised; dropout is off. The error
    denominator is floored at 1e-6: gradients below float64 finite-difference
    noise are compared absolutely against that floor instead of amplifying
    rounding error into a meaningless ratio.
    """
    config = SummarizerConfig(
        layers=layers,
        attention=attention,
        dropout=0.0,
        hidden_dim=6,
        embed_dim=5,
        batch_size=3,
        seed=seed,
    )
    rng = np.random.default_rng(seed + 1)
    src_size, tgt_size = 12, 11
    params = init_params(config, src_size, tgt_size)
    lengths = [(5, 4), (3, 2), (4, 3)]
    batch = [
        (
            list(rng.integers(4, src_size, size=ls)),
            list(rng.integers(4, tgt_size, size=lt)),
        )
        for ls, lt in lengths
    ]
    src, src_mask, dec_in, targets, tgt_mask = make_batch(batch)

    def loss_only() -> float:
        loss, _ = loss_and_grads(
            params, config, src, src_mask, dec_in, targets, tgt_mask
        )
        return loss

    _, analytic = loss_and_grads(
        params, config, src, src_mask, dec_in, targets, tgt_mask
    )
    worst = 0.0
    for name in sorted(params):
        tensor = params[name]
        grad = analytic[name]
        flat = tensor.reshape(-1)
        grad_flat = grad.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + h
            up = loss_only()
            flat[idx] = original - h
            down = loss_only()
            flat[idx] = original
            numeric = (up - down) / (2.0 * h)
            denom = max(1e-6, abs(numeric) + abs(grad_flat[idx]))
            err = abs(numeric - grad_flat[idx]) / denom
            if err > worst:
                worst = err
    return worst
