"""Acoustic-to-phoneme and phoneme-to-word feature extractors, fusion systems,
and staged training.

Data flow for one document::

    frames --A2P--> DAFs (all frames) --drop greedy-blank frames--> DAFs [T']
           --P2W--> DLFs [T'] (every frame kept, so the two stay aligned)
           --attention fusion + layer norm--> topic head --> log P(topic)
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import ctc
from .attention import MultiHeadAttention, attention_mask, fuse_add, fuse_concat
from .checkpoint import Checkpoint, CheckpointError, load_module, module_tensors
from .config import ModelConfig
from .numerics import ops
from .numerics.module import LayerNorm, Linear, Module
from .numerics.optim import AdamState, adam_step, clip_grad_norm
from .numerics.tensor import ContractError, ShapeError, Tensor, no_grad, parameters_checksum
from .recurrent import BiLstm
from .synthcorpus import SpokenDocument

log = logging.getLogger(__name__)


class EmptyDocumentError(ValueError):
    """Every frame of a document was greedily decoded as blank."""


class MissingPrerequisiteError(RuntimeError):
    pass


class Variant(str, enum.Enum):
    DAFS_ONLY = "dafs"
    DLFS_ONLY = "dlfs"
    CONC_FUSION = "conc"
    GMHA_ADD = "gmha_add"
    GMHA_CAT = "gmha_cat"
    LMHA_ADD = "lmha_add"
    LMHA_CAT = "lmha_cat"

    @classmethod
    def parse(cls, value) -> Variant:
        if isinstance(value, Variant):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            try:
                return cls[str(value).upper()]
            except KeyError:
                names = ", ".join(v.value for v in cls)
                raise ValueError(f"unknown variant {value!r}; expected one of {names}") from None

    @property
    def uses_attention(self) -> bool:
        return self.value.startswith(("gmha", "lmha"))

    @property
    def local(self) -> bool:
        return self.value.startswith("lmha")

    @property
    def concat(self) -> bool:
        return self.value.endswith("_cat")


class Stage(str, enum.Enum):
    A2P = "a2p"
    P2W = "p2w"
    FUSION = "fusion"


_STAGE_STREAM = {Stage.A2P: 1, Stage.P2W: 2, Stage.FUSION: 3}


@dataclass
class FeaturePair:
    daf: np.ndarray
    dlf: np.ndarray
    pad_mask: np.ndarray

    def __post_init__(self):
        if self.daf.shape[0] != self.dlf.shape[0] or self.daf.shape[0] != self.pad_mask.shape[0]:
            raise ShapeError(
                f"FeaturePair: lengths differ (daf {self.daf.shape[0]}, dlf {self.dlf.shape[0]}, "
                f"mask {self.pad_mask.shape[0]})")

    @property
    def length(self) -> int:
        return int(self.pad_mask.sum())


def pad_or_truncate(pair: FeaturePair, n: int) -> FeaturePair:
    """Zero-pad both sequences to ``n`` frames, or keep only the first ``n``."""
    if n < 1:
        raise ContractError(f"pad_or_truncate: n must be >= 1, got {n}")
    t = pair.daf.shape[0]
    if t >= n:
        return FeaturePair(pair.daf[:n], pair.dlf[:n], pair.pad_mask[:n])
    extra = n - t

    def pad(a):
        return np.concatenate([a, np.zeros((extra, a.shape[1]))], axis=0)

    return FeaturePair(pad(pair.daf), pad(pair.dlf),
                       np.concatenate([pair.pad_mask, np.zeros(extra, dtype=bool)]))


def pad_batch(seqs: Sequence[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    lengths = [s.shape[0] for s in seqs]
    out = np.zeros((len(seqs), max(lengths), seqs[0].shape[1]))
    for i, s in enumerate(seqs):
        out[i, :s.shape[0]] = s
    return out, lengths


def _mask_from_lengths(lengths: Sequence[int], t: int) -> np.ndarray:
    return np.arange(t)[None, :] < np.asarray(lengths)[:, None]


# --- feature extractors ----------------------------------------------------

class A2P(Module):
    """Linear input projection, stacked biLSTM, linear phoneme classifier."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.proj = Linear(config.d_feat, config.input_proj_dim, rng)
        self.encoder = BiLstm(config.input_proj_dim, config.a2p_hidden, config.a2p_layers, rng)
        self.classifier = Linear(self.encoder.output_dim, config.phoneme_classes, rng)
        self.d_feat = config.d_feat
        self.dropout = config.a2p_dropout

    def __call__(self, frames: Tensor, lengths=None, training=False, rng=None) -> tuple[Tensor, Tensor]:
        if frames.shape[-1] != self.d_feat:
            raise ShapeError(f"A2P: feature dim {frames.shape[-1]} != d_feat {self.d_feat}")
        daf = self.encoder(self.proj(frames), lengths, self.dropout, training, rng)
        return daf, self.classifier(daf)


class P2W(Module):
    """Stacked biLSTM over DAFs, linear word classifier."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.encoder = BiLstm(config.d_daf, config.p2w_hidden, config.p2w_layers, rng)
        self.classifier = Linear(self.encoder.output_dim, config.word_classes, rng)
        self.dropout = config.p2w_dropout

    def __call__(self, daf: Tensor, lengths=None, training=False, rng=None) -> tuple[Tensor, Tensor]:
        dlf = self.encoder(daf, lengths, self.dropout, training, rng)
        return dlf, self.classifier(dlf)


def a2p_forward(model: A2P, frames: np.ndarray) -> tuple[Tensor, Tensor]:
    """Inference-mode A2P on one ``[T_raw, d_feat]`` document."""
    with no_grad():
        return model(Tensor(frames))


def extract_daf_filtered(model: A2P, frames: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """DAFs of the frames whose greedy phoneme decision is not blank, in order."""
    daf_full, logits = a2p_forward(model, frames)
    return _filter_blank(daf_full.data, logits.data)


def _filter_blank(daf_full: np.ndarray, logits: np.ndarray) -> tuple[np.ndarray, list[int]]:
    ids = ctc.per_frame_argmax(logits)
    kept = [t for t, s in enumerate(ids) if s != ctc.BLANK]
    if not kept:
        raise EmptyDocumentError("every frame was decoded as blank; no DAFs remain")
    return daf_full[kept], kept


def p2w_forward(model: P2W, daf: np.ndarray) -> tuple[Tensor, Tensor]:
    """Inference-mode P2W; the DLF sequence keeps every input frame."""
    if daf.shape[0] == 0:
        raise ContractError("p2w_forward: empty DAF sequence")
    with no_grad():
        return model(Tensor(daf))


def batched_daf(model: A2P, docs: Sequence[SpokenDocument], batch_size: int = 32):
    """Filtered DAFs for many documents; an all-blank document yields ``None``."""
    out: list[tuple[np.ndarray, list[int]] | None] = []
    with no_grad():
        for start in range(0, len(docs), batch_size):
            chunk = docs[start:start + batch_size]
            frames, lengths = pad_batch([d.frames for d in chunk])
            daf_full, logits = model(Tensor(frames), lengths)
            for i, n in enumerate(lengths):
                try:
                    out.append(_filter_blank(daf_full.data[i, :n], logits.data[i, :n]))
                except EmptyDocumentError:
                    out.append(None)
    return out


def batched_dlf(model: P2W, dafs: Sequence[np.ndarray], batch_size: int = 32) -> list[np.ndarray]:
    out = []
    with no_grad():
        for start in range(0, len(dafs), batch_size):
            chunk = dafs[start:start + batch_size]
            x, lengths = pad_batch(chunk)
            dlf, _ = model(Tensor(x), lengths)
            out.extend(dlf.data[i, :n].copy() for i, n in enumerate(lengths))
    return out


def extract_features(a2p: A2P, p2w: P2W, docs: Sequence[SpokenDocument],
                     batch_size: int = 32) -> list[FeaturePair | None]:
    """Aligned (DAF, DLF) pairs; ``None`` marks a document with no non-blank frame."""
    filtered = batched_daf(a2p, docs, batch_size)
    present = [f[0] for f in filtered if f is not None]
    dlfs = iter(batched_dlf(p2w, present, batch_size)) if present else iter(())
    pairs: list[FeaturePair | None] = []
    for f in filtered:
        if f is None:
            pairs.append(None)
            continue
        daf = f[0]
        pairs.append(FeaturePair(daf, next(dlfs), np.ones(daf.shape[0], dtype=bool)))
    skipped = sum(p is None for p in pairs)
    if skipped:
        log.warning("%d of %d documents produced no non-blank frames", skipped, len(pairs))
    return pairs


# --- topic classification systems ------------------------------------------

class TopicHead(Module):
    """1-layer biLSTM, max over real time steps, hidden FC (ReLU), output layer."""

    def __init__(self, d_in: int, config: ModelConfig, rng: np.random.Generator):
        self.encoder = BiLstm(d_in, config.head_hidden, 1, rng)
        self.fc = Linear(self.encoder.output_dim, config.head_fc_dim, rng)
        self.out = Linear(config.head_fc_dim, config.num_topics, rng)
        self.d_in = d_in
        self.dropout = config.head_dropout

    def logits(self, seq: Tensor, pad_mask: np.ndarray, training=False, rng=None) -> Tensor:
        lengths = pad_mask.sum(axis=-1).tolist()
        hidden = self.encoder(seq, lengths, self.dropout, training, rng)
        pooled = ops.masked_max(hidden, pad_mask)
        return self.out(ops.relu(self.fc(pooled)))

    def __call__(self, seq: Tensor, pad_mask: np.ndarray, training=False, rng=None) -> Tensor:
        return ops.log_softmax(self.logits(seq, pad_mask, training, rng))


def topic_head_forward(head: TopicHead, seq: Tensor, pad_mask: np.ndarray) -> Tensor:
    """Topic log-probabilities for one ``[n, d]`` sequence (inference mode)."""
    pad_mask = np.asarray(pad_mask, dtype=bool)
    if not pad_mask.any():
        raise ContractError("topic_head_forward: pad_mask has no real frames")
    squeeze = seq.ndim == 2
    if squeeze:
        seq = ops.reshape(seq, (1,) + seq.shape)
        pad_mask = pad_mask[None]
    out = head(seq, pad_mask)
    return ops.reshape(out, out.shape[1:]) if squeeze else out


class TopicSystem(Module):
    """One of the seven contrastive systems; see :func:`build_system`."""

    def __init__(self, variant: Variant, config: ModelConfig, rng: np.random.Generator):
        self.variant = variant
        self.window = config.window if variant.local else None
        self.dropout = config.head_dropout
        d_daf, d_dlf = config.d_daf, config.d_dlf
        if variant is Variant.DAFS_ONLY:
            self.head = TopicHead(d_daf, config, rng)
        elif variant is Variant.DLFS_ONLY:
            self.head = TopicHead(d_dlf, config, rng)
        elif variant is Variant.CONC_FUSION:
            self.daf_encoder = BiLstm(d_daf, config.head_hidden, 1, rng)
            self.dlf_encoder = BiLstm(d_dlf, config.head_hidden, 1, rng)
            self.classifier = Linear(2 * 2 * config.head_hidden, config.num_topics, rng)
        else:
            if d_daf != d_dlf:
                raise ShapeError(f"attention fusion needs d_daf == d_dlf, got {d_daf}, {d_dlf}")
            self.attention = MultiHeadAttention(d_daf, config.num_heads, rng)
            fused = 2 * d_daf if variant.concat else d_daf
            self.norm = LayerNorm(fused, config.layernorm_eps)
            self.head = TopicHead(fused, config, rng)

    @property
    def head_input_dim(self) -> int:
        if self.variant is Variant.CONC_FUSION:
            return self.classifier.weight.shape[0]
        return self.head.d_in

    def learning_rates(self, config: ModelConfig) -> dict[str, float]:
        """Attention and its layer norm use ``lr_attention``; everything else ``lr_head``."""
        return {name: (config.lr_attention if name.startswith(("attention.", "norm.")) else config.lr_head)
                for name in self.parameters()}

    def fuse(self, daf: Tensor, dlf: Tensor, pad_mask: np.ndarray) -> Tensor:
        t = daf.shape[1]
        mask = attention_mask(t, t, self.window, query_valid=pad_mask, key_valid=pad_mask)
        attended = self.attention(daf, dlf, mask)
        fused = fuse_concat(daf, attended) if self.variant.concat else fuse_add(daf, attended)
        return self.norm(fused)

    def logits(self, daf: Tensor, dlf: Tensor, pad_mask: np.ndarray, training=False, rng=None) -> Tensor:
        v = self.variant
        if v is Variant.DAFS_ONLY:
            return self.head.logits(daf, pad_mask, training, rng)
        if v is Variant.DLFS_ONLY:
            return self.head.logits(dlf, pad_mask, training, rng)
        if v is Variant.CONC_FUSION:
            lengths = pad_mask.sum(axis=-1).tolist()
            pooled = [ops.masked_max(enc(x, lengths, self.dropout, training, rng), pad_mask)
                      for enc, x in ((self.daf_encoder, daf), (self.dlf_encoder, dlf))]
            return self.classifier(ops.concat(pooled, axis=-1))
        return self.head.logits(self.fuse(daf, dlf, pad_mask), pad_mask, training, rng)

    def __call__(self, daf: Tensor, dlf: Tensor, pad_mask: np.ndarray, training=False, rng=None) -> Tensor:
        return ops.log_softmax(self.logits(daf, dlf, pad_mask, training, rng))


def build_system(variant, config: ModelConfig, rng: np.random.Generator | None = None) -> TopicSystem:
    variant = Variant.parse(variant)
    if rng is None:
        rng = np.random.default_rng([config.seed, _STAGE_STREAM[Stage.FUSION]])
    return TopicSystem(variant, config, rng)


def collate(pairs: Sequence[FeaturePair], max_len: int) -> tuple[Tensor, Tensor, np.ndarray]:
    """Pad/truncate to ``max_len``, then drop trailing columns that are padding in every row.

    Real outputs do not depend on padded frames (they are masked from
    attention keys and pooling, and the reverse LSTM runs within each
    length), so trimming only saves work.
    """
    fixed = [pad_or_truncate(p, max_len) for p in pairs]
    t = max(p.length for p in fixed)
    daf = np.stack([p.daf[:t] for p in fixed])
    dlf = np.stack([p.dlf[:t] for p in fixed])
    mask = np.stack([p.pad_mask[:t] for p in fixed])
    return Tensor(daf), Tensor(dlf), mask


def decide_topic(log_probs) -> int | list[int]:
    """Argmax over the last axis; ties go to the smallest topic id."""
    arr = np.asarray(log_probs)
    ids = np.argmax(arr, axis=-1)
    return int(ids) if arr.ndim == 1 else [int(k) for k in ids]


def predict(system: TopicSystem, pairs: Sequence[FeaturePair], config: ModelConfig,
            batch_size: int = 64) -> list[int]:
    """Most likely topic per pair; ties go to the smallest topic id."""
    preds: list[int] = []
    with no_grad():
        for start in range(0, len(pairs), batch_size):
            daf, dlf, mask = collate(pairs[start:start + batch_size], config.max_len)
            logp = system(daf, dlf, mask)
            preds.extend(decide_topic(logp.data))
    return preds


@dataclass
class TopicClassifier:
    """The three trained stages bundled for inference."""

    config: ModelConfig
    a2p: A2P
    p2w: P2W
    system: TopicSystem

    def topic_log_probs(self, doc: SpokenDocument) -> np.ndarray:
        daf, _ = extract_daf_filtered(self.a2p, doc.frames)
        dlf, _ = p2w_forward(self.p2w, daf)
        daf_t, dlf_t, mask = collate([FeaturePair(daf, dlf.data, np.ones(daf.shape[0], dtype=bool))],
                                     self.config.max_len)
        with no_grad():
            return self.system(daf_t, dlf_t, mask).data[0]

    def classify_document(self, doc: SpokenDocument) -> int:
        return decide_topic(self.topic_log_probs(doc))


def classify_document(doc: SpokenDocument, classifier: TopicClassifier) -> int:
    return classifier.classify_document(doc)


# --- training --------------------------------------------------------------

def _stage_rng(config: ModelConfig, stage: Stage, epoch: int | None = None) -> np.random.Generator:
    key = [config.seed, _STAGE_STREAM[stage]] + ([] if epoch is None else [epoch])
    return np.random.default_rng(key)


def _adam_from_checkpoint(ckpt: Checkpoint, params, alpha: float) -> AdamState:
    state = AdamState(alpha=alpha, t=int(ckpt.meta.get("adam_t", 0)))
    for name in params:
        if f"adam.m.{name}" in ckpt.tensors:
            state.m[name] = ckpt.tensors[f"adam.m.{name}"].copy()
            state.v[name] = ckpt.tensors[f"adam.v.{name}"].copy()
    return state


def _make_checkpoint(stage: Stage, model: Module, state: AdamState, config: ModelConfig, meta: dict) -> Checkpoint:
    tensors = module_tensors(model)
    for name in model.parameters():
        if name in state.m:
            tensors[f"adam.m.{name}"] = state.m[name].copy()
            tensors[f"adam.v.{name}"] = state.v[name].copy()
    meta = dict(meta, adam_t=state.t, seed=config.seed)
    return Checkpoint(stage=stage.value, config=config.to_dict(), tensors=tensors, meta=meta)


def load_a2p(ckpt: Checkpoint, config: ModelConfig) -> A2P:
    _expect_stage(ckpt, Stage.A2P)
    model = A2P(config, _stage_rng(config, Stage.A2P))
    load_module(model, ckpt)
    return model


def load_p2w(ckpt: Checkpoint, config: ModelConfig) -> P2W:
    _expect_stage(ckpt, Stage.P2W)
    model = P2W(config, _stage_rng(config, Stage.P2W))
    load_module(model, ckpt)
    return model


def load_system(ckpt: Checkpoint, config: ModelConfig) -> TopicSystem:
    _expect_stage(ckpt, Stage.FUSION)
    system = build_system(ckpt.meta["variant"], config)
    load_module(system, ckpt)
    return system


def _expect_stage(ckpt: Checkpoint, stage: Stage) -> None:
    if ckpt.stage != stage.value:
        raise CheckpointError(f"expected a {stage.value} checkpoint, got {ckpt.stage!r}")


def _run_epochs(stage: Stage, model: Module, config: ModelConfig, n_items: int, epochs: int,
                lr: float, batch_loss: Callable[[Sequence[int], np.random.Generator], Tensor],
                resume: Checkpoint | None, lrs: dict[str, float] | None = None,
                on_epoch: Callable[[int, float], dict] | None = None) -> Checkpoint:
    params = model.parameters()
    history: list[float] = []
    extra_history: list[dict] = []
    start = 0
    if resume is not None:
        _expect_stage(resume, stage)
        load_module(model, resume)
        state = _adam_from_checkpoint(resume, params, lr)
        start = int(resume.meta["epoch"])
        history = list(resume.meta.get("loss_history", []))
        extra_history = list(resume.meta.get("epoch_metrics", []))
    else:
        state = AdamState(alpha=lr)
    for epoch in range(start, epochs):
        rng = _stage_rng(config, stage, epoch)
        order = rng.permutation(n_items)
        total, batches = 0.0, 0
        for b in range(0, n_items, config.batch_size):
            model.zero_grad()
            loss = batch_loss(order[b:b + config.batch_size].tolist(), rng)
            loss.backward()
            clip_grad_norm(params, config.clip_norm)
            adam_step(params, state, lrs)
            total += loss.item()
            batches += 1
        history.append(total / max(batches, 1))
        info = on_epoch(epoch, history[-1]) if on_epoch else {}
        extra_history.append(info)
        log.info("%s epoch %d loss %.6f %s", stage.value, epoch + 1, history[-1],
                 " ".join(f"{k}={v:.4f}" for k, v in info.items()))
    meta = {"epoch": max(epochs, start), "loss": history[-1] if history else None,
            "loss_history": history, "epoch_metrics": extra_history}
    return _make_checkpoint(stage, model, state, config, meta)


def train_a2p(docs: Sequence[SpokenDocument], config: ModelConfig, resume: Checkpoint | None = None,
              epochs: int | None = None) -> Checkpoint:
    model = A2P(config, _stage_rng(config, Stage.A2P))

    def batch_loss(idx, rng):
        frames, lengths = pad_batch([docs[i].frames for i in idx])
        _, logits = model(Tensor(frames), lengths, training=True, rng=rng)
        return ctc.ctc_loss_batch(logits, lengths, [docs[i].phoneme_labels for i in idx])

    return _run_epochs(Stage.A2P, model, config, len(docs), epochs or config.epochs_a2p,
                       config.lr_a2p, batch_loss, resume)


def p2w_training_set(a2p: A2P, docs: Sequence[SpokenDocument], config: ModelConfig):
    """Filtered DAFs with word targets, dropping documents CTC cannot align."""
    dafs, targets = [], []
    dropped = 0
    for doc, f in zip(docs, batched_daf(a2p, docs, config.batch_size)):
        if f is None or f[0].shape[0] < ctc.required_length(doc.word_labels):
            dropped += 1
            continue
        dafs.append(f[0])
        targets.append(doc.word_labels)
    if dropped:
        log.warning("p2w: skipped %d of %d documents (no DAFs or too few for the word labels)",
                    dropped, len(docs))
    return dafs, targets


def train_p2w(docs: Sequence[SpokenDocument], a2p_ckpt: Checkpoint, config: ModelConfig,
              resume: Checkpoint | None = None, epochs: int | None = None) -> Checkpoint:
    a2p = load_a2p(a2p_ckpt, config)
    dafs, targets = p2w_training_set(a2p, docs, config)
    if not dafs:
        raise RuntimeError("p2w: no trainable documents; is the A2P checkpoint trained?")
    model = P2W(config, _stage_rng(config, Stage.P2W))

    def batch_loss(idx, rng):
        x, lengths = pad_batch([dafs[i] for i in idx])
        _, logits = model(Tensor(x), lengths, training=True, rng=rng)
        return ctc.ctc_loss_batch(logits, lengths, [targets[i] for i in idx])

    ckpt = _run_epochs(Stage.P2W, model, config, len(dafs), epochs or config.epochs_p2w,
                       config.lr_p2w, batch_loss, resume)
    ckpt.meta["skipped_documents"] = len(docs) - len(dafs)
    return ckpt


def _labelled_pairs(a2p, p2w, docs, config):
    pairs, topics = [], []
    for doc, pair in zip(docs, extract_features(a2p, p2w, docs, config.batch_size)):
        if pair is not None:
            pairs.append(pair)
            topics.append(doc.topic)
    return pairs, topics


def train_fusion(docs: Sequence[SpokenDocument], a2p_ckpt: Checkpoint, p2w_ckpt: Checkpoint,
                 config: ModelConfig, variant=None, dev: Sequence[SpokenDocument] | None = None,
                 resume: Checkpoint | None = None, epochs: int | None = None) -> Checkpoint:
    """Train fusion and topic head on features from the frozen A2P and P2W."""
    variant = Variant.parse(variant or config.variant)
    a2p = load_a2p(a2p_ckpt, config)
    p2w = load_p2w(p2w_ckpt, config)
    pairs, topics = _labelled_pairs(a2p, p2w, docs, config)
    if not pairs:
        raise RuntimeError("fusion: no documents with non-blank frames")
    dev_pairs, dev_topics = _labelled_pairs(a2p, p2w, dev, config) if dev else ([], [])
    system = build_system(variant, config)

    def batch_loss(idx, rng):
        daf, dlf, mask = collate([pairs[i] for i in idx], config.max_len)
        logp = system(daf, dlf, mask, training=True, rng=rng)
        return ops.nll(logp, [topics[i] for i in idx])

    def on_epoch(epoch, loss):
        if not dev_pairs:
            return {}
        preds = predict(system, dev_pairs, config)
        return {"dev_acc": float(np.mean(np.asarray(preds) == np.asarray(dev_topics)))}

    frozen_before = [parameters_checksum(m.parameters()) for m in (a2p, p2w)]
    ckpt = _run_epochs(Stage.FUSION, system, config, len(pairs), epochs or config.epochs_fusion,
                       config.lr_head, batch_loss, resume, system.learning_rates(config), on_epoch)
    ckpt.meta["variant"] = variant.value
    ckpt.meta["frozen_checksums"] = {
        "before": frozen_before, "after": [parameters_checksum(m.parameters()) for m in (a2p, p2w)]}
    return ckpt


def train_stage(stage, corpus_train: Sequence[SpokenDocument], config: ModelConfig,
                checkpoints: dict[str, Checkpoint] | None = None, variant=None,
                dev: Sequence[SpokenDocument] | None = None, resume: Checkpoint | None = None,
                epochs: int | None = None) -> Checkpoint:
    """Dispatch to the stage trainer after checking that earlier stages exist."""
    stage = Stage(stage)
    checkpoints = checkpoints or {}
    needed = {Stage.A2P: [], Stage.P2W: ["a2p"], Stage.FUSION: ["a2p", "p2w"]}[stage]
    missing = [n for n in needed if n not in checkpoints]
    if missing:
        raise MissingPrerequisiteError(
            f"stage {stage.value} requires checkpoint(s): {', '.join(missing)}")
    if stage is Stage.A2P:
        return train_a2p(corpus_train, config, resume, epochs)
    if stage is Stage.P2W:
        return train_p2w(corpus_train, checkpoints["a2p"], config, resume, epochs)
    return train_fusion(corpus_train, checkpoints["a2p"], checkpoints["p2w"], config,
                        variant, dev, resume, epochs)
