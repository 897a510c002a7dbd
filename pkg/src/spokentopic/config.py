"""Model configuration and the plain-text ``key = value`` run configuration."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .synthcorpus import CorpusSpec

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    """Dimensions and training settings for every stage.

    ``phoneme_vocab`` and ``word_vocab`` count real units; the CTC output
    layers add one class for the blank at index 0.
    """

    d_feat: int = 16
    phoneme_vocab: int = 12
    word_vocab: int = 40
    num_topics: int = 8
    input_proj_dim: int = 32
    a2p_layers: int = 3
    a2p_hidden: int = 32
    p2w_layers: int = 2
    p2w_hidden: int = 32
    head_hidden: int = 32
    head_fc_dim: int = 64
    num_heads: int = 8
    window: int = 10
    max_len: int = 256
    variant: str = "lmha_add"
    a2p_dropout: float = 0.1
    p2w_dropout: float = 0.1
    head_dropout: float = 0.2
    lr_a2p: float = 3e-3
    lr_p2w: float = 1e-2
    lr_attention: float = 3e-4
    lr_head: float = 3e-3
    epochs_a2p: int = 12
    epochs_p2w: int = 18
    epochs_fusion: int = 12
    batch_size: int = 16
    clip_norm: float = 5.0
    layernorm_eps: float = 1e-5
    seed: int = 0

    @property
    def phoneme_classes(self) -> int:
        return self.phoneme_vocab + 1

    @property
    def word_classes(self) -> int:
        return self.word_vocab + 1

    @property
    def d_daf(self) -> int:
        return 2 * self.a2p_hidden

    @property
    def d_dlf(self) -> int:
        return 2 * self.p2w_hidden

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                if f.name in ("seed", "window") or f.name.endswith("_dropout"):
                    if value < 0:
                        raise ConfigError(f"{f.name} must be >= 0, got {value}")
                elif value <= 0:
                    raise ConfigError(f"{f.name} must be positive, got {value}")
        for name in ("a2p_dropout", "p2w_dropout", "head_dropout"):
            if getattr(self, name) >= 1:
                raise ConfigError(f"{name} must be < 1")
        from .pipeline import Variant  # local import: pipeline depends on this module
        variant = Variant.parse(self.variant)
        if variant.uses_attention:
            if self.d_daf != self.d_dlf:
                raise ConfigError(
                    f"attention fusion needs d_daf == d_dlf, got {self.d_daf} and {self.d_dlf}")
            if self.d_daf % self.num_heads:
                raise ConfigError(f"d_model={self.d_daf} not divisible by num_heads={self.num_heads}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ModelConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    corpus: CorpusSpec = field(default_factory=CorpusSpec)
    corpus_dir: Path = Path("corpus")
    checkpoint_dir: Path = Path("checkpoints")

    def with_seed(self, seed: int) -> RunConfig:
        return dataclasses.replace(
            self, model=dataclasses.replace(self.model, seed=seed),
            corpus=dataclasses.replace(self.corpus, seed=seed))


_PATH_KEYS = ("corpus_dir", "checkpoint_dir")


def _convert(raw: str, default, key: str):
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = raw.replace(",", " ").split()
            if len(parts) != len(default):
                raise ValueError(f"expected {len(default)} values")
            return tuple(type(d)(p) for d, p in zip(default, parts))
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    return raw


def parse_run_config(text: str, base_dir: Path | None = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are rejected."""
    model, corpus = ModelConfig(), CorpusSpec()
    model_keys = {f.name for f in dataclasses.fields(ModelConfig)}
    corpus_keys = {f.name for f in dataclasses.fields(CorpusSpec)}
    paths = {"corpus_dir": Path("corpus"), "checkpoint_dir": Path("checkpoints")}
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in _PATH_KEYS:
            p = Path(raw)
            paths[key] = p if p.is_absolute() or base_dir is None else base_dir / p
        elif key in model_keys or key in corpus_keys:
            # shared names (d_feat, vocab sizes, num_topics, seed) land in both
            if key in model_keys:
                setattr(model, key, _convert(raw, getattr(model, key), key))
            if key in corpus_keys:
                setattr(corpus, key, _convert(raw, getattr(corpus, key), key))
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    defaulted = sorted((model_keys | corpus_keys | set(_PATH_KEYS)) - seen)
    if defaulted:
        log.info("config: using defaults for %s", ", ".join(defaulted))
    model.validate()
    corpus.validate()
    return RunConfig(model, corpus, paths["corpus_dir"], paths["checkpoint_dir"])


def load_run_config(path: Path) -> RunConfig:
    path = Path(path)
    return parse_run_config(path.read_text(), base_dir=path.parent)


def format_run_config(cfg: RunConfig) -> str:
    lines = [f"corpus_dir = {cfg.corpus_dir}", f"checkpoint_dir = {cfg.checkpoint_dir}"]
    written = set()
    for obj in (cfg.model, cfg.corpus):
        for f in dataclasses.fields(obj):
            if f.name in written:
                continue
            written.add(f.name)
            value = getattr(obj, f.name)
            if isinstance(value, tuple):
                value = " ".join(map(str, value))
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
