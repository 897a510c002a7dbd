"""Seeded synthetic spoken documents with topic-dependent word statistics.

Each topic prefers its own block of words; the remaining words are shared
by all topics. Every word has a fixed phoneme spelling (the lexicon), and
each phoneme is rendered as a short run of noisy copies of its embedding
vector. Topic information therefore lives only in *which* words occur.

On-disk layout (one directory per split, one ``doc_NNNNN.bin`` per document)::

    SPDOC 1\\n
    topic <int>\\n
    phonemes <id> <id> ...\\n
    words <id> <id> ...\\n
    frames <T> <d>\\n
    end\\n
    <uint64 little-endian: T*d> <T*d float64 little-endian, row-major>
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ctc import required_length

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
DOC_MAGIC = "SPDOC 1"


@dataclass
class CorpusSpec:
    num_topics: int = 8
    word_vocab: int = 40
    phoneme_vocab: int = 12
    d_feat: int = 16
    words_per_doc: tuple[int, int] = (6, 10)
    phonemes_per_word: tuple[int, int] = (2, 3)
    frames_per_phoneme: tuple[int, int] = (2, 3)
    topic_words: int = 4
    topic_mass: float = 0.75
    sigma: float = 0.3
    seed: int = 0
    n_train: int = 320
    n_dev: int = 40
    n_test: int = 80

    def validate(self) -> None:
        if self.num_topics < 1 or self.word_vocab < 1 or self.phoneme_vocab < 1 or self.d_feat < 1:
            raise ValueError("corpus spec: topics, vocabularies and d_feat must be positive")
        if self.num_topics * self.topic_words > self.word_vocab:
            raise ValueError(
                f"corpus spec: {self.num_topics} topics x {self.topic_words} words exceed "
                f"word_vocab={self.word_vocab}")
        for name in ("words_per_doc", "phonemes_per_word", "frames_per_phoneme"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ValueError(f"corpus spec: bad range {name}=({lo}, {hi})")
        if self.frames_per_phoneme[0] < 2:
            raise ValueError("corpus spec: frames_per_phoneme must start at >= 2 for CTC feasibility")
        lo, hi = self.phonemes_per_word
        capacity = sum(self.phoneme_vocab ** n for n in range(lo, hi + 1))
        if capacity < self.word_vocab:
            raise ValueError("corpus spec: not enough distinct phoneme spellings for the lexicon")
        if not 0.0 <= self.topic_mass <= 1.0 or self.sigma < 0:
            raise ValueError("corpus spec: topic_mass must be in [0, 1] and sigma >= 0")
        if min(self.n_train, self.n_dev, self.n_test) < 0:
            raise ValueError("corpus spec: split sizes must be non-negative")


@dataclass
class SpokenDocument:
    frames: np.ndarray
    phoneme_labels: list[int]
    word_labels: list[int]
    topic: int
    frame_phonemes: list[int] = field(default_factory=list, compare=False)

    def __eq__(self, other) -> bool:
        """Exact equality of labels and frame values; ``frame_phonemes`` is not persisted and is ignored."""
        if not isinstance(other, SpokenDocument):
            return NotImplemented
        return (self.topic == other.topic and self.phoneme_labels == other.phoneme_labels
                and self.word_labels == other.word_labels and self.frames.shape == other.frames.shape
                and self.frames.tobytes() == other.frames.tobytes())


@dataclass
class Corpus:
    spec: CorpusSpec
    lexicon: dict[int, list[int]]
    embeddings: np.ndarray
    topic_distributions: np.ndarray
    train: list[SpokenDocument]
    dev: list[SpokenDocument]
    test: list[SpokenDocument]

    def split(self, name: str) -> list[SpokenDocument]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}; expected one of {SPLITS}")
        return getattr(self, name)


def build_lexicon(spec: CorpusSpec, rng: np.random.Generator) -> dict[int, list[int]]:
    """Distinct phoneme spellings for word ids ``1..word_vocab`` (0 is blank)."""
    lexicon: dict[int, list[int]] = {}
    used: set[tuple[int, ...]] = set()
    lo, hi = spec.phonemes_per_word
    for word in range(1, spec.word_vocab + 1):
        while True:
            n = int(rng.integers(lo, hi + 1))
            spelling = tuple(int(p) for p in rng.integers(1, spec.phoneme_vocab + 1, size=n))
            if spelling not in used:
                used.add(spelling)
                lexicon[word] = list(spelling)
                break
    return lexicon


def topic_distributions(spec: CorpusSpec) -> np.ndarray:
    """``[num_topics, word_vocab + 1]`` word probabilities; column 0 (blank) is zero."""
    n_topic_words = spec.num_topics * spec.topic_words
    shared = np.arange(n_topic_words + 1, spec.word_vocab + 1)
    dist = np.zeros((spec.num_topics, spec.word_vocab + 1))
    for k in range(spec.num_topics):
        own = np.arange(1 + k * spec.topic_words, 1 + (k + 1) * spec.topic_words)
        if shared.size:
            dist[k, own] = spec.topic_mass / own.size
            dist[k, shared] = (1.0 - spec.topic_mass) / shared.size
        else:
            dist[k, own] = 1.0 / own.size
    return dist


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def render_frames(phoneme_ids, spec: CorpusSpec, embeddings: np.ndarray,
                  rng: np.random.Generator) -> tuple[np.ndarray, list[int]]:
    """Emit each phoneme for k ~ U{frames_per_phoneme} frames of embedding + N(0, sigma^2)."""
    if len(phoneme_ids) == 0:
        raise ValueError("render_frames: empty phoneme sequence")
    lo, hi = spec.frames_per_phoneme
    frame_ids: list[int] = []
    for p in phoneme_ids:
        frame_ids.extend([int(p)] * int(rng.integers(lo, hi + 1)))
    frames = embeddings[frame_ids] + spec.sigma * rng.standard_normal((len(frame_ids), spec.d_feat))
    return frames, frame_ids


def generate_document(spec: CorpusSpec, lexicon, embeddings, dists, rng: np.random.Generator) -> SpokenDocument:
    topic = int(rng.integers(0, spec.num_topics))
    lo, hi = spec.words_per_doc
    n_words = int(rng.integers(lo, hi + 1))
    words = [int(w) for w in rng.choice(spec.word_vocab + 1, size=n_words, p=dists[topic])]
    phonemes = [p for w in words for p in lexicon[w]]
    frames, frame_ids = render_frames(phonemes, spec, embeddings, rng)
    return SpokenDocument(frames, phonemes, words, topic, frame_ids)


def generate_corpus(spec: CorpusSpec) -> Corpus:
    """Deterministic in ``spec.seed``; each document draws from its own child stream."""
    spec.validate()
    shared_rng = np.random.default_rng([spec.seed, 0])
    lexicon = build_lexicon(spec, shared_rng)
    embeddings = np.zeros((spec.phoneme_vocab + 1, spec.d_feat))
    embeddings[1:] = shared_rng.standard_normal((spec.phoneme_vocab, spec.d_feat))
    dists = topic_distributions(spec)
    for a in range(spec.num_topics):
        for b in range(a + 1, spec.num_topics):
            tv = total_variation(dists[a], dists[b])
            if tv <= 0.2:
                raise ValueError(f"corpus spec: topics {a} and {b} are too similar (TV={tv:.3f})")
    splits = {}
    for split_id, (name, size) in enumerate(zip(SPLITS, (spec.n_train, spec.n_dev, spec.n_test)), start=1):
        splits[name] = [
            generate_document(spec, lexicon, embeddings, dists, np.random.default_rng([spec.seed, split_id, i]))
            for i in range(size)
        ]
    corpus = Corpus(spec, lexicon, embeddings, dists, **splits)
    for doc in corpus.train + corpus.dev + corpus.test:
        if doc.frames.shape[0] < required_length(doc.phoneme_labels):
            raise RuntimeError("generated document is shorter than its CTC alignment requires")
    return corpus


# --- serialisation ---------------------------------------------------------

def write_document(path: Path, doc: SpokenDocument) -> None:
    t, d = doc.frames.shape
    header = "\n".join([
        DOC_MAGIC,
        f"topic {doc.topic}",
        "phonemes " + " ".join(map(str, doc.phoneme_labels)),
        "words " + " ".join(map(str, doc.word_labels)),
        f"frames {t} {d}",
        "end",
    ]) + "\n"
    payload = np.ascontiguousarray(doc.frames, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(struct.pack("<Q", t * d))
        fh.write(payload)


def read_document(path: Path) -> SpokenDocument:
    raw = Path(path).read_bytes()
    end = raw.find(b"\nend\n")
    if end < 0:
        raise ValueError(f"{path}: missing header terminator")
    lines = raw[:end].decode("ascii").split("\n")
    if lines[0] != DOC_MAGIC:
        raise ValueError(f"{path}: bad magic {lines[0]!r}")
    fields = {}
    for line in lines[1:]:
        key, _, rest = line.partition(" ")
        fields[key] = rest
    t, d = (int(v) for v in fields["frames"].split())
    offset = end + len(b"\nend\n")
    (count,) = struct.unpack_from("<Q", raw, offset)
    body = raw[offset + 8:]
    if count != t * d or len(body) != 8 * count:
        raise ValueError(f"{path}: frame payload length mismatch")
    frames = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(t, d)
    return SpokenDocument(
        frames=frames,
        phoneme_labels=[int(v) for v in fields["phonemes"].split()],
        word_labels=[int(v) for v in fields["words"].split()],
        topic=int(fields["topic"]),
    )


def save_corpus(corpus: Corpus, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out_dir}")
    for name in SPLITS:
        split_dir = out_dir / name
        split_dir.mkdir(exist_ok=True)
        for old in split_dir.glob("doc_*.bin"):
            old.unlink()
        for i, doc in enumerate(corpus.split(name)):
            write_document(split_dir / f"doc_{i:05d}.bin", doc)
    with open(out_dir / "lexicon.txt", "w") as fh:
        for word, spelling in corpus.lexicon.items():
            fh.write(f"{word} " + " ".join(map(str, spelling)) + "\n")


def load_split(corpus_dir: Path, split: str) -> list[SpokenDocument]:
    split_dir = Path(corpus_dir) / split
    if not split_dir.is_dir():
        raise FileNotFoundError(f"corpus split not found: {split_dir}")
    return [read_document(p) for p in sorted(split_dir.glob("doc_*.bin"))]
