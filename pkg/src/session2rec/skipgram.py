"""Listing embeddings via skip-gram with negative sampling.

Co-viewed listings are pushed together and random negatives apart with a
logistic loss over dot products.  Two weight tables are kept: the input
vectors are the published embeddings, the output vectors act as context-side
weights.  Training is single-threaded and fully deterministic for a fixed
seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .corpus import SessionCorpus, Vocabulary
from .errors import ConfigError, ParseError

LOGIT_CLAMP = 30.0  # dot products are clipped here before exponentiation
SIDECAR_MAGIC = b"S2RE"
SIDECAR_VERSION = 1


@dataclass
class EmbeddingTable:
    """Input/output vector pair for every vocabulary index."""

    input_vectors: np.ndarray
    output_vectors: np.ndarray

    def __post_init__(self):
        if self.input_vectors.shape != self.output_vectors.shape:
            raise ValueError("input and output tables must share a shape")
        if self.input_vectors.ndim != 2:
            raise ValueError("tables must be V x d matrices")
        if not (np.isfinite(self.input_vectors).all() and np.isfinite(self.output_vectors).all()):
            raise ValueError("table entries must be finite")

    @property
    def vocab_size(self) -> int:
        return self.input_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]


@dataclass(frozen=True)
class SkipgramConfig:
    dim: int = 32
    window: int = 3
    negatives: int = 5
    epochs: int = 5
    learning_rate_initial: float = 0.025
    learning_rate_final: float = 0.0001
    subsample_threshold: float = 1e-3
    seed: int = 0
    smoothed_negatives: bool = False  # frequency**0.75 draws instead of uniform

    def __post_init__(self):
        if self.dim < 2:
            raise ConfigError("dim must be >= 2")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.negatives < 1:
            raise ConfigError("negatives must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.learning_rate_initial >= self.learning_rate_final > 0:
            raise ConfigError("learning rates must satisfy initial >= final > 0")
        if self.subsample_threshold <= 0:
            raise ConfigError("subsample_threshold must be > 0")


def generate_training_pairs(indices, window: int):
    """Enumerate (center, context) pairs within a symmetric window.

    ``indices`` is one session already mapped to vocabulary indices with
    out-of-vocabulary views removed.  Pairs come out in deterministic order:
    increasing center position, then increasing offset.
    """
    n = len(indices)
    pairs = []
    for i in range(n):
        lo = max(0, i - window)
        hi = min(n, i + window + 1)
        for j in range(lo, hi):
            if j != i:
                pairs.append((indices[i], indices[j]))
    return pairs


def negative_sample(vocab_size: int, k: int, rng, positive_context: int) -> np.ndarray:
    """Draw k uniform negatives, re-drawing collisions with the context.

    After 16 attempts a colliding draw is kept, matching the behaviour of the
    bulk sampler used inside training.
    """
    if vocab_size <= 1:
        raise ValueError("cannot negative-sample a single-listing vocabulary")
    if k < 1:
        raise ValueError("k must be >= 1")
    draws = rng.integers(0, vocab_size, size=k)
    for _ in range(16):
        mask = draws == positive_context
        if not mask.any():
            break
        draws[mask] = rng.integers(0, vocab_size, size=int(mask.sum()))
    return draws


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sgns_loss_and_grads(center_vec, pos_vec, neg_vecs):
    """Loss and exact gradients of one positive/negative classification step.

    loss = -log sigmoid(pos . center) - sum_neg log sigmoid(-(neg . center))

    Returns (loss, d_center, d_pos, d_negs).  Dot products are clipped to
    +-LOGIT_CLAMP before exponentiation; the clip never binds for the vector
    scales used in training or checking.
    """
    s_pos = np.clip(center_vec @ pos_vec, -LOGIT_CLAMP, LOGIT_CLAMP)
    s_neg = np.clip(neg_vecs @ center_vec, -LOGIT_CLAMP, LOGIT_CLAMP)
    loss = -float(np.log(_sigmoid(s_pos)) + np.log(_sigmoid(-s_neg)).sum())

    g_pos = _sigmoid(s_pos) - 1.0  # d loss / d s_pos
    g_neg = _sigmoid(s_neg)  # d loss / d s_neg, one per negative
    d_center = g_pos * pos_vec + neg_vecs.T @ g_neg
    d_pos = g_pos * center_vec
    d_negs = g_neg[:, None] * center_vec[None, :]
    return loss, d_center, d_pos, d_negs


def sgns_step(center: int, context: int, negatives, table: EmbeddingTable, learning_rate: float) -> float:
    """Apply one SGD update for a (center, context, negatives) triple.

    Gradients are computed from the pre-update vectors and applied with
    ``np.add.at`` so a negative that collides with the context index still
    receives the correctly accumulated update.  Returns the pre-update loss.
    """
    if learning_rate <= 0:
        raise ValueError("learning_rate must be > 0")
    negatives = np.asarray(negatives, dtype=np.int64)
    inp, out = table.input_vectors, table.output_vectors
    loss, d_center, d_pos, d_negs = sgns_loss_and_grads(
        inp[center], out[context], out[negatives]
    )
    inp[center] -= learning_rate * d_center
    np.add.at(out, negatives, -learning_rate * d_negs)
    out[context] -= learning_rate * d_pos
    return loss


def _session_index_sequences(corpus: SessionCorpus, vocabulary: Vocabulary) -> list[np.ndarray]:
    """View sequences mapped to vocabulary indices, OOV views dropped."""
    key_to_index = vocabulary.key_to_index
    sequences = []
    for session in corpus.sessions:
        idx = [
            key_to_index[it.listing_key]
            for it in session.interactions
            if it.event_kind == "view" and it.listing_key in key_to_index
        ]
        if len(idx) >= 2:
            sequences.append(np.asarray(idx, dtype=np.int64))
    return sequences


def _pairs_from_sequence(seq: np.ndarray, window: int) -> np.ndarray:
    """Vectorised window enumeration; same order as generate_training_pairs."""
    n = len(seq)
    chunks = []
    for i in range(n):
        lo, hi = max(0, i - window), min(n, i + window + 1)
        ctx = np.concatenate([seq[lo:i], seq[i + 1 : hi]])
        if len(ctx):
            chunk = np.empty((len(ctx), 2), dtype=np.int64)
            chunk[:, 0] = seq[i]
            chunk[:, 1] = ctx
            chunks.append(chunk)
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(chunks)


def _bulk_negatives(contexts: np.ndarray, vocab_size: int, k: int, rng, weights=None) -> np.ndarray:
    """Sample negatives for every pair at once; redraw context collisions."""
    n = len(contexts)
    if weights is None:
        draws = rng.integers(0, vocab_size, size=(n, k))
    else:
        draws = rng.choice(vocab_size, size=(n, k), p=weights)
    for _ in range(16):
        mask = draws == contexts[:, None]
        hits = int(mask.sum())
        if hits == 0:
            break
        if weights is None:
            draws[mask] = rng.integers(0, vocab_size, size=hits)
        else:
            draws[mask] = rng.choice(vocab_size, size=hits, p=weights)
    return draws


def train_embeddings(
    corpus: SessionCorpus, vocabulary: Vocabulary, config: SkipgramConfig
) -> tuple[EmbeddingTable, list[float]]:
    """Train listing embeddings; returns the table and per-epoch mean losses.

    Input vectors start uniform in [-0.5/d, 0.5/d], output vectors at zero.
    Every epoch re-subsamples frequent views, enumerates window pairs, and
    walks them in shuffled order while the learning rate decays linearly from
    the initial to the final value across all steps of all epochs.
    """
    v = len(vocabulary)
    if v <= 1:
        raise ValueError("cannot negative-sample a single-listing vocabulary")
    rng = np.random.default_rng(config.seed)
    inp = rng.uniform(-0.5 / config.dim, 0.5 / config.dim, size=(v, config.dim))
    table = EmbeddingTable(inp, np.zeros((v, config.dim)))

    sequences = _session_index_sequences(corpus, vocabulary)
    keep_prob = np.minimum(
        1.0, np.sqrt(config.subsample_threshold * vocabulary.total_views / vocabulary.counts)
    )
    weights = None
    if config.smoothed_negatives:
        w = vocabulary.counts.astype(np.float64) ** 0.75
        weights = w / w.sum()

    # Materialise every epoch's pairs first so the linear decay knows the
    # total step count before the first update.
    epoch_pairs = []
    for _ in range(config.epochs):
        chunks = []
        for seq in sequences:
            kept = seq[rng.random(len(seq)) < keep_prob[seq]]
            if len(kept) >= 2:
                chunks.append(_pairs_from_sequence(kept, config.window))
        pairs = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
        epoch_pairs.append(pairs)
    total_steps = sum(len(p) for p in epoch_pairs)
    if total_steps == 0:
        raise ValueError("no training pairs after subsampling")

    lr_hi, lr_lo = config.learning_rate_initial, config.learning_rate_final
    losses: list[float] = []
    step = 0
    denom = max(1, total_steps - 1)
    for pairs in epoch_pairs:
        if not len(pairs):
            losses.append(losses[-1] if losses else 0.0)
            continue
        order = rng.permutation(len(pairs))
        pairs = pairs[order]
        negs = _bulk_negatives(pairs[:, 1], v, config.negatives, rng, weights)
        epoch_loss = 0.0
        for row in range(len(pairs)):
            lr = lr_hi + (lr_lo - lr_hi) * (step / denom)
            epoch_loss += sgns_step(pairs[row, 0], pairs[row, 1], negs[row], table, lr)
            step += 1
        losses.append(epoch_loss / len(pairs))
    return table, losses


def nearest_neighbors(table: EmbeddingTable, listing_index: int, top_k: int):
    """Top-k most similar listings by cosine over the input vectors.

    The query row is excluded; ties resolve to the lower index.  Zero-norm
    rows get cosine 0.
    """
    v = table.vocab_size
    if not 0 <= listing_index < v:
        raise IndexError(f"listing index {listing_index} out of range [0, {v})")
    if not 0 < top_k < v:
        raise ValueError("top_k must be in [1, V)")
    vecs = table.input_vectors
    query = vecs[listing_index]
    qn = np.linalg.norm(query)
    norms = np.linalg.norm(vecs, axis=1)
    denom = norms * qn
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0, vecs @ query / denom, 0.0)
    cos[listing_index] = -np.inf
    ranked = np.argsort(-cos, kind="stable")[:top_k]
    return [(int(i), float(cos[i])) for i in ranked]


def embedding_cluster_quality(table: EmbeddingTable, cluster_of_index: np.ndarray):
    """Diagnostics against known clusters: cosine margin and neighbor purity.

    Returns (mean intra-cluster cosine, mean inter-cluster cosine, top-1
    neighbor purity) computed over all listing pairs via the full cosine
    matrix.
    """
    vecs = table.input_vectors
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    unit = np.where(norms > 0, vecs / np.where(norms == 0, 1.0, norms), 0.0)
    cos = unit @ unit.T
    same = cluster_of_index[:, None] == cluster_of_index[None, :]
    off_diag = ~np.eye(len(vecs), dtype=bool)
    intra = float(cos[same & off_diag].mean())
    inter = float(cos[~same].mean())
    np.fill_diagonal(cos, -np.inf)
    top1 = np.argmax(cos, axis=1)
    purity = float(np.mean(cluster_of_index[top1] == cluster_of_index))
    return intra, inter, purity


def save_embeddings_text(table: EmbeddingTable, keys, path) -> None:
    """Write the text format: header ``V d`` then one ``key v_1 .. v_d`` row.

    Only the input vectors are written; floats use shortest round-trip
    decimals so identical tables produce identical bytes.
    """
    if len(keys) != table.vocab_size:
        raise ValueError("key count must match table rows")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{table.vocab_size} {table.dim}\n")
        for key, row in zip(keys, table.input_vectors):
            fh.write(key + " " + " ".join(repr(float(x)) for x in row) + "\n")


def load_embeddings_text(path) -> tuple[list[str], np.ndarray]:
    """Read the text format; returns (keys, vectors).

    Lines starting with ``#`` are skipped, and rows appended after the header
    count (cold-start extrapolations) are accepted.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError("embedding file: bad header, expected 'V d'")
        dim = int(header[1])
        keys, rows = [], []
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split(" ")
            if len(parts) != dim + 1:
                raise ParseError(f"line {lineno}: expected key plus {dim} values")
            keys.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if not keys:
        raise ParseError("embedding file: no rows")
    return keys, np.asarray(rows, dtype=np.float64)


def save_embeddings_binary(table: EmbeddingTable, path) -> None:
    """Binary sidecar with both tables for exact training resume."""
    with open(path, "wb") as fh:
        fh.write(SIDECAR_MAGIC)
        fh.write(struct.pack("<B", SIDECAR_VERSION))
        fh.write(struct.pack("<QQ", table.vocab_size, table.dim))
        fh.write(np.ascontiguousarray(table.input_vectors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(table.output_vectors, dtype="<f8").tobytes())


def load_embeddings_binary(path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SIDECAR_MAGIC:
            raise ParseError(f"bad magic {magic!r}, expected {SIDECAR_MAGIC!r}")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != SIDECAR_VERSION:
            raise ParseError(f"unsupported sidecar version {version}")
        v, d = struct.unpack("<QQ", fh.read(16))
        n = v * d * 8
        inp = np.frombuffer(fh.read(n), dtype="<f8").reshape(v, d).copy()
        out = np.frombuffer(fh.read(n), dtype="<f8").reshape(v, d).copy()
    return EmbeddingTable(inp, out)
