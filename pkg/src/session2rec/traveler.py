"""Traveler-embedding models over sequences of viewed-listing embeddings.

Five kinds share one training and inference surface:

* ``random``    -- picks one viewed embedding (untrained baseline)
* ``average``   -- mean-pools the views, trains only a scoring head
* ``dan``       -- mean-pool, then expand/contract relu layers; the last
                   hidden layer is the traveler embedding
* ``lstm``      -- four-gate recurrence over the view sequence
* ``lstm_attention`` -- additive attention over all hidden states

All trainable kinds minimise class-weighted binary cross entropy on booking
labels with the adaptive optimizer from :mod:`.neural`; every gradient is
hand-derived and checked against finite differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import neural
from .corpus import LabeledPrefix
from .errors import ConfigError
from .neural import DenseLayer, dense_backward, dense_forward
from .skipgram import EmbeddingTable

TRAINABLE_KINDS = ("average", "dan", "lstm", "lstm_attention")
ALL_KINDS = ("random",) + TRAINABLE_KINDS


@dataclass(frozen=True)
class TravelerExample:
    """One supervised case: viewed listing embeddings and a booking label."""

    traveler_key: str
    viewed: np.ndarray  # (t, d)
    label: int

    def __post_init__(self):
        if self.viewed.ndim != 2 or self.viewed.shape[0] < 1:
            raise ValueError("viewed must be a non-empty (t, d) matrix")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


@dataclass
class DanParams:
    """Expand-then-contract stack over the pooled view vector.

    The chain runs pool -> expansion -> contraction -> embedding, with a
    separate scalar scoring head so the embedding stays vector-valued.
    """

    pool_proj: DenseLayer  # d -> d_h2, relu (expansion)
    hidden: DenseLayer  # d_h2 -> d_h1, relu (contraction)
    embed: DenseLayer  # d_h1 -> d_f, relu (traveler embedding)
    head: DenseLayer  # d_f -> 1, sigmoid

    def __post_init__(self):
        d = self.pool_proj.weights.shape[1]
        d_h2 = self.pool_proj.weights.shape[0]
        d_h1 = self.hidden.weights.shape[0]
        d_f = self.embed.weights.shape[0]
        if self.hidden.weights.shape[1] != d_h2 or self.embed.weights.shape[1] != d_h1:
            raise ValueError("chained layer dims are inconsistent")
        if self.head.weights.shape != (1, d_f):
            raise ValueError("head must map the embedding to a scalar")
        if not (d_h2 > d >= d_h1 > d_f):
            raise ValueError(f"dims must expand then contract: got {d_h2} > {d} >= {d_h1} > {d_f}")


@dataclass
class LstmGates:
    """Forget/input/candidate/output gates over concatenated [h_prev, view]."""

    w_forget: np.ndarray
    b_forget: np.ndarray
    w_input: np.ndarray
    b_input: np.ndarray
    w_cell: np.ndarray
    b_cell: np.ndarray
    w_output: np.ndarray
    b_output: np.ndarray

    def __post_init__(self):
        d_h = self.w_forget.shape[0]
        for w in (self.w_forget, self.w_input, self.w_cell, self.w_output):
            if w.shape != self.w_forget.shape:
                raise ValueError("all gates must share the (d_h, d_h + d) shape")
        for b in (self.b_forget, self.b_input, self.b_cell, self.b_output):
            if b.shape != (d_h,):
                raise ValueError("gate biases must be (d_h,)")

    @property
    def hidden_dim(self) -> int:
        return self.w_forget.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_forget.shape[1] - self.w_forget.shape[0]


@dataclass
class LstmParams:
    gates: LstmGates
    head: DenseLayer  # d_h -> 1, sigmoid


@dataclass
class AttentionParams:
    score_vector: np.ndarray  # (d_h,)
    head: DenseLayer  # d_h -> 1, sigmoid over the context vector

    def __post_init__(self):
        if not np.isfinite(self.score_vector).all():
            raise ValueError("score vector must be finite")


@dataclass
class LstmAttentionParams:
    gates: LstmGates
    attention: AttentionParams


@dataclass
class AverageParams:
    head: DenseLayer  # d -> 1, sigmoid over the pooled vector


@dataclass
class TravelerModel:
    kind: str
    params: object | None  # None for the random baseline
    input_dim: int
    seed: int = 0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; valid: {', '.join(ALL_KINDS)}")


@dataclass(frozen=True)
class TravelerConfig:
    input_dim: int = 32
    hidden_expand: int = 64
    hidden_contract: int = 16
    embedding_dim: int = 8
    lstm_hidden: int = 16
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 1e-3
    positive_class_weight: float | None = None  # None -> negatives/positives
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.hidden_expand > self.input_dim >= self.hidden_contract > self.embedding_dim:
            raise ConfigError("dims must satisfy expand > input >= contract > embedding")


@dataclass(frozen=True)
class TraceEntry:
    epoch: int
    mean_loss: float
    wall_ms: float


def pool_average(viewed: np.ndarray) -> np.ndarray:
    """Coordinate-wise mean of the viewed embeddings."""
    if len(viewed) == 0:
        raise ValueError("cannot pool an empty sequence")
    return viewed.mean(axis=0)


def baseline_random(viewed: np.ndarray, rng) -> np.ndarray:
    """One uniformly chosen viewed embedding."""
    if len(viewed) == 0:
        raise ValueError("cannot select from an empty sequence")
    return viewed[int(rng.integers(len(viewed)))]


def build_examples(
    prefixes: list[LabeledPrefix], key_to_index: dict[str, int], table: EmbeddingTable
) -> list[TravelerExample]:
    """Map labeled view prefixes to embedding-row sequences.

    Out-of-vocabulary views are dropped; prefixes left without any view are
    skipped because there is nothing to embed.
    """
    examples = []
    for case in prefixes:
        rows = [
            key_to_index[it.listing_key]
            for it in case.views
            if it.listing_key in key_to_index
        ]
        if not rows:
            continue
        examples.append(
            TravelerExample(case.traveler_key, table.input_vectors[rows], case.label)
        )
    return examples


# ---------------------------------------------------------------------------
# forward / backward per kind


def dan_forward(params: DanParams, viewed: np.ndarray):
    """Pooled pipeline; returns (probability, traveler embedding, cache)."""
    pooled = pool_average(viewed)
    h2, c1 = dense_forward(params.pool_proj, pooled)
    h1, c2 = dense_forward(params.hidden, h2)
    f, c3 = dense_forward(params.embed, h1)
    out, c4 = dense_forward(params.head, f)
    return float(out[0]), f, (c1, c2, c3, c4)


def _dan_backward(params: DanParams, cache, d_prob: float):
    c1, c2, c3, c4 = cache
    df, dw_head, db_head = dense_backward(params.head, c4, np.array([d_prob]))
    dh1, dw_embed, db_embed = dense_backward(params.embed, c3, df)
    dh2, dw_hidden, db_hidden = dense_backward(params.hidden, c2, dh1)
    _, dw_pool, db_pool = dense_backward(params.pool_proj, c1, dh2)
    return [dw_pool, db_pool, dw_hidden, db_hidden, dw_embed, db_embed, dw_head, db_head]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _lstm_scan(gates: LstmGates, viewed: np.ndarray):
    """Run the gated recurrence; returns hidden states and per-step caches.

    x_t is the concatenation [h_{t-1}, view_t]; cell and hidden state start
    at zero.
    """
    d_h = gates.hidden_dim
    h = np.zeros(d_h)
    c = np.zeros(d_h)
    states, caches = [], []
    for v in viewed:
        x = np.concatenate([h, v])
        forget = _sigmoid(gates.w_forget @ x + gates.b_forget)
        gain = _sigmoid(gates.w_input @ x + gates.b_input)
        cand = np.tanh(gates.w_cell @ x + gates.b_cell)
        out = _sigmoid(gates.w_output @ x + gates.b_output)
        c_prev = c
        c = forget * c_prev + gain * cand
        h = out * np.tanh(c)
        states.append(h)
        caches.append((x, forget, gain, cand, out, c_prev, c))
    return states, caches


def _lstm_backward_through_time(gates: LstmGates, caches, dh_inject):
    """Backprop through the recurrence given per-step external gradients.

    ``dh_inject[t]`` is d loss / d h_t coming from outside the recurrence
    (the head for the plain LSTM, the attention mix for the attended one).
    Returns gradients in gate parameter order.
    """
    d_h = gates.hidden_dim
    zeros = lambda w: np.zeros_like(w)
    dw_f, dw_i, dw_c, dw_o = map(zeros, (gates.w_forget, gates.w_input, gates.w_cell, gates.w_output))
    db_f, db_i, db_c, db_o = (np.zeros(d_h) for _ in range(4))
    dh_next = np.zeros(d_h)
    dc_next = np.zeros(d_h)
    for t in range(len(caches) - 1, -1, -1):
        x, forget, gain, cand, out, c_prev, c = caches[t]
        dh = dh_inject[t] + dh_next
        tc = np.tanh(c)
        dz_o = dh * tc * out * (1.0 - out)
        dc = dh * out * (1.0 - tc**2) + dc_next
        dz_f = dc * c_prev * forget * (1.0 - forget)
        dz_i = dc * cand * gain * (1.0 - gain)
        dz_c = dc * gain * (1.0 - cand**2)
        dw_f += np.outer(dz_f, x)
        dw_i += np.outer(dz_i, x)
        dw_c += np.outer(dz_c, x)
        dw_o += np.outer(dz_o, x)
        db_f += dz_f
        db_i += dz_i
        db_c += dz_c
        db_o += dz_o
        dx = (
            gates.w_forget.T @ dz_f
            + gates.w_input.T @ dz_i
            + gates.w_cell.T @ dz_c
            + gates.w_output.T @ dz_o
        )
        dh_next = dx[:d_h]
        dc_next = dc * forget
    return [dw_f, db_f, dw_i, db_i, dw_c, db_c, dw_o, db_o]


def lstm_forward(params: LstmParams, viewed: np.ndarray):
    """Returns (probability, final hidden state, cache)."""
    states, caches = _lstm_scan(params.gates, viewed)
    h_last = states[-1]
    out, head_cache = dense_forward(params.head, h_last)
    return float(out[0]), h_last, (states, caches, head_cache)


def _lstm_backward(params: LstmParams, cache, d_prob: float):
    states, caches, head_cache = cache
    dh_last, dw_head, db_head = dense_backward(params.head, head_cache, np.array([d_prob]))
    dh_inject = [np.zeros_like(states[0]) for _ in states]
    dh_inject[-1] = dh_last
    gate_grads = _lstm_backward_through_time(params.gates, caches, dh_inject)
    return gate_grads + [dw_head, db_head]


def attention_combine(params: AttentionParams, hidden_states):
    """Additive attention over the hidden-state sequence.

    Scores ``e_t = score_vector . tanh(h_t)`` pass through a softmax; the
    context vector is the weighted sum of the raw hidden states.  Returns
    (context, weights); the weights are non-negative and sum to 1, and are
    uniform whenever all states are identical.
    """
    hs = np.asarray(hidden_states)
    if hs.ndim != 2 or len(hs) < 1:
        raise ValueError("need at least one hidden state")
    scores = np.tanh(hs) @ params.score_vector
    shifted = np.exp(scores - scores.max())
    weights = shifted / shifted.sum()
    context = weights @ hs
    return context, weights


def _attention_backward(params: AttentionParams, hs, weights, d_context):
    """Gradients of the attention mix: score vector and per-state grads."""
    hs = np.asarray(hs)
    d_alpha = hs @ d_context
    d_scores = weights * (d_alpha - float(weights @ d_alpha))
    tanh_h = np.tanh(hs)
    d_score_vec = tanh_h.T @ d_scores
    dh = weights[:, None] * d_context[None, :] + d_scores[:, None] * (
        params.score_vector[None, :] * (1.0 - tanh_h**2)
    )
    return d_score_vec, dh


def lstm_attention_forward(params: LstmAttentionParams, viewed: np.ndarray):
    """Returns (probability, context vector, cache)."""
    states, caches = _lstm_scan(params.gates, viewed)
    context, weights = attention_combine(params.attention, states)
    out, head_cache = dense_forward(params.attention.head, context)
    return float(out[0]), context, (states, caches, weights, head_cache)


def _lstm_attention_backward(params: LstmAttentionParams, cache, d_prob: float):
    states, caches, weights, head_cache = cache
    d_context, dw_head, db_head = dense_backward(
        params.attention.head, head_cache, np.array([d_prob])
    )
    d_score_vec, dh_inject = _attention_backward(params.attention, states, weights, d_context)
    gate_grads = _lstm_backward_through_time(params.gates, caches, list(dh_inject))
    return gate_grads + [d_score_vec, dw_head, db_head]


def average_forward(params: AverageParams, viewed: np.ndarray):
    pooled = pool_average(viewed)
    out, cache = dense_forward(params.head, pooled)
    return float(out[0]), pooled, cache


def _average_backward(params: AverageParams, cache, d_prob: float):
    _, dw_head, db_head = dense_backward(params.head, cache, np.array([d_prob]))
    return [dw_head, db_head]


# ---------------------------------------------------------------------------
# uniform parameter plumbing


def _dense(rng, out_dim, in_dim, activation, scale=None):
    scale = scale if scale is not None else np.sqrt(2.0 / in_dim)
    return DenseLayer(rng.normal(0.0, scale, size=(out_dim, in_dim)), np.zeros(out_dim), activation)


def init_params(kind: str, config: TravelerConfig, rng):
    d = config.input_dim
    if kind == "average":
        return AverageParams(head=_dense(rng, 1, d, "sigmoid", scale=1.0 / np.sqrt(d)))
    if kind == "dan":
        return DanParams(
            pool_proj=_dense(rng, config.hidden_expand, d, "relu"),
            hidden=_dense(rng, config.hidden_contract, config.hidden_expand, "relu"),
            embed=_dense(rng, config.embedding_dim, config.hidden_contract, "relu"),
            head=_dense(rng, 1, config.embedding_dim, "sigmoid", scale=1.0 / np.sqrt(config.embedding_dim)),
        )
    d_h = config.lstm_hidden

    def gate_weights():
        return rng.normal(0.0, 1.0 / np.sqrt(d_h + d), size=(d_h, d_h + d))

    gates = LstmGates(
        gate_weights(), np.zeros(d_h),
        gate_weights(), np.zeros(d_h),
        gate_weights(), np.zeros(d_h),
        gate_weights(), np.zeros(d_h),
    )
    gates.b_forget[:] = 1.0  # open forget gates keep early gradients alive
    head = _dense(rng, 1, d_h, "sigmoid", scale=1.0 / np.sqrt(d_h))
    if kind == "lstm":
        return LstmParams(gates=gates, head=head)
    if kind == "lstm_attention":
        score = rng.normal(0.0, 1.0 / np.sqrt(d_h), size=d_h)
        return LstmAttentionParams(gates=gates, attention=AttentionParams(score, head))
    raise ConfigError(f"unknown trainable kind {kind!r}; valid: {', '.join(TRAINABLE_KINDS)}")


def _gate_arrays(gates: LstmGates):
    return [
        gates.w_forget, gates.b_forget,
        gates.w_input, gates.b_input,
        gates.w_cell, gates.b_cell,
        gates.w_output, gates.b_output,
    ]


def params_list(kind: str, params) -> list[np.ndarray]:
    """Canonical flat parameter order per kind (matches gradient order)."""
    if kind == "average":
        return [params.head.weights, params.head.bias]
    if kind == "dan":
        return [
            params.pool_proj.weights, params.pool_proj.bias,
            params.hidden.weights, params.hidden.bias,
            params.embed.weights, params.embed.bias,
            params.head.weights, params.head.bias,
        ]
    if kind == "lstm":
        return _gate_arrays(params.gates) + [params.head.weights, params.head.bias]
    if kind == "lstm_attention":
        return _gate_arrays(params.gates) + [
            params.attention.score_vector,
            params.attention.head.weights,
            params.attention.head.bias,
        ]
    raise ConfigError(f"unknown trainable kind {kind!r}")


def with_params(kind: str, params, arrays: list[np.ndarray]):
    """Rebuild a parameter bundle from a flat array list (non-mutating)."""

    def dense_like(layer, w, b):
        return DenseLayer(w, b, layer.activation)

    if kind == "average":
        return AverageParams(head=dense_like(params.head, *arrays))
    if kind == "dan":
        return DanParams(
            pool_proj=dense_like(params.pool_proj, arrays[0], arrays[1]),
            hidden=dense_like(params.hidden, arrays[2], arrays[3]),
            embed=dense_like(params.embed, arrays[4], arrays[5]),
            head=dense_like(params.head, arrays[6], arrays[7]),
        )
    gates = LstmGates(*arrays[:8])
    if kind == "lstm":
        return LstmParams(gates=gates, head=dense_like(params.head, arrays[8], arrays[9]))
    if kind == "lstm_attention":
        att = params.attention
        return LstmAttentionParams(
            gates=gates,
            attention=AttentionParams(arrays[8], dense_like(att.head, arrays[9], arrays[10])),
        )
    raise ConfigError(f"unknown trainable kind {kind!r}")


_FORWARD = {
    "average": average_forward,
    "dan": dan_forward,
    "lstm": lstm_forward,
    "lstm_attention": lstm_attention_forward,
}
_BACKWARD = {
    "average": _average_backward,
    "dan": _dan_backward,
    "lstm": _lstm_backward,
    "lstm_attention": _lstm_attention_backward,
}


def example_loss_and_grads(kind: str, params, viewed, label: int, positive_weight: float):
    """Weighted BCE loss and gradients for one example (used by training and
    by the finite-difference checker)."""
    prob, _, cache = _FORWARD[kind](params, viewed)
    loss, d_prob = neural.weighted_bce(prob, label, positive_weight)
    grads = _BACKWARD[kind](params, cache, d_prob)
    return float(loss), grads


def loss_fn_for_gradcheck(kind: str, template, viewed, label: int, positive_weight: float = 1.0):
    """Close over an example so grad_check can perturb raw arrays."""

    def fn(arrays):
        params = with_params(kind, template, arrays)
        return example_loss_and_grads(kind, params, viewed, label, positive_weight)

    return fn


def dan_relu_margin(params: DanParams, viewed) -> float:
    """Smallest |pre-activation| across the relu layers for one example.

    Finite-difference checks must avoid the relu kink: an entry whose +-h
    perturbation crosses zero makes the difference quotient disagree with the
    subgradient convention.  Case generators resample until this margin
    comfortably exceeds the perturbation's reach.
    """
    _, _, (c1, c2, c3, _) = dan_forward(params, viewed)
    return float(min(np.abs(cache[1]).min() for cache in (c1, c2, c3)))


def train_traveler_model(
    examples: list[TravelerExample], kind: str, config: TravelerConfig, provenance: dict | None = None
) -> tuple[TravelerModel, list[TraceEntry]]:
    """Minimise mean class-weighted BCE with the adaptive optimizer.

    Gradients are averaged over shuffled mini-batches; one optimizer step per
    batch.  The recorded per-epoch loss is the mean pre-update loss over the
    epoch's examples.  Deterministic for a fixed config and seed.
    """
    if kind not in TRAINABLE_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; valid: {', '.join(TRAINABLE_KINDS)}")
    labels = [ex.label for ex in examples]
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("degenerate labels: need at least one example of each class")
    for ex in examples:
        if ex.viewed.shape[1] != config.input_dim:
            raise ValueError(
                f"example dim {ex.viewed.shape[1]} does not match config input_dim {config.input_dim}"
            )
    w_pos = config.positive_class_weight if config.positive_class_weight is not None else n_neg / n_pos

    rng = np.random.default_rng(config.seed)
    params = init_params(kind, config, rng)
    arrays = [a.copy() for a in params_list(kind, params)]
    state = neural.init_optimizer(arrays, step_size=config.learning_rate)

    n = len(examples)
    trace: list[TraceEntry] = []
    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, config.batch_size):
            batch = order[lo : lo + config.batch_size]
            params = with_params(kind, params, arrays)
            batch_grads = [np.zeros_like(a) for a in arrays]
            for i in batch:
                ex = examples[i]
                loss, grads = example_loss_and_grads(kind, params, ex.viewed, ex.label, w_pos)
                epoch_loss += loss
                for acc, g in zip(batch_grads, grads):
                    acc += g
            scale = 1.0 / len(batch)
            arrays, state = neural.adam_step(
                arrays, [g * scale for g in batch_grads], state
            )
        wall_ms = (time.perf_counter() - started) * 1000.0
        trace.append(TraceEntry(epoch, epoch_loss / n, wall_ms))

    params = with_params(kind, params, arrays)
    model = TravelerModel(
        kind=kind,
        params=params,
        input_dim=config.input_dim,
        seed=config.seed,
        provenance=dict(provenance or {}),
    )
    return model, trace


def predict_probability(model: TravelerModel, viewed: np.ndarray) -> float:
    if model.kind == "random":
        raise ValueError("the random baseline has no booking head")
    prob, _, _ = _FORWARD[model.kind](model.params, viewed)
    return prob


def traveler_embedding(model: TravelerModel, viewed: np.ndarray, rng=None) -> np.ndarray:
    """The model's traveler representation for a view prefix.

    DAN returns its last hidden layer, LSTM the final hidden state, attention
    the context vector, averaging the pooled vector, and the random baseline
    one chosen view (which needs the caller's rng).
    """
    if len(viewed) == 0:
        raise ValueError("empty prefix")
    if model.kind == "random":
        if rng is None:
            raise ValueError("the random baseline needs an rng")
        return baseline_random(viewed, rng)
    _, emb, _ = _FORWARD[model.kind](model.params, viewed)
    return emb


def embedding_dim(model: TravelerModel) -> int:
    if model.kind in ("random", "average"):
        return model.input_dim
    if model.kind == "dan":
        return model.params.embed.weights.shape[0]
    return model.params.gates.hidden_dim


def write_training_log(trace: list[TraceEntry], path) -> None:
    """Newline-delimited ``epoch <TAB> mean_loss <TAB> wall_ms`` records."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in trace:
            fh.write(f"{entry.epoch}\t{repr(entry.mean_loss)}\t{entry.wall_ms:.3f}\n")


# ---------------------------------------------------------------------------
# persistence (shared JSON format from the neural module)


def _gate_layers(gates: LstmGates) -> list[DenseLayer]:
    return [
        DenseLayer(gates.w_forget, gates.b_forget, "sigmoid"),
        DenseLayer(gates.w_input, gates.b_input, "sigmoid"),
        DenseLayer(gates.w_cell, gates.b_cell, "tanh"),
        DenseLayer(gates.w_output, gates.b_output, "sigmoid"),
    ]


def save_traveler_model(model: TravelerModel, path) -> None:
    dims = {"input_dim": model.input_dim}
    if model.kind == "random":
        layers = []
    elif model.kind == "average":
        layers = [model.params.head]
    elif model.kind == "dan":
        p = model.params
        layers = [p.pool_proj, p.hidden, p.embed, p.head]
        dims.update(
            hidden_expand=p.pool_proj.weights.shape[0],
            hidden_contract=p.hidden.weights.shape[0],
            embedding_dim=p.embed.weights.shape[0],
        )
    elif model.kind == "lstm":
        layers = _gate_layers(model.params.gates) + [model.params.head]
        dims.update(lstm_hidden=model.params.gates.hidden_dim)
    else:
        att = model.params.attention
        layers = _gate_layers(model.params.gates) + [
            DenseLayer(att.score_vector[None, :], np.zeros(1), "linear"),
            att.head,
        ]
        dims.update(lstm_hidden=model.params.gates.hidden_dim)
    extra = {
        "traveler_embedding_dim": embedding_dim(model),
        "seed": model.seed,
        "provenance": model.provenance,
    }
    neural.save_model_json(path, model.kind, dims, layers, extra)


def load_traveler_model(path) -> TravelerModel:
    payload = neural.load_model_json(path)
    kind = payload["model_kind"]
    dims = payload["dims"]
    layers = payload["layers"]
    if kind == "random":
        params = None
    elif kind == "average":
        params = AverageParams(head=layers[0])
    elif kind == "dan":
        params = DanParams(*layers)
    elif kind == "lstm":
        gates = _gates_from_layers(layers[:4])
        params = LstmParams(gates=gates, head=layers[4])
    elif kind == "lstm_attention":
        gates = _gates_from_layers(layers[:4])
        params = LstmAttentionParams(
            gates=gates, attention=AttentionParams(layers[4].weights[0], layers[5])
        )
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    return TravelerModel(
        kind=kind,
        params=params,
        input_dim=dims["input_dim"],
        seed=payload.get("seed", 0),
        provenance=payload.get("provenance", {}),
    )


def _gates_from_layers(layers: list[DenseLayer]) -> LstmGates:
    arrays = []
    for layer in layers:
        arrays.extend([layer.weights, layer.bias])
    return LstmGates(*arrays)
