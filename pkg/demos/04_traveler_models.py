"""Train every traveler-embedding model kind on booking labels and compare.

The averaging baseline fits only a scoring head over mean-pooled listing
embeddings; the deep averaging network adds an expand/contract relu stack;
the recurrent kinds read the view sequence in order.  All minimise
class-weighted binary cross entropy with the same adaptive optimizer.
"""

import numpy as np

from session2rec.corpus import (
    SyntheticConfig,
    build_vocabulary,
    generate_synthetic,
    labeled_prefixes,
    split_by_user,
)
from session2rec.evaluation import ScoredSet, auc
from session2rec.skipgram import SkipgramConfig, train_embeddings
from session2rec.traveler import (
    TRAINABLE_KINDS,
    TravelerConfig,
    build_examples,
    predict_probability,
    train_traveler_model,
    traveler_embedding,
)

corpus, _ = generate_synthetic(SyntheticConfig(
    n_listings=200, n_clusters=10, n_travelers=2500, mean_session_len=8,
    booking_base_rate=0.3, seed=2,
))
vocabulary = build_vocabulary(corpus, min_count=5)
table, _ = train_embeddings(corpus, vocabulary, SkipgramConfig(dim=16, epochs=10, seed=2))

train_corpus, test_corpus = split_by_user(corpus, 0.7, seed=2)
train_examples = build_examples(labeled_prefixes(train_corpus), vocabulary.key_to_index, table)
test_examples = build_examples(labeled_prefixes(test_corpus), vocabulary.key_to_index, table)
positives = sum(ex.label for ex in train_examples)
print(f"{len(train_examples)} train / {len(test_examples)} test examples "
      f"({positives / len(train_examples):.1%} positive)")

config = TravelerConfig(
    input_dim=16, hidden_expand=32, hidden_contract=12, embedding_dim=6,
    lstm_hidden=8, epochs=25, batch_size=64, learning_rate=2e-3, seed=0,
)

models = {}
print(f"\n{'kind':<16} {'final loss':>10} {'test AUC':>9} {'ms/epoch':>9} {'emb dim':>8}")
for kind in TRAINABLE_KINDS:
    model, trace = train_traveler_model(train_examples, kind, config)
    scores = np.array([predict_probability(model, ex.viewed) for ex in test_examples])
    labels = np.array([ex.label for ex in test_examples])
    test_auc = auc(ScoredSet(scores, labels))
    mean_ms = np.mean([entry.wall_ms for entry in trace])
    emb = traveler_embedding(model, test_examples[0].viewed)
    print(f"{kind:<16} {trace[-1].mean_loss:>10.4f} {test_auc:>9.3f} {mean_ms:>9.0f} {len(emb):>8}")
    models[kind] = model

# order sensitivity: pooling kinds ignore it, recurrent kinds exploit it
viewed = test_examples[0].viewed
if len(viewed) > 1:
    flipped = viewed[::-1].copy()
    print("\nprobability shift when the view order is reversed:")
    for kind, model in models.items():
        delta = abs(predict_probability(model, viewed) - predict_probability(model, flipped))
        print(f"  {kind:<16} {delta:.2e}")
