"""Train listing embeddings with skip-gram negative sampling and inspect them.

Co-viewed listings end up close in embedding space; the planted clusters of
the synthetic generator give an objective yardstick (neighbor purity and the
intra/inter cosine margin).
"""

import numpy as np

from session2rec.corpus import SyntheticConfig, build_vocabulary, generate_synthetic
from session2rec.skipgram import (
    SkipgramConfig,
    embedding_cluster_quality,
    nearest_neighbors,
    train_embeddings,
)

corpus_config = SyntheticConfig(
    n_listings=200,
    n_clusters=10,
    n_travelers=2500,
    mean_session_len=8,
    booking_base_rate=0.3,
    seed=7,
)
corpus, truth = generate_synthetic(corpus_config)
vocabulary = build_vocabulary(corpus, min_count=5)
print(f"corpus: {len(corpus.sessions)} sessions, vocabulary {len(vocabulary)} listings")

config = SkipgramConfig(dim=16, window=3, negatives=5, epochs=10, seed=1)
table, losses = train_embeddings(corpus, vocabulary, config)
print("per-epoch mean loss:", " ".join(f"{x:.3f}" for x in losses))

clusters = np.array([truth.cluster_of_listing[k] for k in vocabulary.index_to_key])
intra, inter, purity = embedding_cluster_quality(table, clusters)
print(f"\nintra-cluster cosine {intra:.3f} vs inter-cluster {inter:.3f} "
      f"(margin {intra - inter:.3f}); top-1 neighbor purity {purity:.3f}")

query = 0
print(f"\nnearest neighbors of {vocabulary.index_to_key[query]} "
      f"(cluster {clusters[query]}):")
for index, cosine in nearest_neighbors(table, query, top_k=5):
    key = vocabulary.index_to_key[index]
    print(f"  {key}  cluster={clusters[index]}  cosine={cosine:.3f}")

same = [cosine for index, cosine in nearest_neighbors(table, query, top_k=30)
        if clusters[index] == clusters[query]]
print(f"\n{len(same)} of the top 30 neighbors share the query's cluster")
