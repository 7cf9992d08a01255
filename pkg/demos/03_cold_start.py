"""Synthesize embeddings for listings that have no interaction history.

Trained listings vote their embeddings into destination-level expectations,
weighted by the share of demand each destination drives.  A brand-new listing
known only by coordinates gets a demand belief over the nearest destinations
and inherits the belief-weighted mix of their embeddings.
"""

import numpy as np

from session2rec.coldstart import (
    DestinationDemand,
    GeoPoint,
    demand_belief_from_location,
    destination_embeddings,
    extrapolate_cold,
    great_circle_km,
)
from session2rec.corpus import SyntheticConfig, build_vocabulary, generate_synthetic
from session2rec.skipgram import SkipgramConfig, train_embeddings

corpus, truth = generate_synthetic(SyntheticConfig(
    n_listings=60, n_clusters=3, n_travelers=1500, mean_session_len=8,
    booking_base_rate=0.3, seed=3,
))
vocabulary = build_vocabulary(corpus, min_count=5)
table, _ = train_embeddings(
    corpus, vocabulary, SkipgramConfig(dim=8, epochs=8, seed=0, subsample_threshold=0.1)
)
print(f"trained {len(vocabulary)} warm listings at d={table.dim}")

# pretend each cluster's listings sell mostly into one destination
destinations = {0: "coast", 1: "mountains", 2: "city"}
rows = []
rng = np.random.default_rng(5)
for key, index in vocabulary.key_to_index.items():
    home = destinations[truth.cluster_of_listing[key]]
    others = [d for d in destinations.values() if d != home]
    spill = rng.uniform(0.05, 0.2)
    rows.append((index, home, 1.0 - spill))
    rows.append((index, others[0], spill / 2))
    rows.append((index, others[1], spill / 2))
demand = DestinationDemand(tuple(rows))

dest_embeddings = destination_embeddings(table, demand)
for name, vector in dest_embeddings.vectors.items():
    print(f"  {name:<10} support={dest_embeddings.support[name]:<3} |v|={np.linalg.norm(vector):.3f}")

centroids = {
    "coast": GeoPoint(43.5, -5.0),
    "mountains": GeoPoint(45.9, 6.9),
    "city": GeoPoint(48.85, 2.35),
}
new_listing = GeoPoint(44.0, -4.0)  # near the coast
print("\ndistances from the cold listing:")
for name, centroid in centroids.items():
    print(f"  {name:<10} {great_circle_km(new_listing, centroid):7.1f} km")

belief = demand_belief_from_location(new_listing, centroids, m_nearest=3)
print("demand belief:", {k: round(v, 3) for k, v in belief.items()})

cold_vector = extrapolate_cold(belief, dest_embeddings)
print(f"\nextrapolated embedding |v|={np.linalg.norm(cold_vector):.3f}")
for name, vector in dest_embeddings.vectors.items():
    cos = vector @ cold_vector / (np.linalg.norm(vector) * np.linalg.norm(cold_vector))
    print(f"  cosine to {name:<10} {cos:.3f}")
print("the cold listing lands nearest the destination it is closest to")
