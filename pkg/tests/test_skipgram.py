import math

import numpy as np
import pytest

from session2rec import neural
from session2rec.corpus import SyntheticConfig, build_vocabulary, generate_synthetic
from session2rec.errors import ConfigError, ParseError
from session2rec.skipgram import (
    EmbeddingTable,
    SkipgramConfig,
    embedding_cluster_quality,
    generate_training_pairs,
    load_embeddings_binary,
    load_embeddings_text,
    negative_sample,
    nearest_neighbors,
    save_embeddings_binary,
    save_embeddings_text,
    sgns_loss_and_grads,
    sgns_step,
    train_embeddings,
)

class TestTrainingPairs:
    def test_window_one_enumeration(self):
        assert generate_training_pairs([0, 1, 2], 1) == [(0, 1), (1, 0), (1, 2), (2, 1)]

    def test_window_two_matches_brute_force(self):
        indices = [3, 1, 4, 1, 5]
        got = generate_training_pairs(indices, 2)
        expected = []
        for i in range(len(indices)):
            for j in range(len(indices)):
                if j != i and abs(i - j) <= 2:
                    expected.append((indices[i], indices[j]))
        assert got == expected

    def test_single_view_yields_nothing(self):
        assert generate_training_pairs([7], 3) == []


class TestNegativeSampling:
    def test_two_listing_vocabulary_forces_the_other(self, rng):
        for _ in range(50):
            draws = negative_sample(2, 4, rng, positive_context=0)
            assert (draws == 1).all()

    def test_uniformity_histogram(self):
        rng = np.random.default_rng(0)
        v, n = 1000, 10**6
        draws = rng.integers(0, v, size=n)  # context collisions negligible here
        counts = np.bincount(negative_sample(v, n, rng, positive_context=v + 1), minlength=v)
        del draws
        expected = n / v
        sigma = math.sqrt(n * (1 / v) * (1 - 1 / v))
        assert np.all(np.abs(counts - expected) <= 3.3 * sigma)

    def test_cardinality(self, rng):
        assert len(negative_sample(100, 3, rng, positive_context=5)) == 3

    def test_single_listing_vocabulary_is_an_error(self, rng):
        with pytest.raises(ValueError, match="single-listing"):
            negative_sample(1, 2, rng, positive_context=0)


class TestSgnsStep:
    def test_zero_vectors_loss(self):
        table = EmbeddingTable(np.zeros((4, 3)), np.zeros((4, 3)))
        loss = sgns_step(0, 1, [2], table, learning_rate=0.1)
        assert loss == pytest.approx(2 * math.log(2))

    def test_gradients_match_finite_differences(self, rng):
        for _ in range(25):
            d = int(rng.integers(2, 8))
            k = int(rng.integers(1, 5))
            arrays = [rng.normal(size=d), rng.normal(size=d), rng.normal(size=(k, d))]

            def fn(params):
                loss, dc, dp, dn = sgns_loss_and_grads(*params)
                return loss, [dc, dp, dn]

            assert neural.grad_check(fn, arrays, h=1e-5) < 1e-4

    def test_positive_pair_dot_increases(self, rng):
        inp = rng.uniform(-0.01, 0.01, size=(5, 4))
        out = rng.uniform(-0.01, 0.01, size=(5, 4))
        table = EmbeddingTable(inp.copy(), out.copy())
        before = table.input_vectors[0] @ table.output_vectors[1]
        sgns_step(0, 1, [2, 3], table, learning_rate=0.5)
        after = table.input_vectors[0] @ table.output_vectors[1]
        assert after > before

    def test_negative_colliding_with_context_accumulates(self, rng):
        # duplicate touched rows must receive the summed gradient
        inp = rng.normal(size=(3, 4))
        out = rng.normal(size=(3, 4))
        table = EmbeddingTable(inp.copy(), out.copy())
        loss, d_center, d_pos, d_negs = sgns_loss_and_grads(inp[0], out[1], out[[1, 2]])
        sgns_step(0, 1, [1, 2], table, learning_rate=0.1)
        expected_row1 = out[1] - 0.1 * (d_pos + d_negs[0])
        assert np.allclose(table.output_vectors[1], expected_row1, atol=1e-15)

    def test_extreme_dots_stay_finite(self):
        inp = np.full((2, 3), 100.0)
        out = np.full((2, 3), 100.0)
        table = EmbeddingTable(inp, out)
        loss = sgns_step(0, 1, [0], table, learning_rate=0.01)
        assert np.isfinite(loss)
        assert np.isfinite(table.input_vectors).all()
        assert np.isfinite(table.output_vectors).all()


def small_synthetic(seed=21, n_travelers=300):
    config = SyntheticConfig(
        n_listings=30, n_clusters=3, n_travelers=n_travelers, mean_session_len=8,
        booking_base_rate=0.3, seed=seed,
    )
    corpus, truth = generate_synthetic(config)
    vocab = build_vocabulary(corpus, min_count=1)
    return corpus, truth, vocab


class TestTrainEmbeddings:
    def test_rejects_bad_config(self):
        with pytest.raises(ConfigError, match="epochs"):
            SkipgramConfig(epochs=0)
        with pytest.raises(ConfigError, match="learning rates"):
            SkipgramConfig(learning_rate_initial=0.001, learning_rate_final=0.01)

    def test_deterministic(self):
        corpus, _, vocab = small_synthetic()
        config = SkipgramConfig(dim=8, epochs=2, seed=9)
        t1, l1 = train_embeddings(corpus, vocab, config)
        t2, l2 = train_embeddings(corpus, vocab, config)
        assert np.array_equal(t1.input_vectors, t2.input_vectors)
        assert np.array_equal(t1.output_vectors, t2.output_vectors)
        assert l1 == l2

    def test_loss_non_increasing_within_tolerance(self):
        corpus, _, vocab = small_synthetic()
        _, losses = train_embeddings(corpus, vocab, SkipgramConfig(dim=8, epochs=5, seed=2))
        inversions = [
            (b - a) / a for a, b in zip(losses, losses[1:]) if b > a
        ]
        assert len(inversions) <= 1
        assert all(x <= 0.02 for x in inversions)

    def test_all_entries_finite(self):
        corpus, _, vocab = small_synthetic()
        table, _ = train_embeddings(corpus, vocab, SkipgramConfig(dim=8, epochs=1, seed=1))
        assert np.isfinite(table.input_vectors).all()
        assert np.isfinite(table.output_vectors).all()

    def test_cluster_structure_emerges(self):
        # a 30-listing vocabulary makes every listing "frequent", so lift the
        # subsample threshold out of the way and let the windows do the work
        corpus, truth, vocab = small_synthetic(n_travelers=500)
        table, _ = train_embeddings(
            corpus, vocab, SkipgramConfig(dim=8, epochs=5, seed=4, subsample_threshold=0.1)
        )
        cluster = np.array([truth.cluster_of_listing[k] for k in vocab.index_to_key])
        intra, inter, _ = embedding_cluster_quality(table, cluster)
        assert intra > inter + 0.2

    def test_softmax_probability_favors_coviewed_pairs(self):
        # small-V oracle over the full softmax the sigmoid pairs approximate:
        # p(ctx | center) = exp(out_ctx . in_center) / sum_x exp(out_x . in_center)
        corpus, truth, vocab = small_synthetic(n_travelers=500)
        table, _ = train_embeddings(
            corpus, vocab, SkipgramConfig(dim=8, epochs=5, seed=4, subsample_threshold=0.1)
        )

        def softmax_prob(center, ctx):
            logits = table.output_vectors @ table.input_vectors[center]
            logits -= logits.max()
            probs = np.exp(logits) / np.exp(logits).sum()
            assert probs.sum() == pytest.approx(1.0, abs=1e-12)
            return probs[ctx]

        cluster = np.array([truth.cluster_of_listing[k] for k in vocab.index_to_key])
        same = [softmax_prob(0, j) for j in range(len(vocab)) if j != 0 and cluster[j] == cluster[0]]
        other = [softmax_prob(0, j) for j in range(len(vocab)) if cluster[j] != cluster[0]]
        assert np.mean(same) > np.mean(other)

    def test_smoothed_negative_flag_changes_sampling(self):
        corpus, _, vocab = small_synthetic()
        base = SkipgramConfig(dim=8, epochs=1, seed=3)
        smoothed = SkipgramConfig(dim=8, epochs=1, seed=3, smoothed_negatives=True)
        t1, _ = train_embeddings(corpus, vocab, base)
        t2, _ = train_embeddings(corpus, vocab, smoothed)
        assert not np.array_equal(t1.output_vectors, t2.output_vectors)


class TestNearestNeighbors:
    def test_duplicate_row_ranks_first_with_unit_cosine(self):
        vecs = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.5, 0.5]])
        table = EmbeddingTable(vecs, np.zeros_like(vecs))
        result = nearest_neighbors(table, 0, 2)
        assert result[0] == (2, pytest.approx(1.0))

    def test_orthogonal_rows_cosine_zero(self):
        vecs = np.eye(3)
        table = EmbeddingTable(vecs, np.zeros_like(vecs))
        for idx, cos in nearest_neighbors(table, 0, 2):
            assert cos == pytest.approx(0.0)

    def test_matches_brute_force_scan(self, rng):
        vecs = rng.normal(size=(100, 6))
        table = EmbeddingTable(vecs, np.zeros_like(vecs))
        query = 17
        sims = []
        for i in range(100):
            if i == query:
                continue
            cos = vecs[i] @ vecs[query] / (np.linalg.norm(vecs[i]) * np.linalg.norm(vecs[query]))
            sims.append((i, cos))
        sims.sort(key=lambda pair: (-pair[1], pair[0]))
        got = nearest_neighbors(table, query, 10)
        for (gi, gc), (ei, ec) in zip(got, sims[:10]):
            assert gi == ei
            assert gc == pytest.approx(ec, abs=1e-12)

    def test_out_of_range_index(self):
        table = EmbeddingTable(np.eye(3), np.zeros((3, 3)))
        with pytest.raises(IndexError):
            nearest_neighbors(table, 5, 1)
        with pytest.raises(ValueError):
            nearest_neighbors(table, 0, 3)


class TestPersistence:
    def test_text_round_trip_is_exact(self, tmp_path, rng):
        vecs = rng.normal(size=(7, 5))
        table = EmbeddingTable(vecs, np.zeros_like(vecs))
        keys = [f"L{i}" for i in range(7)]
        path = tmp_path / "emb.txt"
        save_embeddings_text(table, keys, path)
        loaded_keys, loaded = load_embeddings_text(path)
        assert loaded_keys == keys
        assert np.array_equal(loaded, vecs)

    def test_text_header_and_comments(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("2 3\nA 1.0 2.0 3.0\n#coldstart\nB 0.5 0.5 0.5\n")
        keys, vecs = load_embeddings_text(path)
        assert keys == ["A", "B"]
        assert vecs.shape == (2, 3)

    def test_text_bad_row_width(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("1 3\nA 1.0 2.0\n")
        with pytest.raises(ParseError, match="line 2"):
            load_embeddings_text(path)

    def test_binary_round_trip_is_exact(self, tmp_path, rng):
        table = EmbeddingTable(rng.normal(size=(6, 4)), rng.normal(size=(6, 4)))
        path = tmp_path / "emb.s2re"
        save_embeddings_binary(table, path)
        loaded = load_embeddings_binary(path)
        assert np.array_equal(loaded.input_vectors, table.input_vectors)
        assert np.array_equal(loaded.output_vectors, table.output_vectors)

    def test_binary_magic_checked(self, tmp_path):
        path = tmp_path / "bad.s2re"
        path.write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(ParseError, match="magic"):
            load_embeddings_binary(path)
