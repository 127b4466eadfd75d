import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sembed.datasets import LabeledText, ScoredPair
from sembed.errors import DimensionError, InputError, UndefinedCorrelationError
from sembed.evaluation import (
    EncoderEmbedder,
    EvalReport,
    KnnConfig,
    StaticEmbedder,
    average_ranks,
    classify_dataset,
    embedding_similarity_score,
    knn_accuracy,
    knn_predict,
    minkowski,
    pairwise_cosine_report,
    select_k,
    spearman,
)
from sembed.losses import cosine
from sembed.static_embed import WordVectorTable

from oracles import knn_bruteforce, minkowski_direct, ranks_bruteforce, select_k_bruteforce, spearman_bruteforce


class LookupEmbedder:
    """Maps each text to a fixed vector."""

    def __init__(self, table):
        self.table = table

    def __call__(self, texts):
        return np.array([self.table[t] for t in texts], dtype=np.float64)


class TestSpearman:
    def test_identity(self):
        assert spearman([1, 2, 3], [1, 2, 3]) == 1.0

    def test_reversal(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == -1.0

    def test_ties_against_oracle(self):
        x, y = [1, 2, 2, 4], [1, 3, 2, 4]
        np.testing.assert_array_equal(average_ranks(x), ranks_bruteforce(x))
        assert abs(spearman(x, y) - spearman_bruteforce(x, y)) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            spearman([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(InputError):
            spearman([1], [1])

    def test_zero_variance(self):
        with pytest.raises(UndefinedCorrelationError):
            spearman([1, 1, 1], [1, 2, 3])

    def test_random_against_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(2, 30))
            x = rng.integers(0, 6, size=n).astype(float)  # many ties
            y = rng.normal(size=n)
            if len(set(x)) == 1:
                continue
            assert abs(spearman(x, y) - spearman_bruteforce(x.tolist(), y.tolist())) < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(-100, 100), st.integers(-100, 100)), min_size=3, max_size=20))
    def test_monotone_transform_invariance(self, pairs):
        # integer inputs keep the transforms exact, so no distinct values collapse
        x = np.array([p[0] for p in pairs], dtype=float)
        y = np.array([p[1] for p in pairs], dtype=float)
        if len(set(x)) < 2 or len(set(y)) < 2:
            return
        base = spearman(x, y)
        assert abs(spearman(3 * x + 7, y**3) - base) < 1e-12


class TestEmbeddingSimilarity:
    def test_monotone_cosines(self):
        angles = np.linspace(0.1, 1.4, 6)
        table, pairs = {}, []
        for i, theta in enumerate(angles):
            table[f"a{i}"] = [1.0, 0.0]
            table[f"b{i}"] = [np.cos(theta), np.sin(theta)]
            pairs.append(ScoredPair(f"a{i}", f"b{i}", 5.0 - 0.8 * i))
        assert embedding_similarity_score(LookupEmbedder(table), pairs) == 1.0

    def test_opposite_order(self):
        table = {"a": [1.0, 0.0], "b": [1.0, 0.1], "c": [1.0, 0.0], "d": [0.0, 1.0]}
        pairs = [ScoredPair("a", "b", 0.0), ScoredPair("c", "d", 5.0)]
        assert embedding_similarity_score(LookupEmbedder(table), pairs) == -1.0

    def test_random_embedder_near_zero(self):
        rng = np.random.default_rng(11)
        texts = [f"s{i}" for i in range(2000)]
        table = {t: rng.normal(size=8) for t in texts}
        gold = rng.permutation(np.repeat(np.arange(0, 5.5, 0.5), 91)[:1000])
        pairs = [ScoredPair(texts[2 * i], texts[2 * i + 1], float(g)) for i, g in enumerate(gold)]
        assert abs(embedding_similarity_score(LookupEmbedder(table), pairs)) < 0.1

    def test_needs_two_pairs(self):
        with pytest.raises(InputError):
            embedding_similarity_score(LookupEmbedder({"a": [1.0]}), [ScoredPair("a", "a", 1.0)])


class TestMinkowski:
    def test_zero(self):
        assert minkowski([1.0, 2.0], [1.0, 2.0], 3) == 0.0

    def test_specializations(self):
        assert minkowski([0, 0], [1, 1], 1) == 2.0
        assert minkowski([0, 0], [1, 1], 2) == np.sqrt(2)

    def test_p3_direct(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a, b = rng.normal(size=6), rng.normal(size=6)
            assert abs(minkowski(a, b, 3) - minkowski_direct(a, b, 3)) < 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(InputError):
            minkowski([1, 2], [1, 2, 3])
        assert issubclass(DimensionError, InputError)


class TestKnn:
    def test_self_match(self):
        x = np.array([[0.0, 0.0], [5.0, 5.0]])
        assert knn_predict(x, ["a", "b"], [5.0, 5.0], 1) == "b"

    def test_hand_sorted_fixture(self):
        train = np.array([[1.0, 0], [-1, 0], [0, 1], [0.5, 0], [0, -0.5]])
        labels = ["A", "A", "A", "B", "B"]
        assert knn_predict(train, labels, [0.0, 0.0], 3) == "B"

    def test_uniform_labels(self):
        x = np.random.default_rng(2).normal(size=(9, 3))
        for k in (1, 5, 9):
            assert knn_predict(x, ["z"] * 9, [0, 0, 0], k) == "z"

    def test_distance_tie_prefers_lower_index(self):
        train = np.array([[1.0], [-1.0]])
        assert knn_predict(train, ["left", "right"], [0.0], 1) == "left"

    def test_vote_tie_prefers_nearest(self):
        train = np.array([[3.0], [1.0], [2.0], [4.0]])
        assert knn_predict(train, ["x", "y", "x", "y"], [0.0], 4) == "y"

    def test_empty_training_set(self):
        with pytest.raises(InputError):
            knn_predict(np.zeros((0, 2)), [], [0, 0], 1)

    def test_k_too_large(self):
        with pytest.raises(InputError):
            knn_predict(np.zeros((2, 2)), ["a", "b"], [0, 0], 3)

    def test_against_oracle(self):
        rng = np.random.default_rng(3)
        for trial in range(100):
            n = int(rng.integers(3, 25))
            train = rng.integers(-3, 4, size=(n, 2)).astype(float)  # grid points force distance ties
            labels = rng.integers(0, 3, size=n).tolist()
            query = rng.integers(-3, 4, size=2).astype(float)
            k = int(rng.integers(1, n + 1))
            p = [1.0, 2.0, 3.0][trial % 3]
            assert knn_predict(train, labels, query, k, p) == knn_bruteforce(train.tolist(), labels, query.tolist(), k, p)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(4)
        train, query = rng.normal(size=(20, 4)), rng.normal(size=4)
        labels = rng.integers(0, 2, size=20).tolist()
        for k in (1, 3, 7):
            assert knn_predict(train, labels, query, k) == knn_predict(train * 3.7, labels, query * 3.7, k)


class TestSelectK:
    def test_validation_equals_train(self):
        x = np.random.default_rng(5).normal(size=(10, 2))
        y = list("ababababab")
        assert select_k(x, y, x, y, KnnConfig(k_grid=(1, 3))) == (1, 1.0)

    def test_tie_prefers_smaller_k(self):
        x = np.random.default_rng(6).normal(size=(8, 2))
        assert select_k(x, ["a"] * 8, x[:3], ["a"] * 3, KnnConfig(k_grid=(5, 3)))[0] == 3

    def test_grid_beyond_train_size_is_skipped(self):
        x = np.eye(3)
        assert select_k(x, ["a", "b", "c"], x, ["a", "b", "c"], KnnConfig(k_grid=(1, 31)))[0] == 1

    def test_blobs_against_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(4, 30))
            y = rng.integers(0, 2, size=n)
            x = rng.normal(size=(n, 2)) + y[:, None] * 1.5
            vy = rng.integers(0, 2, size=8)
            vx = rng.normal(size=(8, 2)) + vy[:, None] * 1.5
            cfg = KnnConfig(k_grid=(1, 3, 5, 7, 9))
            got = select_k(x, y.tolist(), vx, vy.tolist(), cfg)
            want = select_k_bruteforce(x.tolist(), y.tolist(), vx.tolist(), vy.tolist(), cfg.k_grid, cfg.p)
            assert got == want

    def test_config_validation(self):
        with pytest.raises(InputError):
            KnnConfig(p=0.5)
        with pytest.raises(InputError):
            KnnConfig(k_grid=(0,))


class TestClassify:
    @pytest.fixture
    def labeled(self):
        rng = np.random.default_rng(8)
        centers = {"pos": [4.0, 0.0], "neg": [-4.0, 0.0], "neu": [0.0, 4.0]}
        records, table = [], {}
        for i in range(300):
            label = list(centers)[i % 3]
            text = f"t{i}"
            table[text] = np.array(centers[label]) + rng.normal(size=2)
            records.append(LabeledText(text, label))
        return records, LookupEmbedder(table)

    def test_train_equals_test(self, labeled):
        records, emb = labeled
        assert classify_dataset(emb, records, records, records) == (1.0, 1)

    def test_grid_of_one(self, labeled):
        records, emb = labeled
        assert classify_dataset(emb, records, records[:10], records, KnnConfig(k_grid=(1,))).accuracy == 1.0

    def test_permuted_labels_near_chance(self, labeled):
        records, emb = labeled
        rng = np.random.default_rng(9)
        labels = rng.permutation([r.label for r in records])
        shuffled = [LabeledText(r.text, str(lab)) for r, lab in zip(records, labels)]
        result = classify_dataset(emb, shuffled[:180], shuffled[180:240], shuffled[240:])
        assert 0.2 <= result.accuracy <= 0.47

    def test_deterministic(self, labeled):
        records, emb = labeled
        splits = (records[:180], records[180:240], records[240:])
        assert classify_dataset(emb, *splits) == classify_dataset(emb, *splits)

    def test_empty_split(self, labeled):
        records, emb = labeled
        with pytest.raises(InputError):
            classify_dataset(emb, records, [], records)

    def test_knn_accuracy(self):
        x = np.array([[0.0], [1.0], [10.0]])
        assert knn_accuracy(x, ["a", "a", "b"], np.array([[0.2], [9.0]]), ["a", "b"], 1) == 1.0


class TestReports:
    def test_pairwise_rows(self):
        rng = np.random.default_rng(10)
        table = {f"s{i}": rng.normal(size=3) for i in range(20)}
        pairs = [(f"s{2 * i}", f"s{2 * i + 1}") for i in range(9)] + [("s0", "s0")]
        rows = pairwise_cosine_report(LookupEmbedder(table), pairs)
        assert [(r.text1, r.text2) for r in rows] == pairs
        assert rows[-1].cosine == 1.0
        for r in rows:
            assert r.cosine == cosine(table[r.text1], table[r.text2])

    def test_report_ranges(self):
        with pytest.raises(InputError):
            EvalReport(accuracy=1.5)
        with pytest.raises(InputError):
            EvalReport(embedding_similarity=-1.01)

    def test_static_embedder(self):
        table = WordVectorTable(2, {"a": np.array([1.0, 0.0])})
        np.testing.assert_array_equal(StaticEmbedder(table)(["a", "zz"]), [[1.0, 0.0], [0.0, 0.0]])

    def test_encoder_embedder_batches_consistently(self, tiny_model):
        texts = ["the cat", "a dog ran", "park", "cats and dogs are friends", "mat"]
        whole = EncoderEmbedder(tiny_model, "mean", batch_size=64)(texts)
        chunked = EncoderEmbedder(tiny_model, "mean", batch_size=2)(texts)
        np.testing.assert_allclose(whole, chunked, rtol=0, atol=1e-12)
