import numpy as np
import pytest

from mmret import (
    DenseIndex,
    Passage,
    PassageStore,
    StubProvider,
    build_dense_index,
    dense_search,
    hashed_vector,
    load_dense_index,
    save_dense_index,
    score,
)


def brute_force_top_k(index: DenseIndex, q: np.ndarray, k: int):
    """Independent reference: float64 dot per row, sort by (-score, id)."""
    sims = [
        (pid, float(np.dot(row.astype(np.float64), q.astype(np.float64))))
        for pid, row in zip(index.ids, index.vectors)
    ]
    sims.sort(key=lambda item: (-item[1], item[0]))
    return sims[:k]


class TestHashedVector:
    def test_unit_norm_and_determinism(self):
        v = hashed_vector(["cat", "dog"], 32, seed=0)
        assert v.dtype == np.float32
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_array_equal(v, hashed_vector(["cat", "dog"], 32, seed=0))

    def test_seed_changes_embedding(self):
        a = hashed_vector(["cat"], 32, seed=0)
        b = hashed_vector(["cat"], 32, seed=1)
        assert not np.array_equal(a, b)

    def test_empty_token_list_gives_zero_vector(self):
        assert not hashed_vector([], 16, seed=0).any()


class TestScore:
    def test_accumulates_in_float64(self):
        rng = np.random.default_rng(42)
        q = rng.normal(size=300).astype(np.float32)
        p = rng.normal(size=300).astype(np.float32)
        expected = float(np.dot(q.astype(np.float64), p.astype(np.float64)))
        assert score(q, p) == expected

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            score(np.ones(4, dtype=np.float32), np.ones(5, dtype=np.float32))


class TestDenseIndex:
    def test_build_embeds_in_store_order(self):
        store = PassageStore([Passage("b", "beta"), Passage("a", "alpha")])
        provider = StubProvider(dim=16)
        index = build_dense_index(provider, store)
        assert index.ids == ["b", "a"]
        np.testing.assert_array_equal(index.vectors[1], provider.embed_passage("alpha"))

    def test_search_matches_brute_force(self):
        # Random normal scores have no near-ties, so the ordering must agree;
        # scores may differ from the oracle only by reduction-order rounding.
        rng = np.random.default_rng(42)
        for _ in range(20):
            n = int(rng.integers(3, 60))
            dim = int(rng.integers(2, 12))
            vectors = rng.normal(size=(n, dim)).astype(np.float32)
            index = DenseIndex(vectors, [f"p{i:03d}" for i in range(n)])
            q = rng.normal(size=dim).astype(np.float32)
            k = int(rng.integers(1, n + 1))
            ranked = dense_search(index, q, k)
            expected = brute_force_top_k(index, q, k)
            assert ranked.ids() == [pid for pid, _ in expected]
            np.testing.assert_allclose(
                [s for _, s in ranked.entries], [s for _, s in expected], atol=1e-9
            )

    def test_ties_broken_by_ascending_id(self):
        vectors = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], dtype=np.float32)
        index = DenseIndex(vectors, ["z9", "a1", "m5"])
        ranked = dense_search(index, np.array([1.0, 0.0], dtype=np.float32), 3)
        assert ranked.ids() == ["a1", "z9", "m5"]

    def test_sharded_equals_sequential(self):
        rng = np.random.default_rng(42)
        vectors = rng.normal(size=(97, 8)).astype(np.float32)
        index = DenseIndex(vectors, [f"p{i:03d}" for i in range(97)])
        q = rng.normal(size=8).astype(np.float32)
        sequential = dense_search(index, q, 10, workers=1)
        for workers in (2, 3, 8, 16):
            assert dense_search(index, q, 10, workers=workers).entries == sequential.entries

    def test_query_dimension_checked(self):
        index = DenseIndex(np.ones((2, 4), dtype=np.float32), ["a", "b"])
        with pytest.raises(ValueError):
            dense_search(index, np.ones(3, dtype=np.float32), 1)

    def test_non_finite_embedding_rejected_by_name(self):
        class BrokenProvider:
            dim = 4

            def embed_query(self, question, image_ref):
                return np.zeros(4, dtype=np.float32)

            def embed_passage(self, text):
                v = np.zeros(4, dtype=np.float32)
                v[0] = np.nan
                return v

        store = PassageStore([Passage("bad-passage", "text")])
        with pytest.raises(ValueError, match="bad-passage"):
            build_dense_index(BrokenProvider(), store)

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(42)
        vectors = rng.normal(size=(30, 6)).astype(np.float32)
        index = DenseIndex(vectors, [f"p{i:02d}" for i in range(30)])
        path = tmp_path / "dense.npz"
        save_dense_index(index, path)
        reloaded = load_dense_index(path)
        q = rng.normal(size=6).astype(np.float32)
        assert dense_search(reloaded, q, 7).entries == dense_search(index, q, 7).entries

    def test_non_index_file_rejected(self, tmp_path):
        path = tmp_path / "other.npz"
        np.savez(path, format="something-else", data=np.ones(3))
        with pytest.raises(ValueError):
            load_dense_index(path)


class TestStubProvider:
    def test_query_and_passage_sides_differ(self):
        provider = StubProvider(dim=32, seed=0)
        q = provider.embed_query("seven feet", "img-cat-01")
        p = provider.embed_passage("seven feet")
        assert q.shape == p.shape == (32,)
        assert not np.array_equal(q, p)

    def test_deterministic(self):
        a = StubProvider(dim=32, seed=3).embed_passage("hello world")
        b = StubProvider(dim=32, seed=3).embed_passage("hello world")
        np.testing.assert_array_equal(a, b)
