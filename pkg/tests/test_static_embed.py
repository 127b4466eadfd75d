from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sembed.errors import ParseError
from sembed.static_embed import (
    WordVectorTable,
    char_ngrams,
    fnv1a_64,
    load_buckets,
    load_vectors,
    save_buckets,
    save_vectors,
    sentence_embed_avg,
    word_vector,
)

from oracles import fnv1a_64_reference

DATA = Path(__file__).parent / "data"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestHash:
    @pytest.mark.parametrize(
        "text,expected",
        [("", 0xCBF29CE484222325), ("a", 0xAF63DC4C8601EC8C), ("foobar", 0x85944171F73967E8)],
    )
    def test_published_vectors(self, text, expected):
        assert fnv1a_64(text) == expected

    def test_matches_reference_on_unicode(self):
        for word in ("<मराठी>", "<ab", "straße", "日本語"):
            assert fnv1a_64(word) == fnv1a_64_reference(word.encode("utf-8"))


class TestNgrams:
    def test_boundary_markers(self):
        assert char_ngrams("ab", 3, 3) == ["<ab", "ab>"]

    def test_all_lengths(self):
        grams = char_ngrams("abcd", 3, 6)
        assert grams == ["<ab", "abc", "bcd", "cd>", "<abc", "abcd", "bcd>", "<abcd", "abcd>", "<abcd>"]


class TestLoad:
    def test_simple(self, tmp_path):
        table = load_vectors(write(tmp_path, "v.txt", "2 3\na 1 0 0\nb 0 1 0\n"))
        assert len(table) == 2 and table.dim == 3
        np.testing.assert_array_equal(table.word_vectors["b"], [0, 1, 0])

    def test_wrong_value_count_names_line(self, tmp_path):
        path = write(tmp_path, "v.txt", "2 3\na 1 0 0\nb 0 1\n")
        with pytest.raises(ParseError) as exc:
            load_vectors(path)
        assert exc.value.line == 3
        assert ":3:" in str(exc.value)

    @pytest.mark.parametrize("header", ["2\n", "x 3\n", "2 0\n", ""])
    def test_bad_header(self, tmp_path, header):
        with pytest.raises(ParseError) as exc:
            load_vectors(write(tmp_path, "v.txt", header + "a 1 0 0\n"))
        assert exc.value.line == 1

    def test_non_numeric(self, tmp_path):
        with pytest.raises(ParseError) as exc:
            load_vectors(write(tmp_path, "v.txt", "1 2\na 1 zero\n"))
        assert exc.value.line == 2

    def test_count_mismatch(self, tmp_path):
        with pytest.raises(ParseError):
            load_vectors(write(tmp_path, "v.txt", "3 1\na 1\nb 2\n"))

    def test_duplicate_first_wins(self, tmp_path):
        table = load_vectors(write(tmp_path, "v.txt", "2 1\na 1\na 2\n"))
        np.testing.assert_array_equal(table.word_vectors["a"], [1.0])

    def test_golden_fixture_norms(self):
        table = load_vectors(DATA / "wordvecs_1000.txt")
        golden = dict(line.split() for line in (DATA / "wordvecs_1000.norms").read_text().splitlines())
        assert len(table) == 1000 == len(golden)
        for word, norm in golden.items():
            assert abs(np.linalg.norm(table.word_vectors[word]) - float(norm)) < 1e-12

    def test_golden_fixture_round_trip(self, tmp_path):
        table = load_vectors(DATA / "wordvecs_1000.txt")
        save_vectors(table, tmp_path / "copy.txt")
        assert (tmp_path / "copy.txt").read_bytes() == (DATA / "wordvecs_1000.txt").read_bytes()
        again = load_vectors(tmp_path / "copy.txt")
        for word, vec in table.word_vectors.items():
            assert vec.tobytes() == again.word_vectors[word].tobytes()

    def test_sparse_bucket_file(self, tmp_path):
        matrix = load_buckets(write(tmp_path, "b.txt", "4 2\n2 1.5 -1\n"))
        np.testing.assert_array_equal(matrix, [[0, 0], [0, 0], [1.5, -1], [0, 0]])

    def test_bucket_errors(self, tmp_path):
        with pytest.raises(ParseError):
            load_buckets(write(tmp_path, "b.txt", "2 1\nx 1\n"))
        with pytest.raises(ParseError):
            load_buckets(write(tmp_path, "b.txt", "2 1\n5 1\n"))
        with pytest.raises(ParseError):
            load_buckets(write(tmp_path, "b.txt", "2 3\n0 1 2 3\n"), dim=2)

    def test_bucket_round_trip(self, tmp_path):
        m = np.random.default_rng(0).normal(size=(5, 3))
        save_buckets(m, tmp_path / "b.txt")
        np.testing.assert_array_equal(load_buckets(tmp_path / "b.txt"), m)


class TestWordVector:
    def test_known_word(self):
        table = WordVectorTable(2, {"a": np.array([1.0, 2.0])})
        np.testing.assert_array_equal(word_vector(table, "a"), [1.0, 2.0])

    def test_oov_without_buckets(self):
        np.testing.assert_array_equal(word_vector(WordVectorTable(3), "zzz"), np.zeros(3))

    def test_oov_hashed_by_hand(self):
        buckets = np.arange(14.0).reshape(7, 2)
        table = WordVectorTable(2, {}, buckets, ngram_min=3, ngram_max=3)
        # FNV-1a-64("<ab") = 0x7011c61830176024 -> 1 (mod 7); ("ab>") = 0xe71fed190541d6bc -> 6
        assert 0x7011C61830176024 % 7 == 1 and 0xE71FED190541D6BC % 7 == 6
        np.testing.assert_array_equal(word_vector(table, "ab"), (buckets[1] + buckets[6]) / 2)


COLORS = WordVectorTable(
    3,
    {
        "red": np.array([1.0, 0.0, 2.0]),
        "green": np.array([0.0, 3.0, 1.0]),
        "blue": np.array([2.0, 3.0, 0.0]),
        "anti": np.array([-1.0, 0.0, -2.0]),
    },
)


class TestSentenceEmbed:
    @pytest.fixture
    def table(self):
        return COLORS

    def test_single(self, table):
        np.testing.assert_array_equal(sentence_embed_avg(table, "Red"), [1.0, 0.0, 2.0])

    def test_opposites_cancel(self, table):
        np.testing.assert_array_equal(sentence_embed_avg(table, "red anti"), [0.0, 0.0, 0.0])

    def test_three_words_by_hand(self, table):
        np.testing.assert_allclose(sentence_embed_avg(table, "red green blue"), [1.0, 2.0, 1.0], atol=1e-15)

    def test_oov_excluded_from_denominator(self, table):
        np.testing.assert_array_equal(sentence_embed_avg(table, "red unknown ."), [1.0, 0.0, 2.0])

    def test_empty(self, table):
        np.testing.assert_array_equal(sentence_embed_avg(table, ""), np.zeros(3))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sampled_from(["red", "green", "blue", "anti", "oov"]), min_size=1, max_size=8), st.randoms())
    def test_permutation_invariant_and_bounded(self, words, rnd):
        table = COLORS
        base = sentence_embed_avg(table, " ".join(words))
        shuffled = list(words)
        rnd.shuffle(shuffled)
        np.testing.assert_allclose(sentence_embed_avg(table, " ".join(shuffled)), base, atol=1e-12)
        norms = [np.linalg.norm(table.word_vectors[w]) for w in words if w in table]
        assert np.linalg.norm(base) <= max(norms, default=0.0) + 1e-12
