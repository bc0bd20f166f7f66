import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairorder.core import (
    Ordering,
    PairScoreMatrix,
    Paragraph,
    ShuffleRecord,
    apply_ordering,
    derive_seed,
    gold_ordering,
    matrix_from_ordering,
    shuffle,
)


def para(n, pid="p0"):
    return Paragraph(pid, [f"sentence {k}" for k in range(n)])


class TestParagraph:
    def test_rejects_empty_sentence(self):
        with pytest.raises(ValueError):
            Paragraph("p", ["ok", "   "])

    def test_rejects_no_sentences(self):
        with pytest.raises(ValueError):
            Paragraph("p", [])

    def test_n(self):
        assert para(4).n == 4


class TestShuffle:
    def test_n1_is_identity(self):
        shuffled, rec = shuffle(para(1), seed=99)
        assert rec.perm == (0,)
        assert shuffled == list(para(1).sentences)

    def test_same_seed_same_record(self):
        a = shuffle(para(7), seed=5)
        b = shuffle(para(7), seed=5)
        assert a == b

    def test_different_seeds_differ_somewhere(self):
        # derived: run the seeded shuffler over 100 paragraphs and compare
        differing = 0
        for k in range(100):
            p = para(5, pid=f"p{k}")
            _, r1 = shuffle(p, seed=1)
            _, r2 = shuffle(p, seed=2)
            if r1.perm != r2.perm:
                differing += 1
        assert differing >= 1

    def test_shuffled_list_matches_perm(self):
        p = para(6)
        shuffled, rec = shuffle(p, seed=3)
        assert shuffled == [p.sentences[g] for g in rec.perm]


class TestGoldOrdering:
    def test_identity_perm(self):
        rec = ShuffleRecord("p", (0, 1, 2, 3), seed=0)
        assert gold_ordering(rec).positions == (0, 1, 2, 3)

    def test_known_perm_against_enumeration(self):
        # oracle: try every candidate ordering and keep the one that restores gold
        p = para(3)
        rec = ShuffleRecord(p.id, (2, 0, 1), seed=0)
        shuffled = [p.sentences[g] for g in rec.perm]
        winners = [
            cand
            for cand in itertools.permutations(range(3))
            if apply_ordering(Ordering(cand), shuffled) == list(p.sentences)
        ]
        assert winners == [(1, 2, 0)]
        assert gold_ordering(rec).positions == (1, 2, 0)

    def test_round_trip_1000_cases(self):
        rng = np.random.default_rng(0)
        for k in range(1000):
            n = int(rng.integers(1, 9))
            p = para(n, pid=f"p{k}")
            shuffled, rec = shuffle(p, seed=int(rng.integers(0, 2**63 - 1)))
            assert apply_ordering(gold_ordering(rec), shuffled) == list(p.sentences)

    @given(st.integers(1, 10), st.integers(0, 2**32))
    def test_round_trip_property(self, n, seed):
        p = para(n)
        shuffled, rec = shuffle(p, seed=seed)
        assert apply_ordering(gold_ordering(rec), shuffled) == list(p.sentences)


class TestOrdering:
    @pytest.mark.parametrize("bad", [(0, 0), (1, 2), (0, 2), (-1, 0), ()])
    def test_rejects_non_bijection(self, bad):
        with pytest.raises(ValueError):
            Ordering(bad)

    def test_apply_length_mismatch(self):
        with pytest.raises(ValueError):
            apply_ordering(Ordering((0, 1)), ["a", "b", "c"])


class TestPairScoreMatrix:
    def test_serialization_round_trips_bit_exactly(self):
        rng = np.random.default_rng(1)
        p = rng.uniform(size=(6, 6))
        m = PairScoreMatrix("p0", p)
        m2 = PairScoreMatrix.loads(m.dumps())
        assert m2.paragraph_id == "p0"
        off = ~np.eye(6, dtype=bool)
        assert np.array_equal(m.p[off], m2.p[off])
        assert np.all(np.isnan(np.diag(m2.p)))

    def test_rejects_out_of_range(self):
        p = np.full((3, 3), 0.5)
        p[0, 1] = 1.5
        with pytest.raises(ValueError):
            PairScoreMatrix("p", p)

    def test_diagonal_read_traps(self):
        m = PairScoreMatrix("p", np.full((3, 3), 0.5))
        with pytest.raises(ValueError):
            m.get(1, 1)
        assert m.get(0, 1) == 0.5

    def test_matrix_is_immutable(self):
        m = PairScoreMatrix("p", np.full((3, 3), 0.5))
        with pytest.raises(ValueError):
            m.p[0, 1] = 0.9

    def test_json_shape_validation(self):
        with pytest.raises(ValueError):
            PairScoreMatrix.from_json_dict({"paragraph_id": "p", "n": 3, "p": [[None, 1.0], [0.0, None]]})

    def test_matrix_from_ordering(self):
        m = matrix_from_ordering("p", Ordering((2, 0, 1)))
        # sentence 2 ranks first: precedes both others
        assert m.get(2, 0) == 1.0 and m.get(2, 1) == 1.0
        assert m.get(0, 2) == 0.0 and m.get(0, 1) == 1.0


class TestDeriveSeed:
    def test_stable_and_tag_sensitive(self):
        assert derive_seed(7, "shuffle") == derive_seed(7, "shuffle")
        assert derive_seed(7, "shuffle") != derive_seed(7, "init")
        assert derive_seed(7, "shuffle") != derive_seed(8, "shuffle")

    def test_fits_in_63_bits(self):
        assert 0 <= derive_seed(2**62, "x") < 2**63
