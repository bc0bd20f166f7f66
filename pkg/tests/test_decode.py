import math

import numpy as np
import pytest

import bruteforce
from pairorder import _kernels_nb, _kernels_np
from pairorder.core import Ordering, PairScoreMatrix, matrix_from_ordering
from pairorder.decode import (
    CountingMatrix,
    DecodeConfig,
    beam_decode,
    beam_decode_scored,
    decode_corpus,
    oracle_decode,
    score_permutation,
    topo_decode,
)

BACKENDS = [_kernels_np, _kernels_nb]


def random_matrix(rng, n, pid="p"):
    return PairScoreMatrix(pid, rng.uniform(size=(n, n)))


class TestDecodeConfig:
    def test_defaults(self):
        cfg = DecodeConfig()
        assert cfg.beam_width == 64
        assert cfg.strategy == "adjacent"
        assert cfg.score_space == "probability"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"strategy": "greedy"},
            {"beam_width": 0},
            {"score_space": "logit"},
            {"epsilon": 0.0},
        ],
    )
    def test_rejects_bad_config(self, kwargs):
        with pytest.raises(ValueError):
            DecodeConfig(**kwargs)


class TestBeamDecode:
    @pytest.mark.parametrize("strategy", ["adjacent", "all-pairs"])
    def test_noise_free_recovers_gold(self, strategy):
        # noise-free extensions tie (any later-in-gold sentence scores 1, not
        # just the next one), so recovery is guaranteed only once the beam can
        # hold all C(n, n//2) tied correct prefixes
        rng = np.random.default_rng(0)
        for n in range(2, 8):
            gold = Ordering(rng.permutation(n))
            m = matrix_from_ordering("p", gold)
            width = math.comb(n, n // 2)
            cfg = DecodeConfig(strategy=strategy, beam_width=width)
            assert beam_decode(m, cfg) == gold

    def test_narrow_beam_may_drop_gold_among_ties(self):
        # width 1 keeps the lex-smallest of the tied extensions, which skips
        # rank-1 here; a tie-capable width recovers the same matrix
        gold = Ordering((2, 0, 1))
        m = matrix_from_ordering("p", gold)
        assert beam_decode(m, DecodeConfig(beam_width=1)) != gold
        assert beam_decode(m, DecodeConfig(beam_width=3)) == gold

    def test_n1_identity(self):
        m = PairScoreMatrix("p", np.zeros((1, 1)))
        assert beam_decode(m, DecodeConfig()) == Ordering((0,))

    @pytest.mark.parametrize("strategy", ["adjacent", "all-pairs"])
    @pytest.mark.parametrize("space", ["probability", "log"])
    def test_exhaustive_beam_equals_oracle_argmax(self, strategy, space):
        rng = np.random.default_rng(1)
        for trial in range(40):
            n = int(rng.integers(2, 6))
            m = random_matrix(rng, n)
            cfg = DecodeConfig(strategy=strategy, beam_width=math.factorial(n), score_space=space)
            best, best_score = oracle_decode(m, strategy, space)
            assert beam_decode(m, cfg) == best
            assert beam_decode_scored(m, cfg)[1] == best_score

    @pytest.mark.parametrize("strategy", ["adjacent", "all-pairs"])
    def test_beam_never_beats_oracle(self, strategy):
        rng = np.random.default_rng(2)
        for trial in range(30):
            n = int(rng.integers(3, 7))
            m = random_matrix(rng, n)
            _, opt = oracle_decode(m, strategy)
            for width in (1, 2, 5, 50):
                _, got = beam_decode_scored(m, DecodeConfig(strategy=strategy, beam_width=width))
                assert got <= opt

    def test_accumulated_score_equals_recompute(self):
        rng = np.random.default_rng(3)
        for strategy in ("adjacent", "all-pairs"):
            for space in ("probability", "log"):
                m = random_matrix(rng, 6)
                cfg = DecodeConfig(strategy=strategy, beam_width=8, score_space=space)
                ordering, acc_score = beam_decode_scored(m, cfg)
                rescore = score_permutation(m.p, ordering.positions, strategy, space)
                assert rescore == acc_score  # same fixed summation order

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        m = random_matrix(rng, 7)
        cfg = DecodeConfig(beam_width=3)
        assert beam_decode(m, cfg) == beam_decode(m, cfg)


class TestOracleDecode:
    def test_two_sentences(self):
        m = PairScoreMatrix("p", np.array([[0.0, 0.9], [0.1, 0.0]]))
        ordering, score = oracle_decode(m, "adjacent")
        assert ordering == Ordering((0, 1))
        assert score == 0.9

    def test_three_sentences_all_pairs(self):
        p = np.zeros((3, 3))
        p[0, 1] = p[0, 2] = p[1, 2] = 1.0
        m = PairScoreMatrix("p", p)
        ordering, score = oracle_decode(m, "all-pairs")
        assert ordering == Ordering((0, 1, 2))
        assert score == 3.0

    def test_optimum_beats_random_permutations(self):
        rng = np.random.default_rng(5)
        m = random_matrix(rng, 6)
        _, opt = oracle_decode(m, "adjacent")
        for _ in range(1000):
            perm = rng.permutation(6)
            assert bruteforce.permutation_score(m.p, perm, "adjacent") <= opt

    def test_matches_bruteforce_enumeration(self):
        rng = np.random.default_rng(6)
        for strategy in ("adjacent", "all-pairs"):
            for space in ("probability", "log"):
                m = random_matrix(rng, 5)
                ordering, score = oracle_decode(m, strategy, space)
                bf_perm, bf_score = bruteforce.best_permutation(m.p, 5, strategy, space)
                assert list(ordering.positions) == bf_perm
                assert score == pytest.approx(bf_score, abs=1e-12)

    def test_factorial_guard(self):
        m = PairScoreMatrix("p", np.full((10, 10), 0.5))
        with pytest.raises(ValueError):
            oracle_decode(m, "adjacent")


class TestTopoDecode:
    def test_acyclic_tournament_recovers_gold(self):
        rng = np.random.default_rng(7)
        for n in range(2, 9):
            gold = Ordering(rng.permutation(n))
            assert topo_decode(matrix_from_ordering("p", gold)) == gold

    def test_three_cycle_falls_back_to_index_order(self):
        # all out-degrees are 1 and incoming mass ties at 1.0, so the final
        # index key decides
        p = np.full((3, 3), 0.1)
        p[0, 1] = p[1, 2] = p[2, 0] = 0.9
        m = PairScoreMatrix("p", p)
        assert topo_decode(m) == Ordering((0, 1, 2))

    def test_n1_identity(self):
        m = PairScoreMatrix("p", np.zeros((1, 1)))
        assert topo_decode(m) == Ordering((0,))

    def test_tie_edge_goes_to_lower_index(self):
        # p[0][1] == 0.5 gives the edge to 0; all else favors 1 over 2 over nothing
        p = np.full((2, 2), 0.5)
        m = PairScoreMatrix("p", p)
        assert topo_decode(m) == Ordering((0, 1))


class TestLookupCounts:
    @pytest.mark.parametrize("n", [2, 4, 6, 9])
    def test_adjacent_uses_n_minus_1_lookups(self, n):
        rng = np.random.default_rng(8)
        counter = CountingMatrix(rng.uniform(size=(n, n)))
        score_permutation(counter, rng.permutation(n), "adjacent")
        assert counter.calls == n - 1

    @pytest.mark.parametrize("n", [2, 4, 6, 9])
    def test_all_pairs_uses_n_choose_2_lookups(self, n):
        rng = np.random.default_rng(9)
        counter = CountingMatrix(rng.uniform(size=(n, n)))
        score_permutation(counter, rng.permutation(n), "all-pairs")
        assert counter.calls == n * (n - 1) // 2


class TestBackends:
    @pytest.mark.parametrize("allpairs", [False, True])
    def test_numba_and_numpy_bit_identical(self, allpairs):
        rng = np.random.default_rng(10)
        for trial in range(25):
            n = int(rng.integers(2, 8))
            S = rng.uniform(size=(n, n))
            np.fill_diagonal(S, np.nan)
            width = int(rng.integers(1, 30))
            perms, scores = zip(*(b.beam_search(S, width, allpairs) for b in BACKENDS))
            assert np.array_equal(perms[0], perms[1])
            assert scores[0] == scores[1]
            operms, oscores = zip(*(b.exhaustive_best(S, allpairs) for b in BACKENDS))
            assert np.array_equal(operms[0], operms[1])
            assert oscores[0] == oscores[1]

    def test_counting_kernels_agree(self):
        rng = np.random.default_rng(11)
        for trial in range(25):
            n = int(rng.integers(2, 12))
            seq = rng.permutation(n)
            assert _kernels_np.inversion_count(seq) == _kernels_nb.inversion_count(seq)
            p = rng.uniform(size=(n, n))
            rank = rng.permutation(n)
            assert _kernels_np.pairwise_hits(p, rank) == _kernels_nb.pairwise_hits(p, rank)


class TestDecodeCorpus:
    def test_preserves_input_order(self):
        rng = np.random.default_rng(12)
        mats = [random_matrix(rng, 4, pid=f"p{i}") for i in range(5)]
        out = list(decode_corpus(mats, DecodeConfig()))
        assert [pid for pid, _ in out] == [f"p{i}" for i in range(5)]

    def test_error_names_paragraph(self):
        oversized = PairScoreMatrix("bad-one", np.full((64, 64), 0.5))  # beyond the beam's bitmask width
        mats = [PairScoreMatrix("fine", np.full((2, 2), 0.5)), oversized]
        with pytest.raises(ValueError, match="bad-one"):
            list(decode_corpus(mats, DecodeConfig()))

    def test_topo_decoder_selectable(self):
        rng = np.random.default_rng(13)
        gold = Ordering(rng.permutation(5))
        mats = [matrix_from_ordering("p", gold)]
        [(pid, ordering)] = list(decode_corpus(mats, DecodeConfig(), decoder="topo"))
        assert ordering == gold
