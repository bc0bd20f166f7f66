import json
from collections import Counter

import numpy as np
import pytest

from pairorder.core import Ordering, Paragraph, gold_ordering
from pairorder.data import (
    CLS_ID,
    N_RESERVED,
    PAD_ID,
    SEP_ID,
    UNK_ID,
    PairExample,
    SynthConfig,
    Vocab,
    band_word,
    gen_synthetic,
    make_pair_dataset,
    read_corpus,
    read_orderings,
    read_pairs,
    read_shuffles,
    shuffle_corpus,
    shuffled_sentences,
    tokenize_pair,
    tokenize_single,
    word_band,
    write_corpus,
    write_orderings,
    write_pairs,
    write_shuffles,
)


class TestVocab:
    def test_empty_corpus_keeps_reserved_only(self):
        v = Vocab.build([])
        assert v.size == 4

    def test_single_repeated_word(self):
        v = Vocab.build(["hello hello hello"])
        assert v.size == 5
        assert v.id("hello") == 4

    def test_cap(self):
        v = Vocab.build(["a a a b b c"], cap=2)
        assert v.size == 2 + 4
        assert v.id("a") == 4 and v.id("b") == 5
        assert v.id("c") == UNK_ID

    def test_frequency_then_alphabetic_order(self):
        v = Vocab.build(["b b z a a"])
        assert v.id("a") == 4 and v.id("b") == 5 and v.id("z") == 6

    def test_save_load_round_trip(self, tmp_path):
        v = Vocab.build(["alpha beta beta gamma"])
        path = tmp_path / "vocab.tsv"
        v.save(path)
        assert Vocab.load(path) == v
        lines = path.read_text().splitlines()
        assert lines[0] == "[PAD]\t0"


class TestTokenizePair:
    def test_two_three_token_sentences(self):
        v = Vocab.build(["a b c", "d e f"])
        enc = tokenize_pair(v, "a b c", "d e f", max_len=16)
        assert len(enc) == 9
        assert enc.span_i == (1, 4)
        assert enc.span_j == (5, 8)
        assert enc.ids[0] == CLS_ID and enc.ids[4] == SEP_ID and enc.ids[8] == SEP_ID
        assert enc.segments == (0, 0, 0, 0, 0, 1, 1, 1, 1)

    def test_overlong_input_truncates_to_max_len(self):
        v = Vocab.build([])
        s_long = " ".join(["x"] * 30)
        s_short = "y y y"
        enc = tokenize_pair(v, s_long, s_short, max_len=12)
        assert len(enc) == 12
        assert enc.span_i[1] > enc.span_i[0]
        assert enc.span_j[1] > enc.span_j[0]
        # the longer sentence lost tokens first; the short one is intact
        assert enc.span_j[1] - enc.span_j[0] == 3

    def test_equal_lengths_truncate_second_first(self):
        v = Vocab.build([])
        enc = tokenize_pair(v, "a a a a", "b b b b", max_len=10)
        assert enc.span_i[1] - enc.span_i[0] == 4
        assert enc.span_j[1] - enc.span_j[0] == 3

    def test_unknown_word_maps_to_unk(self):
        v = Vocab.build(["known words only"])
        enc = tokenize_pair(v, "known mystery", "words", max_len=16)
        assert UNK_ID in enc.ids[enc.span_i[0]:enc.span_i[1]]

    def test_max_len_too_small(self):
        v = Vocab.build([])
        with pytest.raises(ValueError):
            tokenize_pair(v, "a", "b", max_len=4)

    def test_single_encoding(self):
        v = Vocab.build(["a b"])
        enc = tokenize_single(v, "a b", max_len=8)
        assert enc.ids == (CLS_ID, v.id("a"), v.id("b"), SEP_ID)
        assert set(enc.segments) == {0}


class TestSynthetic:
    def test_same_seed_same_bytes(self, tmp_path):
        cfg = SynthConfig(kind="drift", seed=42)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_corpus(a, gen_synthetic(cfg, 50))
        write_corpus(b, gen_synthetic(cfg, 50))
        assert a.read_bytes() == b.read_bytes()

    def test_different_seeds_differ(self):
        base = gen_synthetic(SynthConfig(kind="drift", seed=1), 10)
        other = gen_synthetic(SynthConfig(kind="drift", seed=2), 10)
        assert [p.sentences for p in base] != [p.sentences for p in other]

    def test_drift_zero_overlap_band_oracle_is_exact(self):
        # with no bleed, a token's band determines the sentence's gold slot
        cfg = SynthConfig(kind="drift", n_sentences=(3, 6), vocab_bands=6, band_overlap=0.0, seed=7)
        for p in gen_synthetic(cfg, 100):
            for k, sent in enumerate(p.sentences):
                bands = {word_band(t) for t in sent.split()}
                assert bands == {k}

    def test_drift_overlap_stays_adjacent(self):
        cfg = SynthConfig(kind="drift", n_sentences=(4, 4), vocab_bands=6, band_overlap=0.5, seed=8)
        for p in gen_synthetic(cfg, 50):
            for k, sent in enumerate(p.sentences):
                for t in sent.split():
                    assert abs(word_band(t) - k) <= 1

    def test_cyclic_band_structure(self):
        cfg = SynthConfig(kind="cyclic", n_sentences=(5, 5), vocab_bands=6, band_overlap=0.0, seed=9)
        for p in gen_synthetic(cfg, 50):
            bands = [word_band(p.sentences[k].split()[0]) for k in range(5)]
            for k in range(4):
                assert bands[k + 1] == (bands[k] + 1) % 6

    def test_cyclic_pair_is_locally_ambiguous(self):
        # the same two sentences appear in both orders in two valid paragraphs
        s_last = " ".join(band_word(5, t) for t in (0, 1, 2))
        s_first = " ".join(band_word(0, t) for t in (0, 1, 2))
        fillers = [" ".join(band_word(b, t) for t in (3, 4)) for b in range(1, 5)]
        # offset 5: bands 5,0,1,2,3 -> s_last precedes s_first
        para_a = Paragraph("a", [s_last, s_first, fillers[0], fillers[1], fillers[2]])
        # offset 0: bands 0,1,2,3,4 -> s_first first, s_last never... use n=2 arc
        cfg = SynthConfig(kind="cyclic", n_sentences=(2, 2), vocab_bands=6, seed=0)
        para_b = Paragraph("b", [s_first, s_last])  # wrap the other way: 0 then 5
        pair_a = (para_a.sentences[0], para_a.sentences[1])
        pair_b = (para_b.sentences[1], para_b.sentences[0])
        assert Counter(pair_a[0].split()) == Counter(pair_b[0].split())
        assert Counter(pair_a[1].split()) == Counter(pair_b[1].split())
        # identical token multisets, opposite gold order: locally undecidable

    def test_drift_rejects_too_few_bands(self):
        with pytest.raises(ValueError):
            SynthConfig(kind="drift", n_sentences=(2, 8), vocab_bands=6)

    def test_offset_range_respected(self):
        cfg = SynthConfig(kind="cyclic", n_sentences=(3, 3), vocab_bands=8, offset_range=(2, 4), seed=3)
        for p in gen_synthetic(cfg, 40):
            first_band = word_band(p.sentences[0].split()[0])
            assert first_band in (2, 3)


class TestPairDataset:
    def make(self, n=5):
        cfg = SynthConfig(kind="drift", n_sentences=(n, n), vocab_bands=6, seed=1)
        paragraphs = gen_synthetic(cfg, 4)
        records = shuffle_corpus(paragraphs, seed=2)
        return paragraphs, records

    def test_n5_paragraph_yields_20_examples(self):
        paragraphs, records = self.make(5)
        examples = make_pair_dataset(paragraphs, records)
        assert len(examples) == 4 * 20

    def test_labels_exactly_balanced(self):
        paragraphs, records = self.make(5)
        examples = make_pair_dataset(paragraphs, records)
        by_pid = Counter((e.pid, e.label) for e in examples)
        for p in paragraphs:
            assert by_pid[(p.id, 0)] == by_pid[(p.id, 1)] == 10

    def test_labels_match_gold_order(self):
        paragraphs, records = self.make(4)
        examples = make_pair_dataset(paragraphs, records)
        rec = {r.paragraph_id: r for r in records}
        for e in examples:
            gold = gold_ordering(rec[e.pid]).positions
            rank = {s: r for r, s in enumerate(gold)}
            assert e.label == int(rank[e.i] < rank[e.j])

    def test_file_round_trip(self, tmp_path):
        paragraphs, records = self.make(3)
        examples = make_pair_dataset(paragraphs, records)
        path = tmp_path / "pairs.jsonl"
        write_pairs(path, examples)
        assert read_pairs(path) == examples


class TestCorpusIO:
    def test_corpus_round_trip(self, tmp_path):
        paragraphs = gen_synthetic(SynthConfig(kind="drift", seed=3), 10)
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, paragraphs)
        assert read_corpus(path) == paragraphs

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        row = json.dumps({"id": "dup", "sentences": ["a"]})
        path.write_text(row + "\n" + row + "\n")
        with pytest.raises(ValueError):
            read_corpus(path)

    def test_shuffles_round_trip(self, tmp_path):
        paragraphs = gen_synthetic(SynthConfig(kind="drift", seed=4), 10)
        records = shuffle_corpus(paragraphs, seed=5)
        path = tmp_path / "shuffles.jsonl"
        write_shuffles(path, records)
        assert read_shuffles(path) == records

    def test_shuffle_corpus_is_deterministic(self):
        paragraphs = gen_synthetic(SynthConfig(kind="drift", seed=6), 10)
        assert shuffle_corpus(paragraphs, seed=7) == shuffle_corpus(paragraphs, seed=7)
        assert shuffle_corpus(paragraphs, seed=7) != shuffle_corpus(paragraphs, seed=8)

    def test_orderings_round_trip(self, tmp_path):
        items = [("p0", Ordering((1, 0, 2))), ("p1", Ordering((0, 1)))]
        path = tmp_path / "orderings.jsonl"
        write_orderings(path, items)
        assert read_orderings(path) == items

    def test_shuffled_sentences_validates_record(self):
        paragraphs = gen_synthetic(SynthConfig(kind="drift", seed=8), 2)
        records = shuffle_corpus(paragraphs, seed=9)
        with pytest.raises(ValueError):
            shuffled_sentences(paragraphs[0], records[1])
