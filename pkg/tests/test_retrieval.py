from __future__ import annotations

import random

import numpy as np
import pytest

from cmdlens.doccorpus import build_ground_truth, generate_commands, make_triples
from cmdlens.embedding import OfflineEmbedder
from cmdlens.errors import DegenerateLabels, DuplicateChunkId, ProviderMismatch
from cmdlens.retrieval import (
    ScoredPair, auc_roc, build_index, evaluate_retrieval, load_index,
    retrieve_for_command, save_index, search,
)
from cmdlens.shellparse import parse
from oracles import auc_enumeration_oracle, brute_force_search


class TestBuildIndex:
    def test_entry_count_and_dim(self, corpus, provider):
        _, chunks = corpus
        index = build_index(chunks[:3], provider)
        assert len(index) == 3
        assert index.dim == provider.dim
        assert index.matrix.shape == (3, provider.dim)

    def test_duplicate_chunk_id(self, corpus, provider):
        _, chunks = corpus
        with pytest.raises(DuplicateChunkId):
            build_index([chunks[0], chunks[0]], provider)

    def test_save_load_identical_results(self, tmp_path, corpus, provider):
        _, chunks = corpus
        index = build_index(chunks, provider)
        path = tmp_path / "index.bin"
        save_index(index, path)
        reloaded = load_index(path)
        assert reloaded.ids == index.ids
        assert np.array_equal(reloaded.matrix, index.matrix)
        assert reloaded.provider_id == index.provider_id
        probes = ["ls --color", "grep -i", "tar -x -z", "bash -c", "sh -e",
                  "list directory", "archive file", "search pattern",
                  "login shell", "standard input"]
        for probe in probes:
            before = [(r.chunk.chunk_id, r.score) for r in search(index, probe, 5, provider)]
            after = [(r.chunk.chunk_id, r.score) for r in search(reloaded, probe, 5, provider)]
            assert before == after

    def test_resave_is_bit_identical(self, tmp_path, corpus, provider):
        _, chunks = corpus
        index = build_index(chunks, provider)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_index(index, p1)
        save_index(load_index(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestSearch:
    def test_exact_text_self_match(self, corpus, provider):
        _, chunks = corpus
        index = build_index(chunks, provider)
        target = chunks[5]
        results = search(index, target.text, 3, provider)
        assert results[0].chunk.chunk_id == target.chunk_id
        assert results[0].score == pytest.approx(1.0, abs=1e-6)
        assert results[0].rank == 1

    def test_k_larger_than_corpus(self, corpus, provider):
        _, chunks = corpus
        index = build_index(chunks[:3], provider)
        assert len(search(index, "anything", 10, provider)) == 3

    def test_provider_mismatch(self, corpus, provider):
        _, chunks = corpus
        index = build_index(chunks, provider)
        other = OfflineEmbedder(dim=provider.dim, seed=99)
        with pytest.raises(ProviderMismatch):
            search(index, "x", 1, other)

    def test_ranks_consecutive_and_sorted(self, index, provider):
        results = search(index, "ls --color -t", 8, provider)
        assert [r.rank for r in results] == list(range(1, len(results) + 1))
        scores = [r.score for r in results]
        assert scores == sorted(scores, reverse=True)

    def test_relevant_chunk_outranks_unrelated(self, index, provider, corpus):
        _, chunks = corpus
        results = search(index, "ls --color -t", 5, provider)
        top_utilities = [r.chunk.utility for r in results[:2]]
        assert "ls" in top_utilities

    def test_matches_brute_force_ranking(self, index, provider):
        queries = ["ls --color -t", "grep -i pattern", "tar -x -f a.tar",
                   "bash -c something", "standard input", "colorize output"]
        for q in queries:
            for k in (1, 3, 10, len(index.ids)):
                got = [(r.score, r.chunk.chunk_id) for r in search(index, q, k, provider)]
                want = brute_force_search(index, q, k, provider)
                assert got == want

    def test_tie_break_by_chunk_id(self, provider, corpus):
        _, chunks = corpus
        # duplicate text under two ids scores identically; lower id first
        from cmdlens.doccorpus import DocChunk
        twins = [
            DocChunk(chunk_id="bbb", utility="u", text="identical text", origin="description", ordinal=0),
            DocChunk(chunk_id="aaa", utility="u", text="identical text", origin="description", ordinal=1),
        ]
        index = build_index(twins, provider)
        results = search(index, "identical text", 2, provider)
        assert [r.chunk.chunk_id for r in results] == ["aaa", "bbb"]


class TestRetrieveForCommand:
    def test_single_unit_reduces_to_search(self, index, provider):
        cmd = parse("ls --color -t")
        merged = retrieve_for_command(index, cmd, 3, provider)
        direct = search(index, "ls --color -t", 3, provider)
        assert [(r.chunk.chunk_id, r.score) for r in merged] == \
               [(r.chunk.chunk_id, r.score) for r in direct]

    def test_duplicate_units_idempotent(self, index, provider):
        merged = retrieve_for_command(index, parse("ls -t ; ls -t"), 3, provider)
        single = retrieve_for_command(index, parse("ls -t"), 3, provider)
        assert [r.chunk.chunk_id for r in merged] == [r.chunk.chunk_id for r in single]

    def test_two_unit_merge_matches_oracle(self, index, provider):
        cmd = parse("ls --color | grep -i pattern")
        got = [(r.score, r.chunk.chunk_id) for r in retrieve_for_command(index, cmd, 3, provider)]
        best: dict[str, float] = {}
        for query in ("ls --color", "grep -i pattern"):
            for score, chunk_id in brute_force_search(index, query, 3, provider):
                if chunk_id not in best or score > best[chunk_id]:
                    best[chunk_id] = score
        want = sorted(((s, cid) for cid, s in best.items()),
                      key=lambda r: (-r[0], r[1]))[:6]
        assert got == want


class TestAucRoc:
    def test_perfect_separation(self):
        pairs = [ScoredPair(0.9, 1), ScoredPair(0.8, 1), ScoredPair(0.2, 0)]
        assert auc_roc(pairs) == 1.0

    def test_inverted_labels(self):
        pairs = [ScoredPair(0.9, 0), ScoredPair(0.8, 0), ScoredPair(0.2, 1)]
        assert auc_roc(pairs) == 0.0

    def test_spec_enumeration_example(self):
        pairs = [ScoredPair(0.9, 1), ScoredPair(0.8, 0), ScoredPair(0.7, 1),
                 ScoredPair(0.1, 0)]
        assert auc_roc(pairs) == 0.75

    def test_constant_scores_half(self):
        pairs = [ScoredPair(0.5, 1)] * 4 + [ScoredPair(0.5, 0)] * 6
        assert auc_roc(pairs) == 0.5

    def test_degenerate_labels(self):
        with pytest.raises(DegenerateLabels):
            auc_roc([ScoredPair(0.5, 1), ScoredPair(0.4, 1)])

    def test_equals_enumeration_on_random_sets_with_ties(self):
        rng = random.Random(7)
        for _ in range(50):
            n = rng.randrange(5, 40)
            pairs = [ScoredPair(score=rng.choice([0.1, 0.25, 0.5, 0.5, 0.9,
                                                  rng.random()]),
                                label=rng.randrange(2)) for _ in range(n)]
            labels = {p.label for p in pairs}
            if labels != {0, 1}:
                pairs.append(ScoredPair(0.33, 1 - pairs[0].label))
            assert auc_roc(pairs) == auc_enumeration_oracle(pairs)

    def test_monotone_transform_invariance(self):
        rng = random.Random(3)
        pairs = [ScoredPair(rng.random(), rng.randrange(2)) for _ in range(30)]
        pairs += [ScoredPair(0.5, 0), ScoredPair(0.6, 1)]
        base = auc_roc(pairs)
        import math
        for transform in (lambda s: 3 * s + 2, math.exp, lambda s: s ** 3):
            transformed = [ScoredPair(transform(p.score), p.label) for p in pairs]
            assert auc_roc(transformed) == base

    def test_label_flip_complement_without_ties(self):
        rng = random.Random(11)
        scores = rng.sample(range(1000), 20)
        pairs = [ScoredPair(s / 1000, i % 2) for i, s in enumerate(scores)]
        flipped = [ScoredPair(p.score, 1 - p.label) for p in pairs]
        assert auc_roc(pairs) + auc_roc(flipped) == pytest.approx(1.0, abs=1e-12)


class TestEvaluateRetrieval:
    def test_lexical_overlap_separates(self, corpus, provider):
        docs, chunks = corpus
        commands = []
        for i, doc in enumerate(docs):
            commands.extend(generate_commands(doc, n=30, max_options=2, seed=7 + i))
        truth = build_ground_truth(commands, chunks)
        triples = make_triples(commands, chunks, truth, negatives_per_positive=1,
                               seed=7)
        report = evaluate_retrieval(triples, provider)
        assert report["auc"] >= 0.95
        assert report["n_pos"] == report["n_neg"]
        assert report["provider_id"] == provider.provider_id
