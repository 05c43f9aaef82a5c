import math

import pytest
from hypothesis import given, settings, strategies as st

from agora.errors import DuplicateDoc
from agora.memory import (Document, EMBEDDING_DIM, KnowledgeBase, cosine,
                          embed, index, load_corpus, rerank_filter, retrieve)
from agora.textutil import fnv1a64


def brute_force_rank(kb: KnowledgeBase, query: str, k: int,
                     tag_filter=None) -> list[tuple[str, float]]:
    """Independent full-scan oracle.

    Follows the documented similarity arithmetic (unit-embedding dot
    product, bucket order) so rank ties resolve identically.
    """
    qv = embed(query)
    scored = []
    for doc in kb.documents():
        if tag_filter and not set(tag_filter) <= set(doc.tags):
            continue
        sim = 0.0
        for a, b in zip(qv, embed(doc.text)):
            sim += a * b
        scored.append((doc.doc_id, sim))
    scored.sort(key=lambda p: (-p[1], p[0]))
    return scored[:k]


def corpus(*texts: str) -> KnowledgeBase:
    kb = KnowledgeBase()
    for i, text in enumerate(texts, start=1):
        index(kb, Document(f"d{i}", text))
    return kb


class TestEmbed:
    def test_deterministic(self):
        assert embed("some text here") == embed("some text here")

    def test_bag_of_words_order_invariant(self):
        assert embed("a a b") == embed("b a a")

    def test_identity_cosine(self):
        sim = cosine(embed("alpha beta"), embed("alpha beta"))
        assert abs(sim - 1.0) <= 1e-9

    def test_unit_norm_for_nonempty(self):
        vec = embed("hello world again")
        assert abs(math.sqrt(sum(v * v for v in vec)) - 1.0) <= 1e-9

    def test_zero_vector_for_empty(self):
        assert embed("") == tuple([0.0] * EMBEDDING_DIM)

    def test_casefolding(self):
        assert embed("Alpha BETA") == embed("alpha beta")

    def test_bucket_is_fnv_mod_64(self):
        vec = embed("solitary")
        bucket = fnv1a64("solitary") % EMBEDDING_DIM
        assert vec[bucket] == 1.0


class TestIndex:
    def test_index_then_lookup(self):
        kb = KnowledgeBase()
        index(kb, Document("d1", "alpha"))
        assert kb.get("d1").text == "alpha"

    def test_duplicate_rejected(self):
        kb = KnowledgeBase()
        index(kb, Document("d1", "alpha"))
        with pytest.raises(DuplicateDoc):
            index(kb, Document("d1", "beta"))

    def test_hundred_docs(self):
        kb = KnowledgeBase()
        for i in range(100):
            index(kb, Document(f"d{i}", f"text number {i}"))
        assert len(kb) == 100

    def test_stored_embedding_recomputable(self):
        kb = KnowledgeBase()
        index(kb, Document("d1", "alpha beta"))
        assert kb.embedding("d1") == embed("alpha beta")


class TestRetrieve:
    def test_matches_brute_force_oracle_on_fixture(self):
        kb = corpus("alpha beta", "beta gamma", "delta")
        got = retrieve(kb, "beta", 2)
        expected = brute_force_rank(kb, "beta", 2)
        assert [d for d, _ in got] == [d for d, _ in expected]
        for (_, a), (_, b) in zip(got, expected):
            assert abs(a - b) <= 1e-12

    def test_identity_query_ranks_first_with_similarity_one(self):
        kb = corpus("alpha beta", "beta gamma", "delta")
        got = retrieve(kb, "beta gamma", 3)
        assert got[0][0] == "d2"
        assert abs(got[0][1] - 1.0) <= 1e-9

    def test_k_zero_empty(self):
        kb = corpus("alpha")
        assert retrieve(kb, "alpha", 0) == []

    def test_empty_kb_empty(self):
        assert retrieve(KnowledgeBase(), "anything", 5) == []

    def test_tag_filter_subset_semantics(self):
        kb = KnowledgeBase()
        index(kb, Document("d1", "alpha", frozenset({"x"})))
        index(kb, Document("d2", "alpha", frozenset({"x", "y"})))
        got = retrieve(kb, "alpha", 5, tag_filter={"x", "y"})
        assert [d for d, _ in got] == ["d2"]

    def test_prefix_property(self):
        kb = corpus(*(f"word{i} shared token" for i in range(20)))
        for k in range(0, 20):
            smaller = retrieve(kb, "shared token word3", k)
            larger = retrieve(kb, "shared token word3", k + 1)
            assert larger[:k] == smaller

    def test_retrieval_never_mutates(self):
        kb = corpus("alpha beta", "beta gamma")
        digest = kb.digest()
        retrieve(kb, "beta", 2)
        assert kb.digest() == digest

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.text(alphabet="abcde ", min_size=1, max_size=20)
                    .filter(lambda t: t.strip()),
                    min_size=1, max_size=25),
           st.text(alphabet="abcde ", min_size=1, max_size=10),
           st.integers(min_value=0, max_value=30))
    def test_oracle_equivalence_property(self, texts, query, k):
        kb = KnowledgeBase()
        for i, text in enumerate(texts):
            index(kb, Document(f"d{i:03d}", text))
        got = retrieve(kb, query, k)
        expected = brute_force_rank(kb, query, k)
        assert [d for d, _ in got] == [d for d, _ in expected]


class TestRerank:
    def test_drops_below_threshold(self):
        assert rerank_filter([("d1", 0.9), ("d2", 0.2)], 0.5) == [("d1", 0.9)]

    def test_threshold_zero_identity(self):
        cands = [("d1", 0.9), ("d2", 0.2)]
        assert rerank_filter(cands, 0.0) == cands

    def test_threshold_above_one_empties(self):
        assert rerank_filter([("d1", 1.0)], 1.01) == []


class TestCorpusFile:
    def test_load(self, fixtures_dir):
        kb = load_corpus(fixtures_dir / "corpus.jsonl")
        assert len(kb) == 3
        assert kb.get("d1").text == "alpha beta"
        assert "rare" in kb.get("d3").tags

    def test_recent_ordering(self, fixtures_dir):
        kb = load_corpus(fixtures_dir / "corpus.jsonl")
        assert [d.doc_id for d in kb.recent(2)] == ["d3", "d2"]
