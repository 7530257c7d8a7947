// SPDX-License-Identifier: Apache-2.0
// Microbenchmarks for the paths whose cost grows with registry size: trie
// assembly, constrained search, greedy encoding over a large added
// vocabulary, and lexical retrieval. Fixtures are built once and shared.
#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "toolvoc/bm25.hpp"
#include "toolvoc/decode.hpp"
#include "toolvoc/indexer.hpp"
#include "toolvoc/registry.hpp"
#include "toolvoc/tokenizer.hpp"
#include "toolvoc/trie.hpp"

using namespace toolvoc;

namespace {

struct Corpus {
  ToolRegistry registry;
  Vocabulary vocab = Vocabulary::byte_base();
  ToolIndex index;
  std::vector<TokenSeq> sequences;

  Corpus(size_t n, SchemeKind kind)
      : registry(fixtures::synthetic_registry(n)),
        index(build_index(registry, {kind}, vocab)),
        sequences(index.all_sequences()) {}
};

const Corpus& numeric_47k() {
  static const Corpus c(47000, SchemeKind::kNumeric);
  return c;
}

const Corpus& semantic_47k() {
  static const Corpus c(47000, SchemeKind::kSemantic);
  return c;
}

const Corpus& atomic_10k() {
  static const Corpus c(10000, SchemeKind::kAtomic);
  return c;
}

}  // namespace

static void BM_TrieBuildNumeric47k(benchmark::State& state) {
  const Corpus& c = numeric_47k();
  for (auto _ : state) {
    DisjunctiveTrie trie(c.sequences, c.vocab.eos());
    benchmark::DoNotOptimize(trie.node_count());
  }
}
BENCHMARK(BM_TrieBuildNumeric47k)->Unit(benchmark::kMillisecond);

static void BM_TrieBuildSemantic47k(benchmark::State& state) {
  const Corpus& c = semantic_47k();
  for (auto _ : state) {
    DisjunctiveTrie trie(c.sequences, c.vocab.eos());
    benchmark::DoNotOptimize(trie.node_count());
  }
}
BENCHMARK(BM_TrieBuildSemantic47k)->Unit(benchmark::kMillisecond);

static void BM_TrieWalkFeasible(benchmark::State& state) {
  const Corpus& c = numeric_47k();
  static const DisjunctiveTrie trie(c.sequences, c.vocab.eos());
  size_t i = 0;
  for (auto _ : state) {
    const TokenSeq& seq = c.sequences[i++ % c.sequences.size()];
    DisjunctiveTrie::NodeRef node = DisjunctiveTrie::kRoot;
    for (TokenId t : seq) {
      benchmark::DoNotOptimize(trie.feasible_next(node));
      node = *trie.step(node, t);
    }
    benchmark::DoNotOptimize(node);
  }
}
BENCHMARK(BM_TrieWalkFeasible);

static void BM_ConstrainedBeamSearch(benchmark::State& state) {
  // 1,000 numeric identifiers, beam width 10: one retrieval-shaped decode.
  static const Corpus c(1000, SchemeKind::kNumeric);
  static const DisjunctiveTrie trie(c.sequences, c.vocab.eos());
  static const oracles::RandomScorer scorer(c.vocab.size(), 7);
  static const TokenSeq prompt = c.vocab.encode("rank the tools for this");
  for (auto _ : state) {
    auto ranked = constrained_beam_search(scorer, prompt, trie, 10);
    benchmark::DoNotOptimize(ranked.size());
  }
}
BENCHMARK(BM_ConstrainedBeamSearch)->Unit(benchmark::kMicrosecond);

static void BM_EncodeWithAtomicVocab(benchmark::State& state) {
  // Greedy longest-match over a vocabulary holding 10,000 added surfaces.
  const Corpus& c = atomic_10k();
  std::string text;
  for (uint32_t i = 0; i < 20; ++i) {
    text += c.registry.doc_text(ToolId{i * 97});
    text += " ";
    text += c.index.entry(ToolId{i * 101}).surface;
    text += " ";
  }
  for (auto _ : state) {
    TokenSeq tokens = c.vocab.encode(text);
    benchmark::DoNotOptimize(tokens.size());
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_EncodeWithAtomicVocab);

static void BM_Bm25Retrieve(benchmark::State& state) {
  static const ToolRegistry registry = fixtures::synthetic_registry(5000);
  static const Bm25Index index(registry);
  for (auto _ : state) {
    auto hits = index.retrieve("fetch item 1234 from service hub 9", 10);
    benchmark::DoNotOptimize(hits.size());
  }
}
BENCHMARK(BM_Bm25Retrieve)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
