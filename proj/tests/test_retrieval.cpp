// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "toolvoc/bm25.hpp"
#include "toolvoc/error.hpp"
#include "toolvoc/retrieval.hpp"
#include "toolvoc/rng.hpp"

using namespace toolvoc;

TEST_CASE("ndcg hand-checked case: gains 0,1,1 with two relevant") {
  std::vector<ToolId> ranked = {ToolId{9}, ToolId{2}, ToolId{7}};
  std::set<uint32_t> relevant = {2, 7};
  CHECK(ndcg_at(ranked, relevant, 3) ==
        doctest::Approx(0.6934264036172708).epsilon(1e-12));
  // Same ranking judged at cutoff 1 sees only the miss.
  CHECK(ndcg_at(ranked, relevant, 1) == 0.0);
}

TEST_CASE("ndcg edge cases") {
  CHECK(ndcg_at({ToolId{1}}, {}, 3) == 0.0);
  CHECK(ndcg_at({ToolId{1}}, {1}, 0) == 0.0);
  CHECK(ndcg_at({}, {1}, 3) == 0.0);
  // All relevant first is ideal regardless of how many follow.
  CHECK(ndcg_at({ToolId{4}, ToolId{2}, ToolId{0}}, {2, 4}, 3) ==
        doctest::Approx(1.0));
  // Relevant set larger than the cutoff still normalizes to 1 when the
  // prefix is perfect.
  CHECK(ndcg_at({ToolId{0}, ToolId{1}}, {0, 1, 2, 3}, 2) ==
        doctest::Approx(1.0));
}

TEST_CASE("ndcg matches the brute-force oracle on random instances") {
  DetRng rng(2024);
  for (int iter = 0; iter < 500; ++iter) {
    // A ranking is a random permutation prefix of a 30-tool universe.
    std::vector<uint32_t> universe(30);
    for (uint32_t i = 0; i < 30; ++i) universe[i] = i;
    for (size_t i = universe.size(); i > 1; --i)
      std::swap(universe[i - 1], universe[rng.below(i)]);
    size_t ranked_len = rng.below(universe.size() + 1);
    std::vector<ToolId> ranked;
    std::vector<uint32_t> ranked_ords;
    for (size_t i = 0; i < ranked_len; ++i) {
      ranked.push_back(ToolId{universe[i]});
      ranked_ords.push_back(universe[i]);
    }
    std::set<uint32_t> relevant;
    size_t rel_count = rng.below(8);
    for (size_t i = 0; i < rel_count; ++i)
      relevant.insert(static_cast<uint32_t>(rng.below(30)));
    for (size_t cutoff : {size_t{1}, size_t{3}, size_t{5}, size_t{10}}) {
      double got = ndcg_at(ranked, relevant, cutoff);
      double want = oracles::ndcg_brute(ranked_ords, relevant, cutoff);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

namespace {

std::vector<std::vector<std::string>> tokenized_docs(
    const ToolRegistry& registry) {
  std::vector<std::vector<std::string>> docs;
  for (uint32_t i = 0; i < registry.size(); ++i)
    docs.push_back(Bm25Index::tokenize(registry.doc_text(ToolId{i})));
  return docs;
}

}  // namespace

TEST_CASE("bm25 scores match the direct formula on a 20-document fixture") {
  ToolRegistry registry = fixtures::synthetic_registry(20);
  Bm25Index index(registry);
  auto docs = tokenized_docs(registry);
  const std::vector<std::string> queries = {
      "fetch item 3 from hub",
      "returns item 12",
      "verbose boolean item",
      "service hub 2 put",
      "item item hub",  // repeated terms count once per occurrence
      "no such terms anywhere",
  };
  for (const std::string& q : queries) {
    auto terms = Bm25Index::tokenize(q);
    for (uint32_t d = 0; d < registry.size(); ++d) {
      double got = index.score(q, ToolId{d});
      double want = oracles::bm25_brute(docs, terms, d);
      CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("bm25 retrieve orders by score then ordinal and drops zeros") {
  ToolRegistry registry = fixtures::synthetic_registry(20);
  Bm25Index index(registry);
  auto docs = tokenized_docs(registry);
  const std::string query = "fetch item from service hub 1";
  auto terms = Bm25Index::tokenize(query);

  std::vector<ScoredDoc> expected;
  for (uint32_t d = 0; d < registry.size(); ++d) {
    double s = oracles::bm25_brute(docs, terms, d);
    if (s > 0.0) expected.push_back({ToolId{d}, s});
  }
  std::stable_sort(expected.begin(), expected.end(),
                   [](const ScoredDoc& a, const ScoredDoc& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.id.ordinal < b.id.ordinal;
                   });

  auto got = index.retrieve(query, registry.size());
  REQUIRE(got.size() == expected.size());
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].id == expected[i].id);
    CHECK(got[i].score == doctest::Approx(expected[i].score).epsilon(1e-9));
  }
  // top_k truncates.
  CHECK(index.retrieve(query, 3).size() == std::min<size_t>(3, got.size()));
  // A query with no indexed terms retrieves nothing.
  CHECK(index.retrieve("zzz qqq", 5).empty());
}

TEST_CASE("bm25 restricted to a pool uses pool-local statistics") {
  ToolRegistry registry = fixtures::synthetic_registry(20);
  std::vector<ToolId> pool = {ToolId{3}, ToolId{5}, ToolId{7}, ToolId{11}};
  Bm25Index index(registry, pool);
  CHECK(index.doc_count() == 4);

  // Oracle sees only the pool documents; slot i is pool[i].
  std::vector<std::vector<std::string>> docs;
  for (ToolId id : pool)
    docs.push_back(Bm25Index::tokenize(registry.doc_text(id)));
  const std::string query = "fetch item 5 from hub";
  auto terms = Bm25Index::tokenize(query);
  for (size_t i = 0; i < pool.size(); ++i)
    CHECK(index.score(query, pool[i]) ==
          doctest::Approx(oracles::bm25_brute(docs, terms, i)).epsilon(1e-9));
  // Documents outside the pool are not scorable and never appear.
  CHECK_THROWS_AS(index.score(query, ToolId{0}), InvalidArgument);
  for (const ScoredDoc& d : index.retrieve(query, 20))
    CHECK(std::find_if(pool.begin(), pool.end(), [&](ToolId p) {
            return p == d.id;
          }) != pool.end());
}

namespace {

// Everything needed to run retrieval evaluation over the anagram-free corpus:
// a trained count model whose prompt bags uniquely identify each query.
struct Corpus {
  ToolRegistry registry;
  Vocabulary vocab = Vocabulary::byte_base();
  ToolIndex index;
  std::vector<QueryAnnotation> annotations;
  CountScorer scorer;

  explicit Corpus(size_t n)
      : registry(fixtures::anagram_free_registry(n)),
        index(build_index(registry, {SchemeKind::kSemantic}, vocab)),
        annotations(fixtures::corpus_annotations(registry)),
        scorer(train()) {}

  CountScorer train() {
    auto pairs = build_retrieval(annotations, registry, index, vocab);
    std::vector<std::pair<TokenSeq, TokenSeq>> raw;
    for (const TrainPair& p : pairs) raw.emplace_back(p.input, p.target);
    return train_count_scorer(raw, 0.1, vocab.size(), vocab.base_size(),
                              vocab.eos());
  }
};

}  // namespace

TEST_CASE("generative retriever ranks the trained tool first") {
  Corpus c(24);
  GenerativeRetriever retriever(c.scorer, c.vocab, c.index);
  std::vector<ToolId> everything;
  for (uint32_t i = 0; i < c.registry.size(); ++i)
    everything.push_back(ToolId{i});
  retriever.prepare(c.registry, {everything});
  for (const QueryAnnotation& q : c.annotations) {
    auto ranked = retriever.rank(q.query, 0, 5);
    REQUIRE(!ranked.empty());
    CHECK(ranked[0] == *q.relevant.begin());
    CHECK(ranked.size() <= 5);
    // Ranked ids are distinct.
    std::set<uint32_t> seen;
    for (ToolId id : ranked) CHECK(seen.insert(id.ordinal).second);
  }
}

TEST_CASE("in-domain evaluation on the trained corpus is perfect at 1") {
  Corpus c(24);
  GenerativeRetriever retriever(c.scorer, c.vocab, c.index);
  NdcgReport report = evaluate_retrieval(retriever, c.registry, c.annotations,
                                         Setting::kInDomain);
  CHECK(report.setting == Setting::kInDomain);
  REQUIRE(report.by_domain.size() == 3);
  size_t total = 0;
  for (const auto& [domain, cell] : report.by_domain) {
    total += cell.query_count;
    CHECK(cell.excluded == 0);
    CHECK(cell.empty_relevant == 0);
    CHECK(cell.mean_ndcg.at(1) == doctest::Approx(1.0));
    CHECK(cell.mean_ndcg.at(5) == doctest::Approx(1.0));
  }
  CHECK(total == c.annotations.size());
}

TEST_CASE("multi-domain pools the union; trained model still resolves") {
  Corpus c(24);
  GenerativeRetriever retriever(c.scorer, c.vocab, c.index);
  NdcgReport in_domain = evaluate_retrieval(retriever, c.registry,
                                            c.annotations, Setting::kInDomain);
  NdcgReport multi = evaluate_retrieval(retriever, c.registry, c.annotations,
                                        Setting::kMultiDomain);
  CHECK(multi.setting == Setting::kMultiDomain);
  for (const auto& [domain, cell] : multi.by_domain) {
    CHECK(cell.mean_ndcg.at(1) >=
          in_domain.by_domain.at(domain).mean_ndcg.at(1) - 0.05);
  }
}

TEST_CASE("queries with empty relevant sets are counted, not scored") {
  Corpus c(12);
  auto annotations = c.annotations;
  annotations.push_back({"query with no answer", Domain::kSingleTool, {}});
  GenerativeRetriever retriever(c.scorer, c.vocab, c.index);
  NdcgReport report = evaluate_retrieval(retriever, c.registry, annotations,
                                         Setting::kInDomain);
  const NdcgCell& cell = report.by_domain.at(Domain::kSingleTool);
  CHECK(cell.empty_relevant == 1);
  // The unanswerable query did not drag the mean down.
  CHECK(cell.mean_ndcg.at(1) == doctest::Approx(1.0));
}

TEST_CASE("pool overrides exclude queries whose answers fall outside") {
  Corpus c(12);
  // Single-tool queries are ordinals 0, 3, 6, 9. Leave ordinal 0 out of the
  // override pool: that query becomes unanswerable within the pool.
  std::map<Domain, std::vector<ToolId>> pools;
  for (const QueryAnnotation& q : c.annotations)
    if (*q.relevant.begin() != ToolId{0})
      pools[q.domain].push_back(*q.relevant.begin());
  pools[Domain::kSingleTool];  // ensure all three keys exist
  GenerativeRetriever retriever(c.scorer, c.vocab, c.index);
  NdcgReport report = evaluate_retrieval(retriever, c.registry, c.annotations,
                                         Setting::kInDomain, {}, &pools);
  const NdcgCell& cell = report.by_domain.at(Domain::kSingleTool);
  CHECK(cell.excluded == 1);
  CHECK(cell.query_count == 4);
  CHECK(cell.mean_ndcg.at(1) == doctest::Approx(1.0));
}

TEST_CASE("parallel evaluation is byte-identical to serial") {
  Corpus c(24);
  GenerativeRetriever retriever(c.scorer, c.vocab, c.index);
  EvalConfig serial;
  serial.threads = 1;
  EvalConfig parallel;
  parallel.threads = 4;
  NdcgReport a = evaluate_retrieval(retriever, c.registry, c.annotations,
                                    Setting::kInDomain, serial);
  NdcgReport b = evaluate_retrieval(retriever, c.registry, c.annotations,
                                    Setting::kInDomain, parallel);
  std::ostringstream ja, jb;
  a.write_json(ja);
  b.write_json(jb);
  CHECK(ja.str() == jb.str());
}

TEST_CASE("bm25 retriever plugs into the same evaluation") {
  Corpus c(18);
  Bm25Retriever retriever;
  NdcgReport report = evaluate_retrieval(retriever, c.registry, c.annotations,
                                         Setting::kInDomain);
  for (const auto& [domain, cell] : report.by_domain) {
    for (const auto& [cutoff, value] : cell.mean_ndcg) {
      CHECK(value >= 0.0);
      CHECK(value <= 1.0 + 1e-12);
    }
    // Each query names its tool's catalog triple verbatim; lexical retrieval
    // should find it within the top 5 of a small in-domain pool.
    CHECK(cell.mean_ndcg.at(5) > 0.5);
  }
}

TEST_CASE("report writers emit all cells in a stable shape") {
  Corpus c(12);
  GenerativeRetriever retriever(c.scorer, c.vocab, c.index);
  NdcgReport report = evaluate_retrieval(retriever, c.registry, c.annotations,
                                         Setting::kInDomain);

  std::ostringstream json;
  report.write_json(json);
  CHECK(json.str().find("\"setting\": \"in-domain\"") != std::string::npos);
  CHECK(json.str().find(domain_name(Domain::kCrossCategory)) !=
        std::string::npos);
  CHECK(json.str().find("\"ndcg\"") != std::string::npos);

  std::stringstream csv;
  report.write_csv(csv);
  std::string line;
  std::getline(csv, line);
  CHECK(line ==
        "setting,domain,cutoff,mean_ndcg,query_count,excluded,empty_relevant");
  size_t rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3 * 3);  // three domains x three cutoffs

  std::ostringstream table;
  report.write_table(table);
  CHECK(table.str().find(setting_name(Setting::kInDomain)) !=
        std::string::npos);
  CHECK(table.str().find("@1") != std::string::npos);
}
