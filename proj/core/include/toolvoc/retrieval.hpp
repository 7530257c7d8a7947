// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "toolvoc/bm25.hpp"
#include "toolvoc/datasets.hpp"
#include "toolvoc/indexer.hpp"
#include "toolvoc/registry.hpp"
#include "toolvoc/scorer.hpp"
#include "toolvoc/tokenizer.hpp"
#include "toolvoc/trie.hpp"

namespace toolvoc {

// Normalized discounted cumulative gain at `cutoff` with binary relevance.
// Gain is (2^rel - 1) / log2(rank + 1); the ideal DCG places all relevant
// documents first, capped at min(|relevant|, cutoff). An empty relevant set
// yields 0 by convention.
double ndcg_at(const std::vector<ToolId>& ranked,
               const std::set<uint32_t>& relevant_ordinals, size_t cutoff);

// In-domain: each query is ranked against its own domain's candidate pool.
// Multi-domain: every query is ranked against the union of all pools.
enum class Setting { kInDomain, kMultiDomain };
const char* setting_name(Setting s);

// A retriever ranks candidate tools for a query within a candidate pool.
class Retriever {
 public:
  virtual ~Retriever() = default;
  // Called once before ranking; pools are addressed by index afterwards.
  virtual void prepare(const ToolRegistry& registry,
                       const std::vector<std::vector<ToolId>>& pools) = 0;
  virtual std::vector<ToolId> rank(const std::string& query, size_t pool,
                                   size_t top_k) const = 0;
};

// Generative retrieval: constrained beam search over a per-pool trie of
// identifier sequences; the hypothesis order is the ranking.
class GenerativeRetriever : public Retriever {
 public:
  GenerativeRetriever(const Scorer& scorer, const Vocabulary& vocab,
                      const ToolIndex& index);
  void prepare(const ToolRegistry& registry,
               const std::vector<std::vector<ToolId>>& pools) override;
  std::vector<ToolId> rank(const std::string& query, size_t pool,
                           size_t top_k) const override;

 private:
  const Scorer& scorer_;
  const Vocabulary& vocab_;
  const ToolIndex& index_;
  std::vector<DisjunctiveTrie> tries_;
  std::vector<std::vector<ToolId>> pools_;
};

// Lexical baseline over the same pools.
class Bm25Retriever : public Retriever {
 public:
  explicit Bm25Retriever(Bm25Params params = {});
  void prepare(const ToolRegistry& registry,
               const std::vector<std::vector<ToolId>>& pools) override;
  std::vector<ToolId> rank(const std::string& query, size_t pool,
                           size_t top_k) const override;

 private:
  Bm25Params params_;
  std::vector<Bm25Index> indexes_;
};

struct NdcgCell {
  size_t query_count = 0;
  size_t excluded = 0;        // relevant set disjoint from the pool
  size_t empty_relevant = 0;  // annotated with no relevant tools at all
  std::map<size_t, double> mean_ndcg;  // cutoff -> mean over scored queries
};

struct NdcgReport {
  Setting setting = Setting::kInDomain;
  std::vector<size_t> cutoffs;
  std::map<Domain, NdcgCell> by_domain;

  void write_json(std::ostream& out) const;
  void write_csv(std::ostream& out) const;
  void write_table(std::ostream& out) const;
};

struct EvalConfig {
  std::vector<size_t> cutoffs = {1, 3, 5};
  size_t threads = 1;  // queries are scored in parallel when > 1
};

// Evaluates `retriever` under `setting`. Candidate pools default to the
// per-domain union of annotated relevant tools (multi-domain: one pool with
// the union of everything). Pass `pool_override` to rank against explicit
// pools instead; queries whose relevant tools all fall outside their pool
// are then excluded from the mean and surfaced in the report.
NdcgReport evaluate_retrieval(
    Retriever& retriever, const ToolRegistry& registry,
    const std::vector<QueryAnnotation>& annotations, Setting setting,
    const EvalConfig& config = {},
    const std::map<Domain, std::vector<ToolId>>* pool_override = nullptr);

}  // namespace toolvoc
