// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "toolvoc/registry.hpp"

namespace toolvoc {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct ScoredDoc {
  ToolId id;
  double score = 0.0;
};

// Okapi BM25 over tool document text. Tokenization is lowercase alphanumeric
// words; idf uses the ln(1 + (N - df + 0.5) / (df + 0.5)) form, which keeps
// scores non-negative. Query terms contribute once per occurrence.
class Bm25Index {
 public:
  // Indexes doc_text of every registry document, or only `pool` when given.
  explicit Bm25Index(const ToolRegistry& registry, Bm25Params params = {});
  Bm25Index(const ToolRegistry& registry, const std::vector<ToolId>& pool,
            Bm25Params params = {});

  // Top documents by score, descending; ties break by ordinal ascending.
  // Only documents with score > 0 are returned, so the result may be
  // shorter than `top_k`.
  std::vector<ScoredDoc> retrieve(const std::string& query,
                                  size_t top_k) const;

  double score(const std::string& query, ToolId id) const;
  size_t doc_count() const { return doc_ids_.size(); }

  static std::vector<std::string> tokenize(const std::string& text);

 private:
  Bm25Params params_;
  std::vector<ToolId> doc_ids_;
  std::vector<size_t> doc_len_;
  double avg_len_ = 0.0;
  // term -> (slot in doc_ids_, term frequency)
  std::unordered_map<std::string, std::vector<std::pair<uint32_t, uint32_t>>>
      postings_;
};

}  // namespace toolvoc
