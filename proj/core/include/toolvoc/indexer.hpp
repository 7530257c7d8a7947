// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "toolvoc/chat.hpp"
#include "toolvoc/registry.hpp"
#include "toolvoc/tokenizer.hpp"

namespace toolvoc {

// How tool documents are mapped to generable token sequences.
enum class SchemeKind {
  kAtomic,        // one fresh token "<<{tool}&&{api}>>" per document
  kSemantic,      // "{api}_for_{tool}", normalized, encoded with base tokens
  kNumeric,       // zero-padded decimal ordinal, one digit token per char
  kHierarchical,  // digit path from recursive clustering of document text
};

const char* scheme_name(SchemeKind kind);

struct IndexScheme {
  SchemeKind kind = SchemeKind::kAtomic;
  int numeric_width = 6;   // digits per numeric identifier
  int branching = 10;      // fan-out per hierarchical level, 2..10
  uint64_t seed = 0;       // hierarchical clustering seed
};

// The per-document result of indexing: a human-readable surface plus the
// token sequence a model must emit to name the document.
struct IndexedTool {
  ToolId id;
  std::string surface;
  TokenSeq tokens;
};

class ToolIndex {
 public:
  const IndexScheme& scheme() const { return scheme_; }
  size_t size() const { return entries_.size(); }
  const IndexedTool& entry(ToolId id) const;
  const std::vector<IndexedTool>& entries() const { return entries_; }

  // Reverse lookup from an emitted token sequence. Exact match only.
  std::optional<ToolId> resolve(const TokenSeq& tokens) const;
  std::optional<ToolId> resolve_surface(const std::string& surface) const;

  // Histogram of token-sequence lengths: length -> number of documents.
  std::map<size_t, size_t> length_histogram() const;

  // All token sequences in ordinal order (the trie build input).
  std::vector<TokenSeq> all_sequences() const;

 private:
  friend ToolIndex build_index(const ToolRegistry&, const IndexScheme&,
                               Vocabulary&,
                               const std::vector<std::vector<double>>*);
  IndexScheme scheme_;
  std::vector<IndexedTool> entries_;  // ordinal order
  std::map<std::vector<TokenId>, ToolId> by_tokens_;
  std::map<std::string, ToolId> by_surface_;
};

// Builds an index over the whole registry. Atomic indexing registers new
// vocabulary tokens (one per document); the other schemes reuse base tokens.
// `features` optionally overrides the clustering inputs for the hierarchical
// scheme (one vector per document, all the same dimension); by default
// documents are clustered on hashed character trigrams of their doc_text.
// Throws InvalidArgument on bad scheme parameters or unrepresentable
// ordinals (numeric width too small for the registry).
ToolIndex build_index(const ToolRegistry& registry, const IndexScheme& scheme,
                      Vocabulary& vocab,
                      const std::vector<std::vector<double>>* features = nullptr);

// Normalization used by the semantic scheme: lowercase, collapse every run
// of non-alphanumerics to one underscore, trim underscores at the ends.
std::string semantic_normalize(const std::string& text);

// The canonical rendering helpers, exposed because datasets and the agent
// need to format surfaces the same way the indexer does.
std::string atomic_surface(const ToolDocument& doc);
std::string semantic_surface(const ToolDocument& doc);

}  // namespace toolvoc
