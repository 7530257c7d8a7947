// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "toolvoc/chat.hpp"

namespace toolvoc {

// Prefix trie over token sequences, used as the legality oracle during
// constrained decoding. Every inserted sequence is stored with `terminator`
// appended, so "may stop here" and "may continue with token t" are the same
// question: is t a child of the current node?
class DisjunctiveTrie {
 public:
  // Builds from `sequences` (insertion order does not matter; the structure
  // only reflects the set). Sequences must be non-empty and must not already
  // contain the terminator. Duplicate sequences are fine.
  DisjunctiveTrie(const std::vector<TokenSeq>& sequences, TokenId terminator);

  TokenId terminator() const { return terminator_; }
  size_t sequence_count() const { return sequence_count_; }
  size_t node_count() const { return nodes_.size(); }

  using NodeRef = uint32_t;
  static constexpr NodeRef kRoot = 0;

  // Tokens allowed after the prefix identified by `node`, ascending id order.
  // Includes the terminator when a full sequence ends here.
  const std::vector<TokenId>& feasible_next(NodeRef node) const;

  // Steps from `node` along `token`; nullopt when the move is illegal.
  std::optional<NodeRef> step(NodeRef node, TokenId token) const;

  // Walks a whole prefix from the root; nullopt when any step is illegal.
  std::optional<NodeRef> walk(const TokenSeq& prefix) const;

  // True when `prefix` is a complete inserted sequence (terminator allowed).
  bool is_complete(const TokenSeq& prefix) const;

 private:
  struct Node {
    std::unordered_map<TokenId, NodeRef> children;
    std::vector<TokenId> order;  // children keys, sorted ascending
  };

  std::vector<Node> nodes_;
  TokenId terminator_;
  size_t sequence_count_ = 0;
};

}  // namespace toolvoc
