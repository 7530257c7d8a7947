// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/trie.hpp"

#include <algorithm>

#include "toolvoc/error.hpp"

namespace toolvoc {

DisjunctiveTrie::DisjunctiveTrie(const std::vector<TokenSeq>& sequences,
                                 TokenId terminator)
    : terminator_(terminator) {
  nodes_.emplace_back();  // root
  for (const TokenSeq& seq : sequences) {
    if (seq.empty()) throw InvalidArgument("empty sequence in trie");
    NodeRef node = kRoot;
    for (TokenId t : seq) {
      if (t == terminator_)
        throw InvalidArgument("sequence contains the terminator token");
      auto [it, inserted] =
          nodes_[node].children.emplace(t, static_cast<NodeRef>(nodes_.size()));
      if (inserted) nodes_.emplace_back();
      node = it->second;
    }
    // Idempotent for duplicate sequences: the terminator edge reuses the
    // same leaf node.
    auto [it, inserted] = nodes_[node].children.emplace(
        terminator_, static_cast<NodeRef>(nodes_.size()));
    if (inserted) {
      nodes_.emplace_back();
      ++sequence_count_;
    }
  }
  for (Node& n : nodes_) {
    n.order.reserve(n.children.size());
    for (const auto& [token, child] : n.children) n.order.push_back(token);
    std::sort(n.order.begin(), n.order.end());
  }
}

const std::vector<TokenId>& DisjunctiveTrie::feasible_next(
    NodeRef node) const {
  return nodes_[node].order;
}

std::optional<DisjunctiveTrie::NodeRef> DisjunctiveTrie::step(
    NodeRef node, TokenId token) const {
  const auto& children = nodes_[node].children;
  auto it = children.find(token);
  if (it == children.end()) return std::nullopt;
  return it->second;
}

std::optional<DisjunctiveTrie::NodeRef> DisjunctiveTrie::walk(
    const TokenSeq& prefix) const {
  NodeRef node = kRoot;
  for (TokenId t : prefix) {
    auto next = step(node, t);
    if (!next) return std::nullopt;
    node = *next;
  }
  return node;
}

bool DisjunctiveTrie::is_complete(const TokenSeq& prefix) const {
  auto node = walk(prefix);
  if (!node) return false;
  return nodes_[*node].children.count(terminator_) > 0;
}

}  // namespace toolvoc
