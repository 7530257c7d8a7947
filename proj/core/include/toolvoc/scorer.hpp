// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "toolvoc/chat.hpp"

namespace toolvoc {

// Next-token distribution source. `prompt` is the conditioning context and
// `generated` the suffix produced so far in this decode; they are passed
// separately because scorers may treat them differently (the count scorer
// keys on an order-insensitive view of the prompt but an ordered suffix).
// Returns a full probability distribution over the vocabulary: size() ==
// vocab_size(), entries >= 0, summing to 1 within rounding.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual size_t vocab_size() const = 0;
  virtual std::vector<double> next_distribution(
      std::span<const TokenId> prompt,
      std::span<const TokenId> generated) const = 0;
};

// Uniform over the vocabulary. The analytic baseline in tests.
class UniformScorer : public Scorer {
 public:
  explicit UniformScorer(size_t vocab_size);
  size_t vocab_size() const override { return vocab_size_; }
  std::vector<double> next_distribution(
      std::span<const TokenId>, std::span<const TokenId>) const override;

 private:
  size_t vocab_size_;
};

// Additively smoothed conditional count model, the deterministic stand-in
// for a fine-tuned LLM. The context key is the multiset of base-token ids in
// the prompt (atomic and special ids are kept as-is but order is dropped)
// concatenated with the ordered generated suffix. Unseen contexts therefore
// fall back to the uniform distribution implied by the smoothing term.
class CountScorer : public Scorer {
 public:
  CountScorer(size_t vocab_size, double alpha, size_t base_size);

  size_t vocab_size() const override { return vocab_size_; }
  std::vector<double> next_distribution(
      std::span<const TokenId> prompt,
      std::span<const TokenId> generated) const override;

  // Adds one observation: after (input, preceding target tokens), `next`
  // was emitted. Training walks each pair once per target position,
  // including the terminal eos.
  void observe(std::span<const TokenId> input,
               std::span<const TokenId> target_prefix, TokenId next);

  double alpha() const { return alpha_; }
  size_t base_size() const { return base_size_; }
  size_t context_count() const { return table_.size(); }

  // Deterministic JSON dump/load: contexts sorted by key, counts by token.
  void save(std::ostream& out) const;
  static CountScorer load(std::istream& in, const std::string& where);

 private:
  struct Key {
    std::vector<TokenId> bag;     // sorted prompt ids
    std::vector<TokenId> suffix;  // ordered generated ids
    bool operator<(const Key& o) const {
      if (bag != o.bag) return bag < o.bag;
      return suffix < o.suffix;
    }
  };
  Key make_key(std::span<const TokenId> prompt,
               std::span<const TokenId> generated) const;

  size_t vocab_size_;
  double alpha_;
  size_t base_size_;
  std::map<Key, std::map<TokenId, uint64_t>> table_;
};

// Trains a count scorer on (input, target) pairs. Every pair contributes one
// observation per target token plus one for the terminal eos. alpha must be
// positive (zero would make unseen contexts undefined, not uniform).
CountScorer train_count_scorer(
    const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs, double alpha,
    size_t vocab_size, size_t base_size, TokenId eos);

struct NllResult {
  double value = 0.0;    // sum of -log p over target tokens plus eos
  bool had_zero = false; // a target token had probability exactly 0
};

// Negative log-likelihood of `target` (with terminal eos) under `scorer`.
NllResult nll(const Scorer& scorer, const TokenSeq& input,
              const TokenSeq& target, TokenId eos);

}  // namespace toolvoc
