// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "toolvoc/chat.hpp"

namespace toolvoc {

// Deterministic tokenizer with an expandable vocabulary.
//
// The base vocabulary is fixed: <eos>, <pad>, then the 256 single bytes.
// Added tokens ("atomic" tokens, one per tool surface) are appended after the
// base block and are matched greedily longest-first during encoding, so a
// surface like "<<Youtube Hub&&Get Video Details>>" always encodes to exactly
// one id once registered. Specials never match raw text.
class Vocabulary {
 public:
  // Base vocabulary, optionally reserving space for `extra` surfaces up
  // front (reservation only; ids are still assigned by add_atomic_tokens).
  static Vocabulary byte_base(size_t extra = 0);

  TokenId eos() const { return kEos; }
  TokenId pad() const { return kPad; }
  size_t size() const { return surfaces_.size(); }
  size_t base_size() const { return kBaseSize; }
  size_t atomic_count() const { return surfaces_.size() - kBaseSize; }

  // Appends one token per surface, in order, returning the id of the first.
  // Surfaces must be non-empty and must not collide with each other, with
  // existing atomic tokens, or with a single byte. Throws InvalidArgument.
  TokenId add_atomic_tokens(const std::vector<std::string>& surfaces);

  std::optional<TokenId> find(std::string_view surface) const;
  const std::string& surface(TokenId id) const;
  bool is_atomic(TokenId id) const { return id >= kBaseSize; }
  bool is_special(TokenId id) const { return id == kEos || id == kPad; }

  // Greedy longest-match encoding. At every input position the longest
  // registered surface starting there wins; single bytes are the fallback, so
  // encoding never fails. Specials are never produced.
  TokenSeq encode(std::string_view text) const;

  // Inverse of encode for non-special tokens; specials are skipped.
  std::string decode(const TokenSeq& tokens) const;

  // Tab-separated dump/load. Round-trips exactly (surfaces are escaped).
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in, const std::string& where);

  static constexpr TokenId kEos = 0;
  static constexpr TokenId kPad = 1;
  static constexpr size_t kBaseSize = 258;  // eos, pad, 256 bytes

 private:
  Vocabulary() = default;

  std::vector<std::string> surfaces_;  // id -> surface
  // Atomic-surface lookup, bucketed by first byte with per-bucket surfaces
  // sorted longest-first. Tiny registries stay fast and scans stay ordered.
  std::unordered_map<std::string, TokenId> atomic_ids_;
  std::vector<std::vector<TokenId>> by_first_byte_ = std::vector<std::vector<TokenId>>(256);
};

// Row-major embedding matrix, uniform-initialized in [-0.5, 0.5).
class EmbeddingTable {
 public:
  EmbeddingTable(size_t rows, size_t dim, uint64_t seed);

  size_t rows() const { return rows_; }
  size_t dim() const { return dim_; }
  double* row(size_t r) { return data_.data() + r * dim_; }
  const double* row(size_t r) const { return data_.data() + r * dim_; }

 private:
  size_t rows_;
  size_t dim_;
  std::vector<double> data_;
};

// Initializes `token`'s row to the mean of the base-token rows of
// encode(name). Throws InvalidArgument if `name` encodes to nothing.
void init_embedding(const Vocabulary& vocab, EmbeddingTable& table,
                    TokenId token, const std::string& name);

}  // namespace toolvoc
