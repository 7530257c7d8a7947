// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/tokenizer.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "toolvoc/error.hpp"
#include "toolvoc/rng.hpp"

namespace toolvoc {

namespace {

std::string escape_surface(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          static const char* hex = "0123456789abcdef";
          out += "\\x";
          out += hex[c >> 4];
          out += hex[c & 0xf];
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

std::string unescape_surface(const std::string& s, const std::string& where) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i >= s.size()) throw ParseError(where, "dangling escape");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 'x': {
        if (i + 2 >= s.size()) throw ParseError(where, "truncated \\x escape");
        auto nibble = [&](char c) -> int {
          if (c >= '0' && c <= '9') return c - '0';
          if (c >= 'a' && c <= 'f') return c - 'a' + 10;
          if (c >= 'A' && c <= 'F') return c - 'A' + 10;
          throw ParseError(where, "bad hex digit in \\x escape");
        };
        out += static_cast<char>(nibble(s[i + 1]) * 16 + nibble(s[i + 2]));
        i += 2;
        break;
      }
      default: throw ParseError(where, "unknown escape");
    }
  }
  return out;
}

}  // namespace

Vocabulary Vocabulary::byte_base(size_t extra) {
  Vocabulary v;
  v.surfaces_.reserve(kBaseSize + extra);
  v.surfaces_.emplace_back("<eos>");
  v.surfaces_.emplace_back("<pad>");
  for (int b = 0; b < 256; ++b)
    v.surfaces_.emplace_back(1, static_cast<char>(b));
  return v;
}

TokenId Vocabulary::add_atomic_tokens(const std::vector<std::string>& surfaces) {
  if (surfaces.empty()) throw InvalidArgument("no surfaces to add");
  for (const std::string& s : surfaces) {
    if (s.size() < 2)
      throw InvalidArgument("atomic surface too short (would shadow a byte): '" +
                            s + "'");
    if (atomic_ids_.count(s))
      throw InvalidArgument("duplicate atomic surface: '" + s + "'");
  }
  // Reject duplicates inside the batch before mutating anything.
  {
    std::vector<std::string> sorted = surfaces;
    std::sort(sorted.begin(), sorted.end());
    auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end())
      throw InvalidArgument("duplicate atomic surface in batch: '" + *dup + "'");
  }
  TokenId first = static_cast<TokenId>(surfaces_.size());
  for (const std::string& s : surfaces) {
    TokenId id = static_cast<TokenId>(surfaces_.size());
    surfaces_.push_back(s);
    atomic_ids_.emplace(s, id);
    auto& bucket = by_first_byte_[static_cast<unsigned char>(s[0])];
    // Keep each bucket longest-first so greedy encoding scans in match order.
    auto pos = std::find_if(bucket.begin(), bucket.end(), [&](TokenId other) {
      return surfaces_[other].size() < s.size();
    });
    bucket.insert(pos, id);
  }
  return first;
}

std::optional<TokenId> Vocabulary::find(std::string_view surface) const {
  if (auto it = atomic_ids_.find(std::string(surface)); it != atomic_ids_.end())
    return it->second;
  if (surface.size() == 1)
    return static_cast<TokenId>(2 + static_cast<unsigned char>(surface[0]));
  if (surface == "<eos>") return kEos;
  if (surface == "<pad>") return kPad;
  return std::nullopt;
}

const std::string& Vocabulary::surface(TokenId id) const {
  if (id >= surfaces_.size())
    throw InvalidArgument("token id out of range: " + std::to_string(id));
  return surfaces_[id];
}

TokenSeq Vocabulary::encode(std::string_view text) const {
  TokenSeq out;
  out.reserve(text.size());
  size_t pos = 0;
  while (pos < text.size()) {
    const auto& bucket = by_first_byte_[static_cast<unsigned char>(text[pos])];
    TokenId matched = 0;
    size_t matched_len = 0;
    for (TokenId id : bucket) {  // longest-first
      const std::string& s = surfaces_[id];
      if (s.size() <= text.size() - pos &&
          text.compare(pos, s.size(), s) == 0) {
        matched = id;
        matched_len = s.size();
        break;
      }
    }
    if (matched_len == 0) {  // single-byte fallback, never fails
      matched = static_cast<TokenId>(2 + static_cast<unsigned char>(text[pos]));
      matched_len = 1;
    }
    out.push_back(matched);
    pos += matched_len;
  }
  return out;
}

std::string Vocabulary::decode(const TokenSeq& tokens) const {
  std::string out;
  for (TokenId id : tokens) {
    if (is_special(id)) continue;
    out += surface(id);
  }
  return out;
}

void Vocabulary::save(std::ostream& out) const {
  out << "#toolvoc-vocab v1\n";
  out << "#base_size " << kBaseSize << "\n";
  out << "#atomic " << atomic_count() << "\n";
  for (size_t id = kBaseSize; id < surfaces_.size(); ++id)
    out << escape_surface(surfaces_[id]) << "\t" << id << "\n";
}

Vocabulary Vocabulary::load(std::istream& in, const std::string& where) {
  std::string line;
  if (!std::getline(in, line) || line != "#toolvoc-vocab v1")
    throw ParseError(where, "bad vocabulary header");
  size_t base = 0, atomic = 0;
  if (!std::getline(in, line) || line.rfind("#base_size ", 0) != 0)
    throw ParseError(where, "missing #base_size");
  base = std::stoull(line.substr(11));
  if (base != kBaseSize)
    throw ParseError(where, "unsupported base size " + std::to_string(base));
  if (!std::getline(in, line) || line.rfind("#atomic ", 0) != 0)
    throw ParseError(where, "missing #atomic");
  atomic = std::stoull(line.substr(8));

  Vocabulary v = byte_base(atomic);
  std::vector<std::string> surfaces;
  surfaces.reserve(atomic);
  size_t lineno = 3;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string at = where + ":" + std::to_string(lineno);
    size_t tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(at, "missing tab separator");
    std::string surface = unescape_surface(line.substr(0, tab), at);
    TokenId id = static_cast<TokenId>(std::stoul(line.substr(tab + 1)));
    if (id != kBaseSize + surfaces.size())
      throw ParseError(at, "token ids must be dense and in order");
    surfaces.push_back(std::move(surface));
  }
  if (surfaces.size() != atomic)
    throw ParseError(where, "surface count does not match #atomic");
  if (!surfaces.empty()) v.add_atomic_tokens(surfaces);
  return v;
}

EmbeddingTable::EmbeddingTable(size_t rows, size_t dim, uint64_t seed)
    : rows_(rows), dim_(dim), data_(rows * dim) {
  DetRng rng(seed);
  for (double& x : data_) x = rng.uniform(-0.5, 0.5);
}

void init_embedding(const Vocabulary& vocab, EmbeddingTable& table,
                    TokenId token, const std::string& name) {
  if (token >= table.rows()) throw InvalidArgument("token row out of range");
  TokenSeq parts = vocab.encode(name);
  std::vector<TokenId> base;
  for (TokenId id : parts)
    if (id < Vocabulary::kBaseSize && !vocab.is_special(id)) base.push_back(id);
  if (base.empty())
    throw InvalidArgument("name encodes to no base tokens: '" + name + "'");
  double* out = table.row(token);
  for (size_t d = 0; d < table.dim(); ++d) out[d] = 0.0;
  for (TokenId id : base) {
    const double* row = table.row(id);
    for (size_t d = 0; d < table.dim(); ++d) out[d] += row[d];
  }
  for (size_t d = 0; d < table.dim(); ++d)
    out[d] /= static_cast<double>(base.size());
}

}  // namespace toolvoc
