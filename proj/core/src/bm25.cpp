// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "toolvoc/error.hpp"

namespace toolvoc {

std::vector<std::string> Bm25Index::tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      word += static_cast<char>(std::tolower(c));
    } else if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

Bm25Index::Bm25Index(const ToolRegistry& registry, Bm25Params params)
    : Bm25Index(registry,
                [&] {
                  std::vector<ToolId> all(registry.size());
                  for (uint32_t i = 0; i < registry.size(); ++i)
                    all[i] = ToolId{i};
                  return all;
                }(),
                params) {}

Bm25Index::Bm25Index(const ToolRegistry& registry,
                     const std::vector<ToolId>& pool, Bm25Params params)
    : params_(params), doc_ids_(pool) {
  if (pool.empty()) throw InvalidArgument("BM25 pool is empty");
  doc_len_.resize(pool.size());
  size_t total_len = 0;
  for (uint32_t slot = 0; slot < pool.size(); ++slot) {
    std::vector<std::string> terms = tokenize(registry.doc_text(pool[slot]));
    doc_len_[slot] = terms.size();
    total_len += terms.size();
    std::unordered_map<std::string, uint32_t> tf;
    for (std::string& t : terms) ++tf[std::move(t)];
    for (auto& [term, count] : tf) postings_[term].push_back({slot, count});
  }
  avg_len_ = static_cast<double>(total_len) / static_cast<double>(pool.size());
  // Postings arrive in slot order already (outer loop), nothing to sort.
}

std::vector<ScoredDoc> Bm25Index::retrieve(const std::string& query,
                                           size_t top_k) const {
  std::vector<double> scores(doc_ids_.size(), 0.0);
  const double n = static_cast<double>(doc_ids_.size());
  for (const std::string& term : tokenize(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double df = static_cast<double>(it->second.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& [slot, tf] : it->second) {
      const double len_norm =
          1.0 - params_.b + params_.b * (static_cast<double>(doc_len_[slot]) / avg_len_);
      scores[slot] += idf * (static_cast<double>(tf) * (params_.k1 + 1.0)) /
                      (static_cast<double>(tf) + params_.k1 * len_norm);
    }
  }
  std::vector<uint32_t> slots;
  for (uint32_t s = 0; s < scores.size(); ++s)
    if (scores[s] > 0.0) slots.push_back(s);
  std::sort(slots.begin(), slots.end(), [&](uint32_t a, uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return doc_ids_[a].ordinal < doc_ids_[b].ordinal;
  });
  if (slots.size() > top_k) slots.resize(top_k);
  std::vector<ScoredDoc> out;
  out.reserve(slots.size());
  for (uint32_t s : slots) out.push_back({doc_ids_[s], scores[s]});
  return out;
}

double Bm25Index::score(const std::string& query, ToolId id) const {
  auto slot_it = std::find_if(doc_ids_.begin(), doc_ids_.end(),
                              [&](ToolId d) { return d == id; });
  if (slot_it == doc_ids_.end())
    throw InvalidArgument("document not in this index");
  const uint32_t slot = static_cast<uint32_t>(slot_it - doc_ids_.begin());
  const double n = static_cast<double>(doc_ids_.size());
  double total = 0.0;
  for (const std::string& term : tokenize(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    auto entry = std::find_if(it->second.begin(), it->second.end(),
                              [&](const auto& p) { return p.first == slot; });
    if (entry == it->second.end()) continue;
    const double df = static_cast<double>(it->second.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    const double len_norm =
        1.0 - params_.b + params_.b * (static_cast<double>(doc_len_[slot]) / avg_len_);
    total += idf * (static_cast<double>(entry->second) * (params_.k1 + 1.0)) /
             (static_cast<double>(entry->second) + params_.k1 * len_norm);
  }
  return total;
}

}  // namespace toolvoc
