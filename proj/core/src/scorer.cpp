// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "json_io.hpp"
#include "toolvoc/error.hpp"

namespace toolvoc {

using detail::json;

UniformScorer::UniformScorer(size_t vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size == 0) throw InvalidArgument("vocab_size must be positive");
}

std::vector<double> UniformScorer::next_distribution(
    std::span<const TokenId>, std::span<const TokenId>) const {
  return std::vector<double>(vocab_size_, 1.0 / static_cast<double>(vocab_size_));
}

CountScorer::CountScorer(size_t vocab_size, double alpha, size_t base_size)
    : vocab_size_(vocab_size), alpha_(alpha), base_size_(base_size) {
  if (vocab_size == 0) throw InvalidArgument("vocab_size must be positive");
  if (alpha <= 0.0)
    throw InvalidArgument("alpha must be positive (unseen contexts would be undefined)");
  (void)base_size_;
}

CountScorer::Key CountScorer::make_key(
    std::span<const TokenId> prompt, std::span<const TokenId> generated) const {
  Key key;
  key.bag.assign(prompt.begin(), prompt.end());
  std::sort(key.bag.begin(), key.bag.end());
  key.suffix.assign(generated.begin(), generated.end());
  return key;
}

std::vector<double> CountScorer::next_distribution(
    std::span<const TokenId> prompt, std::span<const TokenId> generated) const {
  std::vector<double> probs(vocab_size_, 0.0);
  const double v = static_cast<double>(vocab_size_);
  auto it = table_.find(make_key(prompt, generated));
  if (it == table_.end()) {
    std::fill(probs.begin(), probs.end(), 1.0 / v);
    return probs;
  }
  uint64_t total = 0;
  for (const auto& [token, count] : it->second) total += count;
  const double denom = static_cast<double>(total) + alpha_ * v;
  for (size_t t = 0; t < vocab_size_; ++t) {
    auto ct = it->second.find(static_cast<TokenId>(t));
    const double c = ct == it->second.end() ? 0.0 : static_cast<double>(ct->second);
    probs[t] = (c + alpha_) / denom;
  }
  return probs;
}

void CountScorer::observe(std::span<const TokenId> input,
                          std::span<const TokenId> target_prefix,
                          TokenId next) {
  if (next >= vocab_size_)
    throw InvalidArgument("observed token outside vocabulary");
  ++table_[make_key(input, target_prefix)][next];
}

void CountScorer::save(std::ostream& out) const {
  json doc;
  doc["kind"] = "count-scorer";
  doc["version"] = 1;
  doc["vocab_size"] = vocab_size_;
  doc["alpha"] = alpha_;
  doc["base_size"] = base_size_;
  json contexts = json::array();
  // std::map keys are already sorted; dump in that order for stable bytes.
  for (const auto& [key, counts] : table_) {
    json entry;
    entry["bag"] = key.bag;
    entry["suffix"] = key.suffix;
    json cts = json::array();
    for (const auto& [token, count] : counts)
      cts.push_back(json::array({token, count}));
    entry["counts"] = std::move(cts);
    contexts.push_back(std::move(entry));
  }
  doc["contexts"] = std::move(contexts);
  out << doc.dump(2) << "\n";
}

CountScorer CountScorer::load(std::istream& in, const std::string& where) {
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  json doc = detail::parse_json(text, where);
  if (!doc.is_object() || doc.value("kind", "") != "count-scorer")
    throw ParseError(where, "not a count-scorer dump");
  CountScorer scorer(doc.at("vocab_size").get<size_t>(),
                     doc.at("alpha").get<double>(),
                     doc.at("base_size").get<size_t>());
  for (const json& entry : doc.at("contexts")) {
    Key key;
    key.bag = entry.at("bag").get<std::vector<TokenId>>();
    key.suffix = entry.at("suffix").get<std::vector<TokenId>>();
    if (!std::is_sorted(key.bag.begin(), key.bag.end()))
      throw ParseError(where, "context bag must be sorted");
    auto& counts = scorer.table_[key];
    for (const json& ct : entry.at("counts"))
      counts[ct.at(0).get<TokenId>()] = ct.at(1).get<uint64_t>();
  }
  return scorer;
}

CountScorer train_count_scorer(
    const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs, double alpha,
    size_t vocab_size, size_t base_size, TokenId eos) {
  CountScorer scorer(vocab_size, alpha, base_size);
  for (const auto& [input, target] : pairs) {
    for (size_t i = 0; i < target.size(); ++i)
      scorer.observe(input, std::span(target.data(), i), target[i]);
    scorer.observe(input, target, eos);
  }
  return scorer;
}

NllResult nll(const Scorer& scorer, const TokenSeq& input,
              const TokenSeq& target, TokenId eos) {
  NllResult result;
  TokenSeq so_far;
  so_far.reserve(target.size());
  auto add = [&](TokenId next) {
    std::vector<double> probs = scorer.next_distribution(input, so_far);
    double p = next < probs.size() ? probs[next] : 0.0;
    if (p <= 0.0) {
      result.had_zero = true;
      return;
    }
    result.value -= std::log(p);
  };
  for (TokenId t : target) {
    add(t);
    so_far.push_back(t);
  }
  add(eos);
  return result;
}

}  // namespace toolvoc
