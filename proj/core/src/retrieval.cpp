// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>

#include "json_io.hpp"
#include "parallel.hpp"
#include "toolvoc/decode.hpp"
#include "toolvoc/error.hpp"

namespace toolvoc {

using detail::json;

double ndcg_at(const std::vector<ToolId>& ranked,
               const std::set<uint32_t>& relevant_ordinals, size_t cutoff) {
  if (relevant_ordinals.empty() || cutoff == 0) return 0.0;
  double dcg = 0.0;
  const size_t depth = std::min(cutoff, ranked.size());
  for (size_t i = 0; i < depth; ++i) {
    // Binary relevance: gain (2^rel - 1) is 1 or 0, discount log2(rank+1)
    // with ranks starting at 1.
    if (relevant_ordinals.count(ranked[i].ordinal))
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  const size_t ideal = std::min(relevant_ordinals.size(), cutoff);
  for (size_t i = 0; i < ideal; ++i)
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

const char* setting_name(Setting s) {
  return s == Setting::kInDomain ? "in-domain" : "multi-domain";
}

GenerativeRetriever::GenerativeRetriever(const Scorer& scorer,
                                         const Vocabulary& vocab,
                                         const ToolIndex& index)
    : scorer_(scorer), vocab_(vocab), index_(index) {}

void GenerativeRetriever::prepare(
    const ToolRegistry& registry,
    const std::vector<std::vector<ToolId>>& pools) {
  (void)registry;
  tries_.clear();
  pools_ = pools;
  tries_.reserve(pools.size());
  for (const std::vector<ToolId>& pool : pools) {
    std::vector<TokenSeq> sequences;
    sequences.reserve(pool.size());
    for (ToolId id : pool) sequences.push_back(index_.entry(id).tokens);
    tries_.emplace_back(sequences, vocab_.eos());
  }
}

std::vector<ToolId> GenerativeRetriever::rank(const std::string& query,
                                              size_t pool,
                                              size_t top_k) const {
  if (pool >= tries_.size()) throw InvalidArgument("pool index out of range");
  TokenSeq prompt = vocab_.encode(query);
  std::vector<BeamHypothesis> hyps =
      constrained_beam_search(scorer_, prompt, tries_[pool], top_k);
  std::vector<ToolId> out;
  out.reserve(hyps.size());
  for (const BeamHypothesis& h : hyps) {
    auto id = index_.resolve(h.tokens);
    if (id) out.push_back(*id);  // trie-built sequences always resolve
  }
  return out;
}

Bm25Retriever::Bm25Retriever(Bm25Params params) : params_(params) {}

void Bm25Retriever::prepare(const ToolRegistry& registry,
                            const std::vector<std::vector<ToolId>>& pools) {
  indexes_.clear();
  indexes_.reserve(pools.size());
  for (const std::vector<ToolId>& pool : pools)
    indexes_.emplace_back(registry, pool, params_);
}

std::vector<ToolId> Bm25Retriever::rank(const std::string& query, size_t pool,
                                        size_t top_k) const {
  if (pool >= indexes_.size()) throw InvalidArgument("pool index out of range");
  std::vector<ToolId> out;
  for (const ScoredDoc& d : indexes_[pool].retrieve(query, top_k))
    out.push_back(d.id);
  return out;
}

namespace {

std::vector<ToolId> sorted_union(const std::vector<std::vector<ToolId>>& sets) {
  std::set<uint32_t> ordinals;
  for (const auto& s : sets)
    for (ToolId id : s) ordinals.insert(id.ordinal);
  std::vector<ToolId> out;
  out.reserve(ordinals.size());
  for (uint32_t o : ordinals) out.push_back(ToolId{o});
  return out;
}

constexpr Domain kAllDomains[] = {Domain::kSingleTool, Domain::kIntraCategory,
                                  Domain::kCrossCategory};

}  // namespace

NdcgReport evaluate_retrieval(
    Retriever& retriever, const ToolRegistry& registry,
    const std::vector<QueryAnnotation>& annotations, Setting setting,
    const EvalConfig& config,
    const std::map<Domain, std::vector<ToolId>>* pool_override) {
  if (annotations.empty()) throw InvalidArgument("no annotations to evaluate");
  if (config.cutoffs.empty()) throw InvalidArgument("no cutoffs configured");

  // Per-domain relevant unions are the default candidate pools.
  std::map<Domain, std::vector<ToolId>> domain_pool;
  if (pool_override) {
    domain_pool = *pool_override;
  } else {
    std::map<Domain, std::vector<std::vector<ToolId>>> grouped;
    for (const QueryAnnotation& q : annotations)
      grouped[q.domain].push_back(q.relevant);
    for (auto& [domain, sets] : grouped)
      domain_pool[domain] = sorted_union(sets);
  }

  std::vector<std::vector<ToolId>> pools;
  std::map<Domain, size_t> pool_of_domain;
  if (setting == Setting::kMultiDomain) {
    std::vector<std::vector<ToolId>> all;
    for (const auto& [domain, pool] : domain_pool) all.push_back(pool);
    pools.push_back(sorted_union(all));
    for (Domain d : kAllDomains) pool_of_domain[d] = 0;
  } else {
    for (const auto& [domain, pool] : domain_pool) {
      pool_of_domain[domain] = pools.size();
      pools.push_back(pool);
    }
  }
  retriever.prepare(registry, pools);

  const size_t max_cutoff =
      *std::max_element(config.cutoffs.begin(), config.cutoffs.end());

  struct QueryScore {
    bool scored = false;
    bool excluded = false;
    bool empty_relevant = false;
    std::vector<double> ndcg;  // parallel to config.cutoffs
  };
  std::vector<QueryScore> scores(annotations.size());

  detail::parallel_for(annotations.size(), config.threads, [&](size_t qi) {
    const QueryAnnotation& q = annotations[qi];
    QueryScore& slot = scores[qi];
    if (q.relevant.empty()) {
      slot.empty_relevant = true;
      return;
    }
    auto pool_it = pool_of_domain.find(q.domain);
    if (pool_it == pool_of_domain.end()) {
      slot.excluded = true;
      return;
    }
    const std::vector<ToolId>& pool = pools[pool_it->second];
    std::set<uint32_t> relevant;
    for (ToolId id : q.relevant)
      if (std::binary_search(pool.begin(), pool.end(), id,
                             [](ToolId a, ToolId b) { return a < b; }))
        relevant.insert(id.ordinal);
    if (relevant.empty()) {
      slot.excluded = true;  // nothing reachable inside this pool
      return;
    }
    std::vector<ToolId> ranked = retriever.rank(q.query, pool_it->second, max_cutoff);
    slot.scored = true;
    slot.ndcg.reserve(config.cutoffs.size());
    for (size_t cutoff : config.cutoffs)
      slot.ndcg.push_back(ndcg_at(ranked, relevant, cutoff));
  });

  NdcgReport report;
  report.setting = setting;
  report.cutoffs = config.cutoffs;
  std::map<Domain, std::vector<double>> sums;
  std::map<Domain, size_t> scored_count;
  for (size_t qi = 0; qi < annotations.size(); ++qi) {
    const Domain d = annotations[qi].domain;
    NdcgCell& cell = report.by_domain[d];
    ++cell.query_count;
    const QueryScore& slot = scores[qi];
    if (slot.empty_relevant) {
      ++cell.empty_relevant;
    } else if (slot.excluded) {
      ++cell.excluded;
    } else if (slot.scored) {
      auto& sum = sums[d];
      sum.resize(config.cutoffs.size(), 0.0);
      for (size_t c = 0; c < config.cutoffs.size(); ++c) sum[c] += slot.ndcg[c];
      ++scored_count[d];
    }
  }
  for (auto& [domain, cell] : report.by_domain) {
    const size_t n = scored_count[domain];
    for (size_t c = 0; c < config.cutoffs.size(); ++c) {
      double mean = n == 0 ? 0.0 : sums[domain][c] / static_cast<double>(n);
      cell.mean_ndcg[config.cutoffs[c]] = mean;
    }
  }
  return report;
}

void NdcgReport::write_json(std::ostream& out) const {
  json doc;
  doc["setting"] = setting_name(setting);
  doc["cutoffs"] = cutoffs;
  json domains = json::object();
  for (const auto& [domain, cell] : by_domain) {
    json d;
    d["query_count"] = cell.query_count;
    d["excluded"] = cell.excluded;
    d["empty_relevant"] = cell.empty_relevant;
    json ndcg = json::object();
    for (const auto& [cutoff, mean] : cell.mean_ndcg)
      ndcg[std::to_string(cutoff)] = mean;
    d["ndcg"] = std::move(ndcg);
    domains[domain_name(domain)] = std::move(d);
  }
  doc["domains"] = std::move(domains);
  out << doc.dump(2) << "\n";
}

void NdcgReport::write_csv(std::ostream& out) const {
  out << "setting,domain,cutoff,mean_ndcg,query_count,excluded,empty_relevant\n";
  for (const auto& [domain, cell] : by_domain) {
    for (const auto& [cutoff, mean] : cell.mean_ndcg) {
      out << setting_name(setting) << "," << domain_name(domain) << ","
          << cutoff << "," << std::setprecision(17) << mean << ","
          << cell.query_count << "," << cell.excluded << ","
          << cell.empty_relevant << "\n";
    }
  }
}

void NdcgReport::write_table(std::ostream& out) const {
  out << "setting: " << setting_name(setting) << "\n";
  out << std::left << std::setw(16) << "domain";
  for (size_t cutoff : cutoffs) out << std::right << std::setw(12) << ("ndcg@" + std::to_string(cutoff));
  out << std::right << std::setw(10) << "queries" << "\n";
  for (const auto& [domain, cell] : by_domain) {
    out << std::left << std::setw(16) << domain_name(domain);
    for (size_t cutoff : cutoffs) {
      auto it = cell.mean_ndcg.find(cutoff);
      out << std::right << std::setw(12) << std::fixed << std::setprecision(4)
          << (it == cell.mean_ndcg.end() ? 0.0 : it->second);
      out.unsetf(std::ios::fixed);
    }
    out << std::right << std::setw(10) << cell.query_count << "\n";
  }
}

}  // namespace toolvoc
