// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/indexer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "toolvoc/error.hpp"
#include "toolvoc/rng.hpp"

namespace toolvoc {

namespace {

constexpr size_t kFeatureDim = 64;

uint64_t fnv1a64(const char* data, size_t len) {
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

// Hashed character-trigram counts, L2-normalized. Crude but stable: the
// clustering only needs a deterministic notion of "similar description".
std::vector<double> trigram_features(const std::string& text) {
  std::vector<double> feat(kFeatureDim, 0.0);
  if (text.size() < 3) {
    if (!text.empty()) feat[fnv1a64(text.data(), text.size()) % kFeatureDim] += 1.0;
  } else {
    for (size_t i = 0; i + 3 <= text.size(); ++i)
      feat[fnv1a64(text.data() + i, 3) % kFeatureDim] += 1.0;
  }
  double norm = std::sqrt(
      std::inner_product(feat.begin(), feat.end(), feat.begin(), 0.0));
  if (norm > 0.0)
    for (double& x : feat) x /= norm;
  return feat;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

// Lloyd's algorithm with deterministic seeding: initial centroids are k
// distinct member indices drawn from the stream, ties in assignment go to
// the lowest centroid index, empty clusters keep their previous centroid.
std::vector<std::vector<uint32_t>> kmeans(
    const std::vector<std::vector<double>>& points,
    const std::vector<uint32_t>& members, size_t k, uint64_t seed) {
  DetRng rng(seed);
  std::vector<uint32_t> centers;  // member positions, not ordinals
  {
    std::vector<bool> used(members.size(), false);
    while (centers.size() < k) {
      uint32_t pick = static_cast<uint32_t>(rng.below(members.size()));
      if (used[pick]) continue;
      used[pick] = true;
      centers.push_back(pick);
    }
    std::sort(centers.begin(), centers.end());
  }
  size_t dim = points[members[0]].size();
  std::vector<std::vector<double>> centroids(k);
  for (size_t c = 0; c < k; ++c) centroids[c] = points[members[centers[c]]];

  std::vector<uint32_t> assign(members.size(), 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < members.size(); ++i) {
      double best = sq_dist(points[members[i]], centroids[0]);
      uint32_t best_c = 0;
      for (uint32_t c = 1; c < k; ++c) {
        double d = sq_dist(points[members[i]], centroids[c]);
        if (d < best) {  // strict: ties keep the lower index
          best = d;
          best_c = c;
        }
      }
      if (assign[i] != best_c) {
        assign[i] = best_c;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    for (uint32_t c = 0; c < k; ++c) {
      std::vector<double> sum(dim, 0.0);
      size_t n = 0;
      for (size_t i = 0; i < members.size(); ++i) {
        if (assign[i] != c) continue;
        for (size_t d = 0; d < dim; ++d) sum[d] += points[members[i]][d];
        ++n;
      }
      if (n > 0) {
        for (size_t d = 0; d < dim; ++d) sum[d] /= static_cast<double>(n);
        centroids[c] = std::move(sum);
      }  // empty cluster: centroid unchanged
    }
  }

  std::vector<std::vector<uint32_t>> clusters(k);
  for (size_t i = 0; i < members.size(); ++i)
    clusters[assign[i]].push_back(members[i]);
  return clusters;
}

// Recursive digit-path assignment. `paths[ordinal]` receives a string of
// '0'..'9' characters. Cluster order within a node: size descending, then
// smallest member ordinal, so sibling digits are stable under reordering of
// the input.
void assign_paths(const std::vector<std::vector<double>>& points,
                  std::vector<uint32_t> members, int branching, uint64_t seed,
                  const std::string& prefix, std::vector<std::string>* paths) {
  if (members.size() == 1) {
    (*paths)[members[0]] = prefix.empty() ? "0" : prefix;
    return;
  }
  size_t k = std::min<size_t>(branching, members.size());
  std::vector<std::vector<uint32_t>> clusters =
      kmeans(points, members, k, seed);

  bool split = true;
  for (const auto& c : clusters)
    if (c.size() == members.size()) split = false;
  if (!split) {
    // Degenerate geometry (identical points). Round-robin by rank keeps the
    // recursion shrinking and stays deterministic.
    std::sort(members.begin(), members.end());
    for (auto& c : clusters) c.clear();
    for (size_t i = 0; i < members.size(); ++i)
      clusters[i % k].push_back(members[i]);
  }

  std::vector<size_t> order;
  for (size_t c = 0; c < k; ++c)
    if (!clusters[c].empty()) order.push_back(c);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (clusters[a].size() != clusters[b].size())
      return clusters[a].size() > clusters[b].size();
    return *std::min_element(clusters[a].begin(), clusters[a].end()) <
           *std::min_element(clusters[b].begin(), clusters[b].end());
  });

  for (size_t d = 0; d < order.size(); ++d) {
    char digit = static_cast<char>('0' + d);
    assign_paths(points, std::move(clusters[order[d]]), branching,
                 mix_seed(seed, static_cast<uint64_t>(d)), prefix + digit,
                 paths);
  }
}

TokenSeq byte_tokens(const std::string& text) {
  TokenSeq out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(2 + c));
  return out;
}

}  // namespace

const char* scheme_name(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::kAtomic: return "atomic";
    case SchemeKind::kSemantic: return "semantic";
    case SchemeKind::kNumeric: return "numeric";
    case SchemeKind::kHierarchical: return "hierarchical";
  }
  return "atomic";
}

std::string semantic_normalize(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_sep = false;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      if (pending_sep && !out.empty()) out += '_';
      pending_sep = false;
      out += static_cast<char>(std::tolower(c));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

std::string atomic_surface(const ToolDocument& doc) {
  return "<<" + doc.tool_name + "&&" + doc.api_name + ">>";
}

std::string semantic_surface(const ToolDocument& doc) {
  std::string api = semantic_normalize(doc.api_name);
  std::string tool = semantic_normalize(doc.tool_name);
  if (api.empty()) api = "api";
  if (tool.empty()) tool = "tool";
  return api + "_for_" + tool;
}

const IndexedTool& ToolIndex::entry(ToolId id) const {
  if (id.ordinal >= entries_.size())
    throw InvalidArgument("tool ordinal out of range: " +
                          std::to_string(id.ordinal));
  return entries_[id.ordinal];
}

std::optional<ToolId> ToolIndex::resolve(const TokenSeq& tokens) const {
  auto it = by_tokens_.find(tokens);
  if (it == by_tokens_.end()) return std::nullopt;
  return it->second;
}

std::optional<ToolId> ToolIndex::resolve_surface(
    const std::string& surface) const {
  auto it = by_surface_.find(surface);
  if (it == by_surface_.end()) return std::nullopt;
  return it->second;
}

std::map<size_t, size_t> ToolIndex::length_histogram() const {
  std::map<size_t, size_t> hist;
  for (const IndexedTool& e : entries_) ++hist[e.tokens.size()];
  return hist;
}

std::vector<TokenSeq> ToolIndex::all_sequences() const {
  std::vector<TokenSeq> out;
  out.reserve(entries_.size());
  for (const IndexedTool& e : entries_) out.push_back(e.tokens);
  return out;
}

ToolIndex build_index(const ToolRegistry& registry, const IndexScheme& scheme,
                      Vocabulary& vocab,
                      const std::vector<std::vector<double>>* features) {
  const size_t n = registry.size();
  ToolIndex index;
  index.scheme_ = scheme;
  index.entries_.reserve(n);

  std::vector<std::string> surfaces(n);
  switch (scheme.kind) {
    case SchemeKind::kAtomic: {
      for (size_t i = 0; i < n; ++i)
        surfaces[i] = atomic_surface(registry.documents()[i]);
      TokenId first = vocab.add_atomic_tokens(surfaces);
      for (size_t i = 0; i < n; ++i) {
        IndexedTool e;
        e.id = ToolId{static_cast<uint32_t>(i)};
        e.surface = surfaces[i];
        e.tokens = {static_cast<TokenId>(first + i)};
        index.entries_.push_back(std::move(e));
      }
      break;
    }
    case SchemeKind::kSemantic: {
      std::map<std::string, int> taken;
      for (size_t i = 0; i < n; ++i) {
        std::string base = semantic_surface(registry.documents()[i]);
        std::string candidate = base;
        int suffix = 2;
        while (taken.count(candidate))
          candidate = base + "_" + std::to_string(suffix++);
        taken.emplace(candidate, 1);
        surfaces[i] = std::move(candidate);
      }
      for (size_t i = 0; i < n; ++i) {
        IndexedTool e;
        e.id = ToolId{static_cast<uint32_t>(i)};
        e.surface = surfaces[i];
        e.tokens = vocab.encode(surfaces[i]);
        index.entries_.push_back(std::move(e));
      }
      break;
    }
    case SchemeKind::kNumeric: {
      if (scheme.numeric_width < 1 || scheme.numeric_width > 18)
        throw InvalidArgument("numeric_width must be in [1, 18]");
      uint64_t capacity = 1;
      for (int i = 0; i < scheme.numeric_width; ++i) capacity *= 10;
      if (n > capacity)
        throw InvalidArgument("numeric_width " +
                              std::to_string(scheme.numeric_width) +
                              " cannot represent " + std::to_string(n) +
                              " tools");
      for (size_t i = 0; i < n; ++i) {
        std::string digits = std::to_string(i);
        digits.insert(0, scheme.numeric_width - digits.size(), '0');
        IndexedTool e;
        e.id = ToolId{static_cast<uint32_t>(i)};
        e.surface = digits;
        e.tokens = byte_tokens(digits);
        index.entries_.push_back(std::move(e));
      }
      break;
    }
    case SchemeKind::kHierarchical: {
      if (scheme.branching < 2 || scheme.branching > 10)
        throw InvalidArgument("branching must be in [2, 10]");
      std::vector<std::vector<double>> own;
      const std::vector<std::vector<double>>* pts = features;
      if (pts == nullptr) {
        own.reserve(n);
        for (size_t i = 0; i < n; ++i)
          own.push_back(
              trigram_features(registry.doc_text(ToolId{static_cast<uint32_t>(i)})));
        pts = &own;
      } else {
        if (pts->size() != n)
          throw InvalidArgument("feature count does not match registry size");
        for (const auto& f : *pts)
          if (f.empty() || f.size() != (*pts)[0].size())
            throw InvalidArgument("features must share one nonzero dimension");
      }
      std::vector<uint32_t> members(n);
      std::iota(members.begin(), members.end(), 0);
      std::vector<std::string> paths(n);
      assign_paths(*pts, std::move(members), scheme.branching, scheme.seed,
                   "", &paths);
      for (size_t i = 0; i < n; ++i) {
        IndexedTool e;
        e.id = ToolId{static_cast<uint32_t>(i)};
        e.surface = paths[i];
        e.tokens = byte_tokens(paths[i]);
        index.entries_.push_back(std::move(e));
      }
      break;
    }
  }

  for (const IndexedTool& e : index.entries_) {
    if (!index.by_tokens_.emplace(e.tokens, e.id).second)
      throw InvalidArgument("identifier collision on token sequence for '" +
                            e.surface + "'");
    if (!index.by_surface_.emplace(e.surface, e.id).second)
      throw InvalidArgument("identifier collision on surface '" + e.surface +
                            "'");
  }
  return index;
}

}  // namespace toolvoc
