// SPDX-License-Identifier: Apache-2.0
// Deterministic fixture builders shared by the test suites.
#pragma once

#include <string>
#include <vector>

#include "toolvoc/datasets.hpp"
#include "toolvoc/registry.hpp"
#include "toolvoc/rng.hpp"

namespace fixtures {

// n synthetic documents with varied casing/punctuation in the names, so the
// normalization paths actually do something.
inline std::vector<toolvoc::ToolDocument> synthetic_documents(size_t n) {
  std::vector<toolvoc::ToolDocument> docs;
  docs.reserve(n);
  static const char* kMethods[] = {"GET", "POST", "", "PUT"};
  for (size_t i = 0; i < n; ++i) {
    toolvoc::ToolDocument d;
    d.tool_name = "Service Hub " + std::to_string(i / 7);
    d.api_name = "Fetch Item #" + std::to_string(i);
    d.description = "Returns item " + std::to_string(i) + " from hub " +
                    std::to_string(i / 7) + ".";
    d.method = kMethods[i % 4];
    if (i % 3 == 0) d.required_parameters.push_back({"item_id", "NUMBER", "which item"});
    if (i % 5 == 0) d.optional_parameters.push_back({"verbose", "BOOLEAN", ""});
    docs.push_back(std::move(d));
  }
  return docs;
}

inline toolvoc::ToolRegistry synthetic_registry(size_t n) {
  return toolvoc::ToolRegistry::from_documents(synthetic_documents(n));
}

// Names built from non-decreasing letter triples ("abc", "abd", ...). Two
// distinct triples are never anagrams of each other, so bag-of-bytes views
// of strings that differ only in the triple stay distinct. Supports up to
// C(28,3) = 3276 names.
inline std::string triple_name(size_t i) {
  // Enumerate non-decreasing (a, b, c) in lexicographic order.
  size_t seen = 0;
  for (char a = 'a'; a <= 'z'; ++a)
    for (char b = a; b <= 'z'; ++b)
      for (char c = b; c <= 'z'; ++c)
        if (seen++ == i) return std::string{a, b, c};
  throw std::out_of_range("triple_name index too large");
}

inline std::vector<toolvoc::ToolDocument> anagram_free_documents(size_t n) {
  std::vector<toolvoc::ToolDocument> docs;
  docs.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    std::string name = triple_name(i);
    toolvoc::ToolDocument d;
    d.tool_name = "hub " + name;
    d.api_name = "query " + name;
    d.description = "Looks up records in the " + name + " catalog.";
    d.method = "GET";
    docs.push_back(std::move(d));
  }
  return docs;
}

inline toolvoc::ToolRegistry anagram_free_registry(size_t n) {
  return toolvoc::ToolRegistry::from_documents(anagram_free_documents(n));
}

// One retrieval query per tool, phrased so the name triple is the only
// distinguishing content. Domains cycle through the three splits.
inline std::vector<toolvoc::QueryAnnotation> corpus_annotations(
    const toolvoc::ToolRegistry& registry) {
  using toolvoc::Domain;
  static const Domain kCycle[] = {Domain::kSingleTool, Domain::kIntraCategory,
                                  Domain::kCrossCategory};
  std::vector<toolvoc::QueryAnnotation> out;
  out.reserve(registry.size());
  for (uint32_t i = 0; i < registry.size(); ++i) {
    const toolvoc::ToolDocument& d = registry.documents()[i];
    toolvoc::QueryAnnotation q;
    q.query = "please search the " + d.tool_name.substr(4) + " catalog";
    q.domain = kCycle[i % 3];
    q.relevant = {toolvoc::ToolId{i}};
    out.push_back(std::move(q));
  }
  return out;
}

// Deterministic raw trajectories over `registry`, with actions already in
// semantic form so conversion round-trips content exactly.
inline std::vector<toolvoc::RawTrajectory> fixture_trajectories(
    const toolvoc::ToolRegistry& registry, size_t count, uint64_t seed) {
  toolvoc::DetRng rng(seed);
  std::vector<toolvoc::RawTrajectory> out;
  out.reserve(count);

  // A verbose system prompt that leaks the whole tool list; conversion must
  // cut everything from the marker on.
  std::string verbose_prompt =
      "You are a tool-using assistant. Work step by step.\n";
  verbose_prompt += toolvoc::kToolListMarker;
  verbose_prompt += "\n";
  for (uint32_t i = 0; i < registry.size(); ++i) {
    verbose_prompt +=
        "- " + toolvoc::semantic_surface(registry.documents()[i]) + "\n";
  }

  for (size_t t = 0; t < count; ++t) {
    toolvoc::RawTrajectory traj;
    traj.id = "traj-" + std::to_string(t);
    traj.system_prompt = verbose_prompt;
    traj.query = "handle request " + std::to_string(t);
    size_t steps = 1 + rng.below(3);
    for (size_t s = 0; s < steps; ++s) {
      uint32_t pick = static_cast<uint32_t>(rng.below(registry.size()));
      const toolvoc::ToolDocument& doc = registry.documents()[pick];
      toolvoc::RawStep step;
      step.thought = "Step " + std::to_string(s) + ": I should call " +
                     doc.api_name + ".";
      step.action = toolvoc::semantic_surface(doc);
      step.parameters = "{\"q\": \"item-" + std::to_string(rng.below(1000)) + "\"}";
      step.observation = "{\"status\": \"ok\", \"step\": " + std::to_string(s) + "}";
      traj.steps.push_back(std::move(step));
    }
    traj.final_answer = "Request " + std::to_string(t) + " handled.";
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace fixtures
