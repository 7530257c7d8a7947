// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "toolvoc/datasets.hpp"
#include "toolvoc/error.hpp"
#include "toolvoc/indexer.hpp"

using namespace toolvoc;

namespace {

struct Pipeline {
  ToolRegistry registry;
  Vocabulary vocab = Vocabulary::byte_base();
  ToolIndex index;

  explicit Pipeline(size_t n, SchemeKind kind = SchemeKind::kSemantic)
      : registry(fixtures::synthetic_registry(n)) {
    IndexScheme scheme;
    scheme.kind = kind;
    index = build_index(registry, scheme, vocab);
  }

  ConvertContext ctx(bool gt_prefix = false) {
    return {&registry, &index, &vocab, gt_prefix};
  }
};

}  // namespace

TEST_CASE("memorization pairs map document text to identifiers") {
  Pipeline p(12);
  auto pairs = build_memorization(p.registry, p.index, p.vocab);
  REQUIRE(pairs.size() == 12);
  for (uint32_t i = 0; i < 12; ++i) {
    CHECK(pairs[i].input_text == p.registry.doc_text(ToolId{i}));
    CHECK(pairs[i].target_surface == p.index.entry(ToolId{i}).surface);
    CHECK(pairs[i].target == p.index.entry(ToolId{i}).tokens);
    CHECK(pairs[i].input == p.vocab.encode(pairs[i].input_text));
  }
}

TEST_CASE("retrieval pairs expand one per relevant tool") {
  Pipeline p(9);
  std::vector<QueryAnnotation> annotations = {
      {"find a thing", Domain::kSingleTool, {ToolId{1}}},
      {"do two things", Domain::kIntraCategory, {ToolId{2}, ToolId{5}}},
      {"nothing relevant", Domain::kCrossCategory, {}},
  };
  auto pairs = build_retrieval(annotations, p.registry, p.index, p.vocab);
  REQUIRE(pairs.size() == 3);  // 1 + 2 + 0
  CHECK(pairs[0].input_text == "find a thing");
  CHECK(pairs[1].target == p.index.entry(ToolId{2}).tokens);
  CHECK(pairs[2].target == p.index.entry(ToolId{5}).tokens);
}

TEST_CASE("strip_tool_list removes the marker block and leaking lines") {
  std::string prompt =
      "You are a helpful agent.\n"
      "Remember: call query_aaa_for_hub_aaa when unsure.\n"
      "Stay safe.\n";
  prompt += kToolListMarker;
  prompt += "\n- query_aaa_for_hub_aaa\n- query_aab_for_hub_aab\n";
  std::vector<std::string> surfaces = {"query_aaa_for_hub_aaa",
                                       "query_aab_for_hub_aab"};
  std::string stripped = strip_tool_list(prompt, surfaces);
  CHECK(stripped.find(kToolListMarker) == std::string::npos);
  CHECK(stripped.find("query_aaa") == std::string::npos);
  CHECK(stripped.find("You are a helpful agent.") != std::string::npos);
  CHECK(stripped.find("Stay safe.") != std::string::npos);
}

TEST_CASE("action resolver accepts semantic and bare api forms") {
  ToolDocument a;
  a.tool_name = "Maps Pro";
  a.api_name = "Search Nearby";
  ToolDocument b;
  b.tool_name = "Routing";
  b.api_name = "Plan Route";
  ToolRegistry reg = ToolRegistry::from_documents({a, b});
  ActionResolver resolver(reg);
  CHECK(resolver.resolve("search_nearby_for_maps_pro") ==
        reg.find("Maps Pro", "Search Nearby"));
  CHECK(resolver.resolve("plan_route") == reg.find("Routing", "Plan Route"));
  CHECK(resolver.resolve("Plan Route") == reg.find("Routing", "Plan Route"));
  CHECK_FALSE(resolver.resolve("teleport").has_value());
}

TEST_CASE("bare api names collide to the lowest ordinal") {
  ToolDocument a;
  a.tool_name = "Hub A";
  a.api_name = "Search";
  ToolDocument b;
  b.tool_name = "Hub B";
  b.api_name = "Search";
  ToolRegistry reg = ToolRegistry::from_documents({a, b});
  ActionResolver resolver(reg);
  auto hit = resolver.resolve("search");
  REQUIRE(hit.has_value());
  CHECK(hit->ordinal == 0);  // "Hub A" sorts first
  // The fully qualified forms still disambiguate.
  CHECK(resolver.resolve("search_for_hub_b")->ordinal == 1);
}

TEST_CASE("conversion expands each step into six turns, three assistant") {
  Pipeline p(8);
  auto trajectories = fixtures::fixture_trajectories(p.registry, 5, 42);
  for (const RawTrajectory& raw : trajectories) {
    std::string error;
    auto sample = convert_trajectory(raw, p.ctx(), &error);
    REQUIRE_MESSAGE(sample.has_value(), error);
    CHECK(sample->turns.size() == raw.steps.size() * 6);
    size_t assistant = 0;
    for (const SampleTurn& turn : sample->turns)
      if (turn.role == Role::kAssistant) ++assistant;
    CHECK(assistant == raw.steps.size() * 3);
    // Turn structure per step: thought, hint, action, doc, params, obs.
    for (size_t s = 0; s < raw.steps.size(); ++s) {
      const SampleTurn* t = &sample->turns[s * 6];
      CHECK(t[0].tag == TurnTag::kThought);
      CHECK(t[1].tag == TurnTag::kActionHint);
      CHECK(t[1].content == kActionHintText);
      CHECK(t[2].tag == TurnTag::kAction);
      CHECK(!t[2].tokens.empty());
      CHECK(t[3].tag == TurnTag::kToolDoc);
      CHECK(t[4].tag == TurnTag::kParameters);
      CHECK(t[5].tag == TurnTag::kObservation);
    }
    CHECK(sample->final_answer == raw.final_answer);
  }
}

TEST_CASE("converted system prompts never leak identifiers") {
  Pipeline p(8);
  auto trajectories = fixtures::fixture_trajectories(p.registry, 10, 7);
  for (const RawTrajectory& raw : trajectories) {
    auto sample = convert_trajectory(raw, p.ctx(), nullptr);
    REQUIRE(sample.has_value());
    for (const IndexedTool& e : p.index.entries())
      CHECK(sample->system_prompt.find(e.surface) == std::string::npos);
  }
}

TEST_CASE("round-trip: convert then reassemble reproduces the steps") {
  Pipeline p(10);
  auto trajectories = fixtures::fixture_trajectories(p.registry, 20, 99);
  for (const RawTrajectory& raw : trajectories) {
    auto sample = convert_trajectory(raw, p.ctx(), nullptr);
    REQUIRE(sample.has_value());
    RawTrajectory back = reassemble_steps(*sample, p.ctx());
    CHECK(back.id == raw.id);
    CHECK(back.query == raw.query);
    CHECK(back.final_answer == raw.final_answer);
    REQUIRE(back.steps.size() == raw.steps.size());
    for (size_t s = 0; s < raw.steps.size(); ++s) {
      CHECK(back.steps[s].thought == raw.steps[s].thought);
      CHECK(back.steps[s].action == raw.steps[s].action);
      CHECK(back.steps[s].parameters == raw.steps[s].parameters);
      CHECK(back.steps[s].observation == raw.steps[s].observation);
    }
  }
}

TEST_CASE("round-trip holds under atomic indexing too") {
  Pipeline p(10, SchemeKind::kAtomic);
  auto trajectories = fixtures::fixture_trajectories(p.registry, 8, 3);
  for (const RawTrajectory& raw : trajectories) {
    auto sample = convert_trajectory(raw, p.ctx(), nullptr);
    REQUIRE(sample.has_value());
    // Actions are atomic surfaces now, single token each.
    for (size_t s = 0; s < raw.steps.size(); ++s)
      CHECK(sample->turns[s * 6 + 2].tokens.size() == 1);
    RawTrajectory back = reassemble_steps(*sample, p.ctx());
    for (size_t s = 0; s < raw.steps.size(); ++s)
      CHECK(back.steps[s].action == raw.steps[s].action);
  }
}

TEST_CASE("unknown actions reject the trajectory with a reason") {
  Pipeline p(5);
  RawTrajectory raw;
  raw.id = "bad";
  raw.query = "do something";
  RawStep step;
  step.action = "summon_demons";
  raw.steps.push_back(step);
  std::string error;
  auto sample = convert_trajectory(raw, p.ctx(), &error);
  CHECK_FALSE(sample.has_value());
  CHECK(error.find("summon_demons") != std::string::npos);
}

TEST_CASE("empty trajectories are rejected") {
  Pipeline p(5);
  RawTrajectory no_steps;
  no_steps.query = "q";
  std::string error;
  CHECK_FALSE(convert_trajectory(no_steps, p.ctx(), &error).has_value());
  RawTrajectory no_query;
  RawStep step;
  step.action = semantic_surface(p.registry.documents()[0]);
  no_query.steps.push_back(step);
  CHECK_FALSE(convert_trajectory(no_query, p.ctx(), &error).has_value());
}

TEST_CASE("gt prefix lists each used tool once, in first-use order") {
  Pipeline p(8);
  RawTrajectory raw;
  raw.id = "gt";
  raw.query = "q";
  for (uint32_t ord : {3u, 1u, 3u}) {
    RawStep step;
    step.action = semantic_surface(p.registry.at(ToolId{ord}));
    step.thought = "t";
    step.parameters = "{}";
    step.observation = "o";
    raw.steps.push_back(step);
  }
  auto sample = convert_trajectory(raw, p.ctx(true), nullptr);
  REQUIRE(sample.has_value());
  REQUIRE(sample->gt_prefix.has_value());
  std::string expect = std::string(kGtPrefixLead) + " " +
                       p.index.entry(ToolId{3}).surface + " " +
                       p.index.entry(ToolId{1}).surface;
  CHECK(*sample->gt_prefix == expect);
}

TEST_CASE("batch conversion keeps input order and isolates rejects") {
  Pipeline p(8);
  auto good = fixtures::fixture_trajectories(p.registry, 6, 1);
  std::vector<RawTrajectory> mixed;
  for (size_t i = 0; i < good.size(); ++i) {
    mixed.push_back(good[i]);
    if (i == 2) {
      RawTrajectory bad;
      bad.id = "broken";
      bad.query = "q";
      RawStep step;
      step.action = "not_a_real_api";
      bad.steps.push_back(step);
      mixed.push_back(bad);
    }
  }
  for (size_t threads : {size_t{1}, size_t{4}}) {
    ConvertResult result = convert_batch(mixed, p.ctx(), threads);
    REQUIRE(result.samples.size() == 6);
    REQUIRE(result.rejects.size() == 1);
    CHECK(result.rejects[0].index == 3);
    CHECK(result.rejects[0].trajectory_id == "broken");
    // Samples preserve the original relative order.
    for (size_t i = 0; i < 6; ++i)
      CHECK(result.samples[i].id == good[i].id);
  }
}

TEST_CASE("corpus stats aggregate the whole build") {
  Pipeline p(7);
  auto memo = build_memorization(p.registry, p.index, p.vocab);
  std::vector<QueryAnnotation> annotations = {
      {"q1", Domain::kSingleTool, {ToolId{0}}},
      {"q2", Domain::kSingleTool, {ToolId{1}, ToolId{2}}},
      {"q3", Domain::kCrossCategory, {ToolId{3}}},
  };
  auto retr = build_retrieval(annotations, p.registry, p.index, p.vocab);
  auto trajs = fixtures::fixture_trajectories(p.registry, 4, 5);
  ConvertResult conv = convert_batch(trajs, p.ctx(), 2);
  CorpusStats stats = corpus_stats(p.registry, memo, annotations, retr, conv);
  CHECK(stats.registry_size == 7);
  CHECK(stats.memorization_pairs == 7);
  CHECK(stats.retrieval_queries == 3);
  CHECK(stats.retrieval_pairs == 4);
  CHECK(stats.queries_by_domain.at(Domain::kSingleTool) == 2);
  CHECK(stats.agent_samples == 4);
  CHECK(stats.agent_rejects == 0);
  std::ostringstream out;
  stats.write_json(out);
  CHECK(out.str().find("\"retrieval_pairs\": 4") != std::string::npos);
}

TEST_CASE("train pairs serialize and load back") {
  Pipeline p(6);
  auto pairs = build_memorization(p.registry, p.index, p.vocab);
  std::stringstream buf;
  save_train_pairs(buf, pairs);
  auto loaded = load_train_pairs(buf, p.vocab, "mem");
  REQUIRE(loaded.size() == pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    CHECK(loaded[i].input_text == pairs[i].input_text);
    CHECK(loaded[i].target_surface == pairs[i].target_surface);
    CHECK(loaded[i].input == pairs[i].input);
    CHECK(loaded[i].target == pairs[i].target);
  }
}

TEST_CASE("annotations serialize by name and resolve on load") {
  Pipeline p(6);
  std::vector<QueryAnnotation> annotations = {
      {"alpha", Domain::kIntraCategory, {ToolId{2}, ToolId{4}}}};
  std::stringstream buf;
  save_annotations(buf, annotations, p.registry);
  auto loaded = load_annotations(buf, p.registry, "mem");
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].query == "alpha");
  CHECK(loaded[0].domain == Domain::kIntraCategory);
  CHECK(loaded[0].relevant == annotations[0].relevant);

  std::stringstream bad(
      R"({"query": "x", "domain": "single-tool", "relevant": [{"tool": "ghost", "api": "boo"}]})");
  CHECK_THROWS_AS(load_annotations(bad, p.registry, "mem"), ParseError);
  std::stringstream bad_domain(
      R"({"query": "x", "domain": "quad-tool", "relevant": []})");
  CHECK_THROWS_AS(load_annotations(bad_domain, p.registry, "mem"), ParseError);
}

TEST_CASE("trajectories and agent samples round-trip through jsonl") {
  Pipeline p(8);
  auto trajs = fixtures::fixture_trajectories(p.registry, 5, 17);
  std::stringstream buf;
  save_trajectories(buf, trajs);
  auto loaded = load_trajectories(buf, "mem");
  REQUIRE(loaded.size() == trajs.size());
  for (size_t i = 0; i < trajs.size(); ++i) {
    CHECK(loaded[i].id == trajs[i].id);
    CHECK(loaded[i].system_prompt == trajs[i].system_prompt);
    CHECK(loaded[i].steps.size() == trajs[i].steps.size());
  }

  ConvertResult conv = convert_batch(trajs, p.ctx(true), 1);
  std::stringstream buf2;
  save_agent_samples(buf2, conv.samples);
  auto samples = load_agent_samples(buf2, "mem");
  REQUIRE(samples.size() == conv.samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(samples[i].id == conv.samples[i].id);
    CHECK(samples[i].query == conv.samples[i].query);
    CHECK(samples[i].gt_prefix == conv.samples[i].gt_prefix);
    REQUIRE(samples[i].turns.size() == conv.samples[i].turns.size());
    for (size_t t = 0; t < samples[i].turns.size(); ++t) {
      CHECK(samples[i].turns[t].role == conv.samples[i].turns[t].role);
      CHECK(samples[i].turns[t].tag == conv.samples[i].turns[t].tag);
      CHECK(samples[i].turns[t].content == conv.samples[i].turns[t].content);
      CHECK(samples[i].turns[t].tokens == conv.samples[i].turns[t].tokens);
    }
    CHECK(samples[i].final_answer == conv.samples[i].final_answer);
  }
}

TEST_CASE("domain names round-trip including short aliases") {
  for (Domain d : {Domain::kSingleTool, Domain::kIntraCategory,
                   Domain::kCrossCategory})
    CHECK(domain_from_name(domain_name(d)) == d);
  CHECK(domain_from_name("I1") == Domain::kSingleTool);
  CHECK(domain_from_name("I2") == Domain::kIntraCategory);
  CHECK(domain_from_name("I3") == Domain::kCrossCategory);
  CHECK_FALSE(domain_from_name("I4").has_value());
}
