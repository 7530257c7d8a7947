// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/datasets.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "json_io.hpp"
#include "parallel.hpp"
#include "toolvoc/error.hpp"

namespace toolvoc {

using detail::json;

const char* domain_name(Domain d) {
  switch (d) {
    case Domain::kSingleTool: return "single-tool";
    case Domain::kIntraCategory: return "intra-category";
    case Domain::kCrossCategory: return "cross-category";
  }
  return "single-tool";
}

std::optional<Domain> domain_from_name(const std::string& name) {
  if (name == "single-tool" || name == "I1") return Domain::kSingleTool;
  if (name == "intra-category" || name == "I2") return Domain::kIntraCategory;
  if (name == "cross-category" || name == "I3") return Domain::kCrossCategory;
  return std::nullopt;
}

const char* turn_tag_name(TurnTag tag) {
  switch (tag) {
    case TurnTag::kThought: return "thought";
    case TurnTag::kActionHint: return "action-hint";
    case TurnTag::kAction: return "action";
    case TurnTag::kToolDoc: return "tool-doc";
    case TurnTag::kParameters: return "parameters";
    case TurnTag::kObservation: return "observation";
  }
  return "thought";
}

namespace {

std::optional<TurnTag> turn_tag_from_name(const std::string& name) {
  for (TurnTag tag :
       {TurnTag::kThought, TurnTag::kActionHint, TurnTag::kAction,
        TurnTag::kToolDoc, TurnTag::kParameters, TurnTag::kObservation})
    if (name == turn_tag_name(tag)) return tag;
  return std::nullopt;
}

}  // namespace

const char* const kActionHintText = "Please generate the action.";
const char* const kAnswerHintText = "Please provide the final answer.";
const char* const kToolListMarker = "You have access to the following tools:";
const char* const kGtPrefixLead = "I am using the following tools:";

std::vector<TrainPair> build_memorization(const ToolRegistry& registry,
                                          const ToolIndex& index,
                                          const Vocabulary& vocab) {
  std::vector<TrainPair> out;
  out.reserve(registry.size());
  for (uint32_t i = 0; i < registry.size(); ++i) {
    const IndexedTool& entry = index.entry(ToolId{i});
    TrainPair pair;
    pair.input_text = registry.doc_text(ToolId{i});
    pair.target_surface = entry.surface;
    pair.input = vocab.encode(pair.input_text);
    pair.target = entry.tokens;
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<TrainPair> build_retrieval(
    const std::vector<QueryAnnotation>& annotations,
    const ToolRegistry& registry, const ToolIndex& index,
    const Vocabulary& vocab) {
  (void)registry;
  std::vector<TrainPair> out;
  for (const QueryAnnotation& q : annotations) {
    // One pair per (query, relevant tool): the model learns to map the
    // query onto each of its annotated identifiers.
    for (ToolId id : q.relevant) {
      const IndexedTool& entry = index.entry(id);
      TrainPair pair;
      pair.input_text = q.query;
      pair.target_surface = entry.surface;
      pair.input = vocab.encode(q.query);
      pair.target = entry.tokens;
      out.push_back(std::move(pair));
    }
  }
  return out;
}

std::string strip_tool_list(const std::string& system_prompt,
                            const std::vector<std::string>& surfaces) {
  std::string head = system_prompt;
  if (size_t marker = head.find(kToolListMarker); marker != std::string::npos)
    head.erase(marker);
  std::istringstream lines(head);
  std::string line, out;
  while (std::getline(lines, line)) {
    bool leaks = false;
    for (const std::string& s : surfaces) {
      if (!s.empty() && line.find(s) != std::string::npos) {
        leaks = true;
        break;
      }
    }
    if (leaks) continue;
    out += line;
    out += '\n';
  }
  // Trim trailing blank space left by the cut.
  while (!out.empty() && (out.back() == '\n' || out.back() == ' '))
    out.pop_back();
  return out;
}

ActionResolver::ActionResolver(const ToolRegistry& registry) {
  // Lowest ordinal wins on key collisions: emplace never overwrites.
  for (uint32_t i = 0; i < registry.size(); ++i) {
    const ToolDocument& doc = registry.documents()[i];
    by_key_.emplace(semantic_surface(doc), ToolId{i});
    by_key_.emplace(semantic_normalize(doc.api_name), ToolId{i});
  }
}

std::optional<ToolId> ActionResolver::resolve(const std::string& action) const {
  auto it = by_key_.find(semantic_normalize(action));
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::optional<AgentSample> convert_trajectory(const RawTrajectory& raw,
                                              const ConvertContext& ctx,
                                              std::string* error) {
  auto fail = [&](const std::string& reason) -> std::optional<AgentSample> {
    if (error) *error = reason;
    return std::nullopt;
  };
  if (!ctx.registry || !ctx.index || !ctx.vocab)
    throw InvalidArgument("convert context is incomplete");
  if (raw.steps.empty()) return fail("trajectory has no steps");
  if (raw.query.empty()) return fail("trajectory has no query");

  ActionResolver resolver(*ctx.registry);

  AgentSample sample;
  sample.id = raw.id;
  sample.query = raw.query;
  sample.final_answer = raw.final_answer;

  std::vector<std::string> surfaces;
  surfaces.reserve(ctx.index->size());
  for (const IndexedTool& e : ctx.index->entries()) surfaces.push_back(e.surface);
  sample.system_prompt = strip_tool_list(raw.system_prompt, surfaces);

  std::vector<ToolId> used;
  for (size_t si = 0; si < raw.steps.size(); ++si) {
    const RawStep& step = raw.steps[si];
    auto tool = resolver.resolve(step.action);
    if (!tool)
      return fail("step " + std::to_string(si) + ": unknown action '" +
                  step.action + "'");
    if (std::find(used.begin(), used.end(), *tool) == used.end())
      used.push_back(*tool);
    const IndexedTool& entry = ctx.index->entry(*tool);

    sample.turns.push_back(
        {Role::kAssistant, TurnTag::kThought, step.thought, {}});
    sample.turns.push_back(
        {Role::kUser, TurnTag::kActionHint, kActionHintText, {}});
    sample.turns.push_back(
        {Role::kAssistant, TurnTag::kAction, entry.surface, entry.tokens});
    sample.turns.push_back(
        {Role::kUser, TurnTag::kToolDoc, ctx.registry->doc_text(*tool), {}});
    sample.turns.push_back(
        {Role::kAssistant, TurnTag::kParameters, step.parameters, {}});
    sample.turns.push_back(
        {Role::kUser, TurnTag::kObservation, step.observation, {}});
  }

  if (ctx.add_gt_prefix) {
    std::string prefix = kGtPrefixLead;
    for (ToolId id : used) {
      prefix += ' ';
      prefix += ctx.index->entry(id).surface;
    }
    sample.gt_prefix = std::move(prefix);
  }
  return sample;
}

ConvertResult convert_batch(const std::vector<RawTrajectory>& raws,
                            const ConvertContext& ctx, size_t threads) {
  std::vector<std::optional<AgentSample>> slots(raws.size());
  std::vector<std::string> errors(raws.size());
  detail::parallel_for(raws.size(), threads, [&](size_t i) {
    slots[i] = convert_trajectory(raws[i], ctx, &errors[i]);
  });
  ConvertResult result;
  for (size_t i = 0; i < raws.size(); ++i) {
    if (slots[i]) {
      result.samples.push_back(std::move(*slots[i]));
    } else {
      result.rejects.push_back({i, raws[i].id, errors[i]});
    }
  }
  return result;
}

RawTrajectory reassemble_steps(const AgentSample& sample,
                               const ConvertContext& ctx) {
  if (!ctx.registry || !ctx.index)
    throw InvalidArgument("convert context is incomplete");
  if (sample.turns.size() % 6 != 0)
    throw InvalidArgument("sample turn count is not a multiple of six");
  RawTrajectory raw;
  raw.id = sample.id;
  raw.query = sample.query;
  raw.final_answer = sample.final_answer;
  for (size_t base = 0; base < sample.turns.size(); base += 6) {
    auto expect = [&](size_t offset, TurnTag tag) -> const SampleTurn& {
      const SampleTurn& turn = sample.turns[base + offset];
      if (turn.tag != tag)
        throw InvalidArgument(std::string("unexpected turn tag, wanted ") +
                              turn_tag_name(tag));
      return turn;
    };
    RawStep step;
    step.thought = expect(0, TurnTag::kThought).content;
    const SampleTurn& action = expect(2, TurnTag::kAction);
    auto tool = ctx.index->resolve_surface(action.content);
    if (!tool)
      throw InvalidArgument("action surface does not resolve: '" +
                            action.content + "'");
    step.action = semantic_surface(ctx.registry->at(*tool));
    step.parameters = expect(4, TurnTag::kParameters).content;
    step.observation = expect(5, TurnTag::kObservation).content;
    raw.steps.push_back(std::move(step));
  }
  return raw;
}

CorpusStats corpus_stats(const ToolRegistry& registry,
                         const std::vector<TrainPair>& memorization,
                         const std::vector<QueryAnnotation>& annotations,
                         const std::vector<TrainPair>& retrieval,
                         const ConvertResult& converted) {
  CorpusStats stats;
  stats.registry_size = registry.size();
  stats.registry_duplicates = registry.duplicate_count();
  stats.memorization_pairs = memorization.size();
  stats.retrieval_pairs = retrieval.size();
  stats.retrieval_queries = annotations.size();
  for (const QueryAnnotation& q : annotations) ++stats.queries_by_domain[q.domain];
  stats.agent_samples = converted.samples.size();
  stats.agent_rejects = converted.rejects.size();
  return stats;
}

void CorpusStats::write_json(std::ostream& out) const {
  json doc;
  doc["registry_size"] = registry_size;
  doc["registry_duplicates"] = registry_duplicates;
  doc["memorization_pairs"] = memorization_pairs;
  doc["retrieval_pairs"] = retrieval_pairs;
  doc["retrieval_queries"] = retrieval_queries;
  json by_domain = json::object();
  for (const auto& [domain, count] : queries_by_domain)
    by_domain[domain_name(domain)] = count;
  doc["queries_by_domain"] = std::move(by_domain);
  doc["agent_samples"] = agent_samples;
  doc["agent_rejects"] = agent_rejects;
  out << doc.dump(2) << "\n";
}

// ---- serialization ---------------------------------------------------------

namespace {

json read_line_object(const std::string& line, const std::string& where) {
  json doc = detail::parse_json(line, where);
  if (!doc.is_object()) throw ParseError(where, "expected a JSON object");
  return doc;
}

template <typename Fn>
void for_each_jsonl(std::istream& in, const std::string& where, Fn&& fn) {
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string at = where + ":" + std::to_string(lineno);
    fn(read_line_object(line, at), at);
  }
}

}  // namespace

void save_train_pairs(std::ostream& out, const std::vector<TrainPair>& pairs) {
  for (const TrainPair& p : pairs) {
    json doc;
    doc["input"] = p.input_text;
    doc["target"] = p.target_surface;
    doc["target_tokens"] = p.target;
    out << doc.dump() << "\n";
  }
}

std::vector<TrainPair> load_train_pairs(std::istream& in,
                                        const Vocabulary& vocab,
                                        const std::string& where) {
  std::vector<TrainPair> pairs;
  for_each_jsonl(in, where, [&](const json& doc, const std::string& at) {
    TrainPair p;
    p.input_text = detail::require_string(doc, "input", at);
    p.target_surface = detail::require_string(doc, "target", at);
    p.input = vocab.encode(p.input_text);
    if (auto it = doc.find("target_tokens"); it != doc.end())
      p.target = it->get<TokenSeq>();
    else
      p.target = vocab.encode(p.target_surface);
    pairs.push_back(std::move(p));
  });
  return pairs;
}

void save_annotations(std::ostream& out,
                      const std::vector<QueryAnnotation>& annotations,
                      const ToolRegistry& registry) {
  for (const QueryAnnotation& q : annotations) {
    json doc;
    doc["query"] = q.query;
    doc["domain"] = domain_name(q.domain);
    json relevant = json::array();
    for (ToolId id : q.relevant) {
      const ToolDocument& d = registry.at(id);
      relevant.push_back({{"tool", d.tool_name}, {"api", d.api_name}});
    }
    doc["relevant"] = std::move(relevant);
    out << doc.dump() << "\n";
  }
}

std::vector<QueryAnnotation> load_annotations(std::istream& in,
                                              const ToolRegistry& registry,
                                              const std::string& where) {
  std::vector<QueryAnnotation> out;
  for_each_jsonl(in, where, [&](const json& doc, const std::string& at) {
    QueryAnnotation q;
    q.query = detail::require_string(doc, "query", at);
    std::string domain = detail::require_string(doc, "domain", at);
    auto parsed = domain_from_name(domain);
    if (!parsed) throw ParseError(at, "unknown domain '" + domain + "'");
    q.domain = *parsed;
    const json& relevant = detail::require_field(doc, "relevant", at);
    if (!relevant.is_array()) throw ParseError(at, "'relevant' must be an array");
    for (const json& r : relevant) {
      std::string tool = detail::require_string(r, "tool", at);
      std::string api = detail::require_string(r, "api", at);
      auto id = registry.find(tool, api);
      if (!id)
        throw ParseError(at, "relevant tool not in registry: '" + tool +
                                 "' / '" + api + "'");
      q.relevant.push_back(*id);
    }
    out.push_back(std::move(q));
  });
  return out;
}

void save_trajectories(std::ostream& out,
                       const std::vector<RawTrajectory>& trajectories) {
  for (const RawTrajectory& t : trajectories) {
    json doc;
    doc["id"] = t.id;
    doc["system_prompt"] = t.system_prompt;
    doc["query"] = t.query;
    json steps = json::array();
    for (const RawStep& s : t.steps) {
      steps.push_back({{"thought", s.thought},
                       {"action", s.action},
                       {"parameters", s.parameters},
                       {"observation", s.observation}});
    }
    doc["steps"] = std::move(steps);
    doc["final_answer"] = t.final_answer;
    out << doc.dump() << "\n";
  }
}

std::vector<RawTrajectory> load_trajectories(std::istream& in,
                                             const std::string& where) {
  std::vector<RawTrajectory> out;
  for_each_jsonl(in, where, [&](const json& doc, const std::string& at) {
    RawTrajectory t;
    t.id = detail::optional_string(doc, "id", at);
    t.system_prompt = detail::optional_string(doc, "system_prompt", at);
    t.query = detail::require_string(doc, "query", at);
    t.final_answer = detail::optional_string(doc, "final_answer", at);
    const json& steps = detail::require_field(doc, "steps", at);
    if (!steps.is_array()) throw ParseError(at, "'steps' must be an array");
    for (const json& s : steps) {
      RawStep step;
      step.thought = detail::optional_string(s, "thought", at);
      step.action = detail::require_string(s, "action", at);
      step.parameters = detail::optional_string(s, "parameters", at, "{}");
      step.observation = detail::optional_string(s, "observation", at);
      t.steps.push_back(std::move(step));
    }
    out.push_back(std::move(t));
  });
  return out;
}

void save_agent_samples(std::ostream& out,
                        const std::vector<AgentSample>& samples) {
  for (const AgentSample& s : samples) {
    json doc;
    doc["id"] = s.id;
    doc["system_prompt"] = s.system_prompt;
    doc["query"] = s.query;
    if (s.gt_prefix) doc["gt_prefix"] = *s.gt_prefix;
    json turns = json::array();
    for (const SampleTurn& turn : s.turns) {
      json t;
      t["role"] = role_name(turn.role);
      t["tag"] = turn_tag_name(turn.tag);
      t["content"] = turn.content;
      if (!turn.tokens.empty()) t["tokens"] = turn.tokens;
      turns.push_back(std::move(t));
    }
    doc["turns"] = std::move(turns);
    doc["final_answer"] = s.final_answer;
    out << doc.dump() << "\n";
  }
}

std::vector<AgentSample> load_agent_samples(std::istream& in,
                                            const std::string& where) {
  std::vector<AgentSample> out;
  for_each_jsonl(in, where, [&](const json& doc, const std::string& at) {
    AgentSample s;
    s.id = detail::optional_string(doc, "id", at);
    s.system_prompt = detail::optional_string(doc, "system_prompt", at);
    s.query = detail::require_string(doc, "query", at);
    s.final_answer = detail::optional_string(doc, "final_answer", at);
    if (auto it = doc.find("gt_prefix"); it != doc.end() && it->is_string())
      s.gt_prefix = it->get<std::string>();
    const json& turns = detail::require_field(doc, "turns", at);
    if (!turns.is_array()) throw ParseError(at, "'turns' must be an array");
    for (const json& t : turns) {
      SampleTurn turn;
      std::string role = detail::require_string(t, "role", at);
      if (role == "assistant") turn.role = Role::kAssistant;
      else if (role == "user") turn.role = Role::kUser;
      else if (role == "system") turn.role = Role::kSystem;
      else throw ParseError(at, "unknown role '" + role + "'");
      std::string tag = detail::require_string(t, "tag", at);
      auto parsed = turn_tag_from_name(tag);
      if (!parsed) throw ParseError(at, "unknown turn tag '" + tag + "'");
      turn.tag = *parsed;
      turn.content = detail::require_string(t, "content", at);
      if (auto it = t.find("tokens"); it != t.end())
        turn.tokens = it->get<TokenSeq>();
      s.turns.push_back(std::move(turn));
    }
    out.push_back(std::move(s));
  });
  return out;
}

}  // namespace toolvoc
