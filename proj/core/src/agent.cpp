// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/agent.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "json_io.hpp"
#include "toolvoc/datasets.hpp"
#include "toolvoc/error.hpp"
#include "toolvoc/rng.hpp"

namespace toolvoc {

using detail::json;

const char* const kFinishSurface = "<<Finish>>";

void AgentConfig::validate() const {
  if (max_turns < 4)
    throw InvalidArgument("max_turns must be >= 4 (one action round plus the final answer)");
  if (max_action_rounds < 1)
    throw InvalidArgument("max_action_rounds must be >= 1");
  if (per_turn_token_budget == 0)
    throw InvalidArgument("per_turn_token_budget must be positive");
  if (max_retries > 0 && retry_temperature <= base_temperature)
    throw InvalidArgument("retry_temperature must exceed base_temperature");
  if (restrict_to_gt && gt_tools.empty())
    throw InvalidArgument("restrict_to_gt requires a non-empty gt_tools");
}

const char* phase_name(AgentPhase phase) {
  switch (phase) {
    case AgentPhase::kThought: return "thought";
    case AgentPhase::kAction: return "action";
    case AgentPhase::kParameters: return "parameters";
    case AgentPhase::kFinal: return "final";
  }
  return "thought";
}

const char* event_kind_name(AgentEventKind kind) {
  switch (kind) {
    case AgentEventKind::kThought: return "thought";
    case AgentEventKind::kAction: return "action";
    case AgentEventKind::kParameters: return "parameters";
    case AgentEventKind::kFeedback: return "feedback";
    case AgentEventKind::kRetry: return "retry";
    case AgentEventKind::kFinal: return "final";
  }
  return "thought";
}

const char* terminal_name(TerminalState state) {
  switch (state) {
    case TerminalState::kFinished: return "finished";
    case TerminalState::kGaveUp: return "gave-up";
    case TerminalState::kTurnLimit: return "turn-limit";
  }
  return "finished";
}

bool retry_guard(const std::string& text) {
  std::string norm;
  norm.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    // U+2019 (typographic apostrophe) folds to '\'' so "I’m sorry" matches.
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xe2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      norm += '\'';
      i += 2;
      continue;
    }
    char c = text[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    norm += c;
  }
  return norm.find("give up") != std::string::npos ||
         norm.find("i'm sorry") != std::string::npos;
}

ModelTurnSource::ModelTurnSource(const Scorer& scorer, const Vocabulary& vocab)
    : scorer_(scorer), vocab_(vocab) {}

TurnResult ModelTurnSource::next_turn(const Conversation& conversation,
                                      const TurnRequest& request) {
  std::string rendered;
  for (const ChatMessage& msg : conversation) {
    rendered += role_name(msg.role);
    rendered += ": ";
    rendered += msg.content;
    rendered += '\n';
  }
  rendered += "assistant:";
  TokenSeq prompt = vocab_.encode(rendered);

  SampleConfig cfg;
  cfg.temperature = request.temperature;
  cfg.max_new_tokens = request.max_new_tokens;
  cfg.seed = request.seed;
  if (request.constraint) {
    TokenSeq tokens = sample_constrained(scorer_, prompt, *request.constraint, cfg);
    return {std::move(tokens), false};
  }
  SampleResult res = sample_free(scorer_, prompt, cfg, vocab_.eos());
  return {std::move(res.tokens), res.truncated};
}

void FixtureEnvironment::add(ToolId tool, const std::string& params_json,
                             std::string body) {
  json parsed = json::parse(params_json, nullptr, false);
  if (parsed.is_discarded())
    throw InvalidArgument("fixture parameters are not valid JSON");
  canned_[{tool.ordinal, detail::canonical_json(parsed)}] = std::move(body);
}

ToolResponse FixtureEnvironment::call(ToolId tool,
                                      const std::string& params_json) {
  json parsed = json::parse(params_json, nullptr, false);
  if (parsed.is_discarded())
    return {false, "", "tool_error"};
  auto it = canned_.find({tool.ordinal, detail::canonical_json(parsed)});
  if (it != canned_.end()) return {true, it->second, ""};
  if (default_body_) return {true, *default_body_, ""};
  return {false, "", "tool_error"};
}

DisjunctiveTrie build_action_trie(const ToolIndex& index, Vocabulary& vocab,
                                  TokenId* finish_token,
                                  const std::vector<ToolId>* subset) {
  TokenId finish;
  if (auto existing = vocab.find(kFinishSurface)) {
    finish = *existing;
  } else {
    finish = vocab.add_atomic_tokens({kFinishSurface});
  }
  if (finish_token) *finish_token = finish;

  std::vector<TokenSeq> sequences;
  if (subset) {
    sequences.reserve(subset->size() + 1);
    for (ToolId id : *subset) sequences.push_back(index.entry(id).tokens);
  } else {
    sequences = index.all_sequences();
  }
  sequences.push_back({finish});
  return DisjunctiveTrie(sequences, vocab.eos());
}

namespace {

struct SessionCtx {
  const AgentComponents& comp;
  TurnSource& source;
  const AgentConfig& config;
  SessionResult& result;
  Conversation conv;
  size_t retries_left;
  uint64_t seed_counter = 0;

  uint64_t next_seed() { return mix_seed(config.seed, seed_counter++); }

  TurnResult raw_turn(AgentPhase phase, double temperature,
                      const DisjunctiveTrie* constraint) {
    TurnRequest req;
    req.phase = phase;
    req.temperature = temperature;
    req.seed = next_seed();
    req.max_new_tokens = config.per_turn_token_budget;
    req.constraint = constraint;
    return source.next_turn(conv, req);
  }

  // Free-text turn with the give-up guard: flagged outputs are regenerated
  // at retry temperature while the per-session budget lasts; the last
  // attempt is accepted as-is.
  std::string guarded_text_turn(AgentPhase phase) {
    TurnResult res = raw_turn(phase, config.base_temperature, nullptr);
    std::string text = comp.vocab->decode(res.tokens);
    while (retry_guard(text) && retries_left > 0) {
      --retries_left;
      ++result.retries_used;
      AgentEvent ev;
      ev.kind = AgentEventKind::kRetry;
      ev.turn = result.assistant_turns;
      ev.text = text;
      ev.detail = phase_name(phase);
      result.events.push_back(std::move(ev));
      res = raw_turn(phase, config.retry_temperature, nullptr);
      text = comp.vocab->decode(res.tokens);
    }
    return text;
  }

  void commit_assistant(const std::string& text, AgentEventKind kind) {
    conv.push_back({Role::kAssistant, text});
    AgentEvent ev;
    ev.kind = kind;
    ev.turn = result.assistant_turns;
    ev.text = text;
    result.events.push_back(std::move(ev));
    ++result.assistant_turns;
  }
};

}  // namespace

SessionResult run_session(const AgentComponents& components,
                          TurnSource& source, const AgentConfig& config,
                          const std::string& query,
                          const std::string& system_prompt) {
  config.validate();
  if (!components.vocab || !components.registry || !components.index ||
      !components.action_trie || !components.env)
    throw InvalidArgument("agent components are incomplete");

  SessionResult result;
  SessionCtx ctx{components, source, config, result, {}, config.max_retries};
  if (!system_prompt.empty())
    ctx.conv.push_back({Role::kSystem, system_prompt});
  ctx.conv.push_back({Role::kUser, query});

  // Optional restriction to a ground-truth toolset.
  std::optional<DisjunctiveTrie> restricted;
  const DisjunctiveTrie* action_trie = components.action_trie;
  if (config.restrict_to_gt) {
    std::vector<TokenSeq> sequences;
    sequences.reserve(config.gt_tools.size() + 1);
    for (ToolId id : config.gt_tools)
      sequences.push_back(components.index->entry(id).tokens);
    sequences.push_back({components.finish_token});
    restricted.emplace(sequences, components.vocab->eos());
    action_trie = &*restricted;
  }

  bool finished_early = false;
  // A round needs three assistant turns and the final answer one more.
  while (result.action_rounds < config.max_action_rounds &&
         result.assistant_turns + 3 <= config.max_turns - 1) {
    std::string thought = ctx.guarded_text_turn(AgentPhase::kThought);
    ctx.commit_assistant(thought, AgentEventKind::kThought);

    ctx.conv.push_back({Role::kUser, kActionHintText});
    TurnResult action = ctx.raw_turn(
        AgentPhase::kAction, config.base_temperature,
        config.constrain_actions ? action_trie : nullptr);
    std::string action_text = components.vocab->decode(action.tokens);

    bool is_finish =
        (action.tokens.size() == 1 && action.tokens[0] == components.finish_token) ||
        action_text == kFinishSurface;
    if (is_finish) {
      ctx.conv.push_back({Role::kAssistant, action_text});
      ++result.assistant_turns;  // Finish occupies the turn but logs no Action
      finished_early = true;
      break;
    }

    std::optional<ToolId> tool = components.index->resolve(action.tokens);
    if (!tool) tool = components.index->resolve_surface(action_text);
    ctx.conv.push_back({Role::kAssistant, action_text});
    {
      AgentEvent ev;
      ev.kind = AgentEventKind::kAction;
      ev.turn = result.assistant_turns;
      ev.text = action_text;
      if (tool) {
        ev.tool = *tool;
      } else {
        ev.not_a_tool = true;
        ++result.not_a_tool_count;
      }
      result.events.push_back(std::move(ev));
    }
    ++result.assistant_turns;
    ++result.action_count;

    ctx.conv.push_back({Role::kUser, tool ? components.registry->doc_text(*tool)
                                          : "Unknown tool."});

    // Parameters, with one silent re-ask when the JSON does not parse.
    TurnResult params = ctx.raw_turn(AgentPhase::kParameters,
                                     config.base_temperature, nullptr);
    std::string params_text = components.vocab->decode(params.tokens);
    json parsed = json::parse(params_text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      ++result.malformed_parameter_reasks;
      params = ctx.raw_turn(AgentPhase::kParameters, config.base_temperature,
                            nullptr);
      params_text = components.vocab->decode(params.tokens);
      parsed = json::parse(params_text, nullptr, false);
    }
    ctx.commit_assistant(params_text, AgentEventKind::kParameters);

    std::string feedback;
    std::string feedback_kind;
    if (parsed.is_discarded() || !parsed.is_object()) {
      feedback_kind = "tool_error";
      feedback = "Error: parameters are not a JSON object.";
    } else if (!tool) {
      feedback_kind = "tool_error";
      feedback = "Error: the action is not a registered tool.";
    } else {
      const ToolDocument& doc = components.registry->at(*tool);
      std::string missing;
      for (const ToolParam& p : doc.required_parameters) {
        if (!parsed.contains(p.name)) {
          missing = p.name;
          break;
        }
      }
      if (!missing.empty()) {
        feedback_kind = "tool_error";
        feedback = "Error: missing required parameter '" + missing + "'.";
      } else {
        ToolResponse resp =
            components.env->call(*tool, detail::canonical_json(parsed));
        if (resp.ok) {
          feedback = resp.body;
        } else {
          feedback_kind = resp.error_kind.empty() ? "tool_error" : resp.error_kind;
          feedback = "Error: tool call failed (" + feedback_kind + ").";
        }
      }
    }
    ctx.conv.push_back({Role::kUser, feedback});
    {
      AgentEvent ev;
      ev.kind = AgentEventKind::kFeedback;
      ev.turn = result.assistant_turns;
      ev.text = feedback;
      ev.detail = feedback_kind;
      if (tool) ev.tool = *tool;
      result.events.push_back(std::move(ev));
    }
    ++result.action_rounds;
  }
  (void)finished_early;

  ctx.conv.push_back({Role::kUser, kAnswerHintText});
  std::string final_text = ctx.guarded_text_turn(AgentPhase::kFinal);
  ctx.commit_assistant(final_text, AgentEventKind::kFinal);
  result.final_answer = final_text;
  result.terminal = retry_guard(final_text) ? TerminalState::kGaveUp
                                            : TerminalState::kFinished;
  result.conversation = std::move(ctx.conv);
  return result;
}

std::optional<double> hallucination_rate(
    std::span<const SessionResult> sessions) {
  size_t actions = 0, misses = 0;
  for (const SessionResult& s : sessions) {
    actions += s.action_count;
    misses += s.not_a_tool_count;
  }
  if (actions == 0) return std::nullopt;
  return static_cast<double>(misses) / static_cast<double>(actions);
}

void save_sessions(std::ostream& out,
                   const std::vector<SessionRecord>& records) {
  for (const SessionRecord& rec : records) {
    json doc;
    doc["session_id"] = rec.session_id;
    doc["ts_ms"] = rec.ts_ms;
    doc["terminal"] = terminal_name(rec.result.terminal);
    doc["final_answer"] = rec.result.final_answer;
    doc["assistant_turns"] = rec.result.assistant_turns;
    doc["action_rounds"] = rec.result.action_rounds;
    doc["action_count"] = rec.result.action_count;
    doc["not_a_tool_count"] = rec.result.not_a_tool_count;
    doc["retries_used"] = rec.result.retries_used;
    doc["malformed_parameter_reasks"] = rec.result.malformed_parameter_reasks;
    json events = json::array();
    for (const AgentEvent& ev : rec.result.events) {
      json e;
      e["kind"] = event_kind_name(ev.kind);
      e["turn"] = ev.turn;
      e["text"] = ev.text;
      if (ev.tool) e["tool"] = ev.tool->ordinal;
      if (ev.not_a_tool) e["not_a_tool"] = true;
      if (!ev.detail.empty()) e["detail"] = ev.detail;
      events.push_back(std::move(e));
    }
    doc["events"] = std::move(events);
    json conv = json::array();
    for (const ChatMessage& msg : rec.result.conversation)
      conv.push_back({{"role", role_name(msg.role)}, {"content", msg.content}});
    doc["conversation"] = std::move(conv);
    out << doc.dump() << "\n";
  }
}

std::vector<SessionRecord> load_sessions(std::istream& in,
                                         const std::string& where) {
  std::vector<SessionRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string at = where + ":" + std::to_string(lineno);
    json doc = detail::parse_json(line, at);
    if (!doc.is_object()) throw ParseError(at, "expected a JSON object");
    SessionRecord rec;
    rec.session_id = detail::optional_string(doc, "session_id", at);
    rec.ts_ms = doc.value("ts_ms", uint64_t{0});
    SessionResult& r = rec.result;
    std::string terminal = detail::optional_string(doc, "terminal", at, "finished");
    if (terminal == "gave-up") r.terminal = TerminalState::kGaveUp;
    else if (terminal == "turn-limit") r.terminal = TerminalState::kTurnLimit;
    else r.terminal = TerminalState::kFinished;
    r.final_answer = detail::optional_string(doc, "final_answer", at);
    r.assistant_turns = doc.value("assistant_turns", uint64_t{0});
    r.action_rounds = doc.value("action_rounds", uint64_t{0});
    r.action_count = doc.value("action_count", uint64_t{0});
    r.not_a_tool_count = doc.value("not_a_tool_count", uint64_t{0});
    r.retries_used = doc.value("retries_used", uint64_t{0});
    r.malformed_parameter_reasks =
        doc.value("malformed_parameter_reasks", uint64_t{0});
    if (auto it = doc.find("events"); it != doc.end() && it->is_array()) {
      for (const json& e : *it) {
        AgentEvent ev;
        std::string kind = detail::optional_string(e, "kind", at, "thought");
        for (AgentEventKind k :
             {AgentEventKind::kThought, AgentEventKind::kAction,
              AgentEventKind::kParameters, AgentEventKind::kFeedback,
              AgentEventKind::kRetry, AgentEventKind::kFinal})
          if (kind == event_kind_name(k)) ev.kind = k;
        ev.turn = e.value("turn", uint64_t{0});
        ev.text = detail::optional_string(e, "text", at);
        if (auto t = e.find("tool"); t != e.end() && t->is_number_unsigned())
          ev.tool = ToolId{t->get<uint32_t>()};
        ev.not_a_tool = e.value("not_a_tool", false);
        ev.detail = detail::optional_string(e, "detail", at);
        r.events.push_back(std::move(ev));
      }
    }
    if (auto it = doc.find("conversation"); it != doc.end() && it->is_array()) {
      for (const json& m : *it) {
        ChatMessage msg;
        std::string role = detail::optional_string(m, "role", at, "user");
        if (role == "assistant") msg.role = Role::kAssistant;
        else if (role == "system") msg.role = Role::kSystem;
        else msg.role = Role::kUser;
        msg.content = detail::optional_string(m, "content", at);
        r.conversation.push_back(std::move(msg));
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace toolvoc
