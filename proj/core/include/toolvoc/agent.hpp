// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toolvoc/chat.hpp"
#include "toolvoc/decode.hpp"
#include "toolvoc/indexer.hpp"
#include "toolvoc/registry.hpp"
#include "toolvoc/scorer.hpp"
#include "toolvoc/tokenizer.hpp"
#include "toolvoc/trie.hpp"

namespace toolvoc {

// Reserved action surface that ends the action loop and asks for the final
// answer. Registered as one atomic token and inserted into the action trie.
extern const char* const kFinishSurface;  // "<<Finish>>"

struct AgentConfig {
  size_t max_turns = 16;         // assistant turns, final answer included
  size_t max_action_rounds = 5;  // thought/action/parameters cycles
  double base_temperature = 0.0;
  double retry_temperature = 0.7;
  size_t max_retries = 3;        // regeneration budget per session
  bool constrain_actions = true;
  size_t per_turn_token_budget = 256;
  uint64_t seed = 0;
  std::vector<ToolId> gt_tools;  // optional ground-truth toolset
  bool restrict_to_gt = false;   // action trie over gt_tools + Finish only

  // Throws InvalidArgument unless at least one action round plus the final
  // answer fits (max_turns >= 4) and retry_temperature > base_temperature.
  void validate() const;
};

enum class AgentPhase { kThought, kAction, kParameters, kFinal };
const char* phase_name(AgentPhase phase);

struct TurnRequest {
  AgentPhase phase = AgentPhase::kThought;
  double temperature = 0.0;
  uint64_t seed = 0;
  size_t max_new_tokens = 256;
  // Non-null when the turn must be a legal trie walk (action turns under
  // constrained decoding).
  const DisjunctiveTrie* constraint = nullptr;
};

struct TurnResult {
  TokenSeq tokens;
  bool truncated = false;
};

// Where assistant turns come from. The production source wraps a scorer;
// tests script it. The seam exists so the state machine logic is testable
// without any model in the loop.
class TurnSource {
 public:
  virtual ~TurnSource() = default;
  virtual TurnResult next_turn(const Conversation& conversation,
                               const TurnRequest& request) = 0;
};

// Generates turns from a Scorer: free sampling for thought/parameters/final
// turns, a constrained walk for action turns.
class ModelTurnSource : public TurnSource {
 public:
  ModelTurnSource(const Scorer& scorer, const Vocabulary& vocab);
  TurnResult next_turn(const Conversation& conversation,
                       const TurnRequest& request) override;

 private:
  const Scorer& scorer_;
  const Vocabulary& vocab_;
};

// Executes resolved tool calls. Implementations: fixtures (tests, offline
// runs) and HTTP (http_env.hpp).
struct ToolResponse {
  bool ok = false;
  std::string body;        // feedback text on success
  std::string error_kind;  // "tool_error" | "network_error" when !ok
};

class ToolEnvironment {
 public:
  virtual ~ToolEnvironment() = default;
  virtual ToolResponse call(ToolId tool, const std::string& params_json) = 0;
};

// Canned responses keyed by (tool, canonicalized parameter JSON). The JSON
// canonicalization sorts object keys, so fixtures are order-insensitive.
class FixtureEnvironment : public ToolEnvironment {
 public:
  void add(ToolId tool, const std::string& params_json, std::string body);
  void set_default(std::string body) { default_body_ = std::move(body); }
  ToolResponse call(ToolId tool, const std::string& params_json) override;

 private:
  std::map<std::pair<uint32_t, std::string>, std::string> canned_;
  std::optional<std::string> default_body_;
};

enum class AgentEventKind {
  kThought,
  kAction,      // logged for every non-Finish action emission
  kParameters,
  kFeedback,
  kRetry,       // a flagged turn was regenerated at retry temperature
  kFinal,
};
const char* event_kind_name(AgentEventKind kind);

struct AgentEvent {
  AgentEventKind kind = AgentEventKind::kThought;
  size_t turn = 0;  // assistant-turn index at emission, 0-based
  std::string text;
  std::optional<ToolId> tool;  // resolved target of an action
  bool not_a_tool = false;     // action that resolved to nothing
  std::string detail;          // feedback kind, retry reason, ...
};

enum class TerminalState { kFinished, kGaveUp, kTurnLimit };
const char* terminal_name(TerminalState state);

struct SessionResult {
  std::vector<AgentEvent> events;
  Conversation conversation;
  TerminalState terminal = TerminalState::kFinished;
  std::string final_answer;
  size_t assistant_turns = 0;
  size_t action_rounds = 0;
  size_t action_count = 0;
  size_t not_a_tool_count = 0;
  size_t retries_used = 0;
  size_t malformed_parameter_reasks = 0;
};

// True when `text` reads as giving up: contains "give up" or "i'm sorry",
// case-insensitive, with the typographic apostrophe normalized first.
bool retry_guard(const std::string& text);

struct AgentComponents {
  const Vocabulary* vocab = nullptr;
  const ToolRegistry* registry = nullptr;
  const ToolIndex* index = nullptr;
  const DisjunctiveTrie* action_trie = nullptr;  // identifiers + Finish
  TokenId finish_token = 0;
  ToolEnvironment* env = nullptr;
};

// Builds the action trie for `index` with the Finish sequence included, and
// registers the Finish surface in `vocab` if absent. Returns the trie plus
// the finish token id via `finish_token`.
DisjunctiveTrie build_action_trie(const ToolIndex& index, Vocabulary& vocab,
                                  TokenId* finish_token,
                                  const std::vector<ToolId>* subset = nullptr);

// Runs one session of the agent state machine:
//   (Thought, Action, Parameters-and-Feedback)* then the final answer.
// Rounds stop when the model emits Finish, the round budget runs out, or
// another round would not leave room for the final turn. Turns flagged by
// retry_guard are regenerated at retry temperature while the per-session
// retry budget lasts; a flagged final answer accepted after the budget is
// exhausted terminates the session as kGaveUp.
SessionResult run_session(const AgentComponents& components,
                          TurnSource& source, const AgentConfig& config,
                          const std::string& query,
                          const std::string& system_prompt = {});

// Fraction of action emissions that resolved to nothing, across sessions.
// nullopt when no actions were emitted at all.
std::optional<double> hallucination_rate(
    std::span<const SessionResult> sessions);

// JSONL persistence for session logs. `ts_ms` stamps every record; pass 0
// for reproducible files. Readers throw ParseError with line context.
struct SessionRecord {
  std::string session_id;
  uint64_t ts_ms = 0;
  SessionResult result;
};

void save_sessions(std::ostream& out,
                   const std::vector<SessionRecord>& records);
std::vector<SessionRecord> load_sessions(std::istream& in,
                                         const std::string& where);

}  // namespace toolvoc
