// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toolvoc/chat.hpp"
#include "toolvoc/indexer.hpp"
#include "toolvoc/registry.hpp"
#include "toolvoc/tokenizer.hpp"

namespace toolvoc {

// Instruction domains of the source data. Single-tool queries use one tool;
// intra-category queries mix tools from one category; cross-category queries
// span categories. Domains drive the evaluation split downstream.
enum class Domain { kSingleTool, kIntraCategory, kCrossCategory };
const char* domain_name(Domain d);
std::optional<Domain> domain_from_name(const std::string& name);

// One (input text -> tool token sequence) training pair. Stage one
// (memorization) pairs a document's text with its identifier; stage two
// (retrieval) pairs a user query with each annotated relevant identifier.
struct TrainPair {
  std::string input_text;
  std::string target_surface;
  TokenSeq input;   // encode(input_text)
  TokenSeq target;  // the identifier's token sequence
};

// A query annotated with its relevant tools, for stage-two data and for
// retrieval evaluation.
struct QueryAnnotation {
  std::string query;
  Domain domain = Domain::kSingleTool;
  std::vector<ToolId> relevant;
};

std::vector<TrainPair> build_memorization(const ToolRegistry& registry,
                                          const ToolIndex& index,
                                          const Vocabulary& vocab);
std::vector<TrainPair> build_retrieval(
    const std::vector<QueryAnnotation>& annotations,
    const ToolRegistry& registry, const ToolIndex& index,
    const Vocabulary& vocab);

// ---- stage three: agent-tuning conversations ------------------------------

// A raw logged step from the source interaction format: free-text reasoning,
// an action name, a JSON parameter object, and the tool's response.
struct RawStep {
  std::string thought;
  std::string action;
  std::string parameters;
  std::string observation;
};

struct RawTrajectory {
  std::string id;
  std::string system_prompt;  // verbose, includes the full tool list
  std::string query;
  std::vector<RawStep> steps;
  std::string final_answer;
};

enum class TurnTag {
  kThought,
  kActionHint,
  kAction,
  kToolDoc,
  kParameters,
  kObservation,
};
const char* turn_tag_name(TurnTag tag);

struct SampleTurn {
  Role role = Role::kUser;
  TurnTag tag = TurnTag::kThought;
  std::string content;
  TokenSeq tokens;  // filled for action turns: the identifier sequence
};

// One converted conversation. Each raw step expands to six turns
// (assistant thought, user action hint, assistant action, user tool text,
// assistant parameters, user observation) — three assistant turns per step.
// The final answer stays separate from the step turns.
struct AgentSample {
  std::string id;
  std::string system_prompt;  // stripped of the tool list
  std::string query;
  std::optional<std::string> gt_prefix;  // planning prefix naming the tools
  std::vector<SampleTurn> turns;
  std::string final_answer;
};

// Fixed turn templates. Versioned constants: changing them invalidates
// previously serialized corpora, so they only change deliberately.
extern const char* const kActionHintText;   // "Please generate the action."
extern const char* const kAnswerHintText;   // "Please provide the final answer."
extern const char* const kToolListMarker;   // "You have access to the following tools:"
extern const char* const kGtPrefixLead;     // "I am using the following tools:"

// Removes the tool list from a raw system prompt: everything from the
// marker onward goes, and any remaining line that contains a registered
// surface goes too. The result must never leak an identifier the model is
// supposed to produce from memory.
std::string strip_tool_list(const std::string& system_prompt,
                            const std::vector<std::string>& surfaces);

// Maps raw action strings to tools. Lookup keys are the semantic surface
// ("{api}_for_{tool}", normalized) and the bare normalized api name; on
// ambiguity the lowest-ordinal tool wins and later keys are ignored.
class ActionResolver {
 public:
  explicit ActionResolver(const ToolRegistry& registry);
  std::optional<ToolId> resolve(const std::string& action) const;

 private:
  std::map<std::string, ToolId> by_key_;
};

struct ConvertContext {
  const ToolRegistry* registry = nullptr;
  const ToolIndex* index = nullptr;
  const Vocabulary* vocab = nullptr;
  bool add_gt_prefix = false;
};

// Converts one trajectory; returns nullopt and fills `error` when a step's
// action cannot be resolved or the trajectory is structurally empty.
std::optional<AgentSample> convert_trajectory(const RawTrajectory& raw,
                                              const ConvertContext& ctx,
                                              std::string* error);

struct ConvertReject {
  size_t index = 0;  // position in the input batch
  std::string trajectory_id;
  std::string reason;
};

struct ConvertResult {
  std::vector<AgentSample> samples;  // input order, rejects removed
  std::vector<ConvertReject> rejects;
};

// Batch conversion, parallel over trajectories when threads > 1. Output
// order matches input order regardless of thread interleaving.
ConvertResult convert_batch(const std::vector<RawTrajectory>& raws,
                            const ConvertContext& ctx, size_t threads = 1);

// Inverse of convert_trajectory for the step content: thought, action (in
// semantic form), parameters, observation, plus query and final answer.
// The verbose system prompt is gone for good, so that field stays empty.
RawTrajectory reassemble_steps(const AgentSample& sample,
                               const ConvertContext& ctx);

struct CorpusStats {
  size_t registry_size = 0;
  size_t registry_duplicates = 0;
  size_t memorization_pairs = 0;
  size_t retrieval_pairs = 0;
  size_t retrieval_queries = 0;
  std::map<Domain, size_t> queries_by_domain;
  size_t agent_samples = 0;
  size_t agent_rejects = 0;

  void write_json(std::ostream& out) const;
};

CorpusStats corpus_stats(const ToolRegistry& registry,
                         const std::vector<TrainPair>& memorization,
                         const std::vector<QueryAnnotation>& annotations,
                         const std::vector<TrainPair>& retrieval,
                         const ConvertResult& converted);

// ---- serialization --------------------------------------------------------
// JSONL readers/writers. Writers emit one compact object per line with keys
// in a fixed order; readers throw ParseError with file:line context.

void save_train_pairs(std::ostream& out, const std::vector<TrainPair>& pairs);
std::vector<TrainPair> load_train_pairs(std::istream& in,
                                        const Vocabulary& vocab,
                                        const std::string& where);

void save_annotations(std::ostream& out,
                      const std::vector<QueryAnnotation>& annotations,
                      const ToolRegistry& registry);
std::vector<QueryAnnotation> load_annotations(std::istream& in,
                                              const ToolRegistry& registry,
                                              const std::string& where);

void save_trajectories(std::ostream& out,
                       const std::vector<RawTrajectory>& trajectories);
std::vector<RawTrajectory> load_trajectories(std::istream& in,
                                             const std::string& where);

void save_agent_samples(std::ostream& out,
                        const std::vector<AgentSample>& samples);
std::vector<AgentSample> load_agent_samples(std::istream& in,
                                            const std::string& where);

}  // namespace toolvoc
