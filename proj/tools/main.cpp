// SPDX-License-Identifier: Apache-2.0
// toolvoc: batch entry points over the library — normalize tool registries,
// build identifier indexes, construct datasets, train the count model, and
// run retrieval / agent-loop evaluations reproducibly.
//
// Every subcommand writes its artifacts into a run directory named by a hash
// of the effective configuration, so identical invocations land in the same
// place with byte-identical contents (timestamps excluded when enabled).
// Exit codes: 0 ok, 1 data error, 2 usage error.
#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "toolvoc/agent.hpp"
#include "toolvoc/bm25.hpp"
#include "toolvoc/datasets.hpp"
#include "toolvoc/error.hpp"
#include "toolvoc/http_env.hpp"
#include "toolvoc/indexer.hpp"
#include "toolvoc/registry.hpp"
#include "toolvoc/retrieval.hpp"
#include "toolvoc/rng.hpp"
#include "toolvoc/scorer.hpp"
#include "toolvoc/tokenizer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace toolvoc;

namespace {

size_t default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 4 : n;
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// The effective configuration of one invocation, rendered canonically. The
// rendering both names the run directory (via its hash) and is written into
// it, so a run can always be re-traced to its exact inputs.
class RunSpec {
 public:
  explicit RunSpec(std::string command) : command_(std::move(command)) {}

  void set(const std::string& key, const std::string& value) {
    kv_[key] = value;
  }
  void set(const std::string& key, const char* value) { kv_[key] = value; }
  void set(const std::string& key, bool value) {
    kv_[key] = value ? "true" : "false";
  }
  void set(const std::string& key, double value) {
    std::ostringstream s;
    s << std::setprecision(17) << value;
    kv_[key] = s.str();
  }
  template <typename T>
    requires std::is_integral_v<T>
  void set(const std::string& key, T value) {
    kv_[key] = std::to_string(value);
  }
  void set(const std::string& key, const std::vector<std::string>& values) {
    std::string joined;
    for (const std::string& v : values) {
      if (!joined.empty()) joined += ',';
      joined += v;
    }
    kv_[key] = joined;
  }
  void set(const std::string& key, const std::vector<size_t>& values) {
    std::string joined;
    for (size_t v : values) {
      if (!joined.empty()) joined += ',';
      joined += std::to_string(v);
    }
    kv_[key] = joined;
  }

  std::string text() const {
    std::string out = "command = " + command_ + "\n";
    for (const auto& [k, v] : kv_) out += k + " = " + v + "\n";
    return out;
  }

  std::string dir_name() const {
    std::ostringstream h;
    h << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(text());
    return command_ + "-" + h.str();
  }

 private:
  std::string command_;
  std::map<std::string, std::string> kv_;
};

struct CommonOpts {
  std::string out_root = "runs";
  std::string run_dir;  // explicit override of the hashed location
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--out", opts->out_root,
                  "Root directory for hashed run directories")
      ->capture_default_str();
  cmd->add_option("--run-dir", opts->run_dir,
                  "Write artifacts to this exact directory instead");
  // --config lives on the root app (CLI11 only processes it there); let it
  // reach the root when given after the subcommand name.
  cmd->fallthrough();
}

fs::path prepare_run_dir(const RunSpec& spec, const CommonOpts& common) {
  fs::path dir = common.run_dir.empty()
                     ? fs::path(common.out_root) / spec.dir_name()
                     : fs::path(common.run_dir);
  fs::create_directories(dir);
  std::ofstream cfg(dir / "run.txt");
  cfg << spec.text();
  std::cout << "run-dir: " << dir.string() << "\n";
  return dir;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(path.string(), "cannot write file");
  return out;
}

std::vector<std::string> load_lines(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// ---- index scheme flags ----------------------------------------------------

struct SchemeOpts {
  std::string scheme = "atomic";
  int numeric_width = 6;
  int branching = 10;
};

void add_scheme(CLI::App* cmd, SchemeOpts* opts) {
  cmd->add_option("--scheme", opts->scheme, "Tool identifier scheme")
      ->check(CLI::IsMember({"atomic", "semantic", "numeric", "hierarchical"}))
      ->capture_default_str();
  cmd->add_option("--numeric-width", opts->numeric_width,
                  "Digits per numeric identifier")
      ->capture_default_str();
  cmd->add_option("--branching", opts->branching,
                  "Fan-out per hierarchical level (2..10)")
      ->capture_default_str();
}

IndexScheme to_scheme(const SchemeOpts& opts, uint64_t seed) {
  IndexScheme scheme;
  if (opts.scheme == "atomic") scheme.kind = SchemeKind::kAtomic;
  else if (opts.scheme == "semantic") scheme.kind = SchemeKind::kSemantic;
  else if (opts.scheme == "numeric") scheme.kind = SchemeKind::kNumeric;
  else scheme.kind = SchemeKind::kHierarchical;
  scheme.numeric_width = opts.numeric_width;
  scheme.branching = opts.branching;
  scheme.seed = seed;
  return scheme;
}

void spec_scheme(RunSpec* spec, const SchemeOpts& opts, uint64_t seed) {
  spec->set("scheme", opts.scheme);
  spec->set("numeric_width", opts.numeric_width);
  spec->set("branching", opts.branching);
  spec->set("seed", seed);
}

// ---- shared workload ---------------------------------------------------------

// Registry + vocabulary + index, built identically by every subcommand that
// needs them. The reserved Finish surface is always registered, so the same
// (registry, scheme) pair yields the same vocabulary everywhere and a scorer
// trained by one subcommand is valid in all the others.
struct Workload {
  ToolRegistry registry;
  Vocabulary vocab = Vocabulary::byte_base();
  ToolIndex index;
  TokenId finish = 0;
  DisjunctiveTrie trie;

  Workload(const std::string& registry_path, const IndexScheme& scheme)
      : registry(load_registry(registry_path)),
        index(build_index(registry, scheme, vocab)),
        trie(build_action_trie(index, vocab, &finish)) {}
};

std::unique_ptr<CountScorer> load_scorer(const std::string& path,
                                         const Vocabulary& vocab) {
  std::ifstream in = open_input(path);
  auto scorer = std::make_unique<CountScorer>(CountScorer::load(in, path));
  if (scorer->vocab_size() != vocab.size())
    throw InvalidArgument(
        "scorer vocabulary (" + std::to_string(scorer->vocab_size()) +
        " tokens) does not match the index vocabulary (" +
        std::to_string(vocab.size()) + "); was it trained with this scheme?");
  return scorer;
}

void print_histogram(const std::map<size_t, size_t>& hist) {
  for (const auto& [len, count] : hist)
    std::cout << "  length " << std::setw(3) << len << ": " << count << "\n";
}

json histogram_json(const std::map<size_t, size_t>& hist) {
  json arr = json::array();
  for (const auto& [len, count] : hist)
    arr.push_back({{"length", len}, {"count", count}});
  return arr;
}

// ---- ingest ------------------------------------------------------------------

struct IngestOpts {
  CommonOpts common;
  std::string input;
};

void run_ingest(const IngestOpts& opts) {
  RunSpec spec("ingest");
  spec.set("input", opts.input);
  ToolRegistry registry = load_registry(opts.input);
  fs::path dir = prepare_run_dir(spec, opts.common);
  std::ofstream out = open_output(dir / "registry.jsonl");
  save_registry(out, registry);
  std::cout << "tools: " << registry.size() << "\n"
            << "duplicates-dropped: " << registry.duplicate_count() << "\n";
}

// ---- index -------------------------------------------------------------------

struct IndexOpts {
  CommonOpts common;
  std::string registry;
  SchemeOpts scheme;
  uint64_t seed = 0;
};

void run_index(const IndexOpts& opts) {
  RunSpec spec("index");
  spec.set("registry", opts.registry);
  spec_scheme(&spec, opts.scheme, opts.seed);
  Workload w(opts.registry, to_scheme(opts.scheme, opts.seed));
  fs::path dir = prepare_run_dir(spec, opts.common);

  std::ofstream vocab_out = open_output(dir / "vocab.tsv");
  w.vocab.save(vocab_out);

  std::ofstream index_out = open_output(dir / "index.jsonl");
  for (const IndexedTool& e : w.index.entries()) {
    const ToolDocument& d = w.registry.at(e.id);
    json doc;
    doc["ordinal"] = e.id.ordinal;
    doc["tool"] = d.tool_name;
    doc["api"] = d.api_name;
    doc["surface"] = e.surface;
    doc["tokens"] = e.tokens;
    index_out << doc.dump() << "\n";
  }

  std::cout << "tools: " << w.index.size() << "\n"
            << "vocab-size: " << w.vocab.size() << "\n";
  print_histogram(w.index.length_histogram());
}

// ---- stats ---------------------------------------------------------------------

struct StatsOpts {
  CommonOpts common;
  std::string registry;
  SchemeOpts scheme;
  uint64_t seed = 0;
};

void run_stats(const StatsOpts& opts) {
  RunSpec spec("stats");
  spec.set("registry", opts.registry);
  spec_scheme(&spec, opts.scheme, opts.seed);
  Workload w(opts.registry, to_scheme(opts.scheme, opts.seed));
  fs::path dir = prepare_run_dir(spec, opts.common);

  auto hist = w.index.length_histogram();
  json doc;
  doc["registry_size"] = w.registry.size();
  doc["duplicates_dropped"] = w.registry.duplicate_count();
  doc["scheme"] = opts.scheme.scheme;
  doc["vocab_size"] = w.vocab.size();
  doc["atomic_tokens"] = w.vocab.atomic_count();
  doc["length_histogram"] = histogram_json(hist);
  doc["trie_sequences"] = w.trie.sequence_count();
  doc["trie_nodes"] = w.trie.node_count();
  std::ofstream out = open_output(dir / "stats.json");
  out << doc.dump(2) << "\n";

  std::cout << "registry-size: " << w.registry.size() << "\n"
            << "scheme: " << opts.scheme.scheme << "\n"
            << "vocab-size: " << w.vocab.size() << "\n"
            << "token-length histogram:\n";
  print_histogram(hist);
}

// ---- build-data -----------------------------------------------------------------

struct BuildDataOpts {
  CommonOpts common;
  std::string registry;
  SchemeOpts scheme;
  uint64_t seed = 0;
  std::string annotations;   // optional retrieval annotations (JSONL)
  std::string trajectories;  // optional raw agent trajectories (JSONL)
  bool gt_prefix = false;
  size_t threads = default_threads();
};

void run_build_data(const BuildDataOpts& opts) {
  RunSpec spec("build-data");
  spec.set("registry", opts.registry);
  spec_scheme(&spec, opts.scheme, opts.seed);
  spec.set("annotations", opts.annotations);
  spec.set("trajectories", opts.trajectories);
  spec.set("gt_prefix", opts.gt_prefix);
  Workload w(opts.registry, to_scheme(opts.scheme, opts.seed));
  fs::path dir = prepare_run_dir(spec, opts.common);

  auto memorization = build_memorization(w.registry, w.index, w.vocab);
  {
    std::ofstream out = open_output(dir / "memorization.jsonl");
    save_train_pairs(out, memorization);
  }

  std::vector<QueryAnnotation> annotations;
  std::vector<TrainPair> retrieval;
  if (!opts.annotations.empty()) {
    std::ifstream in = open_input(opts.annotations);
    annotations = load_annotations(in, w.registry, opts.annotations);
    retrieval = build_retrieval(annotations, w.registry, w.index, w.vocab);
    std::ofstream out = open_output(dir / "retrieval.jsonl");
    save_train_pairs(out, retrieval);
  }

  ConvertResult converted;
  if (!opts.trajectories.empty()) {
    std::ifstream in = open_input(opts.trajectories);
    auto raws = load_trajectories(in, opts.trajectories);
    ConvertContext ctx{&w.registry, &w.index, &w.vocab, opts.gt_prefix};
    converted = convert_batch(raws, ctx, opts.threads);
    std::ofstream samples = open_output(dir / "agent_samples.jsonl");
    save_agent_samples(samples, converted.samples);
    std::ofstream rejects = open_output(dir / "rejects.jsonl");
    for (const ConvertReject& r : converted.rejects) {
      json doc;
      doc["index"] = r.index;
      doc["trajectory_id"] = r.trajectory_id;
      doc["reason"] = r.reason;
      rejects << doc.dump() << "\n";
    }
  }

  CorpusStats stats =
      corpus_stats(w.registry, memorization, annotations, retrieval, converted);
  {
    std::ofstream out = open_output(dir / "corpus_stats.json");
    stats.write_json(out);
  }

  std::cout << "memorization-pairs: " << stats.memorization_pairs << "\n"
            << "retrieval-pairs: " << stats.retrieval_pairs << "\n"
            << "agent-samples: " << stats.agent_samples << "\n"
            << "agent-rejects: " << stats.agent_rejects << "\n";
}

// ---- train-scorer -----------------------------------------------------------------

struct TrainScorerOpts {
  CommonOpts common;
  std::string registry;
  SchemeOpts scheme;
  uint64_t seed = 0;
  std::vector<std::string> data;  // train-pair JSONL files
  double alpha = 0.5;
};

void run_train_scorer(const TrainScorerOpts& opts) {
  RunSpec spec("train-scorer");
  spec.set("registry", opts.registry);
  spec_scheme(&spec, opts.scheme, opts.seed);
  spec.set("data", opts.data);
  spec.set("alpha", opts.alpha);
  Workload w(opts.registry, to_scheme(opts.scheme, opts.seed));
  fs::path dir = prepare_run_dir(spec, opts.common);

  std::vector<std::pair<TokenSeq, TokenSeq>> raw;
  for (const std::string& path : opts.data) {
    std::ifstream in = open_input(path);
    for (TrainPair& p : load_train_pairs(in, w.vocab, path))
      raw.emplace_back(std::move(p.input), std::move(p.target));
  }
  if (raw.empty()) throw InvalidArgument("no training pairs in --data inputs");

  CountScorer scorer = train_count_scorer(raw, opts.alpha, w.vocab.size(),
                                          w.vocab.base_size(), w.vocab.eos());
  std::ofstream out = open_output(dir / "scorer.json");
  scorer.save(out);
  std::cout << "pairs: " << raw.size() << "\n"
            << "contexts: " << scorer.context_count() << "\n"
            << "vocab-size: " << scorer.vocab_size() << "\n";
}

// ---- retrieve ------------------------------------------------------------------------

struct RetrieveOpts {
  CommonOpts common;
  std::string registry;
  SchemeOpts scheme;
  uint64_t seed = 0;
  std::string scorer;
  std::string retriever = "generative";
  std::vector<std::string> query;
  std::string queries_file;
  size_t top_k = 5;
};

void run_retrieve(const RetrieveOpts& opts) {
  RunSpec spec("retrieve");
  spec.set("registry", opts.registry);
  spec_scheme(&spec, opts.scheme, opts.seed);
  spec.set("scorer", opts.scorer);
  spec.set("retriever", opts.retriever);
  spec.set("query", opts.query);
  spec.set("queries", opts.queries_file);
  spec.set("top_k", opts.top_k);
  Workload w(opts.registry, to_scheme(opts.scheme, opts.seed));

  std::vector<std::string> queries = opts.query;
  if (!opts.queries_file.empty())
    for (std::string& q : load_lines(opts.queries_file))
      queries.push_back(std::move(q));
  if (queries.empty())
    throw InvalidArgument("nothing to rank: pass --query or --queries");

  std::unique_ptr<CountScorer> scorer;
  std::unique_ptr<Retriever> retriever;
  if (opts.retriever == "bm25") {
    retriever = std::make_unique<Bm25Retriever>();
  } else {
    if (opts.scorer.empty())
      throw InvalidArgument("the generative retriever needs --scorer");
    scorer = load_scorer(opts.scorer, w.vocab);
    retriever =
        std::make_unique<GenerativeRetriever>(*scorer, w.vocab, w.index);
  }

  std::vector<ToolId> pool;
  for (uint32_t i = 0; i < w.registry.size(); ++i) pool.push_back(ToolId{i});
  retriever->prepare(w.registry, {pool});

  fs::path dir = prepare_run_dir(spec, opts.common);
  json results = json::array();
  for (const std::string& q : queries) {
    std::vector<ToolId> ranked = retriever->rank(q, 0, opts.top_k);
    json entry;
    entry["query"] = q;
    json hits = json::array();
    for (ToolId id : ranked) {
      const ToolDocument& d = w.registry.at(id);
      hits.push_back({{"ordinal", id.ordinal},
                      {"tool", d.tool_name},
                      {"api", d.api_name},
                      {"surface", w.index.entry(id).surface}});
    }
    entry["ranked"] = std::move(hits);
    results.push_back(std::move(entry));
    std::cout << q << " -> "
              << (ranked.empty() ? std::string("(no hit)")
                                 : w.index.entry(ranked[0]).surface)
              << "\n";
  }
  std::ofstream out = open_output(dir / "result.json");
  out << results.dump(2) << "\n";
}

// ---- eval-retrieval ---------------------------------------------------------------------

struct EvalRetrievalOpts {
  CommonOpts common;
  std::string registry;
  SchemeOpts scheme;
  uint64_t seed = 0;
  std::string annotations;
  std::string scorer;
  std::string retriever = "generative";
  std::string setting = "in-domain";
  std::vector<size_t> cutoffs;
  size_t threads = default_threads();
};

void run_eval_retrieval(const EvalRetrievalOpts& opts) {
  RunSpec spec("eval-retrieval");
  spec.set("registry", opts.registry);
  spec_scheme(&spec, opts.scheme, opts.seed);
  spec.set("annotations", opts.annotations);
  spec.set("scorer", opts.scorer);
  spec.set("retriever", opts.retriever);
  spec.set("setting", opts.setting);
  std::vector<size_t> cutoffs =
      opts.cutoffs.empty() ? std::vector<size_t>{1, 3, 5} : opts.cutoffs;
  spec.set("cutoffs", cutoffs);
  Workload w(opts.registry, to_scheme(opts.scheme, opts.seed));

  std::ifstream ann_in = open_input(opts.annotations);
  auto annotations = load_annotations(ann_in, w.registry, opts.annotations);

  std::unique_ptr<CountScorer> scorer;
  std::unique_ptr<Retriever> retriever;
  if (opts.retriever == "bm25") {
    retriever = std::make_unique<Bm25Retriever>();
  } else {
    if (opts.scorer.empty())
      throw InvalidArgument("the generative retriever needs --scorer");
    scorer = load_scorer(opts.scorer, w.vocab);
    retriever =
        std::make_unique<GenerativeRetriever>(*scorer, w.vocab, w.index);
  }

  Setting setting = opts.setting == "multi-domain" ? Setting::kMultiDomain
                                                   : Setting::kInDomain;
  EvalConfig config;
  config.cutoffs = cutoffs;
  config.threads = opts.threads;
  NdcgReport report =
      evaluate_retrieval(*retriever, w.registry, annotations, setting, config);

  fs::path dir = prepare_run_dir(spec, opts.common);
  {
    std::ofstream out = open_output(dir / "report.json");
    report.write_json(out);
  }
  {
    std::ofstream out = open_output(dir / "report.csv");
    report.write_csv(out);
  }
  report.write_table(std::cout);
}

// ---- agent-run -------------------------------------------------------------------------

struct AgentRunOpts {
  CommonOpts common;
  std::string registry;
  SchemeOpts scheme;
  uint64_t seed = 0;
  std::string scorer;        // optional; uniform model when absent
  std::string queries_file;  // one query per line
  std::string fixtures;      // JSONL {tool, params, body}
  std::string default_body;  // fixture fallback response
  std::string endpoints;     // JSONL {tool, url, method} -> live HTTP
  int http_timeout = 10;
  size_t http_concurrency = 4;
  size_t max_turns = 16;
  size_t max_rounds = 5;
  size_t max_retries = 3;
  double base_temp = 0.0;
  double retry_temp = 0.7;
  size_t budget = 256;
  bool free_actions = false;
  bool stamp = false;
  size_t threads = default_threads();
};

void load_fixtures(const std::string& path, const ToolRegistry& registry,
                   FixtureEnvironment* env) {
  ActionResolver resolver(registry);
  std::ifstream in = open_input(path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string at = path + ":" + std::to_string(lineno);
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      throw ParseError(at, "expected a JSON object");
    if (!doc.contains("tool") || !doc["tool"].is_string())
      throw ParseError(at, "missing string field 'tool'");
    std::string name = doc["tool"].get<std::string>();
    auto tool = resolver.resolve(name);
    if (!tool) throw ParseError(at, "unknown tool: " + name);
    if (!doc.contains("params")) throw ParseError(at, "missing field 'params'");
    std::string params = doc["params"].is_string()
                             ? doc["params"].get<std::string>()
                             : doc["params"].dump();
    if (!doc.contains("body") || !doc["body"].is_string())
      throw ParseError(at, "missing string field 'body'");
    env->add(*tool, params, doc["body"].get<std::string>());
  }
}

void load_endpoints(const std::string& path, const ToolRegistry& registry,
                    HttpToolEnvironment* env) {
  ActionResolver resolver(registry);
  std::ifstream in = open_input(path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string at = path + ":" + std::to_string(lineno);
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      throw ParseError(at, "expected a JSON object");
    if (!doc.contains("tool") || !doc["tool"].is_string())
      throw ParseError(at, "missing string field 'tool'");
    std::string name = doc["tool"].get<std::string>();
    auto tool = resolver.resolve(name);
    if (!tool) throw ParseError(at, "unknown tool: " + name);
    if (!doc.contains("url") || !doc["url"].is_string())
      throw ParseError(at, "missing string field 'url'");
    HttpEndpoint endpoint;
    endpoint.url = doc["url"].get<std::string>();
    endpoint.method = doc.value("method", std::string("GET"));
    env->register_endpoint(*tool, endpoint);
  }
}

void run_agent_run(const AgentRunOpts& opts) {
  RunSpec spec("agent-run");
  spec.set("registry", opts.registry);
  spec_scheme(&spec, opts.scheme, opts.seed);
  spec.set("scorer", opts.scorer);
  spec.set("queries", opts.queries_file);
  spec.set("fixtures", opts.fixtures);
  spec.set("default_body", opts.default_body);
  spec.set("endpoints", opts.endpoints);
  spec.set("http_timeout", opts.http_timeout);
  spec.set("max_turns", opts.max_turns);
  spec.set("max_rounds", opts.max_rounds);
  spec.set("max_retries", opts.max_retries);
  spec.set("base_temp", opts.base_temp);
  spec.set("retry_temp", opts.retry_temp);
  spec.set("budget", opts.budget);
  spec.set("free_actions", opts.free_actions);
  spec.set("stamp", opts.stamp);
  Workload w(opts.registry, to_scheme(opts.scheme, opts.seed));

  std::vector<std::string> queries = load_lines(opts.queries_file);
  if (queries.empty())
    throw InvalidArgument("no queries in " + opts.queries_file);

  // Environment: live HTTP endpoints when given, canned fixtures otherwise.
  FixtureEnvironment fixture_env;
  std::unique_ptr<HttpToolEnvironment> http_env;
  ToolEnvironment* env = &fixture_env;
  if (!opts.endpoints.empty()) {
    http_env = std::make_unique<HttpToolEnvironment>(opts.http_concurrency,
                                                     opts.http_timeout);
    load_endpoints(opts.endpoints, w.registry, http_env.get());
    env = http_env.get();
  } else {
    if (!opts.fixtures.empty())
      load_fixtures(opts.fixtures, w.registry, &fixture_env);
    if (!opts.default_body.empty()) fixture_env.set_default(opts.default_body);
  }

  std::unique_ptr<CountScorer> counts;
  std::unique_ptr<Scorer> scorer;
  if (opts.scorer.empty()) {
    scorer = std::make_unique<UniformScorer>(w.vocab.size());
  } else {
    counts = load_scorer(opts.scorer, w.vocab);
    scorer = std::make_unique<CountScorer>(*counts);
  }

  AgentConfig base;
  base.max_turns = opts.max_turns;
  base.max_action_rounds = opts.max_rounds;
  base.max_retries = opts.max_retries;
  base.base_temperature = opts.base_temp;
  base.retry_temperature = opts.retry_temp;
  base.per_turn_token_budget = opts.budget;
  base.constrain_actions = !opts.free_actions;
  base.validate();

  AgentComponents comp{&w.vocab, &w.registry, &w.index, &w.trie, w.finish, env};

  // Sessions are isolated: each gets its own turn source and a seed derived
  // from its index, so results are independent of worker count.
  std::vector<SessionResult> results(queries.size());
  std::atomic<size_t> cursor{0};
  auto worker = [&] {
    while (true) {
      size_t i = cursor.fetch_add(1);
      if (i >= queries.size()) break;
      AgentConfig config = base;
      config.seed = mix_seed(opts.seed, i);
      ModelTurnSource source(*scorer, w.vocab);
      results[i] = run_session(comp, source, config, queries[i]);
    }
  };
  size_t workers = std::min(opts.threads == 0 ? size_t{1} : opts.threads,
                            queries.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  uint64_t now_ms =
      opts.stamp
          ? static_cast<uint64_t>(
                std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count())
          : 0;
  std::vector<SessionRecord> records;
  records.reserve(results.size());
  for (size_t i = 0; i < results.size(); ++i) {
    std::ostringstream id;
    id << "session-" << std::setw(5) << std::setfill('0') << i;
    records.push_back({id.str(), now_ms, std::move(results[i])});
  }

  fs::path dir = prepare_run_dir(spec, opts.common);
  {
    std::ofstream out = open_output(dir / "trajectories.jsonl");
    save_sessions(out, records);
  }

  std::map<std::string, size_t> terminals;
  size_t actions = 0, misses = 0, retries = 0, reasks = 0, turns = 0;
  for (const SessionRecord& rec : records) {
    ++terminals[terminal_name(rec.result.terminal)];
    actions += rec.result.action_count;
    misses += rec.result.not_a_tool_count;
    retries += rec.result.retries_used;
    reasks += rec.result.malformed_parameter_reasks;
    turns += rec.result.assistant_turns;
  }
  json summary;
  summary["sessions"] = records.size();
  summary["terminals"] = terminals;
  summary["actions"] = actions;
  summary["not_a_tool"] = misses;
  if (actions == 0)
    summary["hallucination_rate"] = nullptr;
  else
    summary["hallucination_rate"] =
        static_cast<double>(misses) / static_cast<double>(actions);
  summary["retries_used"] = retries;
  summary["malformed_parameter_reasks"] = reasks;
  summary["mean_assistant_turns"] =
      static_cast<double>(turns) / static_cast<double>(records.size());
  {
    std::ofstream out = open_output(dir / "summary.json");
    out << summary.dump(2) << "\n";
  }

  std::cout << "sessions: " << records.size() << "\n";
  for (const auto& [name, count] : terminals)
    std::cout << "  " << name << ": " << count << "\n";
  if (actions == 0)
    std::cout << "hallucination-rate: n/a (no actions)\n";
  else
    std::cout << "hallucination-rate: "
              << static_cast<double>(misses) / static_cast<double>(actions)
              << "\n";
}

// ---- eval-hallucination --------------------------------------------------------------------

struct EvalHallucinationOpts {
  CommonOpts common;
  std::vector<std::string> sessions;
};

void run_eval_hallucination(const EvalHallucinationOpts& opts) {
  RunSpec spec("eval-hallucination");
  spec.set("sessions", opts.sessions);

  std::vector<SessionResult> all;
  json files = json::array();
  for (const std::string& path : opts.sessions) {
    std::ifstream in = open_input(path);
    auto records = load_sessions(in, path);
    files.push_back({{"path", path}, {"sessions", records.size()}});
    for (SessionRecord& rec : records) all.push_back(std::move(rec.result));
  }

  size_t actions = 0, misses = 0, retries = 0;
  std::map<std::string, size_t> terminals;
  for (const SessionResult& r : all) {
    actions += r.action_count;
    misses += r.not_a_tool_count;
    retries += r.retries_used;
    ++terminals[terminal_name(r.terminal)];
  }
  auto rate = hallucination_rate(all);

  fs::path dir = prepare_run_dir(spec, opts.common);
  json doc;
  doc["files"] = std::move(files);
  doc["sessions"] = all.size();
  doc["actions"] = actions;
  doc["not_a_tool"] = misses;
  if (rate)
    doc["hallucination_rate"] = *rate;
  else
    doc["hallucination_rate"] = nullptr;
  doc["retries_used"] = retries;
  doc["terminals"] = terminals;
  std::ofstream out = open_output(dir / "result.json");
  out << doc.dump(2) << "\n";

  std::cout << "sessions: " << all.size() << "\n"
            << "actions: " << actions << "\n";
  if (rate)
    std::cout << "hallucination-rate: " << *rate << "\n";
  else
    std::cout << "hallucination-rate: n/a (no actions)\n";
}

// ---- wiring -----------------------------------------------------------------------------

void add_registry_opt(CLI::App* cmd, std::string* slot) {
  cmd->add_option("--registry", *slot,
                  "Tool registry (.json, .jsonl, or a directory of them)")
      ->required();
}

void setup(CLI::App& app) {
  {
    auto opts = std::make_shared<IngestOpts>();
    CLI::App* cmd = app.add_subcommand(
        "ingest", "Normalize a tool registry into canonical JSONL");
    cmd->add_option("--input", opts->input,
                    "Registry input (.json, .jsonl, or a directory)")
        ->required();
    add_common(cmd, &opts->common);
    cmd->callback([opts] { run_ingest(*opts); });
  }
  {
    auto opts = std::make_shared<IndexOpts>();
    CLI::App* cmd = app.add_subcommand(
        "index", "Assign tool identifiers and dump vocabulary + index");
    add_registry_opt(cmd, &opts->registry);
    add_scheme(cmd, &opts->scheme);
    cmd->add_option("--seed", opts->seed, "Clustering seed")
        ->capture_default_str();
    add_common(cmd, &opts->common);
    cmd->callback([opts] { run_index(*opts); });
  }
  {
    auto opts = std::make_shared<StatsOpts>();
    CLI::App* cmd = app.add_subcommand(
        "stats", "Report identifier length statistics for a registry");
    add_registry_opt(cmd, &opts->registry);
    add_scheme(cmd, &opts->scheme);
    cmd->add_option("--seed", opts->seed, "Clustering seed")
        ->capture_default_str();
    add_common(cmd, &opts->common);
    cmd->callback([opts] { run_stats(*opts); });
  }
  {
    auto opts = std::make_shared<BuildDataOpts>();
    CLI::App* cmd = app.add_subcommand(
        "build-data",
        "Construct memorization/retrieval pairs and convert trajectories");
    add_registry_opt(cmd, &opts->registry);
    add_scheme(cmd, &opts->scheme);
    cmd->add_option("--seed", opts->seed, "Clustering seed")
        ->capture_default_str();
    cmd->add_option("--annotations", opts->annotations,
                    "Query annotations JSONL for retrieval pairs");
    cmd->add_option("--trajectories", opts->trajectories,
                    "Raw trajectories JSONL for agent samples");
    cmd->add_flag("--gt-prefix", opts->gt_prefix,
                  "Prefix converted samples with the used-tool list");
    cmd->add_option("--threads", opts->threads,
                    "Conversion worker count")
        ->capture_default_str();
    add_common(cmd, &opts->common);
    cmd->callback([opts] { run_build_data(*opts); });
  }
  {
    auto opts = std::make_shared<TrainScorerOpts>();
    CLI::App* cmd = app.add_subcommand(
        "train-scorer", "Fit the count model on training pairs");
    add_registry_opt(cmd, &opts->registry);
    add_scheme(cmd, &opts->scheme);
    cmd->add_option("--seed", opts->seed, "Clustering seed")
        ->capture_default_str();
    cmd->add_option("--data", opts->data,
                    "Training pair JSONL files (repeatable)")
        ->required();
    cmd->add_option("--alpha", opts->alpha, "Additive smoothing strength")
        ->capture_default_str();
    add_common(cmd, &opts->common);
    cmd->callback([opts] { run_train_scorer(*opts); });
  }
  {
    auto opts = std::make_shared<RetrieveOpts>();
    CLI::App* cmd =
        app.add_subcommand("retrieve", "Rank tools for ad-hoc queries");
    add_registry_opt(cmd, &opts->registry);
    add_scheme(cmd, &opts->scheme);
    cmd->add_option("--seed", opts->seed, "Clustering seed")
        ->capture_default_str();
    cmd->add_option("--scorer", opts->scorer, "Trained scorer JSON");
    cmd->add_option("--retriever", opts->retriever, "Retrieval backend")
        ->check(CLI::IsMember({"generative", "bm25"}))
        ->capture_default_str();
    cmd->add_option("--query", opts->query, "Query text (repeatable)");
    cmd->add_option("--queries", opts->queries_file,
                    "File with one query per line");
    cmd->add_option("--top-k", opts->top_k, "Results per query")
        ->capture_default_str();
    add_common(cmd, &opts->common);
    cmd->callback([opts] { run_retrieve(*opts); });
  }
  {
    auto opts = std::make_shared<EvalRetrievalOpts>();
    CLI::App* cmd = app.add_subcommand(
        "eval-retrieval", "Score a retriever with NDCG over annotations");
    add_registry_opt(cmd, &opts->registry);
    add_scheme(cmd, &opts->scheme);
    cmd->add_option("--seed", opts->seed, "Clustering seed")
        ->capture_default_str();
    cmd->add_option("--annotations", opts->annotations,
                    "Query annotations JSONL")
        ->required();
    cmd->add_option("--scorer", opts->scorer, "Trained scorer JSON");
    cmd->add_option("--retriever", opts->retriever, "Retrieval backend")
        ->check(CLI::IsMember({"generative", "bm25"}))
        ->capture_default_str();
    cmd->add_option("--setting", opts->setting, "Candidate pool layout")
        ->check(CLI::IsMember({"in-domain", "multi-domain"}))
        ->capture_default_str();
    cmd->add_option("--cutoffs", opts->cutoffs,
                    "NDCG cutoffs (default: 1,3,5)")
        ->delimiter(',');
    cmd->add_option("--threads", opts->threads, "Evaluation worker count")
        ->capture_default_str();
    add_common(cmd, &opts->common);
    cmd->callback([opts] { run_eval_retrieval(*opts); });
  }
  {
    auto opts = std::make_shared<AgentRunOpts>();
    CLI::App* cmd = app.add_subcommand(
        "agent-run", "Run agent sessions over a query list");
    add_registry_opt(cmd, &opts->registry);
    add_scheme(cmd, &opts->scheme);
    cmd->add_option("--seed", opts->seed, "Session seed")
        ->capture_default_str();
    cmd->add_option("--scorer", opts->scorer,
                    "Trained scorer JSON (uniform model when omitted)");
    cmd->add_option("--queries", opts->queries_file,
                    "File with one query per line")
        ->required();
    CLI::Option* fixtures = cmd->add_option(
        "--fixtures", opts->fixtures, "Canned responses JSONL {tool, params, body}");
    cmd->add_option("--default-body", opts->default_body,
                    "Fixture fallback response body");
    cmd->add_option("--endpoints", opts->endpoints,
                    "Live HTTP endpoints JSONL {tool, url, method}")
        ->excludes(fixtures);
    cmd->add_option("--http-timeout", opts->http_timeout,
                    "HTTP timeout in seconds")
        ->capture_default_str();
    cmd->add_option("--http-concurrency", opts->http_concurrency,
                    "Max concurrent outbound calls")
        ->capture_default_str();
    cmd->add_option("--max-turns", opts->max_turns,
                    "Assistant-turn cap, final answer included")
        ->capture_default_str();
    cmd->add_option("--max-rounds", opts->max_rounds,
                    "Thought/action/parameters round cap")
        ->capture_default_str();
    cmd->add_option("--max-retries", opts->max_retries,
                    "Give-up regeneration budget per session")
        ->capture_default_str();
    cmd->add_option("--base-temp", opts->base_temp, "Base temperature")
        ->capture_default_str();
    cmd->add_option("--retry-temp", opts->retry_temp, "Retry temperature")
        ->capture_default_str();
    cmd->add_option("--budget", opts->budget, "Token budget per turn")
        ->capture_default_str();
    cmd->add_flag("--free-actions", opts->free_actions,
                  "Disable trie-constrained action decoding");
    cmd->add_flag("--stamp", opts->stamp,
                  "Wall-clock timestamps in the trajectory log");
    cmd->add_option("--threads", opts->threads, "Concurrent sessions")
        ->capture_default_str();
    add_common(cmd, &opts->common);
    cmd->callback([opts] { run_agent_run(*opts); });
  }
  {
    auto opts = std::make_shared<EvalHallucinationOpts>();
    CLI::App* cmd = app.add_subcommand(
        "eval-hallucination", "Aggregate hallucination metrics from session logs");
    cmd->add_option("--sessions", opts->sessions,
                    "Trajectory JSONL files (repeatable)")
        ->required();
    add_common(cmd, &opts->common);
    cmd->callback([opts] { run_eval_hallucination(*opts); });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Tool-token indexing, constrained decoding, and agent evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Key=value file with options under a [subcommand] section; "
                 "command-line flags win");
  setup(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // 0 is --help; everything else is usage
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
