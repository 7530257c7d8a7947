// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "toolvoc/chat.hpp"
#include "toolvoc/rng.hpp"
#include "toolvoc/scorer.hpp"
#include "toolvoc/trie.hpp"

namespace toolvoc {

struct BeamHypothesis {
  TokenSeq tokens;     // without the terminator
  double score = 0.0;  // cumulative log-probability, terminator step included
};

// Trie-constrained beam search. At every step the scorer's distribution is
// masked to the trie's feasible continuations and renormalized; hypotheses
// accumulate log-probabilities with no length normalization. Ties break by
// token-sequence order (ascending), so results are fully deterministic.
// Returns at most `beam_width` finished hypotheses, best first. Every result
// is a complete trie sequence: constrained decoding cannot hallucinate.
std::vector<BeamHypothesis> constrained_beam_search(
    const Scorer& scorer, const TokenSeq& prompt, const DisjunctiveTrie& trie,
    size_t beam_width);

struct SampleConfig {
  double temperature = 0.0;  // 0 = greedy argmax
  size_t max_new_tokens = 256;
  uint64_t seed = 0;
};

struct SampleResult {
  TokenSeq tokens;        // without eos
  bool truncated = false; // hit max_new_tokens before eos
};

// Unconstrained sampling from the scorer. Greedy at temperature 0 (lowest
// id wins ties); otherwise softmax-with-temperature sampled by inverse CDF
// from a DetRng stream, so a (seed, prompt) pair always replays the same.
SampleResult sample_free(const Scorer& scorer, const TokenSeq& prompt,
                         const SampleConfig& config, TokenId eos);

// Single constrained greedy/sampled walk through the trie (temperature 0 =
// argmax over feasible children). Used by the agent for action emission.
TokenSeq sample_constrained(const Scorer& scorer, const TokenSeq& prompt,
                            const DisjunctiveTrie& trie,
                            const SampleConfig& config);

}  // namespace toolvoc
