// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "toolvoc/error.hpp"

namespace toolvoc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Log-probabilities of the feasible continuations, renormalized over just
// those tokens. Tokens the scorer assigns zero mass keep score -inf; when
// the whole feasible set has zero mass the distribution degrades to uniform
// (the scorer is giving no signal, not forbidding the step).
std::vector<double> mask_and_renormalize(const std::vector<double>& probs,
                                         const std::vector<TokenId>& feasible) {
  std::vector<double> out(feasible.size(), kNegInf);
  double mass = 0.0;
  for (TokenId t : feasible) mass += t < probs.size() ? probs[t] : 0.0;
  if (mass <= 0.0) {
    double uniform = -std::log(static_cast<double>(feasible.size()));
    std::fill(out.begin(), out.end(), uniform);
    return out;
  }
  const double log_mass = std::log(mass);
  for (size_t i = 0; i < feasible.size(); ++i) {
    double p = feasible[i] < probs.size() ? probs[feasible[i]] : 0.0;
    if (p > 0.0) out[i] = std::log(p) - log_mass;
  }
  return out;
}

struct Live {
  TokenSeq tokens;
  double lp = 0.0;
  DisjunctiveTrie::NodeRef node = DisjunctiveTrie::kRoot;
};

struct Candidate {
  TokenSeq tokens;  // step token included; finished keep it for tie-breaks
  double lp = 0.0;
  DisjunctiveTrie::NodeRef node = 0;
  bool finished = false;
};

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.lp != b.lp) return a.lp > b.lp;  // higher score first
  return a.tokens < b.tokens;            // then lexicographic token order
}

}  // namespace

std::vector<BeamHypothesis> constrained_beam_search(
    const Scorer& scorer, const TokenSeq& prompt, const DisjunctiveTrie& trie,
    size_t beam_width) {
  if (beam_width == 0) throw InvalidArgument("beam_width must be positive");

  std::vector<Live> live{{TokenSeq{}, 0.0, DisjunctiveTrie::kRoot}};
  std::vector<BeamHypothesis> finished;

  while (!live.empty()) {
    std::vector<Candidate> candidates;
    for (const Live& beam : live) {
      const std::vector<TokenId>& feasible = trie.feasible_next(beam.node);
      std::vector<double> probs = scorer.next_distribution(
          std::span(prompt.data(), prompt.size()),
          std::span(beam.tokens.data(), beam.tokens.size()));
      std::vector<double> step = mask_and_renormalize(probs, feasible);
      for (size_t i = 0; i < feasible.size(); ++i) {
        Candidate c;
        c.tokens = beam.tokens;
        c.tokens.push_back(feasible[i]);
        c.lp = beam.lp + step[i];
        if (feasible[i] == trie.terminator()) {
          c.finished = true;
        } else {
          c.node = *trie.step(beam.node, feasible[i]);
        }
        candidates.push_back(std::move(c));
      }
    }
    std::sort(candidates.begin(), candidates.end(), candidate_less);
    if (candidates.size() > beam_width) candidates.resize(beam_width);

    live.clear();
    for (Candidate& c : candidates) {
      if (c.finished) {
        // Strip the terminator for the reported sequence; the step's score
        // stays in.
        c.tokens.pop_back();
        finished.push_back({std::move(c.tokens), c.lp});
      } else {
        live.push_back({std::move(c.tokens), c.lp, c.node});
      }
    }
  }

  std::sort(finished.begin(), finished.end(),
            [](const BeamHypothesis& a, const BeamHypothesis& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.tokens < b.tokens;
            });
  if (finished.size() > beam_width) finished.resize(beam_width);
  return finished;
}

SampleResult sample_free(const Scorer& scorer, const TokenSeq& prompt,
                         const SampleConfig& config, TokenId eos) {
  SampleResult result;
  DetRng rng(config.seed);
  while (result.tokens.size() < config.max_new_tokens) {
    std::vector<double> probs = scorer.next_distribution(
        std::span(prompt.data(), prompt.size()),
        std::span(result.tokens.data(), result.tokens.size()));
    TokenId next = 0;
    if (config.temperature <= 0.0) {
      next = static_cast<TokenId>(
          std::max_element(probs.begin(), probs.end()) - probs.begin());
    } else {
      // Softmax with temperature in probability space: w = p^(1/T).
      std::vector<double> weights(probs.size(), 0.0);
      double z = 0.0;
      for (size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) {
          weights[i] = std::exp(std::log(probs[i]) / config.temperature);
          z += weights[i];
        }
      }
      if (z <= 0.0) {
        next = static_cast<TokenId>(rng.below(probs.size()));
      } else {
        double r = rng.uniform01() * z;
        double cum = 0.0;
        next = static_cast<TokenId>(probs.size() - 1);
        for (size_t i = 0; i < weights.size(); ++i) {
          cum += weights[i];
          if (r < cum) {
            next = static_cast<TokenId>(i);
            break;
          }
        }
      }
    }
    if (next == eos) return result;
    result.tokens.push_back(next);
  }
  result.truncated = true;
  return result;
}

TokenSeq sample_constrained(const Scorer& scorer, const TokenSeq& prompt,
                            const DisjunctiveTrie& trie,
                            const SampleConfig& config) {
  DetRng rng(config.seed);
  TokenSeq tokens;
  DisjunctiveTrie::NodeRef node = DisjunctiveTrie::kRoot;
  while (true) {
    const std::vector<TokenId>& feasible = trie.feasible_next(node);
    std::vector<double> probs = scorer.next_distribution(
        std::span(prompt.data(), prompt.size()),
        std::span(tokens.data(), tokens.size()));
    std::vector<double> weights(feasible.size(), 0.0);
    double z = 0.0;
    for (size_t i = 0; i < feasible.size(); ++i) {
      double p = feasible[i] < probs.size() ? probs[feasible[i]] : 0.0;
      if (p <= 0.0) continue;
      weights[i] =
          config.temperature <= 0.0 ? p : std::exp(std::log(p) / config.temperature);
      z += weights[i];
    }
    size_t pick = 0;
    if (z <= 0.0) {
      // No signal from the scorer: uniform over the legal moves.
      pick = config.temperature <= 0.0
                 ? 0
                 : static_cast<size_t>(rng.below(feasible.size()));
    } else if (config.temperature <= 0.0) {
      // Argmax; feasible is ascending so the first maximum is the lowest id.
      pick = static_cast<size_t>(
          std::max_element(weights.begin(), weights.end()) - weights.begin());
    } else {
      double r = rng.uniform01() * z;
      double cum = 0.0;
      pick = feasible.size() - 1;
      for (size_t i = 0; i < weights.size(); ++i) {
        cum += weights[i];
        if (r < cum) {
          pick = i;
          break;
        }
      }
    }
    TokenId token = feasible[pick];
    if (token == trie.terminator()) return tokens;
    tokens.push_back(token);
    node = *trie.step(node, token);
  }
}

}  // namespace toolvoc
