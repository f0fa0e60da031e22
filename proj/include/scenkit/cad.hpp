#pragma once

/**
 * Context-aware decoding: contrastive combination of a context-conditioned
 * and an unconditioned logit pass,
 *
 *     combined = (1 + alpha) * conditioned - alpha * unconditioned
 *
 * followed by greedy or temperature sampling, driving autoregressive
 * generation to a stop token or a token cap. softmax(combined) equals the
 * normalized product form p_cond * (p_cond / p_uncond)^alpha; the property
 * tests pin that equivalence.
 *
 * alpha = 0 recovers plain conditioned decoding. The default alpha is 0.7.
 */

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scenkit/token_model.hpp"

namespace scenkit::cad {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SelectionPolicy {
  enum class Kind { greedy, sample };

  Kind kind = Kind::greedy;
  double temperature = 1.0;   // sampling only; must be > 0
  std::uint64_t seed = 0;     // sampling only

  static SelectionPolicy greedy() { return {}; }
  static SelectionPolicy sample(double temperature, std::uint64_t seed) {
    return {Kind::sample, temperature, seed};
  }
};

struct CadConfig {
  double alpha = 0.7;
  int max_tokens = 1024;
  std::set<int> stop_tokens;
  SelectionPolicy selection;

  void validate() const;
};

/// One decoding step. `combined` satisfies the contrastive identity against
/// `conditioned`/`unconditioned` within 1e-9 (checked by trace_holds).
struct StepRecord {
  std::vector<double> conditioned;
  std::vector<double> unconditioned;
  std::vector<double> combined;
  int chosen = -1;
};

struct DecodeTrace {
  std::vector<StepRecord> steps;
};

struct DecodeResult {
  std::vector<int> tokens;  // emitted tokens; the stop token is not included
  DecodeTrace trace;        // every step, including the stopping one
  bool hit_stop_token = false;
  std::optional<std::string> error;  // backend failure; trace is partial
};

/// Max-subtraction softmax. Empty input -> empty output.
std::vector<double> softmax(const std::vector<double>& logits);

/// (1 + alpha) * conditioned - alpha * unconditioned, elementwise in double.
tok::TokenDistribution combine_logits(const tok::TokenDistribution& conditioned,
                                      const tok::TokenDistribution& unconditioned,
                                      double alpha);

/// softmax of the combined logits; sums to 1 within 1e-9.
std::vector<double> cad_distribution(const tok::TokenDistribution& conditioned,
                                     const tok::TokenDistribution& unconditioned,
                                     double alpha);

/// Greedy argmax; ties break toward the lowest token index.
int argmax(const std::vector<double>& values);

/**
 * Autoregressive CAD loop. Two backend calls per step (conditioned and
 * unconditioned); the chosen token is appended to the bundle prefix for the
 * next step. A backend failure mid-decode returns the trace up to the
 * failure point with `error` set instead of throwing.
 */
DecodeResult decode(const tok::LogitSource& source, const tok::PromptBundle& bundle,
                    const CadConfig& config);

/// True when every step satisfies the contrastive identity within tol.
bool trace_holds(const DecodeTrace& trace, double alpha, double tol = 1e-9);

/**
 * JSON lines export, one step per line:
 *   {"step":0,"conditioned":[...],"unconditioned":[...],"combined":[...],
 *    "chosen":3,"token":"Two"}
 * The "token" field is present when a vocabulary is given.
 */
std::string trace_to_jsonl(const DecodeTrace& trace,
                           const tok::Vocabulary* vocab = nullptr);

}  // namespace scenkit::cad
