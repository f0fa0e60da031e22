#include "scenkit/cad.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace scenkit::cad {

void CadConfig::validate() const {
  if (alpha < 0.0 || !std::isfinite(alpha)) {
    throw DecodeError("alpha must be a finite nonnegative value");
  }
  if (max_tokens < 1) throw DecodeError("max_tokens must be >= 1");
  if (selection.kind == SelectionPolicy::Kind::sample &&
      !(selection.temperature > 0.0)) {
    throw DecodeError("sampling temperature must be > 0");
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

tok::TokenDistribution combine_logits(const tok::TokenDistribution& conditioned,
                                      const tok::TokenDistribution& unconditioned,
                                      double alpha) {
  if (conditioned.logits.size() != unconditioned.logits.size()) {
    throw DecodeError("combine_logits: length mismatch (" +
                      std::to_string(conditioned.logits.size()) + " vs " +
                      std::to_string(unconditioned.logits.size()) + ")");
  }
  if (alpha < 0.0 || !std::isfinite(alpha)) {
    throw DecodeError("combine_logits: alpha must be finite and >= 0");
  }
  tok::TokenDistribution out;
  out.logits.resize(conditioned.logits.size());
  for (std::size_t i = 0; i < out.logits.size(); ++i) {
    double a = conditioned.logits[i];
    double b = unconditioned.logits[i];
    if (!std::isfinite(a) || !std::isfinite(b)) {
      throw DecodeError("combine_logits: non-finite input logit");
    }
    out.logits[i] = (1.0 + alpha) * a - alpha * b;
  }
  return out;
}

std::vector<double> cad_distribution(const tok::TokenDistribution& conditioned,
                                     const tok::TokenDistribution& unconditioned,
                                     double alpha) {
  return softmax(combine_logits(conditioned, unconditioned, alpha).logits);
}

int argmax(const std::vector<double>& values) {
  if (values.empty()) throw DecodeError("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

namespace {

// splitmix64-scrambled xorshift; fully specified so sampled sequences do not
// depend on the standard library implementation.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : state_(seed + 0x9E3779B97F4A7C15ULL) {}

  /// Uniform in [0, 1).
  double next_unit() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

int sample_index(const std::vector<double>& probs, SampleRng& rng) {
  double u = rng.next_unit();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;  // rounding residue
}

}  // namespace

DecodeResult decode(const tok::LogitSource& source, const tok::PromptBundle& bundle,
                    const CadConfig& config) {
  config.validate();

  DecodeResult result;
  tok::PromptBundle work = bundle;
  SampleRng rng(config.selection.seed);

  for (int step = 0; step < config.max_tokens; ++step) {
    tok::TokenDistribution conditioned;
    tok::TokenDistribution unconditioned;
    try {
      conditioned = source.logits_with_context(work);
      unconditioned = source.logits_without_context(work);
    } catch (const std::exception& e) {
      result.error = e.what();
      return result;
    }

    tok::TokenDistribution combined =
        combine_logits(conditioned, unconditioned, config.alpha);

    int chosen;
    if (config.selection.kind == SelectionPolicy::Kind::greedy) {
      chosen = argmax(combined.logits);
    } else {
      std::vector<double> scaled = combined.logits;
      for (double& v : scaled) v /= config.selection.temperature;
      chosen = sample_index(softmax(scaled), rng);
    }

    result.trace.steps.push_back(StepRecord{conditioned.logits,
                                            unconditioned.logits,
                                            std::move(combined.logits), chosen});

    if (config.stop_tokens.count(chosen) > 0) {
      result.hit_stop_token = true;
      return result;
    }
    result.tokens.push_back(chosen);
    work.prefix.push_back(chosen);
  }
  return result;
}

bool trace_holds(const DecodeTrace& trace, double alpha, double tol) {
  for (const StepRecord& step : trace.steps) {
    if (step.conditioned.size() != step.combined.size() ||
        step.unconditioned.size() != step.combined.size()) {
      return false;
    }
    for (std::size_t i = 0; i < step.combined.size(); ++i) {
      double expect = (1.0 + alpha) * step.conditioned[i] - alpha * step.unconditioned[i];
      if (std::fabs(expect - step.combined[i]) > tol) return false;
    }
  }
  return true;
}

std::string trace_to_jsonl(const DecodeTrace& trace, const tok::Vocabulary* vocab) {
  std::string out;
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const StepRecord& step = trace.steps[i];
    nlohmann::json j{{"step", i},
                     {"conditioned", step.conditioned},
                     {"unconditioned", step.unconditioned},
                     {"combined", step.combined},
                     {"chosen", step.chosen}};
    if (vocab) j["token"] = vocab->token(step.chosen);
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace scenkit::cad
