#include "scenkit/token_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "scenkit/util.hpp"

namespace scenkit::tok {

namespace {
bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}
}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& t = tokens_[i];
    if (t.empty()) throw VocabularyError("vocabulary token is empty");
    if (has_whitespace(t)) {
      throw VocabularyError("vocabulary token contains whitespace: '" + t + "'");
    }
    auto [it, inserted] = index_.emplace(t, static_cast<int>(i));
    if (!inserted) throw VocabularyError("duplicate vocabulary token: '" + t + "'");
  }
}

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw VocabularyError("token index out of range: " + std::to_string(index));
  }
  return tokens_[static_cast<std::size_t>(index)];
}

std::optional<int> Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// LogitSource
// ---------------------------------------------------------------------------

void LogitSource::check_bundle(const PromptBundle& bundle) const {
  const std::size_t n = vocabulary().size();
  for (int t : bundle.prefix) {
    if (t < 0 || static_cast<std::size_t>(t) >= n) {
      throw VocabularyError("prefix token index " + std::to_string(t) +
                            " outside vocabulary of size " + std::to_string(n));
    }
  }
}

TokenDistribution LogitSource::checked_compute(const PromptBundle& bundle) const {
  TokenDistribution dist = compute(bundle);
  if (dist.logits.size() != vocabulary().size()) {
    throw BackendError("backend returned " + std::to_string(dist.logits.size()) +
                       " logits for vocabulary of size " +
                       std::to_string(vocabulary().size()));
  }
  for (double v : dist.logits) {
    if (!std::isfinite(v)) throw BackendError("backend returned non-finite logit");
  }
  return dist;
}

TokenDistribution LogitSource::logits_with_context(const PromptBundle& bundle) const {
  check_bundle(bundle);
  return checked_compute(bundle);
}

TokenDistribution LogitSource::logits_without_context(const PromptBundle& bundle) const {
  check_bundle(bundle);
  return checked_compute(bundle.without_context());
}

std::string LogitSource::detokenize(std::span<const int> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += vocabulary().token(tokens[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// TableModel
// ---------------------------------------------------------------------------

TableModel::TableModel(Vocabulary vocab, std::vector<double> default_logits,
                       std::vector<TableRule> rules)
    : vocab_(std::move(vocab)),
      default_logits_(std::move(default_logits)),
      rules_(std::move(rules)) {
  if (default_logits_.size() != vocab_.size()) {
    throw BackendError("table model default row length != vocabulary size");
  }
  for (const TableRule& r : rules_) {
    if (r.logits.size() != vocab_.size()) {
      throw BackendError("table model rule row length != vocabulary size");
    }
    if (r.prefix_last && (*r.prefix_last < 0 ||
                          static_cast<std::size_t>(*r.prefix_last) >= vocab_.size())) {
      throw BackendError("table model rule suffix token out of range");
    }
  }
}

bool TableModel::rule_matches(const TableRule& rule, const PromptBundle& bundle) const {
  switch (rule.ctx) {
    case TableRule::Ctx::present:
      if (!bundle.has_context()) return false;
      break;
    case TableRule::Ctx::absent:
      if (bundle.has_context()) return false;
      break;
    case TableRule::Ctx::any:
      break;
  }
  if (rule.query_contains &&
      !util::contains(bundle.query_text, *rule.query_contains)) {
    return false;
  }
  if (rule.prefix_exact && bundle.prefix != *rule.prefix_exact) return false;
  if (rule.prefix_last &&
      (bundle.prefix.empty() || bundle.prefix.back() != *rule.prefix_last)) {
    return false;
  }
  return true;
}

TokenDistribution TableModel::compute(const PromptBundle& bundle) const {
  for (const TableRule& rule : rules_) {
    if (rule_matches(rule, bundle)) return TokenDistribution{rule.logits};
  }
  return TokenDistribution{default_logits_};
}

TableModel TableModel::from_fixture(std::string_view text) {
  std::optional<Vocabulary> vocab;
  std::optional<std::vector<double>> default_row;
  std::vector<TableRule> rules;

  auto parse_row = [&](const std::vector<std::string>& fields, std::size_t from,
                       int line_no) {
    std::vector<double> row;
    for (std::size_t i = from; i < fields.size(); ++i) {
      try {
        row.push_back(std::stod(fields[i]));
      } catch (const std::exception&) {
        throw BackendError("table fixture line " + std::to_string(line_no) +
                           ": bad logit value '" + fields[i] + "'");
      }
    }
    return row;
  };

  int line_no = 0;
  for (const std::string& raw : util::split(text, '\n')) {
    ++line_no;
    std::string line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = util::split_ws(line);

    if (fields[0] == "vocab") {
      vocab = Vocabulary(
          std::vector<std::string>(fields.begin() + 1, fields.end()));
    } else if (fields[0] == "default") {
      default_row = parse_row(fields, 1, line_no);
    } else if (fields[0] == "rule") {
      if (!vocab) {
        throw BackendError("table fixture: 'rule' before 'vocab'");
      }
      TableRule rule;
      std::size_t i = 1;
      for (; i < fields.size() && fields[i] != "->"; ++i) {
        const std::string& f = fields[i];
        if (f == "ctx=present") {
          rule.ctx = TableRule::Ctx::present;
        } else if (f == "ctx=absent") {
          rule.ctx = TableRule::Ctx::absent;
        } else if (util::starts_with(f, "query~")) {
          rule.query_contains = f.substr(6);
        } else if (util::starts_with(f, "prefix=")) {
          std::vector<int> prefix;
          for (const std::string& t : util::split(f.substr(7), ',')) {
            if (t.empty()) continue;
            auto idx = vocab->index_of(t);
            if (!idx) {
              throw BackendError("table fixture line " + std::to_string(line_no) +
                                 ": prefix token '" + t + "' not in vocab");
            }
            prefix.push_back(*idx);
          }
          rule.prefix_exact = std::move(prefix);
        } else if (util::starts_with(f, "suffix=")) {
          auto idx = vocab->index_of(f.substr(7));
          if (!idx) {
            throw BackendError("table fixture line " + std::to_string(line_no) +
                               ": suffix token not in vocab");
          }
          rule.prefix_last = *idx;
        } else {
          throw BackendError("table fixture line " + std::to_string(line_no) +
                             ": unknown condition '" + f + "'");
        }
      }
      if (i == fields.size()) {
        throw BackendError("table fixture line " + std::to_string(line_no) +
                           ": rule missing '->'");
      }
      rule.logits = parse_row(fields, i + 1, line_no);
      rules.push_back(std::move(rule));
    } else {
      throw BackendError("table fixture line " + std::to_string(line_no) +
                         ": unknown directive '" + fields[0] + "'");
    }
  }

  if (!vocab) throw BackendError("table fixture: missing 'vocab' line");
  if (!default_row) throw BackendError("table fixture: missing 'default' line");
  return TableModel(std::move(*vocab), std::move(*default_row), std::move(rules));
}

TableModel TableModel::load_fixture_file(const std::string& path) {
  return from_fixture(util::read_file(path));
}

// ---------------------------------------------------------------------------
// BigramModel
// ---------------------------------------------------------------------------

BigramModel::BigramModel(std::string_view corpus) {
  std::vector<std::string> words = util::split_ws(corpus);
  if (words.empty()) throw BackendError("bigram corpus is empty");

  std::vector<std::string> uniq;
  std::unordered_map<std::string, int> seen;
  for (const std::string& w : words) {
    if (seen.emplace(w, static_cast<int>(uniq.size())).second) uniq.push_back(w);
  }
  vocab_ = Vocabulary(std::move(uniq));

  const std::size_t n = vocab_.size();
  counts_.assign(n, std::vector<int>(n, 0));
  row_totals_.assign(n, 0);
  unigram_.assign(n, 0);

  int prev = -1;
  for (const std::string& w : words) {
    int cur = *vocab_.index_of(w);
    unigram_[static_cast<std::size_t>(cur)] += 1;
    ++total_tokens_;
    if (prev >= 0) {
      counts_[static_cast<std::size_t>(prev)][static_cast<std::size_t>(cur)] += 1;
      row_totals_[static_cast<std::size_t>(prev)] += 1;
    }
    prev = cur;
  }
}

TokenDistribution BigramModel::compute(const PromptBundle& bundle) const {
  const std::size_t n = vocab_.size();

  // Context contributes unit-weight extra bigram observations.
  std::vector<std::vector<int>> extra;
  std::vector<int> extra_rows;
  if (!bundle.context_text.empty()) {
    extra.assign(n, std::vector<int>(n, 0));
    extra_rows.assign(n, 0);
    int prev = -1;
    for (const std::string& w : util::split_ws(bundle.context_text)) {
      auto idx = vocab_.index_of(w);
      if (!idx) {
        prev = -1;
        continue;
      }
      if (prev >= 0) {
        extra[static_cast<std::size_t>(prev)][static_cast<std::size_t>(*idx)] += 1;
        extra_rows[static_cast<std::size_t>(prev)] += 1;
      }
      prev = *idx;
    }
  }

  int state = -1;
  if (!bundle.prefix.empty()) {
    state = bundle.prefix.back();
  } else {
    std::vector<std::string> qwords = util::split_ws(bundle.query_text);
    for (auto it = qwords.rbegin(); it != qwords.rend(); ++it) {
      if (auto idx = vocab_.index_of(*it)) {
        state = *idx;
        break;
      }
    }
  }

  TokenDistribution dist;
  dist.logits.resize(n);
  if (state < 0) {
    // Unigram fallback with add-one smoothing.
    double denom = static_cast<double>(total_tokens_) + static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      dist.logits[j] = std::log((unigram_[j] + 1.0) / denom);
    }
    return dist;
  }

  const std::size_t s = static_cast<std::size_t>(state);
  double row_total = row_totals_[s];
  if (!extra.empty()) row_total += extra_rows[s];
  double denom = row_total + static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    double c = counts_[s][j];
    if (!extra.empty()) c += extra[s][j];
    dist.logits[j] = std::log((c + 1.0) / denom);
  }
  return dist;
}

BigramModel BigramModel::load_corpus_file(const std::string& path) {
  return BigramModel(util::read_file(path));
}

// ---------------------------------------------------------------------------
// ScriptedModel
// ---------------------------------------------------------------------------

ScriptedModel::ScriptedModel(std::vector<ScriptSet> sets, std::string attempt_marker)
    : attempt_marker_(std::move(attempt_marker)) {
  if (sets.empty()) throw BackendError("scripted model needs >= 1 script set");
  if (attempt_marker_.empty()) {
    throw BackendError("scripted model attempt marker is empty");
  }

  std::vector<std::string> uniq{kStopToken};
  std::unordered_map<std::string, int> seen{{kStopToken, 0}};
  std::vector<std::vector<std::vector<std::string>>> words_per_set;
  for (const ScriptSet& set : sets) {
    if (set.attempts.empty()) {
      throw BackendError("scripted model set needs >= 1 script");
    }
    words_per_set.emplace_back();
    for (const std::string& script : set.attempts) {
      words_per_set.back().push_back(util::split_ws(script));
      for (const std::string& w : words_per_set.back().back()) {
        if (seen.emplace(w, static_cast<int>(uniq.size())).second) {
          uniq.push_back(w);
        }
      }
    }
  }
  vocab_ = Vocabulary(std::move(uniq));
  stop_token_ = 0;

  for (std::size_t i = 0; i < sets.size(); ++i) {
    IndexedSet indexed;
    indexed.selector = sets[i].query_selector;
    for (const auto& words : words_per_set[i]) {
      std::vector<int> seq;
      seq.reserve(words.size() + 1);
      for (const std::string& w : words) seq.push_back(*vocab_.index_of(w));
      seq.push_back(stop_token_);
      indexed.attempts.push_back(std::move(seq));
    }
    sets_.push_back(std::move(indexed));
  }
}

ScriptedModel::ScriptedModel(std::vector<std::string> scripts,
                             std::string attempt_marker)
    : ScriptedModel(std::vector<ScriptSet>{{std::string(), std::move(scripts)}},
                    std::move(attempt_marker)) {}

TokenDistribution ScriptedModel::compute(const PromptBundle& bundle) const {
  const IndexedSet* chosen = &sets_.back();
  for (const IndexedSet& set : sets_) {
    if (set.selector.empty() || util::contains(bundle.query_text, set.selector)) {
      chosen = &set;
      break;
    }
  }

  std::size_t attempt = 0;
  std::size_t pos = 0;
  while ((pos = bundle.query_text.find(attempt_marker_, pos)) != std::string::npos) {
    ++attempt;
    pos += attempt_marker_.size();
  }
  const std::vector<int>& script =
      chosen->attempts[std::min(attempt, chosen->attempts.size() - 1)];

  int next = stop_token_;
  if (bundle.prefix.size() < script.size()) {
    next = script[bundle.prefix.size()];
  }
  TokenDistribution dist;
  dist.logits.assign(vocab_.size(), 0.0);
  dist.logits[static_cast<std::size_t>(next)] = 10.0;
  return dist;
}

}  // namespace scenkit::tok
