#pragma once

/**
 * Token-model contract: anything that can produce next-token logits given a
 * context, a query and a generated prefix, over a fixed vocabulary.
 *
 * Two deterministic backends ship with the library:
 *  - TableModel:  explicit condition -> logits rules with a default row.
 *                 Gives exact, hand-checkable oracles.
 *  - BigramModel: bigram counts from a text corpus with add-one smoothing.
 *                 Context text is folded in as additional observed bigrams,
 *                 so the conditioned and unconditioned passes genuinely
 *                 differ when context is present.
 *
 * ScriptedModel replays fixed token sequences and exists for replay tests
 * and golden-bundle generation. The remote backend lives in remote.hpp.
 *
 * All backends are read-only after construction and safe for concurrent
 * calls.
 */

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scenkit::tok {

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VocabularyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered, duplicate-free set of token strings. Index <-> token is a
/// bijection. Tokens are whitespace-free so that whitespace detokenization
/// is unambiguous.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int index) const;
  std::optional<int> index_of(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct PromptBundle {
  std::string context_text;
  std::vector<std::vector<std::uint8_t>> context_attachments;
  std::string query_text;
  std::vector<int> prefix;

  bool has_context() const {
    return !context_text.empty() || !context_attachments.empty();
  }

  /// Copy with the context channel removed (text and attachments).
  PromptBundle without_context() const {
    PromptBundle b = *this;
    b.context_text.clear();
    b.context_attachments.clear();
    return b;
  }
};

/// Logits over the vocabulary at one decoding step. All entries finite.
struct TokenDistribution {
  std::vector<double> logits;
};

class LogitSource {
 public:
  virtual ~LogitSource() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  /// Context-conditioned pass. Throws BackendError / VocabularyError.
  TokenDistribution logits_with_context(const PromptBundle& bundle) const;

  /// Unconditioned pass: computed with the context channel removed.
  TokenDistribution logits_without_context(const PromptBundle& bundle) const;

  /// Word-token backends join with single spaces; remote backends may
  /// delegate to the server (see remote.hpp).
  virtual std::string detokenize(std::span<const int> tokens) const;

 protected:
  virtual TokenDistribution compute(const PromptBundle& bundle) const = 0;

 private:
  void check_bundle(const PromptBundle& bundle) const;
  TokenDistribution checked_compute(const PromptBundle& bundle) const;
};

// ---------------------------------------------------------------------------
// TableModel
// ---------------------------------------------------------------------------

/// One condition -> logits rule. All present conditions must hold.
/// First matching rule wins; otherwise the default row applies.
struct TableRule {
  enum class Ctx { any, present, absent };

  Ctx ctx = Ctx::any;
  std::optional<std::string> query_contains;
  std::optional<std::vector<int>> prefix_exact;
  std::optional<int> prefix_last;
  std::vector<double> logits;
};

class TableModel : public LogitSource {
 public:
  TableModel(Vocabulary vocab, std::vector<double> default_logits,
             std::vector<TableRule> rules);

  /**
   * Loads the documented line-oriented fixture format:
   *
   *   # comment
   *   vocab <eos> Two Four
   *   default 0 0 0
   *   rule ctx=present -> 1.0 2.0 1.8
   *   rule ctx=absent -> 1.0 1.0 3.0
   *   rule prefix=Two -> 9 0 0
   *   rule query~lane-change suffix=Two -> 0 4 1
   *
   * Conditions: ctx=present|absent, query~SUBSTR (no whitespace),
   * prefix=TOK,TOK,... (bare `prefix=` means empty prefix), suffix=TOK.
   * Logit rows list one value per vocabulary entry.
   */
  static TableModel from_fixture(std::string_view text);
  static TableModel load_fixture_file(const std::string& path);

  const Vocabulary& vocabulary() const override { return vocab_; }

 protected:
  TokenDistribution compute(const PromptBundle& bundle) const override;

 private:
  bool rule_matches(const TableRule& rule, const PromptBundle& bundle) const;

  Vocabulary vocab_;
  std::vector<double> default_logits_;
  std::vector<TableRule> rules_;
};

// ---------------------------------------------------------------------------
// BigramModel
// ---------------------------------------------------------------------------

class BigramModel : public LogitSource {
 public:
  /// Vocabulary = unique corpus words in order of first appearance.
  explicit BigramModel(std::string_view corpus);

  static BigramModel load_corpus_file(const std::string& path);

  const Vocabulary& vocabulary() const override { return vocab_; }

 protected:
  /// Conditioning state is the last prefix token, else the last in-vocab
  /// word of the query. Context text contributes unit-weight extra bigram
  /// counts on top of the corpus counts; add-one smoothing throughout.
  TokenDistribution compute(const PromptBundle& bundle) const override;

 private:
  Vocabulary vocab_;
  std::vector<std::vector<int>> counts_;  // counts_[state][next]
  std::vector<int> row_totals_;
  std::vector<int> unigram_;
  int total_tokens_ = 0;
};

// ---------------------------------------------------------------------------
// ScriptedModel
// ---------------------------------------------------------------------------

/**
 * Replays fixed whitespace-token scripts; each script ends with the stop
 * token. A script set is picked by the first query_selector contained in
 * the query text (empty selector matches everything); within a set, the
 * attempt index is the number of `attempt_marker` occurrences in the query
 * (the refinement loop appends one marker per retry), clamped to the last
 * script. Stateless and referentially transparent.
 */
class ScriptedModel : public LogitSource {
 public:
  static constexpr const char* kStopToken = "<eos>";

  struct ScriptSet {
    std::string query_selector;
    std::vector<std::string> attempts;
  };

  ScriptedModel(std::vector<ScriptSet> sets, std::string attempt_marker);
  /// Single catch-all set.
  ScriptedModel(std::vector<std::string> scripts, std::string attempt_marker);

  const Vocabulary& vocabulary() const override { return vocab_; }
  int stop_token() const { return stop_token_; }

 protected:
  TokenDistribution compute(const PromptBundle& bundle) const override;

 private:
  Vocabulary vocab_;
  struct IndexedSet {
    std::string selector;
    std::vector<std::vector<int>> attempts;  // token index sequences
  };
  std::vector<IndexedSet> sets_;
  std::string attempt_marker_;
  int stop_token_ = 0;
};

}  // namespace scenkit::tok
