#pragma once

/**
 * Embedding store over documentation snippets and scenario examples with
 * cosine nearest-neighbor retrieval.
 *
 * The default embedder is a deterministic hashed character-trigram TF
 * vector (FNV-1a 64 bucketed, L2-normalized, dimension 512), so retrieval
 * runs offline and reproducibly. An external embedder can be plugged in as
 * a callback; remote.hpp provides one over the wire protocol.
 *
 * Store file format (one entry per line, tab-separated):
 *
 *   #scenkit-store v1 dim=512 kind=hash-ngram
 *   id<TAB>tag1,tag2<TAB>base64(float32le embedding)<TAB>escaped text
 *
 * Text fields escape tab/newline/backslash; see util::escape_field.
 */

#include <functional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scenkit::rag {

class RagError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmbedderSpec {
  enum class Kind { hash_ngram, external };
  Kind kind = Kind::hash_ngram;
  std::size_t dimension = 512;
};

struct KnowledgeEntry {
  std::string id;
  std::string text;
  std::vector<float> embedding;
  std::set<std::string> tags;
};

struct ScoredEntry {
  KnowledgeEntry entry;
  double score;
};

/// Hashed character-trigram TF embedding, L2-normalized. Texts shorter than
/// three characters hash as a single gram. Empty text is an error.
std::vector<float> embed(std::string_view text, const EmbedderSpec& spec);

/// Cosine similarity; throws RagError on zero vectors or length mismatch.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

using EmbedFn = std::function<std::vector<float>(std::string_view)>;

class KnowledgeStore {
 public:
  explicit KnowledgeStore(EmbedderSpec spec = {});
  /// External embedders plug in here; dimension comes from spec.
  KnowledgeStore(EmbedderSpec spec, EmbedFn embedder);

  /// Embeds and inserts. Rejects duplicate ids, empty text and zero-vector
  /// embeddings (cosine undefined).
  void insert(std::string id, std::string text, std::set<std::string> tags = {});

  /// Inserts an entry with a precomputed embedding (store loading path).
  void insert_precomputed(KnowledgeEntry entry);

  /**
   * Top-k by descending cosine similarity between the embedded query and
   * every entry; ties break by entry id ascending. Returns min(k, size)
   * entries. Errors: empty store, k < 1.
   */
  std::vector<ScoredEntry> retrieve_top_k(std::string_view query,
                                          std::size_t k) const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<KnowledgeEntry>& entries() const { return entries_; }
  const EmbedderSpec& spec() const { return spec_; }

  std::string serialize() const;
  void save(const std::string& path) const;
  static KnowledgeStore deserialize(std::string_view content);
  static KnowledgeStore load(const std::string& path);

 private:
  EmbedderSpec spec_;
  EmbedFn embedder_;
  std::vector<KnowledgeEntry> entries_;
};

}  // namespace scenkit::rag
