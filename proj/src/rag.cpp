#include "scenkit/rag.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "scenkit/util.hpp"

namespace scenkit::rag {

std::vector<float> embed(std::string_view text, const EmbedderSpec& spec) {
  if (text.empty()) throw RagError("embed: text is empty");
  if (spec.kind != EmbedderSpec::Kind::hash_ngram) {
    throw RagError("embed: external embedder must be supplied as a callback");
  }
  if (spec.dimension == 0) throw RagError("embed: dimension must be positive");

  std::vector<float> vec(spec.dimension, 0.0f);
  auto bump = [&](std::string_view gram) {
    vec[util::fnv1a64(gram) % spec.dimension] += 1.0f;
  };
  if (text.size() < 3) {
    bump(text);
  } else {
    for (std::size_t i = 0; i + 3 <= text.size(); ++i) bump(text.substr(i, 3));
  }

  double norm = 0.0;
  for (float v : vec) norm += static_cast<double>(v) * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw RagError("embed: produced a zero vector");
  for (float& v : vec) v = static_cast<float>(v / norm);
  return vec;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw RagError("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw RagError("cosine_similarity: zero vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

KnowledgeStore::KnowledgeStore(EmbedderSpec spec) : spec_(spec) {
  EmbedderSpec captured = spec_;
  embedder_ = [captured](std::string_view text) { return embed(text, captured); };
}

KnowledgeStore::KnowledgeStore(EmbedderSpec spec, EmbedFn embedder)
    : spec_(spec), embedder_(std::move(embedder)) {
  if (!embedder_) throw RagError("KnowledgeStore: null embedder");
}

void KnowledgeStore::insert(std::string id, std::string text,
                            std::set<std::string> tags) {
  if (text.empty()) throw RagError("insert: text is empty");
  KnowledgeEntry entry;
  entry.id = std::move(id);
  entry.text = std::move(text);
  entry.tags = std::move(tags);
  entry.embedding = embedder_(entry.text);
  insert_precomputed(std::move(entry));
}

void KnowledgeStore::insert_precomputed(KnowledgeEntry entry) {
  if (entry.text.empty()) throw RagError("insert: text is empty");
  if (entry.embedding.size() != spec_.dimension) {
    throw RagError("insert: embedding dimension " +
                   std::to_string(entry.embedding.size()) +
                   " != store dimension " + std::to_string(spec_.dimension));
  }
  double norm = 0.0;
  for (float v : entry.embedding) norm += static_cast<double>(v) * v;
  if (norm == 0.0) throw RagError("insert: zero-vector embedding for '" + entry.id + "'");
  for (const KnowledgeEntry& e : entries_) {
    if (e.id == entry.id) throw RagError("insert: duplicate id '" + entry.id + "'");
  }
  entries_.push_back(std::move(entry));
}

std::vector<ScoredEntry> KnowledgeStore::retrieve_top_k(std::string_view query,
                                                        std::size_t k) const {
  if (entries_.empty()) throw RagError("retrieve_top_k: store is empty");
  if (k < 1) throw RagError("retrieve_top_k: k must be >= 1");

  std::vector<float> q = embedder_(query);
  std::vector<ScoredEntry> scored;
  scored.reserve(entries_.size());
  for (const KnowledgeEntry& e : entries_) {
    scored.push_back({e, cosine_similarity(q, e.embedding)});
  }
  std::sort(scored.begin(), scored.end(),
            [](const ScoredEntry& a, const ScoredEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.entry.id < b.entry.id;
            });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

std::string KnowledgeStore::serialize() const {
  std::string kind = spec_.kind == EmbedderSpec::Kind::hash_ngram ? "hash-ngram"
                                                                  : "external";
  std::string out = "#scenkit-store v1 dim=" + std::to_string(spec_.dimension) +
                    " kind=" + kind + "\n";
  for (const KnowledgeEntry& e : entries_) {
    std::string tags;
    for (const std::string& t : e.tags) {
      if (!tags.empty()) tags += ',';
      tags += t;
    }
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(e.embedding.data());
    out += util::escape_field(e.id);
    out += '\t';
    out += tags;
    out += '\t';
    out += util::base64_encode(bytes, e.embedding.size() * sizeof(float));
    out += '\t';
    out += util::escape_field(e.text);
    out += '\n';
  }
  return out;
}

void KnowledgeStore::save(const std::string& path) const {
  util::write_file(path, serialize());
}

KnowledgeStore KnowledgeStore::deserialize(std::string_view content) {
  std::vector<std::string> lines = util::split(content, '\n');
  if (lines.empty() || !util::starts_with(lines[0], "#scenkit-store v1")) {
    throw RagError("store file: missing '#scenkit-store v1' header");
  }

  EmbedderSpec spec;
  for (const std::string& field : util::split_ws(lines[0])) {
    if (util::starts_with(field, "dim=")) {
      spec.dimension = static_cast<std::size_t>(std::stoul(field.substr(4)));
    } else if (field == "kind=external") {
      spec.kind = EmbedderSpec::Kind::external;
    }
  }
  if (spec.kind == EmbedderSpec::Kind::external) {
    throw RagError("store file: external-embedder stores need a callback; "
                   "load with KnowledgeStore(spec, embedder) and insert_precomputed");
  }

  KnowledgeStore store(spec);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    std::vector<std::string> cols = util::split(lines[i], '\t');
    if (cols.size() != 4) {
      throw RagError("store file line " + std::to_string(i + 1) +
                     ": expected 4 tab-separated fields, got " +
                     std::to_string(cols.size()));
    }
    KnowledgeEntry e;
    e.id = util::unescape_field(cols[0]);
    for (const std::string& t : util::split(cols[1], ',')) {
      if (!t.empty()) e.tags.insert(t);
    }
    std::vector<std::uint8_t> raw = util::base64_decode(cols[2]);
    if (raw.size() % sizeof(float) != 0) {
      throw RagError("store file line " + std::to_string(i + 1) +
                     ": embedding byte count not a multiple of 4");
    }
    e.embedding.resize(raw.size() / sizeof(float));
    std::memcpy(e.embedding.data(), raw.data(), raw.size());
    e.text = util::unescape_field(cols[3]);
    store.insert_precomputed(std::move(e));
  }
  return store;
}

KnowledgeStore KnowledgeStore::load(const std::string& path) {
  return deserialize(util::read_file(path));
}

}  // namespace scenkit::rag
