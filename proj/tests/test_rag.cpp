#include <algorithm>
#include <map>
#include <random>

#include <doctest.h>

#include "scenkit/rag.hpp"
#include "scenkit/util.hpp"

using namespace scenkit;

namespace {

// Independent oracle: exact character-trigram TF cosine via a map, no
// hashing. Valid for comparison whenever the hashed buckets are
// collision-free over the involved grams (asserted where used).
std::map<std::string, int> trigram_counts(std::string_view text) {
  std::map<std::string, int> counts;
  if (text.size() < 3) {
    counts[std::string(text)] = 1;
    return counts;
  }
  for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
    counts[std::string(text.substr(i, 3))] += 1;
  }
  return counts;
}

double oracle_cosine(std::string_view a, std::string_view b) {
  auto ca = trigram_counts(a);
  auto cb = trigram_counts(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [gram, count] : ca) {
    na += static_cast<double>(count) * count;
    auto it = cb.find(gram);
    if (it != cb.end()) dot += static_cast<double>(count) * it->second;
  }
  for (const auto& [gram, count] : cb) nb += static_cast<double>(count) * count;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

bool buckets_collision_free(std::initializer_list<std::string_view> texts,
                            std::size_t dimension) {
  std::map<std::uint64_t, std::string> bucket_to_gram;
  for (std::string_view text : texts) {
    for (const auto& [gram, count] : trigram_counts(text)) {
      std::uint64_t bucket = util::fnv1a64(gram) % dimension;
      auto it = bucket_to_gram.find(bucket);
      if (it != bucket_to_gram.end() && it->second != gram) return false;
      bucket_to_gram.emplace(bucket, gram);
    }
  }
  return true;
}

}  // namespace

TEST_CASE("embedding is deterministic, unit-norm, and rejects empty text") {
  rag::EmbedderSpec spec;
  auto a = rag::embed("lane merge onto highway", spec);
  auto b = rag::embed("lane merge onto highway", spec);
  CHECK(a == b);
  CHECK(a.size() == 512);

  double norm = 0.0;
  for (float v : a) norm += static_cast<double>(v) * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(rag::embed("", spec), rag::RagError);
  auto tiny = rag::embed("ab", spec);  // shorter than a trigram still embeds
  CHECK(std::count_if(tiny.begin(), tiny.end(), [](float v) { return v != 0.0f; }) == 1);
}

TEST_CASE("similar texts score above unrelated ones, matching the oracle") {
  const std::string q = "lane merge";
  const std::string close = "lane merge onto highway";
  const std::string far = "traffic light";
  rag::EmbedderSpec spec;

  double sim_close = rag::cosine_similarity(rag::embed(q, spec), rag::embed(close, spec));
  double sim_far = rag::cosine_similarity(rag::embed(q, spec), rag::embed(far, spec));
  CHECK(sim_close > sim_far);

  // At a dimension where these grams land in distinct buckets, the hashed
  // cosine equals the exact trigram cosine.
  rag::EmbedderSpec wide;
  wide.dimension = 2048;
  REQUIRE(buckets_collision_free({q, close, far}, wide.dimension));
  double wide_close =
      rag::cosine_similarity(rag::embed(q, wide), rag::embed(close, wide));
  double wide_far = rag::cosine_similarity(rag::embed(q, wide), rag::embed(far, wide));
  CHECK(wide_close == doctest::Approx(oracle_cosine(q, close)).epsilon(1e-6));
  CHECK(wide_far == doctest::Approx(oracle_cosine(q, far)).epsilon(1e-6));
  CHECK(wide_close > wide_far);
}

TEST_CASE("cosine similarity basics") {
  std::vector<float> x{1.0f, 0.0f};
  std::vector<float> y{0.0f, 2.0f};
  CHECK(rag::cosine_similarity(x, x) == doctest::Approx(1.0));
  CHECK(rag::cosine_similarity(x, y) == doctest::Approx(0.0));
  CHECK(rag::cosine_similarity(x, y) == rag::cosine_similarity(y, x));
  CHECK_THROWS_AS(rag::cosine_similarity(x, std::vector<float>{1.0f}), rag::RagError);
  CHECK_THROWS_AS(rag::cosine_similarity(x, std::vector<float>{0.0f, 0.0f}),
                  rag::RagError);
}

TEST_CASE("retrieval: identity, degenerate k, and hand-built order") {
  rag::KnowledgeStore store;
  store.insert("a", "four way intersection with traffic lights", {"net"});
  store.insert("b", "two lane highway merge ramp", {"xodr"});
  store.insert("c", "pedestrian crossing near school zone", {"xosc"});

  SUBCASE("the query text itself ranks first with similarity 1") {
    auto hits = store.retrieve_top_k("two lane highway merge ramp", 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].entry.id == "b");
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("k larger than the store returns everything sorted") {
    auto hits = store.retrieve_top_k("anything at all", 99);
    CHECK(hits.size() == 3);
    CHECK(hits[0].score >= hits[1].score);
    CHECK(hits[1].score >= hits[2].score);
  }

  SUBCASE("order equals the brute-force oracle") {
    std::string query = "highway lane merge";
    auto hits = store.retrieve_top_k(query, 3);

    rag::EmbedderSpec spec = store.spec();
    auto qv = rag::embed(query, spec);
    std::vector<std::pair<double, std::string>> oracle;
    for (const rag::KnowledgeEntry& e : store.entries()) {
      oracle.push_back({rag::cosine_similarity(qv, e.embedding), e.id});
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].entry.id == oracle[i].second);
      CHECK(hits[i].score == doctest::Approx(oracle[i].first).epsilon(1e-12));
    }
  }
}

TEST_CASE("ties break by id ascending") {
  rag::KnowledgeStore store;
  store.insert("zz", "identical snippet text");
  store.insert("aa", "identical snippet text");
  auto hits = store.retrieve_top_k("identical snippet text", 2);
  CHECK(hits[0].entry.id == "aa");
  CHECK(hits[1].entry.id == "zz");
  CHECK(hits[0].score == hits[1].score);
}

TEST_CASE("retrieval equals brute force on randomized stores") {
  std::mt19937_64 rng(31);
  const char* words[] = {"lane",  "merge", "cross", "signal", "ramp",
                         "yield", "stop",  "turn",  "speed",  "zone"};
  for (int trial = 0; trial < 10; ++trial) {
    rag::KnowledgeStore store;
    int n = 3 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      std::string text;
      int len = 2 + static_cast<int>(rng() % 6);
      for (int w = 0; w < len; ++w) {
        if (w) text += ' ';
        text += words[rng() % 10];
      }
      store.insert("e" + std::to_string(i), text);
    }
    std::string query = std::string(words[rng() % 10]) + " " + words[rng() % 10];
    auto hits = store.retrieve_top_k(query, 5);

    auto qv = rag::embed(query, store.spec());
    std::vector<std::pair<double, std::string>> oracle;
    for (const rag::KnowledgeEntry& e : store.entries()) {
      oracle.push_back({rag::cosine_similarity(qv, e.embedding), e.id});
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    REQUIRE(hits.size() == std::min<std::size_t>(5, oracle.size()));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].entry.id == oracle[i].second);
    }
  }
}

TEST_CASE("an orthogonal entry never reorders existing results") {
  rag::EmbedderSpec spec{rag::EmbedderSpec::Kind::external, 4};
  // Fixed query embedding via a custom embedder.
  rag::KnowledgeStore store(spec, [](std::string_view) {
    return std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f};
  });

  rag::KnowledgeEntry e1{"one", "close", {0.9f, 0.1f, 0.0f, 0.0f}, {}};
  rag::KnowledgeEntry e2{"two", "farther", {0.5f, 0.5f, 0.0f, 0.0f}, {}};
  store.insert_precomputed(e1);
  store.insert_precomputed(e2);
  auto before = store.retrieve_top_k("q", 10);

  rag::KnowledgeEntry ortho{"zzz", "orthogonal", {0.0f, 0.0f, 0.0f, 1.0f}, {}};
  store.insert_precomputed(ortho);
  auto after = store.retrieve_top_k("q", 10);

  REQUIRE(after.size() == 3);
  CHECK(after[0].entry.id == before[0].entry.id);
  CHECK(after[1].entry.id == before[1].entry.id);
  CHECK(after[2].entry.id == "zzz");  // zero similarity sorts last
}

TEST_CASE("store rejects zero vectors, duplicates and empty queries on retrieve") {
  rag::KnowledgeStore store;
  CHECK_THROWS_AS(store.retrieve_top_k("q", 1), rag::RagError);  // empty store
  store.insert("a", "text body");
  CHECK_THROWS_AS(store.retrieve_top_k("q", 0), rag::RagError);
  CHECK_THROWS_AS(store.insert("a", "другой"), rag::RagError);  // duplicate id
  CHECK_THROWS_AS(store.insert("b", ""), rag::RagError);

  rag::KnowledgeEntry zero{"z", "text", std::vector<float>(512, 0.0f), {}};
  CHECK_THROWS_AS(store.insert_precomputed(zero), rag::RagError);
}

TEST_CASE("store file round-trips entries, tags and scores") {
  rag::KnowledgeStore store;
  store.insert("net-example", "a four way intersection\twith tabs", {"net", "example"});
  store.insert("xodr-example", "two lane road with\nnewline", {"xodr"});

  std::string serialized = store.serialize();
  CHECK(util::starts_with(serialized, "#scenkit-store v1 dim=512 kind=hash-ngram"));

  rag::KnowledgeStore loaded = rag::KnowledgeStore::deserialize(serialized);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded.entries()[0].id == "net-example");
  CHECK(loaded.entries()[0].text == "a four way intersection\twith tabs");
  CHECK(loaded.entries()[0].tags == std::set<std::string>{"net", "example"});
  CHECK(loaded.entries()[0].embedding == store.entries()[0].embedding);

  auto hits = loaded.retrieve_top_k("four way intersection", 1);
  CHECK(hits[0].entry.id == "net-example");

  CHECK_THROWS_AS(rag::KnowledgeStore::deserialize("not a store"), rag::RagError);
  CHECK_THROWS_AS(
      rag::KnowledgeStore::deserialize("#scenkit-store v1 dim=512 kind=hash-ngram\nbad line"),
      rag::RagError);
}
