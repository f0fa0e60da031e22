#include <sys/socket.h>

#include <atomic>
#include <thread>

#include <doctest.h>

#include <json.hpp>

#include "scenkit/remote.hpp"

using namespace scenkit;
using nlohmann::json;

namespace {

/// In-process echo-test backend: fixed vocabulary, one logits row with
/// context and another without, authored before the client existed.
std::string fixture_server(const std::string& line) {
  json request = json::parse(line);
  if (request.value("v", 0) != 1) {
    return json{{"v", 1}, {"error", "unsupported protocol version"}}.dump();
  }
  if (request.value("op", "") == "vocab") {
    return json{{"v", 1}, {"tokens", {"a", "b", "c", "d"}}}.dump();
  }
  if (request.value("op", "") == "detok") {
    return json{{"v", 1}, {"text", "joined-by-server"}}.dump();
  }
  if (request.contains("context") && !request["context"].is_null()) {
    return json{{"v", 1}, {"logits", {4.0, 3.0, 2.0, 1.0}}}.dump();
  }
  return json{{"v", 1}, {"logits", {1.0, 2.0, 3.0, 4.0}}}.dump();
}

std::unique_ptr<remote::LoopbackTransport> loopback() {
  return std::make_unique<remote::LoopbackTransport>(fixture_server);
}

}  // namespace

TEST_CASE("handshake learns the vocabulary") {
  remote::RemoteModel model(loopback());
  CHECK(model.vocabulary().size() == 4);
  CHECK(model.vocabulary().token(0) == "a");
}

TEST_CASE("handshake rejects duplicate tokens") {
  auto bad = std::make_unique<remote::LoopbackTransport>([](const std::string&) {
    return json{{"v", 1}, {"tokens", {"a", "a"}}}.dump();
  });
  CHECK_THROWS_AS(remote::RemoteModel{std::move(bad)}, tok::VocabularyError);
}

TEST_CASE("protocol version mismatch fails the handshake") {
  auto v2 = std::make_unique<remote::LoopbackTransport>([](const std::string&) {
    return json{{"v", 2}, {"tokens", {"a"}}}.dump();
  });
  CHECK_THROWS_AS(remote::RemoteModel{std::move(v2)}, tok::BackendError);
}

TEST_CASE("logits requests carry the context channel") {
  remote::RemoteModel model(loopback());
  tok::PromptBundle bundle;
  bundle.query_text = "generate";
  bundle.context_text = "crash report";

  auto with = model.logits_with_context(bundle);
  CHECK(with.logits == std::vector<double>{4.0, 3.0, 2.0, 1.0});

  // The unconditioned pass sends context:null and gets the other row.
  auto without = model.logits_without_context(bundle);
  CHECK(without.logits == std::vector<double>{1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("attachments travel base64-encoded and vanish without context") {
  std::vector<std::string> seen_attachments;
  bool saw_null_context = false;
  auto inspect = std::make_unique<remote::LoopbackTransport>(
      [&](const std::string& line) {
        json request = json::parse(line);
        if (request.value("op", "") == "vocab") {
          return json{{"v", 1}, {"tokens", {"a", "b"}}}.dump();
        }
        for (const auto& blob : request.at("attachments")) {
          seen_attachments.push_back(blob.get<std::string>());
        }
        saw_null_context |= request.at("context").is_null();
        return json{{"v", 1}, {"logits", {0.0, 0.0}}}.dump();
      });

  remote::RemoteModel model(std::move(inspect));
  tok::PromptBundle bundle;
  bundle.context_text = "diagram attached";
  bundle.context_attachments.push_back({0xDE, 0xAD, 0xBE, 0xEF});
  model.logits_with_context(bundle);
  REQUIRE(seen_attachments.size() == 1);
  CHECK(seen_attachments[0] == "3q2+7w==");  // base64 of de ad be ef
  CHECK(!saw_null_context);

  seen_attachments.clear();
  model.logits_without_context(bundle);
  CHECK(seen_attachments.empty());  // context channel stripped entirely
  CHECK(saw_null_context);
}

TEST_CASE("backend error responses surface as exceptions") {
  std::atomic<int> calls{0};
  auto flaky = std::make_unique<remote::LoopbackTransport>(
      [&calls](const std::string& line) {
        json request = json::parse(line);
        if (request.value("op", "") == "vocab") {
          return json{{"v", 1}, {"tokens", {"a", "b"}}}.dump();
        }
        ++calls;
        return json{{"v", 1}, {"error", "model overloaded"}}.dump();
      });
  remote::RemoteModel model(std::move(flaky));
  tok::PromptBundle bundle;
  CHECK_THROWS_AS(model.logits_with_context(bundle), tok::BackendError);
  CHECK(calls == 1);
}

TEST_CASE("wrong logits arity is rejected") {
  auto short_row = std::make_unique<remote::LoopbackTransport>(
      [](const std::string& line) {
        json request = json::parse(line);
        if (request.value("op", "") == "vocab") {
          return json{{"v", 1}, {"tokens", {"a", "b", "c"}}}.dump();
        }
        return json{{"v", 1}, {"logits", {1.0}}}.dump();
      });
  remote::RemoteModel model(std::move(short_row));
  tok::PromptBundle bundle;
  CHECK_THROWS_AS(model.logits_with_context(bundle), tok::BackendError);
}

TEST_CASE("detokenize prefers the server and falls back to joining") {
  remote::RemoteModel model(loopback());
  std::vector<int> tokens{0, 2};
  CHECK(model.detokenize(tokens) == "joined-by-server");

  auto no_detok = std::make_unique<remote::LoopbackTransport>(
      [](const std::string& line) {
        json request = json::parse(line);
        if (request.value("op", "") == "vocab") {
          return json{{"v", 1}, {"tokens", {"x", "y"}}}.dump();
        }
        return json{{"v", 1}, {"error", "unknown op"}}.dump();
      });
  remote::RemoteModel fallback(std::move(no_detok));
  CHECK(fallback.detokenize(std::vector<int>{0, 1}) == "x y");
}

TEST_CASE("tcp transport frames lines across a real socket pair") {
  int fds[2];
  REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);

  std::thread server([fd = fds[1]]() {
    remote::TcpTransport transport(fd);
    // Serve two requests, then the thread exits and the fd closes.
    for (int i = 0; i < 2; ++i) {
      std::string line = transport.recv_line();
      transport.send_line(fixture_server(line));
    }
  });

  {
    remote::RemoteModel model(std::make_unique<remote::TcpTransport>(fds[0]));
    CHECK(model.vocabulary().size() == 4);
    tok::PromptBundle bundle;
    bundle.context_text = "ctx";
    auto dist = model.logits_with_context(bundle);
    CHECK(dist.logits[0] == 4.0);
  }
  server.join();
}

TEST_CASE("remote embedder validates dimension and propagates errors") {
  auto transport = std::make_shared<remote::LoopbackTransport>(
      [](const std::string& line) {
        json request = json::parse(line);
        if (request.value("op", "") != "embed") {
          return json{{"v", 1}, {"error", "unknown op"}}.dump();
        }
        std::string text = request.value("text", "");
        if (text == "fail") return json{{"v", 1}, {"error", "quota"}}.dump();
        return json{{"v", 1}, {"embedding", {1.0, 0.0, 0.0}}}.dump();
      });

  rag::EmbedFn embed3 = remote::remote_embedder(transport, 3);
  auto vec = embed3("hello");
  CHECK(vec == std::vector<float>{1.0f, 0.0f, 0.0f});
  CHECK_THROWS_AS(embed3("fail"), rag::RagError);

  rag::EmbedFn embed8 = remote::remote_embedder(transport, 8);
  CHECK_THROWS_AS(embed8("hello"), rag::RagError);  // dimension mismatch
}

TEST_CASE("bad address strings are rejected up front") {
  CHECK_THROWS_AS(remote::TcpTransport("no-port-here"), tok::BackendError);
  CHECK_THROWS_AS(remote::TcpTransport(":9"), tok::BackendError);
}
