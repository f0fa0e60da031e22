#include "scenkit/remote.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include <json.hpp>

#include "scenkit/util.hpp"

namespace scenkit::remote {

using nlohmann::json;

// ---------------------------------------------------------------------------
// TcpTransport
// ---------------------------------------------------------------------------

TcpTransport::TcpTransport(const std::string& address) {
  std::size_t colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw tok::BackendError("remote address must be host:port, got '" + address + "'");
  }
  std::string host = address.substr(0, colon);
  std::string port = address.substr(colon + 1);

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &result);
  if (rc != 0) {
    throw tok::BackendError("backend unreachable: cannot resolve '" + address +
                            "': " + gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = result; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) {
    throw tok::BackendError("backend unreachable: cannot connect to '" + address + "'");
  }
  fd_ = fd;
}

TcpTransport::TcpTransport(int connected_fd) : fd_(connected_fd) {
  if (fd_ < 0) throw tok::BackendError("invalid transport fd");
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpTransport::send_line(const std::string& line) {
  std::string framed = line + "\n";
  std::size_t sent = 0;
  while (sent < framed.size()) {
    ssize_t n = ::send(fd_, framed.data() + sent, framed.size() - sent, 0);
    if (n <= 0) throw tok::BackendError("backend connection lost while sending");
    sent += static_cast<std::size_t>(n);
  }
}

std::string TcpTransport::recv_line() {
  for (;;) {
    std::size_t newline = buffer_.find('\n');
    if (newline != std::string::npos) {
      std::string line = buffer_.substr(0, newline);
      buffer_.erase(0, newline + 1);
      return line;
    }
    char chunk[4096];
    ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) throw tok::BackendError("backend connection closed");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

// ---------------------------------------------------------------------------
// RemoteModel
// ---------------------------------------------------------------------------

namespace {
json roundtrip(LineTransport& transport, const json& request) {
  transport.send_line(request.dump());
  std::string line = transport.recv_line();
  json response;
  try {
    response = json::parse(line);
  } catch (const json::exception& e) {
    throw tok::BackendError(std::string("backend sent malformed JSON: ") + e.what());
  }
  if (!response.contains("v") || response["v"] != kProtocolVersion) {
    throw tok::BackendError("protocol version mismatch (expected v" +
                            std::to_string(kProtocolVersion) + ")");
  }
  return response;
}
}  // namespace

RemoteModel::RemoteModel(std::unique_ptr<LineTransport> transport)
    : transport_(std::move(transport)) {
  if (!transport_) throw tok::BackendError("null transport");
  json response = roundtrip(*transport_, json{{"v", kProtocolVersion}, {"op", "vocab"}});
  if (response.contains("error")) {
    throw tok::BackendError("handshake failed: " +
                            response["error"].get<std::string>());
  }
  if (!response.contains("tokens") || !response["tokens"].is_array()) {
    throw tok::BackendError("handshake response missing 'tokens'");
  }
  vocab_ = tok::Vocabulary(response["tokens"].get<std::vector<std::string>>());
}

tok::TokenDistribution RemoteModel::compute(const tok::PromptBundle& bundle) const {
  json request{{"v", kProtocolVersion},
               {"query", bundle.query_text},
               {"prefix", bundle.prefix}};
  if (bundle.has_context()) {
    request["context"] = bundle.context_text;
  } else {
    request["context"] = nullptr;
  }
  json attachments = json::array();
  for (const auto& blob : bundle.context_attachments) {
    attachments.push_back(util::base64_encode(blob.data(), blob.size()));
  }
  request["attachments"] = std::move(attachments);

  std::lock_guard<std::mutex> lock(mutex_);
  json response = roundtrip(*transport_, request);
  if (response.contains("error")) {
    throw tok::BackendError("backend error: " + response["error"].get<std::string>());
  }
  if (!response.contains("logits") || !response["logits"].is_array()) {
    throw tok::BackendError("backend response missing 'logits'");
  }
  tok::TokenDistribution dist;
  dist.logits = response["logits"].get<std::vector<double>>();
  return dist;
}

std::string RemoteModel::detokenize(std::span<const int> tokens) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    json request{{"v", kProtocolVersion},
                 {"op", "detok"},
                 {"tokens", std::vector<int>(tokens.begin(), tokens.end())}};
    try {
      json response = roundtrip(*transport_, request);
      if (response.contains("text") && response["text"].is_string()) {
        return response["text"].get<std::string>();
      }
    } catch (const tok::BackendError&) {
      // fall through to whitespace joining
    }
  }
  return LogitSource::detokenize(tokens);
}

rag::EmbedFn remote_embedder(std::shared_ptr<LineTransport> transport,
                             std::size_t dimension) {
  if (!transport) throw tok::BackendError("null transport");
  auto mutex = std::make_shared<std::mutex>();
  return [transport, mutex, dimension](std::string_view text) {
    if (text.empty()) throw rag::RagError("embed: text is empty");
    std::lock_guard<std::mutex> lock(*mutex);
    json response = roundtrip(
        *transport,
        json{{"v", kProtocolVersion}, {"op", "embed"}, {"text", std::string(text)}});
    if (response.contains("error")) {
      throw rag::RagError("external embedder error: " +
                          response["error"].get<std::string>());
    }
    std::vector<float> vec = response.at("embedding").get<std::vector<float>>();
    if (vec.size() != dimension) {
      throw rag::RagError("external embedder returned dimension " +
                          std::to_string(vec.size()) + ", expected " +
                          std::to_string(dimension));
    }
    return vec;
  };
}

}  // namespace scenkit::remote
