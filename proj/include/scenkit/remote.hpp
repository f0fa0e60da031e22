#pragma once

/**
 * Remote logit backend: newline-delimited JSON over a byte stream.
 *
 * Requests (one JSON object per line):
 *   handshake  {"v":1,"op":"vocab"}
 *   logits     {"v":1,"context":string|null,"attachments":[base64...],
 *               "query":string,"prefix":[int...]}
 *   detok      {"v":1,"op":"detok","tokens":[int...]}      (optional op)
 *   embed      {"v":1,"op":"embed","text":string}          (optional op)
 *
 * Responses:
 *   {"v":1,"tokens":[string...]}   |  {"v":1,"logits":[float...]}
 *   {"v":1,"text":string}          |  {"v":1,"embedding":[float...]}
 *   {"v":1,"error":string}
 *
 * A response with a different "v" is a protocol-version mismatch. Requests
 * are serialized per connection; open several connections to parallelize.
 */

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "scenkit/rag.hpp"
#include "scenkit/token_model.hpp"

namespace scenkit::remote {

constexpr int kProtocolVersion = 1;

class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void send_line(const std::string& line) = 0;
  /// Blocks for the next newline-terminated line (returned without the
  /// newline). Throws tok::BackendError on EOF or transport failure.
  virtual std::string recv_line() = 0;
};

/// TCP client transport; address is "host:port".
class TcpTransport : public LineTransport {
 public:
  explicit TcpTransport(const std::string& address);
  /// Adopts an already-connected stream fd (socketpair tests use this).
  explicit TcpTransport(int connected_fd);
  ~TcpTransport() override;

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void send_line(const std::string& line) override;
  std::string recv_line() override;

 private:
  int fd_ = -1;
  std::string buffer_;
};

/// In-process transport: every sent line is answered by the handler.
class LoopbackTransport : public LineTransport {
 public:
  using Handler = std::function<std::string(const std::string&)>;
  explicit LoopbackTransport(Handler handler) : handler_(std::move(handler)) {}

  void send_line(const std::string& line) override {
    pending_.push_back(handler_(line));
  }
  std::string recv_line() override {
    if (pending_.empty()) throw tok::BackendError("loopback: no pending response");
    std::string line = std::move(pending_.front());
    pending_.erase(pending_.begin());
    return line;
  }

 private:
  Handler handler_;
  std::vector<std::string> pending_;
};

class RemoteModel : public tok::LogitSource {
 public:
  /// Performs the vocabulary handshake; throws tok::BackendError on
  /// protocol-version mismatch and tok::VocabularyError on duplicates.
  explicit RemoteModel(std::unique_ptr<LineTransport> transport);

  const tok::Vocabulary& vocabulary() const override { return vocab_; }

  /// Asks the backend to detokenize; falls back to whitespace joining when
  /// the backend answers the detok op with an error.
  std::string detokenize(std::span<const int> tokens) const override;

 protected:
  tok::TokenDistribution compute(const tok::PromptBundle& bundle) const override;

 private:
  mutable std::mutex mutex_;  // serialize request/response per connection
  std::unique_ptr<LineTransport> transport_;
  tok::Vocabulary vocab_;
};

/// Embedder over the same wire protocol, usable as rag::EmbedFn.
rag::EmbedFn remote_embedder(std::shared_ptr<LineTransport> transport,
                             std::size_t dimension);

}  // namespace scenkit::remote
