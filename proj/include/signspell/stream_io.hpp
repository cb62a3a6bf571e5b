#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "signspell/errors.hpp"
#include "signspell/landmarks.hpp"
#include "signspell/neuralnet.hpp"
#include "signspell/typing_session.hpp"

namespace signspell {

// Newline-delimited JSON, one object per line.
//
//   in:  {"type":"frame","seq":N,"hand":0|1|null,"lm":[63 numbers]|null}
//        {"type":"end"}
//   out: {"type":"ack","seq":N,"label":"A"|null,"run_count":K,"locked":bool}
//        {"type":"emit","seq":N,"action":"letter"|"space"|"delete","char":"A"|null,"buffer":"..."}
//        {"type":"final","buffer":"..."}
//        {"type":"error","code":"...","line":L,"message":"..."}

struct FrameMessage {
  std::uint64_t seq = 0;
  Observation observation;

  bool operator==(const FrameMessage&) const = default;
};

struct EndMessage {
  bool operator==(const EndMessage&) const = default;
};

using InboundMessage = std::variant<FrameMessage, EndMessage>;

class ProtocolError : public FormatError {
 public:
  enum class Kind {
    kMalformed,
    kUnknownType,
    kMissingField,
    kBadSeq,
    kSeqRegression,
    kLandmarkLength,
    kBadLandmark,
    kNullPairing,
    kBadHand,
    kLineTooLong,
  };

  ProtocolError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }
  /// Stable snake_case identifier used in error objects.
  std::string_view code() const noexcept;

 private:
  Kind kind_;
};

inline constexpr std::size_t kMaxLineBytes = 1 << 20;

/// Stateless syntax and schema check of one line.
InboundMessage decode_message(std::string_view line);

/// As decode_message but rejects anything other than a frame.
FrameMessage decode_frame(std::string_view line);

/// Adds the seq-ordering rule on top of decode_message.
class FrameDecoder {
 public:
  InboundMessage decode(std::string_view line);
  void reset() { last_seq_.reset(); }

 private:
  std::optional<std::uint64_t> last_seq_;
};

std::string encode_frame(const FrameMessage& frame);
std::string encode_end();
std::string encode_ack(std::uint64_t seq, std::optional<Label> label, std::size_t run_count,
                       bool locked);
std::string encode_emit(std::uint64_t seq, const Emission& emission);
std::string encode_final(std::string_view buffer);
std::string encode_error(const ProtocolError& error, std::size_t line);

/// Classifies frames and drives one typing session per stream. Shared by
/// replay and the server so both produce identical event lines.
class StreamProcessor {
 public:
  StreamProcessor(const Model& model, SessionConfig config);

  /// Response lines for one input line. Blank lines produce nothing.
  /// Throws ProtocolError; the processor should then be discarded.
  std::vector<std::string> handle_line(std::string_view line);

  /// Response lines at end of input: a final event unless the stream already
  /// ended with an explicit end message.
  std::vector<std::string> finish();

  const Session& session() const { return session_; }
  /// Emissions across every session this processor has run.
  const std::vector<Emission>& emissions() const { return emissions_; }
  /// Buffer carried by the most recent final event.
  const std::string& last_final_buffer() const { return last_final_buffer_; }

 private:
  const Model& model_;
  SessionConfig config_;
  Session session_;
  FrameDecoder decoder_;
  std::vector<Emission> emissions_;
  std::string last_final_buffer_;
  bool finalized_ = false;
};

struct ReplayResult {
  std::vector<Emission> transcript;
  std::string final_buffer;
};

/// Feeds a recorded stream through featurize, forward, argmax and the typing
/// session, writing every event line to `events`. Throws FormatError with the
/// line number on a protocol violation.
ReplayResult replay(const Model& model, std::istream& stream, std::ostream& events,
                    SessionConfig config = {}, const std::string& source = "stream");
ReplayResult replay(const Model& model, const std::filesystem::path& stream_path,
                    std::ostream& events, SessionConfig config = {});

/// Source of input lines; nullopt at end of input. Lines longer than
/// kMaxLineBytes must be reported as a ProtocolError of kind kLineTooLong.
using LineSource = std::function<std::optional<std::string>()>;
/// Returns false when the peer has gone away.
using LineSink = std::function<bool(std::string_view)>;

/// Runs one connection to completion. Protocol violations are answered with
/// an error object, after which the connection is closed.
/// Returns false if the connection ended with an error.
bool serve_connection(const Model& model, SessionConfig config, const LineSource& read,
                      const LineSink& write);

bool serve_stream(const Model& model, SessionConfig config, std::istream& in, std::ostream& out);

struct Endpoint {
  bool stdio = true;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// "stdio", "PORT", ":PORT" or "HOST:PORT".
Endpoint parse_endpoint(std::string_view text);

/// Sequential TCP server: one connection and one session at a time.
class TcpServer {
 public:
  /// Binds and listens; port 0 picks a free port. Throws IoError.
  TcpServer(const std::string& host, std::uint16_t port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }

  /// Accepts and serves connections until `max_connections` have been handled
  /// (0 means forever).
  void run(const Model& model, SessionConfig config, std::size_t max_connections = 0);

 private:
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Serves stdio once, or a TCP endpoint forever.
void serve(const Model& model, const Endpoint& endpoint, SessionConfig config,
           const std::function<void(std::uint16_t)>& on_listening = {});

}  // namespace signspell
