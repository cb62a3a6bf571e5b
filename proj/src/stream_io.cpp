#include "signspell/stream_io.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "signspell/training.hpp"

namespace signspell {

using Json = nlohmann::ordered_json;

std::string_view ProtocolError::code() const noexcept {
  switch (kind_) {
    case Kind::kMalformed: return "malformed";
    case Kind::kUnknownType: return "unknown_type";
    case Kind::kMissingField: return "missing_field";
    case Kind::kBadSeq: return "bad_seq";
    case Kind::kSeqRegression: return "seq_regression";
    case Kind::kLandmarkLength: return "landmark_length";
    case Kind::kBadLandmark: return "bad_landmark";
    case Kind::kNullPairing: return "null_pairing";
    case Kind::kBadHand: return "bad_hand";
    case Kind::kLineTooLong: return "line_too_long";
  }
  return "malformed";
}

namespace {

using Kind = ProtocolError::Kind;

const Json& field(const Json& obj, const char* name) {
  const auto it = obj.find(name);
  if (it == obj.end()) throw ProtocolError(Kind::kMissingField, std::string("missing field '") + name + "'");
  return *it;
}

std::uint64_t read_seq(const Json& value) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer() && value.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(value.get<std::int64_t>());
  }
  throw ProtocolError(Kind::kBadSeq, "seq must be a non-negative integer");
}

std::string dump(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

}  // namespace

InboundMessage decode_message(std::string_view line) {
  if (line.size() > kMaxLineBytes) throw ProtocolError(Kind::kLineTooLong, "line exceeds 1 MiB");
  Json msg = Json::parse(line.begin(), line.end(), nullptr, false);
  if (msg.is_discarded()) throw ProtocolError(Kind::kMalformed, "line is not valid JSON");
  if (!msg.is_object()) throw ProtocolError(Kind::kMalformed, "message must be a JSON object");

  const Json& type = field(msg, "type");
  if (!type.is_string()) throw ProtocolError(Kind::kUnknownType, "type must be a string");
  const auto& tag = type.get_ref<const std::string&>();
  if (tag == "end") return EndMessage{};
  if (tag != "frame") throw ProtocolError(Kind::kUnknownType, "unknown message type '" + tag + "'");

  FrameMessage frame;
  frame.seq = read_seq(field(msg, "seq"));
  const Json& hand = field(msg, "hand");
  const Json& lm = field(msg, "lm");
  if (hand.is_null() != lm.is_null()) {
    throw ProtocolError(Kind::kNullPairing, "hand and lm must both be null or both be present");
  }
  if (hand.is_null()) {
    frame.observation = NoHand{};
    return frame;
  }

  if (!hand.is_number_integer() || (hand.get<std::int64_t>() != 0 && hand.get<std::int64_t>() != 1)) {
    throw ProtocolError(Kind::kBadHand, "hand must be 0, 1 or null");
  }
  if (!lm.is_array()) throw ProtocolError(Kind::kBadLandmark, "lm must be an array or null");
  if (lm.size() != kNumCoords) {
    throw ProtocolError(Kind::kLandmarkLength,
                        "lm must hold 63 numbers, got " + std::to_string(lm.size()));
  }
  std::array<double, kNumCoords> coords{};
  for (std::size_t i = 0; i < kNumCoords; ++i) {
    if (!lm[i].is_number()) throw ProtocolError(Kind::kBadLandmark, "lm entries must be numbers");
    coords[i] = lm[i].get<double>();
    if (!std::isfinite(coords[i])) throw ProtocolError(Kind::kBadLandmark, "lm entries must be finite");
  }
  frame.observation = LandmarkFrame::from_values(coords, static_cast<double>(hand.get<std::int64_t>()));
  return frame;
}

FrameMessage decode_frame(std::string_view line) {
  InboundMessage msg = decode_message(line);
  if (auto* frame = std::get_if<FrameMessage>(&msg)) return std::move(*frame);
  throw ProtocolError(Kind::kUnknownType, "expected a frame message");
}

InboundMessage FrameDecoder::decode(std::string_view line) {
  InboundMessage msg = decode_message(line);
  if (const auto* frame = std::get_if<FrameMessage>(&msg)) {
    if (last_seq_ && frame->seq <= *last_seq_) {
      throw ProtocolError(Kind::kSeqRegression, "seq " + std::to_string(frame->seq) +
                                                    " does not follow " + std::to_string(*last_seq_));
    }
    last_seq_ = frame->seq;
  } else {
    last_seq_.reset();
  }
  return msg;
}

std::string encode_frame(const FrameMessage& frame) {
  Json j;
  j["type"] = "frame";
  j["seq"] = frame.seq;
  if (const auto* lf = std::get_if<LandmarkFrame>(&frame.observation)) {
    j["hand"] = lf->hand == Handedness::kRight ? 1 : 0;
    Json lm = Json::array();
    for (const Joint& p : lf->joints) {
      lm.push_back(p.x);
      lm.push_back(p.y);
      lm.push_back(p.z);
    }
    j["lm"] = std::move(lm);
  } else {
    j["hand"] = nullptr;
    j["lm"] = nullptr;
  }
  return dump(j);
}

std::string encode_end() { return R"({"type":"end"})"; }

std::string encode_ack(std::uint64_t seq, std::optional<Label> label, std::size_t run_count,
                       bool locked) {
  Json j;
  j["type"] = "ack";
  j["seq"] = seq;
  if (label) {
    j["label"] = std::string(label->token());
  } else {
    j["label"] = nullptr;
  }
  j["run_count"] = run_count;
  j["locked"] = locked;
  return dump(j);
}

std::string encode_emit(std::uint64_t seq, const Emission& emission) {
  Json j;
  j["type"] = "emit";
  j["seq"] = seq;
  j["action"] = std::string(to_string(emission.kind));
  if (emission.character) {
    j["char"] = std::string(1, *emission.character);
  } else {
    j["char"] = nullptr;
  }
  j["buffer"] = emission.buffer_after;
  return dump(j);
}

std::string encode_final(std::string_view buffer) {
  Json j;
  j["type"] = "final";
  j["buffer"] = std::string(buffer);
  return dump(j);
}

std::string encode_error(const ProtocolError& error, std::size_t line) {
  Json j;
  j["type"] = "error";
  j["code"] = std::string(error.code());
  j["line"] = line;
  j["message"] = error.what();
  return dump(j);
}

// ---------------------------------------------------------------------------

StreamProcessor::StreamProcessor(const Model& model, SessionConfig config)
    : model_(model), config_(config), session_(config) {
  require_label_model(model);
}

std::vector<std::string> StreamProcessor::handle_line(std::string_view line) {
  if (line.size() > kMaxLineBytes) throw ProtocolError(Kind::kLineTooLong, "line exceeds 1 MiB");
  if (line.find_first_not_of(" \t\r") == std::string_view::npos) return {};

  const InboundMessage msg = decoder_.decode(line);
  std::vector<std::string> out;
  if (std::holds_alternative<EndMessage>(msg)) {
    out.push_back(encode_final(session_.buffer()));
    last_final_buffer_ = session_.buffer();
    session_ = Session(config_);
    finalized_ = true;
    return out;
  }

  const auto& frame = std::get<FrameMessage>(msg);
  finalized_ = false;
  std::optional<Label> label;
  SessionInput input = NoHand{};
  if (const auto* hand = std::get_if<LandmarkFrame>(&frame.observation)) {
    label = classify(model_, *hand);
    input = *label;
  }
  const std::optional<Emission> emission = session_.step(input);
  out.push_back(encode_ack(frame.seq, label, session_.run_count(), session_.locked()));
  if (emission) {
    emissions_.push_back(*emission);
    out.push_back(encode_emit(frame.seq, *emission));
  }
  return out;
}

std::vector<std::string> StreamProcessor::finish() {
  if (finalized_) return {};
  finalized_ = true;
  last_final_buffer_ = session_.buffer();
  return {encode_final(session_.buffer())};
}

// ---------------------------------------------------------------------------

ReplayResult replay(const Model& model, std::istream& stream, std::ostream& events,
                    SessionConfig config, const std::string& source) {
  StreamProcessor processor(model, config);
  ReplayResult result;
  std::string line;
  std::size_t line_no = 0;
  const auto write = [&](const std::vector<std::string>& lines) {
    for (const auto& l : lines) events << l << '\n';
  };
  while (std::getline(stream, line)) {
    ++line_no;
    try {
      write(processor.handle_line(line));
    } catch (const ProtocolError& e) {
      throw ProtocolError(e.kind(), source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (stream.bad()) throw IoError("failed reading " + source);
  write(processor.finish());
  result.final_buffer = processor.last_final_buffer();
  result.transcript = processor.emissions();
  return result;
}

ReplayResult replay(const Model& model, const std::filesystem::path& stream_path,
                    std::ostream& events, SessionConfig config) {
  std::ifstream in(stream_path);
  if (!in) throw IoError("cannot open " + stream_path.string());
  return replay(model, in, events, config, stream_path.string());
}

// ---------------------------------------------------------------------------

bool serve_connection(const Model& model, SessionConfig config, const LineSource& read,
                      const LineSink& write) {
  StreamProcessor processor(model, config);
  std::size_t line_no = 0;
  try {
    for (;;) {
      ++line_no;
      const std::optional<std::string> line = read();
      if (!line) break;
      for (const auto& reply : processor.handle_line(*line)) {
        if (!write(reply)) return false;
      }
    }
    for (const auto& reply : processor.finish()) write(reply);
    return true;
  } catch (const ProtocolError& e) {
    write(encode_error(e, line_no));
  } catch (const FormatError& e) {
    write(encode_error(ProtocolError(Kind::kMalformed, e.what()), line_no));
  }
  return false;
}

bool serve_stream(const Model& model, SessionConfig config, std::istream& in, std::ostream& out) {
  const LineSource read = [&in]() -> std::optional<std::string> {
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    if (line.size() > kMaxLineBytes) throw ProtocolError(Kind::kLineTooLong, "line exceeds 1 MiB");
    return line;
  };
  const LineSink write = [&out](std::string_view reply) {
    out << reply << '\n' << std::flush;
    return static_cast<bool>(out);
  };
  return serve_connection(model, config, read, write);
}

Endpoint parse_endpoint(std::string_view text) {
  Endpoint ep;
  if (text == "stdio" || text == "-") return ep;
  ep.stdio = false;
  std::string_view port_text = text;
  const std::size_t colon = text.rfind(':');
  if (colon != std::string_view::npos) {
    if (colon > 0) ep.host = std::string(text.substr(0, colon));
    port_text = text.substr(colon + 1);
  }
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
  if (port_text.empty() || ec != std::errc{} || ptr != port_text.data() + port_text.size() ||
      value > 65535) {
    throw UsageError("malformed endpoint '" + std::string(text) + "' (want stdio or HOST:PORT)");
  }
  ep.port = static_cast<std::uint16_t>(value);
  return ep;
}

namespace {

class SocketLineReader {
 public:
  explicit SocketLineReader(int fd) : fd_(fd) {}

  std::optional<std::string> next() {
    for (;;) {
      const std::size_t nl = buffer_.find('\n', scanned_);
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        scanned_ = 0;
        return line;
      }
      scanned_ = buffer_.size();
      if (buffer_.size() > kMaxLineBytes) {
        throw ProtocolError(Kind::kLineTooLong, "line exceeds 1 MiB");
      }
      if (eof_) {
        if (buffer_.empty()) return std::nullopt;
        std::string line = std::move(buffer_);
        buffer_.clear();
        scanned_ = 0;
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        eof_ = true;
        continue;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buffer_;
  std::size_t scanned_ = 0;
  bool eof_ = false;
};

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

TcpServer::TcpServer(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
    throw IoError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, &::freeaddrinfo);

  listen_fd_ = ::socket(found->ai_family, found->ai_socktype, found->ai_protocol);
  if (listen_fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  if (::bind(listen_fd_, found->ai_addr, found->ai_addrlen) != 0 || ::listen(listen_fd_, 8) != 0) {
    const std::string reason = std::strerror(errno);
    ::close(listen_fd_);
    throw IoError("cannot listen on " + host + ":" + service + ": " + reason);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpServer::~TcpServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::run(const Model& model, SessionConfig config, std::size_t max_connections) {
  std::size_t handled = 0;
  while (max_connections == 0 || handled < max_connections) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      throw IoError(std::string("accept: ") + std::strerror(errno));
    }
    ++handled;
    spdlog::debug("connection {} opened", handled);
    SocketLineReader reader(fd);
    const bool clean = serve_connection(
        model, config, [&reader] { return reader.next(); },
        [fd](std::string_view reply) {
          return send_all(fd, reply) && send_all(fd, "\n");
        });
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
    spdlog::debug("connection {} closed{}", handled, clean ? "" : " after protocol error");
  }
}

void serve(const Model& model, const Endpoint& endpoint, SessionConfig config,
           const std::function<void(std::uint16_t)>& on_listening) {
  if (endpoint.stdio) {
    serve_stream(model, config, std::cin, std::cout);
    return;
  }
  TcpServer server(endpoint.host, endpoint.port);
  spdlog::info("listening on {}:{}", endpoint.host, server.port());
  if (on_listening) on_listening(server.port());
  server.run(model, config);
}

}  // namespace signspell
