#ifndef CGBA_WIRE_HPP
#define CGBA_WIRE_HPP

// Remote-oracle wire protocol: newline-delimited JSON frames over TCP or a
// child process's stdio.
//
//   server -> client on connect: {"hello":1,"n":<dims>,"classes":<L>}
//   request:  {"id":<u64>,"shape":[d1,...],"dtype":"f32le","data":"<base64>"}
//   response: {"id":<u64>,"label":<u32>}  or  {"id":<u64>,"error":"<text>"}
//
// Payloads are little-endian float32, base64 with the standard alphabet and padding.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>
#include <json.hpp>

#include "cgba/errors.hpp"
#include "cgba/geometry.hpp"
#include "cgba/oracle.hpp"

namespace cgba::wire {

static_assert(std::endian::native == std::endian::little, "f32le codec assumes a little-endian host");

inline std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  std::string out(4 * ((len + 2) / 3), '\0');
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data, static_cast<int>(len));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ProtocolError("invalid base64 payload");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

inline std::string encode_f32le(const Point& x) {
  std::vector<float> f(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) f[static_cast<std::size_t>(i)] = static_cast<float>(x[i]);
  return base64_encode(reinterpret_cast<const std::uint8_t*>(f.data()), f.size() * sizeof(float));
}

inline Point decode_f32le(const std::string& text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % sizeof(float) != 0) throw ProtocolError("payload is not a whole number of float32 values");
  std::vector<float> f(bytes.size() / sizeof(float));
  std::memcpy(f.data(), bytes.data(), bytes.size());
  Point x(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) x[static_cast<Eigen::Index>(i)] = f[i];
  return x;
}

/// The point as the server will see it after the float32 round trip.
inline Point as_float32(const Point& x) { return x.cast<float>().cast<double>(); }

inline nlohmann::json make_request(std::uint64_t id, const Point& x) {
  return {{"id", id}, {"shape", {x.size()}}, {"dtype", "f32le"}, {"data", encode_f32le(x)}};
}

inline nlohmann::json make_handshake(Eigen::Index n, Label classes) { return {{"hello", 1}, {"n", n}, {"classes", classes}}; }

// ---------------------------------------------------------------------------

/// Owns a read fd and a write fd (the same socket, or two pipe ends) and
/// moves whole lines across them.
class LineChannel {
 public:
  LineChannel(int read_fd, int write_fd, bool is_socket) : rfd_(read_fd), wfd_(write_fd), socket_(is_socket) {}
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;
  ~LineChannel() { close_all(); }

  void write_line(const std::string& line) {
    std::string buf = line;
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = socket_ ? ::send(wfd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL)
                                : ::write(wfd_, buf.data() + off, buf.size() - off);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ProtocolError("connection closed while writing");
      off += static_cast<std::size_t>(n);
    }
  }

  /// nullopt on orderly end of stream.
  std::optional<std::string> read_line() {
    while (true) {
      if (const auto pos = pending_.find('\n'); pos != std::string::npos) {
        std::string line = pending_.substr(0, pos);
        pending_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(rfd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        if (pending_.empty()) return std::nullopt;
        std::string rest;
        rest.swap(pending_);
        return rest;
      }
      pending_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close_all() {
    if (rfd_ >= 0) ::close(rfd_);
    if (wfd_ >= 0 && wfd_ != rfd_) ::close(wfd_);
    rfd_ = wfd_ = -1;
  }

 private:
  int rfd_;
  int wfd_;
  bool socket_;
  std::string pending_;
};

inline int tcp_connect(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw ProtocolError("cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

/// Client side. classify() is serialized: one request in flight per connection.
class RemoteOracle final : public DecisionOracle {
 public:
  static std::unique_ptr<RemoteOracle> connect_tcp(const std::string& host, int port, bool image = true) {
    const int fd = tcp_connect(host, port);
    return std::unique_ptr<RemoteOracle>(new RemoteOracle(std::make_unique<LineChannel>(fd, fd, true), -1, image));
  }

  /// Runs `command` through /bin/sh and speaks the protocol over its stdin/stdout.
  static std::unique_ptr<RemoteOracle> spawn(const std::string& command, bool image = true) {
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw ProtocolError("pipe() failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw ProtocolError("pipe() failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw ProtocolError("fork() failed");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    ::signal(SIGPIPE, SIG_IGN);
    return std::unique_ptr<RemoteOracle>(
        new RemoteOracle(std::make_unique<LineChannel>(from_child[0], to_child[1], false), pid, image));
  }

  ~RemoteOracle() override {
    chan_->close_all();
    if (child_ > 0) ::waitpid(child_, nullptr, 0);
  }

  Label classify(const Point& x) const override {
    if (x.size() != n_) throw InvalidInput("remote oracle: dimension mismatch");
    std::lock_guard lock(mu_);
    const std::uint64_t id = ++next_id_;
    chan_->write_line(make_request(id, x).dump());
    const auto line = chan_->read_line();
    if (!line) throw ProtocolError("remote oracle closed the connection");
    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(*line);
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("unparseable response frame");
    }
    if (resp.value("id", std::uint64_t{0}) != id) throw ProtocolError("response id mismatch");
    if (resp.contains("error")) throw ProtocolError("remote oracle error: " + resp["error"].get<std::string>());
    if (!resp.contains("label")) throw ProtocolError("response carries neither label nor error");
    const Label label = resp["label"].get<Label>();
    if (label >= classes_) throw ProtocolError("remote label out of range");
    return label;
  }

  Eigen::Index dims() const override { return n_; }
  Label classes() const override { return classes_; }
  bool is_image() const override { return image_; }

 private:
  RemoteOracle(std::unique_ptr<LineChannel> chan, pid_t child, bool image)
      : chan_(std::move(chan)), child_(child), image_(image) {
    const auto line = chan_->read_line();
    if (!line) throw ProtocolError("no handshake from remote oracle");
    try {
      const auto hello = nlohmann::json::parse(*line);
      if (hello.value("hello", 0) != 1) throw ProtocolError("bad handshake frame");
      n_ = hello.at("n").get<Eigen::Index>();
      classes_ = hello.at("classes").get<Label>();
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("bad handshake frame");
    }
    if (n_ < 1 || classes_ < 1) throw ProtocolError("handshake advertises an empty model");
  }

  std::unique_ptr<LineChannel> chan_;
  pid_t child_;
  bool image_;
  Eigen::Index n_ = 0;
  Label classes_ = 0;
  mutable std::mutex mu_;
  mutable std::uint64_t next_id_ = 0;
};

// ---------------------------------------------------------------------------
// Server side.

/// Answers one request frame. Never throws for protocol problems: they become
/// error frames carrying the request id (0 when the id is unreadable).
inline std::string answer_frame(const std::string& line, const DecisionOracle& oracle) {
  std::uint64_t id = 0;
  auto error = [&](const std::string& what) { return nlohmann::json{{"id", id}, {"error", what}}.dump(); };
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    return error("malformed frame: not JSON");
  }
  if (!req.is_object()) return error("malformed frame: not an object");
  if (req.contains("id") && req["id"].is_number_unsigned()) id = req["id"].get<std::uint64_t>();
  else if (req.contains("id") && req["id"].is_number_integer() && req["id"].get<std::int64_t>() >= 0) id = req["id"].get<std::uint64_t>();
  else return error("malformed frame: missing id");
  if (req.value("dtype", std::string{}) != "f32le") return error("unsupported dtype");
  if (!req.contains("data") || !req["data"].is_string()) return error("malformed frame: missing data");
  if (!req.contains("shape") || !req["shape"].is_array()) return error("malformed frame: missing shape");
  std::int64_t count = 1;
  for (const auto& d : req["shape"]) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 0) return error("malformed frame: bad shape");
    count *= d.get<std::int64_t>();
  }
  Point x;
  try {
    x = decode_f32le(req["data"].get<std::string>());
  } catch (const ProtocolError& e) {
    return error(e.what());
  }
  if (x.size() != count || x.size() != oracle.dims()) return error("shape mismatch");
  try {
    return nlohmann::json{{"id", id}, {"label", oracle.classify(x)}}.dump();
  } catch (const std::exception& e) {
    return error(std::string("classification failed: ") + e.what());
  }
}

/// Handshake, then lock-step request/response until the peer closes.
inline void serve_channel(LineChannel& chan, const DecisionOracle& oracle) {
  chan.write_line(make_handshake(oracle.dims(), oracle.classes()).dump());
  while (auto line = chan.read_line()) {
    if (line->empty()) continue;
    chan.write_line(answer_frame(*line, oracle));
  }
}

/// Serves one oracle on stdin/stdout.
inline void serve_stdio(const DecisionOracle& oracle) {
  LineChannel chan(::dup(STDIN_FILENO), ::dup(STDOUT_FILENO), false);
  serve_channel(chan, oracle);
}

/// TCP server: one thread per connection. Port 0 picks an ephemeral port.
class TcpServer {
 public:
  TcpServer(std::shared_ptr<const DecisionOracle> oracle, int port, const std::string& bind_host = "127.0.0.1")
      : oracle_(std::move(oracle)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw ProtocolError("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) throw ProtocolError("bad bind address");
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
      ::close(listen_fd_);
      throw ProtocolError("cannot listen on port " + std::to_string(port));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  ~TcpServer() { stop(); }

  int port() const { return port_; }

  /// Accepts connections until stop(). Blocks.
  void run() {
    while (!stopping_) {
      const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) {
        if (errno == EINTR) continue;
        break;
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      std::lock_guard lock(mu_);
      workers_.emplace_back([fd, oracle = oracle_] {
        LineChannel chan(fd, fd, true);
        try {
          serve_channel(chan, *oracle);
        } catch (const ProtocolError&) {
          // peer went away mid-write
        }
      });
    }
  }

  void start_background() {
    acceptor_ = std::thread([this] { run(); });
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();
    std::lock_guard lock(mu_);
    for (auto& w : workers_) w.detach();
  }

 private:
  std::shared_ptr<const DecisionOracle> oracle_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<std::thread> workers_;
};

}  // namespace cgba::wire

#endif  // CGBA_WIRE_HPP
