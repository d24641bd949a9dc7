#include "pti/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "pti/error.hpp"

namespace pti::mpc {

const char* tag_name(Tag tag) {
  switch (tag) {
    case Tag::kMatmul: return "MATMUL";
    case Tag::kElemul: return "ELEMUL";
    case Tag::kOt: return "OT";
    case Tag::kTrunc: return "TRUNC";
    case Tag::kRelu: return "RELU";
    case Tag::kMax: return "MAX";
    case Tag::kExp: return "EXP";
    case Tag::kRecip: return "RECIP";
    case Tag::kRsqrt: return "RSQRT";
    case Tag::kTanh: return "TANH";
    case Tag::kControl: return "CONTROL";
  }
  return "UNKNOWN";
}

namespace {

struct Queue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Frame> frames;
  bool closed = false;
};

class PipeChannel : public Channel {
 public:
  PipeChannel(std::shared_ptr<Queue> out, std::shared_ptr<Queue> in) : out_(std::move(out)), in_(std::move(in)) {}
  ~PipeChannel() override { close(); }

  void send_frame(Tag tag, std::span<const std::uint8_t> payload) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw TransportError("pipe closed by peer");
    out_->frames.push_back(Frame{tag, {payload.begin(), payload.end()}});
    out_->cv.notify_one();
  }

  Frame recv_frame() override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->frames.empty() || in_->closed; });
    if (in_->frames.empty()) throw TransportError("pipe closed by peer");
    Frame f = std::move(in_->frames.front());
    in_->frames.pop_front();
    return f;
  }

  void close() override {
    for (auto* q : {out_.get(), in_.get()}) {
      std::lock_guard lock(q->mu);
      q->closed = true;
      q->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Queue> out_;
  std::shared_ptr<Queue> in_;
};

std::pair<std::string, std::string> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw ConfigError("address must be host:port, got '" + address + "'");
  std::string host = address.substr(0, colon);
  if (host.empty()) host = "0.0.0.0";
  return {host, address.substr(colon + 1)};
}

addrinfo* resolve(const std::string& host, const std::string& port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw TransportError("cannot resolve " + host + ":" + port);
  }
  return res;
}

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    writer_ = std::thread([this] { write_loop(); });
  }

  ~TcpChannel() override {
    {
      std::unique_lock lock(out_.mu);
      out_.closed = true;
      out_.cv.notify_all();
    }
    if (writer_.joinable()) writer_.join();
    ::close(fd_);
  }

  void send_frame(Tag tag, std::span<const std::uint8_t> payload) override {
    std::vector<std::uint8_t> bytes(kFrameHeaderBytes + payload.size());
    const auto len = static_cast<std::uint32_t>(payload.size());
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<std::uint8_t>(len >> (8 * i));
    bytes[4] = static_cast<std::uint8_t>(tag);
    std::memcpy(bytes.data() + kFrameHeaderBytes, payload.data(), payload.size());
    std::lock_guard lock(out_.mu);
    if (out_.closed || write_failed_) throw TransportError("tcp channel closed");
    out_.frames.push_back(Frame{tag, std::move(bytes)});
    out_.cv.notify_one();
  }

  Frame recv_frame() override {
    std::uint8_t header[kFrameHeaderBytes];
    read_exact(header, sizeof(header));
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(header[i]) << (8 * i);
    Frame f;
    f.tag = static_cast<Tag>(header[4]);
    f.payload.resize(len);
    read_exact(f.payload.data(), len);
    return f;
  }

  void close() override { ::shutdown(fd_, SHUT_RDWR); }

 private:
  void read_exact(std::uint8_t* dst, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      const ssize_t r = ::recv(fd_, dst + got, n - got, 0);
      if (r == 0) throw TransportError("tcp peer closed the connection");
      if (r < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("tcp recv failed: ") + std::strerror(errno));
      }
      got += static_cast<std::size_t>(r);
    }
  }

  void write_loop() {
    for (;;) {
      Frame f;
      {
        std::unique_lock lock(out_.mu);
        out_.cv.wait(lock, [&] { return !out_.frames.empty() || out_.closed; });
        if (out_.frames.empty()) return;
        f = std::move(out_.frames.front());
        out_.frames.pop_front();
      }
      std::size_t sent = 0;
      while (sent < f.payload.size()) {
        const ssize_t w = ::send(fd_, f.payload.data() + sent, f.payload.size() - sent, MSG_NOSIGNAL);
        if (w < 0) {
          if (errno == EINTR) continue;
          std::lock_guard lock(out_.mu);
          write_failed_ = true;
          return;
        }
        sent += static_cast<std::size_t>(w);
      }
    }
  }

  int fd_;
  Queue out_;
  bool write_failed_ = false;
  std::thread writer_;
};

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_pipe() {
  auto a = std::make_shared<Queue>();
  auto b = std::make_shared<Queue>();
  return {std::make_unique<PipeChannel>(a, b), std::make_unique<PipeChannel>(b, a)};
}

std::unique_ptr<Channel> tcp_listen(const std::string& address) {
  const auto [host, port] = split_address(address);
  addrinfo* res = resolve(host, port, true);
  const int lfd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  int one = 1;
  setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (lfd < 0 || ::bind(lfd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(lfd, 1) != 0) {
    const std::string why = std::strerror(errno);
    freeaddrinfo(res);
    if (lfd >= 0) ::close(lfd);
    throw TransportError("cannot listen on " + address + ": " + why);
  }
  freeaddrinfo(res);
  const int fd = ::accept(lfd, nullptr, nullptr);
  ::close(lfd);
  if (fd < 0) throw TransportError(std::string("accept failed: ") + std::strerror(errno));
  return std::make_unique<TcpChannel>(fd);
}

namespace {

// Retrying a loopback connect to a port in the ephemeral range can pair the
// socket with itself.
bool self_connected(int fd) {
  sockaddr_storage local{}, peer{};
  socklen_t ll = sizeof local, pl = sizeof peer;
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&local), &ll) != 0) return false;
  if (::getpeername(fd, reinterpret_cast<sockaddr*>(&peer), &pl) != 0) return false;
  return ll == pl && std::memcmp(&local, &peer, ll) == 0;
}

}  // namespace

std::unique_ptr<Channel> tcp_connect(const std::string& address, int timeout_ms) {
  const auto [host, port] = split_address(address);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    addrinfo* res = resolve(host, port, false);
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const bool ok = fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0 && !self_connected(fd);
    freeaddrinfo(res);
    if (ok) return std::make_unique<TcpChannel>(fd);
    if (fd >= 0) ::close(fd);
    if (std::chrono::steady_clock::now() > deadline) throw TransportError("cannot connect to " + address);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace pti::mpc
