#include "ariann/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

namespace ariann {

std::vector<std::uint8_t> encode_frame(const Frame& f) {
  if (f.payload.size() >= 0xFFFFFFFFULL) throw std::invalid_argument("frame payload too large");
  const auto len = static_cast<std::uint32_t>(f.payload.size() + 1);
  std::vector<std::uint8_t> out(5 + f.payload.size());
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(len >> (8 * i));
  out[4] = static_cast<std::uint8_t>(f.type);
  std::memcpy(out.data() + 5, f.payload.data(), f.payload.size());
  return out;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::next() {
  if (buffered() < 5) return std::nullopt;
  const std::uint8_t* p = buf_.data() + pos_;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= std::uint32_t{p[i]} << (8 * i);
  if (len == 0) throw ProtocolError("frame with zero length");
  const std::uint8_t type = p[4];
  if (type < 0x01 || type > 0x05) {
    throw ProtocolError("unknown frame type " + std::to_string(type));
  }
  if (buffered() < 4 + std::size_t{len}) return std::nullopt;
  Frame f;
  f.type = static_cast<FrameType>(type);
  f.payload.assign(p + 5, p + 4 + len);
  pos_ += 4 + std::size_t{len};
  return f;
}

std::vector<Frame> decode_frames(std::span<const std::uint8_t> bytes) {
  FrameDecoder d;
  d.feed(bytes);
  std::vector<Frame> out;
  while (auto f = d.next()) out.push_back(std::move(*f));
  if (d.buffered() != 0) throw ProtocolError("truncated frame stream");
  return out;
}

std::chrono::milliseconds default_timeout() {
  if (const char* env = std::getenv("ARIANN_TIMEOUT_MS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return std::chrono::milliseconds(v);
  }
  return std::chrono::milliseconds(30000);
}

// ---------------------------------------------------------------------------
// In-process

namespace {

struct LocalPipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Frame> queue[2];  // queue[j] holds frames addressed to end j
  bool closed = false;
};

class LocalChannel final : public Channel {
 public:
  LocalChannel(std::shared_ptr<LocalPipe> pipe, int end) : pipe_(std::move(pipe)), end_(end) {}
  ~LocalChannel() override { close(); }

  void send(const Frame& f) override {
    std::lock_guard lock(pipe_->mu);
    if (pipe_->closed) throw TransportError("channel closed");
    pipe_->queue[1 - end_].push_back(f);
    pipe_->cv.notify_all();
  }

  Frame recv(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(pipe_->mu);
    auto& q = pipe_->queue[end_];
    if (!pipe_->cv.wait_for(lock, timeout, [&] { return !q.empty() || pipe_->closed; })) {
      throw TimeoutError("no frame from peer within " + std::to_string(timeout.count()) + " ms");
    }
    if (q.empty()) throw TransportError("peer closed the channel");
    Frame f = std::move(q.front());
    q.pop_front();
    return f;
  }

  void close() override {
    std::lock_guard lock(pipe_->mu);
    pipe_->closed = true;
    pipe_->cv.notify_all();
  }

 private:
  std::shared_ptr<LocalPipe> pipe_;
  int end_;
};

}  // namespace

std::pair<std::shared_ptr<Channel>, std::shared_ptr<Channel>> make_local_channel_pair() {
  auto pipe = std::make_shared<LocalPipe>();
  return {std::make_shared<LocalChannel>(pipe, 0), std::make_shared<LocalChannel>(pipe, 1)};
}

// ---------------------------------------------------------------------------
// TCP

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

// Writes go through a dedicated thread so two parties that both send a large
// message before reading cannot block each other on full socket buffers.
class TcpChannel final : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    writer_ = std::thread([this] { write_loop(); });
  }

  ~TcpChannel() override {
    close();
    if (writer_.joinable()) writer_.join();
    ::close(fd_);
  }

  void send(const Frame& f) override {
    std::lock_guard lock(mu_);
    if (closed_ || write_failed_) throw TransportError("tcp channel closed");
    outbox_.push_back(encode_frame(f));
    cv_.notify_all();
  }

  Frame recv(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::uint8_t buf[1 << 16];
    while (true) {
      if (auto f = decoder_.next()) return std::move(*f);
      {
        std::lock_guard lock(mu_);
        if (closed_) throw TransportError("tcp channel closed");
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        throw TimeoutError("no frame from peer within " + std::to_string(timeout.count()) + " ms");
      }
      pollfd p{fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(std::min<long>(left.count(), 200)));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_text("poll"));
      }
      if (r == 0) continue;
      const ssize_t got = ::recv(fd_, buf, sizeof(buf), 0);
      if (got == 0) throw TransportError("peer closed the connection");
      if (got < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw TransportError(errno_text("recv"));
      }
      decoder_.feed({buf, static_cast<std::size_t>(got)});
    }
  }

  void close() override {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
    }
    // Let queued frames (an abort notice, say) drain before shutting down.
    {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, std::chrono::seconds(2), [&] { return (outbox_.empty() && !sending_) || write_failed_; });
      closed_ = true;
      cv_.notify_all();
    }
    ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  void write_loop() {
    while (true) {
      std::vector<std::uint8_t> msg;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !outbox_.empty() || closed_; });
        if (outbox_.empty()) return;
        msg = std::move(outbox_.front());
        outbox_.pop_front();
        sending_ = true;
      }
      std::size_t off = 0;
      while (off < msg.size()) {
        const ssize_t w = ::send(fd_, msg.data() + off, msg.size() - off, MSG_NOSIGNAL);
        if (w < 0) {
          if (errno == EINTR) continue;
          std::lock_guard lock(mu_);
          write_failed_ = true;
          sending_ = false;
          outbox_.clear();
          cv_.notify_all();
          return;
        }
        off += static_cast<std::size_t>(w);
      }
      std::lock_guard lock(mu_);
      sending_ = false;
      cv_.notify_all();
    }
  }

  int fd_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::vector<std::uint8_t>> outbox_;
  bool closed_ = false;
  bool sending_ = false;
  bool write_failed_ = false;
  std::thread writer_;
  FrameDecoder decoder_;
};

}  // namespace

std::shared_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port,
                                     std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw TransportError("cannot resolve " + host);
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  // The listener may not be up yet; retry until the deadline.
  while (true) {
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
      ::freeaddrinfo(res);
      throw TransportError(errno_text("socket"));
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return std::make_shared<TcpChannel>(fd);
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      ::freeaddrinfo(res);
      throw TimeoutError("cannot connect to " + host + ":" + std::to_string(port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

TcpListener::TcpListener(std::uint16_t port, const std::string& host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(errno_text("socket"));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw TransportError("bad listen address " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd_, 4) != 0) {
    const std::string msg = errno_text("bind/listen");
    ::close(fd_);
    throw TransportError(msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::shared_ptr<Channel> TcpListener::accept(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  const int r = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (r == 0) throw TimeoutError("no peer connected within " + std::to_string(timeout.count()) + " ms");
  if (r < 0) throw TransportError(errno_text("poll"));
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throw TransportError(errno_text("accept"));
  return std::make_shared<TcpChannel>(fd);
}

}  // namespace ariann
