#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ariann/errors.hpp"

namespace ariann {

enum class FrameType : std::uint8_t {
  kReveal = 0x01,
  kMaskedShare = 0x02,
  kTripleDelta = 0x03,
  kControl = 0x04,
  kAbort = 0x05,
};

struct Frame {
  FrameType type = FrameType::kControl;
  std::vector<std::uint8_t> payload;
  bool operator==(const Frame&) const = default;
};

// u32 LE length (= payload size + 1) | type byte | payload
std::vector<std::uint8_t> encode_frame(const Frame& f);

// Incremental decoder for a byte stream.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete frame, if buffered. Throws ProtocolError on a bad header.
  std::optional<Frame> next();
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

// Decodes a buffer holding whole frames only; throws on a truncated tail.
std::vector<Frame> decode_frames(std::span<const std::uint8_t> bytes);

std::chrono::milliseconds default_timeout();  // ARIANN_TIMEOUT_MS, default 30 s

// Bidirectional FIFO frame pipe to the peer.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Frame& f) = 0;
  // Throws TimeoutError after `timeout`, TransportError if the peer is gone.
  virtual Frame recv(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

std::pair<std::shared_ptr<Channel>, std::shared_ptr<Channel>> make_local_channel_pair();

// TCP, one connection per session.
std::shared_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port,
                                     std::chrono::milliseconds timeout);

class TcpListener {
 public:
  // port 0 picks a free port.
  explicit TcpListener(std::uint16_t port, const std::string& host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::shared_ptr<Channel> accept(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace ariann
