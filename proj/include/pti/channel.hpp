#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pti::mpc {

/// Operator tag carried in every frame; byte counters are keyed by it.
enum class Tag : std::uint8_t {
  kMatmul = 1,
  kElemul,
  kOt,
  kTrunc,
  kRelu,
  kMax,
  kExp,
  kRecip,
  kRsqrt,
  kTanh,
  kControl,
};
inline constexpr std::size_t kTagCount = 12;

const char* tag_name(Tag tag);

struct Frame {
  Tag tag = Tag::kControl;
  std::vector<std::uint8_t> payload;
};

/// Size of the [u32 length][u8 tag] frame header.
inline constexpr std::size_t kFrameHeaderBytes = 5;

/// Ordered, reliable duplex message channel. Sends never block on the peer
/// reading (outgoing frames are queued), so both parties may send before
/// receiving within a round.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send_frame(Tag tag, std::span<const std::uint8_t> payload) = 0;
  /// Blocks until a frame arrives; throws TransportError when the peer is gone.
  virtual Frame recv_frame() = 0;
  /// Wakes a peer blocked in recv_frame with a transport error. Queued
  /// outgoing frames may be dropped; destroying the channel flushes them.
  virtual void close() = 0;
};

/// In-process pair of connected channels.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_pipe();

/// Accepts exactly one connection on host:port.
std::unique_ptr<Channel> tcp_listen(const std::string& address);
/// Connects to host:port, retrying until `timeout_ms` elapses.
std::unique_ptr<Channel> tcp_connect(const std::string& address, int timeout_ms = 10000);

}  // namespace pti::mpc
