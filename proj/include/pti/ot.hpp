#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pti/channel.hpp"
#include "pti/prg.hpp"

namespace pti::mpc {

class Session;

/// Chosen-message 1-of-2 OT over ristretto255 (Chou–Orlandi), batched.
/// All messages in a batch must share one length.
void base_ot_send(Session& s, std::span<const std::vector<std::uint8_t>> m0,
                  std::span<const std::vector<std::uint8_t>> m1);
std::vector<std::vector<std::uint8_t>> base_ot_recv(Session& s, std::span<const std::uint8_t> choices,
                                                    std::size_t length);

/// Random-key variants: the sender learns both keys, the receiver the chosen one.
std::vector<std::array<Block, 2>> base_rot_send(Session& s, std::size_t count);
std::vector<Block> base_rot_recv(Session& s, std::span<const std::uint8_t> choices);

/// One direction of IKNP OT extension producing random OTs.
class OtExtension {
 public:
  static constexpr std::size_t kBaseCount = 128;

  /// Runs the 128 base OTs. The extension sender acts as base-OT receiver.
  static std::unique_ptr<OtExtension> make_sender(Session& s);
  static std::unique_ptr<OtExtension> make_receiver(Session& s);

  /// Sender side of `count` random OTs.
  std::vector<std::array<Block, 2>> send(Session& s, Tag tag, std::size_t count);
  /// Receiver side; `choices` holds one bit per byte.
  std::vector<Block> receive(Session& s, Tag tag, std::span<const std::uint8_t> choices);

  std::uint64_t used() const { return counter_; }

 private:
  OtExtension() = default;

  bool sender_ = false;
  Block delta_{};
  std::vector<Prg> column_prg_;  // sender: one per base OT; receiver: pairs (2j, 2j+1)
  std::uint64_t counter_ = 0;
};

/// Correlated OT over Z_{2^width} built on the session's extension instances.
/// Each party may simultaneously send (deltas) and receive (choices).
/// For every sent item the sender's output is -y and the receiver's output is
/// y + choice·delta, so the two outputs are additive shares of choice·delta.
struct CotResult {
  std::vector<std::uint64_t> as_sender;
  std::vector<std::uint64_t> as_receiver;
};
CotResult cot_exchange(Session& s, Tag tag, std::span<const std::uint64_t> deltas,
                       std::span<const std::uint8_t> send_widths, std::span<const std::uint8_t> choices,
                       std::span<const std::uint8_t> recv_widths);

/// 128-row bit-matrix transpose: `in` is 128 rows of ncols/8 bytes, `out` is
/// ncols rows of 16 bytes. ncols must be a multiple of 8.
void transpose_128(const std::uint8_t* in, std::uint8_t* out, std::size_t ncols);

}  // namespace pti::mpc
