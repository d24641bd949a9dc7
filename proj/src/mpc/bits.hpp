#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "pti/error.hpp"

namespace pti::mpc {

class BitWriter {
 public:
  void put(std::uint64_t value, int width) {
    for (int done = 0; done < width;) {
      if (used_ == 0) bytes_.push_back(0);
      const int take = std::min(8 - used_, width - done);
      const auto chunk = static_cast<std::uint8_t>((value >> done) & ((1u << take) - 1));
      bytes_.back() |= static_cast<std::uint8_t>(chunk << used_);
      used_ = (used_ + take) % 8;
      done += take;
    }
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  int used_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint64_t get(int width) {
    std::uint64_t v = 0;
    for (int done = 0; done < width;) {
      if (pos_ / 8 >= bytes_.size()) throw DesyncError("bit-packed payload too short");
      const int used = static_cast<int>(pos_ % 8);
      const int take = std::min(8 - used, width - done);
      const std::uint64_t chunk = (bytes_[pos_ / 8] >> used) & ((1u << take) - 1);
      v |= chunk << done;
      pos_ += static_cast<std::size_t>(take);
      done += take;
    }
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> pack_values(std::span<const std::uint64_t> values, int width) {
  BitWriter w;
  for (auto v : values) w.put(v, width);
  return std::move(w.bytes());
}

inline std::vector<std::uint64_t> unpack_values(std::span<const std::uint8_t> bytes, std::size_t count, int width) {
  if (bytes.size() != (count * static_cast<std::size_t>(width) + 7) / 8) {
    throw DesyncError("payload size does not match expected element count");
  }
  BitReader r(bytes);
  std::vector<std::uint64_t> out(count);
  for (auto& v : out) v = r.get(width);
  return out;
}

inline std::uint64_t low_bits(std::uint64_t v, int width) {
  return width >= 64 ? v : v & ((std::uint64_t{1} << width) - 1);
}

}  // namespace pti::mpc
