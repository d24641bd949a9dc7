#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pti/bfv.hpp"
#include "pti/channel.hpp"
#include "pti/fixed_point.hpp"
#include "pti/prg.hpp"

namespace pti::mpc {

class OtExtension;

enum class Backend { kCrypto, kIdeal };

enum class Category : std::uint8_t { kMatMul, kSoftmax, kGelu, kLayerNorm, kEleMul, kTruncation, kOther };
inline constexpr std::size_t kCategoryCount = 7;
const char* category_name(Category c);

struct CategoryCost {
  std::uint64_t bytes_c2s = 0;
  std::uint64_t bytes_s2c = 0;
  std::uint64_t rounds = 0;
  double seconds = 0.0;

  std::uint64_t bytes() const { return bytes_c2s + bytes_s2c; }
  CategoryCost& operator+=(const CategoryCost& o);
};

/// Two attributions of the same traffic. `operators` charges everything to the
/// outermost open scope; `primitives` charges to the innermost one.
struct CostLedger {
  std::array<CategoryCost, kCategoryCount> operators{};
  std::array<CategoryCost, kCategoryCount> primitives{};
  std::array<std::uint64_t, kTagCount> bytes_by_tag{};
  std::uint64_t rounds = 0;
  bool insecure = false;

  CategoryCost total() const;
  const CategoryCost& op(Category c) const { return operators[static_cast<std::size_t>(c)]; }
  const CategoryCost& prim(Category c) const { return primitives[static_cast<std::size_t>(c)]; }
};

struct SessionOptions {
  FixedPointParams fp{};
  std::size_t poly_degree = 8192;
  Backend backend = Backend::kCrypto;
  std::uint64_t seed = 1;
  bool compress = true;
};

/// One party's end of a two-party computation. Party 0 is the client (holds
/// the HE secret key), party 1 the server.
class Session {
 public:
  Session(int party, std::unique_ptr<Channel> channel, SessionOptions opts);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  int party() const { return party_; }
  bool is_client() const { return party_ == 0; }
  const FixedPointParams& fp() const { return opts_.fp; }
  const SessionOptions& options() const { return opts_; }
  Backend backend() const { return opts_.backend; }
  bool compress() const { return opts_.compress; }

  void send(Tag tag, std::span<const std::uint8_t> payload);
  /// Receives the next frame; throws DesyncError if its tag is not `expected`.
  std::vector<std::uint8_t> recv(Tag expected);

  /// Local randomness, private to this party.
  Prg& prg() { return prg_; }

  const he::BfvContext& he();
  /// Client only.
  const he::SecretKey& secret_key();
  Prg& he_prg() { return he_prg_; }

  /// IKNP instance where this party is the OT sender / receiver. Created on
  /// first use; both parties must reach first use at the same message index.
  OtExtension& ot_sender();
  OtExtension& ot_receiver();
  void setup_ot();

  void mark_insecure() { ledger_.insecure = true; }
  const CostLedger& costs() const { return ledger_; }
  void close();

  /// Attributes traffic and time to `cat` while alive.
  class Scope {
   public:
    Scope(Session& s, Category cat);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Session& s_;
  };

 private:
  using Clock = std::chrono::steady_clock;
  void account(Tag tag, std::size_t bytes, bool sent);
  Category fallback_category(Tag tag) const;

  int party_;
  std::unique_ptr<Channel> channel_;
  SessionOptions opts_;
  Prg prg_;
  Prg he_prg_;
  std::unique_ptr<he::BfvContext> he_;
  std::unique_ptr<he::SecretKey> sk_;
  std::unique_ptr<OtExtension> ot_sender_;
  std::unique_ptr<OtExtension> ot_receiver_;
  CostLedger ledger_;
  std::vector<Category> scopes_;
  Clock::time_point outer_start_{};
  Clock::time_point inner_mark_{};
  bool last_was_recv_ = true;
  std::uint64_t message_index_ = 0;
};

}  // namespace pti::mpc
