#include "pti/session.hpp"

#include "pti/error.hpp"
#include "pti/ot.hpp"

namespace pti::mpc {

const char* category_name(Category c) {
  switch (c) {
    case Category::kMatMul: return "MatMul";
    case Category::kSoftmax: return "Softmax";
    case Category::kGelu: return "GELU";
    case Category::kLayerNorm: return "LayerNorm";
    case Category::kEleMul: return "EleMul";
    case Category::kTruncation: return "Truncation";
    case Category::kOther: return "Other";
  }
  return "Unknown";
}

CategoryCost& CategoryCost::operator+=(const CategoryCost& o) {
  bytes_c2s += o.bytes_c2s;
  bytes_s2c += o.bytes_s2c;
  rounds += o.rounds;
  seconds += o.seconds;
  return *this;
}

CategoryCost CostLedger::total() const {
  CategoryCost t;
  for (const auto& c : operators) t += c;
  return t;
}

namespace {
constexpr std::uint64_t kStreamLocal = 0x6c6f63616c;
constexpr std::uint64_t kStreamHe = 0x686520656e63;
constexpr std::uint64_t kStreamKey = 0x6b657973656564;
}  // namespace

Session::Session(int party, std::unique_ptr<Channel> channel, SessionOptions opts)
    : party_(party),
      channel_(std::move(channel)),
      opts_(opts),
      prg_(opts.seed, kStreamLocal + static_cast<std::uint64_t>(party)),
      he_prg_(opts.seed, kStreamHe + static_cast<std::uint64_t>(party)) {
  if (party != 0 && party != 1) throw ConfigError("party must be 0 or 1");
  if (!channel_) throw ConfigError("session needs a channel");
  if (opts_.backend == Backend::kIdeal) ledger_.insecure = true;
}

Session::~Session() = default;

void Session::close() {
  if (channel_) channel_->close();
}

const he::BfvContext& Session::he() {
  if (!he_) he_ = std::make_unique<he::BfvContext>(he::BfvParams::make(opts_.poly_degree, opts_.fp.ell));
  return *he_;
}

const he::SecretKey& Session::secret_key() {
  if (!is_client()) throw ConfigError("only the client holds the secret key");
  if (!sk_) {
    Prg seeder(opts_.seed, kStreamKey);
    sk_ = std::make_unique<he::SecretKey>(he::keygen(he(), seeder.next_u64()));
  }
  return *sk_;
}

void Session::setup_ot() {
  if (ot_sender_ && ot_receiver_) return;
  // The instance where the client sends is created first on both sides.
  if (is_client()) {
    ot_sender_ = OtExtension::make_sender(*this);
    ot_receiver_ = OtExtension::make_receiver(*this);
  } else {
    ot_receiver_ = OtExtension::make_receiver(*this);
    ot_sender_ = OtExtension::make_sender(*this);
  }
}

OtExtension& Session::ot_sender() {
  setup_ot();
  return *ot_sender_;
}

OtExtension& Session::ot_receiver() {
  setup_ot();
  return *ot_receiver_;
}

Category Session::fallback_category(Tag tag) const {
  switch (tag) {
    case Tag::kMatmul: return Category::kMatMul;
    case Tag::kElemul: return Category::kEleMul;
    case Tag::kTrunc: return Category::kTruncation;
    default: return Category::kOther;
  }
}

void Session::account(Tag tag, std::size_t bytes, bool sent) {
  const bool c2s = (party_ == 0) == sent;
  const Category outer = scopes_.empty() ? fallback_category(tag) : scopes_.front();
  const Category inner = scopes_.empty() ? fallback_category(tag) : scopes_.back();
  const bool new_round = sent && last_was_recv_;
  for (auto* cost : {&ledger_.operators[static_cast<std::size_t>(outer)],
                     &ledger_.primitives[static_cast<std::size_t>(inner)]}) {
    (c2s ? cost->bytes_c2s : cost->bytes_s2c) += bytes;
    if (new_round) ++cost->rounds;
  }
  if (new_round) ++ledger_.rounds;
  last_was_recv_ = !sent;
  ledger_.bytes_by_tag[static_cast<std::size_t>(tag)] += bytes;
  ++message_index_;
}

void Session::send(Tag tag, std::span<const std::uint8_t> payload) {
  channel_->send_frame(tag, payload);
  account(tag, kFrameHeaderBytes + payload.size(), true);
}

std::vector<std::uint8_t> Session::recv(Tag expected) {
  Frame f = channel_->recv_frame();
  if (f.tag != expected) {
    throw DesyncError(std::string("expected ") + tag_name(expected) + " frame, got " + tag_name(f.tag) +
                      " at message " + std::to_string(message_index_) + ", round " +
                      std::to_string(ledger_.rounds));
  }
  account(f.tag, kFrameHeaderBytes + f.payload.size(), false);
  return std::move(f.payload);
}

Session::Scope::Scope(Session& s, Category cat) : s_(s) {
  const auto now = Clock::now();
  if (s_.scopes_.empty()) {
    s_.outer_start_ = now;
  } else {
    const double dt = std::chrono::duration<double>(now - s_.inner_mark_).count();
    s_.ledger_.primitives[static_cast<std::size_t>(s_.scopes_.back())].seconds += dt;
  }
  s_.inner_mark_ = now;
  s_.scopes_.push_back(cat);
}

Session::Scope::~Scope() {
  const auto now = Clock::now();
  const Category cat = s_.scopes_.back();
  s_.ledger_.primitives[static_cast<std::size_t>(cat)].seconds +=
      std::chrono::duration<double>(now - s_.inner_mark_).count();
  s_.inner_mark_ = now;
  s_.scopes_.pop_back();
  if (s_.scopes_.empty()) {
    s_.ledger_.operators[static_cast<std::size_t>(cat)].seconds +=
        std::chrono::duration<double>(now - s_.outer_start_).count();
  }
}

}  // namespace pti::mpc
