#include "bits.hpp"
#include "pti/error.hpp"
#include "pti/primitives.hpp"
#include "pti/session.hpp"

namespace pti::mpc {

ShareTensor ideal_eval(Session& s, Tag tag, const std::vector<const ShareTensor*>& inputs,
                       std::vector<std::size_t> out_shape, const IdealFn& fn) {
  if (s.backend() != Backend::kIdeal) throw ConfigError("ideal evaluation requested on a crypto-backend session");
  s.mark_insecure();
  const auto& p = s.fp();
  const std::size_t n_out = PlainTensor::count(out_shape);
  ShareTensor out(PlainTensor(std::move(out_shape)), s.party(), p);

  std::size_t total = 0;
  for (const auto* in : inputs) total += in->size();

  if (s.party() == 1) {
    std::vector<std::uint64_t> flat;
    flat.reserve(total);
    for (const auto* in : inputs) flat.insert(flat.end(), in->local.data.begin(), in->local.data.end());
    s.send(tag, pack_values(flat, p.ell));
    const auto shares = unpack_values(s.recv(tag), n_out, p.ell);
    std::copy(shares.begin(), shares.end(), out.local.data.begin());
    return out;
  }

  const auto peer = unpack_values(s.recv(tag), total, p.ell);
  std::vector<PlainTensor> opened;
  std::size_t off = 0;
  for (const auto* in : inputs) {
    PlainTensor t(in->shape());
    for (std::size_t i = 0; i < in->size(); ++i) t.data[i] = p.add((*in)[i], peer[off + i]);
    off += in->size();
    opened.push_back(std::move(t));
  }
  const auto values = fn(opened);
  if (values.size() != n_out) throw Error(ErrorKind::kInternal, "ideal function returned the wrong element count");
  std::vector<std::uint64_t> theirs(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    out[i] = s.prg().bits(p.ell);
    theirs[i] = p.sub(values[i], out[i]);
  }
  s.send(tag, pack_values(theirs, p.ell));
  return out;
}

}  // namespace pti::mpc
