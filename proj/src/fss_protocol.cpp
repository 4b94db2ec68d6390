#include "ariann/fss_protocol.hpp"

#include "ariann/session.hpp"

namespace ariann {
namespace {

template <class Batch>
void check_keys(const Session& s, const AdditiveShare& y, const Batch& keys) {
  if (keys.size() != y.size()) {
    throw std::invalid_argument(std::to_string(keys.size()) + " keys for " +
                                std::to_string(y.size()) + " elements");
  }
  if (keys.out_bits() != y.n_bits()) {
    throw std::invalid_argument("key output ring Z_2^" + std::to_string(keys.out_bits()) +
                                " does not match the share ring Z_2^" +
                                std::to_string(y.n_bits()));
  }
  if (y.party() != s.party()) throw std::invalid_argument("share belongs to the other party");
}

}  // namespace

AdditiveShare sign_protocol(Session& s, const AdditiveShare& y, const CmpKeyBatch& keys) {
  check_keys(s, y, keys);
  s.consume(keys.id(), "comparison key batch");
  const auto x = mask_and_reveal(s, y, keys.alpha_shares(), keys.n_bits());
  auto out = eval_cmp_batch(s.party(), keys, x);
  return {s.party(), RingTensor(y.shape(), y.n_bits(), std::move(out)), 0};
}

AdditiveShare equal_zero_protocol(Session& s, const AdditiveShare& y, const EqKeyBatch& keys) {
  check_keys(s, y, keys);
  s.consume(keys.id(), "equality key batch");
  const auto x = mask_and_reveal(s, y, keys.alpha_shares(), keys.n_bits());
  auto out = eval_eq_batch(s.party(), keys, x);
  return {s.party(), RingTensor(y.shape(), y.n_bits(), std::move(out)), 0};
}

}  // namespace ariann
