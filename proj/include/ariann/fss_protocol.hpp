#pragma once

#include "ariann/fss.hpp"
#include "ariann/sharing.hpp"

// Online phase of the FSS primitives: one masked reveal, then local key
// evaluation. Both functions consume their key batch.
namespace ariann {

class Session;

// Shares of 1[y <= 0] in y's ring, precision 0. y is read as a signed value
// of the keys' input width; the answer is wrong with probability about
// |y| / 2^n_bits, when the masked value wraps.
AdditiveShare sign_protocol(Session& s, const AdditiveShare& y, const CmpKeyBatch& keys);

// Shares of 1[y == 0]. Exact as long as |y| < 2^(n_bits - 1).
AdditiveShare equal_zero_protocol(Session& s, const AdditiveShare& y, const EqKeyBatch& keys);

}  // namespace ariann
