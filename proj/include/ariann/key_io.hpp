#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ariann/fss.hpp"

// On-disk container for preprocessing material. Field offsets are listed in
// LAYOUT.md.
namespace ariann {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PrepKind : std::uint8_t { kEq = 0, kCmp = 1, kTriple = 2 };

inline constexpr std::uint8_t kKeyFileVersion = 1;
inline constexpr std::size_t kKeyHeaderBytes = 15;

struct KeyBatch {
  PrepKind kind = PrepKind::kCmp;
  int n_bits = 0;
  int out_bits = 0;
  int lambda = kLambda;
  std::uint32_t count = 0;
  // Either party's payload may be absent (a file for one party only).
  std::array<std::optional<std::vector<std::uint8_t>>, 2> payload;

  bool operator==(const KeyBatch&) const = default;
};

std::vector<std::uint8_t> serialize_keys(const KeyBatch& batch);
// Throws FormatError on bad magic, version, truncation or size mismatch.
KeyBatch deserialize_keys(std::span<const std::uint8_t> bytes);

KeyBatch pack_keys(const EqKeyBatch* k0, const EqKeyBatch* k1);
KeyBatch pack_keys(const CmpKeyBatch* k0, const CmpKeyBatch* k1);
EqKeyBatch unpack_eq(const KeyBatch& batch, int party);
CmpKeyBatch unpack_cmp(const KeyBatch& batch, int party);

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes(const std::string& path);

}  // namespace ariann
