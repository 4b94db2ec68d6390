#include <cstring>

#include "ariann/prg.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define ARIANN_HAVE_X86 1
#endif

namespace ariann {
namespace {

constexpr std::array<std::uint8_t, 256> kSbox = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16};

constexpr std::uint8_t xtime(std::uint8_t x) {
  return static_cast<std::uint8_t>((x << 1) ^ ((x & 0x80) ? 0x1b : 0x00));
}

void store_block(const Block& b, std::uint8_t* out) {
  std::memcpy(out, &b.lo, 8);
  std::memcpy(out + 8, &b.hi, 8);
}

Block load_block(const std::uint8_t* in) {
  Block b;
  std::memcpy(&b.lo, in, 8);
  std::memcpy(&b.hi, in + 8, 8);
  return b;
}

#ifdef ARIANN_HAVE_X86
__attribute__((target("aes,sse2"))) void encrypt_ni(const std::uint8_t* rk,
                                                    Block* blocks,
                                                    std::size_t count) {
  __m128i keys[11];
  for (int r = 0; r < 11; ++r) {
    keys[r] = _mm_load_si128(reinterpret_cast<const __m128i*>(rk + 16 * r));
  }
  std::size_t i = 0;
  // Four independent blocks in flight hide the aesenc latency.
  for (; i + 4 <= count; i += 4) {
    __m128i s0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(blocks + i));
    __m128i s1 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(blocks + i + 1));
    __m128i s2 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(blocks + i + 2));
    __m128i s3 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(blocks + i + 3));
    s0 = _mm_xor_si128(s0, keys[0]);
    s1 = _mm_xor_si128(s1, keys[0]);
    s2 = _mm_xor_si128(s2, keys[0]);
    s3 = _mm_xor_si128(s3, keys[0]);
    for (int r = 1; r < 10; ++r) {
      s0 = _mm_aesenc_si128(s0, keys[r]);
      s1 = _mm_aesenc_si128(s1, keys[r]);
      s2 = _mm_aesenc_si128(s2, keys[r]);
      s3 = _mm_aesenc_si128(s3, keys[r]);
    }
    _mm_storeu_si128(reinterpret_cast<__m128i*>(blocks + i), _mm_aesenclast_si128(s0, keys[10]));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(blocks + i + 1), _mm_aesenclast_si128(s1, keys[10]));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(blocks + i + 2), _mm_aesenclast_si128(s2, keys[10]));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(blocks + i + 3), _mm_aesenclast_si128(s3, keys[10]));
  }
  for (; i < count; ++i) {
    __m128i s = _mm_loadu_si128(reinterpret_cast<const __m128i*>(blocks + i));
    s = _mm_xor_si128(s, keys[0]);
    for (int r = 1; r < 10; ++r) s = _mm_aesenc_si128(s, keys[r]);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(blocks + i), _mm_aesenclast_si128(s, keys[10]));
  }
}
#endif

bool detect_hardware() {
#ifdef ARIANN_HAVE_X86
  __builtin_cpu_init();
  return __builtin_cpu_supports("aes") != 0;
#else
  return false;
#endif
}

const bool kHardware = detect_hardware();

}  // namespace

Aes128::Aes128(const std::array<std::uint8_t, 16>& key) {
  std::memcpy(round_keys_.data(), key.data(), 16);
  std::uint8_t rcon = 0x01;
  for (int i = 4; i < 44; ++i) {
    std::uint8_t t[4];
    std::memcpy(t, round_keys_.data() + 4 * (i - 1), 4);
    if (i % 4 == 0) {
      const std::uint8_t first = t[0];
      t[0] = static_cast<std::uint8_t>(kSbox[t[1]] ^ rcon);
      t[1] = kSbox[t[2]];
      t[2] = kSbox[t[3]];
      t[3] = kSbox[first];
      rcon = xtime(rcon);
    }
    for (int j = 0; j < 4; ++j) {
      round_keys_[4 * i + j] =
          static_cast<std::uint8_t>(round_keys_[4 * (i - 4) + j] ^ t[j]);
    }
  }
}

bool Aes128::hardware_available() { return kHardware; }

Block Aes128::encrypt_portable(const Block& in) const {
  std::uint8_t s[16];
  store_block(in, s);
  for (int j = 0; j < 16; ++j) s[j] ^= round_keys_[j];
  for (int round = 1; round <= 10; ++round) {
    for (auto& b : s) b = kSbox[b];
    // ShiftRows on the column-major state.
    std::uint8_t t[16];
    for (int c = 0; c < 4; ++c)
      for (int r = 0; r < 4; ++r) t[4 * c + r] = s[4 * ((c + r) % 4) + r];
    if (round != 10) {
      for (int c = 0; c < 4; ++c) {
        std::uint8_t* col = t + 4 * c;
        const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
        const std::uint8_t all = a0 ^ a1 ^ a2 ^ a3;
        col[0] = static_cast<std::uint8_t>(a0 ^ all ^ xtime(a0 ^ a1));
        col[1] = static_cast<std::uint8_t>(a1 ^ all ^ xtime(a1 ^ a2));
        col[2] = static_cast<std::uint8_t>(a2 ^ all ^ xtime(a2 ^ a3));
        col[3] = static_cast<std::uint8_t>(a3 ^ all ^ xtime(a3 ^ a0));
      }
    }
    for (int j = 0; j < 16; ++j) s[j] = t[j] ^ round_keys_[16 * round + j];
  }
  return load_block(s);
}

Block Aes128::encrypt(const Block& in) const {
  Block b = in;
  encrypt_blocks({&b, 1});
  return b;
}

void Aes128::encrypt_blocks(std::span<Block> blocks) const {
#ifdef ARIANN_HAVE_X86
  if (kHardware) {
    encrypt_ni(round_keys_.data(), blocks.data(), blocks.size());
    return;
  }
#endif
  for (auto& b : blocks) b = encrypt_portable(b);
}

}  // namespace ariann
