#!/usr/bin/env python3
"""Regenerates tests/data/prg_vectors.txt with an independent AES (pyca/cryptography).

Each line: <seed hex> <out_blocks> <expansion hex>
Seed and blocks are written as their 16 raw bytes, low byte first.
"""
import random
import sys

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes


def fixed_key(i):
    return bytes(16 * i + j for j in range(16))


def aes(key, block):
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def expand(seed, blocks):
    out = b""
    for i in range(blocks):
        out += bytes(a ^ b for a, b in zip(aes(fixed_key(i), seed), seed))
    return out


def main(path):
    rng = random.Random(20201)
    seeds = [bytes(16), bytes([0xff] * 15 + [0x7f]), bytes(range(16))[:15] + b"\x00"]
    for _ in range(13):
        s = bytearray(rng.getrandbits(8) for _ in range(16))
        s[15] &= 0x7F  # seeds carry 127 bits
        seeds.append(bytes(s))
    with open(path, "w") as f:
        f.write("# seed out_blocks expansion (hex, byte order as stored)\n")
        for s in seeds:
            for blocks in (2, 3, 4):
                f.write(f"{s.hex()} {blocks} {expand(s, blocks).hex()}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/prg_vectors.txt")
