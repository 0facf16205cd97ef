#include "ppa/bigint.hpp"

#include <openssl/rand.h>

#include <vector>

namespace ppa {

std::string to_hex(const BigInt& value)
{
    if (value < 0) {
        throw Error("to_hex: negative value");
    }
    return value.get_str(16);
}

BigInt from_hex(std::string_view hex)
{
    if (hex.empty()) {
        throw Error("from_hex: empty string");
    }
    for (char c : hex) {
        bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        if (!ok) {
            throw Error("from_hex: invalid character in '" + std::string(hex) + "'");
        }
    }
    return BigInt(std::string(hex), 16);
}

BigInt RandomSource::bits(unsigned bits)
{
    if (bits == 0) {
        return 0;
    }
    std::vector<std::uint8_t> buf((bits + 7) / 8);
    fill(buf);
    unsigned excess = static_cast<unsigned>(buf.size() * 8) - bits;
    buf[0] &= static_cast<std::uint8_t>(0xffu >> excess);

    BigInt out;
    mpz_import(out.get_mpz_t(), buf.size(), 1, 1, 1, 0, buf.data());
    return out;
}

BigInt RandomSource::below(const BigInt& bound)
{
    if (bound <= 0) {
        throw Error("RandomSource::below: bound must be positive");
    }
    auto width = static_cast<unsigned>(mpz_sizeinbase(bound.get_mpz_t(), 2));
    for (;;) {
        BigInt candidate = bits(width);
        if (candidate < bound) {
            return candidate;
        }
    }
}

std::uint64_t RandomSource::next_u64()
{
    std::uint8_t buf[8];
    fill(buf);
    std::uint64_t v = 0;
    for (auto b : buf) {
        v = (v << 8) | b;
    }
    return v;
}

void SecureRandom::fill(std::span<std::uint8_t> out)
{
    if (out.empty()) {
        return;
    }
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
        throw Error("SecureRandom: RAND_bytes failed");
    }
}

void SeededRandom::fill(std::span<std::uint8_t> out)
{
    std::size_t i = 0;
    while (i < out.size()) {
        std::uint64_t word = engine_();
        for (int k = 0; k < 8 && i < out.size(); ++k, ++i) {
            out[i] = static_cast<std::uint8_t>(word >> (8 * k));
        }
    }
}

} // namespace ppa
