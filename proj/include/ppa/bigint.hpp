#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ppa {

using BigInt = mpz_class;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string to_hex(const BigInt& value);
BigInt from_hex(std::string_view hex);

/// Source of uniformly random bytes. Implementations decide whether the
/// stream is cryptographic or reproducible; the integer helpers below are
/// shared.
class RandomSource {
public:
    virtual ~RandomSource() = default;

    virtual void fill(std::span<std::uint8_t> out) = 0;

    /// Uniform integer with exactly `bits` random bits (top bit not forced).
    BigInt bits(unsigned bits);

    /// Uniform integer in [0, bound). Rejection sampling, bound > 0.
    BigInt below(const BigInt& bound);

    std::uint64_t next_u64();
};

/// OpenSSL-backed CSPRNG. Used for keys and shares outside of simulation.
class SecureRandom final : public RandomSource {
public:
    void fill(std::span<std::uint8_t> out) override;
};

/// Reproducible stream for simulations and tests. Not for production keys.
class SeededRandom final : public RandomSource {
public:
    explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}

    void fill(std::span<std::uint8_t> out) override;

private:
    std::mt19937_64 engine_;
};

} // namespace ppa
