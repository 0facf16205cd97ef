#pragma once

// Shamir t-of-n secret sharing over a prime field.

#include "ppa/bigint.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ppa::shamir {

struct FieldParams {
    BigInt prime;
};

struct Share {
    std::uint64_t index = 0; // evaluation point, >= 1
    BigInt value;            // poly(index) mod prime
    std::uint64_t tag = 0;   // epoch the share belongs to

    friend bool operator==(const Share&, const Share&) = default;
};

/// Default field: the 256-bit prime 2^256 - 189.
FieldParams setup();

/// Field over a caller-chosen modulus. Rejects composites.
FieldParams setup_with_prime(const BigInt& prime);

/// secret + a_1 x + ... + a_{t-1} x^{t-1} over the field.
class Polynomial {
public:
    Polynomial(FieldParams field, std::vector<BigInt> coefficients);

    /// Fresh polynomial of degree t-1 with the given constant term.
    static Polynomial random(const BigInt& secret, std::size_t threshold, const FieldParams& field,
                             RandomSource& rng);

    BigInt evaluate(std::uint64_t x) const;
    Share share_at(std::uint64_t index, std::uint64_t tag = 0) const;

    const BigInt& secret() const { return coefficients_.front(); }
    std::size_t threshold() const { return coefficients_.size(); }
    const FieldParams& field() const { return field_; }

private:
    FieldParams field_;
    std::vector<BigInt> coefficients_;
};

/// Shares (i, poly(i)) for i = 1..count of a fresh random polynomial.
std::vector<Share> share(std::size_t count, std::size_t threshold, const BigInt& secret,
                         const FieldParams& field, RandomSource& rng, std::uint64_t tag = 0);

/// Same, with the non-constant coefficients a_1..a_{t-1} supplied.
std::vector<Share> share_with_coefficients(std::size_t count, const BigInt& secret,
                                           std::span<const BigInt> coefficients,
                                           const FieldParams& field, std::uint64_t tag = 0);

/// Lagrange interpolation at zero. Requires at least `threshold` shares with
/// distinct indices; interpolates through the first `threshold` of them.
BigInt combine(std::size_t threshold, std::span<const Share> shares, const FieldParams& field);

} // namespace ppa::shamir
