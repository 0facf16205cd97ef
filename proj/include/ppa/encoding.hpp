#pragma once

// Fixed-point mapping between real model parameters and Paillier plaintexts.
// Negative values live in the upper half of Z_n, so homomorphic addition
// matches real addition as long as the accumulated magnitude stays below n/2.

#include "ppa/bigint.hpp"
#include "ppa/paillier.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ppa::encoding {

using ModelVector = std::vector<double>;

struct Config {
    std::uint64_t scale = 1'000'000;
    std::uint64_t max_summands = 1024;
    double max_abs_value = 1e3;
};

/// Throws unless 2 * max_summands * max_abs_value * scale < n.
void validate(const Config& cfg, const BigInt& n);

BigInt encode(double x, const Config& cfg, const BigInt& n);

/// Signed value p (upper half negative) divided by scale * divisor.
double decode(const BigInt& p, std::uint64_t divisor, const Config& cfg, const BigInt& n);

/// Clamps every coordinate into [-max_abs_value, max_abs_value]; returns the
/// number of coordinates changed. Non-finite values become 0.
std::size_t clamp(ModelVector& values, const Config& cfg);

/// Clamps (with a warning), encodes and encrypts coordinate-wise.
std::vector<paillier::Ciphertext> encrypt_vector(const ModelVector& values, const paillier::PublicKey& pk,
                                                 const Config& cfg, RandomSource& rng);

ModelVector decrypt_vector(std::span<const paillier::Ciphertext> ciphertexts, const paillier::SecretKey& sk,
                           std::uint64_t divisor, const Config& cfg);

/// Coordinate-wise homomorphic sum of equally long ciphertext vectors.
std::vector<paillier::Ciphertext> add_vectors(std::span<const std::vector<paillier::Ciphertext>> vectors,
                                              const paillier::PublicKey& pk);

} // namespace ppa::encoding
