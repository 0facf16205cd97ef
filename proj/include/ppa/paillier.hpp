#pragma once

// Paillier additively homomorphic encryption with g = n + 1.
//
//   Enc(m; r) = (1 + m*n) * r^n            mod n^2
//   Dec(c)    = L(c^lambda mod n^2) * mu    mod n,   L(x) = (x - 1) / n
//   Eval(c_i, k_i) = prod c_i^{k_i}         mod n^2  ->  sum k_i*m_i mod n

#include "ppa/bigint.hpp"

#include <span>
#include <string>
#include <vector>

namespace ppa::paillier {

inline constexpr unsigned kMinModulusBits = 16;
inline constexpr unsigned kDefaultModulusBits = 2048;

/// Opaque identity of a key pair: hex of the first 128 bits of SHA-256(n).
using Fingerprint = std::string;

struct Params {
    unsigned modulus_bits = kDefaultModulusBits;
};

struct PublicKey {
    BigInt n;
    BigInt g;
    BigInt n_squared;
    Fingerprint fingerprint;

    /// Rebuilds the derived fields from n alone (g = n + 1).
    static PublicKey from_modulus(const BigInt& n);

    friend bool operator==(const PublicKey& a, const PublicKey& b) { return a.n == b.n && a.g == b.g; }
};

struct SecretKey {
    BigInt lambda;
    BigInt mu;
    BigInt n;
    BigInt n_squared;
    Fingerprint fingerprint;
};

struct KeyPair {
    PublicKey public_key;
    SecretKey secret_key;
};

struct Ciphertext {
    BigInt value;
    Fingerprint key_fingerprint;

    friend bool operator==(const Ciphertext& a, const Ciphertext& b)
    {
        return a.value == b.value && a.key_fingerprint == b.key_fingerprint;
    }
};

Fingerprint fingerprint_of(const BigInt& n);

Params setup(unsigned modulus_bits = kDefaultModulusBits);

/// Fresh key pair with n of exactly params.modulus_bits bits.
KeyPair keygen(const Params& params, RandomSource& rng);

/// Deterministic key pair from caller-chosen primes. Test and demo seam.
KeyPair keygen_from_primes(const BigInt& p, const BigInt& q);

Ciphertext encrypt(const BigInt& plaintext, const PublicKey& pk, RandomSource& rng);

/// Encryption with explicit randomness r in Z*_n.
Ciphertext encrypt_with_nonce(const BigInt& plaintext, const PublicKey& pk, const BigInt& r);

/// prod ciphertexts[i]^coefficients[i] mod n^2.
Ciphertext evaluate(std::span<const Ciphertext> ciphertexts, std::span<const BigInt> coefficients,
                    const PublicKey& pk);

/// Unweighted homomorphic sum; same as evaluate with all-ones coefficients.
Ciphertext add(std::span<const Ciphertext> ciphertexts, const PublicKey& pk);

BigInt decrypt(const Ciphertext& ciphertext, const SecretKey& sk);

/// True iff 0 < value < n^2 and gcd(value, n) = 1.
bool is_valid_ciphertext_value(const BigInt& value, const PublicKey& pk);

} // namespace ppa::paillier
