#include "ppa/paillier.hpp"

#include <openssl/sha.h>

#include <array>

namespace ppa::paillier {

namespace {

constexpr int kPrimalityReps = 40;
constexpr int kPrimeRetries = 64;

unsigned bit_length(const BigInt& v)
{
    return static_cast<unsigned>(mpz_sizeinbase(v.get_mpz_t(), 2));
}

BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod)
{
    BigInt out;
    mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
    return out;
}

// Random prime of exactly `bits` bits with the two top bits set, so the
// product of two such primes has exactly the sum of their widths.
BigInt random_prime(unsigned bits, RandomSource& rng)
{
    for (int attempt = 0; attempt < kPrimeRetries; ++attempt) {
        BigInt candidate = rng.bits(bits);
        mpz_setbit(candidate.get_mpz_t(), bits - 1);
        mpz_setbit(candidate.get_mpz_t(), bits - 2);
        BigInt prime;
        mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
        if (bit_length(prime) == bits) {
            return prime;
        }
    }
    throw Error("paillier: prime generation failed after " + std::to_string(kPrimeRetries) + " attempts");
}

void require_key(const Ciphertext& c, const Fingerprint& fp, const char* what)
{
    if (c.key_fingerprint != fp) {
        throw Error(std::string(what) + ": ciphertext key fingerprint mismatch");
    }
}

} // namespace

Fingerprint fingerprint_of(const BigInt& n)
{
    std::string hex = to_hex(n);
    std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
    SHA256(reinterpret_cast<const unsigned char*>(hex.data()), hex.size(), digest.data());

    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(32);
    for (std::size_t i = 0; i < 16; ++i) {
        out.push_back(kDigits[digest[i] >> 4]);
        out.push_back(kDigits[digest[i] & 0xf]);
    }
    return out;
}

PublicKey PublicKey::from_modulus(const BigInt& n)
{
    if (n < 2) {
        throw Error("paillier: modulus must be at least 2");
    }
    PublicKey pk;
    pk.n = n;
    pk.g = n + 1;
    pk.n_squared = n * n;
    pk.fingerprint = fingerprint_of(n);
    return pk;
}

Params setup(unsigned modulus_bits)
{
    if (modulus_bits < kMinModulusBits) {
        throw Error("paillier: modulus too small (" + std::to_string(modulus_bits) + " bits, minimum "
                    + std::to_string(kMinModulusBits) + ")");
    }
    return Params{modulus_bits};
}

KeyPair keygen_from_primes(const BigInt& p, const BigInt& q)
{
    if (p == q) {
        throw Error("paillier: primes must be distinct");
    }
    if (mpz_probab_prime_p(p.get_mpz_t(), kPrimalityReps) == 0
        || mpz_probab_prime_p(q.get_mpz_t(), kPrimalityReps) == 0) {
        throw Error("paillier: keygen_from_primes given a composite");
    }
    BigInt n = p * q;
    BigInt phi = (p - 1) * (q - 1);
    BigInt g_check;
    mpz_gcd(g_check.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
    if (g_check != 1) {
        throw Error("paillier: gcd(n, (p-1)(q-1)) != 1");
    }

    KeyPair kp;
    kp.public_key = PublicKey::from_modulus(n);

    SecretKey& sk = kp.secret_key;
    sk.n = n;
    sk.n_squared = kp.public_key.n_squared;
    sk.fingerprint = kp.public_key.fingerprint;
    BigInt pm1 = p - 1;
    BigInt qm1 = q - 1;
    mpz_lcm(sk.lambda.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());

    // mu = L(g^lambda mod n^2)^{-1} mod n
    BigInt u = powm(kp.public_key.g, sk.lambda, sk.n_squared);
    BigInt l = (u - 1) / n;
    if (mpz_invert(sk.mu.get_mpz_t(), l.get_mpz_t(), n.get_mpz_t()) == 0) {
        throw Error("paillier: L(g^lambda) is not invertible mod n");
    }
    return kp;
}

KeyPair keygen(const Params& params, RandomSource& rng)
{
    setup(params.modulus_bits);
    unsigned p_bits = (params.modulus_bits + 1) / 2;
    unsigned q_bits = params.modulus_bits / 2;
    for (int attempt = 0; attempt < kPrimeRetries; ++attempt) {
        BigInt p = random_prime(p_bits, rng);
        BigInt q = random_prime(q_bits, rng);
        if (p == q) {
            continue;
        }
        BigInt n = p * q;
        if (bit_length(n) != params.modulus_bits) {
            continue;
        }
        return keygen_from_primes(p, q);
    }
    throw Error("paillier: keygen failed after bounded retries");
}

bool is_valid_ciphertext_value(const BigInt& value, const PublicKey& pk)
{
    if (value <= 0 || value >= pk.n_squared) {
        return false;
    }
    BigInt g;
    mpz_gcd(g.get_mpz_t(), value.get_mpz_t(), pk.n.get_mpz_t());
    return g == 1;
}

Ciphertext encrypt_with_nonce(const BigInt& plaintext, const PublicKey& pk, const BigInt& r)
{
    if (plaintext < 0 || plaintext >= pk.n) {
        throw Error("paillier: plaintext out of range [0, n)");
    }
    BigInt gcd;
    mpz_gcd(gcd.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t());
    if (r <= 0 || r >= pk.n || gcd != 1) {
        throw Error("paillier: nonce must lie in Z*_n");
    }
    // g^m = (1 + n)^m = 1 + m*n  (mod n^2)
    BigInt gm = (1 + plaintext * pk.n) % pk.n_squared;
    BigInt rn = powm(r, pk.n, pk.n_squared);
    BigInt c = (gm * rn) % pk.n_squared;
    return Ciphertext{std::move(c), pk.fingerprint};
}

Ciphertext encrypt(const BigInt& plaintext, const PublicKey& pk, RandomSource& rng)
{
    if (plaintext < 0 || plaintext >= pk.n) {
        throw Error("paillier: plaintext out of range [0, n)");
    }
    for (;;) {
        BigInt r = rng.below(pk.n);
        if (r == 0) {
            continue;
        }
        BigInt gcd;
        mpz_gcd(gcd.get_mpz_t(), r.get_mpz_t(), pk.n.get_mpz_t());
        if (gcd == 1) {
            return encrypt_with_nonce(plaintext, pk, r);
        }
    }
}

Ciphertext evaluate(std::span<const Ciphertext> ciphertexts, std::span<const BigInt> coefficients,
                    const PublicKey& pk)
{
    if (ciphertexts.empty()) {
        throw Error("paillier::evaluate: empty input");
    }
    if (ciphertexts.size() != coefficients.size()) {
        throw Error("paillier::evaluate: ciphertext/coefficient length mismatch");
    }
    BigInt acc = 1;
    for (std::size_t i = 0; i < ciphertexts.size(); ++i) {
        const Ciphertext& c = ciphertexts[i];
        const BigInt& k = coefficients[i];
        require_key(c, pk.fingerprint, "paillier::evaluate");
        if (k < 0 || k >= pk.n) {
            throw Error("paillier::evaluate: coefficient out of range [0, n)");
        }
        if (k == 1) {
            acc = (acc * c.value) % pk.n_squared;
        } else if (k != 0) {
            acc = (acc * powm(c.value, k, pk.n_squared)) % pk.n_squared;
        }
    }
    return Ciphertext{std::move(acc), pk.fingerprint};
}

Ciphertext add(std::span<const Ciphertext> ciphertexts, const PublicKey& pk)
{
    if (ciphertexts.empty()) {
        throw Error("paillier::add: empty input");
    }
    BigInt acc = 1;
    for (const Ciphertext& c : ciphertexts) {
        require_key(c, pk.fingerprint, "paillier::add");
        acc = (acc * c.value) % pk.n_squared;
    }
    return Ciphertext{std::move(acc), pk.fingerprint};
}

BigInt decrypt(const Ciphertext& ciphertext, const SecretKey& sk)
{
    require_key(ciphertext, sk.fingerprint, "paillier::decrypt");
    const BigInt& c = ciphertext.value;
    if (c <= 0 || c >= sk.n_squared) {
        throw Error("paillier::decrypt: ciphertext out of range (0, n^2)");
    }
    BigInt gcd;
    mpz_gcd(gcd.get_mpz_t(), c.get_mpz_t(), sk.n.get_mpz_t());
    if (gcd != 1) {
        throw Error("paillier::decrypt: ciphertext not coprime to n");
    }
    BigInt u = powm(c, sk.lambda, sk.n_squared);
    BigInt l = (u - 1) / sk.n;
    return (l * sk.mu) % sk.n;
}

} // namespace ppa::paillier
