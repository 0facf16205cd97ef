#include "ppa/encoding.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <string>

namespace ppa::encoding {

void validate(const Config& cfg, const BigInt& n)
{
    if (cfg.scale == 0 || cfg.max_summands == 0 || !(cfg.max_abs_value > 0)) {
        throw Error("encoding: scale, max_summands and max_abs_value must be positive");
    }
    mpf_class budget(cfg.max_abs_value, 128);
    budget *= 2;
    budget *= static_cast<unsigned long>(cfg.max_summands);
    budget *= static_cast<unsigned long>(cfg.scale);
    mpf_class nf(n, 128);
    if (!(budget < nf)) {
        throw Error("encoding: 2 * max_summands * max_abs_value * scale must be below the modulus");
    }
}

BigInt encode(double x, const Config& cfg, const BigInt& n)
{
    if (!std::isfinite(x) || std::fabs(x) > cfg.max_abs_value) {
        throw Error("encoding: value " + std::to_string(x) + " outside [-max_abs_value, max_abs_value]");
    }
    BigInt scaled(std::nearbyint(x * static_cast<double>(cfg.scale)));
    if (scaled < 0) {
        scaled += n;
    }
    if (scaled < 0 || scaled >= n) {
        throw Error("encoding: scaled value does not fit the modulus");
    }
    return scaled;
}

double decode(const BigInt& p, std::uint64_t divisor, const Config& cfg, const BigInt& n)
{
    if (divisor == 0) {
        throw Error("encoding: divisor must be at least 1");
    }
    if (p < 0 || p >= n) {
        throw Error("encoding: plaintext outside [0, n)");
    }
    // p >= n/2 over the reals; n is odd, so that is p > floor(n/2).
    BigInt half = n / 2;
    BigInt signed_value = p > half ? BigInt(p - n) : p;
    return signed_value.get_d() / (static_cast<double>(cfg.scale) * static_cast<double>(divisor));
}

std::size_t clamp(ModelVector& values, const Config& cfg)
{
    std::size_t changed = 0;
    for (double& v : values) {
        if (!std::isfinite(v)) {
            v = 0.0;
            ++changed;
        } else if (std::fabs(v) > cfg.max_abs_value) {
            v = std::copysign(cfg.max_abs_value, v);
            ++changed;
        }
    }
    return changed;
}

std::vector<paillier::Ciphertext> encrypt_vector(const ModelVector& values, const paillier::PublicKey& pk,
                                                 const Config& cfg, RandomSource& rng)
{
    validate(cfg, pk.n);
    ModelVector clamped = values;
    if (std::size_t changed = clamp(clamped, cfg); changed > 0) {
        spdlog::warn("encoding: clamped {} of {} parameters to +/-{}", changed, clamped.size(), cfg.max_abs_value);
    }
    std::vector<paillier::Ciphertext> out;
    out.reserve(clamped.size());
    for (std::size_t i = 0; i < clamped.size(); ++i) {
        try {
            out.push_back(paillier::encrypt(encode(clamped[i], cfg, pk.n), pk, rng));
        } catch (const Error& e) {
            throw Error("encrypt_vector: coordinate " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

ModelVector decrypt_vector(std::span<const paillier::Ciphertext> ciphertexts, const paillier::SecretKey& sk,
                           std::uint64_t divisor, const Config& cfg)
{
    ModelVector out;
    out.reserve(ciphertexts.size());
    for (std::size_t i = 0; i < ciphertexts.size(); ++i) {
        try {
            out.push_back(decode(paillier::decrypt(ciphertexts[i], sk), divisor, cfg, sk.n));
        } catch (const Error& e) {
            throw Error("decrypt_vector: coordinate " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

std::vector<paillier::Ciphertext> add_vectors(std::span<const std::vector<paillier::Ciphertext>> vectors,
                                              const paillier::PublicKey& pk)
{
    if (vectors.empty()) {
        throw Error("add_vectors: no input vectors");
    }
    const std::size_t len = vectors.front().size();
    for (const auto& v : vectors) {
        if (v.size() != len) {
            throw Error("add_vectors: vector length mismatch");
        }
    }
    std::vector<paillier::Ciphertext> out;
    out.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
        BigInt acc = 1;
        for (const auto& v : vectors) {
            if (v[i].key_fingerprint != pk.fingerprint) {
                throw Error("add_vectors: ciphertext key fingerprint mismatch");
            }
            acc *= v[i].value;
            acc %= pk.n_squared;
        }
        out.push_back(paillier::Ciphertext{std::move(acc), pk.fingerprint});
    }
    return out;
}

} // namespace ppa::encoding
