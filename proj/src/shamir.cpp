#include "ppa/shamir.hpp"

#include <unordered_set>

namespace ppa::shamir {

namespace {

constexpr int kPrimalityReps = 40;

void check_secret(const BigInt& secret, const FieldParams& field)
{
    if (secret < 0 || secret >= field.prime) {
        throw Error("shamir: secret outside the field");
    }
}

void check_counts(std::size_t count, std::size_t threshold, const FieldParams& field)
{
    if (threshold < 1) {
        throw Error("shamir: threshold must be at least 1");
    }
    if (threshold > count) {
        throw Error("shamir: threshold " + std::to_string(threshold) + " exceeds share count "
                    + std::to_string(count));
    }
    if (BigInt(static_cast<unsigned long>(count)) >= field.prime) {
        throw Error("shamir: share count must be below the field prime");
    }
}

} // namespace

FieldParams setup()
{
    BigInt p = 1;
    p <<= 256;
    p -= 189;
    return FieldParams{p};
}

FieldParams setup_with_prime(const BigInt& prime)
{
    if (prime < 2 || mpz_probab_prime_p(prime.get_mpz_t(), kPrimalityReps) == 0) {
        throw Error("shamir: field modulus " + prime.get_str() + " is not prime");
    }
    return FieldParams{prime};
}

Polynomial::Polynomial(FieldParams field, std::vector<BigInt> coefficients)
    : field_(std::move(field)), coefficients_(std::move(coefficients))
{
    if (coefficients_.empty()) {
        throw Error("shamir: polynomial needs a constant term");
    }
    for (const auto& c : coefficients_) {
        if (c < 0 || c >= field_.prime) {
            throw Error("shamir: coefficient outside the field");
        }
    }
}

Polynomial Polynomial::random(const BigInt& secret, std::size_t threshold, const FieldParams& field,
                              RandomSource& rng)
{
    check_secret(secret, field);
    if (threshold < 1) {
        throw Error("shamir: threshold must be at least 1");
    }
    std::vector<BigInt> coeffs;
    coeffs.reserve(threshold);
    coeffs.push_back(secret);
    for (std::size_t j = 1; j < threshold; ++j) {
        coeffs.push_back(rng.below(field.prime));
    }
    return Polynomial(field, std::move(coeffs));
}

BigInt Polynomial::evaluate(std::uint64_t x) const
{
    BigInt xv(static_cast<unsigned long>(x));
    BigInt acc = 0;
    for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) {
        acc = (acc * xv + *it) % field_.prime;
    }
    return acc;
}

Share Polynomial::share_at(std::uint64_t index, std::uint64_t tag) const
{
    if (index == 0) {
        throw Error("shamir: share index 0 would reveal the secret");
    }
    if (BigInt(static_cast<unsigned long>(index)) >= field_.prime) {
        throw Error("shamir: share index must be below the field prime");
    }
    return Share{index, evaluate(index), tag};
}

std::vector<Share> share(std::size_t count, std::size_t threshold, const BigInt& secret,
                         const FieldParams& field, RandomSource& rng, std::uint64_t tag)
{
    check_counts(count, threshold, field);
    Polynomial poly = Polynomial::random(secret, threshold, field, rng);
    std::vector<Share> out;
    out.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) {
        out.push_back(poly.share_at(i, tag));
    }
    return out;
}

std::vector<Share> share_with_coefficients(std::size_t count, const BigInt& secret,
                                           std::span<const BigInt> coefficients,
                                           const FieldParams& field, std::uint64_t tag)
{
    check_secret(secret, field);
    check_counts(count, coefficients.size() + 1, field);
    std::vector<BigInt> coeffs;
    coeffs.reserve(coefficients.size() + 1);
    coeffs.push_back(secret);
    coeffs.insert(coeffs.end(), coefficients.begin(), coefficients.end());
    Polynomial poly(field, std::move(coeffs));
    std::vector<Share> out;
    out.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) {
        out.push_back(poly.share_at(i, tag));
    }
    return out;
}

BigInt combine(std::size_t threshold, std::span<const Share> shares, const FieldParams& field)
{
    if (threshold < 1) {
        throw Error("shamir: threshold must be at least 1");
    }
    std::unordered_set<std::uint64_t> seen;
    for (const Share& s : shares) {
        if (s.index == 0 || BigInt(static_cast<unsigned long>(s.index)) >= field.prime) {
            throw Error("shamir: share index out of range");
        }
        if (s.value < 0 || s.value >= field.prime) {
            throw Error("shamir: share value outside the field");
        }
        if (!seen.insert(s.index).second) {
            throw Error("shamir: duplicate share index " + std::to_string(s.index));
        }
    }
    if (shares.size() < threshold) {
        throw Error("shamir: insufficient shares (" + std::to_string(shares.size()) + " of "
                    + std::to_string(threshold) + ")");
    }

    const BigInt& p = field.prime;
    auto used = shares.first(threshold);
    BigInt secret = 0;
    for (std::size_t j = 0; j < used.size(); ++j) {
        // basis_j(0) = prod_{k != j} x_k / (x_k - x_j)
        BigInt num = 1;
        BigInt den = 1;
        BigInt xj(static_cast<unsigned long>(used[j].index));
        for (std::size_t k = 0; k < used.size(); ++k) {
            if (k == j) {
                continue;
            }
            BigInt xk(static_cast<unsigned long>(used[k].index));
            num = (num * xk) % p;
            BigInt diff = xk - xj;
            mpz_mod(diff.get_mpz_t(), diff.get_mpz_t(), p.get_mpz_t());
            den = (den * diff) % p;
        }
        BigInt inv;
        if (mpz_invert(inv.get_mpz_t(), den.get_mpz_t(), p.get_mpz_t()) == 0) {
            throw Error("shamir: non-invertible Lagrange denominator");
        }
        secret = (secret + used[j].value * num % p * inv) % p;
    }
    return secret;
}

} // namespace ppa::shamir
