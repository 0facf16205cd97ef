#include "ppa/shamir.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <vector>

using ppa::BigInt;
namespace ss = ppa::shamir;

namespace {

using u128 = unsigned __int128;

std::uint64_t powmod(std::uint64_t b, std::uint64_t e, std::uint64_t p)
{
    u128 r = 1, x = b % p;
    while (e) {
        if (e & 1) {
            r = r * x % p;
        }
        x = x * x % p;
        e >>= 1;
    }
    return static_cast<std::uint64_t>(r);
}

// Lagrange at zero in 64-bit arithmetic, p prime < 2^63.
std::uint64_t lagrange_at_zero(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pts, std::uint64_t p)
{
    u128 acc = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        u128 num = 1, den = 1;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) {
                continue;
            }
            num = num * (p - pts[j].first % p) % p;
            den = den * ((pts[i].first + p - pts[j].first % p) % p) % p;
        }
        u128 basis = num * powmod(static_cast<std::uint64_t>(den), p - 2, p) % p;
        acc = (acc + basis * pts[i].second) % p;
    }
    return static_cast<std::uint64_t>(acc);
}

// All k-subsets of {0..n-1}.
void subsets(std::size_t n, std::size_t k, std::size_t start, std::vector<std::size_t>& cur,
             std::vector<std::vector<std::size_t>>& out)
{
    if (cur.size() == k) {
        out.push_back(cur);
        return;
    }
    for (std::size_t i = start; i < n; ++i) {
        cur.push_back(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop_back();
    }
}

} // namespace

TEST_CASE("field setup")
{
    auto f = ss::setup();
    CHECK(f.prime == (BigInt(1) << 256) - 189);
    CHECK(mpz_sizeinbase(f.prime.get_mpz_t(), 2) == 256);
    CHECK(ss::setup_with_prime(17).prime == 17);
    CHECK_THROWS_AS(ss::setup_with_prime(15), ppa::Error);
    CHECK_THROWS_AS(ss::setup_with_prime(1), ppa::Error);
}

TEST_CASE("hand vector over GF(17)")
{
    auto f = ss::setup_with_prime(17);
    std::vector<BigInt> a{3};
    auto shares = ss::share_with_coefficients(3, 5, a, f);
    REQUIRE(shares.size() == 3);
    CHECK(shares[0].index == 1);
    CHECK(shares[0].value == 8);
    CHECK(shares[1].index == 2);
    CHECK(shares[1].value == 11);
    CHECK(shares[2].index == 3);
    CHECK(shares[2].value == 14);

    for (auto [i, j] : {std::pair{0, 1}, {0, 2}, {1, 2}, {1, 0}, {2, 0}}) {
        std::vector<ss::Share> pair{shares[i], shares[j]};
        CHECK(ss::combine(2, pair, f) == 5);
    }
    CHECK(ss::combine(2, shares, f) == 5);

    std::vector<ss::Share> lone{shares[0]};
    CHECK_THROWS_WITH_AS(ss::combine(2, lone, f), doctest::Contains("insufficient shares"), ppa::Error);
}

TEST_CASE("share preconditions")
{
    auto f = ss::setup_with_prime(17);
    ppa::SeededRandom rng(1);
    CHECK_THROWS_AS(ss::share(3, 4, 5, f, rng), ppa::Error);
    CHECK_THROWS_AS(ss::share(3, 0, 5, f, rng), ppa::Error);
    CHECK_THROWS_AS(ss::share(3, 2, 17, f, rng), ppa::Error);
    auto constant = ss::share(5, 1, 9, f, rng);
    for (const auto& s : constant) {
        CHECK(s.value == 9);
    }
}

TEST_CASE("combine rejects duplicate and malformed shares")
{
    auto f = ss::setup_with_prime(17);
    std::vector<ss::Share> dup{{1, 8, 0}, {1, 8, 0}};
    CHECK_THROWS_AS(ss::combine(2, dup, f), ppa::Error);
    std::vector<ss::Share> zero{{0, 5, 0}, {1, 8, 0}};
    CHECK_THROWS_AS(ss::combine(2, zero, f), ppa::Error);
    std::vector<ss::Share> big{{1, 17, 0}, {2, 11, 0}};
    CHECK_THROWS_AS(ss::combine(2, big, f), ppa::Error);
}

TEST_CASE("completeness and gate over 2^61-1")
{
    const std::uint64_t p = (std::uint64_t{1} << 61) - 1;
    auto f = ss::setup_with_prime(BigInt(std::to_string(p)));
    ppa::SeededRandom rng(61);
    for (int trial = 0; trial < 40; ++trial) {
        std::size_t n = 1 + rng.next_u64() % 8;
        std::size_t t = 1 + rng.next_u64() % n;
        BigInt secret = rng.below(f.prime);
        auto shares = ss::share(n, t, secret, f, rng, 7);
        for (const auto& s : shares) {
            CHECK(s.tag == 7);
        }
        std::vector<std::vector<std::size_t>> subs;
        std::vector<std::size_t> cur;
        subsets(n, t, 0, cur, subs);
        for (const auto& sub : subs) {
            std::vector<ss::Share> pick;
            std::vector<std::pair<std::uint64_t, std::uint64_t>> pts;
            for (auto i : sub) {
                pick.push_back(shares[i]);
                pts.emplace_back(shares[i].index, shares[i].value.get_ui());
            }
            CHECK(ss::combine(t, pick, f) == secret);
            CHECK(lagrange_at_zero(pts, p) == secret.get_ui());
            if (t > 1) {
                pick.pop_back();
                CHECK_THROWS_AS(ss::combine(t, pick, f), ppa::Error);
            }
        }
    }
}

TEST_CASE("completeness over the default field")
{
    auto f = ss::setup();
    ppa::SecureRandom rng;
    BigInt secret = rng.below(f.prime);
    auto shares = ss::share(12, 5, secret, f, rng);
    std::vector<std::vector<std::size_t>> subs;
    std::vector<std::size_t> cur;
    subsets(12, 5, 0, cur, subs);
    for (std::size_t k = 0; k < subs.size(); k += 7) {
        std::vector<ss::Share> pick;
        for (auto i : subs[k]) {
            pick.push_back(shares[i]);
        }
        CHECK(ss::combine(5, pick, f) == secret);
    }
    std::vector<ss::Share> four(shares.begin(), shares.begin() + 4);
    CHECK_THROWS_AS(ss::combine(5, four, f), ppa::Error);
}

TEST_CASE("hiding over GF(17), t=2")
{
    // Any single share value is consistent with every secret: for each
    // candidate secret exactly one slope produces it.
    for (std::uint64_t index = 1; index < 17; ++index) {
        for (std::uint64_t value = 0; value < 17; ++value) {
            for (std::uint64_t secret = 0; secret < 17; ++secret) {
                int slopes = 0;
                for (std::uint64_t a = 0; a < 17; ++a) {
                    if ((secret + a * index) % 17 == value) {
                        ++slopes;
                        ss::Polynomial poly(ss::setup_with_prime(17), {BigInt(secret), BigInt(a)});
                        CHECK(poly.evaluate(index) == value);
                    }
                }
                CHECK(slopes == 1);
            }
        }
    }
}

TEST_CASE("shares add index-wise")
{
    auto f = ss::setup();
    ppa::SeededRandom rng(5);
    BigInt s1 = rng.below(f.prime), s2 = rng.below(f.prime);
    auto a = ss::share(6, 3, s1, f, rng);
    auto b = ss::share(6, 3, s2, f, rng);
    std::vector<ss::Share> sum;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum.push_back({a[i].index, (a[i].value + b[i].value) % f.prime, 0});
    }
    CHECK(ss::combine(3, sum, f) == (s1 + s2) % f.prime);
}

TEST_CASE("polynomial issues shares lazily")
{
    auto f = ss::setup_with_prime(17);
    ss::Polynomial poly(f, {5, 3});
    CHECK(poly.threshold() == 2);
    CHECK(poly.secret() == 5);
    CHECK(poly.share_at(3, 4) == ss::Share{3, 14, 4});
    CHECK(poly.evaluate(0) == 5);
    CHECK_THROWS_AS(poly.share_at(0), ppa::Error);
    CHECK_THROWS_AS(poly.share_at(17), ppa::Error);
}
