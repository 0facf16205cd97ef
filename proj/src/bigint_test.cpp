#include "ppa/bigint.hpp"

#include <doctest.h>

#include <set>

using ppa::BigInt;

TEST_CASE("hex roundtrip")
{
    CHECK(ppa::to_hex(BigInt(0)) == "0");
    CHECK(ppa::to_hex(BigInt(255)) == "ff");
    CHECK(ppa::from_hex("8f") == 143);
    BigInt big("123456789012345678901234567890123456789");
    CHECK(ppa::from_hex(ppa::to_hex(big)) == big);
}

TEST_CASE("hex rejects bad input")
{
    CHECK_THROWS_AS(ppa::from_hex(""), ppa::Error);
    CHECK_THROWS_AS(ppa::from_hex("FF"), ppa::Error);
    CHECK_THROWS_AS(ppa::from_hex("0x1"), ppa::Error);
    CHECK_THROWS_AS(ppa::to_hex(BigInt(-1)), ppa::Error);
}

TEST_CASE("seeded random is reproducible and bounded")
{
    ppa::SeededRandom a(42), b(42), c(43);
    BigInt bound(1000003);
    bool differs = false;
    for (int i = 0; i < 200; ++i) {
        BigInt x = a.below(bound);
        BigInt y = b.below(bound);
        CHECK(x == y);
        CHECK(x >= 0);
        CHECK(x < bound);
        if (c.below(bound) != x) {
            differs = true;
        }
    }
    CHECK(differs);
}

TEST_CASE("bits respects width")
{
    ppa::SecureRandom rng;
    for (unsigned w : {1u, 7u, 64u, 65u, 300u}) {
        for (int i = 0; i < 20; ++i) {
            BigInt x = rng.bits(w);
            CHECK(mpz_sizeinbase(x.get_mpz_t(), 2) <= w);
        }
    }
}

TEST_CASE("below covers a small range")
{
    ppa::SeededRandom rng(9);
    std::set<long> seen;
    for (int i = 0; i < 500; ++i) {
        seen.insert(rng.below(BigInt(5)).get_si());
    }
    CHECK(seen == std::set<long>{0, 1, 2, 3, 4});
}
