// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "pevalyzer/rational.hpp"

using peval::BigInt;
using peval::Rat;

TEST_CASE("BigInt arithmetic agrees with long long on random values") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 5000; ++i) {
        long long a = static_cast<long long>(rng() % 2000001) - 1000000;
        long long b = static_cast<long long>(rng() % 2000001) - 1000000;
        BigInt A(a), B(b);
        CHECK((A + B).to_ll() == a + b);
        CHECK((A - B).to_ll() == a - b);
        CHECK((A * B).to_ll() == a * b);
        if (b != 0) {
            BigInt q, r;
            BigInt::divmod(A, B, q, r);
            CHECK(q.to_ll() == a / b);
            CHECK(r.to_ll() == a % b);
        }
        CHECK(BigInt::cmp(A, B) == (a < b ? -1 : a > b ? 1 : 0));
    }
}

TEST_CASE("BigInt handles multi-limb values") {
    BigInt big = BigInt::pow(BigInt(10), 40);
    CHECK(big.to_string() == "1" + std::string(40, '0'));
    BigInt x = BigInt::from_string("123456789012345678901234567890");
    BigInt y = BigInt::from_string("987654321098765432109876543210");
    CHECK((x * y).to_string() == "121932631137021795226185032733622923332237463801111263526900");
    BigInt q, r;
    BigInt::divmod(y, x, q, r);
    CHECK(q.to_ll() == 8);
    CHECK((x * q + r) == y);
    CHECK(r.to_string() == "9000000000900000000090");
}

TEST_CASE("BigInt gcd") {
    CHECK(BigInt::gcd(BigInt(12), BigInt(18)).to_ll() == 6);
    CHECK(BigInt::gcd(BigInt(0), BigInt(5)).to_ll() == 5);
    CHECK(BigInt::gcd(BigInt(-12), BigInt(18)).to_ll() == 6);
    BigInt x = BigInt::from_string("123456789012345678901234567890");
    BigInt y = BigInt::from_string("987654321098765432109876543210");
    CHECK(BigInt::gcd(x, y).to_string() == "9000000000900000000090");
}

TEST_CASE("Rat canonical form and arithmetic") {
    Rat a(1, 5), b(4, 5);
    CHECK((a + b) == Rat(1));
    CHECK((a * Rat(10)) == Rat(2));
    CHECK((Rat(1) / a) == Rat(5));
    CHECK(Rat(2, 4) == Rat(1, 2));
    CHECK(Rat(-2, -4) == Rat(1, 2));
    CHECK(Rat(2, -4) == Rat(-1, 2));
    CHECK(Rat(0, 7) == Rat(0));
    CHECK(Rat(1, 3) < Rat(1, 2));
    CHECK((Rat(1, 3) - Rat(1, 2)).sign() == -1);
    CHECK(Rat(7, 2).floor().to_ll() == 3);
    CHECK(Rat(-7, 2).floor().to_ll() == -4);
}

TEST_CASE("Rat parses fractions and decimals exactly") {
    CHECK(Rat::from_string("1/5") == Rat(1, 5));
    CHECK(Rat::from_string("0.5") == Rat(1, 2));
    CHECK(Rat::from_string("-0.25") == Rat(-1, 4));
    CHECK(Rat::from_string("3") == Rat(3));
    CHECK(Rat::from_string("2.50") == Rat(5, 2));
    CHECK(Rat(1, 5).to_string() == "1/5");
    CHECK(Rat(-3).to_string() == "-3");
}

TEST_CASE("Rat survives repeated mixed arithmetic without drift") {
    // partial geometric sum: sum k*(1/5)*(4/5)^(k-1), k = 1..10
    Rat sum(0), p(1, 5), q(4, 5), pw(1);
    for (int k = 1; k <= 10; ++k) {
        sum += Rat(k) * p * pw;
        pw *= q;
    }
    // closed form: 5 - (4/5)^10 * (10 + 5)  ... verified by direct evaluation
    Rat direct = Rat(5) - Rat(BigInt::pow(BigInt(4), 10), BigInt::pow(BigInt(5), 10)) * Rat(15);
    CHECK(sum == direct);
    CHECK(sum < Rat(5));
}
