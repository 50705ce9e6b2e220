#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "affect/format.hpp"
#include "affect/prng.hpp"

using namespace affect;

TEST_CASE("format_double round-trips bit-exactly") {
  Prng rng(11);
  for (int k = 0; k < 20000; ++k) {
    double v;
    const std::uint64_t bits = rng.next();
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    double back = 0.0;
    REQUIRE(parse_double(format_double(v), back));
    CHECK(std::memcmp(&v, &back, sizeof v) == 0);
  }
}

TEST_CASE("format_double is shortest and never exceeds 17 significant digits") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(format_double(0.0) == "0");
  const auto s = format_double(1.0 / 3.0);
  std::size_t digits = 0;
  for (char ch : s) digits += (ch >= '0' && ch <= '9') ? 1 : 0;
  CHECK(digits <= 18);  // leading zero plus 17 significant
}

TEST_CASE("format_fixed") {
  CHECK(format_fixed(1.0) == "1.000000");
  CHECK(format_fixed(0.1234565, 3) == "0.123");
  CHECK(format_fixed(-0.5, 2) == "-0.50");
}

TEST_CASE("parse_double rejects junk") {
  double v = 0.0;
  CHECK_FALSE(parse_double("", v));
  CHECK_FALSE(parse_double("1.5x", v));
  CHECK_FALSE(parse_double("nan", v));
  CHECK_FALSE(parse_double("inf", v));
  CHECK_FALSE(parse_double("1e999", v));
  CHECK(parse_double("+1.5", v));
  CHECK(v == 1.5);
  CHECK(parse_double("-1e-3", v));
  CHECK(v == -1e-3);
}

TEST_CASE("parse_uint") {
  std::uint64_t v = 0;
  CHECK(parse_uint("42", v));
  CHECK(v == 42);
  CHECK_FALSE(parse_uint("-1", v));
  CHECK_FALSE(parse_uint("4.2", v));
  CHECK_FALSE(parse_uint("", v));
}

TEST_CASE("split and trim") {
  const auto parts = split("a,,b", ',');
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[1].empty());
  CHECK(parts[2] == "b");
  CHECK(split("", ',').size() == 1);
  CHECK(trim("  x y \t") == "x y");
}

TEST_CASE("fnv1a_hex known vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}
