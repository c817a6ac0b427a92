#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

namespace treedtn {

using Rational = mpq_class;
using Integer = mpz_class;
using Int128 = __int128;

Integer ipow(const Integer& base, unsigned long exponent);
Rational rpow(const Rational& base, unsigned long exponent);

/// Always "p/q", also for integers ("3/1").
std::string fraction_string(const Rational& value);

/// Parses "a/b", an integer, or an exact decimal literal ("0.35", "-1.5e-3").
/// Decimal literals are converted exactly (0.35 -> 7/20). Sets *was_decimal
/// when the literal used decimal or exponent notation.
Rational parse_rational(std::string_view text, bool* was_decimal = nullptr);

Integer to_integer(Int128 value);
/// Throws OverflowError when the value does not fit.
Int128 to_int128(const Integer& value);

double to_double(const Rational& value);

}  // namespace treedtn
