#include "treedtn/rational.hpp"

#include <cctype>
#include <string>

#include "treedtn/errors.hpp"

namespace treedtn {

Integer ipow(const Integer& base, unsigned long exponent) {
    Integer result;
    mpz_pow_ui(result.get_mpz_t(), base.get_mpz_t(), exponent);
    return result;
}

Rational rpow(const Rational& base, unsigned long exponent) {
    Rational result(ipow(base.get_num(), exponent), ipow(base.get_den(), exponent));
    result.canonicalize();
    return result;
}

std::string fraction_string(const Rational& value) {
    return value.get_num().get_str() + "/" + value.get_den().get_str();
}

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

Integer parse_signed_integer(std::string_view s) {
    bool negative = false;
    if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    if (!all_digits(s)) throw PreconditionError("malformed integer '" + std::string(s) + "'");
    Integer v(std::string(s), 10);
    return negative ? Integer(-v) : v;
}

}  // namespace

Rational parse_rational(std::string_view text, bool* was_decimal) {
    if (was_decimal) *was_decimal = false;
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (text.empty()) throw PreconditionError("empty number");

    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        Integer num = parse_signed_integer(text.substr(0, slash));
        Integer den = parse_signed_integer(text.substr(slash + 1));
        if (den == 0) throw PreconditionError("zero denominator in '" + std::string(text) + "'");
        Rational r(num, den);
        r.canonicalize();
        return r;
    }

    std::string_view mantissa = text;
    long exponent = 0;
    if (auto e = text.find_first_of("eE"); e != std::string_view::npos) {
        mantissa = text.substr(0, e);
        Integer ex = parse_signed_integer(text.substr(e + 1));
        if (!ex.fits_slong_p() || abs(ex) > 10000)
            throw PreconditionError("exponent out of range in '" + std::string(text) + "'");
        exponent = ex.get_si();
        if (was_decimal) *was_decimal = true;
    }

    bool negative = false;
    if (!mantissa.empty() && (mantissa.front() == '+' || mantissa.front() == '-')) {
        negative = mantissa.front() == '-';
        mantissa.remove_prefix(1);
    }
    std::string digits;
    long frac_digits = 0;
    if (auto dot = mantissa.find('.'); dot != std::string_view::npos) {
        std::string_view ip = mantissa.substr(0, dot);
        std::string_view fp = mantissa.substr(dot + 1);
        if ((ip.empty() && fp.empty()) || (!ip.empty() && !all_digits(ip)) ||
            (!fp.empty() && !all_digits(fp)))
            throw PreconditionError("malformed number '" + std::string(text) + "'");
        digits = std::string(ip) + std::string(fp);
        frac_digits = static_cast<long>(fp.size());
        if (was_decimal) *was_decimal = true;
    } else {
        if (!all_digits(mantissa))
            throw PreconditionError("malformed number '" + std::string(text) + "'");
        digits = std::string(mantissa);
    }

    Rational r{Integer(digits, 10)};
    long scale = exponent - frac_digits;
    if (scale > 0) r *= Rational(ipow(10, static_cast<unsigned long>(scale)));
    if (scale < 0) r /= Rational(ipow(10, static_cast<unsigned long>(-scale)));
    r.canonicalize();
    return negative ? Rational(-r) : r;
}

Integer to_integer(Int128 value) {
    bool negative = value < 0;
    unsigned __int128 mag = negative ? static_cast<unsigned __int128>(-(value + 1)) + 1
                                     : static_cast<unsigned __int128>(value);
    Integer hi(static_cast<unsigned long>(mag >> 64));
    Integer lo(static_cast<unsigned long>(mag & 0xFFFFFFFFFFFFFFFFull));
    Integer result = (hi << 64) + lo;
    return negative ? Integer(-result) : result;
}

Int128 to_int128(const Integer& value) {
    Integer mag = abs(value);
    if (mpz_sizeinbase(mag.get_mpz_t(), 2) > 126) throw OverflowError("integer exceeds 128-bit range");
    Integer hi = mag >> 64;
    Integer lo = mag - (hi << 64);
    unsigned __int128 u = (static_cast<unsigned __int128>(hi.get_ui()) << 64) | lo.get_ui();
    Int128 r = static_cast<Int128>(u);
    return value < 0 ? -r : r;
}

double to_double(const Rational& value) { return value.get_d(); }

}  // namespace treedtn
