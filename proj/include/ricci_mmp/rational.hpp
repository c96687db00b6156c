#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <stdexcept>
#include <string>

namespace ricci_mmp {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Parses "p" or "p/q" with optional sign; q must be nonzero.
inline Rational parse_rational(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rational(BigInt(s));
        BigInt p(s.substr(0, slash));
        BigInt q(s.substr(slash + 1));
        if (q == 0) throw std::domain_error("rational: zero denominator in '" + s + "'");
        return Rational(p, q);
    } catch (const std::domain_error&) {
        throw;
    } catch (const std::exception&) {
        throw std::domain_error("rational: cannot parse '" + s + "'");
    }
}

// Canonical form: "p" when the denominator is 1, else "p/q" with q > 0.
inline std::string format_rational(const Rational& r) {
    std::string num = numerator(r).str();
    if (denominator(r) == 1) return num;
    return num + "/" + denominator(r).str();
}

inline double to_double(const Rational& r) {
    return static_cast<double>(r);
}

}  // namespace ricci_mmp
