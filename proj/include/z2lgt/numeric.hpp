#pragma once

#include "z2lgt/errors.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <ios>
#include <string>

namespace z2lgt {

/// Working precision for every path where exp/cosh/sinh/tanh enter.
using Real = boost::multiprecision::cpp_bin_float_50;
/// Extra-wide precision used only for certified sign evaluation.
using Wide = boost::multiprecision::cpp_bin_float_100;
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Real to_real(double x) { return Real(x); }

inline double to_double(const Real& x) { return x.convert_to<double>(); }

inline std::string to_string(const Rational& q) { return q.str(); }

/// Scientific rendering with `digits` significant digits, stable across platforms.
template <class Float>
std::string format_real(const Float& x, int digits = 17) {
  return x.str(digits, std::ios_base::scientific);
}

/// 2^k as an exact integer.
inline BigInt pow2(std::size_t k) { return BigInt(1) << k; }

/// Parses "p/q", "p" or a finite decimal such as "0.25" into an exact rational.
inline Rational parse_rational(const std::string& text) {
  if (text.empty()) throw InvalidArgument("empty rational literal");
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      BigInt num(text.substr(0, slash));
      BigInt den(text.substr(slash + 1));
      if (den == 0) throw InvalidArgument("rational literal with zero denominator: " + text);
      return Rational(num, den);
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) return Rational(BigInt(text));
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    const std::size_t decimals = text.size() - dot - 1;
    if (digits.empty() || digits == "-" || digits == "+") throw InvalidArgument("bad rational literal: " + text);
    BigInt den = 1;
    for (std::size_t i = 0; i < decimals; ++i) den *= 10;
    return Rational(BigInt(digits), den);
  } catch (const std::runtime_error&) {
    throw InvalidArgument("bad rational literal: " + text);
  }
}

}  // namespace z2lgt
