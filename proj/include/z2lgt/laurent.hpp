#pragma once

#include "z2lgt/numeric.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace z2lgt {

/// Laurent polynomial with arbitrary-precision integer coefficients.  Zero coefficients are never stored.
class LaurentPoly {
 public:
  LaurentPoly() = default;

  static LaurentPoly monomial(int exponent, const BigInt& coefficient = 1) {
    LaurentPoly p;
    p.add_term(exponent, coefficient);
    return p;
  }

  void add_term(int exponent, const BigInt& coefficient) {
    if (coefficient == 0) return;
    auto [it, inserted] = terms_.try_emplace(exponent, coefficient);
    if (!inserted) {
      it->second += coefficient;
      if (it->second == 0) terms_.erase(it);
    }
  }

  const std::map<int, BigInt>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int min_exponent() const { return terms_.empty() ? 0 : terms_.begin()->first; }
  int max_exponent() const { return terms_.empty() ? 0 : terms_.rbegin()->first; }

  BigInt coefficient(int exponent) const {
    auto it = terms_.find(exponent);
    return it == terms_.end() ? BigInt(0) : it->second;
  }

  bool all_nonnegative() const {
    for (const auto& [k, c] : terms_)
      if (c < 0) return false;
    return true;
  }

  LaurentPoly& operator+=(const LaurentPoly& o) {
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    return *this;
  }
  LaurentPoly& operator-=(const LaurentPoly& o) {
    for (const auto& [k, c] : o.terms_) add_term(k, -c);
    return *this;
  }
  friend LaurentPoly operator+(LaurentPoly a, const LaurentPoly& b) { return a += b; }
  friend LaurentPoly operator-(LaurentPoly a, const LaurentPoly& b) { return a -= b; }
  friend LaurentPoly operator*(const LaurentPoly& a, const LaurentPoly& b) {
    LaurentPoly out;
    for (const auto& [i, ci] : a.terms_)
      for (const auto& [j, cj] : b.terms_) out.add_term(i + j, ci * cj);
    return out;
  }
  friend LaurentPoly operator*(const BigInt& s, const LaurentPoly& a) {
    LaurentPoly out;
    for (const auto& [k, c] : a.terms_) out.add_term(k, s * c);
    return out;
  }

  /// d/dy.
  LaurentPoly derivative() const {
    LaurentPoly out;
    for (const auto& [k, c] : terms_) out.add_term(k - 1, c * k);
    return out;
  }

  /// Multiplication by y^k.
  LaurentPoly shifted(int k) const {
    LaurentPoly out;
    for (const auto& [e, c] : terms_) out.terms_.emplace(e + k, c);
    return out;
  }

  template <class Float>
  Float evaluate(const Float& y) const {
    Float acc = 0;
    for (const auto& [k, c] : terms_) acc += Float(c) * pow(y, k);
    return acc;
  }

  /// Sum of |c_k| y^k, the scale against which rounding in evaluate() is measured.
  template <class Float>
  Float evaluate_abs(const Float& y) const {
    Float acc = 0;
    for (const auto& [k, c] : terms_) acc += Float(c < 0 ? BigInt(-c) : c) * pow(y, k);
    return acc;
  }

  std::string to_string(const std::string& var = "y") const {
    if (terms_.empty()) return "0";
    std::string out;
    for (const auto& [k, c] : terms_) {
      std::string cs = c.str();
      if (!out.empty()) {
        if (cs.front() == '-') {
          out += " - ";
          cs.erase(0, 1);
        } else {
          out += " + ";
        }
      }
      if (k == 0) {
        out += cs;
        continue;
      }
      if (cs != "1") out += cs + "*";
      out += var;
      if (k != 1) out += "^" + std::to_string(k);
    }
    return out;
  }

  friend bool operator==(const LaurentPoly&, const LaurentPoly&) = default;

 private:
  std::map<int, BigInt> terms_;
};

/// Sign of an integer Laurent polynomial at y > 0, certified against rounding in Wide precision.
struct SignResult {
  int sign = 0;
  bool certified = true;
  Wide value = 0;
};

inline SignResult certified_sign(const LaurentPoly& q, const Wide& y) {
  SignResult r;
  if (q.is_zero()) return r;
  // At y = 1 and y = 0 the value is an integer and is computed exactly.
  if (y == 1 || (y == 0 && q.min_exponent() >= 0)) {
    BigInt v = 0;
    if (y == 1) {
      for (const auto& [k, c] : q.terms()) v += c;
    } else {
      v = q.coefficient(0);
    }
    r.sign = v > 0 ? 1 : (v < 0 ? -1 : 0);
    r.value = Wide(v);
    return r;
  }
  r.value = q.evaluate(y);
  const Wide slack = q.evaluate_abs(y) * Wide("1e-80");
  if (r.value > slack) {
    r.sign = 1;
  } else if (r.value < -slack) {
    r.sign = -1;
  } else {
    r.certified = false;
  }
  return r;
}

}  // namespace z2lgt
