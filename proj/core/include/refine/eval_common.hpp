#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace refine {

class EvalError : public std::runtime_error {
 public:
  enum class Kind { empty_input, missing_response, judge_parse, invalid_score };

  EvalError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Exact non-negative rational, kept in lowest terms. A zero denominator is
// never stored; 0/0 metrics are reported as 0/1.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Fraction of(std::int64_t n, std::int64_t d) {
    if (d == 0) return {0, 1};
    const auto g = std::gcd(n, d);
    return g == 0 ? Fraction{0, 1} : Fraction{n / g, d / g};
  }

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }

  friend Fraction operator*(Fraction a, Fraction b) {
    // Cross-reduce first to keep intermediates small.
    const auto g1 = std::gcd(a.num, b.den);
    const auto g2 = std::gcd(b.num, a.den);
    const auto n1 = g1 ? a.num / g1 : a.num, d2 = g1 ? b.den / g1 : b.den;
    const auto n2 = g2 ? b.num / g2 : b.num, d1 = g2 ? a.den / g2 : a.den;
    return of(n1 * n2, d1 * d2);
  }
  friend Fraction operator+(Fraction a, Fraction b) {
    const auto l = std::lcm(a.den, b.den);
    return of(a.num * (l / a.den) + b.num * (l / b.den), l);
  }
  friend Fraction operator/(Fraction a, Fraction b) { return b.num == 0 ? Fraction{0, 1} : a * Fraction::of(b.den, b.num); }
  friend bool operator==(const Fraction& a, const Fraction& b) { return a.num == b.num && a.den == b.den; }
};

}  // namespace refine
