// Copyright 2026 The dicekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DICEKIT_DIVERGENCE_HPP_
#define DICEKIT_DIVERGENCE_HPP_

#include <span>
#include <string>
#include <string_view>

namespace dicekit {

// f-divergence generator with the derived quantities the DICE losses need.
//
//   f            convex on x >= 0 with f(1) = 0
//   f'           strictly increasing
//   (f')^{-1}    inverse of f', defined on the range of f'
//   f*_0(y)      max_{x >= 0} x y - f(x), conjugate restricted to x >= 0
//   (f*_0)'(y)   = max(0, (f')^{-1}(y))
//
// The KL conjugate and its derivative clamp the exponent to [-500, 500];
// beyond +500 f*_0 continues linearly so that it stays convex and C^1.
// saturated(y) reports whether y falls outside that window.
class FGenerator {
 public:
  enum class Kind { kChi2, kSqlChi2, kKl, kSoftChi2 };

  explicit FGenerator(Kind kind) : kind_(kind) {}

  Kind kind() const { return kind_; }
  std::string_view name() const;

  double f(double x) const;
  double f_prime(double x) const;
  double f_prime_inverse(double y) const;
  double f_star0(double y) const;
  double f_star0_prime(double y) const;
  // Second derivative of f*_0 (zero on the clamped region, one-sided at kinks).
  double f_star0_second(double y) const;
  // Infimum of the range of f' on x > 0, -inf for KL and soft-chi2.
  double f_prime_at_zero_plus() const;

  bool saturated(double y) const;

  friend bool operator==(const FGenerator&, const FGenerator&) = default;

 private:
  Kind kind_;
};

// Accepts "chi2", "sql_chi2", "kl", "soft_chi2".
FGenerator make_generator(std::string_view name);

// max_y |f*_0(y) - (x* y - f(x*))| with x* = max(0, (f')^{-1}(y)).
double conjugate_pair_check(const FGenerator& g, std::span<const double> y_grid);

}  // namespace dicekit

#endif  // DICEKIT_DIVERGENCE_HPP_
