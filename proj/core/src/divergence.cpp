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

#include "dicekit/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dicekit/errors.hpp"

namespace dicekit {
namespace {

constexpr double kExpClamp = 500.0;

// exp(y - 1) with the argument clamped to [-500, 500].
double clamped_exp_m1(double y) { return std::exp(std::clamp(y, -kExpClamp, kExpClamp) - 1.0); }

}  // namespace

std::string_view FGenerator::name() const {
  switch (kind_) {
    case Kind::kChi2: return "chi2";
    case Kind::kSqlChi2: return "sql_chi2";
    case Kind::kKl: return "kl";
    case Kind::kSoftChi2: return "soft_chi2";
  }
  return "unknown";
}

double FGenerator::f(double x) const {
  switch (kind_) {
    case Kind::kChi2: return 0.5 * (x - 1.0) * (x - 1.0);
    case Kind::kSqlChi2: return x * x - x;
    case Kind::kKl: return x > 0.0 ? x * std::log(x) : 0.0;
    case Kind::kSoftChi2:
      if (x >= 1.0) return 0.5 * (x - 1.0) * (x - 1.0);
      return x > 0.0 ? x * std::log(x) - x + 1.0 : 1.0;
  }
  return 0.0;
}

double FGenerator::f_prime(double x) const {
  switch (kind_) {
    case Kind::kChi2: return x - 1.0;
    case Kind::kSqlChi2: return 2.0 * x - 1.0;
    case Kind::kKl: return std::log(x) + 1.0;
    case Kind::kSoftChi2: return x >= 1.0 ? x - 1.0 : std::log(x);
  }
  return 0.0;
}

double FGenerator::f_prime_inverse(double y) const {
  switch (kind_) {
    case Kind::kChi2: return y + 1.0;
    case Kind::kSqlChi2: return 0.5 * (y + 1.0);
    case Kind::kKl: return clamped_exp_m1(y);
    case Kind::kSoftChi2: return y >= 0.0 ? y + 1.0 : std::exp(std::max(y, -kExpClamp));
  }
  return 0.0;
}

double FGenerator::f_star0(double y) const {
  switch (kind_) {
    case Kind::kChi2: return y >= -1.0 ? 0.5 * y * y + y : -0.5;
    case Kind::kSqlChi2: {
      const double h = 0.5 * (1.0 + y);
      return h > 0.0 ? h * h : 0.0;
    }
    case Kind::kKl:
      if (y > kExpClamp) return clamped_exp_m1(kExpClamp) * (1.0 + (y - kExpClamp));
      return clamped_exp_m1(y);
    case Kind::kSoftChi2: return y >= 0.0 ? 0.5 * y * y + y : std::exp(std::max(y, -kExpClamp)) - 1.0;
  }
  return 0.0;
}

double FGenerator::f_star0_prime(double y) const { return std::max(0.0, f_prime_inverse(y)); }

double FGenerator::f_star0_second(double y) const {
  switch (kind_) {
    case Kind::kChi2: return y > -1.0 ? 1.0 : 0.0;
    case Kind::kSqlChi2: return y > -1.0 ? 0.5 : 0.0;
    case Kind::kKl: return saturated(y) ? 0.0 : clamped_exp_m1(y);
    case Kind::kSoftChi2: return y >= 0.0 ? 1.0 : (y < -kExpClamp ? 0.0 : std::exp(y));
  }
  return 0.0;
}

double FGenerator::f_prime_at_zero_plus() const {
  switch (kind_) {
    case Kind::kChi2:
    case Kind::kSqlChi2: return -1.0;
    case Kind::kKl:
    case Kind::kSoftChi2: return -std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

bool FGenerator::saturated(double y) const {
  switch (kind_) {
    case Kind::kKl: return std::abs(y) > kExpClamp;
    case Kind::kSoftChi2: return y < -kExpClamp;
    default: return false;
  }
}

FGenerator make_generator(std::string_view name) {
  if (name == "chi2") return FGenerator(FGenerator::Kind::kChi2);
  if (name == "sql_chi2") return FGenerator(FGenerator::Kind::kSqlChi2);
  if (name == "kl") return FGenerator(FGenerator::Kind::kKl);
  if (name == "soft_chi2") return FGenerator(FGenerator::Kind::kSoftChi2);
  throw ParameterError("unknown f-divergence generator '" + std::string(name) + "'");
}

double conjugate_pair_check(const FGenerator& g, std::span<const double> y_grid) {
  double worst = 0.0;
  for (double y : y_grid) {
    const double x = std::max(0.0, g.f_prime_inverse(y));
    worst = std::max(worst, std::abs(g.f_star0(y) - (x * y - g.f(x))));
  }
  return worst;
}

}  // namespace dicekit
