// Copyright 2026 The racedriver Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace racedriver {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kGravity = 9.81;

struct Vec2 {
  double x{};
  double y{};

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double k) const { return {x * k, y * k}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double k, const Vec2& v) { return v * k; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }
inline double distance(const Vec2& a, const Vec2& b) { return norm(a - b); }
inline Vec2 unit_from_angle(double a) { return {std::cos(a), std::sin(a)}; }
/// Left-hand normal of a heading angle.
inline Vec2 left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

using Polyline = std::vector<Vec2>;

enum class ErrorCode {
  AmbiguousProjection,
  OutOfBand,
  InvalidArgument,
  SingularSystem,
  EmptyInput,
  NotPSD,
  SingularInnovation,
  InsufficientDemos,
  EmptyLibrary,
  DegenerateLine,
  NumericalBlowup,
  LocalizationLost,
  FloorReached,
  Schema,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::AmbiguousProjection: return "AmbiguousProjection";
    case ErrorCode::OutOfBand: return "OutOfBand";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::InsufficientDemos: return "InsufficientDemos";
    case ErrorCode::EmptyLibrary: return "EmptyLibrary";
    case ErrorCode::DegenerateLine: return "DegenerateLine";
    case ErrorCode::NumericalBlowup: return "NumericalBlowup";
    case ErrorCode::LocalizationLost: return "LocalizationLost";
    case ErrorCode::FloorReached: return "FloorReached";
    case ErrorCode::Schema: return "Schema";
  }
  return "Unknown";
}

/// Library-wide exception; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Wraps `s` into [0, period).
inline double wrap_s(double s, double period) {
  double r = std::fmod(s, period);
  if (r < 0.0) r += period;
  if (r >= period) r -= period;
  return r;
}

/// Signed shortest circular difference a - b on a loop of length `period`.
inline double circular_diff(double a, double b, double period) {
  double d = wrap_s(a - b, period);
  if (d > 0.5 * period) d -= period;
  return d;
}

inline double wrap_angle(double a) {
  return std::remainder(a, 2.0 * kPi);
}

inline std::size_t wrap_index(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  std::ptrdiff_t r = i % m;
  if (r < 0) r += m;
  return static_cast<std::size_t>(r);
}

template <typename T>
constexpr T clamp_value(T v, T lo, T hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

/// Periodic linear interpolation of station values sampled at i*ds on a loop.
inline double interp_periodic(const std::vector<double>& values, double ds, double s) {
  const std::size_t n = values.size();
  const double period = ds * static_cast<double>(n);
  const double u = wrap_s(s, period) / ds;
  const auto i0 = static_cast<std::size_t>(std::floor(u)) % n;
  const std::size_t i1 = (i0 + 1) % n;
  const double t = u - std::floor(u);
  return values[i0] * (1.0 - t) + values[i1] * t;
}

/// Circular moving average with an odd window.
inline std::vector<double> smooth_periodic(const std::vector<double>& v, std::size_t window) {
  const std::size_t n = v.size();
  if (n == 0 || window <= 1) return v;
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      acc += v[wrap_index(static_cast<std::ptrdiff_t>(i) + k, n)];
    }
    out[i] = acc / static_cast<double>(2 * half + 1);
  }
  return out;
}

}  // namespace racedriver
