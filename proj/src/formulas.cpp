#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/core.h>

#include "slag/error.hpp"
#include "slag/experiments.hpp"

namespace slag {

namespace {

double sq_norm(const Point& x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; }

double parse_param(const std::string& spec, const std::string& text, std::optional<double> fallback) {
  if (text.empty()) {
    if (fallback) return *fallback;
    throw ConfigError(fmt::format("formula '{}' needs a parameter", spec));
  }
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v))
    throw ConfigError(fmt::format("formula '{}': bad parameter '{}'", spec, text));
  return v;
}

}  // namespace

std::vector<std::string> builtin_formula_names() {
  return {"zero", "quad:K", "aniso", "quartic", "quartic-x1:c", "radial-quartic:c", "mixed:c", "partial-legendre:a",
          "x1x2", "abs1", "tilt-max", "two-quad"};
}

Formula builtin_formula(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (name == "zero") return [](const Point&) { return 0.0; };
  if (name == "quad") {
    const double k = parse_param(spec, arg, std::nullopt);
    return [k](const Point& x) { return 0.5 * k * sq_norm(x); };
  }
  if (name == "aniso")
    return [](const Point& x) { return 0.5 * (2.0 * x[0] * x[0] + 0.5 * x[1] * x[1] + x[2] * x[2]); };
  if (name == "quartic")
    return [](const Point& x) {
      const double r2 = sq_norm(x);
      return 0.5 * r2 + 0.25 * r2 * r2;
    };
  if (name == "quartic-x1") {
    const double c = parse_param(spec, arg, 0.1);
    return [c](const Point& x) { return 0.5 * sq_norm(x) + c * std::pow(x[0], 4); };
  }
  if (name == "radial-quartic") {
    const double c = parse_param(spec, arg, 0.05);
    return [c](const Point& x) {
      const double r2 = sq_norm(x);
      return 0.5 * r2 + c * r2 * r2;
    };
  }
  if (name == "mixed") {
    const double c = parse_param(spec, arg, 0.05);
    return [c](const Point& x) { return 0.5 * sq_norm(x) + c * x[0] * x[0] * x[1] * x[1]; };
  }
  if (name == "partial-legendre") {
    // x1²/2 − a x1³/6 + x2²/(2(1 − a x1)) has det D²u = 1.
    const double a = parse_param(spec, arg, 0.5);
    if (!(std::abs(a) < 1.0)) throw ConfigError("partial-legendre needs |a| < 1");
    return [a](const Point& x) {
      return 0.5 * x[0] * x[0] - a * x[0] * x[0] * x[0] / 6.0 + 0.5 * x[1] * x[1] / (1.0 - a * x[0]) +
             0.5 * x[2] * x[2];
    };
  }
  if (name == "x1x2") return [](const Point& x) { return x[0] * x[1]; };
  if (name == "abs1") return [](const Point& x) { return std::abs(x[0]); };
  if (name == "tilt-max")
    return [](const Point& x) {
      const double q = 0.5 * sq_norm(x);
      return std::max(q, q + 0.1 * (x[0] - 0.3));
    };
  if (name == "two-quad")
    return [](const Point& x) {
      Point y = x;
      y[0] -= 0.3;
      return std::max(1.5 * sq_norm(x), 1.5 * sq_norm(y));
    };
  throw ConfigError(fmt::format("unknown formula '{}'", spec));
}

}  // namespace slag
