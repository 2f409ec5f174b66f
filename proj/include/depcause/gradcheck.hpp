#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "depcause/tensor.hpp"

namespace depcause {

template <typename T>
using NamedTensor = std::pair<std::string, Tensor<T>>;

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = true;

  void print(std::ostream& os) const {
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %8s %14s %14s  %s\n", "parameter", "entries",
                  "max_abs_err", "max_rel_err", "status");
    os << line;
    for (const auto& e : entries) {
      std::snprintf(line, sizeof line, "%-28s %8zu %14.3e %14.3e  %s\n", e.name.c_str(), e.count,
                    e.max_abs_error, e.max_rel_error, e.pass ? "PASS" : "FAIL");
      os << line;
    }
    std::snprintf(line, sizeof line, "overall: %s  max_rel_err=%.3e  tolerance=%.1e\n",
                  pass ? "PASS" : "FAIL", max_rel_error, tolerance);
    os << line;
  }
};

/// Relative error used by the checker. The denominator is floored so that
/// entries whose true gradient is essentially zero are judged on an absolute
/// scale instead of blowing up.
inline double gradient_relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares reverse-mode gradients of the scalar function `f` against
/// central differences (f(θ+h) − f(θ−h)) / 2h for every entry of `params`.
///
/// `f` must be deterministic and must read the parameters' current values
/// each time it is called.
template <typename T>
GradCheckReport finite_diff_check(const std::function<Tensor<T>()>& f,
                                  std::vector<NamedTensor<T>> params, T step, double tolerance,
                                  double rel_floor = 1e-6) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& [name, p] : params) p.zero_grad();
  {
    Tensor<T> loss = f();
    backward(loss);
  }
  for (auto& [name, p] : params) {
    GradCheckEntry entry;
    entry.name = name;
    entry.count = p.size();
    const std::vector<T> analytic = p.has_grad() ? std::vector<T>(p.grad().begin(), p.grad().end())
                                                 : std::vector<T>(p.size(), T(0));
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      T plus, minus;
      {
        NoGradGuard guard;
        values[i] = saved + step;
        plus = f().item();
        values[i] = saved - step;
        minus = f().item();
      }
      values[i] = saved;
      const double numeric = (static_cast<double>(plus) - static_cast<double>(minus)) /
                             (2.0 * static_cast<double>(step));
      const double a = static_cast<double>(analytic[i]);
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(a - numeric));
      entry.max_rel_error =
          std::max(entry.max_rel_error, gradient_relative_error(a, numeric, rel_floor));
    }
    entry.pass = entry.max_rel_error < tolerance;
    report.max_abs_error = std::max(report.max_abs_error, entry.max_abs_error);
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace depcause
