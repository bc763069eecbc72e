#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rpmlab/tensor.hpp"

namespace rpmlab {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double step_base = 0.0;

  double max_rel_err() const {
    double m = 0.0;
    for (const auto& e : per_param) m = std::max(m, e.max_rel_err);
    return m;
  }
};

// Compares reverse-mode gradients against central finite differences,
// parameter by parameter. f must be deterministic (dropout in eval mode) and
// return a scalar Tensor<double>. The step for element theta is
// step_base * max(1, |theta|).
template <typename F>
GradCheckReport grad_check(F&& f, const std::vector<std::pair<std::string, Tensor<double>>>& params,
                           double step_base = 1e-5) {
  GradCheckReport report;
  report.step_base = step_base;

  Tensor<double> loss = f();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) analytic.push_back(p.grad());

  for (size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, p] = params[pi];
    auto& values = const_cast<Tensor<double>&>(p).value();
    GradCheckEntry entry{name, 0.0};
    for (size_t i = 0; i < values.size(); ++i) {
      double theta = values[i];
      double h = step_base * std::max(1.0, std::abs(theta));
      values[i] = theta + h;
      double f_plus = f().item();
      values[i] = theta - h;
      double f_minus = f().item();
      values[i] = theta;
      double g_fd = (f_plus - f_minus) / (2.0 * h);
      double g_ad = analytic[pi][i];
      double denom = std::max({std::abs(g_ad), std::abs(g_fd), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, std::abs(g_ad - g_fd) / denom);
    }
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace rpmlab
