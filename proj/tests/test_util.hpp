#pragma once
// Shared helpers for the test suites: tolerance checks and the central
// finite-difference oracle used to validate every backward path.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "radmamba/model.hpp"
#include "radmamba/tensor.hpp"

namespace radtest {

inline double max_abs_diff(const radmamba::Tensor& a, const radmamba::Tensor& b) {
  const auto& ad = a.data();
  const auto& bd = b.data();
  if (ad.size() != bd.size()) return 1e300;
  double m = 0.0;
  for (size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

inline double rel_err(double got, double want, double floor = 1e-12) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor});
}

struct GradCheck {
  double max_err = 0.0;
  std::string worst;
};

// Central finite differences (step eps) against tape gradients for every
// element of every parameter. forward() must rebuild the graph from the
// current parameter values and return a scalar loss. Per-element errors are
// measured relative to the element magnitude or to a fraction of the largest
// gradient, whichever is bigger, so FD roundoff on near-zero entries does
// not drown the signal.
inline GradCheck grad_check(std::vector<radmamba::NamedTensor>& params,
                            const std::function<radmamba::Tensor()>& forward,
                            double eps = 1e-5) {
  using namespace radmamba;
  for (auto& p : params) p.t.set_requires_grad(true);

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tape::Scope scope(tape);
    for (auto& p : params) p.t.zero_grad();
    Tensor loss = forward();
    tape.backward(loss);
    for (auto& p : params)
      analytic.push_back(p.t.has_grad() ? p.t.grad() : std::vector<double>(p.t.data().size(), 0.0));
  }

  double g_max = 0.0;
  for (const auto& g : analytic)
    for (double v : g) g_max = std::max(g_max, std::abs(v));
  const double scale_floor = std::max(1e-3 * g_max, 1e-12);

  auto eval = [&]() { return forward().item(); };

  GradCheck res;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi].t.mutable_data();
    for (size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + eps;
      const double up = eval();
      data[i] = keep - eps;
      const double dn = eval();
      data[i] = keep;
      const double fd = (up - dn) / (2.0 * eps);
      const double an = analytic[pi][i];
      const double err = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), scale_floor});
      if (err > res.max_err) {
        res.max_err = err;
        res.worst = params[pi].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace radtest
