#pragma once

// Test-only reference computations. Nothing here calls backward(); the
// gradient oracle works purely from forward() and loss_ce().

#include <cmath>
#include <span>
#include <vector>

#include "signspell/neuralnet.hpp"

namespace signspell::testing {

inline double loss_at(const Model& model, std::span<const double> x, std::size_t target) {
  return loss_ce(forward(model, x).probabilities(), target);
}

/// Central differences, one parameter at a time.
inline Gradients central_difference_gradients(const Model& model, std::span<const double> x,
                                              std::size_t target, double h = 1e-5) {
  Model probe = model;
  Gradients numeric = zero_gradients(model);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const auto perturb = [&](auto member, std::vector<double>& out) {
      const std::size_t count = (model.layers()[l].*member).size();
      for (std::size_t i = 0; i < count; ++i) {
        const double original = (model.layers()[l].*member)[i];
        (probe.mutable_layers()[l].*member)[i] = original + h;
        const double up = loss_at(probe, x, target);
        (probe.mutable_layers()[l].*member)[i] = original - h;
        const double down = loss_at(probe, x, target);
        (probe.mutable_layers()[l].*member)[i] = original;
        out[i] = (up - down) / (2.0 * h);
      }
    };
    perturb(&LayerParams::weights, numeric[l].weights);
    perturb(&LayerParams::bias, numeric[l].bias);
  }
  return numeric;
}

/// Largest |a - n| / max(|a|, |n|, floor) over every parameter. The floor
/// keeps entries that are zero up to rounding from dominating.
inline double max_relative_error(const Gradients& analytic, const Gradients& numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  const auto scan = [&](const std::vector<double>& a, const std::vector<double>& n) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double denom = std::max({std::abs(a[i]), std::abs(n[i]), floor});
      worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
    }
  };
  for (std::size_t l = 0; l < analytic.size(); ++l) {
    scan(analytic[l].weights, numeric[l].weights);
    scan(analytic[l].bias, numeric[l].bias);
  }
  return worst;
}

}  // namespace signspell::testing
