#pragma once

#include <cmath>
#include <vector>

#include "upstream/net.hpp"

namespace upstream::testing {

// Central finite differences of the training loss with respect to every
// parameter, holding inputs and the dropout mask fixed. Independent of the
// backprop path: uses only the loss-evaluation forward.
inline std::vector<double> finite_diff_grad(QNetwork& net, const TrainBatch& batch,
                                            const std::vector<double>& mask,
                                            double eps = 1e-6) {
  auto& params = net.parameters();
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = net.train_loss(batch, mask);
    params[i] = saved - eps;
    const double down = net.train_loss(batch, mask);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

// Max relative error between the analytic and finite-difference gradients.
// The denominator floor keeps central-difference round-off (~1e-10 absolute
// for an O(1) loss at eps=1e-6) from registering on near-zero gradients.
inline double max_grad_rel_error(const std::vector<double>& analytic,
                                 const std::vector<double>& fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-4});
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
  }
  return worst;
}

struct GradCheckCase {
  Matrix inputs;
  std::vector<int> actions;
  std::vector<double> targets;
};

inline GradCheckCase random_case(const std::vector<int>& sizes, int batch,
                                 RngStream& rng) {
  GradCheckCase c;
  c.inputs = Matrix(batch, sizes.front());
  for (double& v : c.inputs.data) v = rng.normal();
  for (int r = 0; r < batch; ++r) {
    c.actions.push_back(static_cast<int>(rng.uniform_int(sizes.back())));
    c.targets.push_back(rng.normal());
  }
  return c;
}

// Runs one randomized gradient check; returns the max relative error.
inline double run_gradcheck(const std::vector<int>& sizes, int batch,
                            std::uint64_t seed, double dropout = 0.0,
                            bool batch_norm = false) {
  RngStream init(seed);
  QNetwork net(sizes, init, dropout, batch_norm);
  RngStream data(seed + 1000);
  // Jitter every parameter (biases included) so no pre-activation sits
  // exactly on the rectifier kink, where central differences straddle the
  // subgradient.
  for (double& p : net.parameters()) p += 0.05 * data.normal();
  GradCheckCase c = random_case(sizes, batch, data);
  TrainBatch tb{&c.inputs, &c.actions, &c.targets};
  RngStream mask_rng(seed + 2000);
  const auto mask = net.make_dropout_mask(batch, mask_rng);

  std::vector<double> analytic;
  net.train_loss_and_grad(tb, mask, analytic);
  const auto fd = finite_diff_grad(net, tb, mask);
  return max_grad_rel_error(analytic, fd);
}

}  // namespace upstream::testing
