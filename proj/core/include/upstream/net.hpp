#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "upstream/rng.hpp"

namespace upstream {

// Row-major dense matrix, just enough for the MLP below.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
};

struct TrainBatch {
  const Matrix* inputs = nullptr;            // B x in_dim
  const std::vector<int>* actions = nullptr; // taken action per row
  const std::vector<double>* targets = nullptr;
};

// Multilayer perceptron Q-function: affine layers with rectified-linear
// hidden activations, optional per-hidden-layer batch normalization (off by
// default: small RL minibatches make batch statistics unstable), and
// inverted dropout on the last hidden activation in training mode only.
//
// All learnable parameters live in one flat vector so the optimizer, the
// finite-difference checks and target-network copies operate uniformly.
class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(std::vector<int> layer_sizes, RngStream& init_rng,
           double dropout = 0.2, bool batch_norm = false);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  bool batch_norm() const { return batch_norm_; }
  double dropout() const { return dropout_; }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  // Deterministic evaluation forward (running statistics, no dropout).
  std::vector<double> forward(const std::vector<double>& obs) const;
  // Training-mode single forward: dropout active, batch norm falls back to
  // running statistics (batch statistics need a batch).
  std::vector<double> forward(const std::vector<double>& obs, bool training,
                              RngStream& rng) const;
  Matrix forward_batch(const Matrix& inputs) const;  // evaluation mode

  // Inverted-dropout mask for one training batch: entries are 0 or 1/(1-p).
  std::vector<double> make_dropout_mask(int batch_rows, RngStream& rng) const;

  // Mean squared TD error over the batch, as a pure function of the
  // parameters given a fixed dropout mask (finite differences rely on this).
  double train_loss(const TrainBatch& batch,
                    const std::vector<double>& dropout_mask) const;
  // Same loss plus the analytic parameter gradient; updates batch-norm
  // running statistics as a side effect when batch norm is enabled.
  double train_loss_and_grad(const TrainBatch& batch,
                             const std::vector<double>& dropout_mask,
                             std::vector<double>& grad);

  // Copies parameters and normalization buffers; throws on shape mismatch.
  void copy_from(const QNetwork& source);

  std::string to_json_string() const;
  static QNetwork from_json_string(const std::string& text);

 private:
  struct Cache;
  void forward_impl(const Matrix& inputs, bool training,
                    const std::vector<double>* dropout_mask, Matrix& out,
                    Cache* cache) const;

  // Flat parameter layout per layer: W row-major, then b, then (when batch
  // norm is on and the layer is hidden) gamma and beta.
  int weight_offset(int layer) const;
  int bias_offset(int layer) const;
  int gamma_offset(int layer) const;
  int beta_offset(int layer) const;
  int layer_param_count(int layer) const;

  std::vector<int> sizes_;
  std::vector<double> params_;
  double dropout_ = 0.2;
  bool batch_norm_ = false;
  double bn_momentum_ = 0.9;
  // Running statistics per hidden layer (buffers, not parameters).
  std::vector<std::vector<double>> running_mean_;
  std::vector<std::vector<double>> running_var_;
};

// Adam with standard moment coefficients (0.9, 0.999) and epsilon 1e-8.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double alpha, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8)
      : alpha_(alpha), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(std::vector<double>& params, const std::vector<double>& grad);

  long steps_taken() const { return t_; }
  double alpha() const { return alpha_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void restore(std::vector<double> m, std::vector<double> v, long t);

 private:
  double alpha_, beta1_, beta2_, epsilon_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace upstream
