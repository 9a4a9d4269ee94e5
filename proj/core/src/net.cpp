#include "upstream/net.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "upstream/errors.hpp"

namespace upstream {

namespace {
constexpr double kBnEps = 1e-5;
}

QNetwork::QNetwork(std::vector<int> layer_sizes, RngStream& init_rng,
                   double dropout, bool batch_norm)
    : sizes_(std::move(layer_sizes)), dropout_(dropout), batch_norm_(batch_norm) {
  if (sizes_.size() < 2)
    throw ConfigError("QNetwork: need at least input and output layer sizes");
  for (int s : sizes_)
    if (s < 1) throw ConfigError("QNetwork: layer sizes must be >= 1");
  if (!(dropout_ >= 0.0 && dropout_ < 1.0))
    throw ConfigError("QNetwork: dropout must be in [0, 1)");

  int total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
    total += layer_param_count(static_cast<int>(l));
  params_.assign(static_cast<std::size_t>(total), 0.0);

  // Scaled uniform init with fan-in scaling; biases start at zero.
  const int n_layers = static_cast<int>(sizes_.size()) - 1;
  for (int l = 0; l < n_layers; ++l) {
    const double limit = std::sqrt(1.0 / sizes_[static_cast<std::size_t>(l)]);
    double* w = params_.data() + weight_offset(l);
    const int n_w = sizes_[static_cast<std::size_t>(l) + 1] * sizes_[static_cast<std::size_t>(l)];
    for (int i = 0; i < n_w; ++i) w[i] = init_rng.uniform(-limit, limit);
    if (batch_norm_ && l < n_layers - 1) {
      double* gamma = params_.data() + gamma_offset(l);
      for (int i = 0; i < sizes_[static_cast<std::size_t>(l) + 1]; ++i) gamma[i] = 1.0;
    }
  }

  if (batch_norm_) {
    running_mean_.resize(static_cast<std::size_t>(n_layers) - 1);
    running_var_.resize(static_cast<std::size_t>(n_layers) - 1);
    for (int l = 0; l + 1 < n_layers; ++l) {
      running_mean_[static_cast<std::size_t>(l)].assign(
          static_cast<std::size_t>(sizes_[static_cast<std::size_t>(l) + 1]), 0.0);
      running_var_[static_cast<std::size_t>(l)].assign(
          static_cast<std::size_t>(sizes_[static_cast<std::size_t>(l) + 1]), 1.0);
    }
  }
}

int QNetwork::layer_param_count(int layer) const {
  const int in = sizes_[static_cast<std::size_t>(layer)];
  const int out = sizes_[static_cast<std::size_t>(layer) + 1];
  int count = out * in + out;
  const int n_layers = static_cast<int>(sizes_.size()) - 1;
  if (batch_norm_ && layer < n_layers - 1) count += 2 * out;  // gamma, beta
  return count;
}

int QNetwork::weight_offset(int layer) const {
  int off = 0;
  for (int l = 0; l < layer; ++l) off += layer_param_count(l);
  return off;
}

int QNetwork::bias_offset(int layer) const {
  const int in = sizes_[static_cast<std::size_t>(layer)];
  const int out = sizes_[static_cast<std::size_t>(layer) + 1];
  return weight_offset(layer) + out * in;
}

int QNetwork::gamma_offset(int layer) const {
  const int out = sizes_[static_cast<std::size_t>(layer) + 1];
  return bias_offset(layer) + out;
}

int QNetwork::beta_offset(int layer) const {
  const int out = sizes_[static_cast<std::size_t>(layer) + 1];
  return gamma_offset(layer) + out;
}

struct QNetwork::Cache {
  std::vector<Matrix> layer_inputs;  // A_l, input to each affine layer
  std::vector<Matrix> relu_inputs;   // Zn, post-norm pre-activation (hidden)
  std::vector<Matrix> xhat;          // batch-norm normalized values
  std::vector<std::vector<double>> mu, var;  // per-feature batch statistics
};

void QNetwork::forward_impl(const Matrix& inputs, bool training,
                            const std::vector<double>* dropout_mask, Matrix& out,
                            Cache* cache) const {
  if (inputs.cols != sizes_.front())
    throw std::invalid_argument("QNetwork: input has " + std::to_string(inputs.cols) +
                                " features, expected " + std::to_string(sizes_.front()));
  const int n_layers = static_cast<int>(sizes_.size()) - 1;
  const int batch = inputs.rows;

  if (cache) {
    cache->layer_inputs.assign(static_cast<std::size_t>(n_layers), Matrix());
    cache->relu_inputs.assign(static_cast<std::size_t>(n_layers), Matrix());
    cache->xhat.assign(static_cast<std::size_t>(n_layers), Matrix());
    cache->mu.assign(static_cast<std::size_t>(n_layers), {});
    cache->var.assign(static_cast<std::size_t>(n_layers), {});
  }

  Matrix a = inputs;
  for (int l = 0; l < n_layers; ++l) {
    if (cache) cache->layer_inputs[static_cast<std::size_t>(l)] = a;
    const int in = sizes_[static_cast<std::size_t>(l)];
    const int n_out = sizes_[static_cast<std::size_t>(l) + 1];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);

    Matrix z(batch, n_out);
    for (int r = 0; r < batch; ++r) {
      const double* arow = a.row(r);
      double* zrow = z.row(r);
      for (int o = 0; o < n_out; ++o) {
        const double* wrow = w + static_cast<std::size_t>(o) * in;
        double acc = b[o];
        for (int c = 0; c < in; ++c) acc += wrow[c] * arow[c];
        zrow[o] = acc;
      }
    }

    if (l == n_layers - 1) {
      out = std::move(z);
      return;
    }

    // Hidden layer: optional batch norm, then ReLU.
    if (batch_norm_) {
      const double* gamma = params_.data() + gamma_offset(l);
      const double* beta = params_.data() + beta_offset(l);
      std::vector<double> mu(static_cast<std::size_t>(n_out), 0.0);
      std::vector<double> var(static_cast<std::size_t>(n_out), 0.0);
      const bool use_batch_stats = training && batch > 1;
      if (use_batch_stats) {
        for (int r = 0; r < batch; ++r)
          for (int o = 0; o < n_out; ++o) mu[static_cast<std::size_t>(o)] += z(r, o);
        for (int o = 0; o < n_out; ++o) mu[static_cast<std::size_t>(o)] /= batch;
        for (int r = 0; r < batch; ++r)
          for (int o = 0; o < n_out; ++o) {
            const double d = z(r, o) - mu[static_cast<std::size_t>(o)];
            var[static_cast<std::size_t>(o)] += d * d;
          }
        for (int o = 0; o < n_out; ++o) var[static_cast<std::size_t>(o)] /= batch;
      } else {
        mu = running_mean_[static_cast<std::size_t>(l)];
        var = running_var_[static_cast<std::size_t>(l)];
      }
      Matrix xh(batch, n_out);
      for (int r = 0; r < batch; ++r)
        for (int o = 0; o < n_out; ++o) {
          xh(r, o) = (z(r, o) - mu[static_cast<std::size_t>(o)]) /
                     std::sqrt(var[static_cast<std::size_t>(o)] + kBnEps);
          z(r, o) = gamma[o] * xh(r, o) + beta[o];
        }
      if (cache) {
        cache->xhat[static_cast<std::size_t>(l)] = std::move(xh);
        cache->mu[static_cast<std::size_t>(l)] = std::move(mu);
        cache->var[static_cast<std::size_t>(l)] = std::move(var);
      }
    }

    if (cache) cache->relu_inputs[static_cast<std::size_t>(l)] = z;
    for (double& v : z.data) v = v > 0.0 ? v : 0.0;

    if (l == n_layers - 2 && training && dropout_ > 0.0 && dropout_mask) {
      if (dropout_mask->size() != z.data.size())
        throw std::invalid_argument("QNetwork: dropout mask size mismatch");
      for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] *= (*dropout_mask)[i];
    }
    a = std::move(z);
  }
}

std::vector<double> QNetwork::forward(const std::vector<double>& obs) const {
  Matrix in(1, static_cast<int>(obs.size()));
  in.data = obs;
  Matrix out;
  forward_impl(in, false, nullptr, out, nullptr);
  return out.data;
}

std::vector<double> QNetwork::forward(const std::vector<double>& obs, bool training,
                                      RngStream& rng) const {
  if (!training) return forward(obs);
  Matrix in(1, static_cast<int>(obs.size()));
  in.data = obs;
  const auto mask = make_dropout_mask(1, rng);
  Matrix out;
  forward_impl(in, true, &mask, out, nullptr);
  return out.data;
}

Matrix QNetwork::forward_batch(const Matrix& inputs) const {
  Matrix out;
  forward_impl(inputs, false, nullptr, out, nullptr);
  return out;
}

std::vector<double> QNetwork::make_dropout_mask(int batch_rows, RngStream& rng) const {
  const int last_hidden = sizes_[sizes_.size() - 2];
  std::vector<double> mask(static_cast<std::size_t>(batch_rows) * last_hidden, 0.0);
  if (dropout_ <= 0.0) {
    for (double& m : mask) m = 1.0;
    return mask;
  }
  const double keep = 1.0 - dropout_;
  for (double& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

namespace {

double batch_loss(const Matrix& out, const std::vector<int>& actions,
                  const std::vector<double>& targets) {
  double loss = 0.0;
  for (int r = 0; r < out.rows; ++r) {
    const double d = out(r, actions[static_cast<std::size_t>(r)]) -
                     targets[static_cast<std::size_t>(r)];
    loss += d * d;
  }
  return loss / out.rows;
}

}  // namespace

double QNetwork::train_loss(const TrainBatch& batch,
                            const std::vector<double>& dropout_mask) const {
  Matrix out;
  forward_impl(*batch.inputs, true, &dropout_mask, out, nullptr);
  return batch_loss(out, *batch.actions, *batch.targets);
}

double QNetwork::train_loss_and_grad(const TrainBatch& batch,
                                     const std::vector<double>& dropout_mask,
                                     std::vector<double>& grad) {
  const Matrix& inputs = *batch.inputs;
  const int n_layers = static_cast<int>(sizes_.size()) - 1;
  const int B = inputs.rows;

  Cache cache;
  Matrix out;
  forward_impl(inputs, true, &dropout_mask, out, &cache);
  const double loss = batch_loss(out, *batch.actions, *batch.targets);

  if (batch_norm_ && B > 1) {
    // Update running statistics from this batch.
    for (int l = 0; l + 1 < n_layers; ++l) {
      auto& rm = running_mean_[static_cast<std::size_t>(l)];
      auto& rv = running_var_[static_cast<std::size_t>(l)];
      const auto& mu = cache.mu[static_cast<std::size_t>(l)];
      const auto& var = cache.var[static_cast<std::size_t>(l)];
      for (std::size_t o = 0; o < rm.size(); ++o) {
        rm[o] = bn_momentum_ * rm[o] + (1.0 - bn_momentum_) * mu[o];
        rv[o] = bn_momentum_ * rv[o] + (1.0 - bn_momentum_) * var[o];
      }
    }
  }

  grad.assign(params_.size(), 0.0);

  // d(loss)/d(out): only the taken action's output carries error signal.
  Matrix delta(B, out.cols);
  for (int r = 0; r < B; ++r) {
    const int a = (*batch.actions)[static_cast<std::size_t>(r)];
    delta(r, a) = 2.0 / B *
                  (out(r, a) - (*batch.targets)[static_cast<std::size_t>(r)]);
  }

  for (int l = n_layers - 1; l >= 0; --l) {
    const int in = sizes_[static_cast<std::size_t>(l)];
    const int n_out = sizes_[static_cast<std::size_t>(l) + 1];
    const Matrix& a_in = cache.layer_inputs[static_cast<std::size_t>(l)];
    const double* w = params_.data() + weight_offset(l);
    double* dw = grad.data() + weight_offset(l);
    double* db = grad.data() + bias_offset(l);

    // dW = delta^T * A_in, db = column sums of delta.
    for (int r = 0; r < B; ++r) {
      const double* arow = a_in.row(r);
      const double* drow = delta.row(r);
      for (int o = 0; o < n_out; ++o) {
        const double d = drow[o];
        if (d == 0.0) continue;
        double* dwrow = dw + static_cast<std::size_t>(o) * in;
        for (int c = 0; c < in; ++c) dwrow[c] += d * arow[c];
        db[o] += d;
      }
    }

    if (l == 0) break;

    // Propagate to the previous activation: dA = delta * W.
    Matrix dprev(B, in);
    for (int r = 0; r < B; ++r) {
      const double* drow = delta.row(r);
      double* prow = dprev.row(r);
      for (int o = 0; o < n_out; ++o) {
        const double d = drow[o];
        if (d == 0.0) continue;
        const double* wrow = w + static_cast<std::size_t>(o) * in;
        for (int c = 0; c < in; ++c) prow[c] += d * wrow[c];
      }
    }

    // Through dropout (only applied after the last hidden layer).
    const int hl = l - 1;  // hidden layer index feeding this affine
    if (hl == n_layers - 2 && dropout_ > 0.0) {
      for (std::size_t i = 0; i < dprev.data.size(); ++i)
        dprev.data[i] *= dropout_mask[i];
    }

    // Through ReLU.
    const Matrix& relu_in = cache.relu_inputs[static_cast<std::size_t>(hl)];
    for (std::size_t i = 0; i < dprev.data.size(); ++i)
      if (relu_in.data[i] <= 0.0) dprev.data[i] = 0.0;

    // Through batch norm.
    if (batch_norm_) {
      const double* gamma = params_.data() + gamma_offset(hl);
      double* dgamma = grad.data() + gamma_offset(hl);
      double* dbeta = grad.data() + beta_offset(hl);
      const Matrix& xh = cache.xhat[static_cast<std::size_t>(hl)];
      const auto& var = cache.var[static_cast<std::size_t>(hl)];
      const bool used_batch_stats = B > 1;

      for (int r = 0; r < B; ++r)
        for (int o = 0; o < in; ++o) {
          dgamma[o] += dprev(r, o) * xh(r, o);
          dbeta[o] += dprev(r, o);
        }

      Matrix dz(B, in);
      if (used_batch_stats) {
        for (int o = 0; o < in; ++o) {
          const double s = std::sqrt(var[static_cast<std::size_t>(o)] + kBnEps);
          double sum_dxh = 0.0, sum_dxh_xh = 0.0;
          for (int r = 0; r < B; ++r) {
            const double dxh = dprev(r, o) * gamma[o];
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh(r, o);
          }
          for (int r = 0; r < B; ++r) {
            const double dxh = dprev(r, o) * gamma[o];
            dz(r, o) = (dxh - sum_dxh / B - xh(r, o) * sum_dxh_xh / B) / s;
          }
        }
      } else {
        for (int r = 0; r < B; ++r)
          for (int o = 0; o < in; ++o) {
            const double s = std::sqrt(var[static_cast<std::size_t>(o)] + kBnEps);
            dz(r, o) = dprev(r, o) * gamma[o] / s;
          }
      }
      dprev = std::move(dz);
    }

    delta = std::move(dprev);
  }
  return loss;
}

void QNetwork::copy_from(const QNetwork& source) {
  if (sizes_ != source.sizes_ || params_.size() != source.params_.size() ||
      batch_norm_ != source.batch_norm_)
    throw std::invalid_argument("QNetwork::copy_from: shape mismatch");
  params_ = source.params_;
  running_mean_ = source.running_mean_;
  running_var_ = source.running_var_;
}

std::string QNetwork::to_json_string() const {
  nlohmann::json j;
  j["version"] = 1;
  j["layer_sizes"] = sizes_;
  j["dropout"] = dropout_;
  j["batch_norm"] = batch_norm_;
  j["params"] = params_;
  j["running_mean"] = running_mean_;
  j["running_var"] = running_var_;
  return j.dump();
}

QNetwork QNetwork::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("QNetwork: cannot parse checkpoint JSON: ") + e.what());
  }
  if (j.value("version", 0) != 1)
    throw ConfigError("QNetwork: unsupported checkpoint version");
  QNetwork net;
  net.sizes_ = j.at("layer_sizes").get<std::vector<int>>();
  net.dropout_ = j.at("dropout");
  net.batch_norm_ = j.at("batch_norm");
  net.params_ = j.at("params").get<std::vector<double>>();
  net.running_mean_ = j.at("running_mean").get<std::vector<std::vector<double>>>();
  net.running_var_ = j.at("running_var").get<std::vector<std::vector<double>>>();

  int total = 0;
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l)
    total += net.layer_param_count(static_cast<int>(l));
  if (static_cast<int>(net.params_.size()) != total)
    throw ConfigError("QNetwork: checkpoint parameter count does not match shapes");
  return net;
}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (grad.size() != params.size())
    throw std::invalid_argument("AdamOptimizer: gradient size mismatch");
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= alpha_ * mhat / (std::sqrt(vhat) + epsilon_);
  }
}

void AdamOptimizer::restore(std::vector<double> m, std::vector<double> v, long t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

}  // namespace upstream
