#include "mirl/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mirl/error.hpp"

namespace mirl {

namespace {

void check_dims(const MlpSpec& spec, std::span<const double> params,
                std::size_t x_size) {
  if (params.size() != spec.param_count()) {
    throw ConfigError("mlp: expected " + std::to_string(spec.param_count()) +
                      " parameters, got " + std::to_string(params.size()));
  }
  if (x_size != spec.in_dim) {
    throw ConfigError("mlp: expected input of size " +
                      std::to_string(spec.in_dim) + ", got " +
                      std::to_string(x_size));
  }
}

// Hidden activations tanh(W1 x + b1).
void hidden_layer(const MlpSpec& spec, std::span<const double> params,
                  std::span<const double> x, std::span<double> h) {
  const double* w1 = params.data();
  const double* b1 = w1 + spec.hidden_dim * spec.in_dim;
  for (std::size_t j = 0; j < spec.hidden_dim; ++j) {
    double acc = b1[j];
    const double* row = w1 + j * spec.in_dim;
    for (std::size_t i = 0; i < spec.in_dim; ++i) acc += row[i] * x[i];
    h[j] = std::tanh(acc);
  }
}

}  // namespace

void MlpSpec::validate() const {
  if (in_dim == 0 || hidden_dim == 0 || out_dim == 0) {
    throw ConfigError("mlp: all dimensions must be at least 1");
  }
}

std::vector<double> mlp_forward(const MlpSpec& spec,
                                std::span<const double> params,
                                std::span<const double> x) {
  check_dims(spec, params, x.size());
  std::vector<double> h(spec.hidden_dim);
  hidden_layer(spec, params, x, h);
  const double* w2 = params.data() + (spec.in_dim + 1) * spec.hidden_dim;
  const double* b2 = w2 + spec.out_dim * spec.hidden_dim;
  std::vector<double> y(spec.out_dim);
  for (std::size_t o = 0; o < spec.out_dim; ++o) {
    double acc = b2[o];
    const double* row = w2 + o * spec.hidden_dim;
    for (std::size_t j = 0; j < spec.hidden_dim; ++j) acc += row[j] * h[j];
    y[o] = acc;
  }
  return y;
}

void mlp_backward(const MlpSpec& spec, std::span<const double> params,
                  std::span<const double> x, std::span<const double> upstream,
                  std::span<double> grad_params,
                  std::span<double> grad_input) {
  check_dims(spec, params, x.size());
  if (upstream.size() != spec.out_dim) {
    throw ConfigError("mlp: upstream gradient has wrong size");
  }
  if (grad_params.size() != spec.param_count()) {
    throw ConfigError("mlp: gradient buffer has wrong size");
  }
  if (!grad_input.empty() && grad_input.size() != spec.in_dim) {
    throw ConfigError("mlp: input gradient buffer has wrong size");
  }
  if (!all_finite(upstream)) {
    throw NumericError("mlp: non-finite upstream gradient");
  }

  const std::size_t n_in = spec.in_dim;
  const std::size_t n_h = spec.hidden_dim;
  const std::size_t n_out = spec.out_dim;
  std::vector<double> h(n_h);
  hidden_layer(spec, params, x, h);

  const double* w1 = params.data();
  const double* w2 = params.data() + (n_in + 1) * n_h;
  double* g_w1 = grad_params.data();
  double* g_b1 = g_w1 + n_h * n_in;
  double* g_w2 = g_b1 + n_h;
  double* g_b2 = g_w2 + n_out * n_h;

  std::vector<double> d_pre(n_h, 0.0);
  for (std::size_t o = 0; o < n_out; ++o) {
    const double up = upstream[o];
    g_b2[o] += up;
    double* g_row = g_w2 + o * n_h;
    const double* row = w2 + o * n_h;
    for (std::size_t j = 0; j < n_h; ++j) {
      g_row[j] += up * h[j];
      d_pre[j] += up * row[j];
    }
  }
  for (std::size_t j = 0; j < n_h; ++j) {
    const double d = d_pre[j] * (1.0 - h[j] * h[j]);
    g_b1[j] += d;
    double* g_row = g_w1 + j * n_in;
    const double* row = w1 + j * n_in;
    for (std::size_t i = 0; i < n_in; ++i) {
      g_row[i] += d * x[i];
      if (!grad_input.empty()) grad_input[i] += d * row[i];
    }
  }
}

FlatParams mlp_param_grad(const MlpSpec& spec, std::span<const double> params,
                          std::span<const double> x,
                          std::span<const double> upstream) {
  FlatParams grad(spec.param_count(), 0.0);
  mlp_backward(spec, params, x, upstream, grad);
  return grad;
}

FlatParams init_mlp_params(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  FlatParams params(spec.param_count(), 0.0);
  auto fill = [&](std::size_t offset, std::size_t fan_in,
                  std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t k = 0; k < fan_in * fan_out; ++k) {
      params[offset + k] = (2.0 * rng.uniform() - 1.0) * limit;
    }
  };
  fill(0, spec.in_dim, spec.hidden_dim);
  fill((spec.in_dim + 1) * spec.hidden_dim, spec.hidden_dim, spec.out_dim);
  return params;
}

FlatParams init_feature_params(const MlpSpec& spec, double scale, Rng& rng) {
  spec.validate();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("mlp: init scale must be positive");
  }
  FlatParams params(spec.param_count(), 0.0);
  const std::size_t hidden = (spec.in_dim + 1) * spec.hidden_dim;
  for (std::size_t k = 0; k < hidden; ++k) {
    params[k] = (2.0 * rng.uniform() - 1.0) * scale;
  }
  return params;
}

Mlp::Mlp(MlpSpec spec) : spec_(spec) {
  spec_.validate();
  params_.assign(spec_.param_count(), 0.0);
}

Mlp::Mlp(MlpSpec spec, FlatParams params)
    : spec_(spec), params_(std::move(params)) {
  spec_.validate();
  if (params_.size() != spec_.param_count()) {
    throw ConfigError("mlp: parameter count does not match spec");
  }
}

Mlp Mlp::initialized(MlpSpec spec, Rng& rng) {
  return Mlp(spec, init_mlp_params(spec, rng));
}

void Mlp::set_params(std::span<const double> params) {
  if (params.size() != params_.size()) {
    throw ConfigError("mlp: parameter count does not match spec");
  }
  std::copy(params.begin(), params.end(), params_.begin());
}

double Mlp::forward_scalar(std::span<const double> x) const {
  if (spec_.out_dim != 1) throw ConfigError("mlp: forward_scalar needs out_dim 1");
  return forward(x)[0];
}

GaussianPolicy::GaussianPolicy(Mlp mean_net, std::vector<double> log_std,
                               double mean_scale)
    : mean_net_(std::move(mean_net)),
      log_std_(std::move(log_std)),
      mean_scale_(mean_scale) {
  if (log_std_.size() != mean_net_.spec().out_dim) {
    throw ConfigError("policy: log_std size must equal action dimension");
  }
  if (!(mean_scale_ >= 0.0)) throw ConfigError("policy: mean_scale must be non-negative");
  for (double& l : log_std_) l = std::clamp(l, kMinLogStd, kMaxLogStd);
}

GaussianPolicy GaussianPolicy::initialized(std::size_t state_dim,
                                           std::size_t action_dim,
                                           std::size_t hidden_dim, Rng& rng,
                                           double log_std_init,
                                           double mean_scale) {
  MlpSpec spec{state_dim, hidden_dim, action_dim};
  return GaussianPolicy(Mlp::initialized(spec, rng),
                        std::vector<double>(action_dim, log_std_init),
                        mean_scale);
}

FlatParams GaussianPolicy::flat() const {
  FlatParams out(mean_net_.params().begin(), mean_net_.params().end());
  out.insert(out.end(), log_std_.begin(), log_std_.end());
  return out;
}

void GaussianPolicy::set_flat(std::span<const double> flat) {
  if (flat.size() != param_count()) {
    throw ConfigError("policy: flat parameter size mismatch");
  }
  const std::size_t n = mean_net_.spec().param_count();
  mean_net_.set_params(flat.first(n));
  for (std::size_t d = 0; d < log_std_.size(); ++d) {
    log_std_[d] = std::clamp(flat[n + d], kMinLogStd, kMaxLogStd);
  }
}

std::vector<double> GaussianPolicy::mean_with_slope(
    std::span<const double> s, std::vector<double>& slope) const {
  std::vector<double> mu = mean_net_.forward(s);
  slope.assign(mu.size(), 1.0);
  if (mean_scale_ > 0.0) {
    for (std::size_t d = 0; d < mu.size(); ++d) {
      const double t = std::tanh(mu[d]);
      mu[d] = mean_scale_ * t;
      slope[d] = mean_scale_ * (1.0 - t * t);
    }
  }
  return mu;
}

std::vector<double> GaussianPolicy::mean(std::span<const double> s) const {
  std::vector<double> mu = mean_net_.forward(s);
  if (mean_scale_ > 0.0) {
    for (double& m : mu) m = mean_scale_ * std::tanh(m);
  }
  return mu;
}

std::vector<double> GaussianPolicy::sample(std::span<const double> s,
                                           Rng& rng) const {
  std::vector<double> a = mean(s);
  for (std::size_t d = 0; d < a.size(); ++d) {
    a[d] += std::exp(log_std_[d]) * rng.normal();
  }
  return a;
}

double GaussianPolicy::log_prob(std::span<const double> s,
                                std::span<const double> a) const {
  if (a.size() != action_dim()) throw ConfigError("policy: action size mismatch");
  const std::vector<double> mu = mean(s);
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double lp = 0.0;
  for (std::size_t d = 0; d < mu.size(); ++d) {
    const double z = (a[d] - mu[d]) * std::exp(-log_std_[d]);
    lp += -0.5 * z * z - log_std_[d] - kHalfLog2Pi;
  }
  return lp;
}

double GaussianPolicy::entropy() const {
  constexpr double kHalfLog2PiE = 1.41893853320467274178;
  double h = 0.0;
  for (double l : log_std_) h += l + kHalfLog2PiE;
  return h;
}

void GaussianPolicy::accumulate_log_prob_grad(std::span<const double> s,
                                              std::span<const double> a,
                                              double coeff,
                                              std::span<double> grad) const {
  if (grad.size() != param_count()) throw ConfigError("policy: gradient size mismatch");
  if (a.size() != action_dim()) throw ConfigError("policy: action size mismatch");
  std::vector<double> slope;
  const std::vector<double> mu = mean_with_slope(s, slope);
  const std::size_t n = mean_net_.spec().param_count();
  std::vector<double> upstream(mu.size());
  for (std::size_t d = 0; d < mu.size(); ++d) {
    const double inv_var = std::exp(-2.0 * log_std_[d]);
    const double diff = a[d] - mu[d];
    upstream[d] = coeff * diff * inv_var * slope[d];
    grad[n + d] += coeff * (diff * diff * inv_var - 1.0);
  }
  mean_net_.backward(s, upstream, grad.first(n));
}

void GaussianPolicy::accumulate_mean_grad(std::span<const double> s,
                                          std::span<const double> upstream,
                                          std::span<double> grad) const {
  if (grad.size() != param_count()) throw ConfigError("policy: gradient size mismatch");
  if (upstream.size() != action_dim()) throw ConfigError("policy: upstream size mismatch");
  std::vector<double> slope;
  mean_with_slope(s, slope);
  std::vector<double> raw_upstream(upstream.begin(), upstream.end());
  for (std::size_t d = 0; d < slope.size(); ++d) raw_upstream[d] *= slope[d];
  mean_net_.backward(s, raw_upstream, grad.first(mean_net_.spec().param_count()));
}

void GaussianPolicy::accumulate_entropy_grad(double coeff,
                                             std::span<double> grad) const {
  const std::size_t n = mean_net_.spec().param_count();
  for (std::size_t d = 0; d < log_std_.size(); ++d) grad[n + d] += coeff;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state, double lr) {
  if (params.size() != grad.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ConfigError("adam: shape mismatch");
  }
  if (!all_finite(grad)) throw NumericError("adam: non-finite gradient");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

void sgd_step(std::span<double> params, std::span<const double> grad,
              double lr) {
  if (params.size() != grad.size()) throw ConfigError("sgd: shape mismatch");
  if (!all_finite(grad)) throw NumericError("sgd: non-finite gradient");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

}  // namespace mirl
