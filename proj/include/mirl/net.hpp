#ifndef MIRL_NET_HPP_
#define MIRL_NET_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mirl/rng.hpp"

namespace mirl {

// One-hidden-layer tanh perceptron.
struct MlpSpec {
  std::size_t in_dim = 1;
  std::size_t hidden_dim = 128;
  std::size_t out_dim = 1;

  std::size_t param_count() const {
    return (in_dim + 1) * hidden_dim + (hidden_dim + 1) * out_dim;
  }
  // Throws ConfigError when a dimension is zero.
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

// Canonical layout: W1 (hidden x in, row-major), b1, W2 (out x hidden,
// row-major), b2.
using FlatParams = std::vector<double>;

std::vector<double> mlp_forward(const MlpSpec& spec,
                                std::span<const double> params,
                                std::span<const double> x);

// Accumulates d(upstream . forward(x)) / d params into grad_params, and the
// input gradient into grad_input when it is non-empty.
void mlp_backward(const MlpSpec& spec, std::span<const double> params,
                  std::span<const double> x, std::span<const double> upstream,
                  std::span<double> grad_params,
                  std::span<double> grad_input = {});

FlatParams mlp_param_grad(const MlpSpec& spec, std::span<const double> params,
                          std::span<const double> x,
                          std::span<const double> upstream);

// Glorot-uniform weights, zero biases.
FlatParams init_mlp_params(const MlpSpec& spec, Rng& rng);
// Hidden weights and biases U(-scale, scale), zero output layer.
FlatParams init_feature_params(const MlpSpec& spec, double scale, Rng& rng);

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec);
  Mlp(MlpSpec spec, FlatParams params);
  static Mlp initialized(MlpSpec spec, Rng& rng);

  const MlpSpec& spec() const { return spec_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  void set_params(std::span<const double> params);

  std::vector<double> forward(std::span<const double> x) const {
    return mlp_forward(spec_, params_, x);
  }
  // Requires out_dim == 1.
  double forward_scalar(std::span<const double> x) const;
  void backward(std::span<const double> x, std::span<const double> upstream,
                std::span<double> grad_params,
                std::span<double> grad_input = {}) const {
    mlp_backward(spec_, params_, x, upstream, grad_params, grad_input);
  }

 private:
  MlpSpec spec_;
  FlatParams params_;
};

// Diagonal Gaussian with an MLP mean and a state-independent log std.
// With mean_scale > 0 the mean is squashed, mu = mean_scale * tanh(net(s)),
// keeping it inside the action box; mean_scale = 0 leaves mu = net(s).
// Flat parameter layout: mean-net parameters followed by log_std entries.
class GaussianPolicy {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  GaussianPolicy() = default;
  GaussianPolicy(Mlp mean_net, std::vector<double> log_std,
                 double mean_scale = 0.0);
  static GaussianPolicy initialized(std::size_t state_dim,
                                    std::size_t action_dim,
                                    std::size_t hidden_dim, Rng& rng,
                                    double log_std_init = 0.0,
                                    double mean_scale = 0.0);

  std::size_t state_dim() const { return mean_net_.spec().in_dim; }
  std::size_t action_dim() const { return log_std_.size(); }
  std::size_t param_count() const {
    return mean_net_.spec().param_count() + log_std_.size();
  }

  const Mlp& mean_net() const { return mean_net_; }
  std::span<const double> log_std() const { return log_std_; }
  double mean_scale() const { return mean_scale_; }

  FlatParams flat() const;
  // Log std entries are clamped into [kMinLogStd, kMaxLogStd].
  void set_flat(std::span<const double> flat);

  std::vector<double> mean(std::span<const double> s) const;
  std::vector<double> sample(std::span<const double> s, Rng& rng) const;
  double log_prob(std::span<const double> s, std::span<const double> a) const;
  double entropy() const;

  // grad += coeff * d log pi(a|s) / d theta.
  void accumulate_log_prob_grad(std::span<const double> s,
                                std::span<const double> a, double coeff,
                                std::span<double> grad) const;
  // grad += d(upstream . mean(s)) / d theta. Log std slots are untouched.
  void accumulate_mean_grad(std::span<const double> s,
                            std::span<const double> upstream,
                            std::span<double> grad) const;
  // grad += coeff * d entropy / d theta.
  void accumulate_entropy_grad(double coeff, std::span<double> grad) const;

 private:
  // Raw network output and d mu / d raw per dimension.
  std::vector<double> mean_with_slope(std::span<const double> s,
                                      std::vector<double>& slope) const;

  Mlp mean_net_;
  std::vector<double> log_std_;
  double mean_scale_ = 0.0;
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam descent step. Throws NumericError, leaving params and
// state untouched, when grad has a non-finite entry.
void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state, double lr);

// params -= lr * grad, with the same non-finite check.
void sgd_step(std::span<double> params, std::span<const double> grad,
              double lr);

bool all_finite(std::span<const double> values);

}  // namespace mirl

#endif  // MIRL_NET_HPP_
