#pragma once

#include <latefit/params.hpp>
#include <latefit/rng.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace latefit {

template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
}

template <typename S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
  const S pdf = std::exp(S(-0.5) * x * x) / std::sqrt(S(2) * std::numbers::pi_v<S>);
  return cdf + x * pdf;
}

template <typename S>
struct MlpCache {
  std::vector<Mat<S>> inputs;  // input to each layer
  std::vector<Mat<S>> pre;     // pre-activation of each hidden layer
  std::vector<Mat<S>> masks;   // scaled dropout masks (empty when disabled)
};

/// Rows are samples. GELU on hidden layers, inverted dropout after each
/// hidden activation when `dropout_rng` is given, linear output.
template <typename S>
Mat<S> mlp_forward(const Mat<S>& x, const MlpParams<S>& p, double dropout, Rng* dropout_rng,
                   MlpCache<S>* cache = nullptr) {
  MlpCache<S> local;
  MlpCache<S>& c = cache ? *cache : local;
  const std::size_t layers = p.W.size();
  c.inputs.assign(layers, {});
  c.pre.assign(layers, {});
  c.masks.assign(layers, {});
  Mat<S> h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    c.inputs[l] = h;
    Mat<S> z = h * p.W[l];
    z.rowwise() += p.b[l].row(0);
    if (l + 1 == layers) return z;
    c.pre[l] = z;
    h = z.unaryExpr([](S v) { return gelu(v); });
    if (dropout_rng && dropout > 0.0) {
      const S keep_scale = static_cast<S>(1.0 / (1.0 - dropout));
      Mat<S>& m = c.masks[l];
      m.resize(h.rows(), h.cols());
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = dropout_rng->bernoulli(dropout) ? S(0) : keep_scale;
      }
      h = h.cwiseProduct(m);
    }
  }
  return h;
}

/// Returns dL/dx and accumulates parameter gradients.
template <typename S>
Mat<S> mlp_backward(const MlpParams<S>& p, const MlpCache<S>& c, const Mat<S>& d_out,
                    MlpParams<S>& grad) {
  Mat<S> dz = d_out;
  for (std::size_t l = p.W.size(); l-- > 0;) {
    grad.W[l].noalias() += c.inputs[l].transpose() * dz;
    grad.b[l] += dz.colwise().sum();
    Mat<S> dx = dz * p.W[l].transpose();
    if (l == 0) return dx;
    const std::size_t prev = l - 1;
    if (c.masks[prev].size() > 0) dx = dx.cwiseProduct(c.masks[prev]);
    dz = dx.cwiseProduct(c.pre[prev].unaryExpr([](S v) { return gelu_grad(v); }));
  }
  return dz;
}

}  // namespace latefit
