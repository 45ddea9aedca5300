#pragma once

#include <latefit/error.hpp>
#include <latefit/params.hpp>

#include <cmath>
#include <vector>

namespace latefit {

/// Intermediates kept from the forward pass for the backward pass.
template <typename S>
struct AttentionCache {
  Mat<S> Q, K, V, O;
  std::vector<Mat<S>> weights;  // per head, |queries| x |keys|, rows sum to 1
};

/// Multi-head cross-attention of `queries` over `keys_values`:
/// head_h = softmax(Q_h K_h^T / sqrt(head_dim)) V_h, heads concatenated,
/// then output-projected. Result has one row per query.
template <typename S>
Mat<S> cross_attention(const Mat<S>& queries, const Mat<S>& keys_values,
                       const AttentionParams<S>& p, AttentionCache<S>* cache = nullptr) {
  if (queries.rows() == 0 || keys_values.rows() == 0) {
    throw Error(ErrorKind::EmptySequence, "cross_attention needs non-empty sequences");
  }
  if (queries.cols() != p.Wq.rows() || keys_values.cols() != p.Wk.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "attention input width");
  }
  const auto width = p.Wq.cols();
  const auto hd = width / static_cast<Eigen::Index>(p.heads);
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));

  AttentionCache<S> local;
  AttentionCache<S>& c = cache ? *cache : local;
  c.Q.noalias() = queries * p.Wq;
  c.K.noalias() = keys_values * p.Wk;
  c.V.noalias() = keys_values * p.Wv;
  c.O.resize(queries.rows(), width);
  c.weights.resize(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * hd;
    Mat<S>& A = c.weights[h];
    A.noalias() = (c.Q.middleCols(off, hd) * c.K.middleCols(off, hd).transpose()) * scale;
    if (!A.allFinite()) throw Error(ErrorKind::NonFiniteLogit, "attention logits");
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      auto row = A.row(i);
      row.array() = (row.array() - row.maxCoeff()).exp();
      row /= row.sum();
    }
    c.O.middleCols(off, hd).noalias() = A * c.V.middleCols(off, hd);
  }
  Mat<S> out = c.O * p.Wo;
  out.rowwise() += p.bo.row(0);
  return out;
}

/// Backward pass. Gradients are accumulated into `grad`, `d_queries` and
/// `d_keys_values` (which must be pre-sized).
template <typename S>
void cross_attention_backward(const Mat<S>& queries, const Mat<S>& keys_values,
                              const AttentionParams<S>& p, const AttentionCache<S>& c,
                              const Mat<S>& d_out, AttentionParams<S>& grad, Mat<S>& d_queries,
                              Mat<S>& d_keys_values) {
  const auto width = p.Wq.cols();
  const auto hd = width / static_cast<Eigen::Index>(p.heads);
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));

  grad.Wo.noalias() += c.O.transpose() * d_out;
  grad.bo += d_out.colwise().sum();
  const Mat<S> dO = d_out * p.Wo.transpose();

  Mat<S> dQ(c.Q.rows(), width);
  Mat<S> dK(c.K.rows(), width);
  Mat<S> dV(c.V.rows(), width);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * hd;
    const Mat<S>& A = c.weights[h];
    const Mat<S> dA = dO.middleCols(off, hd) * c.V.middleCols(off, hd).transpose();
    dV.middleCols(off, hd).noalias() = A.transpose() * dO.middleCols(off, hd);
    Mat<S> dS = A.cwiseProduct(dA);
    const Eigen::Matrix<S, Eigen::Dynamic, 1> row_dot = dS.rowwise().sum();
    dS -= A.cwiseProduct(row_dot.replicate(1, A.cols()));
    dS *= scale;
    dQ.middleCols(off, hd).noalias() = dS * c.K.middleCols(off, hd);
    dK.middleCols(off, hd).noalias() = dS.transpose() * c.Q.middleCols(off, hd);
  }
  grad.Wq.noalias() += queries.transpose() * dQ;
  grad.Wk.noalias() += keys_values.transpose() * dK;
  grad.Wv.noalias() += keys_values.transpose() * dV;
  d_queries.noalias() += dQ * p.Wq.transpose();
  d_keys_values.noalias() += dK * p.Wk.transpose();
  d_keys_values.noalias() += dV * p.Wv.transpose();
}

}  // namespace latefit
