#pragma once

// Plain-loop reimplementations used as test oracles. Nothing here shares
// code with the library beyond the parameter containers.

#include <latefit/cache.hpp>
#include <latefit/params.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace ref {

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const latefit::Mat<double>& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    }
  }
  return out;
}

inline std::array<double, 6> describe(const std::vector<double>& s) {
  const double n = double(s.size());
  double lo = s[0], hi = s[0], mean = 0;
  for (double x : s) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    mean += x / n;
  }
  double var = 0;
  for (double x : s) var += (x - mean) * (x - mean) / n;
  const double sd = std::sqrt(var);
  double skew = 0, kurt = 0;
  if (sd >= 1e-12) {
    for (double x : s) {
      const double z = (x - mean) / sd;
      skew += z * z * z / n;
      kurt += z * z * z * z / n;
    }
  }
  return {lo, hi, mean, sd, skew, kurt};
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (std::sqrt(aa) < 1e-12 || std::sqrt(bb) < 1e-12) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

inline Matrix attention(const Matrix& q_in, const Matrix& kv_in, const latefit::AttentionParams<double>& p,
                        std::vector<Matrix>* weights = nullptr) {
  const Matrix Q = matmul(q_in, to_matrix(p.Wq));
  const Matrix K = matmul(kv_in, to_matrix(p.Wk));
  const Matrix V = matmul(kv_in, to_matrix(p.Wv));
  const std::size_t width = Q[0].size();
  const std::size_t hd = width / p.heads;
  Matrix concat(q_in.size(), std::vector<double>(width, 0.0));
  if (weights) weights->assign(p.heads, {});
  for (std::size_t h = 0; h < p.heads; ++h) {
    for (std::size_t i = 0; i < Q.size(); ++i) {
      std::vector<double> logits(K.size());
      for (std::size_t j = 0; j < K.size(); ++j) {
        double dot = 0;
        for (std::size_t t = 0; t < hd; ++t) dot += Q[i][h * hd + t] * K[j][h * hd + t];
        logits[j] = dot / std::sqrt(double(hd));
      }
      double denom = 0;
      for (double l : logits) denom += std::exp(l);
      std::vector<double> w(K.size());
      for (std::size_t j = 0; j < K.size(); ++j) w[j] = std::exp(logits[j]) / denom;
      if (weights) (*weights)[h].push_back(w);
      for (std::size_t j = 0; j < K.size(); ++j) {
        for (std::size_t t = 0; t < hd; ++t) concat[i][h * hd + t] += w[j] * V[j][h * hd + t];
      }
    }
  }
  Matrix out = matmul(concat, to_matrix(p.Wo));
  for (auto& row : out) {
    for (std::size_t j = 0; j < width; ++j) row[j] += p.bo(0, j);
  }
  return out;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline double mlp(std::vector<double> x, const latefit::MlpParams<double>& p) {
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    std::vector<double> z(static_cast<std::size_t>(p.W[l].cols()));
    for (std::size_t j = 0; j < z.size(); ++j) {
      double acc = p.b[l](0, j);
      for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * p.W[l](i, j);
      z[j] = l + 1 == p.W.size() ? acc : gelu(acc);
    }
    x = std::move(z);
  }
  return x[0];
}

inline Matrix project(const latefit::CacheEntry& e, const latefit::BranchParams<double>& br) {
  const std::size_t dim = static_cast<std::size_t>(br.W.rows());
  Matrix out;
  for (std::size_t i = 0; i < e.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(br.W.cols()));
    for (std::size_t j = 0; j < row.size(); ++j) {
      double acc = br.b(0, j);
      for (std::size_t k = 0; k < dim; ++k) {
        acc += (double(e.vectors[i * dim + k]) + br.categorical(e.section_ids[i], k)) * br.W(k, j);
      }
      row[j] = acc;
    }
    out.push_back(row);
  }
  return out;
}

inline std::vector<double> column_mean(const Matrix& m) {
  std::vector<double> out(m[0].size(), 0.0);
  for (const auto& row : m) {
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j] / double(m.size());
  }
  return out;
}

inline double score_pair(const Matrix& Ep, const Matrix& Ef, const latefit::ModelParams<double>& p) {
  const Matrix ctx_f = attention(Ep, Ef, p.brief_to_profile);
  const Matrix ctx_p = attention(Ef, Ep, p.profile_to_brief);
  std::vector<double> s_pf, s_fp;
  for (std::size_t i = 0; i < Ep.size(); ++i) s_pf.push_back(cosine(Ep[i], ctx_f[i]));
  for (std::size_t i = 0; i < Ef.size(); ++i) s_fp.push_back(cosine(Ef[i], ctx_p[i]));
  std::vector<double> x;
  auto append = [&](const auto& v) { x.insert(x.end(), v.begin(), v.end()); };
  append(describe(s_pf));
  append(column_mean(Ep));
  append(column_mean(ctx_f));
  append(describe(s_fp));
  append(column_mean(Ef));
  append(column_mean(ctx_p));
  return mlp(x, p.mlp);
}

}  // namespace ref
