#pragma once

#include <latefit/error.hpp>
#include <latefit/params.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace latefit {

struct DescStats {
  double min = 0, max = 0, mean = 0, std = 0, skewness = 0, kurtosis = 0;

  std::array<double, 6> as_array() const { return {min, max, mean, std, skewness, kurtosis}; }
};

inline constexpr double kSigmaFloor = 1e-12;
inline constexpr double kNormFloor = 1e-12;

/// Population moments. Skewness and kurtosis are the standardized third and
/// fourth moments (not excess), both 0 when sigma < 1e-12.
inline DescStats describe(std::span<const double> s) {
  if (s.empty()) throw Error(ErrorKind::EmptyDistribution, "describe() of empty distribution");
  const double n = static_cast<double>(s.size());
  DescStats d;
  d.min = *std::min_element(s.begin(), s.end());
  d.max = *std::max_element(s.begin(), s.end());
  double sum = 0;
  for (double x : s) sum += x;
  d.mean = sum / n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : s) {
    const double c = x - d.mean;
    const double c2 = c * c;
    m2 += c2;
    m3 += c2 * c;
    m4 += c2 * c2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  d.std = std::sqrt(m2);
  if (d.std >= kSigmaFloor) {
    d.skewness = m3 / (m2 * d.std);
    d.kurtosis = m4 / (m2 * m2);
  }
  // mean can drift outside [min, max] by an ulp for near-constant input
  d.mean = std::clamp(d.mean, d.min, d.max);
  return d;
}

/// dL/ds given dL/d(desc(s)) in the order (min, max, mean, std, skew, kurt).
/// min/max route to the first extremal element.
inline std::vector<double> describe_backward(std::span<const double> s,
                                             const std::array<double, 6>& g) {
  const std::size_t count = s.size();
  const double n = static_cast<double>(count);
  std::vector<double> ds(count, 0.0);
  const auto imin = static_cast<std::size_t>(std::min_element(s.begin(), s.end()) - s.begin());
  const auto imax = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
  ds[imin] += g[0];
  ds[imax] += g[1];
  double mean = 0;
  for (double x : s) mean += x;
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : s) {
    const double c = x - mean;
    m2 += c * c;
    m3 += c * c * c;
    m4 += c * c * c * c;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double sigma = std::sqrt(m2);
  // d m_k / d x_i = (k/n) (c_i^{k-1} - m_{k-1}), with m_1 = 0
  double g_m2 = 0, g_m3 = 0, g_m4 = 0;
  if (sigma >= kSigmaFloor) {
    g_m2 += g[3] / (2.0 * sigma);
    g_m3 += g[4] / (m2 * sigma);
    g_m2 += g[4] * (-1.5 * m3 / (m2 * m2 * sigma));
    g_m4 += g[5] / (m2 * m2);
    g_m2 += g[5] * (-2.0 * m4 / (m2 * m2 * m2));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const double c = s[i] - mean;
    ds[i] += g[2] / n;
    ds[i] += g_m2 * (2.0 / n) * c;
    ds[i] += g_m3 * (3.0 / n) * (c * c - m2);
    ds[i] += g_m4 * (4.0 / n) * (c * c * c - m3);
  }
  return ds;
}

/// values[i] = cos(seq[i], context[i]); 0 when either row has ~zero norm.
template <typename S>
std::vector<double> similarity_distribution(const Mat<S>& seq, const Mat<S>& context) {
  if (seq.rows() != context.rows() || seq.cols() != context.cols()) {
    throw Error(ErrorKind::LengthMismatch, "similarity_distribution shape mismatch");
  }
  std::vector<double> out(static_cast<std::size_t>(seq.rows()));
  for (Eigen::Index i = 0; i < seq.rows(); ++i) {
    const auto a = seq.row(i).template cast<double>();
    const auto c = context.row(i).template cast<double>();
    const double na = a.norm();
    const double nc = c.norm();
    out[static_cast<std::size_t>(i)] =
        (na < kNormFloor || nc < kNormFloor) ? 0.0 : std::clamp(a.dot(c) / (na * nc), -1.0, 1.0);
  }
  return out;
}

template <typename S>
void similarity_backward(const Mat<S>& seq, const Mat<S>& context, std::span<const double> values,
                         std::span<const double> d_values, Mat<S>& d_seq, Mat<S>& d_context) {
  for (Eigen::Index i = 0; i < seq.rows(); ++i) {
    const RowVec<double> a = seq.row(i).template cast<double>();
    const RowVec<double> c = context.row(i).template cast<double>();
    const double na = a.norm();
    const double nc = c.norm();
    if (na < kNormFloor || nc < kNormFloor) continue;
    const auto k = static_cast<std::size_t>(i);
    const double g = d_values[k];
    const double s = values[k];
    d_seq.row(i) += (g * (c / (na * nc) - s * a / (na * na))).template cast<S>();
    d_context.row(i) += (g * (a / (na * nc) - s * c / (nc * nc))).template cast<S>();
  }
}

}  // namespace latefit
