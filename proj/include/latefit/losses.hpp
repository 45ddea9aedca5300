#pragma once

#include <latefit/error.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace latefit {

enum class LossKind { mse, margin_mse_labeled, margin_mse_relaxed, cmmd, clid_mse };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::margin_mse_labeled: return "margin_mse_labeled";
    case LossKind::margin_mse_relaxed: return "margin_mse_relaxed";
    case LossKind::cmmd: return "cmmd";
    case LossKind::clid_mse: return "clid_mse";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  for (auto k : {LossKind::mse, LossKind::margin_mse_labeled, LossKind::margin_mse_relaxed,
                 LossKind::cmmd, LossKind::clid_mse}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::Usage, "unknown loss '" + std::string(s) + "'");
}

/// Candidates of one project: teacher targets, student outputs, optional labels.
struct ScoreGroup {
  std::vector<double> teacher;
  std::vector<double> student;
  std::vector<std::optional<int>> labels;

  std::size_t size() const { return teacher.size(); }
};

/// Loss value with dL/d(student score), shaped like the input groups.
struct LossResult {
  double value = 0;
  std::vector<std::vector<double>> grad;
};

namespace detail {

inline LossResult zero_grad(const std::vector<ScoreGroup>& groups) {
  LossResult r;
  r.grad.reserve(groups.size());
  for (const auto& g : groups) r.grad.emplace_back(g.size(), 0.0);
  return r;
}

inline void add(LossResult& into, const LossResult& other) {
  into.value += other.value;
  for (std::size_t p = 0; p < into.grad.size(); ++p) {
    for (std::size_t i = 0; i < into.grad[p].size(); ++i) into.grad[p][i] += other.grad[p][i];
  }
}

template <typename PairFilter>
LossResult margin_mse(const std::vector<ScoreGroup>& groups, PairFilter keep) {
  auto r = zero_grad(groups);
  std::size_t n = 0;
  for (std::size_t p = 0; p < groups.size(); ++p) {
    const auto& g = groups[p];
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (i == j || !keep(g, i, j)) continue;
        const double diff = (g.teacher[i] - g.teacher[j]) - (g.student[i] - g.student[j]);
        r.value += diff * diff;
        r.grad[p][i] += -2.0 * diff;
        r.grad[p][j] += 2.0 * diff;
        ++n;
      }
    }
  }
  if (n == 0) throw Error(ErrorKind::NoValidPairs, "no candidate pair in batch");
  const double inv = 1.0 / static_cast<double>(n);
  r.value *= inv;
  for (auto& v : r.grad) {
    for (auto& x : v) x *= inv;
  }
  return r;
}

}  // namespace detail

/// Mean over all records of (teacher - student)^2.
inline LossResult loss_mse(const std::vector<ScoreGroup>& groups) {
  auto r = detail::zero_grad(groups);
  std::size_t n = 0;
  for (std::size_t p = 0; p < groups.size(); ++p) {
    for (std::size_t i = 0; i < groups[p].size(); ++i) {
      const double diff = groups[p].teacher[i] - groups[p].student[i];
      r.value += diff * diff;
      r.grad[p][i] = -2.0 * diff;
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorKind::EmptyBatch, "mse over empty batch");
  const double inv = 1.0 / static_cast<double>(n);
  r.value *= inv;
  for (auto& v : r.grad) {
    for (auto& x : v) x *= inv;
  }
  return r;
}

/// Margin MSE over (relevant, non-relevant) candidate pairs of the same project.
inline LossResult loss_margin_mse_labeled(const std::vector<ScoreGroup>& groups) {
  for (const auto& g : groups) {
    if (g.labels.size() != g.size() ||
        std::any_of(g.labels.begin(), g.labels.end(), [](auto l) { return !l.has_value(); })) {
      throw Error(ErrorKind::NoValidPairs, "labeled margin loss requires labels on every record");
    }
  }
  return detail::margin_mse(groups, [](const ScoreGroup& g, std::size_t i, std::size_t j) {
    return *g.labels[i] == 1 && *g.labels[j] == 0;
  });
}

/// Margin MSE over all ordered candidate pairs f != f' of the same project.
inline LossResult loss_margin_mse_relaxed(const std::vector<ScoreGroup>& groups) {
  return detail::margin_mse(groups, [](const ScoreGroup&, std::size_t, std::size_t) { return true; });
}

inline LossResult loss_cmmd(const std::vector<ScoreGroup>& groups) {
  auto r = loss_margin_mse_relaxed(groups);
  detail::add(r, loss_mse(groups));
  return r;
}

inline constexpr double kClidFloor = 1e-6;

/// Per project: cross-entropy between sum-normalized teacher and student
/// scores, divided by the candidate count; averaged over projects. Student
/// scores are floored at 1e-6 before normalizing.
inline LossResult loss_clid(const std::vector<ScoreGroup>& groups) {
  auto r = detail::zero_grad(groups);
  if (groups.empty()) throw Error(ErrorKind::EmptyBatch, "clid over empty batch");
  const double inv_projects = 1.0 / static_cast<double>(groups.size());
  for (std::size_t p = 0; p < groups.size(); ++p) {
    const auto& g = groups[p];
    if (g.size() == 0) throw Error(ErrorKind::EmptyBatch, "project without candidates");
    double t_sum = 0;
    double z_sum = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      t_sum += g.teacher[i];
      z_sum += std::max(g.student[i], kClidFloor);
    }
    if (!(t_sum > 0.0)) {
      throw Error(ErrorKind::DegenerateProject, "all teacher scores are zero");
    }
    const double k = static_cast<double>(g.size());
    double loss = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double t_hat = g.teacher[i] / t_sum;
      const bool clamped = g.student[i] < kClidFloor;
      const double z = clamped ? kClidFloor : g.student[i];
      if (t_hat > 0.0) loss -= t_hat * std::log(z / z_sum);
      // d/dz_i of -(1/k) sum_j t_hat_j (log z_j - log Z) = -(1/k)(t_hat_i / z_i - 1/Z)
      if (!clamped) r.grad[p][i] = -(t_hat / z - 1.0 / z_sum) / k * inv_projects;
    }
    r.value += loss / k * inv_projects;
  }
  return r;
}

inline LossResult loss_clid_mse(const std::vector<ScoreGroup>& groups) {
  auto r = loss_clid(groups);
  detail::add(r, loss_mse(groups));
  return r;
}

inline LossResult compute_loss(LossKind kind, const std::vector<ScoreGroup>& groups) {
  switch (kind) {
    case LossKind::mse: return loss_mse(groups);
    case LossKind::margin_mse_labeled: return loss_margin_mse_labeled(groups);
    case LossKind::margin_mse_relaxed: return loss_margin_mse_relaxed(groups);
    case LossKind::cmmd: return loss_cmmd(groups);
    case LossKind::clid_mse: return loss_clid_mse(groups);
  }
  throw Error(ErrorKind::Usage, "loss kind");
}

}  // namespace latefit
