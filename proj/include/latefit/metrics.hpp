#pragma once

#include <latefit/error.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace latefit {

struct ScoredPair {
  std::string project_id;
  std::string profile_id;
  double teacher = 0;
  double student = 0;
  std::map<std::string, std::string> metadata;
};

inline constexpr double kRelevanceThreshold = 0.5;

inline bool is_relevant(double teacher) { return teacher > kRelevanceThreshold; }
inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

struct RelevancyMetrics {
  double recall = 0, specificity = 0, r_precision = 0, nr_false_omission = 0, map = 0;
};

struct RankingMetrics {
  double mrr = 0, ndcg = 0;
};

struct CalibrationMetrics {
  double mae = 0, delta_mean = 0, delta_iqr = 0, wasserstein1 = 0;
};

struct Support {
  std::size_t pairs = 0, projects = 0, relevant = 0, non_relevant = 0;
  std::size_t projects_rp = 0, projects_ro = 0, projects_ap = 0, projects_ndcg = 0;
};

struct MetricsReport {
  RelevancyMetrics relevancy;
  RankingMetrics ranking;
  CalibrationMetrics calibration;
  Support support;

  nlohmann::json metrics_json() const {
    return {{"recall", relevancy.recall},
            {"specificity", relevancy.specificity},
            {"r_precision", relevancy.r_precision},
            {"nr_false_omission", relevancy.nr_false_omission},
            {"map", relevancy.map},
            {"mrr", ranking.mrr},
            {"ndcg", ranking.ndcg},
            {"mae", calibration.mae},
            {"delta_mean", calibration.delta_mean},
            {"delta_iqr", calibration.delta_iqr},
            {"wasserstein1", calibration.wasserstein1}};
  }

  nlohmann::json support_json() const {
    return {{"pairs", support.pairs},
            {"projects", support.projects},
            {"relevant", support.relevant},
            {"non_relevant", support.non_relevant},
            {"projects_r_precision", support.projects_rp},
            {"projects_nr_false_omission", support.projects_ro},
            {"projects_map", support.projects_ap},
            {"projects_ndcg", support.projects_ndcg}};
  }
};

struct EvalOptions {
  bool binary_ndcg = false;
};

/// Candidates of one project, ranked by student score (descending, ties by
/// ascending profile id).
using RankedProject = std::vector<const ScoredPair*>;

inline std::vector<RankedProject> group_and_rank(const std::vector<ScoredPair>& pairs) {
  std::map<std::string, RankedProject> by_project;
  for (const auto& p : pairs) by_project[p.project_id].push_back(&p);
  std::vector<RankedProject> out;
  out.reserve(by_project.size());
  for (auto& [id, v] : by_project) {
    std::sort(v.begin(), v.end(), [](const ScoredPair* a, const ScoredPair* b) {
      if (a->student != b->student) return a->student > b->student;
      return a->profile_id < b->profile_id;
    });
    out.push_back(std::move(v));
  }
  return out;
}

/// Average precision of a ranked binary relevance list; nullopt without any
/// relevant item.
inline std::optional<double> average_precision(const std::vector<bool>& ranked_relevance) {
  std::size_t hits = 0;
  double sum = 0;
  for (std::size_t r = 0; r < ranked_relevance.size(); ++r) {
    if (ranked_relevance[r]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

/// NDCG of ranked gains against their ideal (descending) order, with
/// discount 1/log2(rank + 1). nullopt when the ideal DCG is zero.
inline std::optional<double> ndcg(const std::vector<double>& ranked_gains) {
  auto dcg = [](const std::vector<double>& g) {
    double s = 0;
    for (std::size_t r = 0; r < g.size(); ++r) s += g[r] / std::log2(static_cast<double>(r) + 2.0);
    return s;
  };
  auto ideal = ranked_gains;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal);
  if (idcg <= 0.0) return std::nullopt;
  return dcg(ranked_gains) / idcg;
}

inline RelevancyMetrics relevancy_metrics(const std::vector<ScoredPair>& pairs, Support* support = nullptr) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyDataset, "relevancy metrics of empty set");
  RelevancyMetrics m;
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (const auto& p : pairs) {
    const bool rel = is_relevant(p.teacher);
    const bool pred = clamp01(p.student) > kRelevanceThreshold;
    if (rel) (pred ? tp : fn)++;
    else (pred ? fp : tn)++;
  }
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.specificity = tn + fp ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;

  double rp_sum = 0, ro_sum = 0, ap_sum = 0;
  std::size_t rp_n = 0, ro_n = 0, ap_n = 0;
  for (const auto& proj : group_and_rank(pairs)) {
    std::vector<bool> rel;
    for (const auto* p : proj) rel.push_back(is_relevant(p->teacher));
    const auto k = static_cast<std::size_t>(std::count(rel.begin(), rel.end(), true));
    const std::size_t k_non = rel.size() - k;
    if (k > 0) {
      rp_sum += static_cast<double>(std::count(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(k), true)) /
                static_cast<double>(k);
      ++rp_n;
    }
    if (k_non > 0) {
      ro_sum += static_cast<double>(std::count(rel.end() - static_cast<std::ptrdiff_t>(k_non), rel.end(), false)) /
                static_cast<double>(k_non);
      ++ro_n;
    }
    if (auto ap = average_precision(rel)) {
      ap_sum += *ap;
      ++ap_n;
    }
  }
  m.r_precision = rp_n ? rp_sum / static_cast<double>(rp_n) : 0.0;
  m.nr_false_omission = ro_n ? ro_sum / static_cast<double>(ro_n) : 0.0;
  m.map = ap_n ? ap_sum / static_cast<double>(ap_n) : 0.0;
  if (support) {
    support->relevant = tp + fn;
    support->non_relevant = tn + fp;
    support->projects_rp = rp_n;
    support->projects_ro = ro_n;
    support->projects_ap = ap_n;
  }
  return m;
}

inline RankingMetrics ranking_metrics(const std::vector<ScoredPair>& pairs, const EvalOptions& opt = {},
                                      Support* support = nullptr) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyDataset, "ranking metrics of empty set");
  RankingMetrics m;
  double rr_sum = 0, ndcg_sum = 0;
  std::size_t projects = 0, ndcg_n = 0;
  for (const auto& proj : group_and_rank(pairs)) {
    ++projects;
    for (std::size_t r = 0; r < proj.size(); ++r) {
      if (is_relevant(proj[r]->teacher)) {
        rr_sum += 1.0 / static_cast<double>(r + 1);
        break;
      }
    }
    std::vector<double> gains;
    for (const auto* p : proj) {
      gains.push_back(opt.binary_ndcg ? (is_relevant(p->teacher) ? 1.0 : 0.0) : p->teacher);
    }
    if (auto v = ndcg(gains)) {
      ndcg_sum += *v;
      ++ndcg_n;
    }
  }
  m.mrr = rr_sum / static_cast<double>(projects);
  m.ndcg = ndcg_n ? ndcg_sum / static_cast<double>(ndcg_n) : 0.0;
  if (support) {
    support->projects = projects;
    support->projects_ndcg = ndcg_n;
  }
  return m;
}

/// Quantile by linear interpolation between order statistics at position
/// p(n+1), clamped to the sample range. Input must be sorted.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const auto n = static_cast<double>(sorted.size());
  const double h = p * (n + 1.0);
  if (h <= 1.0) return sorted.front();
  if (h >= n) return sorted.back();
  const double lo = std::floor(h);
  const auto i = static_cast<std::size_t>(lo) - 1;
  return sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i]);
}

inline double interquartile_range(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
}

/// W1 between two equal-size samples: mean absolute difference of order statistics.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorKind::LengthMismatch, "wasserstein1 needs equal non-empty samples");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline CalibrationMetrics calibration_metrics(const std::vector<ScoredPair>& pairs) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyDataset, "calibration metrics of empty set");
  std::vector<double> t, s;
  double mae = 0, mt = 0, ms = 0;
  for (const auto& p : pairs) {
    const double c = clamp01(p.student);
    t.push_back(p.teacher);
    s.push_back(c);
    mae += std::abs(p.teacher - c);
    mt += p.teacher;
    ms += c;
  }
  const double n = static_cast<double>(pairs.size());
  CalibrationMetrics m;
  m.mae = mae / n;
  m.delta_mean = std::abs(ms / n - mt / n);
  m.delta_iqr = std::abs(interquartile_range(s) - interquartile_range(t));
  m.wasserstein1 = wasserstein1(s, t);
  return m;
}

inline MetricsReport evaluate(const std::vector<ScoredPair>& pairs, const EvalOptions& opt = {}) {
  MetricsReport r;
  r.relevancy = relevancy_metrics(pairs, &r.support);
  r.ranking = ranking_metrics(pairs, opt, &r.support);
  r.calibration = calibration_metrics(pairs);
  r.support.pairs = pairs.size();
  return r;
}

/// Average ranks (ties share the mean rank), 1-based.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::LengthMismatch, "spearman needs two equal samples of size >= 2");
  }
  return pearson(average_ranks(x), average_ranks(y));
}

struct SliceResult {
  std::string key;
  std::map<std::string, MetricsReport> groups;
  std::map<std::pair<std::string, std::string>, double> recall_gaps;  // |recall_a - recall_b|, a < b
  double max_recall_gap = 0;
};

/// Full metric set per value of metadata field `key`; records without the
/// field are left out.
inline SliceResult sliced_evaluate(const std::vector<ScoredPair>& pairs, const std::string& key,
                                   const EvalOptions& opt = {}) {
  std::map<std::string, std::vector<ScoredPair>> groups;
  for (const auto& p : pairs) {
    auto it = p.metadata.find(key);
    if (it != p.metadata.end()) groups[it->second].push_back(p);
  }
  if (groups.empty()) throw Error(ErrorKind::UnknownSliceKey, "no record has metadata '" + key + "'");
  SliceResult out;
  out.key = key;
  for (const auto& [g, v] : groups) out.groups.emplace(g, evaluate(v, opt));
  for (auto a = out.groups.begin(); a != out.groups.end(); ++a) {
    for (auto b = std::next(a); b != out.groups.end(); ++b) {
      const double gap = std::abs(a->second.relevancy.recall - b->second.relevancy.recall);
      out.recall_gaps[{a->first, b->first}] = gap;
      out.max_recall_gap = std::max(out.max_recall_gap, gap);
    }
  }
  return out;
}

struct OodReport {
  MetricsReport base;
  MetricsReport with_average;
  MetricsReport with_unsuitable;

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    rows.push_back({{"row", "base"}, {"metrics", base.metrics_json()}, {"support", base.support_json()}});
    rows.push_back({{"row", "base+average"}, {"metrics", with_average.metrics_json()},
                    {"support", with_average.support_json()}});
    rows.push_back({{"row", "base+unsuitable"}, {"metrics", with_unsuitable.metrics_json()},
                    {"support", with_unsuitable.support_json()}});
    return rows;
  }
};

/// Rows tagged metadata "augment" = average | unsuitable are added to the
/// untagged base rows one family at a time.
inline OodReport ood_evaluate(const std::vector<ScoredPair>& pairs, const EvalOptions& opt = {}) {
  std::vector<ScoredPair> base, avg, uns;
  for (const auto& p : pairs) {
    auto it = p.metadata.find("augment");
    const std::string tag = it == p.metadata.end() ? "" : it->second;
    if (tag == "average") avg.push_back(p);
    else if (tag == "unsuitable") uns.push_back(p);
    else base.push_back(p);
  }
  OodReport r;
  r.base = evaluate(base, opt);
  auto with = [&](const std::vector<ScoredPair>& extra) {
    auto all = base;
    all.insert(all.end(), extra.begin(), extra.end());
    return evaluate(all, opt);
  };
  r.with_average = with(avg);
  r.with_unsuitable = with(uns);
  return r;
}

inline nlohmann::json slice_json(const SliceResult& s) {
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [g, rep] : s.groups) {
    groups[g] = rep.metrics_json();
    groups[g]["support"] = rep.support_json();
  }
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& [k, v] : s.recall_gaps) gaps.push_back({{"a", k.first}, {"b", k.second}, {"gap", v}});
  return {{"groups", groups}, {"recall_gaps", gaps}, {"max_recall_gap", s.max_recall_gap}};
}

/// CSV rows of (teacher, student, error) for box/joint plots; error uses the
/// clamped student score.
inline void write_plot_csv(std::ostream& os, const std::vector<ScoredPair>& pairs) {
  os << "s_t,s_s,error\n";
  for (const auto& p : pairs) {
    os << p.teacher << ',' << p.student << ',' << (clamp01(p.student) - p.teacher) << '\n';
  }
}

}  // namespace latefit
