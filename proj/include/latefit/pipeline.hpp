#pragma once

#include <latefit/cache.hpp>
#include <latefit/metrics.hpp>
#include <latefit/model.hpp>
#include <latefit/trainer.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace latefit {

inline constexpr int kSchemaVersion = 1;

inline std::vector<ScoredPair> to_scored_pairs(const std::vector<InteractionRecord>& records,
                                               const std::vector<double>& student) {
  if (records.size() != student.size()) throw Error(ErrorKind::LengthMismatch, "records vs predictions");
  std::vector<ScoredPair> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out.push_back({r.project_id, r.profile_id, r.teacher_score, student[i], r.metadata});
  }
  return out;
}

inline std::vector<InteractionRecord> without_augment(const std::vector<InteractionRecord>& records) {
  std::vector<InteractionRecord> out;
  for (const auto& r : records) {
    if (r.meta("augment").empty()) out.push_back(r);
  }
  return out;
}

/// Score cached profiles against one cached brief; the brief is projected once.
template <typename S>
std::vector<double> score_cached(const CacheEntry& brief, const std::vector<const CacheEntry*>& profiles,
                                 const ModelParams<S>& params) {
  const Mat<S> Ep = project(brief, params.brief);
  std::vector<double> out;
  out.reserve(profiles.size());
  for (const auto* e : profiles) {
    const Mat<S> Ef = project(*e, params.profile);
    out.push_back(static_cast<double>(score_pair(Ep, Ef, params)));
  }
  return out;
}

struct BenchResult {
  std::size_t pairs = 0;
  std::vector<double> seconds;
  double checksum = 0;

  double mean() const { return std::accumulate(seconds.begin(), seconds.end(), 0.0) / static_cast<double>(seconds.size()); }
  double min() const { return *std::min_element(seconds.begin(), seconds.end()); }
  double max() const { return *std::max_element(seconds.begin(), seconds.end()); }
  /// Relative spread (max - min) / min across repeats.
  double spread() const { return (max() - min()) / min(); }

  nlohmann::json to_json() const {
    return {{"pairs", pairs},      {"repeats", seconds.size()}, {"seconds", seconds},
            {"mean_s", mean()},    {"min_s", min()},            {"max_s", max()},
            {"spread", spread()},  {"pairs_per_second", static_cast<double>(pairs) / mean()},
            {"checksum", checksum}};
  }
};

/// Wall time of scoring `profiles` (cycled up to `pairs`) against `brief`,
/// single-threaded. One untimed warm-up pass precedes the timed repeats.
template <typename S>
BenchResult bench_scoring(const CacheEntry& brief, const std::vector<const CacheEntry*>& profiles,
                          const ModelParams<S>& params, std::size_t pairs, std::size_t repeats) {
  if (profiles.empty() || pairs == 0 || repeats == 0) throw Error(ErrorKind::Usage, "bench needs profiles, pairs, repeats");
  std::vector<const CacheEntry*> work(pairs);
  for (std::size_t i = 0; i < pairs; ++i) work[i] = profiles[i % profiles.size()];
  BenchResult r;
  r.pairs = pairs;
  auto once = [&] {
    const auto s = score_cached(brief, work, params);
    return std::accumulate(s.begin(), s.end(), 0.0);
  };
  r.checksum = once();
  for (std::size_t k = 0; k < repeats; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    r.checksum = once();
    r.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return r;
}

}  // namespace latefit
