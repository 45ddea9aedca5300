#pragma once

#include <latefit/dataset.hpp>
#include <latefit/error.hpp>
#include <latefit/losses.hpp>
#include <latefit/rng.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace latefit {

inline constexpr std::array<double, 6> kRubricLevels{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

/// Nearest rubric level index; used for batch bucketing only.
inline std::size_t level_bucket(double score) {
  const long k = std::lround(score * 5.0);
  return static_cast<std::size_t>(std::clamp(k, 0L, 5L));
}

struct Candidate {
  std::string profile_id;
  double teacher = 0;
  std::optional<int> label;
  bool unsuitable = false;
};

struct BatchGroup {
  std::string project_id;
  std::vector<Candidate> candidates;
};

using Batch = std::vector<BatchGroup>;

/// Training records indexed by project and rubric level, plus the profile
/// pool used to draw unsuitable candidates.
struct TrainingIndex {
  struct Project {
    std::string id;
    std::set<std::string> categories;
    std::array<std::vector<std::size_t>, 6> by_level;
  };
  struct Profile {
    std::string id;
    std::set<std::string> categories;
  };

  std::vector<InteractionRecord> records;
  std::vector<Project> projects;
  std::vector<Profile> pool;

  TrainingIndex(std::vector<InteractionRecord> recs, const std::map<std::string, Document>& docs)
      : records(std::move(recs)) {
    std::map<std::string, std::size_t> pos;
    std::set<std::string> seen_profiles;
    auto cats = [&](const std::string& id) {
      auto it = docs.find(id);
      return it == docs.end() ? std::set<std::string>{} : categories_of(it->second);
    };
    std::vector<std::string> project_ids;
    for (const auto& r : records) project_ids.push_back(r.project_id);
    std::sort(project_ids.begin(), project_ids.end());
    project_ids.erase(std::unique(project_ids.begin(), project_ids.end()), project_ids.end());
    for (const auto& id : project_ids) {
      pos[id] = projects.size();
      projects.push_back({id, cats(id), {}});
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      projects[pos[r.project_id]].by_level[level_bucket(r.teacher_score)].push_back(i);
      seen_profiles.insert(r.profile_id);
    }
    for (const auto& id : seen_profiles) pool.push_back({id, cats(id)});
  }
};

struct SamplerConfig {
  std::size_t projects_per_batch = 64;
  std::size_t unsuitable_per_project = 2;
  std::size_t max_unsuitable_tries = 1000;
};

namespace detail {

inline bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a) {
    if (b.contains(x)) return false;
  }
  return true;
}

}  // namespace detail

/// One candidate per available rubric level, then unsuitable profiles
/// (no shared category, teacher score 0, label 0).
inline BatchGroup assemble_group(const TrainingIndex& index, std::size_t project, Rng& rng,
                                 const SamplerConfig& config) {
  const auto& p = index.projects[project];
  BatchGroup g{p.id, {}};
  for (const auto& level : p.by_level) {
    if (level.empty()) continue;
    const auto& r = index.records[level[rng.index(level.size())]];
    g.candidates.push_back({r.profile_id, r.teacher_score, r.label, false});
  }
  if (index.pool.empty() || config.unsuitable_per_project == 0) return g;
  std::set<std::string> taken;
  for (std::size_t tries = 0;
       taken.size() < config.unsuitable_per_project && tries < config.max_unsuitable_tries;
       ++tries) {
    const auto& prof = index.pool[rng.index(index.pool.size())];
    if (!detail::disjoint(prof.categories, p.categories) || taken.contains(prof.id)) continue;
    taken.insert(prof.id);
    g.candidates.push_back({prof.id, 0.0, 0, true});
  }
  return g;
}

inline Batch assemble_batch(const TrainingIndex& index, const std::vector<std::size_t>& projects,
                            Rng& rng, const SamplerConfig& config) {
  Batch b;
  b.reserve(projects.size());
  for (auto p : projects) b.push_back(assemble_group(index, p, rng, config));
  return b;
}

/// Point-wise batches: records drawn independently, grouped by project so
/// briefs are encoded once.
inline Batch assemble_pointwise(const TrainingIndex& index, const std::vector<std::size_t>& record_ids) {
  Batch b;
  std::map<std::string, std::size_t> pos;
  for (auto i : record_ids) {
    const auto& r = index.records[i];
    auto [it, inserted] = pos.try_emplace(r.project_id, b.size());
    if (inserted) b.push_back({r.project_id, {}});
    b[it->second].candidates.push_back({r.profile_id, r.teacher_score, r.label, false});
  }
  return b;
}

/// Draw `projects_per_batch` distinct projects and assemble their groups.
inline Batch sample_batch(const TrainingIndex& index, Rng& rng, const SamplerConfig& config) {
  if (index.projects.size() < config.projects_per_batch || config.projects_per_batch == 0) {
    throw Error(ErrorKind::InsufficientProjects,
                std::to_string(index.projects.size()) + " projects for batch of " +
                    std::to_string(config.projects_per_batch));
  }
  std::vector<std::size_t> order(index.projects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  order.resize(config.projects_per_batch);
  std::sort(order.begin(), order.end());
  return assemble_batch(index, order, rng, config);
}

inline Batch sample_batch_pointwise(const TrainingIndex& index, std::size_t n_records, Rng& rng) {
  if (index.records.empty()) throw Error(ErrorKind::InsufficientProjects, "no records");
  std::vector<std::size_t> ids(n_records);
  for (auto& i : ids) i = rng.index(index.records.size());
  return assemble_pointwise(index, ids);
}

inline std::vector<ScoreGroup> to_score_groups(const Batch& batch) {
  std::vector<ScoreGroup> out;
  out.reserve(batch.size());
  for (const auto& g : batch) {
    ScoreGroup s;
    for (const auto& c : g.candidates) {
      s.teacher.push_back(c.teacher);
      s.labels.push_back(c.label);
    }
    s.student.assign(g.candidates.size(), 0.0);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace latefit
