#pragma once

#include <latefit/latefit.hpp>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace fixtures {

using namespace latefit;

struct Corpus {
  SkillWorld world;
  GeneratedData data;
  std::map<std::string, Document> docs;
  EmbeddingCache cache;
  std::vector<InteractionRecord> train;
  std::vector<InteractionRecord> test;
};

inline Corpus make_corpus(std::size_t train_projects, std::size_t test_projects, std::size_t dim,
                          std::uint64_t seed) {
  Corpus c;
  c.world = gen_world(12, 10, seed);
  DatasetConfig dc;
  dc.train_projects = train_projects;
  dc.test_projects = test_projects;
  dc.seed = seed;
  c.data = build_dataset(c.world, dc);
  for (const auto& d : c.data.documents) c.docs.emplace(d.id, d);
  const StubBackend backend(dim, seed);
  c.cache.dim = static_cast<std::uint32_t>(dim);
  update_cache(c.cache, c.data.documents, backend);
  for (const auto& r : c.data.records) (r.meta("split") == "train" ? c.train : c.test).push_back(r);
  return c;
}

struct FamilyCheck {
  std::string family;
  std::size_t coords = 0;
  double max_rel = 0;
  std::size_t failures = 0;
};

inline std::string family_of(const std::string& name) {
  if (name.find("categorical") != std::string::npos) return "branch.categorical";
  if (name.rfind("brief.", 0) == 0 || name.rfind("profile.", 0) == 0) return "branch.W_b";
  if (name.rfind("attn_", 0) == 0) {
    const auto tail = name.substr(name.find('.') + 1);
    if (tail == "Wq") return "attention.Q";
    if (tail == "Wk") return "attention.K";
    if (tail == "Wv") return "attention.V";
    return "attention.O";
  }
  return "mlp";
}

/// Loss only, no backward pass.
inline double batch_loss(const ModelParams<double>& params, const Batch& batch, LossKind kind,
                         const EmbeddingCache& cache) {
  const BatchEntries entries(batch, cache);
  auto groups = to_score_groups(batch);
  for (std::size_t g = 0; g < batch.size(); ++g) {
    const auto fwd = forward_group(params, *entries.briefs[g], entries.profiles[g]);
    for (std::size_t i = 0; i < groups[g].size(); ++i) groups[g].student[i] = fwd.scores[i];
  }
  return compute_loss(kind, groups).value;
}

/// Glorot init plus small random biases and categorical rows so every path
/// carries signal; the final bias keeps scores positive for the CLID floor.
inline ModelParams<double> checked_model(std::size_t dim, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.backbone_dim = dim;
  auto p = init_params<double>(cfg, seed);
  Rng rng(seed + 1);
  for (auto& [name, t] : p.tensors()) {
    if (name.find(".b") == std::string::npos && name.find("categorical") == std::string::npos) continue;
    for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = rng.uniform(-0.05, 0.05);
  }
  p.mlp.b.back()(0, 0) = 0.5;
  return p;
}

/// Central finite differences against the analytic gradient on up to
/// `per_family` coordinates of each tensor family. Relative error is
/// |a - f| / max(|a|, |f|, floor).
inline std::vector<FamilyCheck> gradient_check(ModelParams<double> params, const Batch& batch, LossKind kind,
                                               const EmbeddingCache& cache, std::size_t per_family, double eps,
                                               double tol, std::uint64_t seed, double floor = 1e-7) {
  const auto analytic = gradient(params, batch, kind, cache);
  auto g = analytic.grads.tensors();
  auto p = params.tensors();
  std::map<std::string, std::vector<std::pair<std::size_t, Eigen::Index>>> coords;
  for (std::size_t t = 0; t < p.size(); ++t) {
    for (Eigen::Index i = 0; i < p[t].second->size(); ++i) coords[family_of(p[t].first)].emplace_back(t, i);
  }
  Rng rng(seed);
  std::vector<FamilyCheck> out;
  for (auto& [family, list] : coords) {
    rng.shuffle(list);
    if (list.size() > per_family) list.resize(per_family);
    FamilyCheck fc{family, list.size(), 0.0, 0};
    for (const auto& [t, i] : list) {
      double& x = p[t].second->data()[i];
      const double orig = x;
      x = orig + eps;
      const double up = batch_loss(params, batch, kind, cache);
      x = orig - eps;
      const double down = batch_loss(params, batch, kind, cache);
      x = orig;
      const double fd = (up - down) / (2 * eps);
      const double a = g[t].second->data()[i];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
      fc.max_rel = std::max(fc.max_rel, rel);
      fc.failures += rel >= tol;
    }
    out.push_back(fc);
  }
  return out;
}

/// Sampled batch: one candidate per rubric level plus unsuitable ones.
inline Batch gradient_batch(const Corpus& c, std::size_t projects, std::uint64_t seed) {
  const TrainingIndex index(c.train, c.docs);
  SamplerConfig sc;
  sc.projects_per_batch = projects;
  Rng rng(seed);
  return sample_batch(index, rng, sc);
}

}  // namespace fixtures
