#pragma once

#include <latefit/cache.hpp>
#include <latefit/losses.hpp>
#include <latefit/model.hpp>
#include <latefit/parallel.hpp>
#include <latefit/params.hpp>
#include <latefit/sampler.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace latefit {

struct TrainConfig {
  LossKind loss = LossKind::cmmd;
  std::size_t epochs = 50;
  std::size_t projects_per_batch = 64;
  /// Point-wise batch size in records; 0 means 5 x projects_per_batch.
  std::size_t records_per_batch = 0;
  double lr0 = 1e-3;
  std::uint64_t seed = 0;
  std::size_t unsuitable_per_project = 2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool dropout = true;
  std::size_t threads = 1;

  bool pointwise() const { return loss == LossKind::mse; }
  std::size_t pointwise_batch() const {
    return records_per_batch ? records_per_batch : 5 * projects_per_batch;
  }

  void validate() const {
    if (!(lr0 > 0.0)) throw Error(ErrorKind::Usage, "lr0 must be > 0");
    if (epochs < 1) throw Error(ErrorKind::Usage, "epochs must be >= 1");
    if (projects_per_batch < 1) throw Error(ErrorKind::Usage, "projects_per_batch must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"loss", std::string(to_string(loss))},
            {"epochs", epochs},
            {"projects_per_batch", projects_per_batch},
            {"records_per_batch", records_per_batch},
            {"lr0", lr0},
            {"seed", seed},
            {"unsuitable_per_project", unsuitable_per_project},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"dropout", dropout}};
  }
};

template <typename S>
struct GradientResult {
  double loss = 0;
  ModelParams<S> grads;
  std::vector<std::vector<double>> scores;
};

/// Look up cached backbone vectors for every document a batch touches.
struct BatchEntries {
  std::vector<const CacheEntry*> briefs;
  std::vector<std::vector<const CacheEntry*>> profiles;

  BatchEntries(const Batch& batch, const EmbeddingCache& cache) {
    for (const auto& g : batch) {
      briefs.push_back(&cache.at(g.project_id));
      auto& v = profiles.emplace_back();
      for (const auto& c : g.candidates) v.push_back(&cache.at(c.profile_id));
    }
  }
};

/// Loss and exact gradient over a batch. With `dropout_seed` set, group g
/// uses dropout stream derive_seed(seed, g); otherwise dropout is off.
/// Per-group gradients are summed in group order, so the result does not
/// depend on `threads`.
template <typename S>
GradientResult<S> gradient(const ModelParams<S>& params, const Batch& batch, LossKind kind,
                           const EmbeddingCache& cache,
                           std::optional<std::uint64_t> dropout_seed = std::nullopt,
                           std::size_t threads = 1) {
  if (batch.empty()) throw Error(ErrorKind::EmptyBatch, "gradient of empty batch");
  const BatchEntries entries(batch, cache);
  const std::size_t n = batch.size();
  std::vector<GroupForward<S>> fwd(n);
  parallel_for(n, threads, [&](std::size_t g) {
    std::optional<Rng> rng;
    if (dropout_seed) rng.emplace(derive_seed(*dropout_seed, g));
    fwd[g] = forward_group(params, *entries.briefs[g], entries.profiles[g], rng ? &*rng : nullptr);
  });

  auto groups = to_score_groups(batch);
  for (std::size_t g = 0; g < n; ++g) {
    for (std::size_t i = 0; i < groups[g].size(); ++i) groups[g].student[i] = static_cast<double>(fwd[g].scores[i]);
  }
  const LossResult loss = compute_loss(kind, groups);

  GradientResult<S> out{loss.value, ModelParams<S>::zeros(params.config), {}};
  for (const auto& g : groups) out.scores.push_back(g.student);

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  std::vector<ModelParams<S>> buffers(workers, ModelParams<S>::zeros(params.config));
  for (std::size_t wave = 0; wave < n; wave += workers) {
    const std::size_t count = std::min(workers, n - wave);
    parallel_for(count, workers, [&](std::size_t w) {
      const std::size_t g = wave + w;
      buffers[w].set_zero();
      std::vector<S> d(loss.grad[g].size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<S>(loss.grad[g][i]);
      backward_group(params, *entries.briefs[g], entries.profiles[g], fwd[g], d, buffers[w]);
    });
    for (std::size_t w = 0; w < count; ++w) out.grads += buffers[w];
  }
  return out;
}

template <typename S>
struct TrainState {
  ModelParams<S> params;
  ModelParams<S> m;
  ModelParams<S> v;
  std::uint64_t step = 0;

  static TrainState fresh(ModelParams<S> p) {
    TrainState s;
    s.m = ModelParams<S>::zeros(p.config);
    s.v = ModelParams<S>::zeros(p.config);
    s.params = std::move(p);
    return s;
  }
};

struct TrainLogEntry {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double lr = 0;
  double loss = 0;
  LossKind loss_kind = LossKind::cmmd;

  nlohmann::json to_json() const {
    return {{"epoch", epoch}, {"step", step}, {"lr", lr}, {"loss", loss},
            {"loss_kind", std::string(to_string(loss_kind))}};
  }
};

/// Linear decay from lr0 at step 0 to lr0 / total at the last step.
inline double learning_rate(double lr0, std::uint64_t step, std::uint64_t total) {
  return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total));
}

template <typename S>
void adam_update(TrainState<S>& st, const ModelParams<S>& grads, double lr, const TrainConfig& cfg) {
  const auto t = static_cast<double>(st.step + 1);
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  const S c1 = static_cast<S>(1.0 - std::pow(cfg.beta1, t));
  const S c2 = static_cast<S>(1.0 - std::pow(cfg.beta2, t));
  const S step = static_cast<S>(lr);
  const S eps = static_cast<S>(cfg.eps);
  auto p = st.params.tensors();
  auto m = st.m.tensors();
  auto v = st.v.tensors();
  auto g = grads.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto ga = g[k].second->array();
    m[k].second->array() = b1 * m[k].second->array() + (S(1) - b1) * ga;
    v[k].second->array() = b2 * v[k].second->array() + (S(1) - b2) * ga.square();
    p[k].second->array() -=
        step * (m[k].second->array() / c1) / ((v[k].second->array() / c2).sqrt() + eps);
  }
}

/// Steps in one epoch: project batches for pair/list-wise losses, record
/// batches for the point-wise loss.
inline std::size_t steps_per_epoch(const TrainingIndex& index, const TrainConfig& cfg) {
  const std::size_t items = cfg.pointwise() ? index.records.size() : index.projects.size();
  const std::size_t per = cfg.pointwise() ? cfg.pointwise_batch() : cfg.projects_per_batch;
  return std::max<std::size_t>(1, (items + per - 1) / per);
}

/// Batch for a global step; depends only on (seed, step) so resumed runs
/// replay identical batches.
inline Batch batch_for_step(const TrainingIndex& index, const TrainConfig& cfg, std::uint64_t step) {
  const std::size_t spe = steps_per_epoch(index, cfg);
  const std::size_t epoch = static_cast<std::size_t>(step / spe);
  const std::size_t k = static_cast<std::size_t>(step % spe);
  const std::size_t items = cfg.pointwise() ? index.records.size() : index.projects.size();
  const std::size_t per = cfg.pointwise() ? cfg.pointwise_batch() : cfg.projects_per_batch;
  std::vector<std::size_t> order(items);
  for (std::size_t i = 0; i < items; ++i) order[i] = i;
  Rng perm(derive_seed(cfg.seed, 0xE90C0000ULL + epoch));
  perm.shuffle(order);
  const std::size_t lo = std::min(items, k * per);
  const std::size_t hi = std::min(items, lo + per);
  std::vector<std::size_t> slice(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                 order.begin() + static_cast<std::ptrdiff_t>(hi));
  if (cfg.pointwise()) return assemble_pointwise(index, slice);
  std::sort(slice.begin(), slice.end());
  Rng rng(derive_seed(cfg.seed, 0x5A3B0000ULL + step));
  SamplerConfig sc;
  sc.projects_per_batch = cfg.projects_per_batch;
  sc.unsuitable_per_project = cfg.unsuitable_per_project;
  auto batch = assemble_batch(index, slice, rng, sc);
  if (cfg.loss == LossKind::clid_mse) {
    // list-wise normalization is undefined when every teacher score is zero
    std::erase_if(batch, [](const BatchGroup& g) {
      return std::all_of(g.candidates.begin(), g.candidates.end(),
                         [](const Candidate& c) { return c.teacher <= 0.0; });
    });
  }
  return batch;
}

using StepCallback = std::function<void(const TrainLogEntry&)>;

/// Run (or resume) training from `state.step` up to the end of the schedule,
/// or until `max_steps` more steps have been taken.
template <typename S>
TrainState<S> train(const TrainingIndex& index, const EmbeddingCache& cache, const TrainConfig& cfg,
                    TrainState<S> state, const StepCallback& on_step = {},
                    std::optional<std::uint64_t> max_steps = std::nullopt) {
  cfg.validate();
  if (index.records.empty()) throw Error(ErrorKind::EmptyDataset, "no training records");
  const std::size_t spe = steps_per_epoch(index, cfg);
  const std::uint64_t total = static_cast<std::uint64_t>(spe) * cfg.epochs;
  std::uint64_t taken = 0;
  while (state.step < total && (!max_steps || taken < *max_steps)) {
    const std::uint64_t t = state.step;
    const Batch batch = batch_for_step(index, cfg, t);
    if (batch.empty()) {
      ++state.step;
      ++taken;
      continue;
    }
    std::optional<std::uint64_t> dseed;
    if (cfg.dropout) dseed = derive_seed(cfg.seed, 0xD7090000ULL + t);
    auto res = gradient(state.params, batch, cfg.loss, cache, dseed, cfg.threads);
    if (!std::isfinite(res.loss) || !res.grads.all_finite()) {
      std::ostringstream diag;
      diag << "step " << t << " loss " << res.loss << " params_finite "
           << state.params.all_finite() << " grads_finite " << res.grads.all_finite()
           << " projects:";
      for (const auto& g : batch) diag << ' ' << g.project_id;
      throw Error(ErrorKind::NonFiniteLoss, diag.str());
    }
    const double lr = learning_rate(cfg.lr0, t, total);
    adam_update(state, res.grads, lr, cfg);
    ++state.step;
    ++taken;
    if (on_step) on_step({static_cast<std::size_t>(t / spe), t, lr, res.loss, cfg.loss});
  }
  return state;
}

/// Infer-mode student scores, parallel to `records`.
template <typename S>
std::vector<double> predict(const ModelParams<S>& params, const EmbeddingCache& cache,
                            const std::vector<InteractionRecord>& records, std::size_t threads = 1) {
  std::map<std::string, std::vector<std::size_t>> by_project;
  for (std::size_t i = 0; i < records.size(); ++i) by_project[records[i].project_id].push_back(i);
  std::vector<std::pair<const std::string*, const std::vector<std::size_t>*>> groups;
  for (const auto& [id, idx] : by_project) groups.emplace_back(&id, &idx);
  std::vector<double> out(records.size());
  parallel_for(groups.size(), threads, [&](std::size_t g) {
    const auto& idx = *groups[g].second;
    const Mat<S> Ep = project(cache.at(*groups[g].first), params.brief);
    for (auto i : idx) {
      const Mat<S> Ef = project(cache.at(records[i].profile_id), params.profile);
      out[i] = static_cast<double>(score_pair(Ep, Ef, params));
    }
  });
  return out;
}

}  // namespace latefit
