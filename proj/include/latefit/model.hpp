#pragma once

#include <latefit/attention.hpp>
#include <latefit/cache.hpp>
#include <latefit/encoder.hpp>
#include <latefit/mlp.hpp>
#include <latefit/params.hpp>
#include <latefit/stats.hpp>

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace latefit {

/// Forward intermediates for one (brief, profile) comparison.
template <typename S>
struct PairCache {
  AttentionCache<S> brief_to_profile;
  AttentionCache<S> profile_to_brief;
  Mat<S> context_f;  // brief queries attending to the profile, |E_p| rows
  Mat<S> context_p;  // profile queries attending to the brief, |E_f| rows
  std::vector<double> sim_pf;
  std::vector<double> sim_fp;
};

namespace detail {

template <typename S>
void put_stats(RowVec<S>& row, Eigen::Index off, const DescStats& d) {
  const auto a = d.as_array();
  for (std::size_t k = 0; k < a.size(); ++k) row(off + static_cast<Eigen::Index>(k)) = static_cast<S>(a[k]);
}

}  // namespace detail

/// Comparison block up to the MLP input:
/// [desc(S_pf) | mean E_p | mean ctx_f | desc(S_fp) | mean E_f | mean ctx_p].
template <typename S>
RowVec<S> pair_features(const Mat<S>& Ep, const Mat<S>& Ef, const ModelParams<S>& params,
                        PairCache<S>& c) {
  if (Ep.rows() == 0 || Ef.rows() == 0) {
    throw Error(ErrorKind::EmptySequence, "score_pair needs non-empty sequences");
  }
  c.context_f = cross_attention(Ep, Ef, params.brief_to_profile, &c.brief_to_profile);
  c.context_p = cross_attention(Ef, Ep, params.profile_to_brief, &c.profile_to_brief);
  c.sim_pf = similarity_distribution(Ep, c.context_f);
  c.sim_fp = similarity_distribution(Ef, c.context_p);

  const auto d = Ep.cols();
  RowVec<S> f(params.config.mlp_input());
  Eigen::Index off = 0;
  detail::put_stats(f, off, describe(c.sim_pf));
  off += 6;
  f.segment(off, d) = Ep.colwise().mean();
  off += d;
  f.segment(off, d) = c.context_f.colwise().mean();
  off += d;
  detail::put_stats(f, off, describe(c.sim_fp));
  off += 6;
  f.segment(off, d) = Ef.colwise().mean();
  off += d;
  f.segment(off, d) = c.context_p.colwise().mean();
  return f;
}

template <typename S>
void pair_features_backward(const Mat<S>& Ep, const Mat<S>& Ef, const ModelParams<S>& params,
                            const PairCache<S>& c, const RowVec<S>& df, ModelParams<S>& grad,
                            Mat<S>& dEp, Mat<S>& dEf) {
  const auto d = Ep.cols();
  const auto np = Ep.rows();
  const auto nf = Ef.rows();
  auto stats_grad = [&](Eigen::Index off) {
    std::array<double, 6> g{};
    for (std::size_t k = 0; k < 6; ++k) g[k] = static_cast<double>(df(off + static_cast<Eigen::Index>(k)));
    return g;
  };

  Mat<S> d_ctx_f = Mat<S>::Zero(np, d);
  Mat<S> d_ctx_p = Mat<S>::Zero(nf, d);

  Eigen::Index off = 0;
  const auto d_sim_pf = describe_backward(c.sim_pf, stats_grad(off));
  off += 6;
  dEp.rowwise() += df.segment(off, d) / static_cast<S>(np);
  off += d;
  d_ctx_f.rowwise() += df.segment(off, d) / static_cast<S>(np);
  off += d;
  const auto d_sim_fp = describe_backward(c.sim_fp, stats_grad(off));
  off += 6;
  dEf.rowwise() += df.segment(off, d) / static_cast<S>(nf);
  off += d;
  d_ctx_p.rowwise() += df.segment(off, d) / static_cast<S>(nf);

  similarity_backward(Ep, c.context_f, c.sim_pf, d_sim_pf, dEp, d_ctx_f);
  similarity_backward(Ef, c.context_p, c.sim_fp, d_sim_fp, dEf, d_ctx_p);

  cross_attention_backward(Ep, Ef, params.brief_to_profile, c.brief_to_profile, d_ctx_f,
                           grad.brief_to_profile, dEp, dEf);
  cross_attention_backward(Ef, Ep, params.profile_to_brief, c.profile_to_brief, d_ctx_p,
                           grad.profile_to_brief, dEf, dEp);
}

/// Raw (unbounded) student score for one pair. Passing an Rng enables
/// training-mode dropout; without one the call is deterministic.
template <typename S>
S score_pair(const Mat<S>& Ep, const Mat<S>& Ef, const ModelParams<S>& params,
             Rng* dropout_rng = nullptr) {
  PairCache<S> c;
  const Mat<S> f = pair_features(Ep, Ef, params, c);
  return mlp_forward(f, params.mlp, params.config.dropout, dropout_rng)(0, 0);
}

template <typename S>
S score_pair(const EmbeddingSequence<S>& Ep, const EmbeddingSequence<S>& Ef,
             const ModelParams<S>& params, Rng* dropout_rng = nullptr) {
  return score_pair(Ep.vectors, Ef.vectors, params, dropout_rng);
}

/// One brief against several candidate profiles, all from cached backbone
/// vectors. Keeps everything needed for the backward pass.
template <typename S>
struct GroupForward {
  Mat<S> Ep;
  std::vector<Mat<S>> Ef;
  std::vector<PairCache<S>> pairs;
  Mat<S> features;
  MlpCache<S> mlp;
  std::vector<S> scores;
};

template <typename S>
GroupForward<S> forward_group(const ModelParams<S>& params, const CacheEntry& brief,
                              const std::vector<const CacheEntry*>& profiles,
                              Rng* dropout_rng = nullptr) {
  GroupForward<S> g;
  g.Ep = project(brief, params.brief);
  g.Ef.reserve(profiles.size());
  g.pairs.resize(profiles.size());
  g.features.resize(static_cast<Eigen::Index>(profiles.size()),
                    static_cast<Eigen::Index>(params.config.mlp_input()));
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    g.Ef.push_back(project(*profiles[j], params.profile));
    g.features.row(static_cast<Eigen::Index>(j)) = pair_features(g.Ep, g.Ef[j], params, g.pairs[j]);
  }
  const Mat<S> out = mlp_forward(g.features, params.mlp, params.config.dropout, dropout_rng, &g.mlp);
  g.scores.assign(out.data(), out.data() + out.size());
  return g;
}

/// Accumulate dL/dparams given dL/dscore for each candidate.
template <typename S>
void backward_group(const ModelParams<S>& params, const CacheEntry& brief,
                    const std::vector<const CacheEntry*>& profiles, const GroupForward<S>& g,
                    const std::vector<S>& d_scores, ModelParams<S>& grad) {
  Mat<S> d_out(static_cast<Eigen::Index>(d_scores.size()), 1);
  for (std::size_t j = 0; j < d_scores.size(); ++j) d_out(static_cast<Eigen::Index>(j), 0) = d_scores[j];
  const Mat<S> d_features = mlp_backward(params.mlp, g.mlp, d_out, grad.mlp);
  Mat<S> dEp = Mat<S>::Zero(g.Ep.rows(), g.Ep.cols());
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    Mat<S> dEf = Mat<S>::Zero(g.Ef[j].rows(), g.Ef[j].cols());
    const RowVec<S> df = d_features.row(static_cast<Eigen::Index>(j));
    pair_features_backward(g.Ep, g.Ef[j], params, g.pairs[j], df, grad, dEp, dEf);
    project_backward(*profiles[j], params.profile, dEf, grad.profile);
  }
  project_backward(brief, params.brief, dEp, grad.brief);
}

struct RankedCandidate {
  std::string profile_id;
  double score = 0;
};

/// Descending score, ties broken by ascending id.
inline void sort_ranked(std::vector<RankedCandidate>& v) {
  std::sort(v.begin(), v.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.profile_id < b.profile_id;
  });
}

/// Encode the brief once, score every cached profile, rank.
template <typename S>
std::vector<RankedCandidate> score_batch(const Document& brief, const std::vector<std::string>& profile_ids,
                                         const EmbeddingCache& cache, const BackboneBackend& backend,
                                         const ModelParams<S>& params) {
  for (const auto& id : profile_ids) {
    if (!cache.contains(id)) throw Error(ErrorKind::CacheMiss, id);
  }
  const auto Ep = encode_document(brief, backend, params.brief);
  std::vector<RankedCandidate> out;
  out.reserve(profile_ids.size());
  for (const auto& id : profile_ids) {
    const Mat<S> Ef = project(cache.at(id), params.profile);
    out.push_back({id, static_cast<double>(score_pair(Ep.vectors, Ef, params))});
  }
  sort_ranked(out);
  return out;
}

}  // namespace latefit
