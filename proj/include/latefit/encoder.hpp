#pragma once

#include <latefit/backbone.hpp>
#include <latefit/cache.hpp>
#include <latefit/document.hpp>
#include <latefit/params.hpp>

#include <string>
#include <vector>

namespace latefit {

/// Projected utterance embeddings for one document, one row per utterance.
template <typename S>
struct EmbeddingSequence {
  std::string doc_id;
  Mat<S> vectors;
  std::vector<std::uint16_t> section_ids;

  std::size_t size() const { return section_ids.size(); }
};

inline Eigen::Map<const Mat<float>> backbone_rows(const CacheEntry& entry, std::size_t dim) {
  return {entry.vectors.data(), static_cast<Eigen::Index>(entry.size()),
          static_cast<Eigen::Index>(dim)};
}

template <typename S>
void check_branch_covers(const CacheEntry& entry, const BranchParams<S>& branch) {
  if (entry.vectors.size() != entry.size() * static_cast<std::size_t>(branch.W.rows())) {
    throw Error(ErrorKind::DimensionMismatch, "backbone width does not match projection");
  }
  for (auto s : entry.section_ids) {
    if (s >= branch.categorical.rows()) {
      throw Error(ErrorKind::MissingCategoricalRow, "no categorical row for section " +
                                                        std::to_string(s));
    }
  }
}

/// Row i: (backbone_i + categorical[section_i]) * W + b.
template <typename S>
Mat<S> project(const CacheEntry& entry, const BranchParams<S>& branch) {
  check_branch_covers(entry, branch);
  const auto X = backbone_rows(entry, static_cast<std::size_t>(branch.W.rows()));
  const Mat<S> cat_proj = branch.categorical * branch.W;
  Mat<S> E = X.template cast<S>() * branch.W;
  for (std::size_t i = 0; i < entry.size(); ++i) {
    E.row(static_cast<Eigen::Index>(i)) += cat_proj.row(entry.section_ids[i]) + branch.b;
  }
  return E;
}

/// Accumulate gradients of the branch tensors given dL/dE. The backbone
/// input is frozen and receives no gradient.
template <typename S>
void project_backward(const CacheEntry& entry, const BranchParams<S>& branch, const Mat<S>& dE,
                      BranchParams<S>& grad) {
  const auto X = backbone_rows(entry, static_cast<std::size_t>(branch.W.rows()));
  Mat<S> per_section = Mat<S>::Zero(branch.categorical.rows(), dE.cols());
  for (std::size_t i = 0; i < entry.size(); ++i) {
    per_section.row(entry.section_ids[i]) += dE.row(static_cast<Eigen::Index>(i));
  }
  grad.W.noalias() += X.template cast<S>().transpose() * dE;
  grad.W.noalias() += branch.categorical.transpose() * per_section;
  grad.b += dE.colwise().sum();
  grad.categorical.noalias() += per_section * branch.W.transpose();
}

template <typename S>
EmbeddingSequence<S> encode_document(const Document& doc, const BackboneBackend& backend,
                                     const BranchParams<S>& branch) {
  if (backend.dim() != static_cast<std::size_t>(branch.W.rows())) {
    throw Error(ErrorKind::DimensionMismatch, "backend dim " + std::to_string(backend.dim()) +
                                                  " vs projection " +
                                                  std::to_string(branch.W.rows()));
  }
  const auto entry = embed_document(doc, backend);
  return {doc.id, project(entry, branch), entry.section_ids};
}

template <typename S>
EmbeddingSequence<S> encode_cached(const std::string& doc_id, const EmbeddingCache& cache,
                                   const BranchParams<S>& branch) {
  const auto& entry = cache.at(doc_id);
  return {doc_id, project(entry, branch), entry.section_ids};
}

}  // namespace latefit
