#pragma once

#include <latefit/error.hpp>
#include <latefit/rng.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace latefit {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

struct ModelConfig {
  std::size_t backbone_dim = 384;
  std::size_t latent_dim = 32;
  std::size_t heads = 8;
  std::size_t brief_sections = 4;
  std::size_t profile_sections = 4;
  std::vector<std::size_t> mlp_hidden{256, 128, 256};
  double dropout = 0.4;

  std::size_t head_dim() const { return latent_dim / heads; }
  std::size_t stats_width() const { return 6; }
  std::size_t mlp_input() const { return 2 * (stats_width() + 2 * latent_dim); }

  void validate() const {
    if (heads == 0 || latent_dim % heads != 0) {
      throw Error(ErrorKind::DimensionMismatch, "latent_dim must be divisible by heads");
    }
    if (backbone_dim == 0 || brief_sections == 0 || profile_sections == 0) {
      throw Error(ErrorKind::DimensionMismatch, "zero-sized model dimension");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
      throw Error(ErrorKind::Usage, "dropout must be in [0, 1)");
    }
  }

  nlohmann::json to_json() const {
    return {{"backbone_dim", backbone_dim},   {"latent_dim", latent_dim},
            {"heads", heads},                 {"brief_sections", brief_sections},
            {"profile_sections", profile_sections}, {"mlp_hidden", mlp_hidden},
            {"dropout", dropout}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.backbone_dim = j.at("backbone_dim").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.brief_sections = j.at("brief_sections").get<std::size_t>();
    c.profile_sections = j.at("profile_sections").get<std::size_t>();
    c.mlp_hidden = j.at("mlp_hidden").get<std::vector<std::size_t>>();
    c.dropout = j.at("dropout").get<double>();
    c.validate();
    return c;
  }

  bool operator==(const ModelConfig&) const = default;
};

/// One document branch: e = (backbone + categorical[section]) * W + b.
template <typename S>
struct BranchParams {
  Mat<S> W;            // backbone_dim x latent
  Mat<S> b;            // 1 x latent
  Mat<S> categorical;  // sections x backbone_dim
};

/// Multi-head attention block. Head h owns columns [h*hd, (h+1)*hd) of
/// Wq, Wk, Wv; the concatenated heads go through Wo and bo.
template <typename S>
struct AttentionParams {
  Mat<S> Wq, Wk, Wv;  // latent x latent
  Mat<S> Wo;          // latent x latent
  Mat<S> bo;          // 1 x latent
  std::size_t heads = 8;
};

template <typename S>
struct MlpParams {
  std::vector<Mat<S>> W;  // in x out per layer
  std::vector<Mat<S>> b;  // 1 x out per layer
};

template <typename S>
struct ModelParams {
  ModelConfig config;
  BranchParams<S> brief;
  BranchParams<S> profile;
  AttentionParams<S> brief_to_profile;
  AttentionParams<S> profile_to_brief;
  MlpParams<S> mlp;

  using Named = std::vector<std::pair<std::string, Mat<S>*>>;
  using ConstNamed = std::vector<std::pair<std::string, const Mat<S>*>>;

  /// Every trainable tensor, in a fixed canonical order.
  Named tensors() {
    Named out;
    auto branch = [&](const std::string& p, BranchParams<S>& br) {
      out.emplace_back(p + ".W", &br.W);
      out.emplace_back(p + ".b", &br.b);
      out.emplace_back(p + ".categorical", &br.categorical);
    };
    auto attn = [&](const std::string& p, AttentionParams<S>& a) {
      out.emplace_back(p + ".Wq", &a.Wq);
      out.emplace_back(p + ".Wk", &a.Wk);
      out.emplace_back(p + ".Wv", &a.Wv);
      out.emplace_back(p + ".Wo", &a.Wo);
      out.emplace_back(p + ".bo", &a.bo);
    };
    branch("brief", brief);
    branch("profile", profile);
    attn("attn_bp", brief_to_profile);
    attn("attn_pb", profile_to_brief);
    for (std::size_t l = 0; l < mlp.W.size(); ++l) {
      out.emplace_back("mlp.W" + std::to_string(l), &mlp.W[l]);
      out.emplace_back("mlp.b" + std::to_string(l), &mlp.b[l]);
    }
    return out;
  }

  ConstNamed tensors() const {
    ConstNamed out;
    for (auto& [n, p] : const_cast<ModelParams*>(this)->tensors()) out.emplace_back(n, p);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
    return n;
  }

  template <typename T>
  ModelParams<T> cast() const {
    ModelParams<T> out = ModelParams<T>::zeros(config);
    auto src = tensors();
    auto dst = out.tensors();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<T>();
    return out;
  }

  /// Shape-congruent all-zero tensors; also the gradient container.
  static ModelParams zeros(const ModelConfig& c) {
    c.validate();
    ModelParams p;
    p.config = c;
    const auto d = static_cast<Eigen::Index>(c.latent_dim);
    const auto D = static_cast<Eigen::Index>(c.backbone_dim);
    auto branch = [&](BranchParams<S>& br, std::size_t sections) {
      br.W = Mat<S>::Zero(D, d);
      br.b = Mat<S>::Zero(1, d);
      br.categorical = Mat<S>::Zero(static_cast<Eigen::Index>(sections), D);
    };
    auto attn = [&](AttentionParams<S>& a) {
      a.Wq = Mat<S>::Zero(d, d);
      a.Wk = Mat<S>::Zero(d, d);
      a.Wv = Mat<S>::Zero(d, d);
      a.Wo = Mat<S>::Zero(d, d);
      a.bo = Mat<S>::Zero(1, d);
      a.heads = c.heads;
    };
    branch(p.brief, c.brief_sections);
    branch(p.profile, c.profile_sections);
    attn(p.brief_to_profile);
    attn(p.profile_to_brief);
    std::vector<std::size_t> widths{c.mlp_input()};
    widths.insert(widths.end(), c.mlp_hidden.begin(), c.mlp_hidden.end());
    widths.push_back(1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      p.mlp.W.push_back(Mat<S>::Zero(static_cast<Eigen::Index>(widths[l]),
                                     static_cast<Eigen::Index>(widths[l + 1])));
      p.mlp.b.push_back(Mat<S>::Zero(1, static_cast<Eigen::Index>(widths[l + 1])));
    }
    return p;
  }

  void set_zero() {
    for (auto& [n, t] : tensors()) t->setZero();
  }

  ModelParams& operator+=(const ModelParams& o) {
    auto a = tensors();
    auto b = o.tensors();
    for (std::size_t i = 0; i < a.size(); ++i) *a[i].second += *b[i].second;
    return *this;
  }

  bool all_finite() const {
    for (const auto& [n, t] : tensors()) {
      if (!t->allFinite()) return false;
    }
    return true;
  }

  bool operator==(const ModelParams& o) const {
    if (!(config == o.config)) return false;
    auto a = tensors();
    auto b = o.tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].second->rows() != b[i].second->rows() ||
          a[i].second->cols() != b[i].second->cols() || *a[i].second != *b[i].second) {
        return false;
      }
    }
    return true;
  }
};

/// Glorot-uniform weights; biases and categorical encodings start at zero.
template <typename S>
ModelParams<S> init_params(const ModelConfig& config, std::uint64_t seed) {
  auto p = ModelParams<S>::zeros(config);
  Rng rng(derive_seed(seed, 0x1417));
  auto glorot = [&](Mat<S>& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<S>(rng.uniform(-limit, limit));
    }
  };
  for (auto* br : {&p.brief, &p.profile}) glorot(br->W);
  for (auto* a : {&p.brief_to_profile, &p.profile_to_brief}) {
    glorot(a->Wq);
    glorot(a->Wk);
    glorot(a->Wv);
    glorot(a->Wo);
  }
  for (auto& w : p.mlp.W) glorot(w);
  return p;
}

}  // namespace latefit
