#pragma once

#include <latefit/error.hpp>
#include <latefit/rng.hpp>

#include <cmath>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <string>
#include <string_view>
#include <vector>

namespace latefit {

/// Frozen sentence encoder. Implementations must be deterministic.
class BackboneBackend {
 public:
  virtual ~BackboneBackend() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<float> encode(std::string_view text) const = 0;
};

/// Lowercased ASCII alphanumeric runs; bytes >= 0x80 are kept inside tokens
/// so multibyte UTF-8 sequences are not split.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                       (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (alnum) {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                           : static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Seeded Gaussian unit vector for one token.
inline std::vector<double> stub_token_vector(std::string_view token, std::size_t dim,
                                             std::uint64_t seed) {
  Rng rng(derive_seed(seed, fnv1a64(token)));
  std::vector<double> v(dim);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

namespace detail {

template <typename TokenVec>
std::vector<float> stub_encode_with(std::string_view text, std::size_t dim, TokenVec&& token_vec) {
  if (dim < 8) throw Error(ErrorKind::DimensionMismatch, "stub encoder needs dim >= 8");
  const auto tokens = tokenize(text);
  if (tokens.empty()) {
    throw Error(ErrorKind::EmptyUtterance, "no token in '" + std::string(text) + "'");
  }
  std::vector<double> acc(dim, 0.0);
  for (const auto& t : tokens) {
    const std::vector<double>& v = token_vec(t);
    for (std::size_t i = 0; i < dim; ++i) acc[i] += v[i];
  }
  double norm2 = 0.0;
  for (double x : acc) norm2 += x * x;
  const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] * inv);
  return out;
}

}  // namespace detail

/// Hashed bag-of-tokens encoder: each token maps to a seeded Gaussian unit
/// vector, the output is the normalized sum. Texts sharing tokens get
/// positive cosine; token-disjoint texts are near-orthogonal.
inline std::vector<float> stub_encode(std::string_view text, std::size_t dim, std::uint64_t seed) {
  std::vector<double> scratch;
  return detail::stub_encode_with(text, dim, [&](const std::string& t) -> const std::vector<double>& {
    scratch = stub_token_vector(t, dim, seed);
    return scratch;
  });
}

/// Stub backend; memoizes token vectors, output identical to stub_encode().
class StubBackend final : public BackboneBackend {
 public:
  explicit StubBackend(std::size_t dim = 384, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}

  std::string name() const override { return "stub-hash-bow"; }
  std::size_t dim() const override { return dim_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<float> encode(std::string_view text) const override {
    std::lock_guard lock(mu_);
    return detail::stub_encode_with(text, dim_, [&](const std::string& t) -> const std::vector<double>& {
      auto it = tokens_.find(t);
      if (it == tokens_.end()) it = tokens_.emplace(t, stub_token_vector(t, dim_, seed_)).first;
      return it->second;
    });
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::vector<double>> tokens_;
};

}  // namespace latefit
