#pragma once

#include <latefit/backbone.hpp>
#include <latefit/document.hpp>
#include <latefit/error.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace latefit {

/// Backbone vectors for one document, row-major `section_ids.size() x dim`.
struct CacheEntry {
  std::vector<std::uint16_t> section_ids;
  std::vector<float> vectors;
  std::optional<std::uint64_t> content_hash;

  std::size_t size() const { return section_ids.size(); }
  bool operator==(const CacheEntry&) const = default;
};

struct EmbeddingCache {
  std::uint32_t dim = 0;
  std::map<std::string, CacheEntry> entries;

  bool contains(const std::string& id) const { return entries.contains(id); }

  const CacheEntry& at(const std::string& id) const {
    auto it = entries.find(id);
    if (it == entries.end()) throw Error(ErrorKind::CacheMiss, id);
    return it->second;
  }

  bool operator==(const EmbeddingCache&) const = default;
};

inline CacheEntry embed_document(const Document& doc, const BackboneBackend& backend) {
  CacheEntry e;
  e.section_ids.reserve(doc.utterances.size());
  e.vectors.reserve(doc.utterances.size() * backend.dim());
  for (const auto& u : doc.utterances) {
    auto v = backend.encode(u.text);
    if (v.size() != backend.dim()) {
      throw Error(ErrorKind::DimensionMismatch, "backend returned wrong width");
    }
    e.section_ids.push_back(u.section);
    e.vectors.insert(e.vectors.end(), v.begin(), v.end());
  }
  e.content_hash = content_hash(doc);
  return e;
}

// Binary layout (little-endian):
//   "LFE1" u32 dim u64 count
//   per entry: u16 id_len, id bytes, u32 n, n x (u16 section_id, dim x f32)
// Optional trailer with content hashes, in entry order:
//   "LFH1" u64 count, count x (u8 present, u64 hash)
namespace cache_io {

static_assert(std::endian::native == std::endian::little,
              "cache I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(ErrorKind::TruncatedFile, "unexpected end of cache data");
  }
  return v;
}

}  // namespace cache_io

inline void cache_write(std::ostream& os, const EmbeddingCache& cache) {
  using namespace cache_io;
  os.write("LFE1", 4);
  put<std::uint32_t>(os, cache.dim);
  put<std::uint64_t>(os, cache.entries.size());
  for (const auto& [id, e] : cache.entries) {
    if (e.vectors.size() != e.section_ids.size() * cache.dim) {
      throw Error(ErrorKind::DimMismatch, "entry '" + id + "' is not dim-consistent");
    }
    if (id.size() > 0xffff) throw Error(ErrorKind::Io, "document id too long");
    put<std::uint16_t>(os, static_cast<std::uint16_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(e.section_ids.size()));
    for (std::size_t i = 0; i < e.section_ids.size(); ++i) {
      put<std::uint16_t>(os, e.section_ids[i]);
      os.write(reinterpret_cast<const char*>(e.vectors.data() + i * cache.dim),
               static_cast<std::streamsize>(cache.dim * sizeof(float)));
    }
  }
  os.write("LFH1", 4);
  put<std::uint64_t>(os, cache.entries.size());
  for (const auto& [id, e] : cache.entries) {
    put<std::uint8_t>(os, e.content_hash ? 1 : 0);
    put<std::uint64_t>(os, e.content_hash.value_or(0));
  }
}

inline EmbeddingCache cache_read(std::istream& is) {
  using namespace cache_io;
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4) throw Error(ErrorKind::TruncatedFile, "missing header");
  if (std::memcmp(magic, "LFE1", 4) != 0) throw Error(ErrorKind::BadMagic, "not an LFE1 cache");
  EmbeddingCache cache;
  cache.dim = get<std::uint32_t>(is);
  if (cache.dim == 0) throw Error(ErrorKind::DimMismatch, "zero dimension");
  const auto count = get<std::uint64_t>(is);
  std::vector<CacheEntry*> order;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto id_len = get<std::uint16_t>(is);
    std::string id(id_len, '\0');
    is.read(id.data(), id_len);
    if (is.gcount() != id_len) throw Error(ErrorKind::TruncatedFile, "id bytes");
    const auto n = get<std::uint32_t>(is);
    CacheEntry e;
    e.section_ids.resize(n);
    e.vectors.resize(static_cast<std::size_t>(n) * cache.dim);
    for (std::uint32_t i = 0; i < n; ++i) {
      e.section_ids[i] = get<std::uint16_t>(is);
      const auto bytes = static_cast<std::streamsize>(cache.dim * sizeof(float));
      is.read(reinterpret_cast<char*>(e.vectors.data() + static_cast<std::size_t>(i) * cache.dim),
              bytes);
      if (is.gcount() != bytes) throw Error(ErrorKind::TruncatedFile, "vector data of '" + id + "'");
    }
    auto [it, inserted] = cache.entries.insert_or_assign(std::move(id), std::move(e));
    order.push_back(&it->second);
  }
  is.read(magic, 4);
  if (is.gcount() == 0) return cache;
  if (is.gcount() != 4 || std::memcmp(magic, "LFH1", 4) != 0) {
    throw Error(ErrorKind::BadMagic, "unexpected trailing data");
  }
  const auto hcount = get<std::uint64_t>(is);
  if (hcount != count) throw Error(ErrorKind::DimMismatch, "hash trailer count");
  for (auto* e : order) {
    const auto present = get<std::uint8_t>(is);
    const auto h = get<std::uint64_t>(is);
    if (present) e->content_hash = h;
  }
  return cache;
}

inline void cache_write(const std::string& path, const EmbeddingCache& cache) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  cache_write(os, cache);
  if (!os) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

inline EmbeddingCache cache_read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return cache_read(is);
}

struct CacheUpdateStats {
  std::size_t hits = 0;
  std::size_t computed = 0;
  std::size_t stale = 0;
};

/// Bring `cache` up to date for `docs`: entries whose stored content hash
/// matches are reused, anything missing or stale is recomputed.
inline CacheUpdateStats update_cache(EmbeddingCache& cache, const std::vector<Document>& docs,
                                     const BackboneBackend& backend) {
  CacheUpdateStats stats;
  if (cache.dim != backend.dim()) {
    cache.entries.clear();
    cache.dim = static_cast<std::uint32_t>(backend.dim());
  }
  for (const auto& doc : docs) {
    const auto h = content_hash(doc);
    auto it = cache.entries.find(doc.id);
    if (it != cache.entries.end() && it->second.content_hash == h) {
      ++stats.hits;
      continue;
    }
    if (it != cache.entries.end()) ++stats.stale;
    ++stats.computed;
    cache.entries.insert_or_assign(doc.id, embed_document(doc, backend));
  }
  return stats;
}

}  // namespace latefit
