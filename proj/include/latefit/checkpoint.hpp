#pragma once

#include <latefit/cache.hpp>
#include <latefit/document.hpp>
#include <latefit/error.hpp>
#include <latefit/params.hpp>
#include <latefit/trainer.hpp>

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace latefit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Model (and optionally optimizer) state as stored on disk. Tensors are
/// always float32; `meta` carries free-form run information.
struct Checkpoint {
  ModelParams<float> params;
  std::optional<ModelParams<float>> adam_m;
  std::optional<ModelParams<float>> adam_v;
  std::uint64_t step = 0;
  nlohmann::json meta = nlohmann::json::object();

  static Checkpoint from_state(const TrainState<float>& s, nlohmann::json meta = nlohmann::json::object()) {
    return {s.params, s.m, s.v, s.step, std::move(meta)};
  }

  TrainState<float> to_state() const {
    TrainState<float> s = TrainState<float>::fresh(params);
    if (adam_m) s.m = *adam_m;
    if (adam_v) s.v = *adam_v;
    s.step = step;
    return s;
  }
};

// Layout (little-endian):
//   "LFCK" u32 version u32 header_len, header JSON (UTF-8)
//   u32 tensor_count, per tensor: u16 name_len, name, u32 rows, u32 cols,
//   rows*cols f32 row-major
// The header holds schema_version, model config, section vocabulary, step,
// and `meta`. Optimizer moments are stored as "adam.m.<name>"/"adam.v.<name>".
inline void save_checkpoint(std::ostream& os, const Checkpoint& ck) {
  using namespace cache_io;
  nlohmann::json header = {{"schema_version", kCheckpointVersion},
                           {"model", ck.params.config.to_json()},
                           {"sections", SectionVocab::standard().to_json()},
                           {"step", ck.step},
                           {"has_optimizer", ck.adam_m.has_value() && ck.adam_v.has_value()},
                           {"meta", ck.meta}};
  const std::string text = header.dump();
  os.write("LFCK", 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));

  std::vector<std::pair<std::string, const Mat<float>*>> all;
  for (const auto& [n, t] : ck.params.tensors()) all.emplace_back(n, t);
  if (ck.adam_m && ck.adam_v) {
    for (const auto& [n, t] : ck.adam_m->tensors()) all.emplace_back("adam.m." + n, t);
    for (const auto& [n, t] : ck.adam_v->tensors()) all.emplace_back("adam.v." + n, t);
  }
  put<std::uint32_t>(os, static_cast<std::uint32_t>(all.size()));
  for (const auto& [name, t] : all) {
    put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t->rows()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t->cols()));
    os.write(reinterpret_cast<const char*>(t->data()),
             static_cast<std::streamsize>(t->size() * static_cast<Eigen::Index>(sizeof(float))));
  }
}

inline Checkpoint load_checkpoint(std::istream& is) {
  using namespace cache_io;
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "LFCK", 4) != 0) {
    throw Error(ErrorKind::BadCheckpoint, "bad magic");
  }
  if (get<std::uint32_t>(is) != kCheckpointVersion) {
    throw Error(ErrorKind::BadCheckpoint, "unsupported checkpoint version");
  }
  const auto len = get<std::uint32_t>(is);
  std::string text(len, '\0');
  is.read(text.data(), len);
  if (is.gcount() != static_cast<std::streamsize>(len)) throw Error(ErrorKind::TruncatedFile, "header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadCheckpoint, e.what());
  }
  Checkpoint ck;
  ck.params = ModelParams<float>::zeros(ModelConfig::from_json(header.at("model")));
  ck.step = header.at("step").get<std::uint64_t>();
  ck.meta = header.value("meta", nlohmann::json::object());
  if (header.value("has_optimizer", false)) {
    ck.adam_m = ModelParams<float>::zeros(ck.params.config);
    ck.adam_v = ModelParams<float>::zeros(ck.params.config);
  }
  std::map<std::string, Mat<float>*> slots;
  for (auto& [n, t] : ck.params.tensors()) slots[n] = t;
  if (ck.adam_m) {
    for (auto& [n, t] : ck.adam_m->tensors()) slots["adam.m." + n] = t;
    for (auto& [n, t] : ck.adam_v->tensors()) slots["adam.v." + n] = t;
  }
  const auto count = get<std::uint32_t>(is);
  if (count != slots.size()) throw Error(ErrorKind::BadCheckpoint, "tensor count mismatch");
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto nlen = get<std::uint16_t>(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    if (is.gcount() != nlen) throw Error(ErrorKind::TruncatedFile, "tensor name");
    const auto rows = get<std::uint32_t>(is);
    const auto cols = get<std::uint32_t>(is);
    auto it = slots.find(name);
    if (it == slots.end()) throw Error(ErrorKind::BadCheckpoint, "unexpected tensor '" + name + "'");
    Mat<float>& t = *it->second;
    if (t.rows() != rows || t.cols() != cols) {
      throw Error(ErrorKind::BadCheckpoint, "shape mismatch for '" + name + "'");
    }
    const auto bytes = static_cast<std::streamsize>(t.size() * static_cast<Eigen::Index>(sizeof(float)));
    is.read(reinterpret_cast<char*>(t.data()), bytes);
    if (is.gcount() != bytes) throw Error(ErrorKind::TruncatedFile, "tensor '" + name + "'");
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  save_checkpoint(os, ck);
  if (!os) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return load_checkpoint(is);
}

}  // namespace latefit
