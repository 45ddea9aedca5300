#pragma once

#include <latefit/document.hpp>
#include <latefit/error.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace latefit {

/// One scored (project, profile) pair. Split and augmentation tags live in
/// metadata ("split": train|test, "augment": average|unsuitable).
struct InteractionRecord {
  std::string project_id;
  std::string profile_id;
  double teacher_score = 0;
  std::optional<int> label;
  std::map<std::string, std::string> metadata;

  std::string meta(const std::string& key, const std::string& fallback = "") const {
    auto it = metadata.find(key);
    return it == metadata.end() ? fallback : it->second;
  }

  bool operator==(const InteractionRecord&) const = default;
};

inline void validate(const InteractionRecord& r) {
  if (r.project_id.empty() || r.profile_id.empty()) {
    throw Error(ErrorKind::MalformedRecord, "empty project or profile id");
  }
  if (!std::isfinite(r.teacher_score) || r.teacher_score < 0.0 || r.teacher_score > 1.0) {
    throw Error(ErrorKind::MalformedRecord, "teacher score outside [0, 1]");
  }
  if (r.label && *r.label != 0 && *r.label != 1) {
    throw Error(ErrorKind::MalformedRecord, "label must be 0 or 1");
  }
}

inline nlohmann::json to_json(const InteractionRecord& r) {
  nlohmann::json j = {{"project_id", r.project_id},
                      {"profile_id", r.profile_id},
                      {"teacher_score", r.teacher_score}};
  if (r.label) j["label"] = *r.label;
  j["metadata"] = r.metadata;
  return j;
}

inline InteractionRecord record_from_json(const nlohmann::json& j) {
  InteractionRecord r;
  r.project_id = j.at("project_id").get<std::string>();
  r.profile_id = j.at("profile_id").get<std::string>();
  r.teacher_score = j.contains("teacher_score") ? j.at("teacher_score").get<double>()
                                                : j.at("score").get<double>();
  if (j.contains("label") && !j.at("label").is_null()) r.label = j.at("label").get<int>();
  if (j.contains("metadata")) {
    r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  }
  validate(r);
  return r;
}

inline void write_records_jsonl(std::ostream& os, const std::vector<InteractionRecord>& records) {
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

inline std::vector<InteractionRecord> read_records_jsonl(std::istream& is) {
  std::vector<InteractionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Documents and interactions loaded together.
struct Dataset {
  std::map<std::string, Document> documents;
  std::vector<InteractionRecord> records;

  std::vector<InteractionRecord> split(const std::string& name) const {
    std::vector<InteractionRecord> out;
    for (const auto& r : records) {
      if (r.meta("split") == name) out.push_back(r);
    }
    return out;
  }

  const Document& doc(const std::string& id) const {
    auto it = documents.find(id);
    if (it == documents.end()) throw Error(ErrorKind::MalformedRecord, "unknown document '" + id + "'");
    return it->second;
  }
};

inline std::vector<std::string> split_list(const std::string& s, char sep = '|') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// Category set of a document, from its "categories" metadata ("a|b").
inline std::set<std::string> categories_of(const Document& d) {
  auto it = d.metadata.find("categories");
  if (it == d.metadata.end()) return {};
  auto v = split_list(it->second);
  return {v.begin(), v.end()};
}

inline Dataset load_dataset(const std::string& documents_path, const std::string& interactions_path) {
  Dataset ds;
  std::ifstream dis(documents_path);
  if (!dis) throw Error(ErrorKind::Io, "cannot open '" + documents_path + "'");
  for (auto& d : read_documents_jsonl(dis)) {
    auto id = d.id;
    ds.documents.insert_or_assign(std::move(id), std::move(d));
  }
  std::ifstream ris(interactions_path);
  if (!ris) throw Error(ErrorKind::Io, "cannot open '" + interactions_path + "'");
  ds.records = read_records_jsonl(ris);
  return ds;
}

}  // namespace latefit
