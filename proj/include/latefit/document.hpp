#pragma once

#include <latefit/error.hpp>
#include <latefit/rng.hpp>

#include <json.hpp>

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace latefit {

enum class SectionKind { paragraph, tags, title };
enum class DocKind { brief, profile };

inline std::string_view to_string(DocKind kind) {
  return kind == DocKind::brief ? "brief" : "profile";
}

inline DocKind parse_doc_kind(std::string_view s) {
  if (s == "brief") return DocKind::brief;
  if (s == "profile") return DocKind::profile;
  throw Error(ErrorKind::MalformedRecord, "unknown document kind '" + std::string(s) + "'");
}

struct SectionType {
  std::uint16_t id = 0;
  std::string name;
  SectionKind kind = SectionKind::paragraph;
};

/// Fixed section vocabulary for each document kind. Ids are dense per kind.
class SectionVocab {
 public:
  SectionVocab(std::vector<SectionType> brief, std::vector<SectionType> profile)
      : brief_(std::move(brief)), profile_(std::move(profile)) {}

  static const SectionVocab& standard() {
    static const SectionVocab vocab(
        {{0, "title", SectionKind::title},
         {1, "description", SectionKind::paragraph},
         {2, "skills", SectionKind::tags},
         {3, "category", SectionKind::tags}},
        {{0, "title", SectionKind::title},
         {1, "experience", SectionKind::paragraph},
         {2, "skills", SectionKind::tags},
         {3, "category", SectionKind::tags}});
    return vocab;
  }

  const std::vector<SectionType>& sections(DocKind kind) const {
    return kind == DocKind::brief ? brief_ : profile_;
  }

  std::size_t size(DocKind kind) const { return sections(kind).size(); }

  const SectionType& find(DocKind kind, std::string_view name) const {
    for (const auto& s : sections(kind)) {
      if (s.name == name) return s;
    }
    throw Error(ErrorKind::UnknownSectionType,
                "section '" + std::string(name) + "' not valid for " +
                    std::string(to_string(kind)));
  }

  const SectionType& at(DocKind kind, std::uint16_t id) const {
    const auto& v = sections(kind);
    if (id >= v.size()) {
      throw Error(ErrorKind::UnknownSectionType, "section id " + std::to_string(id));
    }
    return v[id];
  }

  nlohmann::json to_json() const {
    auto dump = [](const std::vector<SectionType>& v) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& s : v) {
        const char* k = s.kind == SectionKind::paragraph ? "paragraph"
                        : s.kind == SectionKind::tags    ? "tags"
                                                         : "title";
        arr.push_back({{"id", s.id}, {"name", s.name}, {"kind", k}});
      }
      return arr;
    };
    return {{"brief", dump(brief_)}, {"profile", dump(profile_)}};
  }

 private:
  std::vector<SectionType> brief_;
  std::vector<SectionType> profile_;
};

struct Utterance {
  std::string text;
  std::uint16_t section = 0;
  std::uint32_t index_in_section = 0;

  bool operator==(const Utterance&) const = default;
};

struct Section {
  std::string type;
  std::string text;

  bool operator==(const Section&) const = default;
};

struct Document {
  std::string id;
  DocKind kind = DocKind::brief;
  std::vector<Section> sections;
  std::vector<Utterance> utterances;
  std::map<std::string, std::string> metadata;
};

inline constexpr std::size_t kMaxUtterances = 256;

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline void push_trimmed(std::vector<std::string>& out, std::string_view frag) {
  auto t = trim(frag);
  if (!t.empty()) out.push_back(std::move(t));
}

}  // namespace detail

/// Split one section's raw text into utterances.
///
/// Paragraphs cut after each run of '.', '!' or '?' (the terminators stay
/// attached to the sentence) and at newlines. Tags cut at ',', ';' and
/// newlines. Titles are a single utterance. Empty fragments are dropped.
inline std::vector<std::string> segment_section(SectionKind kind, std::string_view text) {
  std::vector<std::string> out;
  switch (kind) {
    case SectionKind::title:
      detail::push_trimmed(out, text);
      break;
    case SectionKind::tags: {
      std::size_t start = 0;
      for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == ',' || c == ';' || c == '\n') {
          detail::push_trimmed(out, text.substr(start, i - start));
          start = i + 1;
        }
      }
      detail::push_trimmed(out, text.substr(start));
      break;
    }
    case SectionKind::paragraph: {
      auto terminator = [](char c) { return c == '.' || c == '!' || c == '?'; };
      std::size_t start = 0;
      std::size_t i = 0;
      while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
          detail::push_trimmed(out, text.substr(start, i - start));
          start = ++i;
        } else if (terminator(c)) {
          while (i < text.size() && terminator(text[i])) ++i;
          detail::push_trimmed(out, text.substr(start, i - start));
          start = i;
        } else {
          ++i;
        }
      }
      detail::push_trimmed(out, text.substr(start));
      break;
    }
  }
  return out;
}

/// Build a document from raw (section name, text) pairs. Utterances follow
/// the given section order and are capped at kMaxUtterances; later sections
/// are truncated first.
inline Document build_document(std::string id, DocKind kind, std::vector<Section> sections,
                               std::map<std::string, std::string> metadata,
                               const SectionVocab& vocab = SectionVocab::standard()) {
  Document doc;
  doc.id = std::move(id);
  doc.kind = kind;
  doc.metadata = std::move(metadata);
  for (const auto& s : sections) {
    const auto& type = vocab.find(kind, s.type);
    std::uint32_t idx = 0;
    for (auto& u : segment_section(type.kind, s.text)) {
      if (doc.utterances.size() >= kMaxUtterances) break;
      doc.utterances.push_back({std::move(u), type.id, idx++});
    }
  }
  doc.sections = std::move(sections);
  if (doc.utterances.empty()) {
    throw Error(ErrorKind::EmptyDocument, "document '" + doc.id + "' has no utterances");
  }
  return doc;
}

inline nlohmann::json to_json(const Document& doc) {
  nlohmann::json sections = nlohmann::json::array();
  for (const auto& s : doc.sections) sections.push_back({{"type", s.type}, {"text", s.text}});
  return {{"id", doc.id},
          {"kind", std::string(to_string(doc.kind))},
          {"sections", std::move(sections)},
          {"metadata", doc.metadata}};
}

inline Document document_from_json(const nlohmann::json& j,
                                   const SectionVocab& vocab = SectionVocab::standard()) {
  std::vector<Section> sections;
  for (const auto& s : j.at("sections")) {
    sections.push_back({s.at("type").get<std::string>(), s.at("text").get<std::string>()});
  }
  std::map<std::string, std::string> metadata;
  if (j.contains("metadata")) metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  return build_document(j.at("id").get<std::string>(),
                        parse_doc_kind(j.at("kind").get<std::string>()), std::move(sections),
                        std::move(metadata), vocab);
}

inline void write_documents_jsonl(std::ostream& os, const std::vector<Document>& docs) {
  for (const auto& d : docs) os << to_json(d).dump() << '\n';
}

inline std::vector<Document> read_documents_jsonl(
    std::istream& is, const SectionVocab& vocab = SectionVocab::standard()) {
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      docs.push_back(document_from_json(j, vocab));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedRecord,
                  "documents line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

/// Stable hash over kind and segmented content; keys embedding-cache staleness.
inline std::uint64_t content_hash(const Document& doc) {
  std::uint64_t h = fnv1a64(to_string(doc.kind));
  for (const auto& u : doc.utterances) {
    h = fnv1a64(std::string_view("\x1f"), h);
    h = fnv1a64(std::to_string(u.section), h);
    h = fnv1a64(std::string_view("\x1e"), h);
    h = fnv1a64(u.text, h);
  }
  return h;
}

}  // namespace latefit
