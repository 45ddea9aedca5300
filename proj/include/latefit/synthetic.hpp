#pragma once

#include <latefit/dataset.hpp>
#include <latefit/document.hpp>
#include <latefit/error.hpp>
#include <latefit/rng.hpp>
#include <latefit/sampler.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace latefit {

/// Teacher rubric: one description per level, same order as kRubricLevels.
inline constexpr std::array<std::string_view, 6> kRubricDescriptions{
    "No relevant skills or experience. Completely unable to perform the job.",
    "Minor relevance. Few matching skills or limited experience. High chance they will be unable "
    "to perform the job.",
    "Moderate match. Some relevant skills or experience. Would probably not be able to do the job.",
    "Good match. Mostly relevant skills and experience. Can perform with some ramp-up.",
    "Strong match. Highly relevant skills and experience. Ready to perform well.",
    "Perfect match. Skills and experience fully aligned with job needs. Expert on the topic.",
};

struct PhraseTemplates {
  std::vector<std::string> brief_title{"Looking for a {cat} expert",
                                       "{cat} freelancer needed",
                                       "Help wanted on a {cat} project"};
  std::vector<std::string> brief_sentence{"You will work on {skill}.",
                                          "Strong knowledge of {skill} is needed.",
                                          "The mission involves daily {skill} tasks.",
                                          "We expect solid {skill} delivery."};
  std::vector<std::string> brief_filler{"The team is small and remote.",
                                        "Start date is flexible.",
                                        "The mission lasts three months."};
  std::vector<std::string> profile_title{"{cat} specialist", "Senior {cat} consultant",
                                         "Freelance {cat} engineer"};
  std::vector<std::string> profile_sentence{"I have worked with {skill}.",
                                            "Built several products using {skill}.",
                                            "Five years of {skill} in production."};
  std::vector<std::string> profile_filler{"I enjoy clear communication.",
                                          "Available for remote missions."};
};

/// Skill universe behind the synthetic teacher.
struct SkillWorld {
  std::uint64_t seed = 0;
  std::vector<std::string> categories;
  std::vector<std::string> skills;
  std::vector<std::size_t> skill_category;
  std::vector<double> relatedness;  // row-major skills x skills
  PhraseTemplates templates;
  std::unordered_map<std::string, std::size_t> skill_index;

  std::size_t num_skills() const { return skills.size(); }

  double related(std::size_t a, std::size_t b) const { return relatedness[a * skills.size() + b]; }

  std::vector<std::size_t> skills_in(std::size_t category) const {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < skills.size(); ++s) {
      if (skill_category[s] == category) out.push_back(s);
    }
    return out;
  }

  std::size_t find_skill(const std::string& name) const {
    auto it = skill_index.find(name);
    if (it == skill_index.end()) throw Error(ErrorKind::ForeignSkill, "'" + name + "'");
    return it->second;
  }

  void rebuild_index() {
    skill_index.clear();
    for (std::size_t s = 0; s < skills.size(); ++s) skill_index[skills[s]] = s;
  }

  bool operator==(const SkillWorld& o) const {
    return seed == o.seed && categories == o.categories && skills == o.skills &&
           skill_category == o.skill_category && relatedness == o.relatedness;
  }
};

namespace detail {

inline std::string pseudo_word(Rng& rng, std::size_t syllables) {
  static constexpr std::array<std::string_view, 14> onset{"b", "d", "f", "g", "k", "l", "m",
                                                          "n", "p", "r", "s", "t", "v", "z"};
  static constexpr std::array<std::string_view, 5> vowel{"a", "e", "i", "o", "u"};
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += onset[rng.index(onset.size())];
    w += vowel[rng.index(vowel.size())];
  }
  return w;
}

inline std::string fill(std::string_view tpl, std::string_view key, const std::string& value) {
  std::string out(tpl);
  const auto pos = out.find(key);
  if (pos != std::string::npos) out.replace(pos, key.size(), value);
  return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.index(v.size())];
}

}  // namespace detail

/// Category names are single pseudo-words; skill names are
/// "<category> <word>" so skills of one category share a token.
inline SkillWorld gen_world(std::size_t n_categories, std::size_t skills_per_category, std::uint64_t seed) {
  if (n_categories < 1 || skills_per_category < 1) {
    throw Error(ErrorKind::Usage, "world needs at least one category and one skill");
  }
  SkillWorld w;
  w.seed = seed;
  Rng rng(derive_seed(seed, 0x3031D));
  std::set<std::string> used;
  auto fresh = [&](std::size_t syl) {
    for (;;) {
      auto word = detail::pseudo_word(rng, syl);
      if (used.insert(word).second) return word;
    }
  };
  for (std::size_t c = 0; c < n_categories; ++c) w.categories.push_back(fresh(3));
  for (std::size_t c = 0; c < n_categories; ++c) {
    for (std::size_t k = 0; k < skills_per_category; ++k) {
      w.skills.push_back(w.categories[c] + " " + fresh(2));
      w.skill_category.push_back(c);
    }
  }
  const std::size_t n = w.skills.size();
  w.relatedness.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    w.relatedness[a * n + a] = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const bool same = w.skill_category[a] == w.skill_category[b];
      const double r = same ? rng.uniform(0.4, 0.9) : rng.uniform(0.0, 0.2);
      w.relatedness[a * n + b] = r;
      w.relatedness[b * n + a] = r;
    }
  }
  w.rebuild_index();
  return w;
}

inline nlohmann::json to_json(const SkillWorld& w) {
  nlohmann::json skills = nlohmann::json::array();
  for (std::size_t s = 0; s < w.skills.size(); ++s) {
    skills.push_back({{"name", w.skills[s]}, {"category", w.skill_category[s]}});
  }
  const auto& t = w.templates;
  return {{"schema_version", 1},
          {"seed", w.seed},
          {"categories", w.categories},
          {"skills", skills},
          {"relatedness", w.relatedness},
          {"templates",
           {{"brief_title", t.brief_title},
            {"brief_sentence", t.brief_sentence},
            {"brief_filler", t.brief_filler},
            {"profile_title", t.profile_title},
            {"profile_sentence", t.profile_sentence},
            {"profile_filler", t.profile_filler}}}};
}

inline SkillWorld world_from_json(const nlohmann::json& j) {
  SkillWorld w;
  w.seed = j.at("seed").get<std::uint64_t>();
  w.categories = j.at("categories").get<std::vector<std::string>>();
  for (const auto& s : j.at("skills")) {
    w.skills.push_back(s.at("name").get<std::string>());
    w.skill_category.push_back(s.at("category").get<std::size_t>());
  }
  w.relatedness = j.at("relatedness").get<std::vector<double>>();
  if (w.relatedness.size() != w.skills.size() * w.skills.size()) {
    throw Error(ErrorKind::MalformedRecord, "relatedness matrix size");
  }
  const auto& t = j.at("templates");
  w.templates.brief_title = t.at("brief_title").get<std::vector<std::string>>();
  w.templates.brief_sentence = t.at("brief_sentence").get<std::vector<std::string>>();
  w.templates.brief_filler = t.at("brief_filler").get<std::vector<std::string>>();
  w.templates.profile_title = t.at("profile_title").get<std::vector<std::string>>();
  w.templates.profile_sentence = t.at("profile_sentence").get<std::vector<std::string>>();
  w.templates.profile_filler = t.at("profile_filler").get<std::vector<std::string>>();
  w.rebuild_index();
  return w;
}

inline std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

/// Render a brief from its required skills (primary category first).
inline Document render_project(const SkillWorld& w, const std::string& id,
                               const std::vector<std::size_t>& required, Rng& rng,
                               std::map<std::string, std::string> metadata = {}) {
  const auto& t = w.templates;
  std::vector<std::string> cats;
  for (auto s : required) {
    const auto& c = w.categories[w.skill_category[s]];
    if (std::find(cats.begin(), cats.end(), c) == cats.end()) cats.push_back(c);
  }
  std::string description;
  std::vector<std::string> names;
  for (auto s : required) {
    description += detail::fill(detail::pick(rng, t.brief_sentence), "{skill}", w.skills[s]) + " ";
    names.push_back(w.skills[s]);
  }
  description += detail::pick(rng, t.brief_filler);
  metadata["categories"] = join(cats, "|");
  return build_document(id, DocKind::brief,
                        {{"title", detail::fill(detail::pick(rng, t.brief_title), "{cat}", cats.front())},
                         {"description", description},
                         {"skills", join(names, ", ")},
                         {"category", join(cats, ", ")}},
                        std::move(metadata));
}

inline Document render_profile(const SkillWorld& w, const std::string& id,
                               const std::vector<std::size_t>& skills, Rng& rng,
                               std::map<std::string, std::string> metadata = {}) {
  const auto& t = w.templates;
  std::map<std::size_t, std::size_t> cat_count;
  for (auto s : skills) ++cat_count[w.skill_category[s]];
  std::size_t primary = cat_count.begin()->first;
  for (const auto& [c, k] : cat_count) {
    if (k > cat_count[primary]) primary = c;
  }
  std::vector<std::string> cats{w.categories[primary]};
  for (const auto& [c, k] : cat_count) {
    if (c != primary) cats.push_back(w.categories[c]);
  }
  std::string experience;
  std::vector<std::string> names;
  for (auto s : skills) {
    experience += detail::fill(detail::pick(rng, t.profile_sentence), "{skill}", w.skills[s]) + " ";
    names.push_back(w.skills[s]);
  }
  experience += detail::pick(rng, t.profile_filler);
  metadata["categories"] = join(cats, "|");
  return build_document(
      id, DocKind::profile,
      {{"title", detail::fill(detail::pick(rng, t.profile_title), "{cat}", w.categories[primary])},
       {"experience", experience},
       {"skills", join(names, ", ")},
       {"category", join(cats, ", ")}},
      std::move(metadata));
}

namespace detail {

inline std::vector<std::size_t> sample_distinct(Rng& rng, std::vector<std::size_t> pool, std::size_t k) {
  rng.shuffle(pool);
  pool.resize(std::min(k, pool.size()));
  return pool;
}

inline std::vector<std::size_t> other_category_skills(const SkillWorld& w, const std::set<std::size_t>& exclude) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < w.num_skills(); ++s) {
    if (!exclude.contains(w.skill_category[s])) out.push_back(s);
  }
  return out;
}

/// Required skills: two from a primary category plus one from each of one
/// to three other categories, so partial coverage spans the rubric.
inline std::vector<std::size_t> project_required(const SkillWorld& w, Rng& rng) {
  std::vector<std::size_t> cats(w.categories.size());
  for (std::size_t c = 0; c < cats.size(); ++c) cats[c] = c;
  rng.shuffle(cats);
  const std::size_t n_other = std::min<std::size_t>(1 + rng.index(3), cats.size() - 1);
  auto req = sample_distinct(rng, w.skills_in(cats[0]), 2);
  for (std::size_t k = 1; k <= n_other; ++k) {
    const auto pool = w.skills_in(cats[k]);
    req.push_back(pool[rng.index(pool.size())]);
  }
  return req;
}

inline std::vector<std::size_t> random_profile_skills(const SkillWorld& w, Rng& rng) {
  const std::size_t primary = rng.index(w.categories.size());
  auto skills = sample_distinct(rng, w.skills_in(primary), 2 + rng.index(4));
  if (w.categories.size() > 1 && rng.bernoulli(0.3)) {
    auto others = other_category_skills(w, {primary});
    skills.push_back(others[rng.index(others.size())]);
  }
  return skills;
}

}  // namespace detail

inline Document gen_project(const SkillWorld& w, Rng& rng, const std::string& id = "project") {
  const auto req = detail::project_required(w, rng);
  return render_project(w, id, req, rng);
}

inline Document gen_profile(const SkillWorld& w, Rng& rng, const std::string& id = "profile") {
  const auto skills = detail::random_profile_skills(w, rng);
  return render_profile(w, id, skills, rng);
}

/// Skill indices listed in a document's "skills" section.
inline std::vector<std::size_t> document_skills(const Document& d, const SkillWorld& w) {
  const auto skills_id = SectionVocab::standard().find(d.kind, "skills").id;
  std::vector<std::size_t> out;
  for (const auto& u : d.utterances) {
    if (u.section == skills_id) out.push_back(w.find_skill(u.text));
  }
  return out;
}

/// Mean over required skills of the best relatedness to any profile skill.
inline double true_fit(const std::vector<std::size_t>& required, const std::vector<std::size_t>& profile,
                       const SkillWorld& w) {
  if (required.empty() || profile.empty()) return 0.0;
  double sum = 0;
  for (auto r : required) {
    double best = 0;
    for (auto p : profile) best = std::max(best, w.related(r, p));
    sum += best;
  }
  return sum / static_cast<double>(required.size());
}

inline double true_fit(const Document& project, const Document& profile, const SkillWorld& w) {
  return true_fit(document_skills(project, w), document_skills(profile, w), w);
}

/// Index of the nearest rubric level; exact midpoints go to the lower level.
inline std::size_t rubric_index(double fit) {
  const double k = std::ceil(std::clamp(fit, 0.0, 1.0) * 5.0 - 0.5);
  return static_cast<std::size_t>(std::clamp(k, 0.0, 5.0));
}

/// Bucket to the nearest rubric level; with `noise` set, move to an adjacent
/// level with probability `flip_prob`.
inline double rubric_score(double fit, Rng* noise = nullptr, double flip_prob = 0.05) {
  std::size_t k = rubric_index(fit);
  if (noise && noise->bernoulli(flip_prob)) {
    if (k == 0) k = 1;
    else if (k == 5) k = 4;
    else k = noise->bernoulli(0.5) ? k + 1 : k - 1;
  }
  return kRubricLevels[k];
}

/// Draw a profile whose noise-free rubric level equals `target_level`.
/// Each required skill is covered exactly, by a same-category neighbour, or
/// not at all, with odds tilted toward the target; off-topic skills pad the
/// profile. Rejection sampling keeps only draws that land on the level.
inline std::vector<std::size_t> targeted_profile_skills(const SkillWorld& w,
                                                        const std::vector<std::size_t>& required,
                                                        std::size_t target_level, Rng& rng,
                                                        std::size_t max_tries) {
  std::set<std::size_t> req_cats;
  for (auto r : required) req_cats.insert(w.skill_category[r]);
  const auto far = detail::other_category_skills(w, req_cats);
  const double target = kRubricLevels[target_level];
  auto add = [](std::vector<std::size_t>& v, std::size_t s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (std::size_t attempt = 0; attempt < max_tries; ++attempt) {
    const double q = std::clamp(target + rng.uniform(-0.2, 0.2), 0.0, 1.0);
    std::vector<std::size_t> skills;
    for (auto r : required) {
      const double u = rng.uniform();
      if (u < q * q) {
        add(skills, r);
      } else if (u < q) {
        const auto peers = w.skills_in(w.skill_category[r]);
        const auto s = peers[rng.index(peers.size())];
        if (std::find(required.begin(), required.end(), s) == required.end()) add(skills, s);
      }
    }
    const std::size_t n_far = rng.index(3) + (skills.empty() ? 1 : 0);
    for (std::size_t k = 0; k < n_far && !far.empty(); ++k) add(skills, far[rng.index(far.size())]);
    if (skills.empty()) continue;
    rng.shuffle(skills);
    if (rubric_index(true_fit(required, skills, w)) == target_level) return skills;
  }
  throw Error(ErrorKind::ExhaustedSampler,
              "no profile at level " + std::to_string(target) + " after " + std::to_string(max_tries) + " tries");
}

struct DatasetConfig {
  std::size_t train_projects = 2000;
  std::size_t test_projects = 400;
  std::size_t candidates_per_project = 6;
  std::size_t average_per_project = 1;
  std::size_t test_unsuitable_per_project = 2;
  double noise = 0.05;
  std::size_t max_tries = 2000;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"train_projects", train_projects},
            {"test_projects", test_projects},
            {"candidates_per_project", candidates_per_project},
            {"average_per_project", average_per_project},
            {"test_unsuitable_per_project", test_unsuitable_per_project},
            {"noise", noise},
            {"max_tries", max_tries},
            {"seed", seed}};
  }
};

struct GeneratedData {
  std::vector<Document> documents;
  std::vector<InteractionRecord> records;
};

namespace detail {

inline std::string format_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", prefix, i);
  return buf;
}

inline std::string format_fit(double fit) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", fit);
  return buf;
}

}  // namespace detail

/// Generate one project with its candidates. Depends only on
/// (seed, project index), so projects can be generated in any order.
inline GeneratedData generate_project(const SkillWorld& w, const DatasetConfig& cfg, std::size_t i) {
  GeneratedData out;
  Rng rng(derive_seed(cfg.seed, i));
  const bool train = i < cfg.train_projects;
  const std::string split = train ? "train" : "test";
  const std::string pid = detail::format_id('p', i);
  static constexpr std::array<std::string_view, 3> languages{"en", "fr", "de"};
  const double lu = rng.uniform();
  const std::string language(lu < 0.6 ? languages[0] : lu < 0.85 ? languages[1] : languages[2]);

  const auto required = detail::project_required(w, rng);
  const Document project = render_project(w, pid, required, rng, {{"language", language}});
  out.documents.push_back(project);
  std::set<std::size_t> req_cats;
  for (auto r : required) req_cats.insert(w.skill_category[r]);

  std::size_t next = 0;
  auto add = [&](const std::vector<std::size_t>& skills, const std::string& augment) {
    const std::string fid = pid + "-f" + std::to_string(next++);
    const std::string group = rng.bernoulli(0.5) ? "A" : "B";
    Document prof = render_profile(w, fid, skills, rng, {{"group", group}});
    const double fit = true_fit(required, skills, w);
    const double teacher = rubric_score(fit, &rng, cfg.noise);
    InteractionRecord r{pid, fid, teacher, fit > 0.5 ? 1 : 0,
                        {{"split", split}, {"group", group}, {"language", language},
                         {"true_fit", detail::format_fit(fit)}}};
    if (!augment.empty()) r.metadata["augment"] = augment;
    out.documents.push_back(std::move(prof));
    out.records.push_back(std::move(r));
  };

  std::vector<std::size_t> levels;
  while (levels.size() < cfg.candidates_per_project) {
    std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
    rng.shuffle(all);
    for (auto l : all) {
      if (levels.size() < cfg.candidates_per_project) levels.push_back(l);
    }
  }
  for (auto level : levels) add(targeted_profile_skills(w, required, level, rng, cfg.max_tries), "");

  // average matches: keep only candidates the teacher scores 0.4 or 0.6
  for (std::size_t k = 0; k < cfg.average_per_project; ++k) {
    bool kept = false;
    for (std::size_t attempt = 0; attempt < cfg.max_tries && !kept; ++attempt) {
      const auto skills = targeted_profile_skills(w, required, rng.bernoulli(0.5) ? 2 : 3, rng, cfg.max_tries);
      Rng probe = rng;
      const double teacher = rubric_score(true_fit(required, skills, w), &probe, cfg.noise);
      if (teacher == 0.4 || teacher == 0.6) {
        add(skills, "average");
        out.records.back().teacher_score = teacher;
        rng = probe;
        kept = true;
      }
    }
    if (!kept) throw Error(ErrorKind::ExhaustedSampler, "average-match augmentation");
  }

  if (!train && w.categories.size() > req_cats.size()) {
    const auto far = detail::other_category_skills(w, req_cats);
    for (std::size_t k = 0; k < cfg.test_unsuitable_per_project; ++k) {
      auto skills = detail::sample_distinct(rng, far, 2 + rng.index(3));
      add(skills, "unsuitable");
      // no shared category: scored 0 outright, as the training sampler does
      out.records.back().teacher_score = 0.0;
      out.records.back().label = 0;
    }
  }
  return out;
}

/// Full synthetic corpus: projects [0, train) are train, the rest test.
inline GeneratedData build_dataset(const SkillWorld& w, const DatasetConfig& cfg) {
  if (cfg.train_projects + cfg.test_projects == 0 || cfg.candidates_per_project == 0) {
    throw Error(ErrorKind::Usage, "dataset needs at least one project and one candidate");
  }
  GeneratedData all;
  for (std::size_t i = 0; i < cfg.train_projects + cfg.test_projects; ++i) {
    auto part = generate_project(w, cfg, i);
    for (auto& d : part.documents) all.documents.push_back(std::move(d));
    for (auto& r : part.records) all.records.push_back(std::move(r));
  }
  return all;
}

struct ImportResult {
  std::vector<InteractionRecord> records;
  std::size_t duplicates = 0;
};

/// Externally produced teacher scores, one JSON object per line with
/// project_id, profile_id and score in [0, 1]. Later duplicates of a
/// (project, profile) pair replace earlier ones.
inline ImportResult import_teacher_scores(std::istream& is) {
  ImportResult out;
  std::map<std::pair<std::string, std::string>, std::size_t> pos;
  for (auto& r : read_records_jsonl(is)) {
    auto key = std::make_pair(r.project_id, r.profile_id);
    auto it = pos.find(key);
    if (it != pos.end()) {
      out.records[it->second] = std::move(r);
      ++out.duplicates;
    } else {
      pos.emplace(std::move(key), out.records.size());
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

/// Merge imported records into `base`; matching pairs are overwritten.
inline std::size_t merge_records(std::vector<InteractionRecord>& base, const std::vector<InteractionRecord>& incoming) {
  std::map<std::pair<std::string, std::string>, std::size_t> pos;
  for (std::size_t i = 0; i < base.size(); ++i) pos[{base[i].project_id, base[i].profile_id}] = i;
  std::size_t replaced = 0;
  for (const auto& r : incoming) {
    auto it = pos.find({r.project_id, r.profile_id});
    if (it != pos.end()) {
      auto meta = base[it->second].metadata;
      base[it->second] = r;
      for (auto& [k, v] : meta) base[it->second].metadata.try_emplace(k, v);
      ++replaced;
    } else {
      pos[{r.project_id, r.profile_id}] = base.size();
      base.push_back(r);
    }
  }
  return replaced;
}

}  // namespace latefit
