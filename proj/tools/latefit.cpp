// latefit command-line driver: data generation, embedding, training,
// scoring, ranking, evaluation and benchmarking.

#include <latefit/latefit.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace latefit;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return kUsage;
    case ErrorKind::NonFiniteLogit:
    case ErrorKind::NonFiniteLoss: return kNumeric;
    default: return kData;
  }
}

void log(const std::string& msg) { std::cerr << "[latefit] " << msg << '\n'; }

/// Options of one subcommand that a JSON config file may set. Flags given on
/// the command line win over config values.
class ConfigKeys {
 public:
  void add(CLI::Option* opt) {
    std::string key = opt->get_single_name();
    std::replace(key.begin(), key.end(), '-', '_');
    opts_[key] = opt;
  }

  void apply(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
    json j;
    try {
      j = json::parse(is);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Usage, "config '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::Usage, "config must be a JSON object");
    for (const auto& [raw, value] : j.items()) {
      std::string key = raw;
      std::replace(key.begin(), key.end(), '-', '_');
      auto it = opts_.find(key);
      if (it == opts_.end()) throw Error(ErrorKind::Usage, "unknown config key '" + raw + "'");
      CLI::Option* opt = it->second;
      if (opt->count() > 0) continue;
      opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
      opt->run_callback();
    }
  }

  json resolved() const {
    json out = json::object();
    for (const auto& [k, opt] : opts_) {
      const auto r = opt->reduced_results();
      if (!r.empty()) out[k] = r.front();
      else if (!opt->get_default_str().empty()) out[k] = opt->get_default_str();
    }
    return out;
  }

 private:
  std::map<std::string, CLI::Option*> opts_;
};

struct Command {
  CLI::App* app = nullptr;
  ConfigKeys keys;
  std::string config_path;

  template <typename T>
  CLI::Option* opt(const std::string& name, T& var, const std::string& help) {
    auto* o = app->add_option(name, var, help)->capture_default_str();
    keys.add(o);
    return o;
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    auto* o = app->add_flag(name, var, help);
    keys.add(o);
    return o;
  }

  void resolve() {
    if (!config_path.empty()) keys.apply(config_path);
    log("config " + app->get_name() + " " + keys.resolved().dump());
  }
};

std::uint64_t seed_or_env(CLI::Option* opt, std::uint64_t value) {
  if (opt->count() > 0) return value;
  if (const char* env = std::getenv("LATEFIT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Usage, "LATEFIT_SEED is not an unsigned integer");
    }
  }
  return value;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  return os;
}

std::vector<Document> read_docs(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  return read_documents_jsonl(is);
}

std::unique_ptr<BackboneBackend> backend_from(const json& meta) {
  const auto& b = meta.at("backbone");
  if (b.at("name").get<std::string>() != "stub-hash-bow") {
    throw Error(ErrorKind::BadCheckpoint, "unsupported backbone '" + b.at("name").get<std::string>() + "'");
  }
  return std::make_unique<StubBackend>(b.at("dim").get<std::size_t>(), b.at("seed").get<std::uint64_t>());
}

EmbeddingCache load_warm_cache(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::CacheMiss, "cache '" + path + "' does not exist; run embed first");
  return cache_read(path);
}

std::vector<InteractionRecord> select_split(const Dataset& ds, const std::string& split) {
  if (split == "all") return ds.records;
  auto out = ds.split(split);
  if (out.empty()) throw Error(ErrorKind::EmptyDataset, "no records in split '" + split + "'");
  return out;
}

// --- gen-data --------------------------------------------------------------

struct GenArgs {
  std::string out = "data";
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;
  std::size_t categories = 12;
  std::size_t skills_per_category = 10;
  DatasetConfig dataset;
};

int run_gen(Command& c, GenArgs& a, CLI::Option* seed_opt, CLI::Option* world_seed_opt) {
  c.resolve();
  a.seed = seed_or_env(seed_opt, a.seed);
  if (world_seed_opt->count() == 0) a.world_seed = a.seed;
  a.dataset.seed = a.seed;
  const fs::path dir(a.out);
  fs::create_directories(dir);
  const SkillWorld world = gen_world(a.categories, a.skills_per_category, a.world_seed);
  const GeneratedData data = build_dataset(world, a.dataset);
  {
    auto os = open_out(dir / "documents.jsonl");
    write_documents_jsonl(os, data.documents);
  }
  {
    auto os = open_out(dir / "interactions.jsonl");
    write_records_jsonl(os, data.records);
  }
  write_json_file(dir / "world.json", to_json(world));
  std::size_t train = 0;
  for (const auto& r : data.records) train += r.meta("split") == "train";
  write_json_file(dir / "manifest.json",
                  {{"schema_version", kSchemaVersion},
                   {"world_seed", a.world_seed},
                   {"categories", a.categories},
                   {"skills_per_category", a.skills_per_category},
                   {"dataset", a.dataset.to_json()},
                   {"documents", data.documents.size()},
                   {"records", data.records.size()},
                   {"train_records", train},
                   {"test_records", data.records.size() - train}});
  log("wrote " + std::to_string(data.documents.size()) + " documents, " + std::to_string(data.records.size()) +
      " records to " + dir.string());
  return kOk;
}

// --- embed -----------------------------------------------------------------

struct EmbedArgs {
  std::string docs = "data/documents.jsonl";
  std::string cache = "data/cache.lfe";
  std::uint32_t dim = 384;
  std::uint64_t backbone_seed = 0;
};

int run_embed(Command& c, EmbedArgs& a) {
  c.resolve();
  const auto docs = read_docs(a.docs);
  EmbeddingCache cache;
  cache.dim = a.dim;
  if (fs::exists(a.cache)) {
    try {
      cache = cache_read(a.cache);
      if (cache.dim != a.dim) {
        log("warning: cache dim " + std::to_string(cache.dim) + " differs from " + std::to_string(a.dim) +
            "; regenerating");
        cache = EmbeddingCache{a.dim, {}};
      }
    } catch (const Error& e) {
      log(std::string("warning: unreadable cache (") + e.what() + "); regenerating");
      cache = EmbeddingCache{a.dim, {}};
    }
  }
  const StubBackend backend(a.dim, a.backbone_seed);
  const auto stats = update_cache(cache, docs, backend);
  cache_write(a.cache, cache);
  std::cout << json{{"hash_hits", stats.hits}, {"computed", stats.computed}, {"stale", stats.stale},
                    {"entries", cache.entries.size()}}
                   .dump()
            << '\n';
  return kOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data = "data";
  std::string cache = "data/cache.lfe";
  std::string out = "model.lfck";
  std::string log_path;
  std::string loss = "cmmd";
  std::string resume;
  std::size_t max_steps = 0;
  std::uint64_t backbone_seed = 0;
  TrainConfig cfg;
};

int run_train(Command& c, TrainArgs& a, CLI::Option* seed_opt) {
  c.resolve();
  a.cfg.loss = parse_loss_kind(a.loss);
  a.cfg.seed = seed_or_env(seed_opt, a.cfg.seed);
  a.cfg.validate();
  const fs::path dir(a.data);
  const Dataset ds = load_dataset((dir / "documents.jsonl").string(), (dir / "interactions.jsonl").string());
  const EmbeddingCache cache = load_warm_cache(a.cache);
  const TrainingIndex index(ds.split("train"), ds.documents);
  if (index.projects.empty()) throw Error(ErrorKind::EmptyDataset, "no training projects");
  if (!a.cfg.pointwise() && index.projects.size() < a.cfg.projects_per_batch) {
    log("warning: batch of " + std::to_string(a.cfg.projects_per_batch) + " projects exceeds the " +
        std::to_string(index.projects.size()) + " available; using all");
    a.cfg.projects_per_batch = index.projects.size();
  }

  ModelConfig model;
  model.backbone_dim = cache.dim;
  TrainState<float> state;
  if (!a.resume.empty()) {
    const Checkpoint ck = load_checkpoint(a.resume);
    if (!ck.adam_m) throw Error(ErrorKind::BadCheckpoint, "checkpoint has no optimizer state to resume from");
    state = ck.to_state();
    log("resuming from step " + std::to_string(state.step));
  } else {
    state = TrainState<float>::fresh(init_params<float>(model, a.cfg.seed));
  }

  const std::string log_path = a.log_path.empty() ? a.out + ".log.jsonl" : a.log_path;
  std::ofstream log_os(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log_os) throw Error(ErrorKind::Io, "cannot write '" + log_path + "'");
  std::size_t last_epoch = SIZE_MAX;
  double epoch_loss = 0;
  std::size_t epoch_steps = 0;
  auto flush_epoch = [&] {
    if (epoch_steps) log("epoch " + std::to_string(last_epoch) + " mean loss " + std::to_string(epoch_loss / epoch_steps));
  };
  auto on_step = [&](const TrainLogEntry& e) {
    log_os << e.to_json().dump() << '\n';
    if (e.epoch != last_epoch) {
      flush_epoch();
      last_epoch = e.epoch;
      epoch_loss = 0;
      epoch_steps = 0;
    }
    epoch_loss += e.loss;
    ++epoch_steps;
  };
  std::optional<std::uint64_t> max_steps;
  if (a.max_steps) max_steps = a.max_steps;
  state = train(index, cache, a.cfg, std::move(state), on_step, max_steps);
  flush_epoch();

  json meta = {{"train", a.cfg.to_json()},
               {"backbone", {{"name", "stub-hash-bow"}, {"dim", cache.dim}, {"seed", a.backbone_seed}}},
               {"steps_per_epoch", steps_per_epoch(index, a.cfg)}};
  save_checkpoint(a.out, Checkpoint::from_state(state, meta));
  log("wrote checkpoint " + a.out + " at step " + std::to_string(state.step));
  return kOk;
}

// --- score / evaluate ------------------------------------------------------

struct ScoreArgs {
  std::string data = "data";
  std::string cache = "data/cache.lfe";
  std::string checkpoint = "model.lfck";
  std::string split = "test";
  std::string out = "predictions.jsonl";
  std::size_t threads = 1;
};

std::vector<double> predict_records(const std::string& checkpoint, const std::string& cache_path,
                                    const std::vector<InteractionRecord>& records, std::size_t threads) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const EmbeddingCache cache = load_warm_cache(cache_path);
  return predict(ck.params, cache, records, threads);
}

int run_score(Command& c, ScoreArgs& a) {
  c.resolve();
  const fs::path dir(a.data);
  const Dataset ds = load_dataset((dir / "documents.jsonl").string(), (dir / "interactions.jsonl").string());
  const auto records = select_split(ds, a.split);
  const auto pred = predict_records(a.checkpoint, a.cache, records, a.threads);
  auto os = open_out(a.out);
  for (std::size_t i = 0; i < records.size(); ++i) {
    json j = to_json(records[i]);
    j["student_score"] = pred[i];
    os << j.dump() << '\n';
  }
  log("scored " + std::to_string(records.size()) + " pairs into " + a.out);
  return kOk;
}

struct EvalArgs {
  ScoreArgs score;
  std::string predictions;
  std::vector<std::string> slices;
  bool ood = false;
  bool binary_ndcg = false;
  std::string plot;
  std::string report;
};

std::vector<ScoredPair> read_predictions(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<ScoredPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto r = record_from_json(j);
      out.push_back({r.project_id, r.profile_id, r.teacher_score, j.at("student_score").get<double>(), r.metadata});
    } catch (const std::exception& e) {
      throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

int run_evaluate(Command& c, EvalArgs& a) {
  c.resolve();
  std::vector<ScoredPair> all;
  if (!a.predictions.empty()) {
    all = read_predictions(a.predictions);
  } else {
    const fs::path dir(a.score.data);
    const Dataset ds = load_dataset((dir / "documents.jsonl").string(), (dir / "interactions.jsonl").string());
    const auto records = select_split(ds, a.score.split);
    all = to_scored_pairs(records, predict_records(a.score.checkpoint, a.score.cache, records, a.score.threads));
  }
  std::vector<ScoredPair> base;
  for (const auto& p : all) {
    if (!p.metadata.contains("augment")) base.push_back(p);
  }
  const EvalOptions opt{a.binary_ndcg};
  const MetricsReport rep = evaluate(base, opt);
  std::vector<double> t, s;
  for (const auto& p : base) {
    t.push_back(p.teacher);
    s.push_back(p.student);
  }
  json out = {{"schema_version", kSchemaVersion},
              {"overall", rep.metrics_json()},
              {"support", rep.support_json()},
              {"correlation", {{"spearman", spearman(s, t)}, {"pearson", pearson(s, t)}}},
              {"slices", json::object()}};
  for (const auto& key : a.slices) out["slices"][key] = slice_json(sliced_evaluate(base, key, opt));
  if (a.ood) out["ood"] = ood_evaluate(all, opt).to_json();
  if (!a.plot.empty()) {
    auto os = open_out(a.plot);
    write_plot_csv(os, base);
  }
  const std::string text = out.dump(2);
  if (!a.report.empty()) {
    auto os = open_out(a.report);
    os << text << '\n';
  }
  std::cout << text << '\n';
  return kOk;
}

// --- rank ------------------------------------------------------------------

struct RankArgs {
  ScoreArgs score;
  std::string brief;
  std::size_t top_k = 10;
  bool all_profiles = false;
  bool as_json = false;
};

int run_rank(Command& c, RankArgs& a) {
  c.resolve();
  const fs::path dir(a.score.data);
  const Dataset ds = load_dataset((dir / "documents.jsonl").string(), (dir / "interactions.jsonl").string());
  auto it = ds.documents.find(a.brief);
  if (it == ds.documents.end() || it->second.kind != DocKind::brief) {
    throw Error(ErrorKind::MalformedRecord, "unknown brief '" + a.brief + "'");
  }
  std::set<std::string> ids;
  if (a.all_profiles) {
    for (const auto& [id, d] : ds.documents) {
      if (d.kind == DocKind::profile) ids.insert(id);
    }
  } else {
    for (const auto& r : ds.records) {
      if (r.project_id == a.brief) ids.insert(r.profile_id);
    }
  }
  const Checkpoint ck = load_checkpoint(a.score.checkpoint);
  const EmbeddingCache cache = load_warm_cache(a.score.cache);
  const auto backend = backend_from(ck.meta);
  auto ranked = score_batch(it->second, std::vector<std::string>(ids.begin(), ids.end()), cache, *backend, ck.params);
  if (ranked.size() > a.top_k) ranked.resize(a.top_k);
  if (a.as_json) {
    json arr = json::array();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      arr.push_back({{"rank", i + 1}, {"profile_id", ranked[i].profile_id}, {"score", ranked[i].score}});
    }
    std::cout << json{{"brief", a.brief}, {"ranking", arr}}.dump(2) << '\n';
  } else {
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      std::cout << std::setw(4) << i + 1 << "  " << ranked[i].profile_id << "  " << std::fixed
                << std::setprecision(6) << ranked[i].score << '\n';
    }
  }
  return kOk;
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
  std::string cache = "data/cache.lfe";
  std::string docs = "data/documents.jsonl";
  std::string brief;
  std::string checkpoint;
  std::size_t pairs = 1000;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
};

int run_bench(Command& c, BenchArgs& a) {
  c.resolve();
  const EmbeddingCache cache = load_warm_cache(a.cache);
  const auto docs = read_docs(a.docs);
  const CacheEntry* brief = nullptr;
  std::vector<const CacheEntry*> profiles;
  for (const auto& d : docs) {
    if (d.kind == DocKind::brief) {
      if (!brief && (a.brief.empty() || a.brief == d.id)) brief = &cache.at(d.id);
    } else {
      profiles.push_back(&cache.at(d.id));
    }
  }
  if (!brief) throw Error(ErrorKind::MalformedRecord, "no brief '" + a.brief + "' in " + a.docs);
  if (profiles.empty()) throw Error(ErrorKind::EmptyDataset, "no profiles in " + a.docs);
  ModelParams<float> params;
  if (!a.checkpoint.empty()) {
    params = load_checkpoint(a.checkpoint).params;
  } else {
    ModelConfig model;
    model.backbone_dim = cache.dim;
    params = init_params<float>(model, a.seed);
  }
  const BenchResult r = bench_scoring(*brief, profiles, params, a.pairs, a.repeats);
  std::cout << r.to_json().dump(2) << '\n';
  return kOk;
}

// --- import-teacher --------------------------------------------------------

struct ImportArgs {
  std::string input;
  std::string interactions = "data/interactions.jsonl";
  std::string out;
};

int run_import(Command& c, ImportArgs& a) {
  c.resolve();
  std::ifstream is(a.input);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + a.input + "'");
  const ImportResult imported = import_teacher_scores(is);
  if (imported.duplicates) log("warning: " + std::to_string(imported.duplicates) + " duplicate pair(s); last one kept");
  std::vector<InteractionRecord> base;
  if (fs::exists(a.interactions)) {
    std::ifstream bis(a.interactions);
    base = read_records_jsonl(bis);
  }
  const std::size_t replaced = merge_records(base, imported.records);
  const std::string out = a.out.empty() ? a.interactions : a.out;
  auto os = open_out(out);
  write_records_jsonl(os, base);
  std::cout << json{{"imported", imported.records.size()}, {"duplicates", imported.duplicates},
                    {"replaced", replaced}, {"total", base.size()}}
                   .dump()
            << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latefit: calibrated late-interaction reranking"};
  app.require_subcommand(1);

  auto make = [&](const std::string& name, const std::string& help) {
    Command c;
    c.app = app.add_subcommand(name, help);
    c.app->add_option("--config", c.config_path, "JSON config file; command-line flags take precedence");
    return c;
  };

  GenArgs gen;
  Command gen_cmd = make("gen-data", "Generate a synthetic corpus with rubric teacher scores");
  gen_cmd.opt("--out", gen.out, "Output directory");
  auto* gen_seed = gen_cmd.opt("--seed", gen.seed, "Dataset seed (falls back to LATEFIT_SEED)");
  auto* gen_wseed = gen_cmd.opt("--world-seed", gen.world_seed, "World seed (defaults to --seed)");
  gen_cmd.opt("--categories", gen.categories, "Number of skill categories")->check(CLI::PositiveNumber);
  gen_cmd.opt("--skills-per-category", gen.skills_per_category, "Skills per category")->check(CLI::PositiveNumber);
  gen_cmd.opt("--train-projects", gen.dataset.train_projects, "Training projects");
  gen_cmd.opt("--test-projects", gen.dataset.test_projects, "Held-out projects");
  gen_cmd.opt("--candidates", gen.dataset.candidates_per_project, "Rubric-targeted candidates per project");
  gen_cmd.opt("--average", gen.dataset.average_per_project, "Average-match candidates per project");
  gen_cmd.opt("--unsuitable", gen.dataset.test_unsuitable_per_project, "Unsuitable test candidates per project");
  gen_cmd.opt("--noise", gen.dataset.noise, "Probability of an adjacent-level teacher flip")->check(CLI::Range(0.0, 1.0));

  EmbedArgs emb;
  Command emb_cmd = make("embed", "Encode documents into the backbone cache");
  emb_cmd.opt("--docs", emb.docs, "Documents JSONL");
  emb_cmd.opt("--cache", emb.cache, "Cache file");
  emb_cmd.opt("--dim", emb.dim, "Backbone dimension")->check(CLI::Range(8, 1 << 16));
  emb_cmd.opt("--backbone-seed", emb.backbone_seed, "Stub encoder seed");

  TrainArgs tr;
  Command tr_cmd = make("train", "Distil teacher scores into the student");
  tr_cmd.opt("--data", tr.data, "Dataset directory");
  tr_cmd.opt("--cache", tr.cache, "Backbone cache");
  tr_cmd.opt("--out", tr.out, "Checkpoint path");
  tr_cmd.opt("--log", tr.log_path, "Training log JSONL (default <out>.log.jsonl)");
  tr_cmd.opt("--loss", tr.loss, "mse | margin_mse_labeled | margin_mse_relaxed | cmmd | clid_mse");
  tr_cmd.opt("--epochs", tr.cfg.epochs, "Epochs")->check(CLI::PositiveNumber);
  tr_cmd.opt("--batch-projects", tr.cfg.projects_per_batch, "Projects per batch")->check(CLI::PositiveNumber);
  tr_cmd.opt("--batch-records", tr.cfg.records_per_batch, "Records per point-wise batch (0: 5 x batch-projects)");
  auto* tr_seed = tr_cmd.opt("--seed", tr.cfg.seed, "Run seed (falls back to LATEFIT_SEED)");
  tr_cmd.opt("--lr0", tr.cfg.lr0, "Initial learning rate");
  tr_cmd.opt("--unsuitable", tr.cfg.unsuitable_per_project, "Unsuitable profiles per project");
  tr_cmd.opt("--threads", tr.cfg.threads, "Worker threads")->check(CLI::PositiveNumber);
  tr_cmd.opt("--resume", tr.resume, "Checkpoint to resume from");
  tr_cmd.opt("--max-steps", tr.max_steps, "Stop after this many steps (0: full schedule)");
  tr_cmd.opt("--backbone-seed", tr.backbone_seed, "Stub encoder seed used by embed");

  auto score_opts = [](Command& c, ScoreArgs& s) {
    c.opt("--data", s.data, "Dataset directory");
    c.opt("--cache", s.cache, "Backbone cache");
    c.opt("--checkpoint", s.checkpoint, "Model checkpoint");
    c.opt("--split", s.split, "train | test | all");
    c.opt("--threads", s.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  ScoreArgs sc;
  Command sc_cmd = make("score", "Write student scores for a split");
  score_opts(sc_cmd, sc);
  sc_cmd.opt("--out", sc.out, "Predictions JSONL");

  RankArgs rk;
  Command rk_cmd = make("rank", "Rank candidate profiles for one brief");
  score_opts(rk_cmd, rk.score);
  rk_cmd.opt("--brief", rk.brief, "Brief id")->required();
  rk_cmd.opt("--top-k", rk.top_k, "Rows to print")->check(CLI::PositiveNumber);
  rk_cmd.flag("--all-profiles", rk.all_profiles, "Rank every profile instead of the brief's candidates");
  rk_cmd.flag("--json", rk.as_json, "JSON output");

  EvalArgs ev;
  Command ev_cmd = make("evaluate", "Relevancy, ranking and calibration report");
  score_opts(ev_cmd, ev.score);
  ev_cmd.opt("--predictions", ev.predictions, "Predictions JSONL from `score` (skips inference)");
  ev_cmd.opt("--slice", ev.slices, "Metadata key to slice by (repeatable)");
  ev_cmd.flag("--ood", ev.ood, "Add base / +average / +unsuitable rows");
  ev_cmd.flag("--binary-ndcg", ev.binary_ndcg, "Binary NDCG gains instead of teacher scores");
  ev_cmd.opt("--export-plot-data", ev.plot, "CSV of (s_t, s_s, error) triples");
  ev_cmd.opt("--report", ev.report, "Also write the report JSON here");

  BenchArgs bn;
  Command bn_cmd = make("bench", "Time cached-profile scoring");
  bn_cmd.opt("--cache", bn.cache, "Warm backbone cache");
  bn_cmd.opt("--docs", bn.docs, "Documents JSONL; every document must already be cached");
  bn_cmd.opt("--brief", bn.brief, "Brief id (default: first brief)");
  bn_cmd.opt("--checkpoint", bn.checkpoint, "Model checkpoint (default: seeded init)");
  bn_cmd.opt("--pairs", bn.pairs, "Pairs per repeat")->check(CLI::PositiveNumber);
  bn_cmd.opt("--repeats", bn.repeats, "Timed repeats")->check(CLI::PositiveNumber);
  bn_cmd.opt("--seed", bn.seed, "Init seed when no checkpoint is given");

  ImportArgs im;
  Command im_cmd = make("import-teacher", "Merge externally produced teacher scores");
  im_cmd.opt("--input", im.input, "JSONL with project_id, profile_id, score")->required();
  im_cmd.opt("--interactions", im.interactions, "Interactions JSONL to merge into");
  im_cmd.opt("--out", im.out, "Output path (default: overwrite --interactions)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen_cmd.app->parsed()) return run_gen(gen_cmd, gen, gen_seed, gen_wseed);
    if (emb_cmd.app->parsed()) return run_embed(emb_cmd, emb);
    if (tr_cmd.app->parsed()) return run_train(tr_cmd, tr, tr_seed);
    if (sc_cmd.app->parsed()) return run_score(sc_cmd, sc);
    if (rk_cmd.app->parsed()) return run_rank(rk_cmd, rk);
    if (ev_cmd.app->parsed()) return run_evaluate(ev_cmd, ev);
    if (bn_cmd.app->parsed()) return run_bench(bn_cmd, bn);
    if (im_cmd.app->parsed()) return run_import(im_cmd, im);
  } catch (const Error& e) {
    log(std::string("error: ") + e.what());
    return exit_code(e.kind());
  } catch (const CLI::Error& e) {
    log(std::string("error: ") + e.what());
    return kUsage;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kData;
  }
  return kUsage;
}
