#include <json.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(LATEFIT_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Run run_stderr(const std::string& args) {
  const std::string cmd = std::string(LATEFIT_CLI) + " " + args + " 2>&1 >/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// one small pipeline shared by every test
class Cli : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("latefit_cli_" + std::to_string(getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    ASSERT_EQ(run("gen-data --out " + p("data") + " --seed 5 --train-projects 16 --test-projects 6").code, 0);
    ASSERT_EQ(run("embed --docs " + p("data/documents.jsonl") + " --cache " + p("cache.lfe") + " --dim 32").code, 0);
    ASSERT_EQ(run(train_args("cmmd", "model.lfck")).code, 0);
  }

  static void TearDownTestSuite() { fs::remove_all(dir); }

  static std::string p(const std::string& rel) { return (dir / rel).string(); }

  static std::string train_args(const std::string& loss, const std::string& out) {
    return "train --data " + p("data") + " --cache " + p("cache.lfe") + " --out " + p(out) + " --loss " + loss +
           " --epochs 1 --batch-projects 4 --seed 3";
  }

  static std::string model_args() {
    return " --data " + p("data") + " --cache " + p("cache.lfe") + " --checkpoint " + p("model.lfck");
  }
};

fs::path Cli::dir;

}  // namespace

TEST_F(Cli, GenDataIsReproducible) {
  for (const char* f : {"documents.jsonl", "interactions.jsonl", "world.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "data" / f)) << f;
  }
  ASSERT_EQ(run("gen-data --out " + p("nested/again") + " --seed 5 --train-projects 16 --test-projects 6").code, 0);
  for (const char* f : {"documents.jsonl", "interactions.jsonl", "world.json"}) {
    EXPECT_EQ(slurp(dir / "data" / f), slurp(dir / "nested/again" / f)) << f;
  }
  ASSERT_EQ(run("gen-data --out " + p("other") + " --seed 6 --train-projects 16 --test-projects 6").code, 0);
  EXPECT_NE(slurp(dir / "data/interactions.jsonl"), slurp(dir / "other/interactions.jsonl"));
}

TEST_F(Cli, SeedFromEnvironment) {
  ASSERT_EQ(run("gen-data --out " + p("env") + " --train-projects 16 --test-projects 6").code, 0);
  const std::string env = "LATEFIT_SEED=5 ";
  const std::string cmd = env + LATEFIT_CLI + " gen-data --out " + p("env5") +
                          " --train-projects 16 --test-projects 6 2>/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(slurp(dir / "env5/interactions.jsonl"), slurp(dir / "data/interactions.jsonl"));
}

TEST_F(Cli, EmbedReusesAndRepairsCache) {
  const auto again = run("embed --docs " + p("data/documents.jsonl") + " --cache " + p("cache.lfe") + " --dim 32");
  ASSERT_EQ(again.code, 0);
  const auto stats = json::parse(again.out);
  EXPECT_EQ(stats.at("computed"), 0);
  EXPECT_GT(stats.at("hash_hits").get<int>(), 0);
  EXPECT_EQ(stats.at("hash_hits"), stats.at("entries"));

  fs::copy_file(dir / "cache.lfe", dir / "broken.lfe");
  {
    std::ofstream os(dir / "broken.lfe", std::ios::binary | std::ios::in);
    os.seekp(0);
    os.write("XXXX", 4);
  }
  const auto repaired = run_stderr("embed --docs " + p("data/documents.jsonl") + " --cache " + p("broken.lfe") + " --dim 32");
  EXPECT_EQ(repaired.code, 0);
  EXPECT_NE(repaired.out.find("warning"), std::string::npos);
  EXPECT_EQ(slurp(dir / "broken.lfe"), slurp(dir / "cache.lfe"));
}

TEST_F(Cli, TrainAcceptsEveryLoss) {
  for (const char* loss : {"mse", "margin_mse_labeled", "margin_mse_relaxed", "cmmd", "clid_mse"}) {
    EXPECT_EQ(run(train_args(loss, std::string("m_") + loss + ".lfck")).code, 0) << loss;
    EXPECT_TRUE(fs::exists(dir / (std::string("m_") + loss + ".lfck.log.jsonl"))) << loss;
  }
  EXPECT_EQ(run(train_args("listnet", "bad.lfck")).code, 1);
}

TEST_F(Cli, ConfigFileAndPrecedence) {
  {
    std::ofstream os(dir / "cfg.json");
    os << R"({"epochs": 1, "batch-projects": 4, "loss": "mse", "seed": 3})";
  }
  const std::string base = "train --data " + p("data") + " --cache " + p("cache.lfe") + " --config " + p("cfg.json");
  ASSERT_EQ(run(base + " --out " + p("from_cfg.lfck") + " --loss cmmd").code, 0);
  // flag wins over the file, so this matches the cmmd fixture model
  EXPECT_EQ(slurp(dir / "from_cfg.lfck"), slurp(dir / "model.lfck"));

  {
    std::ofstream os(dir / "bad_cfg.json");
    os << R"({"epochs": 1, "learning_rate_typo": 3})";
  }
  EXPECT_EQ(run("train --data " + p("data") + " --cache " + p("cache.lfe") + " --config " + p("bad_cfg.json")).code, 1);
  EXPECT_EQ(run("train --epochs 0").code, 1);
  EXPECT_EQ(run("no-such-command").code, 1);
}

TEST_F(Cli, ResumeMatchesUninterrupted) {
  const std::string base = "train --data " + p("data") + " --cache " + p("cache.lfe") +
                           " --loss cmmd --epochs 2 --batch-projects 4 --seed 9";
  ASSERT_EQ(run(base + " --out " + p("full.lfck")).code, 0);
  ASSERT_EQ(run(base + " --out " + p("half.lfck") + " --max-steps 3").code, 0);
  ASSERT_EQ(run(base + " --out " + p("resumed.lfck") + " --resume " + p("half.lfck")).code, 0);
  EXPECT_EQ(slurp(dir / "resumed.lfck"), slurp(dir / "full.lfck"));
}

TEST_F(Cli, RankTopK) {
  const auto r = run("rank" + model_args() + " --brief p000000 --top-k 3 --json");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  ASSERT_EQ(j.at("ranking").size(), 3u);
  double prev = 1e300;
  for (const auto& row : j.at("ranking")) {
    EXPECT_LE(row.at("score").get<double>(), prev);
    prev = row.at("score").get<double>();
  }
  EXPECT_EQ(run("rank" + model_args() + " --brief p000000 --top-k 3 --json").out, r.out);
  const auto all = json::parse(run("rank" + model_args() + " --brief p000000 --all-profiles --top-k 1000 --json").out);
  EXPECT_GT(all.at("ranking").size(), 10u);
  EXPECT_EQ(run("rank" + model_args() + " --brief nope").code, 2);
  EXPECT_EQ(run("rank" + model_args()).code, 1);
}

TEST_F(Cli, EvaluateReport) {
  const auto r = run("evaluate" + model_args() + " --slice language --slice group --ood --export-plot-data " +
                     p("plot.csv") + " --report " + p("report.json"));
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j.at("overall").size(), 11u);
  EXPECT_TRUE(j.at("slices").contains("language"));
  EXPECT_TRUE(j.at("slices").contains("group"));
  EXPECT_EQ(j.at("ood").size(), 3u);
  EXPECT_EQ(json::parse(slurp(dir / "report.json")), j);
  const auto csv = slurp(dir / "plot.csv");
  EXPECT_EQ(csv.rfind("s_t,s_s,error\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), j.at("support").at("pairs").get<long>() + 1);
  EXPECT_EQ(run("evaluate" + model_args() + " --slice seniority").code, 2);

  // scoring to a file and evaluating the predictions gives the same report
  ASSERT_EQ(run("score" + model_args() + " --out " + p("pred.jsonl")).code, 0);
  const auto from_file = json::parse(run("evaluate --predictions " + p("pred.jsonl")).out);
  EXPECT_EQ(from_file.at("overall"), j.at("overall"));
}

TEST_F(Cli, Bench) {
  const auto r = run("bench --cache " + p("cache.lfe") + " --docs " + p("data/documents.jsonl") + " --checkpoint " +
                     p("model.lfck") + " --pairs 200 --repeats 2");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j.at("pairs"), 200);
  EXPECT_EQ(j.at("seconds").size(), 2u);
  EXPECT_GT(j.at("pairs_per_second").get<double>(), 0.0);

  // documents that were never embedded
  ASSERT_EQ(run("gen-data --out " + p("cold") + " --seed 77 --train-projects 4 --test-projects 1").code, 0);
  EXPECT_NE(run("bench --cache " + p("cache.lfe") + " --docs " + p("cold/documents.jsonl") + " --pairs 10").code, 0);
}

TEST_F(Cli, ImportTeacher) {
  {
    std::ofstream os(dir / "teacher.jsonl");
    os << R"({"project_id":"p000000","profile_id":"p000000-f0","score":1.0})" << '\n'
       << R"({"project_id":"zz","profile_id":"yy","score":0.4})" << '\n';
  }
  const auto r = run("import-teacher --input " + p("teacher.jsonl") + " --interactions " +
                     p("data/interactions.jsonl") + " --out " + p("merged.jsonl"));
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j.at("imported"), 2);
  {
    std::ofstream os(dir / "bad_teacher.jsonl");
    os << R"({"project_id":"a","profile_id":"b","score":1.2})" << '\n';
  }
  EXPECT_EQ(run("import-teacher --input " + p("bad_teacher.jsonl") + " --interactions " +
                p("data/interactions.jsonl") + " --out " + p("merged2.jsonl")).code, 2);
}
