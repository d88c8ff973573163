#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "painloop/analytics.hpp"
#include "painloop/service.hpp"

using namespace painloop;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr together
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" PAINLOOP_BIN "\" " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("painloop_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string default_config() const { return std::string(PAINLOOP_SOURCE_DIR) + "/configs/default.json"; }

  fs::path dir_;
};

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(Cli, HelpListsSubcommandsAndFlags) {
  auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* w : {"simulate", "analyze", "serve", "assets"}) EXPECT_NE(r.out.find(w), std::string::npos) << w;
  r = run("simulate --help");
  EXPECT_EQ(r.code, 0);
  for (const char* w : {"--seed", "--trials", "--seeds", "--threads", "--out"})
    EXPECT_NE(r.out.find(w), std::string::npos) << w;
}

TEST_F(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(run("simulate " + default_config() + " --frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST_F(Cli, SimulateIsByteDeterministic) {
  const auto a = dir_ / "a", b = dir_ / "b";
  auto r = run("simulate " + default_config() + " --out " + a.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("seed 7:"), std::string::npos) << r.out;
  ASSERT_EQ(run("simulate " + default_config() + " --out " + b.string()).code, 0);
  const auto la = slurp(a / "seed-7.jsonl");
  EXPECT_EQ(la, slurp(b / "seed-7.jsonl"));
  // header + 2 personas x (6 familiarization + 120 learned)
  EXPECT_EQ(count_lines(la), 253u);
  std::istringstream is(la);
  const auto log = log_read(is);
  EXPECT_EQ(log.header["seed"], 7);
  EXPECT_EQ(log.records.size(), 252u);
  EXPECT_TRUE(fs::exists(a / "seed-7.summary.json"));
}

TEST_F(Cli, ThreadsDoNotChangeOutput) {
  const auto one = dir_ / "one", many = dir_ / "many";
  ASSERT_EQ(run("simulate " + default_config() + " --seeds 1..4 --trials 10 --out " + one.string()).code, 0);
  ASSERT_EQ(run("simulate " + default_config() + " --seeds 1..4 --trials 10 --threads 3 --out " + many.string()).code,
            0);
  for (int s = 1; s <= 4; ++s) {
    const auto name = "seed-" + std::to_string(s) + ".jsonl";
    EXPECT_EQ(slurp(one / name), slurp(many / name)) << name;
  }
  EXPECT_NE(slurp(one / "seed-1.jsonl"), slurp(one / "seed-2.jsonl"));
}

TEST_F(Cli, TrialsOverrideIsPerPersona) {
  ASSERT_EQ(run("simulate " + default_config() + " --seed 3 --trials 10 --out " + dir_.string()).code, 0);
  std::ifstream is(dir_ / "seed-3.jsonl");
  EXPECT_EQ(log_read(is).records.size(), 2u * (10 + 6));
}

TEST_F(Cli, LogDirFromEnvironment) {
  const auto env_dir = dir_ / "from_env";
  const auto r = run("simulate " + default_config() + " --trials 2", "PAINLOOP_LOG_DIR=" + env_dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(env_dir / "seed-7.jsonl"));
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  const auto missing_asset = dir_ / "cfg.json";
  write(missing_asset, R"({"session": {"seed": 1}, "assets": {"male": ["/no/such/track.wav", "/x.wav", "/y.wav"]}})");
  auto r = run("simulate " + missing_asset.string() + " --out " + dir_.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("/no/such/track.wav"), std::string::npos) << r.out;

  const auto no_seed = dir_ / "noseed.json";
  write(no_seed, "{}");
  r = run("simulate " + no_seed.string() + " --out " + dir_.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("seed"), std::string::npos);

  EXPECT_EQ(run("simulate " + (dir_ / "absent.json").string()).code, 2);
  write(no_seed, R"({"session": {"trials": 3}})");
  r = run("simulate " + no_seed.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("session.trials"), std::string::npos);
}

TEST_F(Cli, AnalyzeCurveOnHandLog) {
  std::vector<TrialRecord> rs;
  for (std::size_t i = 1; i <= 3; ++i) {
    TrialRecord r;
    r.trial_idx = i;
    r.context = {1, 5.0, Persona::male};
    r.peak_force = 6.0;
    r.crossing_t = 0.5;
    r.action = Action{0, 0};
    r.state = make_state(5.0, 5.0);
    r.log_prob = -1.0;
    r.value_estimate = 0.0;
    r.pain_intensity = 25.0;
    r.feedback = i == 2 ? Feedback::disagree : Feedback::agree;
    r.reward = reward_from_feedback(r.feedback);
    rs.push_back(r);
  }
  std::ofstream os(dir_ / "hand.jsonl", std::ios::binary);
  log_write(os, make_header(to_json(ExperimentConfig{}), 1), rs);
  os.close();
  const auto r = run("analyze " + (dir_ / "hand.jsonl").string() + " --figure curve");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out,
            "persona,learned_trial,trial_idx,reward,cumulative_mean_reward\n"
            "male,1,1,1,1\n"
            "male,2,2,0,0.5\n"
            "male,3,3,1,0.6666666666666666\n");
  const auto modes = run("analyze " + (dir_ / "hand.jsonl").string() + " --figure modes --agree-only");
  ASSERT_EQ(modes.code, 0);
  EXPECT_NE(modes.out.find("male,amplitude,5,0,1\n"), std::string::npos) << modes.out;
  EXPECT_EQ(run("analyze " + (dir_ / "hand.jsonl").string() + " --figure pie").code, 2);
}

TEST_F(Cli, AnalyzeEveryFigureOnSimulatedLog) {
  ASSERT_EQ(run("simulate " + default_config() + " --trials 12 --out " + dir_.string()).code, 0);
  for (const char* fig : {"trials", "curve", "freq", "modes", "force", "force20"}) {
    const auto out = dir_ / (std::string(fig) + ".csv");
    const auto r = run("analyze " + (dir_ / "seed-7.jsonl").string() + " --figure " + fig + " --out " + out.string());
    EXPECT_EQ(r.code, 0) << fig << ": " << r.out;
    EXPECT_GT(count_lines(slurp(out)), 1u) << fig;
  }
}

TEST_F(Cli, CorruptLogReportsLine) {
  ASSERT_EQ(run("simulate " + default_config() + " --trials 2 --out " + dir_.string()).code, 0);
  auto text = slurp(dir_ / "seed-7.jsonl");
  std::istringstream is(text);
  std::string header, first, rest;
  std::getline(is, header);
  std::getline(is, first);
  write(dir_ / "bad.jsonl", header + "\n" + first + "\n{\"type\":\"trial\",\"trial_idx\":\n");
  const auto r = run("analyze " + (dir_ / "bad.jsonl").string() + " --figure curve");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("bad.jsonl:3:"), std::string::npos) << r.out;
}

TEST_F(Cli, ServePortInUse) {
  service::Server held(ExperimentConfig{}, dir_);
  const auto r = run("serve --port " + std::to_string(held.port()) + " --out " + dir_.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("cannot listen"), std::string::npos) << r.out;
}

TEST_F(Cli, AssetsWritesTracks) {
  const auto r = run("assets --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(dir_)) wavs += e.path().extension() == ".wav";
  EXPECT_EQ(wavs, 6u);
}
