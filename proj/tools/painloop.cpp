// painloop: run simulated experiments, analyze logs, serve live sessions.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "painloop/analytics.hpp"
#include "painloop/audio.hpp"
#include "painloop/config.hpp"
#include "painloop/service.hpp"
#include "painloop/session.hpp"

namespace fs = std::filesystem;
using namespace painloop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// --out beats PAINLOOP_LOG_DIR beats the config file.
std::string output_dir(const ExperimentConfig& cfg, const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (const char* env = std::getenv("PAINLOOP_LOG_DIR"); env && *env) return env;
  return cfg.log_dir;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) throw Error(Errc::config, "--seeds must look like a..b");
  try {
    std::size_t used = 0;
    const auto a = std::stoull(s.substr(0, dots), &used);
    if (used != dots) throw std::invalid_argument("a");
    const auto tail = s.substr(dots + 2);
    const auto b = std::stoull(tail, &used);
    if (used != tail.size()) throw std::invalid_argument("b");
    if (b < a) throw Error(Errc::config, "--seeds range is empty");
    return {a, b};
  } catch (const std::logic_error&) {
    throw Error(Errc::config, "--seeds must look like a..b with non-negative integers");
  }
}

struct SimulateOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string seeds;
  std::size_t threads = 1;
  std::string out;
};

// One seed: log to <dir>/seed-<n>.jsonl, summary to <dir>/seed-<n>.summary.json.
SessionSummary simulate_one(ExperimentConfig cfg, std::uint64_t seed, const fs::path& dir) {
  cfg.session.seed = seed;
  const fs::path log_path = dir / ("seed-" + std::to_string(seed) + ".jsonl");
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw Error(Errc::config, "cannot write " + log_path.string());
  LogWriter writer(log, make_header(to_json(cfg), seed));
  OracleParticipant participant(cfg.oracle, cfg.palpator, seed, cfg.pain);
  auto result = run_session(cfg.session, cfg.space, cfg.pain, default_agent_factory(cfg.ppo), participant,
                            participant, [&](const TrialRecord& r) { writer.append(r); });
  std::ofstream summary(dir / ("seed-" + std::to_string(seed) + ".summary.json"), std::ios::binary);
  summary << summary_to_json(result.summary).dump(2) << '\n';
  return result.summary;
}

int cmd_simulate(const SimulateOpts& o) {
  ExperimentConfig cfg;
  std::vector<std::uint64_t> seeds;
  fs::path dir;
  try {
    cfg = load_experiment_config(o.config);
    if (o.seed) {
      cfg.session.seed = *o.seed;
      cfg.seed_given = true;
    }
    if (o.trials) cfg.session.trials_per_persona = *o.trials;
    if (!o.seeds.empty()) {
      const auto [a, b] = parse_seed_range(o.seeds);
      for (auto s = a; s <= b; ++s) seeds.push_back(s);
    } else {
      if (!cfg.seed_given) throw Error(Errc::config, "a seed is required: set session.seed, --seed or --seeds");
      seeds.push_back(cfg.session.seed);
    }
    if (o.threads < 1) throw Error(Errc::config, "--threads must be >= 1");
    cfg.validate();
    dir = output_dir(cfg, o.out);
    fs::create_directories(dir);
  } catch (const std::exception& e) {
    std::cerr << "painloop simulate: " << e.what() << '\n';
    return kExitUsage;
  }

  // Seeds are independent, so threads only change wall time, never output.
  std::vector<std::optional<SessionSummary>> summaries(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::string first_error;
  auto work = [&] {
    for (std::size_t i; (i = next++) < seeds.size();) {
      try {
        summaries[i] = simulate_one(cfg, seeds[i], dir);
      } catch (const std::exception& e) {
        std::lock_guard lk(err_mu);
        if (first_error.empty()) first_error = "seed " + std::to_string(seeds[i]) + ": " + e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(o.threads, seeds.size()); ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (!first_error.empty()) {
    std::cerr << "painloop simulate: " << first_error << '\n';
    return kExitRuntime;
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    std::cout << "seed " << seeds[i] << ':';
    for (const auto& p : summaries[i]->personas)
      std::cout << ' ' << to_string(p.persona) << " cumulative_mean_reward=" << fmt_num(p.cumulative_mean_reward);
    std::cout << " log=" << (dir / ("seed-" + std::to_string(seeds[i]) + ".jsonl")).string() << '\n';
  }
  return kExitOk;
}

struct AnalyzeOpts {
  std::string log;
  std::string figure;
  bool agree_only = false;
  std::string out;
};

int cmd_analyze(const AnalyzeOpts& o) {
  std::ifstream is(o.log, std::ios::binary);
  if (!is) {
    std::cerr << "painloop analyze: cannot open " << o.log << '\n';
    return kExitRuntime;
  }
  TrialLog log;
  ActionSpace space;
  try {
    log = log_read(is);
    if (log.header.contains("config"))
      space = parse_experiment_config(nlohmann::json::parse(log.header["config"].dump())).space;
  } catch (const LogError& e) {
    std::cerr << "painloop analyze: " << o.log << ":" << e.line() << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "painloop analyze: " << o.log << ": " << e.what() << '\n';
    return kExitRuntime;
  }

  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out, std::ios::binary);
    if (!file) {
      std::cerr << "painloop analyze: cannot write " << o.out << '\n';
      return kExitRuntime;
    }
  }
  std::ostream& os = o.out.empty() ? std::cout : file;
  try {
    if (o.figure == "trials") csv_trials(os, log.records);
    else if (o.figure == "curve") csv_curve(os, log.records);
    else if (o.figure == "freq") csv_frequency(os, log.records, space, o.agree_only);
    else if (o.figure == "modes") csv_modes(os, log.records, space, o.agree_only);
    else if (o.figure == "force") csv_force(os, log.records, space, std::nullopt);
    else if (o.figure == "force20") csv_force(os, log.records, space, 0.2);
  } catch (const std::exception& e) {
    std::cerr << "painloop analyze: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

int cmd_serve(const std::string& config_path, unsigned short port, const std::string& host, const std::string& out) {
  ExperimentConfig cfg;
  std::string dir;
  try {
    cfg = config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
    cfg.validate();
    dir = output_dir(cfg, out);
  } catch (const std::exception& e) {
    std::cerr << "painloop serve: " << e.what() << '\n';
    return kExitUsage;
  }
  std::optional<service::Server> server;
  try {
    server.emplace(cfg, dir, host, port);
  } catch (const std::exception& e) {
    std::cerr << "painloop serve: cannot listen on " << host << ':' << port << ": " << e.what() << '\n';
    return kExitRuntime;
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server->start();
  std::cout << "listening on " << host << ':' << server->port() << " logs=" << dir << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server->stop();
  std::cout << "stopped" << std::endl;
  return kExitOk;
}

int cmd_assets(const std::string& out, double rate) {
  try {
    fs::create_directories(out);
    const ActionSpace space;
    for (Persona p : {Persona::male, Persona::female})
      for (int track : space.tracks) {
        const fs::path path = fs::path(out) / (std::string(to_string(p)) + "-" + std::to_string(track) + ".wav");
        wav_write(synth_pain_track(p, track, rate), path.string());
        std::cout << path.string() << '\n';
      }
  } catch (const std::exception& e) {
    std::cerr << "painloop assets: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"painloop: pain-sound learning experiments"};
  app.require_subcommand(1);
  app.allow_extras(false);

  SimulateOpts sim;
  auto* simulate = app.add_subcommand("simulate", "Run sessions against the simulated participant");
  simulate->add_option("config", sim.config, "Experiment config (JSON)")->required();
  simulate->add_option("--seed", sim.seed, "Session seed (overrides session.seed)");
  simulate->add_option("--trials", sim.trials, "Trials per persona (overrides session.trials_per_persona)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seeds", sim.seeds, "Seed sweep a..b, one log per seed");
  simulate->add_option("--threads", sim.threads, "Worker threads for seed sweeps")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim.out, "Output directory (overrides PAINLOOP_LOG_DIR and output.log_dir)");

  AnalyzeOpts an;
  auto* analyze = app.add_subcommand("analyze", "Emit CSV tables from a session log");
  analyze->add_option("log", an.log, "Session log (JSONL)")->required();
  analyze->add_option("--figure", an.figure, "Table to emit")
      ->required()
      ->check(CLI::IsMember({"trials", "curve", "freq", "modes", "force", "force20"}));
  analyze->add_flag("--agree-only", an.agree_only, "freq/modes: count only agreed trials");
  analyze->add_option("--out", an.out, "Write CSV here instead of stdout");

  std::string serve_config;
  unsigned short port = 8080;
  std::string host = "127.0.0.1";
  std::string serve_out;
  auto* serve = app.add_subcommand("serve", "Serve live sessions over HTTP and WebSocket");
  serve->add_option("config", serve_config, "Experiment config (JSON); defaults if omitted");
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--out", serve_out, "Log directory (overrides PAINLOOP_LOG_DIR and output.log_dir)");

  std::string assets_out = "assets";
  double rate = 44100.0;
  auto* assets = app.add_subcommand("assets", "Write the synthesized pain-sound tracks as WAV files");
  assets->add_option("--out", assets_out, "Output directory");
  assets->add_option("--rate", rate, "Sample rate in Hz")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*simulate) return cmd_simulate(sim);
  if (*analyze) return cmd_analyze(an);
  if (*serve) return cmd_serve(serve_config, port, host, serve_out);
  if (*assets) return cmd_assets(assets_out, rate);
  return kExitUsage;
}
