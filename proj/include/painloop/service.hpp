#pragma once

// HTTP + WebSocket front end for live sessions. Each session runs the ordinary
// run_session loop on its own thread; a socket only feeds it messages and relays its
// events as JSON frames.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "json.hpp"
#include "painloop/analytics.hpp"
#include "painloop/config.hpp"
#include "painloop/session.hpp"

namespace painloop::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using json = nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Frames

inline std::string error_frame(const std::string& reason) {
  return json{{"type", "error"}, {"reason", reason}}.dump();
}

struct Inbound {
  enum class Kind { force_sample, feedback, ready, shutdown } kind = Kind::ready;
  double t_ms = 0.0;
  double newtons = 0.0;
  Feedback choice = Feedback::agree;
};

// Parses one client text frame. Throws Error(format) with a reason on bad input.
inline Inbound parse_client_frame(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    throw Error(Errc::format, "frame is not valid JSON");
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw Error(Errc::format, "frame needs a string \"type\" field");
  const std::string type = j["type"];
  Inbound in;
  if (type == "force_sample") {
    if (!j.contains("t_ms") || !j["t_ms"].is_number()) throw Error(Errc::format, "force_sample.t_ms must be a number");
    if (!j.contains("newtons") || !j["newtons"].is_number())
      throw Error(Errc::format, "force_sample.newtons must be a number");
    in.kind = Inbound::Kind::force_sample;
    in.t_ms = j["t_ms"].get<double>();
    in.newtons = j["newtons"].get<double>();
    if (!std::isfinite(in.t_ms) || in.t_ms < 0.0) throw Error(Errc::format, "force_sample.t_ms must be >= 0");
    if (!std::isfinite(in.newtons)) throw Error(Errc::format, "force_sample.newtons must be finite");
  } else if (type == "feedback") {
    if (!j.contains("choice") || !j["choice"].is_string()) throw Error(Errc::format, "feedback.choice must be a string");
    const std::string c = j["choice"];
    if (c == "agree") in.choice = Feedback::agree;
    else if (c == "disagree") in.choice = Feedback::disagree;
    else throw Error(Errc::format, "feedback.choice must be \"agree\" or \"disagree\"");
    in.kind = Inbound::Kind::feedback;
  } else if (type == "ready") {
    in.kind = Inbound::Kind::ready;
  } else {
    throw Error(Errc::format, "unknown frame type \"" + type + "\"");
  }
  return in;
}

inline ForceSample to_sample(const Inbound& in) {
  ForceSample s;
  s.t = in.t_ms / 1000.0;
  s.f = {in.newtons, 0.0, 0.0, 0.0};
  return s;
}

inline std::string bar_state(double fraction) { return fraction >= 1.0 ? "red" : "green"; }

// ---------------------------------------------------------------------------
// Live participant: a message queue the socket fills and the session drains.

class LiveParticipant : public TraceSource, public FeedbackSource {
 public:
  using Reply = std::function<void(const std::string&)>;

  explicit LiveParticipant(Reply reply) : reply_(std::move(reply)) {}

  void push(Inbound in) {
    {
      std::lock_guard lk(mu_);
      queue_.push_back(in);
    }
    cv_.notify_all();
  }

  void shutdown() { push(Inbound{Inbound::Kind::shutdown}); }

  void begin_trial(std::size_t, const TrialContext&, double palpation_window) override {
    for (;;) {
      auto in = pop(std::nullopt);
      if (in->kind == Inbound::Kind::ready) break;
      reject(*in, "Idle");
    }
    last_t_ms_.reset();
    palpation_deadline_ = SteadyClock::now() + to_duration(palpation_window);
    window_ms_ = palpation_window * 1000.0;
  }

  std::optional<ForceSample> next_sample() override {
    for (;;) {
      auto in = pop(palpation_deadline_);
      if (!in) return std::nullopt;
      if (in->kind != Inbound::Kind::force_sample) {
        reject(*in, "Palpating");
        continue;
      }
      if (!accept_time(*in)) continue;
      return to_sample(*in);
    }
  }

  Feedback await_feedback(const TrialContext&, const SoundEvent&, double feedback_window,
                          const std::function<void(const ForceSample&)>& on_sample) override {
    const auto deadline = SteadyClock::now() + to_duration(feedback_window);
    for (;;) {
      auto in = pop(deadline);
      if (!in) return Feedback::timeout;
      switch (in->kind) {
        case Inbound::Kind::feedback: return in->choice;
        case Inbound::Kind::force_sample:
          // Late samples still count toward the trial's peak while the window is open.
          if (in->t_ms > window_ms_) {
            reply_(error_frame("force_sample after the palpation window closed"));
            break;
          }
          if (accept_time(*in)) on_sample(to_sample(*in));
          break;
        default: reject(*in, "AwaitFeedback");
      }
    }
  }

 private:
  static SteadyClock::duration to_duration(double seconds) {
    return std::chrono::duration_cast<SteadyClock::duration>(std::chrono::duration<double>(seconds));
  }

  // nullopt on deadline. Throws on shutdown.
  std::optional<Inbound> pop(std::optional<SteadyClock::time_point> deadline) {
    std::unique_lock lk(mu_);
    auto ready = [&] { return !queue_.empty(); };
    if (deadline) {
      if (!cv_.wait_until(lk, *deadline, ready)) return std::nullopt;
    } else {
      cv_.wait(lk, ready);
    }
    Inbound in = queue_.front();
    queue_.pop_front();
    if (in.kind == Inbound::Kind::shutdown) {
      queue_.push_front(in);
      throw Error(Errc::session_aborted, "session shut down");
    }
    return in;
  }

  bool accept_time(const Inbound& in) {
    if (last_t_ms_ && in.t_ms < *last_t_ms_) {
      reply_(error_frame("force_sample.t_ms must not decrease within a trial"));
      return false;
    }
    last_t_ms_ = in.t_ms;
    return true;
  }

  void reject(const Inbound& in, const char* phase) {
    const char* what = in.kind == Inbound::Kind::force_sample ? "force_sample"
                       : in.kind == Inbound::Kind::feedback   ? "feedback"
                                                              : "ready";
    reply_(error_frame(std::string(what) + " is not accepted in phase " + phase));
  }

  Reply reply_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Inbound> queue_;
  std::optional<double> last_t_ms_;
  double window_ms_ = 5000.0;
  SteadyClock::time_point palpation_deadline_{};
};

// ---------------------------------------------------------------------------
// Live session

class LiveSession : public EventSink, public std::enable_shared_from_this<LiveSession> {
 public:
  using Sender = std::function<void(const std::string&)>;

  LiveSession(std::string id, ExperimentConfig cfg, std::filesystem::path log_path)
      : id_(std::move(id)),
        cfg_(std::move(cfg)),
        log_path_(std::move(log_path)),
        participant_([this](const std::string& f) { send(f); }) {
    header_ = make_header(to_json(cfg_), cfg_.session.seed);
    header_line_ = header_.dump();
  }

  ~LiveSession() override { stop(); }

  const std::string& id() const { return id_; }

  void start() {
    log_.open(log_path_, std::ios::binary);
    if (!log_) throw Error(Errc::config, "cannot open log file " + log_path_.string());
    writer_.emplace(log_, header_);
    worker_ = std::thread([this] { run(); });
  }

  void stop() {
    if (worker_.joinable()) {
      participant_.shutdown();
      worker_.join();
    }
  }

  // Claims the session for one socket. False if another socket holds it.
  bool attach(std::uint64_t conn_id, Sender sender) {
    std::lock_guard lk(mu_);
    if (conn_) return false;
    conn_ = conn_id;
    sender_ = std::move(sender);
    if (sender_ && !last_phase_.empty()) sender_(last_phase_);
    return true;
  }

  void detach(std::uint64_t conn_id) {
    std::lock_guard lk(mu_);
    if (conn_ == conn_id) {
      conn_.reset();
      sender_ = nullptr;
    }
  }

  bool has_socket() const {
    std::lock_guard lk(mu_);
    return conn_.has_value();
  }

  void deliver(const std::string& text) {
    try {
      participant_.push(parse_client_frame(text));
    } catch (const Error& e) {
      send(error_frame(e.what()));
    }
  }

  std::string log_snapshot() const {
    std::lock_guard lk(mu_);
    std::string out = header_line_ + "\n";
    for (const auto& l : lines_) out += l + "\n";
    return out;
  }

  json stats() const {
    std::lock_guard lk(mu_);
    return {{"session_id", id_},
            {"cumulative_mean_reward", cumulative_},
            {"trials_done", trials_done_},
            {"total_trials", cfg_.session.total_trials()},
            {"finished", finished_},
            {"aborted", aborted_}};
  }

  bool finished() const {
    std::lock_guard lk(mu_);
    return finished_;
  }

  // EventSink
  void on_phase(TrialPhase p, std::size_t trial_idx, double deadline_s) override {
    const auto frame = json{{"type", "phase"},
                            {"name", std::string(to_string(p))},
                            {"trial_idx", trial_idx},
                            {"deadline_ms", std::llround(deadline_s * 1000.0)}}
                           .dump();
    {
      std::lock_guard lk(mu_);
      last_phase_ = frame;
    }
    send(frame);
  }

  void on_progress(double newtons, double fraction) override {
    send(json{{"type", "progress"},
              {"newtons", newtons},
              {"fraction_of_target", fraction},
              {"bar_state", bar_state(fraction)}}
             .dump());
  }

  void on_sound(const SoundEvent& s) override {
    send(json{{"type", "play_sound"},
              {"track", s.track},
              {"amplitude_level", s.amplitude},
              {"pitch_level", s.pitch},
              {"amp_idx", s.action.amp_idx},
              {"pitch_idx", s.action.pitch_idx},
              {"pain_intensity", s.pain_intensity}}
             .dump());
  }

  void on_result(const TrialRecord& r) override {
    send(json{{"type", "trial_result"},
              {"trial_idx", r.trial_idx},
              {"reward", r.reward ? json(*r.reward) : json(nullptr)},
              {"feedback", std::string(to_string(r.feedback))}}
             .dump());
  }

  void on_stats(double cumulative, std::size_t trials_done) override {
    send(json{{"type", "stats"}, {"cumulative_mean_reward", cumulative}, {"trials_done", trials_done}}.dump());
  }

  void on_done(const SessionSummary& s) override {
    send(json{{"type", "session_done"}, {"summary", summary_to_json(s)}}.dump());
  }

 private:
  void send(const std::string& frame) {
    std::lock_guard lk(mu_);
    if (sender_) sender_(frame);
  }

  void run() {
    const AgentFactory factory = default_agent_factory(cfg_.ppo);
    try {
      run_session(
          cfg_.session, cfg_.space, cfg_.pain, factory, participant_, participant_,
          [this](const TrialRecord& r) {
            std::lock_guard lk(mu_);
            writer_->append(r);
            lines_.push_back(to_line(r));
            ++trials_done_;
            if (r.learned()) {
              reward_sum_ += *r.reward;
              ++learned_;
              cumulative_ = reward_sum_ / static_cast<double>(learned_);
            }
          },
          this);
      std::lock_guard lk(mu_);
      finished_ = true;
    } catch (const Error&) {
      std::lock_guard lk(mu_);
      aborted_ = true;
    }
  }

  std::string id_;
  ExperimentConfig cfg_;
  std::filesystem::path log_path_;
  LiveParticipant participant_;
  ordered_json header_;
  std::string header_line_;

  mutable std::mutex mu_;
  std::ofstream log_;
  std::optional<LogWriter> writer_;
  std::vector<std::string> lines_;
  std::size_t trials_done_ = 0;
  std::size_t learned_ = 0;
  double reward_sum_ = 0.0;
  double cumulative_ = 0.0;
  bool finished_ = false;
  bool aborted_ = false;
  std::optional<std::uint64_t> conn_;
  Sender sender_;
  std::string last_phase_;
  std::thread worker_;
};

// ---------------------------------------------------------------------------
// Session registry and request handling

// Validates a POST /sessions body against the session fields. Returns per-field
// problems; empty means the config was applied to `out`.
inline json apply_session_body(const json& body, SessionConfig& out, bool& seed_given) {
  json problems = json::object();
  if (!body.is_object()) {
    problems["body"] = "must be a JSON object";
    return problems;
  }
  static const std::set<std::string> known{"persona",         "trials_per_persona", "familiarization_trials",
                                           "palpation_window", "feedback_window",    "counterbalance_order",
                                           "single_persona",   "seed"};
  for (const auto& [k, v] : body.items())
    if (!known.count(k)) problems[k] = "unknown field";

  auto count = [&](const char* key, std::size_t& dst, std::size_t min) {
    if (!body.contains(key)) return;
    const auto& v = body[key];
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min))
      problems[key] = "must be an integer >= " + std::to_string(min);
    else
      dst = v.get<std::size_t>();
  };
  auto seconds = [&](const char* key, double& dst) {
    if (!body.contains(key)) return;
    const auto& v = body[key];
    if (!v.is_number() || !(v.get<double>() > 0.0)) problems[key] = "must be a number > 0";
    else dst = v.get<double>();
  };
  auto flag = [&](const char* key, bool& dst) {
    if (!body.contains(key)) return;
    if (!body[key].is_boolean()) problems[key] = "must be a boolean";
    else dst = body[key].get<bool>();
  };
  if (body.contains("persona")) {
    const auto& v = body["persona"];
    if (!v.is_string() || (v != "male" && v != "female")) problems["persona"] = "must be \"male\" or \"female\"";
    else out.persona = parse_persona(v.get<std::string>());
  }
  count("trials_per_persona", out.trials_per_persona, 1);
  count("familiarization_trials", out.familiarization_trials, 0);
  seconds("palpation_window", out.palpation_window);
  seconds("feedback_window", out.feedback_window);
  flag("counterbalance_order", out.counterbalance_order);
  flag("single_persona", out.single_persona);
  if (body.contains("seed")) {
    if (!body["seed"].is_number_unsigned()) problems["seed"] = "must be a non-negative integer";
    else {
      out.seed = body["seed"].get<std::uint64_t>();
      seed_given = true;
    }
  }
  return problems;
}

class Registry {
 public:
  Registry(ExperimentConfig base, std::filesystem::path log_dir)
      : base_(std::move(base)), log_dir_(std::move(log_dir)), ids_(std::random_device{}()) {
    std::filesystem::create_directories(log_dir_);
  }

  ~Registry() { stop_all(); }

  std::shared_ptr<LiveSession> create(const SessionConfig& sc, bool seed_given) {
    ExperimentConfig cfg = base_;
    cfg.session = sc;
    std::lock_guard lk(mu_);
    if (!seed_given) cfg.session.seed = ids_();
    std::string id;
    do {
      std::ostringstream os;
      os << std::hex << ids_();
      id = os.str();
    } while (sessions_.count(id));
    auto s = std::make_shared<LiveSession>(id, cfg, log_dir_ / ("session-" + id + ".jsonl"));
    s->start();
    sessions_[id] = s;
    return s;
  }

  std::shared_ptr<LiveSession> find(const std::string& id) const {
    std::lock_guard lk(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  void stop_all() {
    std::map<std::string, std::shared_ptr<LiveSession>> all;
    {
      std::lock_guard lk(mu_);
      all = sessions_;
    }
    for (auto& [id, s] : all) s->stop();
  }

  const SessionConfig& base_session() const { return base_.session; }

 private:
  ExperimentConfig base_;
  std::filesystem::path log_dir_;
  mutable std::mutex mu_;
  std::mt19937_64 ids_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
};

// Splits "/sessions/{id}[/suffix]".
struct Route {
  std::string id;
  std::string suffix;
};

inline std::optional<Route> session_route(std::string_view target) {
  if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  constexpr std::string_view prefix = "/sessions/";
  if (target.substr(0, prefix.size()) != prefix) return std::nullopt;
  target.remove_prefix(prefix.size());
  Route r;
  const auto slash = target.find('/');
  r.id = std::string(target.substr(0, slash));
  if (slash != std::string_view::npos) r.suffix = std::string(target.substr(slash + 1));
  if (r.id.empty()) return std::nullopt;
  return r;
}

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

inline Response make_response(const Request& req, http::status status, std::string body,
                              std::string content_type = "application/json") {
  Response res{status, req.version()};
  res.set(http::field::server, "painloop");
  res.set(http::field::content_type, content_type);
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(false);
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

inline Response handle_http(Registry& reg, const Request& req) {
  const std::string target(req.target());
  if (req.method() == http::verb::options) {
    auto res = make_response(req, http::status::no_content, "");
    res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    return res;
  }
  if (req.method() == http::verb::get && target == "/healthz")
    return make_response(req, http::status::ok, R"({"status":"ok"})");
  if (target == "/sessions" || target == "/sessions/") {
    if (req.method() != http::verb::post)
      return make_response(req, http::status::method_not_allowed, error_frame("use POST"));
    json body;
    try {
      body = req.body().empty() ? json::object() : json::parse(req.body());
    } catch (const json::exception&) {
      return make_response(req, http::status::bad_request,
                           json{{"error", "invalid body"}, {"fields", {{"body", "not valid JSON"}}}}.dump());
    }
    SessionConfig sc = reg.base_session();
    bool seed_given = false;
    const json problems = apply_session_body(body, sc, seed_given);
    if (!problems.empty())
      return make_response(req, http::status::bad_request, json{{"error", "invalid body"}, {"fields", problems}}.dump());
    auto s = reg.create(sc, seed_given);
    return make_response(req, http::status::created, json{{"session_id", s->id()}}.dump());
  }
  if (auto route = session_route(target); route && req.method() == http::verb::get) {
    auto s = reg.find(route->id);
    if (!s) return make_response(req, http::status::not_found, error_frame("unknown session " + route->id));
    if (route->suffix == "log") return make_response(req, http::status::ok, s->log_snapshot(), "application/x-ndjson");
    if (route->suffix == "stats") return make_response(req, http::status::ok, s->stats().dump());
  }
  return make_response(req, http::status::not_found, error_frame("no route for " + target));
}

// ---------------------------------------------------------------------------
// Connections. All socket I/O runs on the server's io thread; session threads hand
// frames over with net::post.

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket&& socket, std::shared_ptr<LiveSession> session, std::uint64_t id)
      : ws_(std::move(socket)), session_(std::move(session)), id_(id) {}

  void run(Request req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) {
      session_->detach(id_);
      return;
    }
    // The session was claimed during the upgrade; now wire up the sender.
    session_->detach(id_);
    std::weak_ptr<WsConnection> weak = shared_from_this();
    if (!session_->attach(id_, [weak](const std::string& frame) {
          if (auto self = weak.lock()) self->send(frame);
        })) {
      ws_.async_close(websocket::close_code::try_again_later, [self = shared_from_this()](beast::error_code) {});
      return;
    }
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      closed_ = true;
      session_->detach(id_);
      return;
    }
    if (!ws_.got_text()) {
      send_now(error_frame("binary frames are not supported"));
    } else {
      session_->deliver(beast::buffers_to_string(buffer_.data()));
    }
    buffer_.consume(buffer_.size());
    do_read();
  }

  void send(const std::string& frame) {
    net::post(ws_.get_executor(), [self = shared_from_this(), frame] { self->send_now(frame); });
  }

  void send_now(std::string frame) {
    if (closed_) return;
    queue_.push_back(std::move(frame));
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->queue_.clear();
        self->session_->detach(self->id_);
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->do_write();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<LiveSession> session_;
  std::uint64_t id_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool closed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, Registry& reg, std::atomic<std::uint64_t>& conn_ids)
      : stream_(std::move(socket)), reg_(reg), conn_ids_(conn_ids) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

 private:
  void on_read(beast::error_code ec) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      auto route = session_route(std::string(req_.target()));
      auto session = route && route->suffix.empty() ? reg_.find(route->id) : nullptr;
      if (!session) return reply(make_response(req_, http::status::not_found, error_frame("unknown session")));
      const auto id = ++conn_ids_;
      // Reserve before the handshake so a second socket is refused outright.
      if (!session->attach(id, nullptr))
        return reply(make_response(req_, http::status::conflict, error_frame("session already has an active socket")));
      stream_.expires_never();
      std::make_shared<WsConnection>(stream_.release_socket(), session, id)->run(std::move(req_));
      return;
    }
    Response res;
    try {
      res = handle_http(reg_, req_);
    } catch (const std::exception& e) {
      res = make_response(req_, http::status::internal_server_error, error_frame(e.what()));
    }
    reply(std::move(res));
  }

  void reply(Response res) {
    auto sp = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code, std::size_t) {
      beast::error_code ec;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  Request req_;
  Registry& reg_;
  std::atomic<std::uint64_t>& conn_ids_;
};

// Owns the listener, the io thread and every session. stop() aborts running sessions;
// their logs keep every completed trial.
class Server {
 public:
  Server(ExperimentConfig base, std::filesystem::path log_dir, std::string address = "127.0.0.1",
         unsigned short port = 0)
      : registry_(std::move(base), std::move(log_dir)), acceptor_(ioc_) {
    const tcp::endpoint ep(net::ip::make_address(address), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);  // throws if the port is taken
    acceptor_.listen(net::socket_base::max_listen_connections);
  }

  ~Server() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() {
    do_accept();
    io_thread_ = std::thread([this] { ioc_.run(); });
  }

  void stop() {
    if (stopped_.exchange(true)) return;
    registry_.stop_all();
    net::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
    });
    ioc_.stop();
    if (io_thread_.joinable()) io_thread_.join();
  }

  Registry& registry() { return registry_; }

 private:
  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpConnection>(std::move(socket), registry_, conn_ids_)->run();
      do_accept();
    });
  }

  Registry registry_;
  net::io_context ioc_{1};
  tcp::acceptor acceptor_;
  std::thread io_thread_;
  std::atomic<bool> stopped_{false};
  std::atomic<std::uint64_t> conn_ids_{0};
};

}  // namespace painloop::service
