#include "aui/service.hpp"

#include <algorithm>
#include <stdexcept>

#include "httplib.h"

namespace aui::service {

namespace {

constexpr std::size_t kLatencyWindow = 10'000;

Response error(int status, std::string message, std::optional<std::size_t> index = std::nullopt) {
    Json body{{"error", std::move(message)}};
    if (index) body["index"] = *index;
    return {status, std::move(body)};
}

std::optional<Json> parse_json(const std::string& body) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

// Optional boolean field, false when absent; sets `problem` on a type mismatch.
bool read_bool(const Json& obj, const char* key, std::string& problem) {
    auto it = obj.find(key);
    if (it == obj.end()) return false;
    if (!it->is_boolean()) {
        problem = std::string("\"") + key + "\" must be a boolean";
        return false;
    }
    return it->get<bool>();
}

std::optional<std::int64_t> read_dwell(const Json& obj, std::string& problem) {
    auto it = obj.find("dwell_ms");
    if (it == obj.end()) return std::int64_t{0};
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
        problem = "\"dwell_ms\" must be a non-negative integer";
        return std::nullopt;
    }
    return it->get<std::int64_t>();
}

std::optional<std::string> read_session(const Json& obj, std::string& problem) {
    auto it = obj.find("session_id");
    if (it == obj.end() || !it->is_string() || it->get<std::string>().empty()) {
        problem = "\"session_id\" must be a non-empty string";
        return std::nullopt;
    }
    return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::static_default: return "default";
        case Mode::rules: return "rules";
        case Mode::lstm: return "lstm";
        case Mode::dqn: return "dqn";
        case Mode::combined: return "combined";
    }
    return "default";
}

Mode parse_mode(std::string_view text) {
    for (Mode m : {Mode::static_default, Mode::rules, Mode::lstm, Mode::dqn, Mode::combined})
        if (to_string(m) == text) return m;
    throw std::invalid_argument("unknown mode \"" + std::string(text) + "\" (expected default, rules, lstm, dqn or combined)");
}

double SessionState::duration_minutes() const {
    if (!first_event || !last_event) return 0.0;
    return std::chrono::duration<double, std::ratio<60>>(*last_event - *first_event).count();
}

// ---------------------------------------------------------------------------
// SessionStore

SessionStore::SessionStore(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("session store capacity must be positive");
}

SessionState& SessionStore::touch(const SessionToken& token, std::string_view role) {
    if (auto it = index_.find(token.value); it != index_.end()) {
        entries_.splice(entries_.begin(), entries_, it->second);
        return it->second->second;
    }
    SessionState fresh;
    fresh.role = std::string(role);
    entries_.emplace_front(token.value, std::move(fresh));
    index_[token.value] = entries_.begin();
    if (entries_.size() > capacity_) {
        index_.erase(entries_.back().first);
        entries_.pop_back();
    }
    return entries_.front().second;
}

bool SessionStore::contains(const SessionToken& token) const {
    std::lock_guard lock(mu_);
    return index_.contains(token.value);
}

std::size_t SessionStore::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// Journal

Json transition_to_json(const rl::Transition& t) {
    return Json{{"s", t.s.features}, {"a", t.a.promote_index}, {"r", t.r}, {"s_next", t.s_next.features}, {"done", t.done}};
}

rl::Transition transition_from_json(const Json& j) {
    rl::Transition t;
    t.s.features = j.at("s").get<std::vector<double>>();
    t.a.promote_index = j.at("a").get<std::size_t>();
    t.r = j.at("r").get<double>();
    t.s_next.features = j.at("s_next").get<std::vector<double>>();
    t.done = j.at("done").get<bool>();
    return t;
}

RewardJournal::RewardJournal(const std::filesystem::path& path) : out_(path, std::ios::app) {
    if (!out_) throw std::runtime_error("cannot open reward journal " + path.string());
}

void RewardJournal::append(const rl::Transition& t) {
    const std::string line = transition_to_json(t).dump();
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("failed writing reward journal");
    ++lines_;
}

std::size_t RewardJournal::lines_written() const {
    std::lock_guard lock(mu_);
    return lines_;
}

std::vector<rl::Transition> read_journal(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read journal " + path.string());
    std::vector<rl::Transition> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(transition_from_json(Json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error("journal line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Service

Json layout_to_json(const LayoutConfig& layout) {
    Json emphasis = Json::object(), visible = Json::object();
    for (const auto& card : layout.order) {
        auto e = layout.emphasis.find(card);
        emphasis[card] = std::string(to_string(e == layout.emphasis.end() ? Emphasis::normal : e->second));
        auto v = layout.visible.find(card);
        visible[card] = v == layout.visible.end() || v->second;
    }
    return Json{{"layout_id", layout.layout_id}, {"order", layout.order}, {"emphasis", emphasis},
                {"visible", visible},            {"columns", layout.columns}, {"adapted", layout.adapted}};
}

Service::Service(ServiceConfig config, Models models)
    : config_(std::move(config)),
      registry_(default_registry()),
      vocab_(default_soc_vocab()),
      encoder_(rl::default_state_encoder()),
      store_(config_.max_sessions) {
    if (config_.salt.size() < kMinSaltBytes || config_.salt.size() > kMaxSaltBytes)
        throw std::invalid_argument("salt must be " + std::to_string(kMinSaltBytes) + ".." +
                                    std::to_string(kMaxSaltBytes) + " bytes");
    if (config_.poll_ms <= 0) throw std::invalid_argument("poll_ms must be positive");
    if (config_.journal) journal_ = std::make_unique<RewardJournal>(*config_.journal);
    snapshot_ = build_snapshot(std::move(models));
}

std::shared_ptr<const Service::Snapshot> Service::build_snapshot(Models models) const {
    auto snap = std::make_shared<Snapshot>();
    snap->models = models;
    auto fallback = [&](const std::string& why) {
        snap->strategy = std::make_shared<DefaultStrategy>(registry_);
        snap->warning = why + "; serving the default layout";
    };
    try {
        switch (config_.mode) {
            case Mode::static_default:
                snap->strategy = std::make_shared<DefaultStrategy>(registry_);
                break;
            case Mode::rules:
                snap->strategy = std::make_shared<RulesStrategy>(rules::default_soc_ruleset(), registry_);
                break;
            case Mode::lstm:
                if (!models.lstm) fallback("predictor model unavailable");
                else snap->strategy = std::make_shared<LstmStrategy>(models.lstm);
                break;
            case Mode::dqn:
                if (!models.dqn) fallback("policy unavailable");
                else snap->strategy = std::make_shared<DqnStrategy>(models.dqn, encoder_);
                break;
            case Mode::combined:
                if (!models.lstm || !models.dqn) fallback("combined mode needs both the predictor and the policy");
                else snap->strategy = std::make_shared<CombinedStrategy>(models.lstm, models.dqn);
                break;
        }
    } catch (const std::exception& e) {
        fallback(std::string("model rejected: ") + e.what());
    }
    return snap;
}

std::shared_ptr<const Service::Snapshot> Service::snapshot() const {
    std::lock_guard lock(snapshot_mu_);
    return snapshot_;
}

void Service::swap_models(Models models) {
    auto next = build_snapshot(std::move(models));
    std::lock_guard lock(snapshot_mu_);
    snapshot_ = std::move(next);
}

std::optional<std::string> Service::resolve_role(std::string_view header) const {
    if (header.empty()) return std::string("analyst");
    const auto& roles = encoder_.roles();
    if (std::find(roles.begin(), roles.end(), header) == roles.end()) return std::nullopt;
    return std::string(header);
}

void Service::record_latency(double ms) {
    std::lock_guard lock(stats_mu_);
    latencies_.push_back(ms);
    if (latencies_.size() > kLatencyWindow) latencies_.pop_front();
}

double Service::median_latency_ms() const {
    std::vector<double> v;
    {
        std::lock_guard lock(stats_mu_);
        v.assign(latencies_.begin(), latencies_.end());
    }
    if (v.empty()) return 0.0;
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

std::size_t Service::forwarded_rewards() const {
    std::lock_guard lock(stats_mu_);
    return forwarded_;
}

Response Service::post_events(const std::string& body, std::string_view role_header) {
    auto role = resolve_role(role_header);
    if (!role) return error(400, "unknown role \"" + std::string(role_header) + "\"");
    auto parsed = parse_json(body);
    if (!parsed || !parsed->is_array()) return error(400, "body must be a JSON array of events");
    const Json& events = *parsed;
    if (events.size() > kMaxBatch)
        return error(413, "batch of " + std::to_string(events.size()) + " events exceeds the limit of " +
                              std::to_string(kMaxBatch));

    struct Parsed {
        SessionToken token;
        std::string target;
        rl::Outcome outcome;
    };
    std::vector<Parsed> batch;
    batch.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Json& e = events[i];
        auto bad = [&](const std::string& what) { return error(400, "event " + std::to_string(i) + ": " + what, i); };
        if (!e.is_object()) return bad("not an object");
        std::string problem;
        auto session = read_session(e, problem);
        if (!session) return bad(problem);
        auto target = e.find("target");
        if (target == e.end() || !target->is_string()) return bad("\"target\" must be an action name");
        const std::string name = target->get<std::string>();
        auto id = vocab_.find(name);
        if (!id || !vocab_.is_action(*id)) return bad("unknown action \"" + name + "\"");
        auto dwell = read_dwell(e, problem);
        if (!dwell) return bad(problem);
        const bool clicked = read_bool(e, "clicked", problem);
        const bool skipped = read_bool(e, "skipped", problem);
        if (!problem.empty()) return bad(problem);
        if (auto card = e.find("card_id"); card != e.end()) {
            if (!card->is_string() || !registry_.contains(card->get<std::string>()))
                return bad("unknown card " + card->dump());
        }
        batch.push_back({hash_session_id(*session, config_.salt), name, {clicked, *dwell, skipped}});
    }

    const bool policy_live = snapshot()->models.dqn != nullptr;
    const auto now = std::chrono::steady_clock::now();
    std::size_t accepted = 0, rejected = 0, forwarded = 0;
    for (auto& ev : batch) {
        bool ok = store_.with_session(ev.token, *role, [&](SessionState& s) {
            if (s.opt_out) return false;
            s.recent.push_back(ev.target);
            if (s.recent.size() > kHistoryCap) s.recent.pop_front();
            if (!s.first_event) s.first_event = now;
            s.last_event = now;
            return true;
        });
        if (!ok) {
            ++rejected;
            continue;
        }
        ++accepted;
        if (policy_live) ++forwarded;
    }
    if (forwarded) {
        std::lock_guard lock(stats_mu_);
        forwarded_ += forwarded;
    }
    return {200, Json{{"accepted", accepted}, {"rejected", rejected}}};
}

Response Service::get_layout(std::string_view session_id, std::string_view role_header) {
    const auto t0 = std::chrono::steady_clock::now();
    if (session_id.empty()) return error(400, "missing session parameter");
    auto role = resolve_role(role_header);
    if (!role) return error(400, "unknown role \"" + std::string(role_header) + "\"");
    const SessionToken token = hash_session_id(session_id, config_.salt);
    auto snap = snapshot();

    SessionState state = store_.with_session(token, *role, [](SessionState& s) { return s; });
    std::vector<std::string> history(state.recent.begin(), state.recent.end());
    ServeContext ctx;
    ctx.role = state.role;
    ctx.history = history;
    ctx.duration_minutes = state.duration_minutes();
    ctx.current_top_card = state.last_layout ? state.last_layout->order.front() : std::string();

    LayoutConfig layout;
    std::string warning = snap->warning;
    if (state.opt_out) {
        layout = default_layout(registry_);
    } else {
        try {
            layout = snap->strategy->serve(ctx);
            validate_layout(layout, registry_);
        } catch (const std::exception& e) {
            layout = default_layout(registry_);
            warning = std::string("strategy failed: ") + e.what() + "; serving the default layout";
        }
    }
    rl::RLState served = encoder_.encode({ctx.role, history, ctx.duration_minutes, ctx.current_top_card});
    const std::size_t action = registry_.index_of(layout.order.front()).value();
    store_.with_session(token, *role, [&](SessionState& s) {
        s.last_layout = layout;
        s.served_state = served;
        s.served_action = action;
        return 0;
    });

    const double latency = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    record_latency(latency);
    Json body = layout_to_json(layout);
    body["session"] = token.value;
    body["poll_ms"] = config_.poll_ms;
    body["latency_ms"] = latency;
    if (!warning.empty()) body["warning"] = warning;
    return {200, std::move(body)};
}

Response Service::get_ranking(std::string_view session_id, std::string_view role_header) {
    if (session_id.empty()) return error(400, "missing session parameter");
    auto role = resolve_role(role_header);
    if (!role) return error(400, "unknown role \"" + std::string(role_header) + "\"");
    auto snap = snapshot();
    if (!snap->models.dqn) return error(503, "no policy loaded");
    if (snap->models.dqn->state_dim() != encoder_.dim()) return error(503, "loaded policy does not match the state encoder");
    const SessionToken token = hash_session_id(session_id, config_.salt);
    SessionState state = store_.with_session(token, *role, [](SessionState& s) { return s; });
    std::vector<std::string> history(state.recent.begin(), state.recent.end());
    auto s = encoder_.encode({state.role, history, state.duration_minutes(),
                              state.last_layout ? state.last_layout->order.front() : std::string()});
    auto ranking = rl::rank_content(*snap->models.dqn, s, registry_);
    return {200, Json{{"session", token.value}, {"order", ranking.order}, {"weights", ranking.weights}, {"q", ranking.q}}};
}

Response Service::post_reward(const std::string& body) {
    auto parsed = parse_json(body);
    if (!parsed || !parsed->is_object()) return error(400, "body must be a JSON object");
    std::string problem;
    auto session = read_session(*parsed, problem);
    if (!session) return error(400, problem);
    auto dwell = read_dwell(*parsed, problem);
    if (!dwell) return error(400, problem);
    const bool clicked = read_bool(*parsed, "clicked", problem);
    const bool skipped = read_bool(*parsed, "skipped", problem);
    if (!problem.empty()) return error(400, problem);

    const SessionToken token = hash_session_id(*session, config_.salt);
    const double reward = rl::compute_reward({clicked, *dwell, skipped});
    std::optional<rl::Transition> transition;
    bool opted_out = false;
    bool found = store_.with_existing(token, [&](SessionState& s) {
        if (s.opt_out) {
            opted_out = true;
            return;
        }
        if (!s.served_state) return;
        std::vector<std::string> history(s.recent.begin(), s.recent.end());
        rl::RLState next = encoder_.encode({s.role, history, s.duration_minutes(),
                                            s.last_layout ? s.last_layout->order.front() : std::string()});
        transition = rl::Transition{*s.served_state, {s.served_action}, reward, std::move(next), false};
    });
    if (!found) return error(404, "unknown session");
    if (opted_out) return error(403, "session has opted out of tracking");
    if (!transition) return error(409, "no layout has been served to this session yet");
    if (journal_) journal_->append(*transition);
    {
        std::lock_guard lock(stats_mu_);
        ++rewards_accepted_;
    }
    return {200, Json{{"accepted", true}, {"reward", reward}, {"journaled", journal_ != nullptr}}};
}

Response Service::post_optout(const std::string& body) {
    auto parsed = parse_json(body);
    if (!parsed || !parsed->is_object()) return error(400, "body must be a JSON object");
    std::string problem;
    auto session = read_session(*parsed, problem);
    if (!session) return error(400, problem);
    auto flag = parsed->find("opt_out");
    if (flag == parsed->end() || !flag->is_boolean()) return error(400, "\"opt_out\" must be a boolean");
    const bool opt_out = flag->get<bool>();
    const SessionToken token = hash_session_id(*session, config_.salt);
    store_.with_session(token, "analyst", [&](SessionState& s) {
        s.opt_out = opt_out;
        if (opt_out) {
            s.recent.clear();
            s.served_state.reset();
        }
        return 0;
    });
    return {200, Json{{"session", token.value}, {"opt_out", opt_out}}};
}

Response Service::health() const {
    auto snap = snapshot();
    Json body{{"status", "ok"},
              {"mode", std::string(to_string(config_.mode))},
              {"models", {{"lstm", snap->models.lstm != nullptr}, {"dqn", snap->models.dqn != nullptr}}},
              {"sessions", store_.size()},
              {"poll_ms", config_.poll_ms},
              {"median_latency_ms", median_latency_ms()},
              {"journal_lines", journal_ ? journal_->lines_written() : 0}};
    {
        std::lock_guard lock(stats_mu_);
        body["forwarded_rewards"] = forwarded_;
        body["rewards_accepted"] = rewards_accepted_;
    }
    if (!snap->warning.empty()) body["warning"] = snap->warning;
    return {200, std::move(body)};
}

// ---------------------------------------------------------------------------
// HTTP binding

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>()) {
    auto& svr = impl_->server;
    auto send = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    auto role = [](const httplib::Request& req) { return req.get_header_value(std::string(kRoleHeader)); };
    svr.Post("/api/events", [&service, send, role](const httplib::Request& req, httplib::Response& res) {
        send(res, service.post_events(req.body, role(req)));
    });
    svr.Get("/api/layout", [&service, send, role](const httplib::Request& req, httplib::Response& res) {
        send(res, service.get_layout(req.get_param_value("session"), role(req)));
    });
    svr.Get("/api/ranking", [&service, send, role](const httplib::Request& req, httplib::Response& res) {
        send(res, service.get_ranking(req.get_param_value("session"), role(req)));
    });
    svr.Post("/api/reward", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.post_reward(req.body));
    });
    svr.Post("/api/optout", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.post_optout(req.body));
    });
    svr.Get("/health", [&service, send](const httplib::Request&, httplib::Response& res) { send(res, service.health()); });
    svr.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send(res, error(500, what));
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    auto& svr = impl_->server;
    int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    svr.wait_until_ready();
    return bound;
}

void HttpServer::listen_blocking(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace aui::service
