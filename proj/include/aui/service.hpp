// HTTP service: events in, layouts and rankings out, rewards journaled for
// offline training. Handlers are plain functions over JSON so they can be
// exercised without a socket; HttpServer binds them to cpp-httplib.

#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "aui/domain.hpp"
#include "aui/predictor.hpp"
#include "aui/prioritizer.hpp"
#include "aui/rules.hpp"
#include "aui/strategy.hpp"

namespace aui::service {

using Json = nlohmann::json;

enum class Mode { static_default, rules, lstm, dqn, combined };

std::string_view to_string(Mode m);
/// Accepts default, rules, lstm, dqn, combined.
Mode parse_mode(std::string_view text);

inline constexpr std::size_t kHistoryCap = 16;
inline constexpr std::size_t kMaxBatch = 1'000;
inline constexpr std::int64_t kDefaultPollMs = 2'000;
inline constexpr std::string_view kRoleHeader = "X-User-Role";

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    Mode mode = Mode::combined;
    std::string salt;
    std::int64_t poll_ms = kDefaultPollMs;
    std::size_t max_sessions = 10'000;
    std::optional<std::filesystem::path> journal;  // reward transitions, JSON lines
};

struct SessionState {
    std::string role = "analyst";
    std::deque<std::string> recent;  // oldest first, at most kHistoryCap
    std::optional<std::chrono::steady_clock::time_point> first_event, last_event;
    bool opt_out = false;
    std::optional<LayoutConfig> last_layout;
    std::optional<rl::RLState> served_state;  // state when the last layout was served
    std::size_t served_action = 0;            // registry index of its top card

    double duration_minutes() const;
};

/// Sessions keyed by hashed token, LRU-evicted beyond `capacity`. All access
/// goes through one mutex.
class SessionStore {
public:
    explicit SessionStore(std::size_t capacity = 10'000);

    /// Runs `fn(SessionState&)` under the lock, creating the session with
    /// `role` when absent. Touches the LRU position.
    template <typename F>
    auto with_session(const SessionToken& token, std::string_view role, F&& fn) {
        std::lock_guard lock(mu_);
        return fn(touch(token, role));
    }

    /// Runs `fn(SessionState&)` only when the session exists.
    template <typename F>
    bool with_existing(const SessionToken& token, F&& fn) {
        std::lock_guard lock(mu_);
        auto it = index_.find(token.value);
        if (it == index_.end()) return false;
        entries_.splice(entries_.begin(), entries_, it->second);
        fn(it->second->second);
        return true;
    }

    bool contains(const SessionToken& token) const;
    std::size_t size() const;
    std::size_t capacity() const { return capacity_; }

private:
    SessionState& touch(const SessionToken& token, std::string_view role);

    mutable std::mutex mu_;
    std::size_t capacity_;
    std::list<std::pair<std::string, SessionState>> entries_;  // most recent first
    std::unordered_map<std::string, std::list<std::pair<std::string, SessionState>>::iterator> index_;
};

struct Models {
    std::shared_ptr<const predictor::PredictorModel> lstm;
    std::shared_ptr<const rl::QNetwork> dqn;
};

struct Response {
    int status = 200;
    Json body;
};

/// Append-only JSON-lines writer with a single internal lock.
class RewardJournal {
public:
    explicit RewardJournal(const std::filesystem::path& path);
    void append(const rl::Transition& t);
    std::size_t lines_written() const;

private:
    mutable std::mutex mu_;
    std::ofstream out_;
    std::size_t lines_ = 0;
};

Json transition_to_json(const rl::Transition& t);
rl::Transition transition_from_json(const Json& j);
/// Reads a reward journal; throws naming the first malformed line.
std::vector<rl::Transition> read_journal(const std::filesystem::path& path);

class Service {
public:
    Service(ServiceConfig config, Models models = {});

    Response post_events(const std::string& body, std::string_view role_header = {});
    Response get_layout(std::string_view session_id, std::string_view role_header = {});
    Response get_ranking(std::string_view session_id, std::string_view role_header = {});
    Response post_reward(const std::string& body);
    Response post_optout(const std::string& body);
    Response health() const;

    /// Publishes a new model snapshot; in-flight requests keep the old one.
    void swap_models(Models models);

    /// Median of recorded layout latencies in milliseconds (0 when none).
    double median_latency_ms() const;
    std::size_t forwarded_rewards() const;
    const ServiceConfig& config() const { return config_; }

private:
    struct Snapshot {
        Models models;
        std::shared_ptr<const Strategy> strategy;
        std::string warning;  // set when the mode fell back to the default layout
    };

    std::shared_ptr<const Snapshot> snapshot() const;
    std::shared_ptr<const Snapshot> build_snapshot(Models models) const;
    std::optional<std::string> resolve_role(std::string_view header) const;
    void record_latency(double ms);

    ServiceConfig config_;
    CardRegistry registry_;
    ActionVocab vocab_;
    rl::StateEncoder encoder_;
    SessionStore store_;
    std::unique_ptr<RewardJournal> journal_;

    mutable std::mutex snapshot_mu_;
    std::shared_ptr<const Snapshot> snapshot_;

    mutable std::mutex stats_mu_;
    std::deque<double> latencies_;
    std::size_t forwarded_ = 0;
    std::size_t rewards_accepted_ = 0;
};

Json layout_to_json(const LayoutConfig& layout);

/// Runs the service over HTTP on a background thread.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds host:port (port 0 picks a free port) and starts serving.
    /// Returns the bound port; throws when binding fails.
    int start(const std::string& host, int port);
    /// Blocks in the calling thread until stop() is called.
    void listen_blocking(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

}  // namespace aui::service
