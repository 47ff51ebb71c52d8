// Synthetic SOC users: Markov task graphs over dashboard actions and a
// position-biased click model. Also generates interaction-log datasets.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aui/domain.hpp"
#include "aui/prioritizer.hpp"
#include "aui/random.hpp"
#include "aui/strategy.hpp"

namespace aui::sim {

inline const std::vector<double> kDefaultPositionBias = {1.0, 0.75, 0.55, 0.4, 0.3, 0.2};

inline constexpr std::int64_t kMinDwellMs = 500;
inline constexpr std::int64_t kMaxDwellMs = 30'000;

// Navigation-time model. A direct click on slot k costs
// kClickBaseMs + k * kClickPerSlotMs; a missed card is found by searching,
// which costs kSearchMs. A session succeeds when its navigation time stays
// within kBudgetPerActionMs per action.
inline constexpr double kClickBaseMs = 600.0;
inline constexpr double kClickPerSlotMs = 200.0;
inline constexpr double kSearchMs = 3'500.0;
inline constexpr double kBudgetPerActionMs = 2'000.0;

struct DwellParams {
    double mu = 9.0;  // log-milliseconds
    double sigma = 0.35;
    bool operator==(const DwellParams&) const = default;
};

struct UserArchetype {
    std::string archetype_id;
    std::string role;
    std::vector<std::string> actions;              // chain states
    std::vector<double> start;                     // over actions
    std::vector<std::vector<double>> transition;   // row-stochastic
    std::map<std::string, double> card_affinity;   // card_id -> [0, 1]
    std::vector<double> position_bias;             // slot -> multiplier, non-increasing
    std::map<std::string, DwellParams> dwell;      // per action
    int subgroup = 0;

    /// Throws std::invalid_argument on a broken invariant.
    void validate(const CardRegistry& registry = default_registry()) const;
    bool operator==(const UserArchetype&) const = default;
};

/// Analyst, responder and manager archetypes with distinct SOC workflows.
/// Transition peaks are jittered by `seed`.
std::vector<UserArchetype> gen_archetypes(std::uint64_t seed);

struct SimUser {
    std::string raw_id;  // e.g. "U115"; never written to any output
    std::size_t archetype = 0;
};

/// Users U100, U101, ... assigned to archetypes in the 40/40/20 split.
std::vector<SimUser> make_users(std::size_t n);

struct SimConfig {
    std::size_t n_users = 100;
    std::size_t sessions_per_user = 20;
    std::size_t min_actions = 5;
    std::size_t max_actions = 15;
    std::uint64_t seed = 1;
    std::string salt = "aui-simulation-salt";
    std::chrono::year_month_day start_date{std::chrono::year{2025}, std::chrono::month{10}, std::chrono::day{1}};

    void validate() const;
};

/// Action sequence drawn from the archetype's task graph. Independent of the
/// layouts served, so strategies can be compared on identical task streams.
std::vector<std::string> draw_task(const UserArchetype& user, std::size_t min_actions, std::size_t max_actions,
                                   Rng& rng);

/// Probability of a direct click on the intended card at `slot`.
double click_probability(const UserArchetype& user, const std::string& card_id, std::size_t slot);

/// What happened when one layout was served for one intended action.
struct Interaction {
    std::string intended_action;
    std::string intended_card;
    std::size_t slot = 0;        // position of the intended card
    bool clicked = false;        // direct click from the layout
    std::int64_t dwell_ms = 0;
    double navigation_ms = 0.0;  // time until the card was reached
};

/// Steps one session: holds the drawn task, the history and elapsed time.
class SessionRunner {
public:
    SessionRunner(const UserArchetype& user, std::vector<std::string> task,
                  const std::map<std::string, std::string>& action_cards = default_action_cards());

    bool done() const { return next_ >= task_.size(); }
    const std::string& intended() const { return task_.at(next_); }
    std::span<const std::string> history() const { return {task_.data(), next_}; }
    double duration_minutes() const { return elapsed_ms_ / 60'000.0; }
    double navigation_ms() const { return navigation_ms_; }
    std::size_t length() const { return task_.size(); }
    const std::string& current_top_card() const { return top_card_; }
    const UserArchetype& user() const { return *user_; }

    ServeContext context() const;
    Interaction interact(const LayoutConfig& layout, Rng& behavior);
    /// Navigation time within the budget for the whole task.
    bool succeeded() const;

private:
    const UserArchetype* user_;
    std::vector<std::string> task_;
    const std::map<std::string, std::string>* action_cards_;
    std::size_t next_ = 0;
    double elapsed_ms_ = 0.0;
    double navigation_ms_ = 0.0;
    std::string top_card_;
};

struct SessionStats {
    std::size_t servings = 0;
    std::size_t top3_clicks = 0;
    std::size_t clicks = 0;
    std::size_t top_hits = 0;  // intended card served at slot 0
    double tti_ms_sum = 0.0;
    double dwell_clicked_sum = 0.0;
    double latency_ms_sum = 0.0;  // wall clock spent in Strategy::serve
    double duration_min = 0.0;
};

struct SessionResult {
    std::vector<InteractionEvent> events;
    std::vector<rl::Transition> transitions;
    bool task_success = false;
    SessionStats stats;
};

/// Identifies one simulated session; drives the per-session RNG streams.
struct SessionKey {
    std::size_t user_index = 0;
    std::size_t session_index = 0;
};

/// Seeds for the task stream and the behavior stream of a session.
std::uint64_t task_seed(std::uint64_t seed, const SessionKey& key);
std::uint64_t behavior_seed(std::uint64_t seed, const SessionKey& key);

SessionResult simulate_session(const UserArchetype& archetype, const SimUser& user, const SessionKey& key,
                               const Strategy& strategy, const SimConfig& config,
                               const rl::StateEncoder& encoder = rl::default_state_encoder());

/// Action sequences for `sessions` sessions per user, for predictor training.
std::vector<std::vector<std::string>> sample_task_sequences(const std::vector<UserArchetype>& archetypes,
                                                            const std::vector<SimUser>& users,
                                                            std::size_t sessions, const SimConfig& config);

struct DatasetConfig {
    SimConfig sim;
    std::size_t target_events = 0;  // 0 = every simulated event
};

/// Sessions are visited session-major (every user's first session, then the
/// second...). Strategies are assigned round-robin per session, and output stops
/// exactly at target_events when set.
std::vector<InteractionEvent> generate_dataset(const DatasetConfig& config, const std::vector<const Strategy*>& mix);
/// Writes the CSV; throws std::runtime_error naming the path when it cannot.
void write_dataset(const std::filesystem::path& path, const std::vector<InteractionEvent>& events);

}  // namespace aui::sim
