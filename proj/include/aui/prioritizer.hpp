// Content prioritization agent: a DQN with experience replay and a target
// network. An action promotes one card to the top slot; a full ranking is
// recovered by sorting the per-card Q-values.

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aui/domain.hpp"
#include "aui/nn/adam.hpp"
#include "aui/nn/mlp.hpp"

namespace aui::rl {

using nn::Vector;

struct RLState {
    Vector features;
    bool operator==(const RLState&) const = default;
};

struct RLAction {
    std::size_t promote_index = 0;
    bool operator==(const RLAction&) const = default;
};

struct Transition {
    RLState s;
    RLAction a;
    double r = 0.0;
    RLState s_next;
    bool done = false;
};

// ---------------------------------------------------------------------------
// State encoding

inline const std::vector<std::string> kDefaultRoles = {"analyst", "responder", "manager"};
inline constexpr std::size_t kRecentActions = 4;
inline constexpr double kDurationScaleMinutes = 30.0;

struct SessionContext {
    std::string role;
    std::vector<std::string> recent_actions;  // oldest first; only the last K are used
    double duration_minutes = 0.0;
    std::string current_top_card;  // empty when nothing has been served yet
};

/// Layout of the state vector:
///   [role one-hot | K action one-hots, most recent first | duration | top-card one-hot]
class StateEncoder {
public:
    StateEncoder(std::vector<std::string> roles, ActionVocab vocab, CardRegistry registry,
                 std::size_t recent_k = kRecentActions);

    std::size_t dim() const;
    std::size_t action_block_offset(std::size_t block) const;
    const std::vector<std::string>& roles() const { return roles_; }
    const ActionVocab& vocab() const { return vocab_; }
    const CardRegistry& registry() const { return registry_; }

    /// Throws std::invalid_argument on an unknown role, action or card.
    RLState encode(const SessionContext& ctx) const;

private:
    std::vector<std::string> roles_;
    ActionVocab vocab_;
    CardRegistry registry_;
    std::size_t recent_k_;
};

StateEncoder default_state_encoder();

RLState encode_state(const StateEncoder& encoder, const SessionContext& ctx);

// ---------------------------------------------------------------------------
// Reward

struct RewardWeights {
    double w_click = 1.0;
    double w_dwell = 0.5;
    double w_skip = 0.2;
    std::int64_t dwell_cap_ms = 10'000;
    double w_fair = 0.1;
};

struct Outcome {
    bool clicked = false;
    std::int64_t dwell_ms = 0;
    bool skipped = false;
};

/// w_click*[clicked] + w_dwell*min(dwell/cap, 1) - w_skip*[skipped] - w_fair*gap
double compute_reward(const Outcome& outcome, const RewardWeights& weights = {}, double fairness_gap = 0.0);

/// Click-rate gap between two subgroups over a sliding window of interactions.
class FairnessMonitor {
public:
    explicit FairnessMonitor(std::size_t window = 500) : window_(window) {}

    void record(int subgroup, bool clicked);
    /// |CTR(group 0) - CTR(group 1)|, or 0 while either group is unobserved.
    double gap() const;
    std::size_t size() const { return entries_.size(); }

private:
    std::size_t window_;
    std::deque<std::pair<int, bool>> entries_;
    std::size_t count_[2] = {0, 0};
    std::size_t clicks_[2] = {0, 0};
};

// ---------------------------------------------------------------------------
// Replay memory

/// Fixed-capacity ring; once full, each push overwrites the oldest entry.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 10'000);

    void push(Transition t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return storage_.size(); }
    bool empty() const { return size_ == 0; }
    /// i = 0 is the oldest retained transition.
    const Transition& at(std::size_t i) const;
    /// Uniform sampling with replacement.
    std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

private:
    std::vector<Transition> storage_;
    std::size_t head_ = 0;  // next write position
    std::size_t size_ = 0;
};

// ---------------------------------------------------------------------------
// Q-network

struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    std::int64_t decay_steps = 5'000;

    /// Linear decay from start to end, then constant.
    double value(std::int64_t step) const;
};

struct DqnConfig {
    double gamma = 0.95;
    EpsilonSchedule epsilon;
    std::int64_t sync_interval = 250;
    std::size_t batch = 32;
    std::size_t buffer_capacity = 10'000;
    double learning_rate = 1e-3;
    std::vector<std::size_t> hidden = nn::kDefaultHiddenWidths;
};

struct QNetwork {
    nn::MlpParams online;  // theta
    nn::MlpParams target;  // theta-minus
    DqnConfig config;
    std::int64_t train_steps = 0;

    std::size_t action_count() const { return online.output_size(); }
    std::size_t state_dim() const { return online.input_size(); }
};

QNetwork make_qnetwork(std::size_t state_dim, std::size_t actions, const DqnConfig& config, Rng& rng);

Vector q_values(const QNetwork& q, const RLState& s);
Vector target_q_values(const QNetwork& q, const RLState& s);

/// Greedy argmax (lowest index on ties) with probability 1-eps, otherwise a
/// uniformly random action.
RLAction select_action(const QNetwork& q, const RLState& s, double epsilon, Rng& rng);

/// r if done, else r + gamma * max_a' Q(s', a'; theta-minus).
double bellman_target(const Transition& t, const QNetwork& q);

/// One Adam step on the mean squared Bellman error of a sampled mini-batch.
/// Syncs the target network every config.sync_interval steps. Throws when the
/// buffer holds fewer than `batch_size` transitions.
double dqn_train_step(QNetwork& q, const ReplayBuffer& buffer, std::size_t batch_size, nn::AdamState& optimizer,
                      Rng& rng);

void sync_target(QNetwork& q);

struct Ranking {
    std::vector<std::string> order;
    std::vector<double> weights;  // aligned with order, softmax of Q
    std::vector<double> q;        // aligned with order
};

/// Cards sorted by descending Q(s, promote_i); ties keep registry order.
Ranking rank_content(const QNetwork& q, const RLState& s, const CardRegistry& registry);

// ---------------------------------------------------------------------------
// Episodes

struct StepResult {
    double reward = 0.0;
    bool done = false;
};

/// An episodic environment. `observe` is only called while !done().
class Environment {
public:
    virtual ~Environment() = default;
    virtual bool done() const = 0;
    virtual RLState observe() const = 0;
    virtual StepResult step(const RLAction& action) = 0;
};

struct EpisodeResult {
    double total_return = 0.0;  // undiscounted sum of rewards
    std::size_t steps = 0;
    bool aborted = false;
    std::string error;
};

/// Runs the environment to completion with epsilon-greedy actions, appending
/// each transition to `buffer`. `env_steps` drives the epsilon schedule and is
/// advanced per step; `after_step` (optional) runs after every stored
/// transition, e.g. to take a training step. If the environment throws, the
/// episode is aborted and transitions stored so far are kept.
EpisodeResult run_episode(Environment& env, const QNetwork& q, ReplayBuffer& buffer, const EpsilonSchedule& schedule,
                          std::int64_t& env_steps, Rng& rng, const std::function<void()>& after_step = {});

/// Policy checkpoint: MLP tensors plus gamma/epsilon/sync metadata.
void save_policy(const QNetwork& q, const std::filesystem::path& path);
QNetwork load_policy(const std::filesystem::path& path);

}  // namespace aui::rl
