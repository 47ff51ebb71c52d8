// Strategy evaluation on the simulator, the comparison table, and training of
// the LSTM and DQN models on simulated users.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aui/predictor.hpp"
#include "aui/prioritizer.hpp"
#include "aui/simulator.hpp"
#include "aui/strategy.hpp"

namespace aui::sim {

inline constexpr std::size_t kTopSlots = 3;
inline constexpr double kDwellNormMs = 10'000.0;

struct MetricsReport {
    std::string label;
    std::uint64_t cohort_seed = 0;
    double tti_ms = 0.0;               // mean simulated navigation time per serving
    double ctr = 0.0;                  // top-3 clicks / top-3 card exposures
    double dwell_mean_ms = 0.0;        // over directly clicked cards
    double session_duration_min = 0.0;
    double task_success = 0.0;
    double satisfaction_score = 1.0;   // declared proxy in [1, 5]
    double adaptation_accuracy = 0.0;  // servings whose top card was the one needed next
    double adaptation_latency_ms = 0.0;  // wall clock; not part of deterministic output
    std::size_t sessions = 0;
    std::size_t servings = 0;
};

/// 1 + 4 * (0.5 * success + 0.3 * ctr / (1/3) + 0.2 * min(dwell / 10 s, 1)).
double satisfaction_proxy(double task_success, double ctr, double dwell_mean_ms);

/// Every user runs `sessions_per_user` sessions under `strategy`. Archetypes
/// and users are derived from config.seed. Throws when nothing was served.
MetricsReport evaluate_strategy(const Strategy& strategy, const SimConfig& config);

struct ComparisonRow {
    MetricsReport report;
    // Relative change versus the baseline row of the same cohort.
    double d_tti = 0.0, d_ctr = 0.0, d_success = 0.0, d_score = 0.0, d_accuracy = 0.0;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;

    /// `strategy,tti_ms,ctr,success,score,adaptation_accuracy`
    std::string to_csv() const;
    /// Aligned columns including relative deltas and measured latency.
    std::string to_text() const;
    const ComparisonRow& find(std::string_view label, std::size_t cohort = 0) const;
};

/// The first strategy is the baseline. Each cohort re-runs every strategy on
/// the same task and behavior streams; cohort c > 0 uses derive_seed(seed, c).
/// Throws on fewer than two strategies or duplicate labels.
ComparisonTable compare_strategies(const std::vector<const Strategy*>& strategies, const SimConfig& config,
                                   std::size_t cohorts = 1);

std::uint64_t cohort_seed(std::uint64_t seed, std::size_t cohort);

// ---------------------------------------------------------------------------
// Training on simulated users

/// One simulated session as an RL episode. Each action promotes one card on
/// top of the default layout.
class SimEnvironment : public rl::Environment {
public:
    SimEnvironment(const UserArchetype& archetype, std::vector<std::string> task, std::uint64_t behavior_seed,
                   rl::FairnessMonitor& fairness, const rl::StateEncoder& encoder,
                   const rl::RewardWeights& weights = {});

    bool done() const override { return runner_.done(); }
    rl::RLState observe() const override;
    rl::StepResult step(const rl::RLAction& action) override;

private:
    SessionRunner runner_;
    Rng behavior_;
    rl::FairnessMonitor* fairness_;
    const rl::StateEncoder* encoder_;
    rl::RewardWeights weights_;
};

struct TelemetryRow {
    std::int64_t step = 0;
    double loss = 0.0;
    double epsilon = 0.0;
    double mean_return = 0.0;
};

std::string telemetry_csv(const std::vector<TelemetryRow>& rows);

struct DqnTrainConfig {
    std::int64_t train_steps = 20'000;
    std::uint64_t seed = 7;
    std::int64_t telemetry_every = 500;
    rl::DqnConfig dqn;
};

struct DqnTrainResult {
    rl::QNetwork policy;
    std::vector<TelemetryRow> telemetry;
    std::size_t episodes = 0;
};

/// Episodes are sessions of uniformly drawn simulated users. `warm_start`
/// transitions (e.g. from a reward journal) seed the replay buffer.
DqnTrainResult train_dqn(const DqnTrainConfig& config, const SimConfig& sim,
                         const std::vector<rl::Transition>& warm_start = {},
                         const rl::StateEncoder& encoder = rl::default_state_encoder());

struct LstmTrainConfig {
    std::size_t sessions_per_user = 5;
    predictor::TrainConfig train;
};

/// Predictor trained on task sequences sampled from the simulator.
predictor::PredictorModel train_lstm(const LstmTrainConfig& config, const SimConfig& sim);

struct TrainedModels {
    std::shared_ptr<const predictor::PredictorModel> lstm;
    std::shared_ptr<const rl::QNetwork> dqn;
};

/// Both models trained on simulator seed `training_seed`, which should differ
/// from the evaluation seed.
TrainedModels train_models(std::uint64_t training_seed, const LstmTrainConfig& lstm = {},
                           const DqnTrainConfig& dqn = {});

/// The standard line-up: default, rules, LSTM, DQN, combined and, when
/// requested, the oracle. The first entry is the default layout.
std::vector<std::unique_ptr<Strategy>> standard_strategies(const TrainedModels& models, bool include_oracle);

}  // namespace aui::sim
