#include "aui/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace aui::sim {

namespace {

double relative_change(double x, double base) {
    if (base == 0.0) return x == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return (x - base) / base;
}

std::string format(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string percent(double v) {
    if (!std::isfinite(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * v);
    return buf;
}

}  // namespace

double satisfaction_proxy(double task_success, double ctr, double dwell_mean_ms) {
    const double ctr_norm = std::min(ctr * static_cast<double>(kTopSlots), 1.0);
    const double dwell_norm = std::min(dwell_mean_ms / kDwellNormMs, 1.0);
    return 1.0 + 4.0 * (0.5 * task_success + 0.3 * ctr_norm + 0.2 * dwell_norm);
}

MetricsReport evaluate_strategy(const Strategy& strategy, const SimConfig& config) {
    config.validate();
    const auto archetypes = gen_archetypes(config.seed);
    const auto users = make_users(config.n_users);
    const auto encoder = rl::default_state_encoder();

    SessionStats total;
    std::size_t sessions = 0, successes = 0;
    for (std::size_t u = 0; u < users.size(); ++u)
        for (std::size_t s = 0; s < config.sessions_per_user; ++s) {
            auto res = simulate_session(archetypes[users[u].archetype], users[u], {u, s}, strategy, config, encoder);
            const auto& st = res.stats;
            total.servings += st.servings;
            total.top3_clicks += st.top3_clicks;
            total.clicks += st.clicks;
            total.top_hits += st.top_hits;
            total.tti_ms_sum += st.tti_ms_sum;
            total.dwell_clicked_sum += st.dwell_clicked_sum;
            total.latency_ms_sum += st.latency_ms_sum;
            total.duration_min += st.duration_min;
            ++sessions;
            successes += res.task_success;
        }
    if (total.servings == 0) throw std::invalid_argument("strategy " + strategy.label() + " served no layouts");

    MetricsReport r;
    r.label = strategy.label();
    r.cohort_seed = config.seed;
    r.sessions = sessions;
    r.servings = total.servings;
    const double n = static_cast<double>(total.servings);
    r.tti_ms = total.tti_ms_sum / n;
    r.ctr = static_cast<double>(total.top3_clicks) / (static_cast<double>(kTopSlots) * n);
    r.dwell_mean_ms = total.clicks ? total.dwell_clicked_sum / static_cast<double>(total.clicks) : 0.0;
    r.session_duration_min = total.duration_min / static_cast<double>(sessions);
    r.task_success = static_cast<double>(successes) / static_cast<double>(sessions);
    r.satisfaction_score = satisfaction_proxy(r.task_success, r.ctr, r.dwell_mean_ms);
    r.adaptation_accuracy = static_cast<double>(total.top_hits) / n;
    r.adaptation_latency_ms = total.latency_ms_sum / n;
    return r;
}

std::uint64_t cohort_seed(std::uint64_t seed, std::size_t cohort) {
    return cohort == 0 ? seed : derive_seed(seed, 0xC0DE + cohort);
}

ComparisonTable compare_strategies(const std::vector<const Strategy*>& strategies, const SimConfig& config,
                                   std::size_t cohorts) {
    if (strategies.size() < 2) throw std::invalid_argument("comparison needs at least two strategies");
    if (cohorts == 0) throw std::invalid_argument("need at least one cohort");
    std::set<std::string> labels;
    for (const auto* s : strategies)
        if (!labels.insert(s->label()).second) throw std::invalid_argument("duplicate strategy label " + s->label());

    ComparisonTable table;
    for (std::size_t c = 0; c < cohorts; ++c) {
        SimConfig cfg = config;
        cfg.seed = cohort_seed(config.seed, c);
        const std::size_t first = table.rows.size();
        for (const auto* s : strategies) {
            ComparisonRow row{evaluate_strategy(*s, cfg)};
            const auto& b = table.rows.size() == first ? row.report : table.rows[first].report;
            row.d_tti = relative_change(row.report.tti_ms, b.tti_ms);
            row.d_ctr = relative_change(row.report.ctr, b.ctr);
            row.d_success = relative_change(row.report.task_success, b.task_success);
            row.d_score = relative_change(row.report.satisfaction_score, b.satisfaction_score);
            row.d_accuracy = relative_change(row.report.adaptation_accuracy, b.adaptation_accuracy);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream out;
    out << "strategy,tti_ms,ctr,success,score,adaptation_accuracy\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out << r.label << ',' << format("%.0f", r.tti_ms) << ',' << format("%.3f", r.ctr) << ','
            << format("%.3f", r.task_success) << ',' << format("%.2f", r.satisfaction_score) << ','
            << format("%.3f", r.adaptation_accuracy) << '\n';
    }
    return out.str();
}

std::string ComparisonTable::to_text() const {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %8s %6s %8s %6s %9s %9s %9s %9s %11s\n", "Strategy", "TTI(ms)", "CTR",
                  "Success", "Score", "AdaptAcc", "dCTR", "dSuccess", "dTTI", "Latency(ms)");
    out << line;
    for (const auto& row : rows) {
        const auto& r = row.report;
        std::snprintf(line, sizeof line, "%-16s %8.0f %6.3f %8.3f %6.2f %9.3f %9s %9s %9s %11.3f\n", r.label.c_str(),
                      r.tti_ms, r.ctr, r.task_success, r.satisfaction_score, r.adaptation_accuracy,
                      percent(row.d_ctr).c_str(), percent(row.d_success).c_str(), percent(row.d_tti).c_str(),
                      r.adaptation_latency_ms);
        out << line;
    }
    return out.str();
}

const ComparisonRow& ComparisonTable::find(std::string_view label, std::size_t cohort) const {
    std::size_t seen = 0;
    for (const auto& row : rows)
        if (row.report.label == label && seen++ == cohort) return row;
    throw std::out_of_range("no comparison row for " + std::string(label));
}

// ---------------------------------------------------------------------------
// Training

SimEnvironment::SimEnvironment(const UserArchetype& archetype, std::vector<std::string> task,
                               std::uint64_t behavior_seed, rl::FairnessMonitor& fairness,
                               const rl::StateEncoder& encoder, const rl::RewardWeights& weights)
    : runner_(archetype, std::move(task)), behavior_(behavior_seed), fairness_(&fairness), encoder_(&encoder),
      weights_(weights) {}

rl::RLState SimEnvironment::observe() const {
    const auto ctx = runner_.context();
    return encoder_->encode({ctx.role, {ctx.history.begin(), ctx.history.end()}, ctx.duration_minutes,
                             ctx.current_top_card});
}

rl::StepResult SimEnvironment::step(const rl::RLAction& action) {
    const auto& reg = encoder_->registry();
    if (action.promote_index >= reg.size()) throw std::invalid_argument("promote index out of range");
    LayoutConfig layout = default_layout(reg);
    promote_card(layout, reg.at(action.promote_index).card_id, Emphasis::highlighted);
    const Interaction it = runner_.interact(layout, behavior_);
    fairness_->record(runner_.user().subgroup, it.clicked);
    const double r =
        rl::compute_reward({it.clicked, it.clicked ? it.dwell_ms : 0, !it.clicked}, weights_, fairness_->gap());
    return {r, runner_.done()};
}

std::string telemetry_csv(const std::vector<TelemetryRow>& rows) {
    std::ostringstream out;
    out << "step,loss,epsilon,mean_return\n";
    for (const auto& r : rows)
        out << r.step << ',' << format("%.6g", r.loss) << ',' << format("%.4f", r.epsilon) << ','
            << format("%.4f", r.mean_return) << '\n';
    return out.str();
}

DqnTrainResult train_dqn(const DqnTrainConfig& config, const SimConfig& sim,
                         const std::vector<rl::Transition>& warm_start, const rl::StateEncoder& encoder) {
    sim.validate();
    if (config.train_steps <= 0) throw std::invalid_argument("train_steps must be positive");
    if (config.telemetry_every <= 0) throw std::invalid_argument("telemetry_every must be positive");
    const auto archetypes = gen_archetypes(sim.seed);
    const auto users = make_users(sim.n_users);

    Rng rng(config.seed);
    DqnTrainResult out;
    out.policy = rl::make_qnetwork(encoder.dim(), encoder.registry().size(), config.dqn, rng);
    rl::ReplayBuffer buffer(config.dqn.buffer_capacity);
    for (const auto& t : warm_start) {
        if (t.s.features.size() != encoder.dim() || t.s_next.features.size() != encoder.dim())
            throw std::invalid_argument("warm-start transition has the wrong state size");
        if (t.a.promote_index >= encoder.registry().size())
            throw std::invalid_argument("warm-start transition has an out-of-range action");
        buffer.push(t);
    }
    nn::AdamState opt;
    opt.config.learning_rate = config.dqn.learning_rate;
    rl::FairnessMonitor fairness;

    std::int64_t env_steps = 0;
    double loss_sum = 0.0, return_sum = 0.0, last_mean_return = 0.0;
    std::size_t loss_n = 0, returns_n = 0;
    auto learn = [&] {
        if (buffer.size() < config.dqn.batch || out.policy.train_steps >= config.train_steps) return;
        loss_sum += rl::dqn_train_step(out.policy, buffer, config.dqn.batch, opt, rng);
        ++loss_n;
        if (out.policy.train_steps % config.telemetry_every == 0) {
            if (returns_n) last_mean_return = return_sum / static_cast<double>(returns_n);
            out.telemetry.push_back({out.policy.train_steps, loss_sum / static_cast<double>(loss_n),
                                     config.dqn.epsilon.value(env_steps), last_mean_return});
            loss_sum = return_sum = 0.0;
            loss_n = returns_n = 0;
        }
    };

    while (out.policy.train_steps < config.train_steps) {
        const std::uint64_t episode_seed = derive_seed(sim.seed ^ config.seed, out.episodes);
        const SimUser& user = users[uniform_index(rng, users.size())];
        const UserArchetype& arch = archetypes[user.archetype];
        Rng task_rng(derive_seed(episode_seed, 1));
        SimEnvironment env(arch, draw_task(arch, sim.min_actions, sim.max_actions, task_rng), derive_seed(episode_seed, 2),
                           fairness, encoder);
        auto res = rl::run_episode(env, out.policy, buffer, config.dqn.epsilon, env_steps, rng, learn);
        if (res.aborted) throw std::runtime_error("training episode failed: " + res.error);
        return_sum += res.total_return;
        ++returns_n;
        ++out.episodes;
    }
    return out;
}

predictor::PredictorModel train_lstm(const LstmTrainConfig& config, const SimConfig& sim) {
    sim.validate();
    const auto archetypes = gen_archetypes(sim.seed);
    const auto users = make_users(sim.n_users);
    const auto vocab = default_soc_vocab();
    auto sessions = sample_task_sequences(archetypes, users, config.sessions_per_user, sim);
    auto dataset = predictor::build_sequences(sessions, vocab, predictor::kDefaultWindow);
    return predictor::train_predictor(dataset, vocab, config.train);
}

TrainedModels train_models(std::uint64_t training_seed, const LstmTrainConfig& lstm, const DqnTrainConfig& dqn) {
    SimConfig sim;
    sim.seed = training_seed;
    TrainedModels m;
    m.lstm = std::make_shared<const predictor::PredictorModel>(train_lstm(lstm, sim));
    m.dqn = std::make_shared<const rl::QNetwork>(train_dqn(dqn, sim).policy);
    return m;
}

std::vector<std::unique_ptr<Strategy>> standard_strategies(const TrainedModels& models, bool include_oracle) {
    std::vector<std::unique_ptr<Strategy>> out;
    out.push_back(std::make_unique<DefaultStrategy>());
    out.push_back(std::make_unique<RulesStrategy>(rules::default_soc_ruleset()));
    if (models.lstm) out.push_back(std::make_unique<LstmStrategy>(models.lstm));
    if (models.dqn) out.push_back(std::make_unique<DqnStrategy>(models.dqn));
    if (models.lstm && models.dqn) out.push_back(std::make_unique<CombinedStrategy>(models.lstm, models.dqn));
    if (include_oracle) out.push_back(std::make_unique<OracleStrategy>());
    return out;
}

}  // namespace aui::sim
