#include "aui/prioritizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aui/nn/checkpoint.hpp"

namespace aui::rl {

// ---------------------------------------------------------------------------
// State encoding

StateEncoder::StateEncoder(std::vector<std::string> roles, ActionVocab vocab, CardRegistry registry,
                           std::size_t recent_k)
    : roles_(std::move(roles)), vocab_(std::move(vocab)), registry_(std::move(registry)), recent_k_(recent_k) {
    if (roles_.empty()) throw std::invalid_argument("state encoder needs at least one role");
}

std::size_t StateEncoder::action_block_offset(std::size_t block) const {
    return roles_.size() + block * vocab_.action_count();
}

std::size_t StateEncoder::dim() const {
    return roles_.size() + recent_k_ * vocab_.action_count() + 1 + registry_.size();
}

RLState StateEncoder::encode(const SessionContext& ctx) const {
    RLState s{Vector(dim(), 0.0)};
    auto role = std::find(roles_.begin(), roles_.end(), ctx.role);
    if (role == roles_.end()) throw std::invalid_argument("unknown role \"" + ctx.role + "\"");
    s.features[static_cast<std::size_t>(role - roles_.begin())] = 1.0;

    const auto& recent = ctx.recent_actions;
    for (std::size_t block = 0; block < recent_k_ && block < recent.size(); ++block) {
        const auto& name = recent[recent.size() - 1 - block];
        auto id = vocab_.find(name);
        if (!id || !vocab_.is_action(*id)) throw std::invalid_argument("unknown action \"" + name + "\"");
        s.features[action_block_offset(block) + (*id - 2)] = 1.0;
    }

    const std::size_t duration_at = action_block_offset(recent_k_);
    s.features[duration_at] = std::clamp(ctx.duration_minutes / kDurationScaleMinutes, 0.0, 1.0);

    if (!ctx.current_top_card.empty()) {
        auto idx = registry_.index_of(ctx.current_top_card);
        if (!idx) throw std::invalid_argument("unknown card \"" + ctx.current_top_card + "\"");
        s.features[duration_at + 1 + *idx] = 1.0;
    }
    return s;
}

StateEncoder default_state_encoder() { return StateEncoder(kDefaultRoles, default_soc_vocab(), default_registry()); }

RLState encode_state(const StateEncoder& encoder, const SessionContext& ctx) { return encoder.encode(ctx); }

// ---------------------------------------------------------------------------
// Reward

double compute_reward(const Outcome& outcome, const RewardWeights& w, double fairness_gap) {
    const double dwell = w.dwell_cap_ms > 0
                             ? std::min(static_cast<double>(std::max<std::int64_t>(outcome.dwell_ms, 0)) /
                                            static_cast<double>(w.dwell_cap_ms),
                                        1.0)
                             : 0.0;
    return w.w_click * (outcome.clicked ? 1.0 : 0.0) + w.w_dwell * dwell - w.w_skip * (outcome.skipped ? 1.0 : 0.0) -
           w.w_fair * fairness_gap;
}

void FairnessMonitor::record(int subgroup, bool clicked) {
    if (subgroup != 0 && subgroup != 1) throw std::invalid_argument("subgroup must be 0 or 1");
    entries_.emplace_back(subgroup, clicked);
    ++count_[subgroup];
    clicks_[subgroup] += clicked;
    if (entries_.size() > window_) {
        auto [g, c] = entries_.front();
        entries_.pop_front();
        --count_[g];
        clicks_[g] -= c;
    }
}

double FairnessMonitor::gap() const {
    if (count_[0] == 0 || count_[1] == 0) return 0.0;
    const double a = static_cast<double>(clicks_[0]) / static_cast<double>(count_[0]);
    const double b = static_cast<double>(clicks_[1]) / static_cast<double>(count_[1]);
    return std::abs(a - b);
}

// ---------------------------------------------------------------------------
// Replay memory

ReplayBuffer::ReplayBuffer(std::size_t capacity) : storage_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    storage_[head_] = std::move(t);
    head_ = (head_ + 1) % storage_.size();
    size_ = std::min(size_ + 1, storage_.size());
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("replay buffer index out of range");
    const std::size_t oldest = size_ < storage_.size() ? 0 : head_;
    return storage_[(oldest + i) % storage_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    if (size_ == 0) throw std::invalid_argument("cannot sample from an empty replay buffer");
    std::vector<const Transition*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&at(uniform_index(rng, size_)));
    return out;
}

// ---------------------------------------------------------------------------
// Q-network

double EpsilonSchedule::value(std::int64_t step) const {
    if (decay_steps <= 0 || step >= decay_steps) return end;
    const double frac = static_cast<double>(std::max<std::int64_t>(step, 0)) / static_cast<double>(decay_steps);
    return start + (end - start) * frac;
}

QNetwork make_qnetwork(std::size_t state_dim, std::size_t actions, const DqnConfig& config, Rng& rng) {
    if (!(config.gamma >= 0.0 && config.gamma < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
    if (config.sync_interval <= 0) throw std::invalid_argument("sync_interval must be positive");
    std::vector<std::size_t> widths{state_dim};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(actions);
    QNetwork q;
    q.online = nn::init_mlp(widths, rng);
    q.target = q.online;
    q.config = config;
    return q;
}

Vector q_values(const QNetwork& q, const RLState& s) { return nn::mlp_forward(q.online, s.features); }
Vector target_q_values(const QNetwork& q, const RLState& s) { return nn::mlp_forward(q.target, s.features); }

namespace {

std::size_t argmax_lowest(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

}  // namespace

RLAction select_action(const QNetwork& q, const RLState& s, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in [0, 1]");
    if (epsilon > 0.0 && uniform01(rng) < epsilon) return {uniform_index(rng, q.action_count())};
    return {argmax_lowest(q_values(q, s))};
}

double bellman_target(const Transition& t, const QNetwork& q) {
    if (t.done) return t.r;
    auto next = target_q_values(q, t.s_next);
    return t.r + q.config.gamma * *std::max_element(next.begin(), next.end());
}

void sync_target(QNetwork& q) { q.target = q.online; }

double dqn_train_step(QNetwork& q, const ReplayBuffer& buffer, std::size_t batch_size, nn::AdamState& optimizer,
                      Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (buffer.size() < batch_size)
        throw std::invalid_argument("replay buffer holds " + std::to_string(buffer.size()) + " transitions, need " +
                                    std::to_string(batch_size));
    std::vector<nn::QExample> batch;
    batch.reserve(batch_size);
    for (const Transition* t : buffer.sample(batch_size, rng)) {
        if (t->a.promote_index >= q.action_count()) throw std::invalid_argument("transition action out of range");
        batch.push_back({t->s.features, t->a.promote_index, bellman_target(*t, q)});
    }
    auto lg = nn::mlp_loss_and_grads(q.online, batch);
    nn::adam_step(q.online, lg.grads, optimizer);
    ++q.train_steps;
    if (q.train_steps % q.config.sync_interval == 0) sync_target(q);
    return lg.loss;
}

Ranking rank_content(const QNetwork& q, const RLState& s, const CardRegistry& registry) {
    auto values = q_values(q, s);
    if (values.size() != registry.size())
        throw std::invalid_argument("policy has " + std::to_string(values.size()) + " actions but the registry has " +
                                    std::to_string(registry.size()) + " cards");
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    Ranking r;
    for (std::size_t i : idx) {
        r.order.push_back(registry.at(i).card_id);
        r.q.push_back(values[i]);
    }
    r.weights = nn::softmax(r.q);
    return r;
}

// ---------------------------------------------------------------------------
// Episodes

EpisodeResult run_episode(Environment& env, const QNetwork& q, ReplayBuffer& buffer, const EpsilonSchedule& schedule,
                          std::int64_t& env_steps, Rng& rng, const std::function<void()>& after_step) {
    EpisodeResult result;
    try {
        while (!env.done()) {
            RLState s = env.observe();
            RLAction a = select_action(q, s, schedule.value(env_steps), rng);
            StepResult sr = env.step(a);
            RLState s_next = sr.done ? RLState{Vector(s.features.size(), 0.0)} : env.observe();
            buffer.push({std::move(s), a, sr.reward, std::move(s_next), sr.done});
            result.total_return += sr.reward;
            ++result.steps;
            ++env_steps;
            if (after_step) after_step();
            if (sr.done) break;
        }
    } catch (const std::exception& e) {
        result.aborted = true;
        result.error = e.what();
    }
    return result;
}

void save_policy(const QNetwork& q, const std::filesystem::path& path) {
    auto ckpt = nn::to_checkpoint(q.online);
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    ckpt.meta["gamma"] = fmt(q.config.gamma);
    ckpt.meta["epsilon_start"] = fmt(q.config.epsilon.start);
    ckpt.meta["epsilon_end"] = fmt(q.config.epsilon.end);
    ckpt.meta["epsilon_decay_steps"] = std::to_string(q.config.epsilon.decay_steps);
    ckpt.meta["sync_interval"] = std::to_string(q.config.sync_interval);
    ckpt.meta["train_steps"] = std::to_string(q.train_steps);
    nn::save_checkpoint(path, ckpt);
}

QNetwork load_policy(const std::filesystem::path& path) {
    auto ckpt = nn::load_checkpoint(path);
    QNetwork q;
    q.online = nn::mlp_from_checkpoint(ckpt);
    q.target = q.online;
    auto get = [&](const char* key, const std::string& fallback) {
        auto it = ckpt.meta.find(key);
        return it == ckpt.meta.end() ? fallback : it->second;
    };
    q.config.gamma = std::stod(get("gamma", "0.95"));
    q.config.epsilon.start = std::stod(get("epsilon_start", "1"));
    q.config.epsilon.end = std::stod(get("epsilon_end", "0.05"));
    q.config.epsilon.decay_steps = std::stoll(get("epsilon_decay_steps", "5000"));
    q.config.sync_interval = std::stoll(get("sync_interval", "250"));
    q.train_steps = std::stoll(get("train_steps", "0"));
    q.config.hidden.clear();
    for (std::size_t l = 0; l + 1 < q.online.layers.size(); ++l) q.config.hidden.push_back(q.online.layers[l].w.rows());
    return q;
}

}  // namespace aui::rl
