#include "aui/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace aui::sim {

namespace {

struct Workflow {
    std::string role;
    int subgroup;
    std::map<std::string, double> start;
    // action -> (most likely next action, runner-up)
    std::map<std::string, std::pair<std::string, std::string>> next;
    std::vector<std::string> work_cards;  // cards this role relies on most
};

const std::vector<Workflow>& workflows() {
    static const std::vector<Workflow> w = {
        {"analyst",
         0,
         {{"View_Summary", 0.5}, {"Acknowledge_Alert", 0.5}},
         {{"Acknowledge_Alert", {"Investigate_Alert", "Open_Event_Log"}},
          {"Investigate_Alert", {"Open_Event_Log", "Expand_IP_Details"}},
          {"Open_Event_Log", {"Filter_Events", "Expand_IP_Details"}},
          {"Filter_Events", {"Expand_IP_Details", "Open_Event_Log"}},
          {"Expand_IP_Details", {"Acknowledge_Alert", "Block_IP"}},
          {"Block_IP", {"Acknowledge_Alert", "Escalate_Incident"}},
          {"View_Summary", {"Acknowledge_Alert", "Investigate_Alert"}},
          {"Open_Charts", {"View_Summary", "Acknowledge_Alert"}},
          {"Run_Playbook", {"Acknowledge_Alert", "View_Summary"}},
          {"Escalate_Incident", {"Acknowledge_Alert", "View_Summary"}}},
         {"alerts_feed", "event_log", "ip_details"}},
        {"responder",
         1,
         {{"Acknowledge_Alert", 0.7}, {"View_Summary", 0.3}},
         {{"Acknowledge_Alert", {"Expand_IP_Details", "Investigate_Alert"}},
          {"Investigate_Alert", {"Expand_IP_Details", "Block_IP"}},
          {"Open_Event_Log", {"Expand_IP_Details", "Filter_Events"}},
          {"Filter_Events", {"Expand_IP_Details", "Block_IP"}},
          {"Expand_IP_Details", {"Block_IP", "Run_Playbook"}},
          {"Block_IP", {"Run_Playbook", "Escalate_Incident"}},
          {"View_Summary", {"Acknowledge_Alert", "Investigate_Alert"}},
          {"Open_Charts", {"Acknowledge_Alert", "View_Summary"}},
          {"Run_Playbook", {"Escalate_Incident", "Acknowledge_Alert"}},
          {"Escalate_Incident", {"Acknowledge_Alert", "View_Summary"}}},
         {"alerts_feed", "ip_details", "quick_actions"}},
        {"manager",
         0,
         {{"View_Summary", 0.8}, {"Open_Charts", 0.2}},
         {{"Acknowledge_Alert", {"View_Summary", "Investigate_Alert"}},
          {"Investigate_Alert", {"Escalate_Incident", "Open_Charts"}},
          {"Open_Event_Log", {"View_Summary", "Open_Charts"}},
          {"Filter_Events", {"View_Summary", "Open_Event_Log"}},
          {"Expand_IP_Details", {"View_Summary", "Escalate_Incident"}},
          {"Block_IP", {"Escalate_Incident", "View_Summary"}},
          {"View_Summary", {"Open_Charts", "Investigate_Alert"}},
          {"Open_Charts", {"Investigate_Alert", "View_Summary"}},
          {"Run_Playbook", {"Escalate_Incident", "View_Summary"}},
          {"Escalate_Incident", {"View_Summary", "Open_Charts"}}},
         {"summary", "charts", "quick_actions"}},
    };
    return w;
}

// Median dwell per action, in milliseconds.
const std::map<std::string, double>& dwell_medians() {
    static const std::map<std::string, double> m = {
        {"Acknowledge_Alert", 5'000}, {"Investigate_Alert", 9'000}, {"Open_Event_Log", 6'500},
        {"Filter_Events", 6'000},     {"Expand_IP_Details", 11'000}, {"Block_IP", 4'500},
        {"View_Summary", 7'500},      {"Open_Charts", 9'500},        {"Run_Playbook", 8'000},
        {"Escalate_Incident", 10'500}};
    return m;
}

constexpr double kRunnerUpMass = 0.15;

}  // namespace

void UserArchetype::validate(const CardRegistry& registry) const {
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("archetype " + archetype_id + ": " + what);
    };
    const std::size_t n = actions.size();
    if (n == 0) fail("no actions");
    if (start.size() != n || transition.size() != n) fail("chain size mismatch");
    auto check_row = [&](const std::vector<double>& row, const std::string& name) {
        if (row.size() != n) fail(name + " has wrong width");
        for (double p : row)
            if (!(p >= 0.0 && p <= 1.0)) fail(name + " has a probability outside [0, 1]");
        double sum = std::accumulate(row.begin(), row.end(), 0.0);
        if (std::abs(sum - 1.0) > 1e-9) fail(name + " sums to " + std::to_string(sum));
    };
    check_row(start, "start distribution");
    for (std::size_t i = 0; i < n; ++i) check_row(transition[i], "row " + actions[i]);
    for (const auto& [card, a] : card_affinity) {
        if (!registry.contains(card)) fail("affinity for unknown card " + card);
        if (!(a >= 0.0 && a <= 1.0)) fail("affinity outside [0, 1] for " + card);
    }
    for (const auto& card : registry.cards())
        if (!card_affinity.contains(card.card_id)) fail("no affinity for card " + card.card_id);
    if (position_bias.size() < registry.size()) fail("position bias shorter than the layout");
    for (std::size_t i = 0; i < position_bias.size(); ++i) {
        if (!(position_bias[i] >= 0.0 && position_bias[i] <= 1.0)) fail("position bias outside [0, 1]");
        if (i > 0 && position_bias[i] > position_bias[i - 1]) fail("position bias increases");
    }
    for (const auto& a : actions)
        if (!dwell.contains(a)) fail("no dwell parameters for " + a);
    if (subgroup != 0 && subgroup != 1) fail("subgroup must be 0 or 1");
}

std::vector<UserArchetype> gen_archetypes(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xA4C));
    const auto& actions = default_soc_actions();
    auto index = [&](const std::string& a) {
        return static_cast<std::size_t>(std::find(actions.begin(), actions.end(), a) - actions.begin());
    };
    std::vector<UserArchetype> out;
    for (const auto& wf : workflows()) {
        UserArchetype u;
        u.archetype_id = wf.role;
        u.role = wf.role;
        u.actions = actions;
        u.subgroup = wf.subgroup;
        u.position_bias = kDefaultPositionBias;
        u.start.assign(actions.size(), 0.0);
        for (const auto& [a, p] : wf.start) u.start[index(a)] = p;

        const std::size_t n = actions.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& [first, second] = wf.next.at(actions[i]);
            const double peak = uniform(rng, 0.65, 0.75);
            const double rest = (1.0 - peak - kRunnerUpMass) / static_cast<double>(n - 2);
            std::vector<double> row(n, rest);
            row[index(first)] = peak;
            row[index(second)] = kRunnerUpMass;
            // Force an exact unit sum despite rounding.
            double sum = std::accumulate(row.begin(), row.end(), 0.0);
            row[index(first)] += 1.0 - sum;
            u.transition.push_back(std::move(row));
        }
        for (const auto& card : default_registry().cards()) {
            bool work = std::find(wf.work_cards.begin(), wf.work_cards.end(), card.card_id) != wf.work_cards.end();
            u.card_affinity[card.card_id] = work ? uniform(rng, 0.93, 0.99) : uniform(rng, 0.85, 0.9);
        }
        for (const auto& [a, median] : dwell_medians()) u.dwell[a] = {std::log(median), 0.35};
        u.validate();
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<SimUser> make_users(std::size_t n) {
    if (n == 0) throw std::invalid_argument("need at least one user");
    std::vector<SimUser> users;
    const std::size_t analysts = (n * 2) / 5, responders = (n * 2) / 5;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t arch = i < analysts ? 0 : i < analysts + responders ? 1 : 2;
        users.push_back({"U" + std::to_string(100 + i), arch});
    }
    return users;
}

void SimConfig::validate() const {
    if (n_users == 0 || sessions_per_user == 0) throw std::invalid_argument("user and session counts must be positive");
    if (min_actions == 0 || max_actions < min_actions) throw std::invalid_argument("bad actions-per-session range");
    if (salt.size() < kMinSaltBytes || salt.size() > kMaxSaltBytes)
        throw std::invalid_argument("salt must be " + std::to_string(kMinSaltBytes) + ".." +
                                    std::to_string(kMaxSaltBytes) + " bytes");
}

std::vector<std::string> draw_task(const UserArchetype& user, std::size_t min_actions, std::size_t max_actions,
                                   Rng& rng) {
    const std::size_t len = min_actions + uniform_index(rng, max_actions - min_actions + 1);
    std::vector<std::string> task;
    task.reserve(len);
    std::size_t cur = categorical(rng, user.start);
    task.push_back(user.actions[cur]);
    while (task.size() < len) {
        cur = categorical(rng, user.transition[cur]);
        task.push_back(user.actions[cur]);
    }
    return task;
}

double click_probability(const UserArchetype& user, const std::string& card_id, std::size_t slot) {
    if (slot >= user.position_bias.size()) return 0.0;
    return user.card_affinity.at(card_id) * user.position_bias[slot];
}

SessionRunner::SessionRunner(const UserArchetype& user, std::vector<std::string> task,
                             const std::map<std::string, std::string>& action_cards)
    : user_(&user), task_(std::move(task)), action_cards_(&action_cards) {}

ServeContext SessionRunner::context() const {
    ServeContext ctx;
    ctx.role = user_->role;
    ctx.history = history();
    ctx.duration_minutes = duration_minutes();
    ctx.current_top_card = top_card_;
    if (!done()) ctx.intended_action = intended();
    return ctx;
}

Interaction SessionRunner::interact(const LayoutConfig& layout, Rng& behavior) {
    if (done()) throw std::logic_error("session already finished");
    Interaction it;
    it.intended_action = intended();
    it.intended_card = action_cards_->at(it.intended_action);
    auto pos = std::find(layout.order.begin(), layout.order.end(), it.intended_card);
    if (pos == layout.order.end()) throw std::invalid_argument("layout lacks card " + it.intended_card);
    it.slot = static_cast<std::size_t>(pos - layout.order.begin());
    auto vis = layout.visible.find(it.intended_card);
    const bool shown = vis == layout.visible.end() || vis->second;

    // Both draws happen on every step so paired runs consume the stream identically.
    const double u = uniform01(behavior);
    const auto& dp = user_->dwell.at(it.intended_action);
    const double dwell = lognormal(behavior, dp.mu, dp.sigma);

    it.clicked = shown && u < click_probability(*user_, it.intended_card, it.slot);
    it.dwell_ms = std::clamp<std::int64_t>(std::llround(dwell), kMinDwellMs, kMaxDwellMs);
    it.navigation_ms = it.clicked ? kClickBaseMs + kClickPerSlotMs * static_cast<double>(it.slot) : kSearchMs;

    navigation_ms_ += it.navigation_ms;
    elapsed_ms_ += it.navigation_ms + static_cast<double>(it.dwell_ms);
    top_card_ = layout.order.front();
    ++next_;
    return it;
}

bool SessionRunner::succeeded() const {
    return navigation_ms_ <= kBudgetPerActionMs * static_cast<double>(task_.size());
}

std::uint64_t task_seed(std::uint64_t seed, const SessionKey& key) {
    return derive_seed(derive_seed(derive_seed(seed, key.user_index), key.session_index), 1);
}

std::uint64_t behavior_seed(std::uint64_t seed, const SessionKey& key) {
    return derive_seed(derive_seed(derive_seed(seed, key.user_index), key.session_index), 2);
}

SessionResult simulate_session(const UserArchetype& archetype, const SimUser& user, const SessionKey& key,
                               const Strategy& strategy, const SimConfig& config, const rl::StateEncoder& encoder) {
    Rng task_rng(task_seed(config.seed, key));
    Rng behavior(behavior_seed(config.seed, key));
    SessionRunner runner(archetype, draw_task(archetype, config.min_actions, config.max_actions, task_rng));

    const auto day = std::chrono::sys_days{config.start_date} + std::chrono::days{key.session_index};
    const SessionToken token = hash_session_id(user.raw_id + "/" + std::to_string(key.session_index), config.salt);
    const auto& registry = encoder.registry();

    SessionResult out;
    auto encode = [&](const ServeContext& ctx) {
        return encoder.encode({ctx.role, {ctx.history.begin(), ctx.history.end()}, ctx.duration_minutes,
                               ctx.current_top_card});
    };
    while (!runner.done()) {
        const ServeContext ctx = runner.context();
        const auto t0 = std::chrono::steady_clock::now();
        const LayoutConfig layout = strategy.serve(ctx);
        const auto t1 = std::chrono::steady_clock::now();
        rl::RLState s = encode(ctx);

        const Interaction it = runner.interact(layout, behavior);

        out.events.push_back({std::chrono::year_month_day{day}, token, layout.layout_id, it.intended_action, it.dwell_ms});
        const double r = rl::compute_reward({it.clicked, it.clicked ? it.dwell_ms : 0, !it.clicked});
        const bool last = runner.done();
        rl::RLState next = last ? rl::RLState{rl::Vector(s.features.size(), 0.0)} : encode(runner.context());
        out.transitions.push_back({std::move(s), {registry.index_of(layout.order.front()).value()}, r, std::move(next), last});

        auto& st = out.stats;
        ++st.servings;
        st.clicks += it.clicked;
        st.top3_clicks += it.clicked && it.slot < 3;
        st.top_hits += it.slot == 0;
        st.tti_ms_sum += it.navigation_ms;
        if (it.clicked) st.dwell_clicked_sum += static_cast<double>(it.dwell_ms);
        st.latency_ms_sum += std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    out.stats.duration_min = runner.duration_minutes();
    out.task_success = runner.succeeded();
    return out;
}

std::vector<std::vector<std::string>> sample_task_sequences(const std::vector<UserArchetype>& archetypes,
                                                            const std::vector<SimUser>& users, std::size_t sessions,
                                                            const SimConfig& config) {
    std::vector<std::vector<std::string>> out;
    for (std::size_t s = 0; s < sessions; ++s)
        for (std::size_t u = 0; u < users.size(); ++u) {
            Rng rng(task_seed(config.seed, {u, s}));
            out.push_back(draw_task(archetypes.at(users[u].archetype), config.min_actions, config.max_actions, rng));
        }
    return out;
}

std::vector<InteractionEvent> generate_dataset(const DatasetConfig& config, const std::vector<const Strategy*>& mix) {
    config.sim.validate();
    if (mix.empty()) throw std::invalid_argument("dataset needs at least one strategy");
    const auto archetypes = gen_archetypes(config.sim.seed);
    const auto users = make_users(config.sim.n_users);
    std::vector<InteractionEvent> events;
    std::size_t served = 0;
    for (std::size_t s = 0; s < config.sim.sessions_per_user; ++s)
        for (std::size_t u = 0; u < users.size(); ++u) {
            const Strategy& strategy = *mix[served++ % mix.size()];
            auto res = simulate_session(archetypes[users[u].archetype], users[u], {u, s}, strategy, config.sim);
            for (auto& e : res.events) {
                if (config.target_events != 0 && events.size() == config.target_events) return events;
                events.push_back(std::move(e));
            }
        }
    if (config.target_events != 0 && events.size() < config.target_events)
        throw std::invalid_argument("configuration yields only " + std::to_string(events.size()) + " events, " +
                                    std::to_string(config.target_events) + " requested");
    return events;
}

void write_dataset(const std::filesystem::path& path, const std::vector<InteractionEvent>& events) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset to " + path.string());
    out << serialize_interaction_log(events);
    if (!out.flush()) throw std::runtime_error("failed writing dataset to " + path.string());
}

}  // namespace aui::sim
