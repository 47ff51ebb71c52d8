#include "doctest.h"

#include <cmath>
#include <regex>
#include <set>

#include "aui/evaluation.hpp"
#include "aui/simulator.hpp"

using namespace aui;
using namespace aui::sim;

namespace {

// Puts the card the user needs next in the last slot.
class BuryStrategy : public Strategy {
public:
    std::string label() const override { return "Bury"; }
    LayoutConfig serve(const ServeContext& ctx) const override {
        auto l = default_layout(default_registry(), "L9");
        const auto& card = default_action_cards().at(ctx.intended_action);
        auto it = std::find(l.order.begin(), l.order.end(), card);
        std::rotate(it, it + 1, l.order.end());
        return l;
    }
};

class Relabel : public Strategy {
public:
    Relabel(const Strategy& inner, std::string label) : inner_(inner), label_(std::move(label)) {}
    std::string label() const override { return label_; }
    LayoutConfig serve(const ServeContext& ctx) const override { return inner_.serve(ctx); }

private:
    const Strategy& inner_;
    std::string label_;
};

SimConfig small_config(std::uint64_t seed = 1) {
    SimConfig c;
    c.n_users = 20;
    c.sessions_per_user = 4;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("gen_archetypes") {
    auto a = gen_archetypes(3);
    CHECK(a == gen_archetypes(3));
    CHECK(a != gen_archetypes(4));
    REQUIRE(a.size() == 3);
    std::set<std::string> roles;
    for (const auto& u : a) {
        roles.insert(u.role);
        for (const auto& row : u.transition) {
            double sum = 0.0;
            for (double p : row) sum += p;
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
        CHECK_NOTHROW(u.validate());
    }
    CHECK(roles == std::set<std::string>(rl::kDefaultRoles.begin(), rl::kDefaultRoles.end()));
    CHECK(a[0].transition != a[1].transition);
    CHECK(a[1].transition != a[2].transition);

    auto bad = a[0];
    bad.transition[0][0] += 0.01;
    CHECK_THROWS(bad.validate());
    bad = a[0];
    bad.position_bias[3] = 0.9;
    CHECK_THROWS(bad.validate());
    bad = a[0];
    bad.card_affinity["charts"] = 1.5;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("make_users splits 40/40/20") {
    auto users = make_users(100);
    std::array<int, 3> counts{};
    for (const auto& u : users) ++counts[u.archetype];
    CHECK(counts == std::array<int, 3>{40, 40, 20});
    CHECK(users.front().raw_id == "U100");
    CHECK(users.back().raw_id == "U199");
    CHECK_THROWS(make_users(0));
}

TEST_CASE("click model") {
    auto arch = gen_archetypes(1)[0];
    for (auto& [card, a] : arch.card_affinity) a = 1.0;
    CHECK(click_probability(arch, "summary", 0) == 1.0);

    // Card always in slot 0 with affinity 1 and bias 1: every serving is a click.
    OracleStrategy oracle;
    SimConfig cfg = small_config();
    auto users = make_users(cfg.n_users);
    auto res = simulate_session(arch, users[0], {0, 0}, oracle, cfg);
    CHECK(res.stats.clicks == res.stats.servings);
    CHECK(res.task_success);

    // Position bias strictly lowers the click probability further down.
    for (const auto& u : gen_archetypes(2))
        for (const auto& card : default_registry().cards())
            CHECK(click_probability(u, card.card_id, 0) > click_probability(u, card.card_id, 5));
}

TEST_CASE("buried cards are clicked at bias x affinity") {
    auto arch = gen_archetypes(1)[1];
    const double aff = 0.9;
    for (auto& [card, a] : arch.card_affinity) a = aff;
    BuryStrategy bury;
    Rng behavior(5);
    const int n = 10'000;
    int clicks = 0;
    for (int i = 0; i < n; ++i) {
        SessionRunner runner(arch, {"Block_IP"});
        auto it = runner.interact(bury.serve(runner.context()), behavior);
        CHECK(it.slot == 5);
        clicks += it.clicked;
    }
    const double p = 0.2 * aff;
    const double sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(clicks / double(n) - p) <= 3 * sigma);
}

TEST_CASE("simulate_session is deterministic and conserves counts") {
    auto arch = gen_archetypes(1);
    auto users = make_users(10);
    auto cfg = small_config();
    DefaultStrategy def;
    RulesStrategy rules(rules::default_soc_ruleset());
    for (std::size_t u = 0; u < users.size(); ++u) {
        auto a = simulate_session(arch[users[u].archetype], users[u], {u, 3}, rules, cfg);
        auto b = simulate_session(arch[users[u].archetype], users[u], {u, 3}, rules, cfg);
        CHECK(a.events == b.events);
        CHECK(a.events.size() == a.transitions.size());
        CHECK(a.events.size() == a.stats.servings);
        CHECK(a.events.size() >= cfg.min_actions);
        CHECK(a.events.size() <= cfg.max_actions);
        CHECK(a.transitions.back().done);

        // Same task stream under another strategy.
        auto c = simulate_session(arch[users[u].archetype], users[u], {u, 3}, def, cfg);
        REQUIRE(c.events.size() == a.events.size());
        for (std::size_t i = 0; i < a.events.size(); ++i) {
            CHECK(c.events[i].target == a.events[i].target);
            CHECK(c.events[i].dwell_ms == a.events[i].dwell_ms);
            CHECK(c.events[i].layout_id == "L1");
        }
    }
}

TEST_CASE("generate_dataset") {
    DatasetConfig cfg;
    cfg.sim.seed = 42;
    cfg.target_events = 50;
    DefaultStrategy def;
    RulesStrategy rules(rules::default_soc_ruleset());
    auto events = generate_dataset(cfg, {&def, &rules});
    REQUIRE(events.size() == 50);
    const std::string csv = serialize_interaction_log(events);
    CHECK(csv == serialize_interaction_log(generate_dataset(cfg, {&def, &rules})));
    CHECK(csv.substr(0, csv.find('\n')) == kLogHeader);

    std::regex row(R"(\d{4}-\d{2}-\d{2},[0-9a-f]{16},L\d+,[A-Za-z_]+,\d+)");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::size_t rows = 0;
    std::set<std::string> layouts;
    while (std::getline(in, line)) {
        ++rows;
        CHECK_MESSAGE(std::regex_match(line, row), line);
        layouts.insert(line.substr(28, 2));
    }
    CHECK(rows == 50);
    CHECK(layouts == std::set<std::string>{"L1", "L3"});
    for (const auto& e : events) {
        CHECK(e.dwell_ms >= kMinDwellMs);
        CHECK(e.dwell_ms <= kMaxDwellMs);
    }
    for (const auto& u : make_users(cfg.sim.n_users)) CHECK(csv.find(u.raw_id) == std::string::npos);

    auto back = parse_interaction_log(std::string_view(csv), default_soc_vocab());
    CHECK(back == events);

    cfg.sim.seed = 43;
    CHECK(serialize_interaction_log(generate_dataset(cfg, {&def})) != csv);

    DatasetConfig tiny;
    tiny.sim.n_users = 1;
    tiny.sim.sessions_per_user = 1;
    tiny.target_events = 1000;
    CHECK_THROWS(generate_dataset(tiny, {&def}));
    CHECK_THROWS(write_dataset("/nonexistent-dir/x.csv", events));
}

TEST_CASE("evaluate_strategy bounds and orderings") {
    SimConfig cfg;  // default archetypes, 100 users x 20 sessions
    OracleStrategy oracle;
    DefaultStrategy def;
    RulesStrategy rules(rules::default_soc_ruleset());
    auto o = evaluate_strategy(oracle, cfg);
    auto d = evaluate_strategy(def, cfg);
    auto r = evaluate_strategy(rules, cfg);
    CHECK(o.task_success >= 0.95);
    CHECK(d.ctr < o.ctr);
    CHECK(r.ctr > d.ctr);
    CHECK(r.ctr <= o.ctr);
    CHECK(o.adaptation_accuracy == 1.0);
    CHECK(o.sessions == 2000);
    for (const auto& m : {o, d, r}) {
        CHECK(m.ctr >= 0.0);
        CHECK(m.ctr <= 1.0 / 3.0);
        CHECK(m.task_success >= 0.0);
        CHECK(m.task_success <= 1.0);
        CHECK(m.satisfaction_score >= 1.0);
        CHECK(m.satisfaction_score <= 5.0);
        CHECK(m.dwell_mean_ms >= 0.0);
        CHECK(m.tti_ms > 0.0);
    }
    CHECK(satisfaction_proxy(0, 0, 0) == 1.0);
    CHECK(satisfaction_proxy(1, 1.0 / 3.0, 10'000) == doctest::Approx(5.0));
}

TEST_CASE("compare_strategies") {
    auto cfg = small_config();
    DefaultStrategy def;
    Relabel copy(def, "Copy");
    auto t = compare_strategies({&def, &copy}, cfg, 2);
    REQUIRE(t.rows.size() == 4);
    for (const auto& row : t.rows) {
        CHECK(row.d_ctr == 0.0);
        CHECK(row.d_success == 0.0);
        CHECK(row.d_tti == 0.0);
        CHECK(row.d_score == 0.0);
    }
    CHECK(t.rows[0].report.cohort_seed != t.rows[2].report.cohort_seed);
    CHECK_THROWS(compare_strategies({&def, &def}, cfg));
    CHECK_THROWS(compare_strategies({&def}, cfg));

    OracleStrategy oracle;
    auto t2 = compare_strategies({&def, &oracle}, cfg);
    CHECK(t2.to_csv() == compare_strategies({&def, &oracle}, cfg).to_csv());
    CHECK(t2.find(kOracleLabel).d_ctr > 0.0);

    std::istringstream csv(t2.to_csv());
    std::string line;
    std::getline(csv, line);
    CHECK(line == "strategy,tti_ms,ctr,success,score,adaptation_accuracy");
    std::regex row(R"([A-Za-z0-9_]+,\d+,\d\.\d{3},\d\.\d{3},\d\.\d{2},\d\.\d{3})");
    while (std::getline(csv, line)) CHECK_MESSAGE(std::regex_match(line, row), line);
    CHECK(t2.to_text().find("Oracle") != std::string::npos);
}

TEST_CASE("DQN training on the simulator") {
    SimConfig sim = small_config(9);
    DqnTrainConfig cfg;
    cfg.train_steps = 200;
    cfg.telemetry_every = 50;
    cfg.dqn.hidden = {16};
    auto a = train_dqn(cfg, sim);
    CHECK(a.policy.train_steps == 200);
    REQUIRE(a.telemetry.size() == 4);
    CHECK(a.telemetry.back().step == 200);
    CHECK(a.episodes > 0);
    auto b = train_dqn(cfg, sim);
    CHECK(a.policy.online == b.policy.online);
    CHECK(telemetry_csv(a.telemetry) == telemetry_csv(b.telemetry));
    CHECK(telemetry_csv(a.telemetry).rfind("step,loss,epsilon,mean_return\n", 0) == 0);

    std::vector<rl::Transition> bad = {{rl::RLState{{1.0}}, {0}, 0.0, rl::RLState{{1.0}}, true}};
    CHECK_THROWS(train_dqn(cfg, sim, bad));

    // The trained policy serves valid layouts.
    DqnStrategy strategy(std::make_shared<const rl::QNetwork>(a.policy));
    std::vector<std::string> hist = {"Acknowledge_Alert"};
    auto l = strategy.serve({"responder", hist, 1.0, "summary", ""});
    CHECK_NOTHROW(validate_layout(l, default_registry()));
    CHECK(l.layout_id == "L2");
}

TEST_CASE("SimEnvironment episode") {
    auto arch = gen_archetypes(1)[2];
    rl::FairnessMonitor fairness;
    auto encoder = rl::default_state_encoder();
    SimEnvironment env(arch, {"View_Summary", "Open_Charts", "Investigate_Alert"}, 3, fairness, encoder);
    Rng rng(1);
    DqnTrainConfig cfg;
    cfg.dqn.hidden = {8};
    auto q = rl::make_qnetwork(encoder.dim(), 6, cfg.dqn, rng);
    rl::ReplayBuffer buf(16);
    std::int64_t steps = 0;
    auto res = rl::run_episode(env, q, buf, cfg.dqn.epsilon, steps, rng);
    CHECK(res.steps == 3);
    CHECK_FALSE(res.aborted);
    CHECK(fairness.size() == 3);
    CHECK(buf.at(2).done);
}

TEST_CASE("LSTM training on the simulator") {
    SimConfig sim = small_config(4);
    LstmTrainConfig cfg;
    cfg.sessions_per_user = 1;
    cfg.train.epochs = 2;
    cfg.train.embed = 8;
    cfg.train.hidden = 8;
    auto m = train_lstm(cfg, sim);
    CHECK(m.meta.epoch_losses.size() == 2);
    CHECK(m.vocab == default_soc_vocab());
}
