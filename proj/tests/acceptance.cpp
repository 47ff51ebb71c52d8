// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "httplib.h"

#include "aui/cli.hpp"
#include "aui/evaluation.hpp"
#include "aui/nn/gradcheck.hpp"
#include "aui/nn/lstm.hpp"
#include "aui/nn/mlp.hpp"
#include "aui/service.hpp"
#include "support/chain_mdp.hpp"

using namespace aui;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch_dir() {
    auto dir = fs::temp_directory_path() / "aui_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Models shared by the comparison and API criteria; trained once on a seed
// disjoint from the evaluation seed.
const sim::TrainedModels& trained_models() {
    static const sim::TrainedModels models = [] {
        sim::LstmTrainConfig lc;
        lc.train.epochs = 10;
        return sim::train_models(1001, lc, {});
    }();
    return models;
}

double training_seconds = 0.0;

// ---------------------------------------------------------------------------

Verdict gradient_checks() {
    auto t0 = Clock::now();
    double worst_lstm = 0.0, worst_q = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto p = nn::init_predictor({6, 8, 8, 2}, rng);
        std::vector<nn::SequenceExample> batch(4);
        for (auto& ex : batch)
            for (std::size_t t = 0; t < 5; ++t) {
                ex.inputs.push_back(uniform_index(rng, 6));
                ex.targets.push_back(1 + uniform_index(rng, 5));
            }
        worst_lstm = std::max(worst_lstm, nn::finite_diff_check(
                                              p, [&](const nn::PredictorParams& q) { return nn::predictor_loss_and_grads(q, batch); },
                                              [&](const nn::PredictorParams& q) { return nn::predictor_loss(q, batch); },
                                              1e-5, seed));

        // A smaller step for the ReLU network keeps the central difference
        // from straddling a hidden unit's kink.
        const std::vector<std::size_t> widths = {20, 128, 128, 6};
        auto m = nn::init_mlp(widths, rng);
        std::vector<nn::QExample> qb;
        for (int i = 0; i < 8; ++i) {
            nn::Vector x(20);
            for (double& v : x) v = uniform(rng, -1, 1);
            qb.push_back({x, uniform_index(rng, 6), uniform(rng, -1, 1)});
        }
        worst_q = std::max(worst_q, nn::finite_diff_check(
                                        m, [&](const nn::MlpParams& q) { return nn::mlp_loss_and_grads(q, qb); },
                                        [&](const nn::MlpParams& q) { return nn::mlp_loss(q, qb); }, 1e-6, seed));
    }
    const double secs = seconds_since(t0);
    return {worst_lstm < 1e-4 && worst_q < 1e-4 && secs < 60.0,
            "predictor max rel err " + fmt("%.2e", worst_lstm) + ", q-network " + fmt("%.2e", worst_q) + ", " +
                fmt("%.1f s", secs)};
}

Verdict dqn_oracle() {
    auto t0 = Clock::now();
    auto r = chain::train(0.9, 30'000, 1);
    const double secs = seconds_since(t0);
    return {r.train_steps <= 50'000 && r.max_error < 1e-2 && r.greedy_optimal && secs < 120.0,
            "steps " + std::to_string(r.train_steps) + ", max |Q - Q*| " + fmt("%.2e", r.max_error) + ", greedy " +
                (r.greedy_optimal ? "optimal" : "suboptimal") + ", " + fmt("%.1f s", secs)};
}

Verdict predictor_accuracy() {
    auto t0 = Clock::now();
    std::vector<std::string> tokens;
    for (int i = 0; i < 8; ++i) tokens.push_back("T" + std::to_string(i));
    auto sample = [&](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<std::vector<std::string>> out;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t pos = uniform_index(rng, tokens.size());
            std::size_t len = 4 + uniform_index(rng, 9);
            std::vector<std::string> s;
            for (std::size_t k = 0; k < len; ++k) s.push_back(tokens[(pos + k) % tokens.size()]);
            out.push_back(s);
        }
        return out;
    };
    auto train = sample(300, 11);
    auto test = sample(100, 12);

    // Majority baseline: always predict the most frequent training target.
    std::map<std::string, std::size_t> freq;
    for (const auto& s : train)
        for (std::size_t j = 1; j < s.size(); ++j) ++freq[s[j]];
    const std::string majority =
        std::max_element(freq.begin(), freq.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
    std::size_t hits = 0, total = 0;
    for (const auto& s : test)
        for (std::size_t j = 1; j < s.size(); ++j, ++total) hits += s[j] == majority;
    const double baseline = static_cast<double>(hits) / static_cast<double>(total);

    auto vocab = build_vocab(tokens);
    predictor::TrainConfig tc;
    tc.epochs = 8;
    tc.embed = 16;
    tc.hidden = 32;
    tc.learning_rate = 1e-2;
    tc.seed = 3;
    auto model = predictor::train_predictor(predictor::build_sequences(train, vocab, predictor::kDefaultWindow), vocab, tc);
    const double acc = predictor::adaptation_accuracy(model, test);
    const double secs = seconds_since(t0);
    return {acc >= 0.95 && acc >= baseline + 0.30 && secs < 120.0,
            "accuracy " + fmt("%.3f", acc) + ", majority baseline " + fmt("%.3f", baseline) + ", " +
                fmt("%.1f s", secs)};
}

Verdict comparative_improvement() {
    auto t0 = Clock::now();
    const auto& models = trained_models();
    training_seconds = seconds_since(t0);
    DefaultStrategy def;
    RulesStrategy rules(rules::default_soc_ruleset());
    CombinedStrategy combined(models.lstm, models.dqn);
    sim::SimConfig cfg;  // 100 users x 20 sessions, seed 1
    auto table = sim::compare_strategies({&def, &rules, &combined}, cfg);
    const auto& d = table.find(def.label(), 0);
    const auto& r = table.find(rules.label(), 0);
    const auto& c = table.find(combined.label(), 0);
    const double ctr_vs_rules = c.report.ctr / r.report.ctr - 1.0;
    const double success_vs_rules = c.report.task_success / r.report.task_success - 1.0;
    const double ctr_vs_default = c.report.ctr / d.report.ctr - 1.0;
    const double secs = seconds_since(t0);
    return {ctr_vs_rules >= 0.15 && success_vs_rules >= 0.10 && ctr_vs_default >= 0.20 && secs < 600.0,
            "CTR vs rules " + fmt("%+.1f%%", 100 * ctr_vs_rules) + ", success vs rules " +
                fmt("%+.1f%%", 100 * success_vs_rules) + ", CTR vs default " + fmt("%+.1f%%", 100 * ctr_vs_default) +
                ", " + fmt("%.0f s", secs) + " (training " + fmt("%.0f s", training_seconds) + ")"};
}

Verdict dataset_fidelity(const fs::path& dir) {
    std::ostringstream out, err;
    std::vector<std::string> paths;
    for (const char* name : {"run1.csv", "run2.csv"}) {
        paths.push_back((dir / name).string());
        if (cli::cli_dispatch({"gen-data", "--events", "50", "--seed", "5", "--out", paths.back()}, out, err) != 0)
            return {false, "gen-data failed: " + err.str()};
    }
    const std::string text = slurp(paths[0]);
    if (text != slurp(paths[1])) return {false, "repeated runs differ"};

    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line != kLogHeader) return {false, "header is \"" + line + "\""};
    const std::regex row(R"((\d{4}-\d{2}-\d{2}),([0-9a-f]{16}),(L[123]),([A-Za-z_]+),(\d+))");
    const auto actions = default_soc_actions();
    std::size_t rows = 0;
    long lo = 1L << 40, hi = 0;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_match(line, m, row)) return {false, "malformed row \"" + line + "\""};
        if (std::find(actions.begin(), actions.end(), m[4].str()) == actions.end())
            return {false, "unknown target in \"" + line + "\""};
        const long dwell = std::stol(m[5].str());
        lo = std::min(lo, dwell);
        hi = std::max(hi, dwell);
        ++rows;
    }
    const bool ok = rows == 50 && lo >= 500 && hi <= 30'000;
    return {ok, std::to_string(rows) + " rows, dwell " + std::to_string(lo) + ".." + std::to_string(hi) +
                    " ms, byte-identical across runs"};
}

Verdict privacy_scan(const fs::path& dir) {
    const std::vector<std::string> injected = {"U4242", "jane.doe@soc.example", "analyst-7781"};
    std::vector<std::string> corpus;

    // Dataset written through the CLI: scan for every simulated raw id.
    std::ostringstream out, err;
    const auto gen_path = (dir / "privacy.csv").string();
    if (cli::cli_dispatch({"gen-data", "--events", "0", "--users", "20", "--sessions", "3", "--out", gen_path}, out,
                          err) != 0)
        return {false, "gen-data failed: " + err.str()};
    std::vector<std::string> needles = injected;
    for (const auto& u : sim::make_users(20)) needles.push_back(u.raw_id);
    corpus.push_back(slurp(gen_path));
    corpus.push_back(slurp(gen_path + ".meta.json"));

    // Sessions simulated for harness-chosen ids.
    sim::SimConfig sc;
    auto archetypes = sim::gen_archetypes(sc.seed);
    RulesStrategy rules(rules::default_soc_ruleset());
    std::vector<InteractionEvent> events;
    for (std::size_t i = 0; i < injected.size(); ++i) {
        sim::SimUser user{injected[i], i % archetypes.size()};
        auto r = sim::simulate_session(archetypes[user.archetype], user, {i, 0}, rules, sc);
        events.insert(events.end(), r.events.begin(), r.events.end());
    }
    sim::write_dataset(dir / "injected.csv", events);
    corpus.push_back(slurp(dir / "injected.csv"));

    // Service responses and reward journal.
    service::ServiceConfig cfg;
    cfg.mode = service::Mode::combined;
    cfg.salt = "acceptance-privacy-salt";
    cfg.journal = dir / "journal.jsonl";
    const auto& models = trained_models();
    {
        service::Service svc(cfg, {models.lstm, models.dqn});
        for (const auto& id : injected) {
            nlohmann::json batch = nlohmann::json::array(
                {{{"session_id", id}, {"target", "Acknowledge_Alert"}, {"dwell_ms", 3000}, {"clicked", true}},
                 {{"session_id", id}, {"target", "Investigate_Alert"}, {"dwell_ms", 5000}, {"clicked", true}}});
            corpus.push_back(svc.post_events(batch.dump()).body.dump());
            corpus.push_back(svc.get_layout(id).body.dump());
            corpus.push_back(svc.get_ranking(id).body.dump());
            corpus.push_back(svc.post_reward(nlohmann::json{{"session_id", id}, {"clicked", true}}.dump()).body.dump());
            corpus.push_back(svc.post_reward(nlohmann::json{{"session_id", id}, {"skipped", true}}.dump()).body.dump());
            corpus.push_back(svc.post_optout(nlohmann::json{{"session_id", id}, {"opt_out", true}}.dump()).body.dump());
        }
        corpus.push_back(svc.health().body.dump());
    }
    corpus.push_back(slurp(dir / "journal.jsonl"));

    std::size_t found = 0, bytes = 0;
    for (const auto& text : corpus) {
        bytes += text.size();
        for (const auto& n : needles)
            for (auto pos = text.find(n); pos != std::string::npos; pos = text.find(n, pos + 1)) ++found;
    }
    if (events.empty() || corpus.back().empty()) return {false, "nothing was written to scan"};
    return {found == 0, std::to_string(found) + " raw id occurrences in " + std::to_string(corpus.size()) +
                            " artifacts (" + std::to_string(bytes) + " bytes, " + std::to_string(needles.size()) +
                            " ids)"};
}

Verdict api_contract() {
    const auto& models = trained_models();
    const auto& registry = default_registry();
    const auto default_json = service::layout_to_json(default_layout(registry));
    auto differs_from_default = [&](const nlohmann::json& body) {
        return body.at("order") != default_json.at("order") || body.at("emphasis") != default_json.at("emphasis") ||
               body.at("visible") != default_json.at("visible");
    };
    auto valid_permutation = [&](const nlohmann::json& body) {
        return is_permutation_of_registry(body.at("order").get<std::vector<std::string>>(), registry);
    };

    service::ServiceConfig cfg;
    cfg.mode = service::Mode::combined;
    cfg.salt = "acceptance-api-salt-0001";
    service::Service svc(cfg, {models.lstm, models.dqn});
    service::HttpServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);

    sim::SimConfig sc;
    sc.seed = 77;
    auto sessions = sim::sample_task_sequences(sim::gen_archetypes(sc.seed), sim::make_users(20), 2, sc);
    std::vector<double> rtt;
    std::size_t layouts = 0, bad_perm = 0, bad_flag = 0, adapted = 0, http_errors = 0;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const std::string sid = "api-session-" + std::to_string(i);
        for (const auto& action : sessions[i]) {
            nlohmann::json batch = nlohmann::json::array(
                {{{"session_id", sid}, {"target", action}, {"dwell_ms", 4000}, {"clicked", true}}});
            auto posted = client.Post("/api/events", batch.dump(), "application/json");
            if (!posted || posted->status != 200) {
                ++http_errors;
                continue;
            }
            auto t0 = Clock::now();
            auto res = client.Get("/api/layout?session=" + sid);
            rtt.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
            if (!res || res->status != 200) {
                ++http_errors;
                continue;
            }
            auto body = nlohmann::json::parse(res->body);
            ++layouts;
            bad_perm += !valid_permutation(body);
            bad_flag += body.at("adapted").get<bool>() != differs_from_default(body);
            adapted += body.at("adapted").get<bool>();
        }
    }
    server.stop();
    std::nth_element(rtt.begin(), rtt.begin() + static_cast<std::ptrdiff_t>(rtt.size() / 2), rtt.end());
    const double median_rtt = rtt.empty() ? 1e9 : rtt[rtt.size() / 2];

    // Without models the combined service serves the static default.
    service::Service bare(cfg);
    bare.post_events(R"([{"session_id":"cold","target":"Acknowledge_Alert"}])");
    auto fb = bare.get_layout("cold");
    const bool fallback_ok = fb.status == 200 && !fb.body.at("adapted").get<bool>() && !differs_from_default(fb.body) &&
                             bare.health().body.contains("warning");

    const bool ok = layouts > 0 && http_errors == 0 && bad_perm == 0 && bad_flag == 0 && adapted > 0 &&
                    median_rtt < 50.0 && fallback_ok;
    return {ok, std::to_string(layouts) + " layouts (" + std::to_string(adapted) + " adapted), " +
                    std::to_string(bad_perm) + " invalid orders, " + std::to_string(bad_flag) +
                    " wrong adapted flags, median round trip " + fmt("%.2f ms", median_rtt) + ", server median " +
                    fmt("%.3f ms", svc.median_latency_ms()) + ", fallback " + (fallback_ok ? "ok" : "broken")};
}

}  // namespace

int main() {
    const fs::path dir = scratch_dir();
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"gradient correctness", gradient_checks},
        {"dqn oracle equivalence", dqn_oracle},
        {"predictor accuracy", predictor_accuracy},
        {"comparative improvement", comparative_improvement},
        {"dataset fidelity", [&] { return dataset_fidelity(dir); }},
        {"privacy invariant", [&] { return privacy_scan(dir); }},
        {"api contract", api_contract},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += !v.pass;
        std::printf("%s  %-26s %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    fs::remove_all(dir);
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
