#include "aui/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <sodium.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "aui/evaluation.hpp"
#include "aui/service.hpp"

namespace aui::cli {

namespace {

using Json = nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

std::string resolve_salt(const std::string& flag, const std::string& fallback) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("AUI_SALT"); env && *env) return env;
    return fallback;
}

std::shared_ptr<const predictor::PredictorModel> load_lstm(const std::string& path) {
    if (path.empty()) return nullptr;
    if (!std::filesystem::exists(path)) throw std::runtime_error("predictor model not found: " + path);
    return std::make_shared<const predictor::PredictorModel>(predictor::load_model(path));
}

std::shared_ptr<const rl::QNetwork> load_dqn(const std::string& path) {
    if (path.empty()) return nullptr;
    if (!std::filesystem::exists(path)) throw std::runtime_error("policy not found: " + path);
    return std::make_shared<const rl::QNetwork>(rl::load_policy(path));
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::unique_ptr<Strategy> make_strategy(const std::string& name, const sim::TrainedModels& models) {
    auto need_lstm = [&] {
        if (!models.lstm) throw std::runtime_error("strategy " + name + " needs a predictor model");
    };
    auto need_dqn = [&] {
        if (!models.dqn) throw std::runtime_error("strategy " + name + " needs a policy");
    };
    if (name == "default") return std::make_unique<DefaultStrategy>();
    if (name == "rules") return std::make_unique<RulesStrategy>(rules::default_soc_ruleset());
    if (name == "oracle") return std::make_unique<OracleStrategy>();
    if (name == "lstm") {
        need_lstm();
        return std::make_unique<LstmStrategy>(models.lstm);
    }
    if (name == "dqn") {
        need_dqn();
        return std::make_unique<DqnStrategy>(models.dqn);
    }
    if (name == "combined") {
        need_lstm();
        need_dqn();
        return std::make_unique<CombinedStrategy>(models.lstm, models.dqn);
    }
    throw UsageError("unknown strategy \"" + name + "\" (expected default, rules, lstm, dqn, combined or oracle)");
}

bool needs(const std::vector<std::string>& names, std::initializer_list<const char*> which) {
    for (const auto& n : names)
        for (const char* w : which)
            if (n == w) return true;
    return false;
}

// Options shared by simulate and compare.
struct EvalOptions {
    std::uint64_t seed = 1;
    std::size_t users = 100;
    std::size_t sessions = 20;
    std::string lstm, dqn;
    std::uint64_t train_seed = 0;  // 0: seed + 1000
    std::size_t lstm_epochs = 10;
    std::size_t lstm_sessions = 5;
    std::int64_t dqn_steps = 20'000;

    void add_to(CLI::App* app) {
        app->add_option("--seed", seed, "Simulation seed");
        app->add_option("--users", users, "Simulated users")->check(CLI::PositiveNumber);
        app->add_option("--sessions", sessions, "Sessions per user")->check(CLI::PositiveNumber);
        app->add_option("--lstm", lstm, "Predictor checkpoint (trained on the fly when absent)");
        app->add_option("--dqn", dqn, "Policy checkpoint (trained on the fly when absent)");
        app->add_option("--train-seed", train_seed, "Simulator seed for on-the-fly training (default seed+1000)");
        app->add_option("--lstm-epochs", lstm_epochs, "Epochs for on-the-fly predictor training")->check(CLI::PositiveNumber);
        app->add_option("--lstm-sessions", lstm_sessions, "Sessions per user for on-the-fly predictor training")
            ->check(CLI::PositiveNumber);
        app->add_option("--dqn-steps", dqn_steps, "Gradient steps for on-the-fly policy training")->check(CLI::PositiveNumber);
    }

    sim::SimConfig sim_config() const {
        sim::SimConfig c;
        c.seed = seed;
        c.n_users = users;
        c.sessions_per_user = sessions;
        return c;
    }

    sim::TrainedModels models(const std::vector<std::string>& strategies, std::ostream& out) const {
        sim::TrainedModels m{load_lstm(lstm), load_dqn(dqn)};
        sim::SimConfig train_sim;
        train_sim.seed = train_seed ? train_seed : seed + 1000;
        if (!m.lstm && needs(strategies, {"lstm", "combined"})) {
            out << "training predictor on simulator seed " << train_sim.seed << "\n";
            sim::LstmTrainConfig lc;
            lc.sessions_per_user = lstm_sessions;
            lc.train.epochs = lstm_epochs;
            m.lstm = std::make_shared<const predictor::PredictorModel>(sim::train_lstm(lc, train_sim));
        }
        if (!m.dqn && needs(strategies, {"dqn", "combined"})) {
            out << "training policy on simulator seed " << train_sim.seed << "\n";
            sim::DqnTrainConfig dc;
            dc.train_steps = dqn_steps;
            m.dqn = std::make_shared<const rl::QNetwork>(sim::train_dqn(dc, train_sim).policy);
        }
        return m;
    }
};

int run_serve(const service::ServiceConfig& cfg, const std::string& lstm, const std::string& dqn, std::ostream& out,
              std::ostream& err) {
    service::Models models{load_lstm(lstm), load_dqn(dqn)};
    service::Service svc(cfg, models);
    if (auto h = svc.health().body; h.contains("warning")) err << "warning: " << h["warning"].get<std::string>() << "\n";
    service::HttpServer server(svc);
    const int port = server.start(cfg.host, cfg.port);
    out << "serving " << service::to_string(cfg.mode) << " layouts on http://" << cfg.host << ":" << port << "\n"
        << std::flush;
    g_stop = false;
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    out << "stopped; median layout latency " << svc.median_latency_ms() << " ms\n";
    return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive SOC dashboard layouts: data generation, training, evaluation and serving", "aui"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a simulated interaction log");
    std::size_t gen_events = 50;
    std::uint64_t gen_seed = 1;
    std::size_t gen_users = 100, gen_sessions = 20;
    std::string gen_out = "interactions.csv", gen_salt, gen_lstm, gen_dqn;
    gen->add_option("--events", gen_events, "Rows to emit (0 = every simulated event)");
    gen->add_option("--seed", gen_seed, "Simulation seed");
    gen->add_option("--users", gen_users, "Simulated users")->check(CLI::PositiveNumber);
    gen->add_option("--sessions", gen_sessions, "Sessions per user")->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "Output CSV path");
    gen->add_option("--salt", gen_salt, "Hash salt (default: $AUI_SALT, else a fixed simulation salt)");
    gen->add_option("--lstm", gen_lstm, "Add LSTM-served sessions (L2) using this predictor");
    gen->add_option("--dqn", gen_dqn, "Add DQN-served sessions (L2) using this policy");

    // train-lstm
    auto* tl = app.add_subcommand("train-lstm", "Train the next-action predictor on an interaction log");
    std::string tl_data, tl_out = "lstm.ckpt", tl_telemetry;
    predictor::TrainConfig tl_cfg;
    std::size_t tl_window = predictor::kDefaultWindow;
    tl->add_option("--data", tl_data, "Interaction log CSV")->required();
    tl->add_option("--epochs", tl_cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
    tl->add_option("--seed", tl_cfg.seed, "Shuffle and init seed");
    tl->add_option("--batch", tl_cfg.batch, "Mini-batch size")->check(CLI::PositiveNumber);
    tl->add_option("--lr", tl_cfg.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
    tl->add_option("--embed", tl_cfg.embed, "Embedding width")->check(CLI::PositiveNumber);
    tl->add_option("--hidden", tl_cfg.hidden, "LSTM hidden width")->check(CLI::PositiveNumber);
    tl->add_option("--layers", tl_cfg.layers, "LSTM layers")->check(CLI::PositiveNumber);
    tl->add_option("--window", tl_window, "Context window")->check(CLI::Range(2, 1024));
    tl->add_option("--out", tl_out, "Checkpoint path");
    tl->add_option("--telemetry", tl_telemetry, "Per-epoch loss CSV (default <out>.loss.csv)");

    // train-dqn
    auto* td = app.add_subcommand("train-dqn", "Train the content-prioritization policy on simulated users");
    sim::DqnTrainConfig td_cfg;
    std::uint64_t td_sim_seed = 1001;
    std::size_t td_users = 100;
    std::string td_out = "policy.ckpt", td_telemetry, td_resume;
    td->add_option("--steps", td_cfg.train_steps, "Gradient steps")->check(CLI::PositiveNumber);
    td->add_option("--seed", td_cfg.seed, "Training seed");
    td->add_option("--sim-seed", td_sim_seed, "Simulator seed");
    td->add_option("--users", td_users, "Simulated users")->check(CLI::PositiveNumber);
    td->add_option("--gamma", td_cfg.dqn.gamma, "Discount factor")->check(CLI::Range(0.0, 0.999999));
    td->add_option("--lr", td_cfg.dqn.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
    td->add_option("--telemetry-every", td_cfg.telemetry_every, "Steps between telemetry rows")
        ->check(CLI::PositiveNumber);
    td->add_option("--out", td_out, "Policy checkpoint path");
    td->add_option("--telemetry", td_telemetry, "Telemetry CSV (default <out>.telemetry.csv)");
    td->add_option("--resume", td_resume, "Reward journal whose transitions seed the replay buffer");

    // simulate
    auto* simc = app.add_subcommand("simulate", "Evaluate one strategy on the simulator");
    EvalOptions sim_opts;
    std::string sim_strategy = "rules", sim_out;
    simc->add_option("--strategy", sim_strategy, "default, rules, lstm, dqn, combined or oracle");
    sim_opts.add_to(simc);
    simc->add_option("--out", sim_out, "Write the report as JSON");

    // compare
    auto* cmp = app.add_subcommand("compare", "Compare strategies on paired simulator runs");
    EvalOptions cmp_opts;
    std::string cmp_strategies = "default,rules,lstm,dqn,combined", cmp_out = "comparison.csv", cmp_text;
    std::size_t cmp_cohorts = 1;
    cmp->add_option("--strategies", cmp_strategies, "Comma-separated list; the first is the baseline");
    cmp_opts.add_to(cmp);
    cmp->add_option("--cohorts", cmp_cohorts, "Independent cohorts per strategy")->check(CLI::PositiveNumber);
    cmp->add_option("--out", cmp_out, "Comparison CSV path");
    cmp->add_option("--text", cmp_text, "Also write the aligned table here");

    // serve
    auto* srv = app.add_subcommand("serve", "Run the HTTP layout service");
    service::ServiceConfig srv_cfg;
    std::string srv_mode = "combined", srv_lstm, srv_dqn, srv_journal, srv_salt;
    srv->add_option("--host", srv_cfg.host, "Bind address");
    srv->add_option("--port", srv_cfg.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    srv->add_option("--mode", srv_mode, "default, rules, lstm, dqn or combined");
    srv->add_option("--lstm", srv_lstm, "Predictor checkpoint");
    srv->add_option("--dqn", srv_dqn, "Policy checkpoint");
    srv->add_option("--journal", srv_journal, "Append reward transitions to this JSON-lines file");
    srv->add_option("--salt", srv_salt, "Hash salt (default: $AUI_SALT, else random per process)");
    srv->add_option("--poll-ms", srv_cfg.poll_ms, "Polling hint for clients")->check(CLI::PositiveNumber);
    srv->add_option("--max-sessions", srv_cfg.max_sessions, "Session store capacity")->check(CLI::PositiveNumber);

    if (!args.empty() && !args[0].starts_with("-") && !app.get_subcommand_no_throw(args[0])) {
        err << "error: unknown subcommand \"" << args[0] << "\"\n\n" << app.help();
        return 2;
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) {
            sim::DatasetConfig dc;
            dc.sim.seed = gen_seed;
            dc.sim.n_users = gen_users;
            dc.sim.sessions_per_user = gen_sessions;
            dc.sim.salt = resolve_salt(gen_salt, dc.sim.salt);
            dc.target_events = gen_events;
            std::vector<std::unique_ptr<Strategy>> owned;
            owned.push_back(std::make_unique<DefaultStrategy>());
            owned.push_back(std::make_unique<RulesStrategy>(rules::default_soc_ruleset()));
            if (auto m = load_lstm(gen_lstm)) owned.push_back(std::make_unique<LstmStrategy>(m));
            if (auto q = load_dqn(gen_dqn)) owned.push_back(std::make_unique<DqnStrategy>(q));
            std::vector<const Strategy*> mix;
            Json labels = Json::array();
            for (const auto& s : owned) {
                mix.push_back(s.get());
                labels.push_back(s->label());
            }
            auto events = sim::generate_dataset(dc, mix);
            sim::write_dataset(gen_out, events);
            Json meta{{"rows", events.size()},     {"seed", gen_seed},
                      {"users", gen_users},        {"sessions_per_user", gen_sessions},
                      {"strategies", labels},      {"hash_algorithm", std::string(kSessionHashAlgorithm)}};
            write_text(gen_out + ".meta.json", meta.dump(2) + "\n");
            out << "wrote " << events.size() << " events to " << gen_out << "\n";
            return 0;
        }
        if (tl->parsed()) {
            std::ifstream in(tl_data);
            if (!in) throw std::runtime_error("cannot read " + tl_data);
            auto vocab = default_soc_vocab();
            auto events = parse_interaction_log(in, vocab);
            auto dataset = predictor::build_sequences(events, vocab, tl_window);
            auto model = predictor::train_predictor(dataset, vocab, tl_cfg);
            predictor::save_model(model, tl_out);
            std::ostringstream csv;
            csv << "epoch,loss\n";
            for (std::size_t e = 0; e < model.meta.epoch_losses.size(); ++e)
                csv << e + 1 << ',' << model.meta.epoch_losses[e] << '\n';
            write_text(tl_telemetry.empty() ? tl_out + ".loss.csv" : tl_telemetry, csv.str());
            out << "trained on " << dataset.examples.size() << " examples; final loss " << model.meta.final_loss
                << "; saved " << tl_out << "\n";
            return 0;
        }
        if (td->parsed()) {
            sim::SimConfig sc;
            sc.seed = td_sim_seed;
            sc.n_users = td_users;
            std::vector<rl::Transition> warm;
            if (!td_resume.empty()) warm = service::read_journal(td_resume);
            auto res = sim::train_dqn(td_cfg, sc, warm);
            rl::save_policy(res.policy, td_out);
            write_text(td_telemetry.empty() ? td_out + ".telemetry.csv" : td_telemetry, sim::telemetry_csv(res.telemetry));
            out << "trained " << res.policy.train_steps << " steps over " << res.episodes << " episodes";
            if (!warm.empty()) out << " (" << warm.size() << " journaled transitions)";
            out << "; saved " << td_out << "\n";
            return 0;
        }
        if (simc->parsed()) {
            auto models = sim_opts.models({sim_strategy}, out);
            auto strategy = make_strategy(sim_strategy, models);
            auto r = sim::evaluate_strategy(*strategy, sim_opts.sim_config());
            Json j{{"strategy", r.label},
                   {"seed", r.cohort_seed},
                   {"tti_ms", r.tti_ms},
                   {"ctr", r.ctr},
                   {"dwell_mean_ms", r.dwell_mean_ms},
                   {"session_duration_min", r.session_duration_min},
                   {"task_success", r.task_success},
                   {"satisfaction_score", r.satisfaction_score},
                   {"adaptation_accuracy", r.adaptation_accuracy},
                   {"adaptation_latency_ms", r.adaptation_latency_ms},
                   {"sessions", r.sessions},
                   {"servings", r.servings}};
            if (!sim_out.empty()) write_text(sim_out, j.dump(2) + "\n");
            out << j.dump(2) << "\n";
            return 0;
        }
        if (cmp->parsed()) {
            auto names = split_list(cmp_strategies);
            if (names.size() < 2) throw UsageError("--strategies needs at least two entries");
            auto models = cmp_opts.models(names, out);
            std::vector<std::unique_ptr<Strategy>> owned;
            std::vector<const Strategy*> ptrs;
            for (const auto& n : names) {
                owned.push_back(make_strategy(n, models));
                ptrs.push_back(owned.back().get());
            }
            auto table = sim::compare_strategies(ptrs, cmp_opts.sim_config(), cmp_cohorts);
            write_text(cmp_out, table.to_csv());
            if (!cmp_text.empty()) write_text(cmp_text, table.to_text());
            out << table.to_text();
            return 0;
        }
        if (srv->parsed()) {
            srv_cfg.mode = service::parse_mode(srv_mode);
            if (!srv_journal.empty()) srv_cfg.journal = srv_journal;
            srv_cfg.salt = resolve_salt(srv_salt, "");
            if (srv_cfg.salt.empty()) {
                if (sodium_init() < 0) throw std::runtime_error("libsodium initialization failed");
                unsigned char raw[16];
                randombytes_buf(raw, sizeof raw);
                char hex[33];
                sodium_bin2hex(hex, sizeof hex, raw, sizeof raw);
                srv_cfg.salt = hex;
                err << "warning: no salt configured; using a random per-process salt\n";
            }
            return run_serve(srv_cfg, srv_lstm, srv_dqn, out, err);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int cli_dispatch(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cli_dispatch(args, out, err);
}

}  // namespace aui::cli
