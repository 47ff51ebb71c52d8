#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "httplib.h"

#include "aui/service.hpp"

using namespace aui;
using namespace aui::service;

namespace {

const std::string kSalt = "unit-test-salt-0123456789";

ServiceConfig config(Mode mode) {
    ServiceConfig c;
    c.mode = mode;
    c.salt = kSalt;
    return c;
}

Json event(const std::string& session, const std::string& target, bool clicked = true) {
    return Json{{"session_id", session}, {"target", target}, {"dwell_ms", 4'000}, {"clicked", clicked},
                {"skipped", !clicked}};
}

std::string batch(std::initializer_list<Json> events) { return Json(events).dump(); }

// Alert acknowledgement is always followed by blocking the IP, then charts.
std::shared_ptr<const predictor::PredictorModel> grammar_model() {
    std::vector<std::vector<std::string>> sessions;
    const std::vector<std::string> cycle = {"Acknowledge_Alert", "Block_IP", "Open_Charts"};
    for (std::size_t start = 0; start < 3; ++start)
        for (std::size_t len = 3; len <= 7; ++len) {
            std::vector<std::string> s;
            for (std::size_t k = 0; k < len; ++k) s.push_back(cycle[(start + k) % 3]);
            sessions.push_back(s);
        }
    predictor::TrainConfig tc;
    tc.epochs = 60;
    tc.embed = 8;
    tc.hidden = 16;
    tc.batch = 16;
    tc.learning_rate = 1e-2;
    auto vocab = default_soc_vocab();
    auto model = predictor::train_predictor(predictor::build_sequences(sessions, vocab, 8), vocab, tc);
    return std::make_shared<const predictor::PredictorModel>(std::move(model));
}

std::shared_ptr<const rl::QNetwork> small_policy(std::uint64_t seed = 1) {
    Rng rng(seed);
    rl::DqnConfig cfg;
    cfg.hidden = {8};
    return std::make_shared<const rl::QNetwork>(
        rl::make_qnetwork(rl::default_state_encoder().dim(), default_registry().size(), cfg, rng));
}

std::vector<std::string> order_of(const Json& body) { return body.at("order").get<std::vector<std::string>>(); }

}  // namespace

TEST_CASE("post_events acknowledgement and validation") {
    Service svc(config(Mode::static_default));
    auto r = svc.post_events(batch({event("s1", "Acknowledge_Alert"), event("s1", "Block_IP"), event("s2", "View_Summary")}));
    CHECK(r.status == 200);
    CHECK(r.body == Json{{"accepted", 3}, {"rejected", 0}});

    auto bad = svc.post_events(batch({event("s1", "Acknowledge_Alert"), event("s1", "Dance")}));
    CHECK(bad.status == 400);
    CHECK(bad.body.at("index") == 1);
    CHECK(bad.body.at("error").get<std::string>().find("Dance") != std::string::npos);

    CHECK(svc.post_events("{not json").status == 400);
    CHECK(svc.post_events("{}").status == 400);
    CHECK(svc.post_events(R"([{"session_id":"s","target":"Block_IP","dwell_ms":-1}])").status == 400);
    CHECK(svc.post_events(R"([{"session_id":"","target":"Block_IP"}])").status == 400);
    CHECK(svc.post_events(R"([{"session_id":"s","target":"Block_IP","clicked":"yes"}])").status == 400);
    CHECK(svc.post_events(R"([{"session_id":"s","target":"Block_IP","card_id":"nowhere"}])").status == 400);
    CHECK(svc.post_events(batch({event("s", "Block_IP")}), "intern").status == 400);

    Json big = Json::array();
    for (int i = 0; i < 1'001; ++i) big.push_back(event("s", "Block_IP"));
    CHECK(svc.post_events(big.dump()).status == 413);
    CHECK(svc.post_events(Json::array().dump()).body == Json{{"accepted", 0}, {"rejected", 0}});
}

TEST_CASE("opt-out contract") {
    Service svc(config(Mode::rules));
    CHECK(svc.post_optout(R"({"session_id":"u1","opt_out":true})").status == 200);
    auto r = svc.post_events(batch({event("u1", "Investigate_Alert"), event("u1", "Investigate_Alert")}));
    CHECK(r.body == Json{{"accepted", 0}, {"rejected", 2}});

    auto l = svc.get_layout("u1");
    CHECK(order_of(l.body) == default_layout(default_registry()).order);
    CHECK(l.body.at("adapted") == false);

    svc.post_optout(R"({"session_id":"u1","opt_out":false})");
    CHECK(svc.post_events(batch({event("u1", "Investigate_Alert")})).body.at("accepted") == 1);
    CHECK(svc.get_layout("u1").body.at("adapted") == true);

    CHECK(svc.post_optout(R"({"session_id":"u1"})").status == 400);
    CHECK(svc.post_optout("[]").status == 400);
}

TEST_CASE("get_layout per mode") {
    const auto def = default_layout(default_registry());
    Service plain(config(Mode::static_default));
    auto cold = plain.get_layout("fresh");
    CHECK(cold.status == 200);
    CHECK(order_of(cold.body) == def.order);
    CHECK(cold.body.at("adapted") == false);
    CHECK(cold.body.at("poll_ms") == kDefaultPollMs);
    CHECK(cold.body.at("columns") == 3);
    CHECK(cold.body.at("session").get<std::string>().size() == 16);
    CHECK_FALSE(cold.body.contains("warning"));
    CHECK(plain.get_layout("").status == 400);

    Service rules(config(Mode::rules));
    rules.post_events(batch({event("r", "Investigate_Alert")}));
    auto promoted = rules.get_layout("r");
    CHECK(order_of(promoted.body).front() == "ip_details");
    CHECK(promoted.body.at("adapted") == true);
    CHECK(promoted.body.at("layout_id") == "L3");
    CHECK(promoted.body.at("emphasis").at("ip_details") == "highlighted");

    Service lstm(config(Mode::lstm), {grammar_model(), nullptr});
    lstm.post_events(batch({event("g", "Open_Charts"), event("g", "Acknowledge_Alert")}));
    auto predicted = lstm.get_layout("g");
    CHECK(order_of(predicted.body).front() == "ip_details");
    CHECK(predicted.body.at("adapted") == true);
    CHECK(predicted.body.at("layout_id") == "L2");

    Service combined(config(Mode::combined), {grammar_model(), small_policy()});
    combined.post_events(batch({event("c", "Block_IP")}));
    auto both = combined.get_layout("c");
    CHECK(order_of(both.body).front() == "charts");
    CHECK(is_permutation_of_registry(order_of(both.body), default_registry()));
}

TEST_CASE("missing models fall back to the default layout") {
    const auto def = default_layout(default_registry());
    for (Mode m : {Mode::lstm, Mode::dqn, Mode::combined}) {
        Service svc(config(m));
        svc.post_events(batch({event("x", "Investigate_Alert")}));
        auto l = svc.get_layout("x");
        CHECK(l.status == 200);
        CHECK(order_of(l.body) == def.order);
        CHECK(l.body.at("adapted") == false);
        CHECK(l.body.contains("warning"));
        CHECK(svc.health().body.contains("warning"));
    }
    Service svc(config(Mode::dqn));
    CHECK_FALSE(svc.get_layout("y").body.at("adapted"));
    svc.swap_models({nullptr, small_policy()});
    CHECK_FALSE(svc.get_layout("y").body.contains("warning"));
}

TEST_CASE("get_ranking") {
    Service none(config(Mode::rules));
    CHECK(none.get_ranking("s").status == 503);

    Service svc(config(Mode::dqn), {nullptr, small_policy(3)});
    auto a = svc.get_ranking("s");
    REQUIRE(a.status == 200);
    auto order = order_of(a.body);
    CHECK(is_permutation_of_registry(order, default_registry()));
    double sum = 0.0;
    for (double w : a.body.at("weights")) sum += w;
    CHECK(sum == doctest::Approx(1.0));
    CHECK(svc.get_ranking("s").body == a.body);

    // One event on a cold session changes only the most recent action block.
    auto enc = rl::default_state_encoder();
    std::vector<std::string> none_hist, one = {"Block_IP"};
    auto before = enc.encode({"analyst", none_hist, 0.0, ""});
    auto after = enc.encode({"analyst", one, 0.0, ""});
    for (std::size_t i = 0; i < enc.dim(); ++i)
        if (i < enc.action_block_offset(0) || i >= enc.action_block_offset(1)) CHECK(before.features[i] == after.features[i]);
    svc.post_events(batch({event("s", "Block_IP")}));
    auto b = svc.get_ranking("s");
    CHECK(b.status == 200);
    CHECK(is_permutation_of_registry(order_of(b.body), default_registry()));
}

TEST_CASE("post_reward journals transitions") {
    auto path = std::filesystem::temp_directory_path() / "aui_reward_journal_test.jsonl";
    std::filesystem::remove(path);
    auto cfg = config(Mode::dqn);
    cfg.journal = path;
    Service svc(cfg, {nullptr, small_policy()});

    CHECK(svc.post_reward(R"({"session_id":"ghost","clicked":true})").status == 404);
    svc.post_events(batch({event("raw-user-77", "Acknowledge_Alert")}));
    CHECK(svc.post_reward(R"({"session_id":"raw-user-77","clicked":true})").status == 409);
    CHECK(svc.forwarded_rewards() == 1);

    svc.get_layout("raw-user-77");
    auto click = svc.post_reward(R"({"session_id":"raw-user-77","clicked":true,"dwell_ms":10000})");
    CHECK(click.status == 200);
    CHECK(click.body.at("reward").get<double>() > 0.0);
    auto skip = svc.post_reward(R"({"session_id":"raw-user-77","skipped":true})");
    CHECK(skip.body.at("reward").get<double>() < 0.0);
    CHECK(svc.post_reward(R"({"session_id":"raw-user-77","dwell_ms":"long"})").status == 400);

    auto journal = read_journal(path);
    REQUIRE(journal.size() == 2);
    CHECK(journal[0].r == doctest::Approx(1.5));
    CHECK(journal[1].r == doctest::Approx(-0.2));
    CHECK(journal[0].s.features.size() == rl::default_state_encoder().dim());
    CHECK(svc.health().body.at("journal_lines") == 2);

    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("raw-user-77") == std::string::npos);

    svc.post_optout(R"({"session_id":"raw-user-77","opt_out":true})");
    CHECK(svc.post_reward(R"({"session_id":"raw-user-77","clicked":true})").status == 403);
    CHECK(read_journal(path).size() == 2);
    std::filesystem::remove(path);
}

TEST_CASE("SessionStore evicts least recently used") {
    SessionStore store(2);
    auto tok = [](const char* s) { return hash_session_id(s, kSalt); };
    store.with_session(tok("a"), "analyst", [](SessionState&) { return 0; });
    store.with_session(tok("b"), "analyst", [](SessionState&) { return 0; });
    store.with_session(tok("a"), "analyst", [](SessionState&) { return 0; });
    store.with_session(tok("c"), "manager", [](SessionState&) { return 0; });
    CHECK(store.size() == 2);
    CHECK(store.contains(tok("a")));
    CHECK_FALSE(store.contains(tok("b")));
    CHECK(store.with_session(tok("c"), "analyst", [](SessionState& s) { return s.role; }) == "manager");
    CHECK_THROWS(SessionStore(0));
}

TEST_CASE("service configuration") {
    CHECK(parse_mode("combined") == Mode::combined);
    CHECK(parse_mode("default") == Mode::static_default);
    CHECK_THROWS(parse_mode("fancy"));
    auto c = config(Mode::rules);
    c.salt = "short";
    CHECK_THROWS(Service(c));
    auto h = Service(config(Mode::rules)).health();
    CHECK(h.body.at("status") == "ok");
    CHECK(h.body.at("mode") == "rules");
}

TEST_CASE("HTTP loopback round trip") {
    Service svc(config(Mode::combined), {grammar_model(), small_policy()});
    HttpServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);

    auto posted = client.Post("/api/events", batch({event("loop", "Acknowledge_Alert")}), "application/json");
    REQUIRE(posted);
    CHECK(posted->status == 200);
    CHECK(Json::parse(posted->body).at("accepted") == 1);

    httplib::Headers headers = {{std::string(kRoleHeader), "responder"}};
    auto layout = client.Get("/api/layout?session=loop", headers);
    REQUIRE(layout);
    CHECK(layout->status == 200);
    auto body = Json::parse(layout->body);
    CHECK(is_permutation_of_registry(order_of(body), default_registry()));
    CHECK(order_of(body).front() == "ip_details");
    CHECK(body.at("adapted") == true);
    CHECK(layout->body.find("loop\"") == std::string::npos);

    auto ranking = client.Get("/api/ranking?session=loop");
    REQUIRE(ranking);
    CHECK(ranking->status == 200);
    auto reward = client.Post("/api/reward", R"({"session_id":"loop","clicked":true})", "application/json");
    REQUIRE(reward);
    CHECK(reward->status == 200);
    auto bad = client.Post("/api/events", "nope", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(Json::parse(health->body).at("status") == "ok");
    CHECK(svc.median_latency_ms() < 50.0);
    server.stop();
}
