#include "doctest.h"

#include <filesystem>
#include <numeric>

#include "aui/predictor.hpp"

using namespace aui;
using namespace aui::predictor;

namespace {

ActionVocab abc_vocab() { return build_vocab(std::vector<std::string>{"A", "B", "C"}); }

// Sessions following A -> B -> C -> A from a random starting point.
std::vector<std::vector<std::string>> cyclic_sessions(std::size_t n, std::uint64_t seed) {
    const std::vector<std::string> cycle = {"A", "B", "C"};
    Rng rng(seed);
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pos = uniform_index(rng, cycle.size());
        std::size_t len = 3 + uniform_index(rng, 6);
        std::vector<std::string> s;
        for (std::size_t k = 0; k < len; ++k) s.push_back(cycle[(pos + k) % cycle.size()]);
        out.push_back(s);
    }
    return out;
}

TrainConfig small_config(std::size_t epochs, std::uint64_t seed = 1) {
    TrainConfig c;
    c.epochs = epochs;
    c.embed = 8;
    c.hidden = 16;
    c.layers = 2;
    c.batch = 16;
    c.learning_rate = 1e-2;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("build_sequences constructs left-padded windows") {
    auto vocab = abc_vocab();
    const TokenId A = vocab.id_of("A"), B = vocab.id_of("B");
    const TokenId P = ActionVocab::kPad, S = ActionVocab::kStart;

    std::vector<std::vector<std::string>> one = {{"A"}};
    auto ds1 = build_sequences(one, vocab, kDefaultWindow);
    REQUIRE(ds1.examples.size() == 1);
    CHECK(ds1.examples[0].input.back() == S);
    CHECK(ds1.examples[0].input.front() == P);
    CHECK(ds1.examples[0].target == A);

    std::vector<std::vector<std::string>> two = {{"A", "B"}};
    auto ds2 = build_sequences(two, vocab, 4);
    REQUIRE(ds2.examples.size() == 2);
    CHECK(ds2.examples[0] == WindowExample{{P, P, P, S}, A});
    CHECK(ds2.examples[1] == WindowExample{{P, P, S, A}, B});

    // Long histories keep only the most recent window.
    std::vector<std::vector<std::string>> longer = {{"A", "B", "C", "A", "B"}};
    auto ds3 = build_sequences(longer, vocab, 3);
    CHECK(ds3.examples.back().input == std::vector<TokenId>{B, vocab.id_of("C"), A});
    CHECK(ds3.examples.back().target == B);

    CHECK_THROWS(build_sequences(two, vocab, 1));
    std::vector<std::vector<std::string>> bad = {{"A", "Z"}};
    CHECK_THROWS(build_sequences(bad, vocab, 4));
}

TEST_CASE("build_sequences from events emits one pair per event") {
    auto vocab = default_soc_vocab();
    std::string text = std::string(kLogHeader) +
                       "\n2025-10-04,U115,L3,Investigate_Alert,8844\n"
                       "2025-10-07,U127,L1,Acknowledge_Alert,4887\n"
                       "2025-10-07,U117,L1,Open_Event_Log,6410\n"
                       "2025-10-20,U114,L3,Expand_IP_Details,13738\n"
                       "2025-10-05,U112,L2,Acknowledge_Alert,10767\n";
    auto events = parse_interaction_log(std::string_view(text), vocab);
    auto ds = build_sequences(events, vocab, kDefaultWindow);
    CHECK(ds.examples.size() == events.size());
}

TEST_CASE("train_predictor memorizes a single pair") {
    auto vocab = abc_vocab();
    std::vector<std::vector<std::string>> sessions(8, std::vector<std::string>{"B"});
    auto ds = build_sequences(sessions, vocab, 4);
    auto model = train_predictor(ds, vocab, small_config(200));
    CHECK(model.meta.final_loss < 0.01);
    CHECK(model.meta.epoch_losses.size() == 200);

    CHECK_THROWS(train_predictor(SequenceDataset{}, vocab, small_config(1)));
}

TEST_CASE("train_predictor is reproducible and loss trends down") {
    auto vocab = abc_vocab();
    auto sessions = cyclic_sessions(60, 3);
    auto ds = build_sequences(sessions, vocab, 6);
    auto a = train_predictor(ds, vocab, small_config(15, 9));
    auto b = train_predictor(ds, vocab, small_config(15, 9));
    CHECK(a.meta.epoch_losses == b.meta.epoch_losses);
    CHECK(a.params == b.params);
    const auto& L = a.meta.epoch_losses;
    for (std::size_t e = 1; e < L.size(); ++e) CHECK_MESSAGE(L[e] <= L[e - 1] * 1.05, "epoch " << e);
    CHECK(L.back() < L.front());
}

TEST_CASE("deterministic grammar is learned") {
    auto vocab = abc_vocab();
    auto train = cyclic_sessions(300, 1);
    auto test = cyclic_sessions(100, 2);
    auto model = train_predictor(build_sequences(train, vocab, kDefaultWindow), vocab, small_config(6));
    CHECK(adaptation_accuracy(model, test) >= 0.95);

    std::vector<std::string> hist = {"A"};
    auto p = predict_next(model, hist);
    CHECK(p.best == "B");
    CHECK(p.probs[1] > 0.9);
    CHECK(std::accumulate(p.probs.begin(), p.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));

    auto cold = predict_next(model, std::vector<std::string>{});
    CHECK(std::accumulate(cold.probs.begin(), cold.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS(predict_next(model, std::vector<std::string>{"Q"}));
}

TEST_CASE("zero-weight model predicts uniformly") {
    auto vocab = abc_vocab();
    auto model = untrained_model(vocab);
    for (const auto& hist : {std::vector<std::string>{}, std::vector<std::string>{"C", "A"}}) {
        auto p = predict_next(model, hist);
        for (double v : p.probs) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(p.best == "A");
    }
}

TEST_CASE("adaptation_accuracy extremes") {
    auto vocab = abc_vocab();
    auto model = untrained_model(vocab, 4);
    model.params.b_out[vocab.id_of("C")] = 5.0;  // always predicts C
    std::vector<std::vector<std::string>> right = {{"A", "C", "C"}, {"B", "C"}};
    std::vector<std::vector<std::string>> wrong = {{"A", "B", "A"}, {"C", "A"}};
    CHECK(adaptation_accuracy(model, right) == 1.0);
    CHECK(adaptation_accuracy(model, wrong) == 0.0);
    std::vector<std::vector<std::string>> none = {{"A"}};
    CHECK_THROWS(adaptation_accuracy(model, none));
}

TEST_CASE("predictor model save and load") {
    auto vocab = abc_vocab();
    auto model = train_predictor(build_sequences(cyclic_sessions(10, 4), vocab, 5), vocab, small_config(2));
    auto dir = std::filesystem::temp_directory_path() / "aui_predictor_test";
    std::filesystem::create_directories(dir);
    save_model(model, dir / "model.ckpt");
    auto back = load_model(dir / "model.ckpt");
    CHECK(back.params == model.params);
    CHECK(back.vocab == model.vocab);
    CHECK(back.window == 5);
    CHECK(back.meta.epoch_losses == model.meta.epoch_losses);
    std::filesystem::remove_all(dir);
}

TEST_CASE("generate_layout promotes the mapped card stably") {
    const auto& reg = default_registry();
    auto rules = default_layout_rules();
    CHECK_NOTHROW(rules.validate(default_soc_vocab(), reg));

    auto l = generate_layout("Investigate_Alert", rules, reg);
    CHECK(l.order == std::vector<std::string>{"alerts_feed", "summary", "event_log", "ip_details", "charts",
                                              "quick_actions"});
    CHECK(l.emphasis.at("alerts_feed") == Emphasis::highlighted);
    CHECK(l.adapted);
    CHECK_NOTHROW(validate_layout(l, reg));

    auto fixed = generate_layout("View_Summary", rules, reg);
    CHECK(fixed.order == default_layout(reg).order);
    CHECK_FALSE(fixed.adapted);

    auto unmapped = generate_layout("Nope", rules, reg);
    CHECK(unmapped == default_layout(reg));

    for (const auto& a : default_soc_actions()) {
        auto once = generate_layout(a, rules, reg);
        CHECK(is_permutation_of_registry(once.order, reg));
        auto twice = generate_layout(a, rules, reg, once);
        CHECK(twice.order == once.order);
        CHECK(twice.emphasis == once.emphasis);
    }
}

TEST_CASE("layout rules text format") {
    auto rules = default_layout_rules();
    CHECK(LayoutRules::from_text(rules.to_text()) == rules);

    auto custom = LayoutRules::from_text("# comment\nA=alerts_feed\nB=charts:normal,-quick_actions\n");
    REQUIRE(custom.find("A") != nullptr);
    CHECK(custom.find("A")->emphasis == Emphasis::highlighted);
    CHECK(custom.find("B")->emphasis == Emphasis::normal);
    CHECK(custom.find("B")->visibility.at("quick_actions") == false);
    CHECK(LayoutRules::from_text(custom.to_text()) == custom);

    auto l = generate_layout("B", custom, default_registry());
    CHECK(l.order.front() == "charts");
    CHECK(l.visible.at("quick_actions") == false);

    CHECK_THROWS(LayoutRules::from_text("A=alerts_feed\nA=charts\n"));
    CHECK_THROWS(LayoutRules::from_text("novalue\n"));
    CHECK_THROWS(custom.validate(abc_vocab(), default_registry()));  // C unmapped
}
