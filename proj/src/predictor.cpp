#include "aui/predictor.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "aui/nn/checkpoint.hpp"

namespace aui::predictor {

namespace {

std::vector<TokenId> tokenize(std::span<const std::string> names, const ActionVocab& vocab) {
    std::vector<TokenId> out;
    out.reserve(names.size());
    for (const auto& n : names) {
        auto id = vocab.find(n);
        if (!id || !vocab.is_action(*id)) throw std::invalid_argument("unknown action \"" + n + "\"");
        out.push_back(*id);
    }
    return out;
}

void append_session(SequenceDataset& ds, std::span<const TokenId> actions) {
    for (std::size_t j = 0; j < actions.size(); ++j)
        ds.examples.push_back({context_window(actions.first(j), ds.window), actions[j]});
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<TokenId> context_window(std::span<const TokenId> history, std::size_t window) {
    if (window < 2) throw std::invalid_argument("window must be at least 2");
    std::vector<TokenId> full;
    full.reserve(history.size() + 1);
    full.push_back(ActionVocab::kStart);
    full.insert(full.end(), history.begin(), history.end());
    std::vector<TokenId> out(window, ActionVocab::kPad);
    const std::size_t take = std::min(window, full.size());
    std::copy(full.end() - static_cast<std::ptrdiff_t>(take), full.end(), out.end() - static_cast<std::ptrdiff_t>(take));
    return out;
}

SequenceDataset build_sequences(std::span<const InteractionEvent> events, const ActionVocab& vocab, std::size_t window) {
    if (window < 2) throw std::invalid_argument("window must be at least 2");
    SequenceDataset ds;
    ds.window = window;
    for (const auto& session : group_by_session(events)) {
        std::vector<std::string> names;
        names.reserve(session.size());
        for (const auto& ev : session) names.push_back(ev.target);
        append_session(ds, tokenize(names, vocab));
    }
    return ds;
}

SequenceDataset build_sequences(std::span<const std::vector<std::string>> sessions, const ActionVocab& vocab,
                                std::size_t window) {
    if (window < 2) throw std::invalid_argument("window must be at least 2");
    SequenceDataset ds;
    ds.window = window;
    for (const auto& session : sessions) append_session(ds, tokenize(session, vocab));
    return ds;
}

PredictorModel untrained_model(const ActionVocab& vocab, std::size_t window, const TrainConfig& shape) {
    PredictorModel m;
    m.params = nn::zero_predictor({vocab.size(), shape.embed, shape.hidden, shape.layers});
    m.vocab = vocab;
    m.window = window;
    return m;
}

PredictorModel train_predictor(const SequenceDataset& dataset, const ActionVocab& vocab, const TrainConfig& config) {
    if (dataset.examples.empty()) throw std::invalid_argument("train_predictor: empty dataset");
    if (config.batch == 0 || config.epochs == 0) throw std::invalid_argument("train_predictor: epochs and batch must be positive");

    Rng rng(config.seed);
    PredictorModel model;
    model.vocab = vocab;
    model.window = dataset.window;
    model.params = nn::init_predictor({vocab.size(), config.embed, config.hidden, config.layers}, rng);
    model.meta.seed = config.seed;

    nn::AdamState adam;
    adam.config.learning_rate = config.learning_rate;

    std::vector<nn::SequenceExample> all;
    all.reserve(dataset.examples.size());
    for (const auto& ex : dataset.examples) {
        if (ex.input.size() != dataset.window) throw std::invalid_argument("example input length differs from window");
        nn::SequenceExample se{ex.input, std::vector<TokenId>(ex.input.size(), ActionVocab::kPad)};
        se.targets.back() = ex.target;
        all.push_back(std::move(se));
    }

    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<nn::SequenceExample> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            batch.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + config.batch); ++k) batch.push_back(all[order[k]]);
            auto lg = nn::predictor_loss_and_grads(model.params, batch);
            nn::adam_step(model.params, lg.grads, adam);
            loss_sum += lg.loss;
            ++batches;
        }
        model.meta.epoch_losses.push_back(loss_sum / static_cast<double>(batches));
    }
    model.meta.epochs = config.epochs;
    model.meta.final_loss = model.meta.epoch_losses.back();
    return model;
}

Prediction predict_next(const PredictorModel& model, std::span<const std::string> history) {
    auto tokens = tokenize(history, model.vocab);
    auto probs = nn::lstm_predict_last(model.params, context_window(tokens, model.window));
    Prediction p;
    p.actions = model.vocab.actions();
    double mass = 0.0;
    for (TokenId id = 2; id < probs.size(); ++id) mass += probs[id];
    for (TokenId id = 2; id < probs.size(); ++id) p.probs.push_back(probs[id] / mass);
    p.best = p.actions[argmax(p.probs)];
    return p;
}

double adaptation_accuracy(const PredictorModel& model, std::span<const std::vector<std::string>> sessions) {
    std::size_t total = 0;
    std::size_t correct = 0;
    for (const auto& session : sessions) {
        if (session.size() < 2) continue;
        for (std::size_t j = 1; j < session.size(); ++j) {
            auto pred = predict_next(model, std::span(session).first(j));
            correct += pred.best == session[j];
            ++total;
        }
    }
    if (total == 0) throw std::invalid_argument("adaptation_accuracy: no predictable positions");
    return static_cast<double>(correct) / static_cast<double>(total);
}

void save_model(const PredictorModel& model, const std::filesystem::path& path) {
    auto ckpt = nn::to_checkpoint(model.params);
    ckpt.meta["window"] = std::to_string(model.window);
    nn::save_checkpoint(path, ckpt);

    auto vocab_path = path;
    vocab_path += ".vocab";
    write_file(vocab_path, model.vocab.to_text());

    nlohmann::json meta = {
        {"vocab_file", vocab_path.filename().string()},
        {"window", model.window},
        {"seed", model.meta.seed},
        {"epochs", model.meta.epochs},
        {"final_loss", model.meta.final_loss},
        {"epoch_losses", model.meta.epoch_losses},
    };
    auto meta_path = path;
    meta_path += ".meta.json";
    write_file(meta_path, meta.dump(2) + "\n");
}

PredictorModel load_model(const std::filesystem::path& path) {
    PredictorModel model;
    model.params = nn::predictor_from_checkpoint(nn::load_checkpoint(path));
    auto meta_path = path;
    meta_path += ".meta.json";
    auto meta = nlohmann::json::parse(read_file(meta_path));
    model.vocab = ActionVocab::from_text(read_file(path.parent_path() / meta.at("vocab_file").get<std::string>()));
    model.window = meta.at("window").get<std::size_t>();
    model.meta.seed = meta.value("seed", std::uint64_t{0});
    model.meta.epochs = meta.value("epochs", std::size_t{0});
    model.meta.final_loss = meta.value("final_loss", 0.0);
    model.meta.epoch_losses = meta.value("epoch_losses", std::vector<double>{});
    if (model.params.vocab_size() != model.vocab.size())
        throw std::runtime_error("predictor checkpoint vocabulary size does not match its vocab file");
    return model;
}

// ---------------------------------------------------------------------------
// Layout rules

const LayoutRule* LayoutRules::find(std::string_view action) const {
    auto it = rules_.find(std::string(action));
    return it == rules_.end() ? nullptr : &it->second;
}

void LayoutRules::validate(const ActionVocab& vocab, const CardRegistry& registry) const {
    for (const auto& action : vocab.actions())
        if (!rules_.contains(action)) throw std::invalid_argument("no layout rule for action \"" + action + "\"");
    for (const auto& [action, rule] : rules_) {
        if (!registry.contains(rule.card_id))
            throw std::invalid_argument("rule for \"" + action + "\" promotes unknown card \"" + rule.card_id + "\"");
        for (const auto& [card, _] : rule.visibility)
            if (!registry.contains(card)) throw std::invalid_argument("rule for \"" + action + "\" hides unknown card");
    }
}

std::string LayoutRules::to_text() const {
    std::string out;
    for (const auto& [action, rule] : rules_) {
        out += action + "=" + rule.card_id + ":" + std::string(to_string(rule.emphasis));
        for (const auto& [card, vis] : rule.visibility) out += (vis ? ",+" : ",-") + card;
        out += "\n";
    }
    return out;
}

LayoutRules LayoutRules::from_text(std::string_view text) {
    std::map<std::string, LayoutRule> rules;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::invalid_argument("layout rules line " + std::to_string(line_no) + ": expected action=card_id");
        std::string action = line.substr(0, eq);
        std::string rest = line.substr(eq + 1);

        // Optional visibility suffixes: ,+card / ,-card
        LayoutRule rule;
        std::vector<std::string> parts;
        std::stringstream ss(rest);
        std::string part;
        while (std::getline(ss, part, ',')) parts.push_back(part);
        if (parts.empty() || parts[0].empty())
            throw std::invalid_argument("layout rules line " + std::to_string(line_no) + ": missing card id");
        auto colon = parts[0].find(':');
        rule.card_id = parts[0].substr(0, colon);
        if (colon != std::string::npos) rule.emphasis = parse_emphasis(parts[0].substr(colon + 1));
        for (std::size_t i = 1; i < parts.size(); ++i) {
            if (parts[i].size() < 2 || (parts[i][0] != '+' && parts[i][0] != '-'))
                throw std::invalid_argument("layout rules line " + std::to_string(line_no) + ": bad visibility entry");
            rule.visibility[parts[i].substr(1)] = parts[i][0] == '+';
        }
        if (!rules.emplace(action, std::move(rule)).second)
            throw std::invalid_argument("layout rules line " + std::to_string(line_no) + ": duplicate action \"" + action + "\"");
    }
    return LayoutRules(std::move(rules));
}

LayoutRules default_layout_rules() {
    std::map<std::string, LayoutRule> rules;
    for (const auto& [action, card] : default_action_cards()) rules[action] = LayoutRule{card, Emphasis::highlighted, {}};
    return LayoutRules(std::move(rules));
}

LayoutConfig generate_layout(std::string_view predicted_action, const LayoutRules& rules, const CardRegistry& registry,
                             const std::optional<LayoutConfig>& base) {
    const LayoutConfig start = base ? *base : default_layout(registry);
    LayoutConfig out = start;
    out.adapted = false;
    const LayoutRule* rule = rules.find(predicted_action);
    if (!rule || !registry.contains(rule->card_id)) return out;
    if (!out.order.empty() && out.order.front() == rule->card_id && rule->visibility.empty()) return out;

    promote_card(out, rule->card_id, rule->emphasis);
    for (const auto& [card, vis] : rule->visibility)
        if (registry.contains(card)) out.visible[card] = vis;
    out.adapted = layout_differs(out, start);
    if (out.adapted) out.layout_id = std::string(kLstmLayoutId);
    return out;
}

}  // namespace aui::predictor
