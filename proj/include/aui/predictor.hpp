// Prediction engine: next-action LSTM over session histories, and the rule
// table that turns a predicted action into a layout.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aui/domain.hpp"
#include "aui/nn/adam.hpp"
#include "aui/nn/lstm.hpp"

namespace aui::predictor {

inline constexpr std::size_t kDefaultWindow = 8;

struct WindowExample {
    std::vector<TokenId> input;  // exactly `window` tokens, left-padded with <PAD>
    TokenId target = 0;

    bool operator==(const WindowExample&) const = default;
};

struct SequenceDataset {
    std::size_t window = kDefaultWindow;
    std::vector<WindowExample> examples;
};

/// Left-padded context window ending with the most recent action. An empty
/// history yields [<PAD>..., <START>].
std::vector<TokenId> context_window(std::span<const TokenId> history, std::size_t window);

/// One example per action: the action as target, its prefix (starting at
/// <START>) as input. Events are grouped by session token.
SequenceDataset build_sequences(std::span<const InteractionEvent> events, const ActionVocab& vocab, std::size_t window);
SequenceDataset build_sequences(std::span<const std::vector<std::string>> sessions, const ActionVocab& vocab,
                                std::size_t window);

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch = 32;
    double learning_rate = 5e-3;
    std::uint64_t seed = 1;
    std::size_t embed = 32;
    std::size_t hidden = 64;
    std::size_t layers = 2;
};

struct TrainingMetadata {
    std::size_t epochs = 0;
    double final_loss = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> epoch_losses;
};

struct PredictorModel {
    nn::PredictorParams params;
    ActionVocab vocab;
    std::size_t window = kDefaultWindow;
    TrainingMetadata meta;
};

/// Mini-batch Adam on masked cross-entropy. Bit-reproducible for a fixed seed.
PredictorModel train_predictor(const SequenceDataset& dataset, const ActionVocab& vocab, const TrainConfig& config);

/// Model with all-zero parameters (uniform predictions).
PredictorModel untrained_model(const ActionVocab& vocab, std::size_t window = kDefaultWindow,
                               const TrainConfig& shape = {});

struct Prediction {
    std::vector<std::string> actions;  // vocabulary actions in id order
    std::vector<double> probs;         // renormalized over actions
    std::string best;                  // argmax, lowest index on ties
};

/// Throws std::invalid_argument on an action outside the vocabulary.
Prediction predict_next(const PredictorModel& model, std::span<const std::string> history);

/// Fraction of positions (second action onwards) whose argmax prediction
/// matches the actual next action. Sessions with fewer than 2 actions are
/// skipped; throws if nothing is predictable.
double adaptation_accuracy(const PredictorModel& model, std::span<const std::vector<std::string>> sessions);

/// Writes `path` (checkpoint), `path.meta.json` and `path.vocab`.
void save_model(const PredictorModel& model, const std::filesystem::path& path);
PredictorModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Layout rules

struct LayoutRule {
    std::string card_id;
    Emphasis emphasis = Emphasis::highlighted;
    std::map<std::string, bool> visibility;

    bool operator==(const LayoutRule&) const = default;
};

class LayoutRules {
public:
    LayoutRules() = default;
    explicit LayoutRules(std::map<std::string, LayoutRule> rules) : rules_(std::move(rules)) {}

    const LayoutRule* find(std::string_view action) const;
    const std::map<std::string, LayoutRule>& rules() const { return rules_; }

    /// Throws unless every vocabulary action is mapped to a registered card.
    void validate(const ActionVocab& vocab, const CardRegistry& registry) const;

    /// `action=card_id[:emphasis]` per line; '#' starts a comment.
    std::string to_text() const;
    static LayoutRules from_text(std::string_view text);

    bool operator==(const LayoutRules&) const = default;

private:
    std::map<std::string, LayoutRule> rules_;
};

/// Each default SOC action promotes the card it is performed on, highlighted.
LayoutRules default_layout_rules();

/// Promotes the card mapped to `predicted_action` to slot 0 (stable), sets its
/// emphasis and applies visibility changes. `adapted` is set when the result
/// differs from `base` (the default layout when omitted). Unmapped actions
/// return `base` unchanged with adapted=false.
LayoutConfig generate_layout(std::string_view predicted_action, const LayoutRules& rules, const CardRegistry& registry,
                             const std::optional<LayoutConfig>& base = std::nullopt);

inline constexpr std::string_view kLstmLayoutId = "L2";

}  // namespace aui::predictor
