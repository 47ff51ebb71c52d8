// Layout strategies: each turns the current session context into a layout.
// Shared by the simulator and the service.

#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "aui/domain.hpp"
#include "aui/predictor.hpp"
#include "aui/prioritizer.hpp"
#include "aui/rules.hpp"

namespace aui {

struct ServeContext {
    std::string role = "analyst";
    std::span<const std::string> history;  // oldest first
    double duration_minutes = 0.0;
    std::string current_top_card;          // empty before the first layout
    std::string intended_action;           // read only by the oracle
};

class Strategy {
public:
    virtual ~Strategy() = default;
    virtual std::string label() const = 0;
    virtual LayoutConfig serve(const ServeContext& ctx) const = 0;
};

inline constexpr std::string_view kDefaultLabel = "L1_Default";
inline constexpr std::string_view kRulesLabel = "L3_RuleBased";
inline constexpr std::string_view kLstmLabel = "L2_AI_LSTM";
inline constexpr std::string_view kDqnLabel = "L2_AI_DQN";
inline constexpr std::string_view kCombinedLabel = "L2_AI_Combined";
inline constexpr std::string_view kOracleLabel = "Oracle";

class DefaultStrategy : public Strategy {
public:
    explicit DefaultStrategy(CardRegistry registry = default_registry()) : registry_(std::move(registry)) {}
    std::string label() const override { return std::string(kDefaultLabel); }
    LayoutConfig serve(const ServeContext& ctx) const override;

private:
    CardRegistry registry_;
};

class RulesStrategy : public Strategy {
public:
    explicit RulesStrategy(rules::RuleSet rules, CardRegistry registry = default_registry())
        : rules_(std::move(rules)), registry_(std::move(registry)) {}
    std::string label() const override { return std::string(kRulesLabel); }
    LayoutConfig serve(const ServeContext& ctx) const override;

private:
    rules::RuleSet rules_;
    CardRegistry registry_;
};

/// Promotes the card of the predicted next action.
class LstmStrategy : public Strategy {
public:
    LstmStrategy(std::shared_ptr<const predictor::PredictorModel> model,
                 predictor::LayoutRules layout_rules = predictor::default_layout_rules(),
                 CardRegistry registry = default_registry());
    std::string label() const override { return std::string(kLstmLabel); }
    LayoutConfig serve(const ServeContext& ctx) const override;

private:
    std::shared_ptr<const predictor::PredictorModel> model_;
    predictor::LayoutRules layout_rules_;
    CardRegistry registry_;
};

/// Orders cards by descending Q-value; the top card is highlighted.
class DqnStrategy : public Strategy {
public:
    DqnStrategy(std::shared_ptr<const rl::QNetwork> policy, rl::StateEncoder encoder = rl::default_state_encoder());
    std::string label() const override { return std::string(kDqnLabel); }
    LayoutConfig serve(const ServeContext& ctx) const override;
    const CardRegistry& registry() const { return encoder_.registry(); }

private:
    std::shared_ptr<const rl::QNetwork> policy_;
    rl::StateEncoder encoder_;
};

/// DQN ranking with the LSTM-predicted card moved to the top.
class CombinedStrategy : public Strategy {
public:
    CombinedStrategy(std::shared_ptr<const predictor::PredictorModel> model,
                     std::shared_ptr<const rl::QNetwork> policy,
                     predictor::LayoutRules layout_rules = predictor::default_layout_rules(),
                     rl::StateEncoder encoder = rl::default_state_encoder());
    std::string label() const override { return std::string(kCombinedLabel); }
    LayoutConfig serve(const ServeContext& ctx) const override;

private:
    DqnStrategy ranking_;
    std::shared_ptr<const predictor::PredictorModel> model_;
    predictor::LayoutRules layout_rules_;
};

/// Evaluation-only upper bound: promotes the card of the action the user is
/// about to take.
class OracleStrategy : public Strategy {
public:
    explicit OracleStrategy(predictor::LayoutRules layout_rules = predictor::default_layout_rules(),
                            CardRegistry registry = default_registry())
        : layout_rules_(std::move(layout_rules)), registry_(std::move(registry)) {}
    std::string label() const override { return std::string(kOracleLabel); }
    LayoutConfig serve(const ServeContext& ctx) const override;

private:
    predictor::LayoutRules layout_rules_;
    CardRegistry registry_;
};

}  // namespace aui
