#include "aui/strategy.hpp"

#include <stdexcept>

namespace aui {

LayoutConfig DefaultStrategy::serve(const ServeContext&) const { return default_layout(registry_); }

LayoutConfig RulesStrategy::serve(const ServeContext& ctx) const {
    return rules::apply_rules(rules_, ctx.history, registry_);
}

LstmStrategy::LstmStrategy(std::shared_ptr<const predictor::PredictorModel> model, predictor::LayoutRules layout_rules,
                           CardRegistry registry)
    : model_(std::move(model)), layout_rules_(std::move(layout_rules)), registry_(std::move(registry)) {
    if (!model_) throw std::invalid_argument("LSTM strategy needs a model");
}

LayoutConfig LstmStrategy::serve(const ServeContext& ctx) const {
    auto p = predictor::predict_next(*model_, ctx.history);
    return predictor::generate_layout(p.best, layout_rules_, registry_);
}

DqnStrategy::DqnStrategy(std::shared_ptr<const rl::QNetwork> policy, rl::StateEncoder encoder)
    : policy_(std::move(policy)), encoder_(std::move(encoder)) {
    if (!policy_) throw std::invalid_argument("DQN strategy needs a policy");
    if (policy_->state_dim() != encoder_.dim())
        throw std::invalid_argument("policy expects " + std::to_string(policy_->state_dim()) +
                                    " state features, encoder produces " + std::to_string(encoder_.dim()));
    if (policy_->action_count() != encoder_.registry().size())
        throw std::invalid_argument("policy action count does not match the card registry");
}

LayoutConfig DqnStrategy::serve(const ServeContext& ctx) const {
    const auto& reg = encoder_.registry();
    auto state = encoder_.encode({ctx.role, {ctx.history.begin(), ctx.history.end()}, ctx.duration_minutes,
                                  ctx.current_top_card});
    auto ranking = rl::rank_content(*policy_, state, reg);
    const LayoutConfig base = default_layout(reg);
    LayoutConfig out = base;
    out.layout_id = std::string(predictor::kLstmLayoutId);
    out.order = ranking.order;
    out.emphasis[out.order.front()] = Emphasis::highlighted;
    out.adapted = layout_differs(out, base);
    return out;
}

CombinedStrategy::CombinedStrategy(std::shared_ptr<const predictor::PredictorModel> model,
                                   std::shared_ptr<const rl::QNetwork> policy, predictor::LayoutRules layout_rules,
                                   rl::StateEncoder encoder)
    : ranking_(std::move(policy), std::move(encoder)), model_(std::move(model)), layout_rules_(std::move(layout_rules)) {
    if (!model_) throw std::invalid_argument("combined strategy needs a model");
}

LayoutConfig CombinedStrategy::serve(const ServeContext& ctx) const {
    LayoutConfig out = ranking_.serve(ctx);
    auto p = predictor::predict_next(*model_, ctx.history);
    if (const auto* rule = layout_rules_.find(p.best)) {
        for (auto& [card, e] : out.emphasis) e = Emphasis::normal;
        promote_card(out, rule->card_id, rule->emphasis);
        for (const auto& [card, visible] : rule->visibility) out.visible[card] = visible;
    }
    out.adapted = layout_differs(out, default_layout(ranking_.registry()));
    return out;
}

LayoutConfig OracleStrategy::serve(const ServeContext& ctx) const {
    auto out = predictor::generate_layout(ctx.intended_action, layout_rules_, registry_);
    out.layout_id = "L0";
    return out;
}

}  // namespace aui
