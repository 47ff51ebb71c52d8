// Rule-based personalization baseline: "if the user did X, show Y".

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aui/domain.hpp"

namespace aui::rules {

inline constexpr std::string_view kRulesLayoutId = "L3";

enum class TriggerKind { last_action, action_count };

struct Trigger {
    TriggerKind kind = TriggerKind::last_action;
    std::string action;
    std::size_t min_count = 1;  // action_count only

    bool matches(std::span<const std::string> history) const;
    bool operator==(const Trigger&) const = default;
};

struct Rule {
    int priority = 0;  // lower value is evaluated first
    Trigger trigger;
    std::string card_id;
    bool highlight = false;

    bool operator==(const Rule&) const = default;
};

class RuleSet {
public:
    RuleSet() = default;
    /// Sorts by priority; throws on duplicate priorities.
    explicit RuleSet(std::vector<Rule> rules);

    const std::vector<Rule>& rules() const { return rules_; }
    bool empty() const { return rules_.empty(); }

    /// First rule (in priority order) whose trigger matches, if any.
    const Rule* first_match(std::span<const std::string> history) const;

    /// Throws unless every trigger names a vocabulary action and every effect a
    /// registered card.
    void validate(const ActionVocab& vocab, const CardRegistry& registry) const;

    /// One rule per line: `priority|last:ACTION|promote:card[,highlight]` or
    /// `priority|count:ACTION>=n|promote:card[,highlight]`. '#' starts a comment.
    std::string to_text() const;
    static RuleSet from_text(std::string_view text);

    bool operator==(const RuleSet&) const = default;

private:
    std::vector<Rule> rules_;
};

/// Hand-written SOC rules covering alert triage, log review and IP handling.
RuleSet default_soc_ruleset();

/// Layout from the first matching rule; the default layout (adapted=false)
/// when nothing matches. Pure function of its arguments.
LayoutConfig apply_rules(const RuleSet& rules, std::span<const std::string> history, const CardRegistry& registry);

}  // namespace aui::rules
