#include "aui/rules.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace aui::rules {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) return out;
        start = pos + 1;
    }
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

}  // namespace

bool Trigger::matches(std::span<const std::string> history) const {
    if (history.empty()) return false;
    if (kind == TriggerKind::last_action) return history.back() == action;
    auto n = static_cast<std::size_t>(std::count(history.begin(), history.end(), action));
    return n >= min_count;
}

RuleSet::RuleSet(std::vector<Rule> rules) : rules_(std::move(rules)) {
    std::stable_sort(rules_.begin(), rules_.end(), [](const Rule& a, const Rule& b) { return a.priority < b.priority; });
    for (std::size_t i = 1; i < rules_.size(); ++i)
        if (rules_[i].priority == rules_[i - 1].priority)
            throw std::invalid_argument("duplicate rule priority " + std::to_string(rules_[i].priority));
}

const Rule* RuleSet::first_match(std::span<const std::string> history) const {
    for (const auto& r : rules_)
        if (r.trigger.matches(history)) return &r;
    return nullptr;
}

void RuleSet::validate(const ActionVocab& vocab, const CardRegistry& registry) const {
    for (const auto& r : rules_) {
        auto id = vocab.find(r.trigger.action);
        if (!id || !vocab.is_action(*id))
            throw std::invalid_argument("rule " + std::to_string(r.priority) + ": unknown action \"" + r.trigger.action +
                                        "\"");
        if (!registry.contains(r.card_id))
            throw std::invalid_argument("rule " + std::to_string(r.priority) + ": unknown card \"" + r.card_id + "\"");
        if (r.trigger.kind == TriggerKind::action_count && r.trigger.min_count == 0)
            throw std::invalid_argument("rule " + std::to_string(r.priority) + ": count threshold must be positive");
    }
}

std::string RuleSet::to_text() const {
    std::ostringstream out;
    for (const auto& r : rules_) {
        out << r.priority << '|';
        if (r.trigger.kind == TriggerKind::last_action)
            out << "last:" << r.trigger.action;
        else
            out << "count:" << r.trigger.action << ">=" << r.trigger.min_count;
        out << "|promote:" << r.card_id << (r.highlight ? ",highlight" : "") << '\n';
    }
    return out.str();
}

RuleSet RuleSet::from_text(std::string_view text) {
    std::vector<Rule> rules;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fail = [&](const std::string& what) {
            throw std::invalid_argument("rules line " + std::to_string(line_no) + ": " + what);
        };
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }),
                   line.end());
        if (line.empty()) continue;

        auto fields = split(line, '|');
        if (fields.size() != 3) fail("expected priority|trigger|promote:card");
        Rule rule;
        auto priority = parse_number<int>(fields[0]);
        if (!priority) fail("bad priority \"" + fields[0] + "\"");
        rule.priority = *priority;

        const std::string& trig = fields[1];
        if (trig.rfind("last:", 0) == 0) {
            rule.trigger = {TriggerKind::last_action, trig.substr(5), 1};
        } else if (trig.rfind("count:", 0) == 0) {
            auto body = trig.substr(6);
            auto ge = body.find(">=");
            if (ge == std::string::npos) fail("count trigger needs ACTION>=n");
            auto n = parse_number<std::size_t>(std::string_view(body).substr(ge + 2));
            if (!n || *n == 0) fail("bad count threshold in \"" + trig + "\"");
            rule.trigger = {TriggerKind::action_count, body.substr(0, ge), *n};
        } else {
            fail("unknown trigger \"" + trig + "\"");
        }
        if (rule.trigger.action.empty()) fail("trigger names no action");

        const std::string& effect = fields[2];
        if (effect.rfind("promote:", 0) != 0) fail("unknown effect \"" + effect + "\"");
        auto parts = split(effect.substr(8), ',');
        rule.card_id = parts[0];
        if (rule.card_id.empty()) fail("effect names no card");
        if (parts.size() > 2 || (parts.size() == 2 && parts[1] != "highlight"))
            fail("bad effect modifier in \"" + effect + "\"");
        rule.highlight = parts.size() == 2;
        rules.push_back(std::move(rule));
    }
    return RuleSet(std::move(rules));
}

RuleSet default_soc_ruleset() {
    // Analysts who open the log repeatedly keep working in it.
    return RuleSet::from_text(
        "10|count:Open_Event_Log>=2|promote:event_log,highlight\n"
        "20|last:Investigate_Alert|promote:ip_details,highlight\n"
        "30|last:Acknowledge_Alert|promote:alerts_feed\n"
        "40|last:Expand_IP_Details|promote:ip_details\n"
        "50|last:Block_IP|promote:quick_actions,highlight\n"
        "60|last:Open_Event_Log|promote:event_log\n");
}

LayoutConfig apply_rules(const RuleSet& rules, std::span<const std::string> history, const CardRegistry& registry) {
    const LayoutConfig base = default_layout(registry);
    const Rule* rule = rules.first_match(history);
    if (!rule) return base;
    LayoutConfig out = base;
    out.layout_id = std::string(kRulesLayoutId);
    promote_card(out, rule->card_id, rule->highlight ? Emphasis::highlighted : Emphasis::normal);
    out.adapted = layout_differs(out, base);
    return out;
}

}  // namespace aui::rules
