#include "aui/domain.hpp"

#include <sodium.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace aui {

namespace {

std::string line_error(std::size_t line, const std::string& what) {
    return "line " + std::to_string(line) + ": " + what;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
    Int v{};
    if (s.empty()) return std::nullopt;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ActionVocab

ActionVocab::ActionVocab() {
    names_ = {std::string(kPadName), std::string(kStartName)};
    index_.emplace(names_[0], kPad);
    index_.emplace(names_[1], kStart);
}

ActionVocab ActionVocab::build(std::span<const std::string> action_names) {
    ActionVocab v;
    for (const auto& name : action_names) {
        if (name.empty()) throw std::invalid_argument("empty action name");
        if (v.index_.contains(name)) throw std::invalid_argument("duplicate action name \"" + name + "\"");
        v.index_.emplace(name, v.names_.size());
        v.names_.push_back(name);
    }
    return v;
}

std::optional<TokenId> ActionVocab::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenId ActionVocab::id_of(std::string_view name) const {
    auto id = find(name);
    if (!id) throw std::invalid_argument("unknown action \"" + std::string(name) + "\"");
    return *id;
}

const std::string& ActionVocab::name_of(TokenId id) const {
    if (id >= names_.size()) throw std::out_of_range("token id " + std::to_string(id) + " out of range");
    return names_[id];
}

std::vector<std::string> ActionVocab::actions() const {
    return {names_.begin() + 2, names_.end()};
}

std::string ActionVocab::to_text() const {
    std::string out;
    for (std::size_t i = 0; i < names_.size(); ++i) out += std::to_string(i) + "," + names_[i] + "\n";
    return out;
}

ActionVocab ActionVocab::from_text(std::string_view text) {
    std::vector<std::string> actions;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw std::invalid_argument(line_error(line_no, "expected id,name"));
        auto id = parse_int<std::size_t>(std::string_view(line).substr(0, comma));
        std::string name = line.substr(comma + 1);
        if (!id) throw std::invalid_argument(line_error(line_no, "bad token id"));
        std::size_t expected = actions.size() + 2;
        if (*id == kPad && name == kPadName) continue;
        if (*id == kStart && name == kStartName) continue;
        if (*id != expected) throw std::invalid_argument(line_error(line_no, "token ids must be dense"));
        actions.push_back(std::move(name));
    }
    return build(actions);
}

ActionVocab build_vocab(std::span<const std::string> action_names) { return ActionVocab::build(action_names); }

// ---------------------------------------------------------------------------
// Session hashing

SessionToken hash_session_id(std::string_view raw_id, std::string_view salt) {
    if (salt.size() < kMinSaltBytes)
        throw std::invalid_argument("salt must be at least " + std::to_string(kMinSaltBytes) + " bytes");
    if (salt.size() > kMaxSaltBytes)
        throw std::invalid_argument("salt must be at most " + std::to_string(kMaxSaltBytes) + " bytes");
    static const bool ready = sodium_init() >= 0;
    if (!ready) throw std::runtime_error("libsodium initialisation failed");

    unsigned char digest[8];
    crypto_generichash(digest, sizeof digest, reinterpret_cast<const unsigned char*>(raw_id.data()), raw_id.size(),
                       reinterpret_cast<const unsigned char*>(salt.data()), salt.size());
    char hex[2 * sizeof digest + 1];
    sodium_bin2hex(hex, sizeof hex, digest, sizeof digest);
    return SessionToken{std::string(hex, 2 * sizeof digest)};
}

// ---------------------------------------------------------------------------
// Interaction log

std::chrono::year_month_day parse_date(std::string_view text) {
    using namespace std::chrono;
    auto parts = split(text, '-');
    if (text.size() != 10 || parts.size() != 3) throw std::invalid_argument("bad date \"" + std::string(text) + "\"");
    auto y = parse_int<int>(parts[0]);
    auto m = parse_int<unsigned>(parts[1]);
    auto d = parse_int<unsigned>(parts[2]);
    if (!y || !m || !d) throw std::invalid_argument("bad date \"" + std::string(text) + "\"");
    year_month_day ymd{year{*y}, month{*m}, day{*d}};
    if (!ymd.ok()) throw std::invalid_argument("bad date \"" + std::string(text) + "\"");
    return ymd;
}

std::string format_date(std::chrono::year_month_day date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

bool is_layout_label(std::string_view text) {
    return text.size() >= 2 && text[0] == 'L' &&
           std::all_of(text.begin() + 1, text.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<InteractionEvent> parse_interaction_log(std::istream& in, const ActionVocab& vocab) {
    std::vector<InteractionEvent> events;
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!seen_header) {
            seen_header = true;
            if (line == kLogHeader) continue;
            throw std::invalid_argument(line_error(line_no, "expected header \"" + std::string(kLogHeader) + "\""));
        }
        auto cols = split(line, ',');
        if (cols.size() != 5) throw std::invalid_argument(line_error(line_no, "expected 5 columns"));

        InteractionEvent ev;
        try {
            ev.date = parse_date(cols[0]);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(line_error(line_no, e.what()));
        }
        if (cols[1].empty()) throw std::invalid_argument(line_error(line_no, "empty user"));
        ev.session = SessionToken{std::string(cols[1])};
        if (!is_layout_label(cols[2]))
            throw std::invalid_argument(line_error(line_no, "bad layout id \"" + std::string(cols[2]) + "\""));
        ev.layout_id = std::string(cols[2]);
        auto id = vocab.find(cols[3]);
        if (!id || !vocab.is_action(*id))
            throw std::invalid_argument(line_error(line_no, "unknown action \"" + std::string(cols[3]) + "\""));
        ev.target = std::string(cols[3]);
        auto dwell = parse_int<std::int64_t>(cols[4]);
        if (!dwell || *dwell < 0)
            throw std::invalid_argument(line_error(line_no, "malformed dwell \"" + std::string(cols[4]) + "\""));
        ev.dwell_ms = *dwell;
        events.push_back(std::move(ev));
    }
    return events;
}

std::vector<InteractionEvent> parse_interaction_log(std::string_view text, const ActionVocab& vocab) {
    std::istringstream in{std::string(text)};
    return parse_interaction_log(in, vocab);
}

std::string serialize_interaction_log(std::span<const InteractionEvent> events) {
    std::string out(kLogHeader);
    out += '\n';
    for (const auto& ev : events) {
        out += format_date(ev.date);
        out += ',';
        out += ev.session.value;
        out += ',';
        out += ev.layout_id;
        out += ',';
        out += ev.target;
        out += ',';
        out += std::to_string(ev.dwell_ms);
        out += '\n';
    }
    return out;
}

std::vector<std::vector<InteractionEvent>> group_by_session(std::span<const InteractionEvent> events) {
    std::vector<std::vector<InteractionEvent>> sessions;
    std::unordered_map<std::string, std::size_t> slot;
    for (const auto& ev : events) {
        auto [it, inserted] = slot.try_emplace(ev.session.value, sessions.size());
        if (inserted) sessions.emplace_back();
        sessions[it->second].push_back(ev);
    }
    return sessions;
}

// ---------------------------------------------------------------------------
// Cards and layouts

std::string_view to_string(CardCategory c) {
    switch (c) {
        case CardCategory::alerts: return "alerts";
        case CardCategory::events: return "events";
        case CardCategory::details: return "details";
        case CardCategory::summary: return "summary";
        case CardCategory::charts: return "charts";
        case CardCategory::actions: return "actions";
    }
    return "?";
}

CardRegistry::CardRegistry(std::vector<ContentCard> cards) : cards_(std::move(cards)) {
    if (cards_.empty()) throw std::invalid_argument("card registry must not be empty");
    for (std::size_t i = 0; i < cards_.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (cards_[i].card_id == cards_[j].card_id)
                throw std::invalid_argument("duplicate card id \"" + cards_[i].card_id + "\"");
}

std::optional<std::size_t> CardRegistry::index_of(std::string_view card_id) const {
    for (std::size_t i = 0; i < cards_.size(); ++i)
        if (cards_[i].card_id == card_id) return i;
    return std::nullopt;
}

std::vector<std::string> CardRegistry::ids() const {
    std::vector<std::string> out;
    out.reserve(cards_.size());
    for (const auto& c : cards_) out.push_back(c.card_id);
    return out;
}

const CardRegistry& default_registry() {
    static const CardRegistry registry({
        {"summary", "Summary", CardCategory::summary},
        {"alerts_feed", "Alerts Feed", CardCategory::alerts},
        {"event_log", "Event Log", CardCategory::events},
        {"ip_details", "IP Details", CardCategory::details},
        {"charts", "Charts", CardCategory::charts},
        {"quick_actions", "Quick Actions", CardCategory::actions},
    });
    return registry;
}

const std::vector<std::string>& default_soc_actions() {
    static const std::vector<std::string> actions = {
        "Acknowledge_Alert", "Investigate_Alert", "Open_Event_Log", "Filter_Events",   "Expand_IP_Details",
        "Block_IP",          "View_Summary",      "Open_Charts",    "Run_Playbook",    "Escalate_Incident",
    };
    return actions;
}

const std::map<std::string, std::string>& default_action_cards() {
    static const std::map<std::string, std::string> cards = {
        {"Acknowledge_Alert", "alerts_feed"}, {"Investigate_Alert", "alerts_feed"},
        {"Open_Event_Log", "event_log"},      {"Filter_Events", "event_log"},
        {"Expand_IP_Details", "ip_details"},  {"Block_IP", "ip_details"},
        {"View_Summary", "summary"},          {"Open_Charts", "charts"},
        {"Run_Playbook", "quick_actions"},    {"Escalate_Incident", "quick_actions"},
    };
    return cards;
}

ActionVocab default_soc_vocab() { return build_vocab(default_soc_actions()); }

std::string_view to_string(Emphasis e) { return e == Emphasis::highlighted ? "highlighted" : "normal"; }

Emphasis parse_emphasis(std::string_view text) {
    if (text == "normal") return Emphasis::normal;
    if (text == "highlighted" || text == "highlight") return Emphasis::highlighted;
    throw std::invalid_argument("unknown emphasis \"" + std::string(text) + "\"");
}

LayoutConfig default_layout(const CardRegistry& registry, std::string layout_id) {
    LayoutConfig layout;
    layout.layout_id = std::move(layout_id);
    layout.order = registry.ids();
    for (const auto& id : layout.order) {
        layout.emphasis[id] = Emphasis::normal;
        layout.visible[id] = true;
    }
    return layout;
}

bool is_permutation_of_registry(std::span<const std::string> order, const CardRegistry& registry) {
    auto ids = registry.ids();
    if (order.size() != ids.size()) return false;
    return std::is_permutation(order.begin(), order.end(), ids.begin());
}

void validate_layout(const LayoutConfig& layout, const CardRegistry& registry) {
    if (!is_permutation_of_registry(layout.order, registry))
        throw std::invalid_argument("layout order is not a permutation of the registry");
    if (layout.columns < kMinColumns || layout.columns > kMaxColumns)
        throw std::invalid_argument("columns must be in [1, 4]");
    for (const auto& [id, _] : layout.emphasis)
        if (!registry.contains(id)) throw std::invalid_argument("emphasis for unknown card \"" + id + "\"");
    for (const auto& [id, _] : layout.visible)
        if (!registry.contains(id)) throw std::invalid_argument("visibility for unknown card \"" + id + "\"");
}

void promote_card(LayoutConfig& layout, std::string_view card_id, Emphasis emphasis) {
    auto it = std::find(layout.order.begin(), layout.order.end(), card_id);
    if (it == layout.order.end()) throw std::invalid_argument("card \"" + std::string(card_id) + "\" not in layout");
    std::rotate(layout.order.begin(), it, it + 1);
    layout.emphasis[std::string(card_id)] = emphasis;
}

bool layout_differs(const LayoutConfig& a, const LayoutConfig& b) {
    auto emph = [](const LayoutConfig& l, const std::string& id) {
        auto it = l.emphasis.find(id);
        return it == l.emphasis.end() ? Emphasis::normal : it->second;
    };
    if (a.order != b.order) return true;
    for (const auto& id : a.order)
        if (emph(a, id) != emph(b, id)) return true;
    return false;
}

}  // namespace aui
