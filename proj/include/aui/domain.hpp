// Canonical domain types for the adaptive dashboard: action vocabulary,
// hashed session tokens, interaction-log rows, content cards and layouts.

#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aui {

using TokenId = std::size_t;

/// Dense, immutable mapping between action names and token ids.
/// Ids 0 and 1 are reserved for <PAD> and <START>.
class ActionVocab {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kStart = 1;
    static constexpr std::string_view kPadName = "<PAD>";
    static constexpr std::string_view kStartName = "<START>";

    ActionVocab();  // reserved tokens only

    /// Throws std::invalid_argument on an empty or duplicate name.
    static ActionVocab build(std::span<const std::string> action_names);

    std::size_t size() const { return names_.size(); }
    std::size_t action_count() const { return names_.size() - 2; }

    std::optional<TokenId> find(std::string_view name) const;
    TokenId id_of(std::string_view name) const;  // throws on unknown
    const std::string& name_of(TokenId id) const;
    bool contains(std::string_view name) const { return find(name).has_value(); }
    bool is_action(TokenId id) const { return id >= 2 && id < names_.size(); }

    /// All names indexed by id, reserved tokens included.
    const std::vector<std::string>& names() const { return names_; }
    /// Action names only, in id order.
    std::vector<std::string> actions() const;

    /// Line-oriented `id,name` text, one token per line.
    std::string to_text() const;
    static ActionVocab from_text(std::string_view text);

    bool operator==(const ActionVocab& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, TokenId> index_;
};

ActionVocab build_vocab(std::span<const std::string> action_names);

/// Keyed-hash session identifier; the raw id is never kept.
struct SessionToken {
    std::string value;

    bool operator==(const SessionToken&) const = default;
    auto operator<=>(const SessionToken&) const = default;
};

inline constexpr std::size_t kMinSaltBytes = 16;
inline constexpr std::size_t kMaxSaltBytes = 64;
inline constexpr std::string_view kSessionHashAlgorithm = "blake2b-64-keyed";

/// 16 lowercase hex chars of keyed BLAKE2b(raw_id). Salt must be 16..64 bytes.
SessionToken hash_session_id(std::string_view raw_id, std::string_view salt);

struct InteractionEvent {
    std::chrono::year_month_day date;
    SessionToken session;
    std::string layout_id;
    std::string target;
    std::int64_t dwell_ms = 0;

    bool operator==(const InteractionEvent&) const = default;
};

inline constexpr std::string_view kLogHeader = "time,user,layout,target,dwell_ms";

std::chrono::year_month_day parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day date);
bool is_layout_label(std::string_view text);

/// Parses the interaction-log CSV. Errors carry the 1-based line number.
std::vector<InteractionEvent> parse_interaction_log(std::istream& in, const ActionVocab& vocab);
std::vector<InteractionEvent> parse_interaction_log(std::string_view text, const ActionVocab& vocab);
std::string serialize_interaction_log(std::span<const InteractionEvent> events);

/// Groups events by session token in order of first appearance; order within
/// a session follows the input.
std::vector<std::vector<InteractionEvent>> group_by_session(std::span<const InteractionEvent> events);

// ---------------------------------------------------------------------------
// Cards and layouts

enum class CardCategory { alerts, events, details, summary, charts, actions };

std::string_view to_string(CardCategory c);

struct ContentCard {
    std::string card_id;
    std::string title;
    CardCategory category;
};

class CardRegistry {
public:
    explicit CardRegistry(std::vector<ContentCard> cards);

    std::size_t size() const { return cards_.size(); }
    const std::vector<ContentCard>& cards() const { return cards_; }
    const ContentCard& at(std::size_t i) const { return cards_.at(i); }
    std::optional<std::size_t> index_of(std::string_view card_id) const;
    bool contains(std::string_view card_id) const { return index_of(card_id).has_value(); }
    std::vector<std::string> ids() const;

private:
    std::vector<ContentCard> cards_;
};

/// The six SOC cards. Registry order is the static default layout order.
const CardRegistry& default_registry();

/// Default SOC action names and the card each action is performed on.
const std::vector<std::string>& default_soc_actions();
const std::map<std::string, std::string>& default_action_cards();
ActionVocab default_soc_vocab();

enum class Emphasis { normal, highlighted };

std::string_view to_string(Emphasis e);
Emphasis parse_emphasis(std::string_view text);

inline constexpr int kMinColumns = 1;
inline constexpr int kMaxColumns = 4;

struct LayoutConfig {
    std::string layout_id;
    std::vector<std::string> order;
    std::map<std::string, Emphasis> emphasis;
    std::map<std::string, bool> visible;
    int columns = 3;
    bool adapted = false;

    bool operator==(const LayoutConfig&) const = default;
};

/// Registry order, all cards visible and normal, adapted=false.
LayoutConfig default_layout(const CardRegistry& registry, std::string layout_id = "L1");

bool is_permutation_of_registry(std::span<const std::string> order, const CardRegistry& registry);

/// Throws std::invalid_argument describing the first violated invariant.
void validate_layout(const LayoutConfig& layout, const CardRegistry& registry);

/// Moves `card_id` to slot 0, keeping the relative order of every other card.
void promote_card(LayoutConfig& layout, std::string_view card_id, Emphasis emphasis);

/// True when order or emphasis differ.
bool layout_differs(const LayoutConfig& a, const LayoutConfig& b);

}  // namespace aui
