#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proprio/rng.hpp"
#include "proprio/units.hpp"

namespace proprio {

/// Test condition: haptic feedback on/off crossed with visual feedback on/off.
struct Condition {
    bool haptic = true;
    bool visual = true;

    std::string code() const { return std::string(haptic ? "H" : "nH") + "_" + (visual ? "V" : "nV"); }
    std::string label() const { return std::string(haptic ? "H" : "nH") + " " + (visual ? "V" : "nV"); }

    static std::optional<Condition> parse(std::string_view code) {
        for (bool h : {true, false})
            for (bool v : {true, false})
                if (Condition{h, v}.code() == code) return Condition{h, v};
        return std::nullopt;
    }

    friend bool operator==(const Condition&, const Condition&) = default;
};

/// Display order used for summary tables: nH V, H V, nH nV, H nV.
inline constexpr Condition kConditionsDisplayOrder[4] = {{false, true}, {true, true}, {false, false}, {true, false}};

enum class Phase { Calibration, Instructions, Explore, Target, HapticFeedback, Practice, Testing };

inline constexpr std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::Calibration: return "Calibration";
        case Phase::Instructions: return "Instructions";
        case Phase::Explore: return "Explore";
        case Phase::Target: return "Target";
        case Phase::HapticFeedback: return "HapticFeedback";
        case Phase::Practice: return "Practice";
        case Phase::Testing: return "Testing";
    }
    return "?";
}

inline std::optional<Phase> parse_phase(std::string_view s) {
    for (Phase p : {Phase::Calibration, Phase::Instructions, Phase::Explore, Phase::Target, Phase::HapticFeedback,
                    Phase::Practice, Phase::Testing})
        if (to_string(p) == s) return p;
    return std::nullopt;
}

enum class Group { HapticFirst, NoHapticFirst };

inline constexpr std::string_view to_string(Group g) {
    return g == Group::HapticFirst ? "HapticFirst" : "NoHapticFirst";
}

inline std::optional<Group> parse_group(std::string_view s) {
    if (s == "HapticFirst") return Group::HapticFirst;
    if (s == "NoHapticFirst") return Group::NoHapticFirst;
    return std::nullopt;
}

/// Cohorts alternate groups by participant index so both orders are balanced.
inline constexpr Group group_for_participant(int index) {
    return index % 2 == 0 ? Group::HapticFirst : Group::NoHapticFirst;
}

enum class BlockKind { Descending, Random, MixedBlock2 };

inline constexpr std::string_view to_string(BlockKind k) {
    switch (k) {
        case BlockKind::Descending: return "Descending";
        case BlockKind::Random: return "Random";
        case BlockKind::MixedBlock2: return "MixedBlock2";
    }
    return "?";
}

/// Shape of the second Practice block: an ascending run over the smallest
/// angles, a descending run over the largest, and the remaining angles
/// dropped at random run boundaries.
struct MixedBlockPattern {
    int ascending = 4;
    int descending = 4;

    int insertions() const { return kAnglesPerBlock - ascending - descending; }

    void validate() const {
        if (ascending < 0 || descending < 0 || ascending + descending > kAnglesPerBlock)
            throw ValidationError("protocol.mixed_block: ascending + descending must be within [0, 10]");
    }
};

inline std::vector<double> block_order(BlockKind kind, Rng& rng, const MixedBlockPattern& mixed = {}) {
    std::vector<double> angles(kCanonicalAngles.begin(), kCanonicalAngles.end());
    switch (kind) {
        case BlockKind::Descending:
            return angles;
        case BlockKind::Random:
            rng.shuffle(std::span<double>(angles));
            return angles;
        case BlockKind::MixedBlock2: {
            mixed.validate();
            std::sort(angles.begin(), angles.end());
            const auto asc_end = angles.begin() + mixed.ascending;
            const auto desc_begin = angles.end() - mixed.descending;
            std::vector<double> ascending(angles.begin(), asc_end);
            std::vector<double> descending(desc_begin, angles.end());
            std::reverse(descending.begin(), descending.end());
            std::vector<double> extras(asc_end, desc_begin);
            rng.shuffle(std::span<double>(extras));

            // slot 0: before the ascending run, 1: between runs, 2: after the descending run
            std::vector<double> slots[3];
            for (double a : extras) slots[rng.below(3)].push_back(a);
            std::vector<double> out;
            out.reserve(kAnglesPerBlock);
            out.insert(out.end(), slots[0].begin(), slots[0].end());
            out.insert(out.end(), ascending.begin(), ascending.end());
            out.insert(out.end(), slots[1].begin(), slots[1].end());
            out.insert(out.end(), descending.begin(), descending.end());
            out.insert(out.end(), slots[2].begin(), slots[2].end());
            return out;
        }
    }
    return angles;
}

struct Block {
    BlockKind kind = BlockKind::Descending;
    std::vector<double> targets;
};

struct PhasePlan {
    Phase phase = Phase::Explore;
    Condition condition;
    std::vector<Block> blocks;  // empty for Explore

    int trial_count() const {
        int n = 0;
        for (const auto& b : blocks) n += static_cast<int>(b.targets.size());
        return n;
    }
};

struct SessionPlan {
    std::uint64_t seed = 0;
    Group group = Group::HapticFirst;
    std::vector<PhasePlan> phases;

    int trial_count() const {
        int n = 0;
        for (const auto& p : phases) n += p.trial_count();
        return n;
    }

    int trial_count(Phase phase) const {
        int n = 0;
        for (const auto& p : phases)
            if (p.phase == phase) n += p.trial_count();
        return n;
    }

    friend bool operator==(const SessionPlan& a, const SessionPlan& b) {
        if (a.seed != b.seed || a.group != b.group || a.phases.size() != b.phases.size()) return false;
        for (std::size_t i = 0; i < a.phases.size(); ++i) {
            const auto& p = a.phases[i];
            const auto& q = b.phases[i];
            if (p.phase != q.phase || !(p.condition == q.condition) || p.blocks.size() != q.blocks.size()) return false;
            for (std::size_t j = 0; j < p.blocks.size(); ++j)
                if (p.blocks[j].kind != q.blocks[j].kind || p.blocks[j].targets != q.blocks[j].targets) return false;
        }
        return true;
    }
};

/// Test conditions in presentation order: the assigned haptic group first,
/// and within each haptic group the no-vision block before the vision block.
inline std::vector<Condition> testing_order(Group group) {
    const bool first_haptic = group == Group::HapticFirst;
    return {{first_haptic, false}, {first_haptic, true}, {!first_haptic, false}, {!first_haptic, true}};
}

inline SessionPlan build_session_plan(std::uint64_t seed, Group group, const MixedBlockPattern& mixed = {}) {
    Rng rng = make_stream(seed, Stream::Plan);
    SessionPlan plan;
    plan.seed = seed;
    plan.group = group;

    auto block = [&](BlockKind kind) { return Block{kind, block_order(kind, rng, mixed)}; };

    plan.phases.push_back({Phase::Explore, {true, true}, {}});
    plan.phases.push_back({Phase::Target, {true, true}, {block(BlockKind::Descending), block(BlockKind::Random)}});
    plan.phases.push_back({Phase::HapticFeedback, {true, false}, {block(BlockKind::Descending)}});
    plan.phases.push_back({Phase::Practice,
                           {true, false},
                           {block(BlockKind::Descending), block(BlockKind::MixedBlock2), block(BlockKind::Random),
                            block(BlockKind::Random)}});
    for (const Condition& c : testing_order(group)) plan.phases.push_back({Phase::Testing, c, {block(BlockKind::Random)}});
    return plan;
}

}  // namespace proprio
