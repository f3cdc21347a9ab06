#pragma once

#include "mss/requests.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mss {

struct BasicGenConfig {
    int w = 1;
    std::vector<std::int64_t> m;
    std::uint64_t seed = 0;
    bool width_bounded = false;  // bounded-width variant on lgt_variant spaces
};

// Counters of the outermost level, for statistics.
struct BasicTrace {
    std::int64_t m = 0;
    std::int64_t left = 0, right = 0;  // copies consumed per side after stage 2
    Side survivor = Side::Left;
    std::int64_t stage3_copies = 0;
};

namespace detail {

struct GenOut {
    std::vector<SetPtr> sets;
    std::vector<WitnessPtr> wit;
    std::vector<std::pair<std::size_t, std::string>> marks;  // stage starts, outermost level only

    void emit(SetPtr s, WitnessPtr w) {
        sets.push_back(std::move(s));
        wit.push_back(std::move(w));
    }
    void mark(const std::string& tag) { marks.emplace_back(sets.size(), tag); }
};

struct Frontier {
    SetPtr set;
    WitnessPtr wit;
};

inline Frontier copy_target(CopySelector sel, const DiamondNode& child) {
    PointAddr t = terminal_addr(child, true);
    return {prefix_set(sel, point_set(t)), witness_prefix(sel, witness_leaf(t))};
}

inline WitnessPtr side_choice(const SideCell& cell, Side adv, WitnessPtr adv_w, WitnessPtr other_w) {
    return adv == Side::Left ? witness_choice(cell, std::move(adv_w), std::move(other_w))
                             : witness_choice(cell, std::move(other_w), std::move(adv_w));
}

inline GenOut basic_rec(int w, const BasicGenConfig& cfg, const DiamondNode& node, std::mt19937_64& rng, BasicTrace* trace) {
    GenOut out;
    if (w == 0) {
        PointAddr t = terminal_addr(node, true);
        out.emit(point_set(t), witness_leaf(t));
        return out;
    }
    const std::int64_t mw = cfg.m[static_cast<std::size_t>(w - 1)];
    const bool lgt = cfg.width_bounded;
    // copy index along a path for logical copy j (1-based, j > m in the bounded variant)
    auto seg_of = [&](std::int64_t j) { return lgt ? LgtLayout::segment_of_logical(mw, j) : static_cast<int>(j); };
    const DiamondNode& child = *node.segment({Side::Left, lgt ? LgtLayout::first_full(mw) : 1}).child;

    PointAddr s = terminal_addr(node, false);
    if (trace) out.mark("start");
    out.emit(point_set(s), witness_leaf(s));
    SideCell cell = new_side_cell();
    Frontier front[2] = {{point_set(s), witness_leaf(s)}, {point_set(s), witness_leaf(s)}};

    // one child sequence on copy `sel`, the other side parked at its frontier
    auto advance = [&](CopySelector sel) {
        GenOut g = basic_rec(w - 1, cfg, child, rng, nullptr);
        const Frontier& park = front[static_cast<int>(other(sel.side))];
        for (std::size_t j = 0; j < g.sets.size(); ++j)
            out.emit(union_set(prefix_set(sel, g.sets[j]), park.set),
                     side_choice(cell, sel.side, witness_prefix(sel, g.wit[j]), park.wit));
        front[static_cast<int>(sel.side)] = copy_target(sel, child);
    };

    if (trace) out.mark("1");
    if (!lgt) {
        for (std::int64_t i = 1; i <= mw; ++i) {
            GenOut g = basic_rec(w - 1, cfg, child, rng, nullptr);
            CopySelector l{Side::Left, static_cast<int>(i)}, r{Side::Right, static_cast<int>(i)};
            for (std::size_t j = 0; j < g.sets.size(); ++j)
                out.emit(union_set(prefix_set(l, g.sets[j]), prefix_set(r, g.sets[j])),
                         witness_choice(cell, witness_prefix(l, g.wit[j]), witness_prefix(r, g.wit[j])));
            front[0] = copy_target(l, child);
            front[1] = copy_target(r, child);
        }
    } else {
        for (std::int64_t k = 1; k <= mw * mw; ++k)
            for (Side x : {Side::Left, Side::Right}) advance({x, static_cast<int>(k + 1)});
    }

    if (trace) out.mark("2");
    std::int64_t count[2] = {mw, mw};
    std::bernoulli_distribution coin(0.5);
    for (std::int64_t i = 1; i <= mw; ++i) {
        Side x = coin(rng) ? Side::Left : Side::Right;
        std::int64_t& c = count[static_cast<int>(x)];
        advance({x, seg_of(c + 1)});
        ++c;
    }

    // the side that advanced further is killed; ties kill the left side
    Side killed = count[0] >= count[1] ? Side::Left : Side::Right;
    Side keep = other(killed);
    *cell = keep == Side::Left ? 0 : 1;
    if (trace) {
        out.mark("3");
        *trace = {mw, count[0], count[1], keep, 3 * mw - count[static_cast<int>(keep)]};
    }
    for (std::int64_t j = count[static_cast<int>(keep)] + 1; j <= 3 * mw; ++j) {
        CopySelector sel{keep, seg_of(j)};
        GenOut g = basic_rec(w - 1, cfg, child, rng, nullptr);
        for (std::size_t q = 0; q < g.sets.size(); ++q) out.emit(prefix_set(sel, g.sets[q]), witness_prefix(sel, g.wit[q]));
    }
    return out;
}

inline RequestSeq pack_sequence(GenOut&& g) {
    RequestSeq seq;
    seq.requests.reserve(g.sets.size());
    for (auto& s : g.sets) seq.requests.push_back(must_be_in(std::move(s)));
    seq.witness = std::move(g.wit);
    for (std::size_t i = 0; i < g.marks.size(); ++i) {
        std::size_t end = i + 1 < g.marks.size() ? g.marks[i + 1].first : seq.requests.size();
        seq.chunks.push_back({g.marks[i].first, end, std::nullopt, g.marks[i].second});
    }
    return seq;
}

}  // namespace detail

inline RequestSeq gen_basic_sequence(const MetricSpace& space, const BasicGenConfig& cfg, BasicTrace* trace = nullptr) {
    check_m(cfg.w, cfg.m);
    const DiamondNode* root = space.diamond_root();
    if (!root) throw std::invalid_argument("basic sequences need a diamond space");
    if (root->height != cfg.w) throw std::invalid_argument("space level does not match the generator level");
    std::mt19937_64 rng(cfg.seed);
    BasicTrace local;
    auto g = detail::basic_rec(cfg.w, cfg, *root, rng, cfg.w > 0 ? (trace ? trace : &local) : nullptr);
    return detail::pack_sequence(std::move(g));
}

inline RequestSeq gen_lgt_sequence(const MetricSpace& space, BasicGenConfig cfg, BasicTrace* trace = nullptr) {
    cfg.width_bounded = true;
    return gen_basic_sequence(space, cfg, trace);
}

// Pads with repeats of the final request up to `length` requests.
inline void pad_sequence(RequestSeq& seq, std::size_t length) {
    if (seq.requests.empty()) throw std::invalid_argument("cannot pad an empty sequence");
    while (seq.requests.size() < length) {
        seq.requests.push_back(seq.requests.back());
        if (!seq.witness.empty()) seq.witness.push_back(seq.witness.back());
    }
    if (!seq.chunks.empty()) seq.chunks.back().end = seq.requests.size();
}

}  // namespace mss
