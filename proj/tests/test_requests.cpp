#include "mss/requests.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace mss;

namespace {

std::vector<PointAddr> node_points(const DiamondNode& n) {
    std::vector<PointAddr> out;
    PointAddr prefix;
    detail::enumerate_rec(n, prefix, [&](PointAddr& p) { out.push_back(p); });
    return out;
}

// Random set descriptor hanging below `node`, with some Point leaves deliberately
// placed on glued terminals.
SetPtr random_set(const DiamondNode& node, std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, 9);
    int r = pick(rng);
    if (node.is_line || r < 3 || depth > 4) {
        auto pts = node_points(node);
        std::uniform_int_distribution<std::size_t> u(0, pts.size() - 1);
        return point_set(pts[u(rng)]);
    }
    if (r < 5) return union_set(random_set(node, rng, depth + 1), random_set(node, rng, depth + 1));
    Side side = (rng() & 1) ? Side::Right : Side::Left;
    std::uniform_int_distribution<int> idx(1, node.copies(side));
    CopySelector sel{side, idx(rng)};
    return prefix_set(sel, random_set(*node.segment(sel).child, rng, depth + 1));
}

std::vector<PointAddr> scan_members(const MetricSpace& sp, const RequestSet& r) {
    std::vector<PointAddr> out;
    for (const auto& p : sp.points())
        if (contains(sp, r, p)) out.push_back(p);
    return out;
}

}  // namespace

TEST(Requests, EmptyContainsNothing) {
    auto sp = diamond_basic(2, {1, 1});
    RequestSet e;
    for (const auto& p : sp->points()) EXPECT_FALSE(contains(*sp, e, p));
}

TEST(Requests, SingletonTarget) {
    auto sp = diamond_refined(2, 2, 2.0);
    auto r = must_be_in(point_set(sp->t()));
    EXPECT_TRUE(contains(*sp, r, sp->t()));
    EXPECT_FALSE(contains(*sp, r, sp->s()));
}

TEST(Requests, PrefixedAtomMembership) {
    auto sp = diamond_basic(2, {1, 1});
    const auto* root = sp->diamond_root();
    CopySelector sel{Side::Left, 1};
    const auto& child = *root->segment(sel).child;
    auto inner = node_points(child);
    std::vector<SetPtr> pick{point_set(inner[1]), point_set(inner[3])};
    auto r = must_be_in(prefix_set(sel, union_set(pick)));
    std::vector<PointAddr> expect{sp->canonicalize(prefixed(sel, inner[1])), sp->canonicalize(prefixed(sel, inner[3]))};
    std::sort(expect.begin(), expect.end());
    EXPECT_EQ(scan_members(*sp, r), expect);
}

TEST(Requests, GluedTerminalReachedThroughNeighbourCopy) {
    // t of copy (L,1) is canonically written as s of (L,2)... or the reverse; either way
    // the prefixed atom must contain it.
    auto sp = diamond_basic(2, {1, 1});
    CopySelector sel{Side::Left, 1};
    const auto& child = *sp->diamond_root()->segment(sel).child;
    auto r = must_be_in(prefix_set(sel, point_set(detail::terminal_addr(child, true))));
    auto glued = sp->canonicalize(prefixed(sel, detail::terminal_addr(child, true)));
    EXPECT_TRUE(contains(*sp, r, glued));
    auto r2 = must_be_in(prefix_set({Side::Right, 1}, point_set(detail::terminal_addr(child, false))));
    EXPECT_TRUE(contains(*sp, r2, sp->s()));
}

TEST(Requests, ContainsMatchesEnumerationRandom) {
    std::mt19937_64 rng(7);
    std::vector<SpacePtr> spaces{diamond_basic(2, {1, 1}), diamond_basic(2, {1, 2}), diamond_refined(2, 2, 2.0),
                                 diamond_refined(2, 4, 2.0), lgt_variant(2, {1, 2})};
    for (const auto& sp : spaces) {
        for (int it = 0; it < 100; ++it) {
            auto r = must_be_in(random_set(*sp->diamond_root(), rng, 0));
            EXPECT_EQ(scan_members(*sp, r), atom_members(*sp, r.atoms)) << sp->kind();
        }
    }
}

TEST(Requests, NearestLineExample) {
    auto sp = line_metric(4);
    auto r = must_be_in(union_set(point_set(flat_point(2)), point_set(flat_point(4))));
    auto [p, d] = nearest_in(*sp, r, flat_point(1));
    EXPECT_EQ(p, flat_point(2));
    EXPECT_EQ(d, Q(1));
    auto [p2, d2] = nearest_in(*sp, r, flat_point(4));
    EXPECT_EQ(p2, flat_point(4));
    EXPECT_EQ(d2, Q(0));
}

TEST(Requests, NearestMatchesExhaustiveScan) {
    std::mt19937_64 rng(11);
    auto sp = diamond_basic(2, {1, 2});
    auto pts = sp->points();
    std::uniform_int_distribution<std::size_t> u(0, pts.size() - 1);
    for (int it = 0; it < 500; ++it) {
        RequestSet r{random_set(*sp->diamond_root(), rng, 0), (it % 3 == 0) ? Polarity::MustNotBeIn : Polarity::MustBeIn};
        const auto& from = pts[u(rng)];
        std::optional<PointAddr> best;
        Q bd;
        for (const auto& q : pts) {
            bool in = std::find(pts.begin(), pts.end(), q) != pts.end() && contains(*sp, r, q);
            if (r.polarity == Polarity::MustNotBeIn) in = !in;
            if (!in) continue;
            Q d = sp->distance(from, q);
            if (!best || d < bd) best = q, bd = d;
        }
        if (!best) {
            EXPECT_THROW(nearest_in(*sp, r, from), std::invalid_argument);
            continue;
        }
        auto [p, d] = nearest_in(*sp, r, from);
        EXPECT_EQ(d, bd);
        EXPECT_EQ(p, *best);
        EXPECT_TRUE(satisfies(*sp, r, p));
    }
}

TEST(Requests, MustNotBeInOnUniform) {
    auto sp = uniform_metric(3);
    auto r = must_not_be_in(point_set(flat_point(0)));
    auto [p, d] = nearest_in(*sp, r, flat_point(0));
    EXPECT_EQ(p, flat_point(1));
    EXPECT_EQ(d, Q(1));
    auto full = must_not_be_in(union_set({point_set(flat_point(0)), point_set(flat_point(1)), point_set(flat_point(2))}));
    EXPECT_THROW(nearest_in(*sp, full, flat_point(0)), std::invalid_argument);
}

TEST(Requests, WitnessResolution) {
    auto cell = new_side_cell();
    auto w = witness_prefix({Side::Left, 2}, witness_choice(cell, witness_leaf(flat_point(1)), witness_leaf(flat_point(3))));
    EXPECT_THROW(resolve_witness(w), std::logic_error);
    *cell = 1;
    auto p = resolve_witness(w);
    EXPECT_EQ(to_string(p), "L2/3");
}

TEST(Requests, TextRoundTrip) {
    auto sp = diamond_basic(2, {1, 1});
    std::mt19937_64 rng(3);
    RequestSeq seq;
    for (int i = 0; i < 6; ++i) seq.requests.push_back({random_set(*sp->diamond_root(), rng, 0), i == 4 ? Polarity::MustNotBeIn : Polarity::MustBeIn});
    seq.chunks = {{0, 2, 1.5, "1"}, {2, 6, std::nullopt, "2a"}};
    std::stringstream ss;
    write_sequence(ss, *sp, seq);
    auto back = read_sequence(ss);
    ASSERT_EQ(back.size(), seq.size());
    ASSERT_EQ(back.chunks.size(), 2u);
    EXPECT_EQ(back.chunks[0].begin, 0u);
    EXPECT_EQ(back.chunks[0].end, 2u);
    EXPECT_EQ(back.chunks[1].end, 6u);
    EXPECT_DOUBLE_EQ(*back.chunks[0].size, 1.5);
    EXPECT_FALSE(back.chunks[1].size.has_value());
    EXPECT_EQ(back.chunks[1].stage, "2a");
    for (std::size_t i = 0; i < seq.size(); ++i) {
        EXPECT_EQ(back.requests[i].polarity, seq.requests[i].polarity);
        EXPECT_EQ(atom_members(*sp, back.requests[i].atoms), atom_members(*sp, seq.requests[i].atoms));
    }
}
