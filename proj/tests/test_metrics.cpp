#include "mss/metrics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

using namespace mss;

namespace {

void expect_matches_oracle(const MetricSpace& sp) {
    auto g = materialize_graph(sp);
    auto d = oracle::floyd(g.vertices.size(), g.edges);
    for (std::size_t i = 0; i < g.vertices.size(); ++i)
        for (std::size_t j = 0; j < g.vertices.size(); ++j) {
            ASSERT_TRUE(d[i][j].has_value());
            ASSERT_EQ(sp.distance(g.vertices[i], g.vertices[j]), *d[i][j])
                << to_string(g.vertices[i]) << " " << to_string(g.vertices[j]);
        }
}

std::int64_t all_addresses(const DiamondNode& n) {
    if (n.is_line) return n.edges + 1;
    std::int64_t c = 0;
    for (Side s : {Side::Left, Side::Right})
        for (const auto& seg : n.path(s)) c += all_addresses(*seg.child);
    return c;
}

}  // namespace

TEST(Line, Basics) {
    auto l = line_metric(4);
    EXPECT_EQ(l->distance(flat_point(0), flat_point(4)), Q(4));
    EXPECT_EQ(l->diameter(), Q(4));
    EXPECT_EQ(l->distance(flat_point(1), flat_point(3)), Q(2));
    auto one = line_metric(1);
    EXPECT_EQ(one->point_count(), 2);
    EXPECT_EQ(one->distance(one->s(), one->t()), Q(1));
    EXPECT_THROW(line_metric(0), std::invalid_argument);
    auto g = materialize_graph(*l);
    EXPECT_EQ(g.edges.size(), 4u);
}

TEST(DiamondBasic, LevelOneIsSixCycle) {
    auto sp = diamond_basic(1, {1});
    EXPECT_EQ(sp->point_count(), 6);
    EXPECT_EQ(sp->distance(sp->s(), sp->t()), Q(3));
    auto g = materialize_graph(*sp);
    EXPECT_EQ(g.vertices.size(), 6u);
    EXPECT_EQ(g.edges.size(), 6u);
    for (const auto& e : g.edges) EXPECT_EQ(e.len, Q(1));
    std::vector<int> deg(6, 0);
    for (const auto& e : g.edges) ++deg[static_cast<std::size_t>(e.u)], ++deg[static_cast<std::size_t>(e.v)];
    for (int d : deg) EXPECT_EQ(d, 2);
}

TEST(DiamondBasic, LevelZeroIsEdge) {
    auto sp = diamond_basic(0, {});
    EXPECT_EQ(sp->point_count(), 2);
    EXPECT_EQ(sp->distance(sp->s(), sp->t()), Q(1));
    EXPECT_THROW(diamond_basic(2, {1}), std::invalid_argument);
    EXPECT_THROW(diamond_basic(2, {2, 1}), std::invalid_argument);
}

TEST(DiamondBasic, MatchesOracle) {
    expect_matches_oracle(*diamond_basic(2, {1, 1}));
    expect_matches_oracle(*diamond_basic(2, {1, 2}));
}

TEST(DiamondRefined, OneLevelAboveBase) {
    auto sp = diamond_refined(1, 4, 1.5);
    EXPECT_EQ(sp->distance(sp->s(), sp->t()), Q(12));
    // child s inside copy (L,1) is the parent's s
    PointAddr p{{{Side::Left, 1}}, 0};
    EXPECT_EQ(sp->canonicalize(p), sp->s());
    PointAddr r{{{Side::Right, 1}}, 0};
    EXPECT_FALSE(sp->is_valid(r));
    EXPECT_EQ(sp->canonicalize(r), sp->s());
    EXPECT_EQ(sp->distance(sp->canonicalize(r), sp->s()), Q(0));
}

TEST(DiamondRefined, TwoLevelsMatchOracle) {
    for (std::int64_t beta : {2, 4}) {
        auto sp = diamond_refined(2, beta, 2.0);
        ASSERT_EQ(refined_levels_above_base(2, 2.0), 2);
        EXPECT_EQ(sp->distance(sp->s(), sp->t()), Q(beta * 9));
        EXPECT_LE(sp->point_count(), beta * 36);
        expect_matches_oracle(*sp);
    }
    auto two = diamond_refined(2, 2, 2.0);
    EXPECT_LE(materialize_graph(*two).vertices.size(), 72u);
}

TEST(DiamondRefined, PointCountBound) {
    for (int w = 1; w <= 5; ++w) {
        auto sp = diamond_refined(w, 4, 1.5);
        std::int64_t bound = 4;
        for (int i = 0; i < w; ++i) bound *= 6;
        EXPECT_LE(sp->point_count(), bound);
        EXPECT_EQ(sp->diameter(), Q(4 * static_cast<std::int64_t>(std::pow(3, refined_levels_above_base(w, 1.5)))));
    }
}

TEST(DiamondRefined, RandomPairsAgainstOracle) {
    auto sp = diamond_refined(2, 4, 2.0);
    auto g = materialize_graph(*sp);
    auto d = oracle::floyd(g.vertices.size(), g.edges);
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, g.vertices.size() - 1);
    for (int k = 0; k < 1000; ++k) {
        auto i = pick(rng), j = pick(rng);
        ASSERT_EQ(sp->distance(g.vertices[i], g.vertices[j]), *d[i][j]);
    }
}

TEST(Lgt, ExtraEdgeAndScaling) {
    auto sp = lgt_variant(1, {2});
    auto* root = sp->diamond_root();
    ASSERT_NE(root, nullptr);
    // edge of length C_0/m_0 copy diameters with the default C_0 = m_0
    EXPECT_EQ(root->left[0].child->length, Q(1));
    EXPECT_LE(root->left[0].child->length, Q(1));
    EXPECT_EQ(root->left[1].scale * root->left[1].child->length, Q(1, 2));
    EXPECT_EQ(sp->distance(sp->s(), sp->t()), Q(3 * 2 + 1));
    auto custom = lgt_variant(1, {2}, [](int, std::int64_t) { return Q(1); });
    EXPECT_EQ(custom->diamond_root()->left[0].child->length, Q(1, 2));
}

TEST(Lgt, MatchesOracle) {
    expect_matches_oracle(*lgt_variant(1, {2}));
    expect_matches_oracle(*lgt_variant(2, {1, 2}));
    expect_matches_oracle(*lgt_variant(2, {2, 2}, [](int, std::int64_t) { return Q(1); }));
}

TEST(Distance, DiameterEqualsTerminalDistance) {
    std::vector<SpacePtr> spaces = {diamond_basic(2, {1, 1}), diamond_refined(2, 2, 2.0), lgt_variant(2, {1, 2})};
    for (const auto& sp : spaces) {
        auto pts = sp->points();
        Q best(0);
        for (const auto& a : pts)
            for (const auto& b : pts) best = std::max(best, sp->distance(a, b));
        EXPECT_EQ(best, sp->distance(sp->s(), sp->t())) << sp->kind();
        EXPECT_EQ(sp->diameter(), best);
        EXPECT_EQ(sp->distance(pts[3], pts[3]), Q(0));
    }
}

TEST(Distance, SymmetryAndTriangle) {
    std::vector<SpacePtr> spaces = {diamond_basic(2, {1, 2}), diamond_refined(3, 2, 2.0), lgt_variant(2, {1, 2})};
    std::mt19937_64 rng(11);
    for (const auto& sp : spaces) {
        auto pts = sp->points();
        std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
        for (int k = 0; k < 10000; ++k) {
            const auto &x = pts[pick(rng)], &y = pts[pick(rng)], &z = pts[pick(rng)];
            Q xy = sp->distance(x, y);
            ASSERT_EQ(xy, sp->distance(y, x));
            ASSERT_LE(xy, sp->distance(x, z) + sp->distance(z, y));
            ASSERT_EQ(xy == Q(0), x == y);
        }
    }
}

TEST(Canonical, EnumerationCountsAndUniqueness) {
    auto sp = diamond_refined(3, 2, 2.0);
    auto pts = sp->points();
    EXPECT_EQ(static_cast<std::int64_t>(pts.size()), sp->point_count());
    std::set<PointAddr> uniq(pts.begin(), pts.end());
    EXPECT_EQ(uniq.size(), pts.size());
    EXPECT_TRUE(std::is_sorted(pts.begin(), pts.end()));
    for (const auto& p : pts) {
        EXPECT_TRUE(sp->is_valid(p));
        EXPECT_EQ(sp->canonicalize(p), p);
    }
}

TEST(Canonical, EveryAddressMapsToLexMinimum) {
    auto sp = diamond_refined(2, 2, 2.0);
    const auto& root = *sp->diamond_root();
    // enumerate every raw address, group by canonical image, check lex minimum
    std::map<PointAddr, std::vector<PointAddr>> groups;
    std::function<void(const DiamondNode&, PointAddr&)> walk = [&](const DiamondNode& n, PointAddr& pre) {
        if (n.is_line) {
            for (std::int64_t b = 0; b <= n.edges; ++b) {
                pre.base = b;
                groups[sp->canonicalize(pre)].push_back(pre);
            }
            return;
        }
        for (Side s : {Side::Left, Side::Right})
            for (int i = 1; i <= n.copies(s); ++i) {
                pre.levels.push_back({s, i});
                walk(*n.segment({s, i}).child, pre);
                pre.levels.pop_back();
            }
    };
    PointAddr pre;
    walk(root, pre);
    EXPECT_EQ(static_cast<std::int64_t>(groups.size()), sp->point_count());
    std::int64_t raw = 0;
    for (const auto& [canon, members] : groups) {
        raw += static_cast<std::int64_t>(members.size());
        EXPECT_EQ(canon, *std::min_element(members.begin(), members.end()));
        for (const auto& m : members) EXPECT_EQ(sp->distance(canon, sp->canonicalize(m)), Q(0));
    }
    EXPECT_EQ(raw, all_addresses(root));
}

TEST(Canonical, RejectsBadAddresses) {
    auto sp = diamond_refined(1, 4, 1.5);
    EXPECT_THROW(sp->distance(PointAddr{{{Side::Left, 4}}, 0}, sp->s()), std::invalid_argument);
    EXPECT_THROW(sp->distance(PointAddr{{{Side::Left, 1}}, 9}, sp->s()), std::invalid_argument);
    EXPECT_THROW(sp->distance(PointAddr{{{Side::Left, 2}}, 0}, sp->s()), std::invalid_argument);
}

TEST(Ultrametric, Distances) {
    HstNode root{Q(8), {HstNode{Q(0), {}, "a"}, HstNode{Q(0), {}, "b"}, HstNode{Q(2), {HstNode{Q(0), {}, "c"}, HstNode{Q(0), {}, "d"}}, ""}}, ""};
    EXPECT_EQ(ultrametric_distance(root, "a", "b"), Q(8));
    EXPECT_EQ(ultrametric_distance(root, "a", "a"), Q(0));
    EXPECT_EQ(ultrametric_distance(root, "c", "d"), Q(2));
    EXPECT_EQ(ultrametric_distance(root, "c", "a"), Q(8));
    EXPECT_THROW(ultrametric_distance(root, "a", "zz"), std::invalid_argument);
}

namespace {
HstNode random_tree(std::mt19937_64& rng, int depth, Q weight, int& next) {
    std::uniform_int_distribution<int> kids(1, 3);
    if (depth == 0 || weight < 2) return HstNode{Q(0), {}, "v" + std::to_string(next++)};
    HstNode n{weight, {}, ""};
    int k = kids(rng) + (depth > 2 ? 0 : 0);
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> shrink(1, 3);
        Q w = weight * Q(shrink(rng), 4);
        if (w < 1 || std::uniform_int_distribution<int>(0, 3)(rng) == 0)
            n.children.push_back(HstNode{Q(0), {}, "v" + std::to_string(next++)});
        else
            n.children.push_back(random_tree(rng, depth - 1, w, next));
    }
    if (n.children.size() == 1) n.children.push_back(HstNode{Q(0), {}, "v" + std::to_string(next++)});
    return n;
}

// max weight over internal nodes on the tree path between two leaves
bool path_to(const HstNode& n, const std::string& label, std::vector<const HstNode*>& path) {
    path.push_back(&n);
    if (n.is_leaf() && n.label == label) return true;
    for (const auto& c : n.children)
        if (path_to(c, label, path)) return true;
    path.pop_back();
    return false;
}
}  // namespace

TEST(Ultrametric, MatchesPathEnumeration) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        int next = 0;
        HstNode root = random_tree(rng, 4, Q(64), next);
        UltrametricSpace sp(root);
        std::vector<const HstNode*> leaves;
        hst_leaves(root, leaves);
        for (const auto* a : leaves)
            for (const auto* b : leaves) {
                std::vector<const HstNode*> pa, pb;
                path_to(root, a->label, pa);
                path_to(root, b->label, pb);
                std::size_t k = 0;
                while (k < pa.size() && k < pb.size() && pa[k] == pb[k]) ++k;
                Q best(0);
                if (a != b) {
                    for (std::size_t i = k - 1; i < pa.size(); ++i) best = std::max(best, pa[i]->weight);
                    for (std::size_t i = k; i < pb.size(); ++i) best = std::max(best, pb[i]->weight);
                }
                ASSERT_EQ(ultrametric_distance(root, a->label, b->label), best);
            }
    }
}

TEST(HstPreprocess, RoundsAndContracts) {
    HstNode chain{Q(5), {HstNode{Q(3), {HstNode{Q(0), {}, "a"}, HstNode{Q(0), {}, "b"}}, ""}, HstNode{Q(0), {}, "c"}}, ""};
    HstNode out = hst_preprocess(chain);
    EXPECT_TRUE(is_2hst(out));
    EXPECT_EQ(out.weight, Q(8));
    EXPECT_EQ(out.children[0].weight, Q(4));

    HstNode same{Q(4), {HstNode{Q(4), {HstNode{Q(0), {}, "a"}, HstNode{Q(0), {}, "b"}}, ""}, HstNode{Q(0), {}, "c"}}, ""};
    HstNode c = hst_preprocess(same);
    EXPECT_EQ(c.children.size(), 3u);
    EXPECT_TRUE(is_2hst(c));

    HstNode already{Q(8), {HstNode{Q(2), {HstNode{Q(0), {}, "a"}, HstNode{Q(0), {}, "b"}}, ""}, HstNode{Q(0), {}, "c"}}, ""};
    HstNode again = hst_preprocess(already);
    std::ostringstream x, y;
    write_hst(x, already);
    write_hst(y, again);
    EXPECT_EQ(x.str(), y.str());

    HstNode bad{Q(0), {HstNode{Q(0), {}, "a"}, HstNode{Q(0), {}, "b"}}, ""};
    EXPECT_THROW(hst_preprocess(bad), std::invalid_argument);
}

TEST(HstPreprocess, DistortionWithinFactorTwo) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        int next = 0;
        HstNode root = random_tree(rng, 5, Q(100), next);
        HstNode out = hst_preprocess(root);
        ASSERT_TRUE(is_2hst(out));
        std::vector<const HstNode*> leaves;
        hst_leaves(root, leaves);
        for (const auto* a : leaves)
            for (const auto* b : leaves) {
                Q d0 = ultrametric_distance(root, a->label, b->label);
                Q d1 = ultrametric_distance(out, a->label, b->label);
                ASSERT_LE(d0, d1);
                ASSERT_LE(d1, d0 * 2);
            }
    }
}

TEST(HstText, RoundTrip) {
    std::istringstream in("16\n  a\n  4\n    b\n    c\n  d\n");
    HstNode root = parse_hst(in);
    EXPECT_EQ(root.weight, Q(16));
    EXPECT_EQ(hst_leaf_count(root), 4u);
    std::ostringstream out;
    write_hst(out, root);
    EXPECT_EQ(out.str(), "16\n  a\n  4\n    b\n    c\n  d\n");
}

TEST(Serialization, DescriptorRoundTrip) {
    std::vector<SpacePtr> spaces = {line_metric(5), diamond_basic(2, {1, 2}), diamond_refined(3, 4, 1.5), lgt_variant(1, {2}), uniform_metric(8)};
    for (const auto& sp : spaces) {
        std::ostringstream os;
        write_kv(os, sp->descriptor());
        std::istringstream is(os.str());
        auto back = space_from_descriptor(parse_kv(is));
        EXPECT_EQ(back->point_count(), sp->point_count());
        EXPECT_EQ(back->diameter(), sp->diameter());
        EXPECT_EQ(back->descriptor(), sp->descriptor());
    }
}

TEST(Serialization, EdgeListRoundTrip) {
    auto sp = diamond_refined(2, 2, 2.0);
    auto g = materialize_graph(*sp);
    std::ostringstream os;
    write_edge_list(os, g);
    std::istringstream is(os.str());
    GraphSpace back = read_edge_list(is);
    EXPECT_EQ(back.point_count(), sp->point_count());
    for (std::size_t i = 0; i < g.vertices.size(); i += 5)
        for (std::size_t j = 0; j < g.vertices.size(); j += 3)
            EXPECT_EQ(back.distance(flat_point(static_cast<std::int64_t>(i)), flat_point(static_cast<std::int64_t>(j))),
                      sp->distance(g.vertices[i], g.vertices[j]));
}

TEST(Materialize, CapEnforced) {
    auto sp = diamond_refined(4, 4, 1.5);
    EXPECT_THROW(materialize_graph(*sp, 100), std::length_error);
}
