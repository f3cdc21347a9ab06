#pragma once

#include "mss/rational.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mss {

enum class Side : std::uint8_t { Left = 0, Right = 1 };

inline Side other(Side s) { return s == Side::Left ? Side::Right : Side::Left; }

struct CopySelector {
    Side side = Side::Left;
    int index = 1;  // 1-based position along the path
    auto operator<=>(const CopySelector&) const = default;
};

// Levels are listed outermost first; `base` is the coordinate in the innermost line
// (or the point index for flat spaces).
struct PointAddr {
    std::vector<CopySelector> levels;
    std::int64_t base = 0;
    auto operator<=>(const PointAddr&) const = default;
};

inline PointAddr flat_point(std::int64_t i) { return PointAddr{{}, i}; }

inline PointAddr prefixed(CopySelector sel, const PointAddr& p) {
    PointAddr r;
    r.levels.reserve(p.levels.size() + 1);
    r.levels.push_back(sel);
    r.levels.insert(r.levels.end(), p.levels.begin(), p.levels.end());
    r.base = p.base;
    return r;
}

inline std::string to_string(const PointAddr& p) {
    std::string out;
    for (const auto& l : p.levels) {
        out += (l.side == Side::Left ? 'L' : 'R');
        out += std::to_string(l.index);
        out += '/';
    }
    out += std::to_string(p.base);
    return out;
}

inline PointAddr parse_point(const std::string& text) {
    PointAddr p;
    std::size_t pos = 0;
    while (true) {
        auto slash = text.find('/', pos);
        std::string tok = text.substr(pos, slash == std::string::npos ? std::string::npos : slash - pos);
        if (slash == std::string::npos) {
            try {
                p.base = std::stoll(tok);
            } catch (const std::exception&) {
                throw std::invalid_argument("bad point address: " + text);
            }
            return p;
        }
        if (tok.size() < 2 || (tok[0] != 'L' && tok[0] != 'R'))
            throw std::invalid_argument("bad copy selector in: " + text);
        p.levels.push_back({tok[0] == 'L' ? Side::Left : Side::Right, std::stoi(tok.substr(1))});
        pos = slash + 1;
    }
}

// ---------------------------------------------------------------------------
// Recursive diamond-like spaces: a node is either a line of equal edges or a
// cycle made of a left and a right path of (scaled) child copies.

struct DiamondNode;
using NodePtr = std::shared_ptr<const DiamondNode>;

struct Segment {
    NodePtr child;
    Q scale{1};
};

struct DiamondNode {
    bool is_line = true;
    std::int64_t edges = 0;
    Q edge_len{1};
    std::vector<Segment> left, right;
    std::vector<Q> pref_left, pref_right;  // cumulative scaled lengths from s
    Q length{0};                           // d(s,t) in own units
    std::int64_t count = 0;                // canonical points, saturating
    int height = 0;                        // maximum address depth

    const std::vector<Segment>& path(Side s) const { return s == Side::Left ? left : right; }
    const std::vector<Q>& pref(Side s) const { return s == Side::Left ? pref_left : pref_right; }
    const Segment& segment(CopySelector sel) const { return path(sel.side).at(static_cast<std::size_t>(sel.index - 1)); }
    int copies(Side s) const { return static_cast<int>(path(s).size()); }
};

constexpr std::int64_t kSaturated = std::numeric_limits<std::int64_t>::max();

inline std::int64_t sat_add(std::int64_t a, std::int64_t b) {
    if (a == kSaturated || b == kSaturated || a > kSaturated - b) return kSaturated;
    return a + b;
}

inline NodePtr make_line(std::int64_t edges, Q edge_len = Q(1)) {
    if (edges < 1) throw std::invalid_argument("line needs at least one edge");
    if (edge_len <= 0) throw std::invalid_argument("edge length must be positive");
    auto n = std::make_shared<DiamondNode>();
    n->is_line = true;
    n->edges = edges;
    n->edge_len = edge_len;
    n->length = edge_len * edges;
    n->count = edges + 1;
    n->height = 0;
    return n;
}

inline NodePtr make_cycle(std::vector<Segment> left, std::vector<Segment> right) {
    if (left.empty() || right.empty()) throw std::invalid_argument("cycle needs copies on both paths");
    auto n = std::make_shared<DiamondNode>();
    n->is_line = false;
    n->left = std::move(left);
    n->right = std::move(right);
    std::int64_t cnt = 0;
    int h = 0;
    for (Side s : {Side::Left, Side::Right}) {
        auto& pref = s == Side::Left ? n->pref_left : n->pref_right;
        pref.push_back(Q(0));
        for (const auto& seg : n->path(s)) {
            if (!seg.child || seg.scale <= 0) throw std::invalid_argument("bad segment");
            pref.push_back(pref.back() + seg.scale * seg.child->length);
            cnt = sat_add(cnt, seg.child->count);
            h = std::max(h, seg.child->height + 1);
        }
    }
    if (n->pref_left.back() != n->pref_right.back())
        throw std::invalid_argument("left and right paths differ in length");
    n->length = n->pref_left.back();
    auto k = static_cast<std::int64_t>(n->left.size() + n->right.size());
    n->count = cnt == kSaturated ? kSaturated : cnt - k;
    n->height = h;
    return n;
}

namespace detail {

inline PointAddr terminal_addr(const DiamondNode& node, bool want_t) {
    PointAddr p;
    const DiamondNode* cur = &node;
    while (!cur->is_line) {
        int idx = want_t ? cur->copies(Side::Left) : 1;
        p.levels.push_back({Side::Left, idx});
        cur = cur->left[static_cast<std::size_t>(idx - 1)].child.get();
    }
    p.base = want_t ? cur->edges : 0;
    return p;
}

// Does the suffix of `p` from `pos` equal the canonical s (or t) of `node`?
inline bool is_terminal(const DiamondNode& node, const PointAddr& p, std::size_t pos, bool want_t) {
    const DiamondNode* cur = &node;
    while (!cur->is_line) {
        if (pos >= p.levels.size()) return false;
        int idx = want_t ? cur->copies(Side::Left) : 1;
        if (p.levels[pos] != CopySelector{Side::Left, idx}) return false;
        cur = cur->left[static_cast<std::size_t>(idx - 1)].child.get();
        ++pos;
    }
    return pos == p.levels.size() && p.base == (want_t ? cur->edges : 0);
}

inline bool valid_rec(const DiamondNode& node, const PointAddr& p, std::size_t pos) {
    if (node.is_line) return pos == p.levels.size() && p.base >= 0 && p.base <= node.edges;
    if (pos >= p.levels.size()) return false;
    const auto sel = p.levels[pos];
    if (sel.index < 1 || sel.index > node.copies(sel.side)) return false;
    const auto& child = *node.segment(sel).child;
    if (!valid_rec(child, p, pos + 1)) return false;
    if (is_terminal(child, p, pos + 1, false) && !(sel.side == Side::Left && sel.index == 1)) return false;
    if (is_terminal(child, p, pos + 1, true) && sel.side == Side::Right && sel.index == node.copies(Side::Right))
        return false;
    return true;
}

inline PointAddr canon_rec(const DiamondNode& node, const PointAddr& p, std::size_t pos) {
    if (node.is_line) {
        if (pos != p.levels.size() || p.base < 0 || p.base > node.edges)
            throw std::invalid_argument("address out of range: " + to_string(p));
        return PointAddr{{}, p.base};
    }
    if (pos >= p.levels.size()) throw std::invalid_argument("address too short: " + to_string(p));
    const auto sel = p.levels[pos];
    if (sel.index < 1 || sel.index > node.copies(sel.side))
        throw std::invalid_argument("copy index out of range: " + to_string(p));
    const auto& child = *node.segment(sel).child;
    PointAddr c = canon_rec(child, p, pos + 1);
    if (is_terminal(child, c, 0, false)) {
        if (sel.index > 1) {
            CopySelector prev{sel.side, sel.index - 1};
            return prefixed(prev, terminal_addr(*node.segment(prev).child, true));
        }
        if (sel.side == Side::Right) return prefixed({Side::Left, 1}, terminal_addr(*node.left.front().child, false));
    }
    if (is_terminal(child, c, 0, true) && sel.side == Side::Right && sel.index == node.copies(Side::Right)) {
        CopySelector last{Side::Left, node.copies(Side::Left)};
        return prefixed(last, terminal_addr(*node.left.back().child, true));
    }
    return prefixed(sel, c);
}

struct Ends {
    Q ds, dt;
};

inline Q ring_dist(const Q& a, const Q& b, const Q& circumference) {
    Q d = a > b ? a - b : b - a;
    Q around = circumference - d;
    return around < d ? around : d;
}

// Ring positions of a segment's own s-terminal and t-terminal. The ring starts at
// s, runs along the left path to t (position D) and returns along the right path.
inline std::pair<Q, Q> junctions(const DiamondNode& node, CopySelector sel) {
    const auto& pref = node.pref(sel.side);
    auto k = static_cast<std::size_t>(sel.index);
    if (sel.side == Side::Left) return {pref[k - 1], pref[k]};
    Q circ = node.length * 2;
    return {circ - pref[k - 1], circ - pref[k]};
}

inline Ends from_junctions(const DiamondNode& node, const Q& a, const Q& b, const Q& j0, const Q& j1) {
    Q circ = node.length * 2;
    Ends e;
    e.ds = qmin(a + ring_dist(j0, Q(0), circ), b + ring_dist(j1, Q(0), circ));
    e.dt = qmin(a + ring_dist(j0, node.length, circ), b + ring_dist(j1, node.length, circ));
    return e;
}

inline Ends ends_rec(const DiamondNode& node, const PointAddr& p, std::size_t pos) {
    if (node.is_line) return {node.edge_len * p.base, node.edge_len * (node.edges - p.base)};
    const auto sel = p.levels[pos];
    const auto& seg = node.segment(sel);
    Ends c = ends_rec(*seg.child, p, pos + 1);
    auto [j0, j1] = junctions(node, sel);
    return from_junctions(node, c.ds * seg.scale, c.dt * seg.scale, j0, j1);
}

struct PairDist {
    Q d;
    Ends x, y;
};

inline PairDist dist_rec(const DiamondNode& node, const PointAddr& x, const PointAddr& y, std::size_t pos) {
    if (node.is_line) {
        Q d = node.edge_len * (x.base > y.base ? x.base - y.base : y.base - x.base);
        return {d,
                {node.edge_len * x.base, node.edge_len * (node.edges - x.base)},
                {node.edge_len * y.base, node.edge_len * (node.edges - y.base)}};
    }
    const auto sx = x.levels[pos];
    const auto sy = y.levels[pos];
    Q circ = node.length * 2;
    const auto& segx = node.segment(sx);
    auto [x0, x1] = junctions(node, sx);
    auto [y0, y1] = junctions(node, sy);
    PairDist r;
    if (sx == sy) {
        PairDist c = dist_rec(*segx.child, x, y, pos + 1);
        const Q& sc = segx.scale;
        Q rest = circ - sc * segx.child->length;
        Q a = c.x.ds * sc, b = c.x.dt * sc, a2 = c.y.ds * sc, b2 = c.y.dt * sc;
        r.d = qmin(c.d * sc, qmin(a + rest + b2, b + rest + a2));
        r.x = from_junctions(node, a, b, x0, x1);
        r.y = from_junctions(node, a2, b2, y0, y1);
        return r;
    }
    const auto& segy = node.segment(sy);
    Ends cx = ends_rec(*segx.child, x, pos + 1);
    Ends cy = ends_rec(*segy.child, y, pos + 1);
    Q a = cx.ds * segx.scale, b = cx.dt * segx.scale;
    Q a2 = cy.ds * segy.scale, b2 = cy.dt * segy.scale;
    const Q ex[2] = {a, b}, jx[2] = {x0, x1};
    const Q ey[2] = {a2, b2}, jy[2] = {y0, y1};
    bool first = true;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            Q v = ex[i] + ring_dist(jx[i], jy[j], circ) + ey[j];
            if (first || v < r.d) r.d = v;
            first = false;
        }
    r.x = from_junctions(node, a, b, x0, x1);
    r.y = from_junctions(node, a2, b2, y0, y1);
    return r;
}

inline void enumerate_rec(const DiamondNode& node, PointAddr& prefix, const std::function<void(PointAddr&)>& emit) {
    if (node.is_line) {
        for (std::int64_t b = 0; b <= node.edges; ++b) {
            prefix.base = b;
            emit(prefix);
        }
        return;
    }
    for (Side s : {Side::Left, Side::Right}) {
        int k = node.copies(s);
        for (int i = 1; i <= k; ++i) {
            CopySelector sel{s, i};
            const auto& child = *node.segment(sel).child;
            prefix.levels.push_back(sel);
            std::size_t pos = prefix.levels.size();
            enumerate_rec(child, prefix, [&](PointAddr& p) {
                if (is_terminal(child, p, pos, false) && !(s == Side::Left && i == 1)) return;
                if (is_terminal(child, p, pos, true) && s == Side::Right && i == k) return;
                emit(p);
            });
            prefix.levels.pop_back();
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ultrametrics

struct HstNode {
    Q weight{0};
    std::vector<HstNode> children;
    std::string label;
    bool is_leaf() const { return children.empty(); }
};

inline std::size_t hst_leaf_count(const HstNode& n) {
    if (n.is_leaf()) return 1;
    std::size_t c = 0;
    for (const auto& ch : n.children) c += hst_leaf_count(ch);
    return c;
}

inline void hst_leaves(const HstNode& n, std::vector<const HstNode*>& out) {
    if (n.is_leaf()) {
        out.push_back(&n);
        return;
    }
    for (const auto& ch : n.children) hst_leaves(ch, out);
}

// ---------------------------------------------------------------------------

using Descriptor = std::map<std::string, std::string>;

class MetricSpace {
public:
    virtual ~MetricSpace() = default;
    virtual std::string kind() const = 0;
    virtual Q distance(const PointAddr& x, const PointAddr& y) const = 0;
    // Skips address validation; callers guarantee canonical inputs.
    virtual Q distance_unchecked(const PointAddr& x, const PointAddr& y) const { return distance(x, y); }
    virtual PointAddr s() const = 0;
    virtual PointAddr t() const = 0;
    virtual Q diameter() const = 0;
    virtual std::int64_t point_count() const = 0;
    virtual bool is_valid(const PointAddr& p) const = 0;
    virtual PointAddr canonicalize(const PointAddr& p) const = 0;
    virtual const DiamondNode* diamond_root() const { return nullptr; }
    virtual Descriptor descriptor() const = 0;

    // Canonical points in lexicographic order; throws when the count exceeds `cap`.
    std::vector<PointAddr> points(std::int64_t cap = 100000) const {
        if (point_count() > cap)
            throw std::length_error("space has " + std::to_string(point_count()) + " points, cap is " +
                                    std::to_string(cap));
        return enumerate();
    }

    void require_valid(const PointAddr& p) const {
        if (!is_valid(p)) throw std::invalid_argument("invalid or non-canonical address " + to_string(p));
    }

protected:
    virtual std::vector<PointAddr> enumerate() const = 0;
};

using SpacePtr = std::shared_ptr<const MetricSpace>;

class DiamondSpace final : public MetricSpace {
public:
    DiamondSpace(NodePtr root, Descriptor desc) : root_(std::move(root)), desc_(std::move(desc)) {}

    std::string kind() const override { return desc_.at("kind"); }
    Q distance(const PointAddr& x, const PointAddr& y) const override {
        require_valid(x);
        require_valid(y);
        return detail::dist_rec(*root_, x, y, 0).d;
    }
    // Distance without validity checks, for hot loops over known-canonical points.
    Q distance_unchecked(const PointAddr& x, const PointAddr& y) const override { return detail::dist_rec(*root_, x, y, 0).d; }
    PointAddr s() const override { return detail::terminal_addr(*root_, false); }
    PointAddr t() const override { return detail::terminal_addr(*root_, true); }
    Q diameter() const override { return root_->length; }
    std::int64_t point_count() const override { return root_->count; }
    bool is_valid(const PointAddr& p) const override { return detail::valid_rec(*root_, p, 0); }
    PointAddr canonicalize(const PointAddr& p) const override { return detail::canon_rec(*root_, p, 0); }
    const DiamondNode* diamond_root() const override { return root_.get(); }
    Descriptor descriptor() const override { return desc_; }
    const NodePtr& root() const { return root_; }

protected:
    std::vector<PointAddr> enumerate() const override {
        std::vector<PointAddr> out;
        out.reserve(static_cast<std::size_t>(root_->count));
        PointAddr prefix;
        detail::enumerate_rec(*root_, prefix, [&](PointAddr& p) { out.push_back(p); });
        return out;
    }

private:
    NodePtr root_;
    Descriptor desc_;
};

class UniformSpace final : public MetricSpace {
public:
    UniformSpace(std::int64_t n, Q diam) : n_(n), diam_(diam) {
        if (n < 1) throw std::invalid_argument("uniform space needs at least one point");
        if (diam <= 0) throw std::invalid_argument("uniform diameter must be positive");
    }
    std::string kind() const override { return "uniform"; }
    Q distance(const PointAddr& x, const PointAddr& y) const override {
        require_valid(x);
        require_valid(y);
        return x.base == y.base ? Q(0) : diam_;
    }
    PointAddr s() const override { return flat_point(0); }
    PointAddr t() const override { return flat_point(n_ - 1); }
    Q diameter() const override { return n_ > 1 ? diam_ : Q(0); }
    std::int64_t point_count() const override { return n_; }
    bool is_valid(const PointAddr& p) const override { return p.levels.empty() && p.base >= 0 && p.base < n_; }
    PointAddr canonicalize(const PointAddr& p) const override {
        require_valid(p);
        return p;
    }
    Descriptor descriptor() const override {
        return {{"kind", "uniform"}, {"l", std::to_string(n_)}, {"diam", to_string(diam_)}};
    }

protected:
    std::vector<PointAddr> enumerate() const override {
        std::vector<PointAddr> out;
        for (std::int64_t i = 0; i < n_; ++i) out.push_back(flat_point(i));
        return out;
    }

private:
    std::int64_t n_;
    Q diam_;
};

class UltrametricSpace final : public MetricSpace {
public:
    explicit UltrametricSpace(HstNode root) : root_(std::move(root)) {
        flatten(root_, -1, 0);
        if (leaf_nodes_.empty()) throw std::invalid_argument("empty tree");
    }
    std::string kind() const override { return "ultrametric"; }
    Q distance(const PointAddr& x, const PointAddr& y) const override {
        require_valid(x);
        require_valid(y);
        return lca_weight(static_cast<std::size_t>(x.base), static_cast<std::size_t>(y.base));
    }
    Q lca_weight(std::size_t a, std::size_t b) const {
        if (a == b) return Q(0);
        int u = leaf_nodes_[a], v = leaf_nodes_[b];
        while (depth_[static_cast<std::size_t>(u)] > depth_[static_cast<std::size_t>(v)]) u = parent_[static_cast<std::size_t>(u)];
        while (depth_[static_cast<std::size_t>(v)] > depth_[static_cast<std::size_t>(u)]) v = parent_[static_cast<std::size_t>(v)];
        while (u != v) {
            u = parent_[static_cast<std::size_t>(u)];
            v = parent_[static_cast<std::size_t>(v)];
        }
        return weight_[static_cast<std::size_t>(u)];
    }
    PointAddr s() const override { return flat_point(0); }
    PointAddr t() const override { return flat_point(static_cast<std::int64_t>(leaf_nodes_.size()) - 1); }
    Q diameter() const override { return leaf_nodes_.size() > 1 ? root_.weight : Q(0); }
    std::int64_t point_count() const override { return static_cast<std::int64_t>(leaf_nodes_.size()); }
    bool is_valid(const PointAddr& p) const override {
        return p.levels.empty() && p.base >= 0 && p.base < point_count();
    }
    PointAddr canonicalize(const PointAddr& p) const override {
        require_valid(p);
        return p;
    }
    Descriptor descriptor() const override {
        return {{"kind", "ultrametric"}, {"leaves", std::to_string(leaf_nodes_.size())}};
    }
    const HstNode& tree() const { return root_; }
    const std::string& label(std::size_t leaf) const { return labels_.at(leaf); }
    std::optional<std::int64_t> find_label(const std::string& l) const {
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == l) return static_cast<std::int64_t>(i);
        return std::nullopt;
    }

protected:
    std::vector<PointAddr> enumerate() const override {
        std::vector<PointAddr> out;
        for (std::size_t i = 0; i < leaf_nodes_.size(); ++i) out.push_back(flat_point(static_cast<std::int64_t>(i)));
        return out;
    }

private:
    void flatten(const HstNode& n, int parent, int depth) {
        int id = static_cast<int>(parent_.size());
        parent_.push_back(parent);
        depth_.push_back(depth);
        weight_.push_back(n.weight);
        if (n.is_leaf()) {
            leaf_nodes_.push_back(id);
            labels_.push_back(n.label.empty() ? "x" + std::to_string(leaf_nodes_.size() - 1) : n.label);
            return;
        }
        for (const auto& c : n.children) flatten(c, id, depth + 1);
    }

    HstNode root_;
    std::vector<int> parent_, depth_, leaf_nodes_;
    std::vector<Q> weight_;
    std::vector<std::string> labels_;
};

struct WeightedEdge {
    std::int64_t u, v;
    Q len;
};

struct ExplicitGraph {
    std::vector<PointAddr> vertices;  // vertex i corresponds to a point of the source space
    std::vector<WeightedEdge> edges;
};

// Single-source shortest paths with exact lengths (Dijkstra).
inline std::vector<std::optional<Q>> graph_sssp(std::int64_t n, const std::vector<WeightedEdge>& edges, std::int64_t src) {
    std::vector<std::vector<std::pair<std::int64_t, Q>>> adj(static_cast<std::size_t>(n));
    for (const auto& e : edges) {
        adj[static_cast<std::size_t>(e.u)].push_back({e.v, e.len});
        adj[static_cast<std::size_t>(e.v)].push_back({e.u, e.len});
    }
    std::vector<std::optional<Q>> dist(static_cast<std::size_t>(n));
    using Item = std::pair<Q, std::int64_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[static_cast<std::size_t>(src)] = Q(0);
    pq.push({Q(0), src});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > *dist[static_cast<std::size_t>(u)]) continue;
        for (const auto& [v, len] : adj[static_cast<std::size_t>(u)]) {
            Q nd = d + len;
            auto& dv = dist[static_cast<std::size_t>(v)];
            if (!dv || nd < *dv) {
                dv = nd;
                pq.push({nd, v});
            }
        }
    }
    return dist;
}

class GraphSpace final : public MetricSpace {
public:
    GraphSpace(std::int64_t n, std::vector<WeightedEdge> edges) : n_(n), edges_(std::move(edges)) {
        if (n < 1) throw std::invalid_argument("graph needs a vertex");
        for (const auto& e : edges_)
            if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n || e.len <= 0)
                throw std::invalid_argument("bad edge");
        dist_.resize(static_cast<std::size_t>(n * n));
        for (std::int64_t s = 0; s < n; ++s) {
            auto d = graph_sssp(n, edges_, s);
            for (std::int64_t v = 0; v < n; ++v) {
                if (!d[static_cast<std::size_t>(v)]) throw std::invalid_argument("graph is disconnected");
                dist_[static_cast<std::size_t>(s * n + v)] = *d[static_cast<std::size_t>(v)];
                if (*d[static_cast<std::size_t>(v)] > diam_) diam_ = *d[static_cast<std::size_t>(v)];
            }
        }
    }
    std::string kind() const override { return "explicit_graph"; }
    Q distance(const PointAddr& x, const PointAddr& y) const override {
        require_valid(x);
        require_valid(y);
        return dist_[static_cast<std::size_t>(x.base * n_ + y.base)];
    }
    PointAddr s() const override { return flat_point(0); }
    PointAddr t() const override { return flat_point(n_ - 1); }
    Q diameter() const override { return diam_; }
    std::int64_t point_count() const override { return n_; }
    bool is_valid(const PointAddr& p) const override { return p.levels.empty() && p.base >= 0 && p.base < n_; }
    PointAddr canonicalize(const PointAddr& p) const override {
        require_valid(p);
        return p;
    }
    Descriptor descriptor() const override {
        return {{"kind", "explicit_graph"}, {"n", std::to_string(n_)}, {"edges", std::to_string(edges_.size())}};
    }
    const std::vector<WeightedEdge>& edges() const { return edges_; }

protected:
    std::vector<PointAddr> enumerate() const override {
        std::vector<PointAddr> out;
        for (std::int64_t i = 0; i < n_; ++i) out.push_back(flat_point(i));
        return out;
    }

private:
    std::int64_t n_;
    std::vector<WeightedEdge> edges_;
    std::vector<Q> dist_;
    Q diam_{0};
};

// ---------------------------------------------------------------------------
// Constructors

inline SpacePtr line_metric(std::int64_t beta) {
    if (beta < 1) throw std::invalid_argument("line needs beta >= 1");
    return std::make_shared<DiamondSpace>(make_line(beta), Descriptor{{"kind", "line"}, {"beta", std::to_string(beta)}, {"unit", "1"}});
}

inline SpacePtr uniform_metric(std::int64_t l, Q diam = Q(1)) { return std::make_shared<UniformSpace>(l, diam); }

inline std::string join_m(const std::vector<std::int64_t>& m) {
    std::string s;
    for (std::size_t i = 0; i < m.size(); ++i) s += (i ? "," : "") + std::to_string(m[i]);
    return s;
}

inline void check_m(int w, const std::vector<std::int64_t>& m) {
    if (w < 0) throw std::invalid_argument("level must be nonnegative");
    if (w >= 1 && m.size() < static_cast<std::size_t>(w)) throw std::invalid_argument("m sequence shorter than w");
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] < 1) throw std::invalid_argument("m entries must be positive");
        if (i && m[i] < m[i - 1]) throw std::invalid_argument("m sequence must be non-decreasing");
    }
}

inline NodePtr basic_node(int w, const std::vector<std::int64_t>& m) {
    NodePtr node = make_line(1);
    for (int v = 0; v < w; ++v) {
        auto k = static_cast<std::size_t>(3 * m[static_cast<std::size_t>(v)]);
        std::vector<Segment> path(k, Segment{node, Q(1)});
        node = make_cycle(path, path);
    }
    return node;
}

inline SpacePtr diamond_basic(int w, const std::vector<std::int64_t>& m) {
    check_m(w, m);
    return std::make_shared<DiamondSpace>(basic_node(w, m),
                                          Descriptor{{"kind", "diamond_basic"}, {"w", std::to_string(w)}, {"m", join_m(m)}, {"unit", "1"}});
}

// Refined levels: w is a base level iff alpha*w^2 <= 1.
inline bool refined_is_base(int w, double alpha) { return alpha * w * w <= 1.0; }

inline NodePtr refined_node(int w, std::int64_t beta, double alpha) {
    if (refined_is_base(w, alpha)) return make_line(beta);
    NodePtr child = refined_node(w - 1, beta, alpha);
    std::vector<Segment> path(3, Segment{child, Q(1)});
    return make_cycle(path, path);
}

inline int refined_levels_above_base(int w, double alpha) {
    int k = 0;
    while (!refined_is_base(w - k, alpha)) ++k;
    return k;
}

inline std::string format_double(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline SpacePtr diamond_refined(int w, std::int64_t beta, double alpha) {
    if (beta < 2) throw std::invalid_argument("refined construction needs beta >= 2");
    if (w < 0) throw std::invalid_argument("level must be nonnegative");
    if (!(alpha > 0)) throw std::invalid_argument("alpha must be positive");
    return std::make_shared<DiamondSpace>(refined_node(w, beta, alpha),
                                          Descriptor{{"kind", "diamond_refined"},
                                                     {"w", std::to_string(w)},
                                                     {"beta", std::to_string(beta)},
                                                     {"alpha", format_double(alpha)},
                                                     {"unit", "1"}});
}

// Per-level constant C_w of the bounded-width variant; the extra edge in front of
// each path has length C_w/m_w copy diameters.
using LgtEdgeRule = std::function<Q(int w, std::int64_t m_w)>;

inline LgtEdgeRule lgt_default_edge() {
    return [](int, std::int64_t m) { return Q(m); };
}

struct LgtLayout {
    // per path: segment 1 is the edge, segments 2..m^2+1 the scaled copies, then 2m full copies
    static int first_full(std::int64_t m) { return static_cast<int>(m * m + 2); }
    static int segment_of_logical(std::int64_t m, std::int64_t j) {  // j in (m, 3m]
        return static_cast<int>(m * m + 1 + (j - m));
    }
};

inline NodePtr lgt_node(int w, const std::vector<std::int64_t>& m, const LgtEdgeRule& rule) {
    NodePtr node = make_line(1);
    for (int v = 0; v < w; ++v) {
        std::int64_t mv = m[static_cast<std::size_t>(v)];
        Q c = rule(v, mv);
        if (c <= 0 || c > mv) throw std::invalid_argument("extra edge constant must lie in (0, m_w]");
        std::vector<Segment> path;
        path.push_back({make_line(1, c / mv * node->length), Q(1)});
        for (std::int64_t i = 0; i < mv * mv; ++i) path.push_back({node, Q(1, mv)});
        for (std::int64_t i = 0; i < 2 * mv; ++i) path.push_back({node, Q(1)});
        node = make_cycle(path, path);
    }
    return node;
}

inline SpacePtr lgt_variant(int w, const std::vector<std::int64_t>& m, LgtEdgeRule rule = lgt_default_edge()) {
    check_m(w, m);
    return std::make_shared<DiamondSpace>(lgt_node(w, m, rule),
                                          Descriptor{{"kind", "lgt_variant"}, {"w", std::to_string(w)}, {"m", join_m(m)}, {"unit", "1"}});
}

inline SpacePtr explicit_graph(std::int64_t n, std::vector<WeightedEdge> edges) {
    return std::make_shared<GraphSpace>(n, std::move(edges));
}

inline SpacePtr ultrametric(HstNode root) { return std::make_shared<UltrametricSpace>(std::move(root)); }

// ---------------------------------------------------------------------------
// Ultrametric helpers

inline Q ultrametric_distance(const HstNode& root, const std::string& a, const std::string& b) {
    UltrametricSpace sp(root);
    auto ia = sp.find_label(a), ib = sp.find_label(b);
    if (!ia || !ib) throw std::invalid_argument("leaf not in tree");
    return sp.lca_weight(static_cast<std::size_t>(*ia), static_cast<std::size_t>(*ib));
}

inline Q round_up_pow2(const Q& w) {
    Q p(1);
    while (p < w) p *= 2;
    return p;
}

namespace detail {
inline void check_hst(const HstNode& n, const Q* parent) {
    if (n.is_leaf()) return;
    if (n.weight <= 0) throw std::invalid_argument("internal weight must be positive");
    if (parent && n.weight > *parent) throw std::invalid_argument("weights must be non-increasing towards the leaves");
    for (const auto& c : n.children) check_hst(c, &n.weight);
}

inline HstNode preprocess_rec(const HstNode& n) {
    if (n.is_leaf()) return HstNode{Q(0), {}, n.label};
    HstNode out{round_up_pow2(n.weight), {}, n.label};
    for (const auto& c : n.children) {
        HstNode pc = preprocess_rec(c);
        if (!pc.is_leaf() && pc.weight == out.weight) {
            for (auto& g : pc.children) out.children.push_back(std::move(g));
        } else {
            out.children.push_back(std::move(pc));
        }
    }
    return out;
}
}  // namespace detail

// Rounds internal weights up to powers of two and contracts equal-weight parent/child pairs.
inline HstNode hst_preprocess(const HstNode& root) {
    detail::check_hst(root, nullptr);
    std::function<void(const HstNode&)> need_one = [&](const HstNode& n) {
        if (n.is_leaf()) return;
        if (n.weight < 1) throw std::invalid_argument("internal weights must be at least 1 (rescale first)");
        for (const auto& c : n.children) need_one(c);
    };
    need_one(root);
    return detail::preprocess_rec(root);
}

inline bool is_power_of_two(const Q& q) {
    if (q.denominator() != 1 || q.numerator() < 1) return false;
    auto v = q.numerator();
    return (v & (v - 1)) == 0;
}

// Every internal weight a power of two and each internal child at most half its parent.
inline bool is_2hst(const HstNode& n) {
    if (n.is_leaf()) return n.weight == Q(0);
    if (!is_power_of_two(n.weight)) return false;
    for (const auto& c : n.children) {
        if (!c.is_leaf() && c.weight * 2 > n.weight) return false;
        if (!is_2hst(c)) return false;
    }
    return true;
}

// Indented text: two spaces per depth; an internal line holds its weight, a line
// without deeper successors is a leaf and holds its label.
inline HstNode parse_hst(std::istream& in) {
    struct Line {
        int depth;
        std::string text;
    };
    std::vector<Line> lines;
    std::string raw;
    while (std::getline(in, raw)) {
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        auto first = raw.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        auto last = raw.find_last_not_of(" \t\r");
        int spaces = 0;
        for (std::size_t i = 0; i < first; ++i) spaces += raw[i] == '\t' ? 2 : 1;
        if (spaces % 2) throw std::invalid_argument("odd indentation in tree file");
        lines.push_back({spaces / 2, raw.substr(first, last - first + 1)});
    }
    if (lines.empty()) throw std::invalid_argument("empty tree");
    if (lines[0].depth != 0) throw std::invalid_argument("tree must start at depth 0");
    std::size_t pos = 0;
    std::function<HstNode(int)> rec = [&](int depth) -> HstNode {
        const Line& l = lines[pos++];
        bool has_children = pos < lines.size() && lines[pos].depth > depth;
        if (!has_children) return HstNode{Q(0), {}, l.text};
        HstNode n{parse_rational(l.text), {}, ""};
        while (pos < lines.size() && lines[pos].depth > depth) {
            if (lines[pos].depth != depth + 1) throw std::invalid_argument("indentation jumps by more than one level");
            n.children.push_back(rec(depth + 1));
        }
        return n;
    };
    HstNode root = rec(0);
    if (pos != lines.size()) throw std::invalid_argument("multiple roots in tree file");
    return root;
}

inline void write_hst(std::ostream& os, const HstNode& n, int depth = 0) {
    os << std::string(static_cast<std::size_t>(2 * depth), ' ');
    if (n.is_leaf()) {
        os << n.label << '\n';
        return;
    }
    os << to_string(n.weight) << '\n';
    for (const auto& c : n.children) write_hst(os, c, depth + 1);
}

// ---------------------------------------------------------------------------
// Materialization

inline ExplicitGraph materialize_graph(const MetricSpace& space, std::int64_t cap = 100000) {
    ExplicitGraph g;
    g.vertices = space.points(cap);
    std::map<PointAddr, std::int64_t> index;
    for (std::size_t i = 0; i < g.vertices.size(); ++i) index[g.vertices[i]] = static_cast<std::int64_t>(i);
    if (const DiamondNode* root = space.diamond_root()) {
        std::map<std::pair<std::int64_t, std::int64_t>, Q> dedup;
        std::function<void(const DiamondNode&, PointAddr&, const Q&)> walk = [&](const DiamondNode& n, PointAddr& pre, const Q& scale) {
            if (n.is_line) {
                for (std::int64_t b = 0; b < n.edges; ++b) {
                    PointAddr a = pre, c = pre;
                    a.base = b;
                    c.base = b + 1;
                    auto u = index.at(space.canonicalize(a));
                    auto v = index.at(space.canonicalize(c));
                    dedup[{std::min(u, v), std::max(u, v)}] = n.edge_len * scale;
                }
                return;
            }
            for (Side s : {Side::Left, Side::Right})
                for (int i = 1; i <= n.copies(s); ++i) {
                    const auto& seg = n.segment({s, i});
                    pre.levels.push_back({s, i});
                    walk(*seg.child, pre, scale * seg.scale);
                    pre.levels.pop_back();
                }
        };
        PointAddr pre;
        walk(*root, pre, Q(1));
        for (const auto& [uv, len] : dedup) g.edges.push_back({uv.first, uv.second, len});
        return g;
    }
    if (auto gs = dynamic_cast<const GraphSpace*>(&space)) {
        g.edges = gs->edges();
        return g;
    }
    // uniform and ultrametric spaces: complete graph carrying the metric itself
    for (std::size_t i = 0; i < g.vertices.size(); ++i)
        for (std::size_t j = i + 1; j < g.vertices.size(); ++j)
            g.edges.push_back({static_cast<std::int64_t>(i), static_cast<std::int64_t>(j), space.distance(g.vertices[i], g.vertices[j])});
    return g;
}

inline void write_edge_list(std::ostream& os, const ExplicitGraph& g) {
    os << "# vertices " << g.vertices.size() << " edges " << g.edges.size() << '\n';
    for (const auto& e : g.edges) os << e.u << ' ' << e.v << ' ' << to_string(e.len) << '\n';
}

inline GraphSpace read_edge_list(std::istream& in) {
    std::vector<WeightedEdge> edges;
    std::int64_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# vertices", 0) == 0) {
            std::istringstream hs(line.substr(10));
            hs >> n;
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::int64_t u, v;
        std::string len;
        if (!(ls >> u >> v >> len)) throw std::invalid_argument("bad edge line: " + line);
        edges.push_back({u, v, parse_rational(len)});
        n = std::max({n, u + 1, v + 1});
    }
    return GraphSpace(n, std::move(edges));
}

// ---------------------------------------------------------------------------
// Key-value documents ("key = value" per line, '#' comments)

inline Descriptor parse_kv(std::istream& in) {
    Descriptor d;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::invalid_argument("expected key = value: " + line);
            continue;
        }
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        d[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return d;
}

inline void write_kv(std::ostream& os, const Descriptor& d) {
    for (const auto& [k, v] : d) os << k << " = " << v << '\n';
}

inline std::vector<std::int64_t> parse_m(const std::string& s) {
    std::vector<std::int64_t> m;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) m.push_back(std::stoll(tok));
    return m;
}

inline SpacePtr space_from_descriptor(const Descriptor& d) {
    auto get = [&](const std::string& k) -> const std::string& {
        auto it = d.find(k);
        if (it == d.end()) throw std::invalid_argument("descriptor lacks key '" + k + "'");
        return it->second;
    };
    const std::string& kind = get("kind");
    if (kind == "line") return line_metric(std::stoll(get("beta")));
    if (kind == "uniform") return uniform_metric(std::stoll(get("l")), d.count("diam") ? parse_rational(get("diam")) : Q(1));
    if (kind == "diamond_basic") return diamond_basic(std::stoi(get("w")), parse_m(d.count("m") ? get("m") : ""));
    if (kind == "lgt_variant") return lgt_variant(std::stoi(get("w")), parse_m(d.count("m") ? get("m") : ""));
    if (kind == "diamond_refined") return diamond_refined(std::stoi(get("w")), std::stoll(get("beta")), std::stod(get("alpha")));
    throw std::invalid_argument("cannot rebuild space of kind '" + kind + "' from a descriptor");
}

}  // namespace mss
