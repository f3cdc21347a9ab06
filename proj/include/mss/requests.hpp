#pragma once

#include "mss/metrics.hpp"

#include <algorithm>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mss {

enum class Polarity : std::uint8_t { MustBeIn, MustNotBeIn };

// Immutable set descriptors shared as a DAG. A Point leaf holds an address relative
// to the copy it sits in and must be canonical there.
struct SetNode;
using SetPtr = std::shared_ptr<const SetNode>;

struct SetNode {
    enum class Kind : std::uint8_t { Empty, Point, Prefixed, Union };
    Kind kind = Kind::Empty;
    PointAddr point;
    CopySelector sel;
    std::vector<SetPtr> parts;
};

inline SetPtr empty_set() {
    static const SetPtr e = std::make_shared<SetNode>();
    return e;
}

inline SetPtr point_set(PointAddr p) {
    auto n = std::make_shared<SetNode>();
    n->kind = SetNode::Kind::Point;
    n->point = std::move(p);
    return n;
}

inline SetPtr prefix_set(CopySelector sel, SetPtr child) {
    if (child->kind == SetNode::Kind::Empty) return child;
    auto n = std::make_shared<SetNode>();
    n->kind = SetNode::Kind::Prefixed;
    n->sel = sel;
    n->parts.push_back(std::move(child));
    return n;
}

inline SetPtr union_set(std::vector<SetPtr> parts) {
    std::vector<SetPtr> kept;
    for (auto& p : parts)
        if (p && p->kind != SetNode::Kind::Empty) kept.push_back(std::move(p));
    if (kept.empty()) return empty_set();
    if (kept.size() == 1) return kept.front();
    auto n = std::make_shared<SetNode>();
    n->kind = SetNode::Kind::Union;
    n->parts = std::move(kept);
    return n;
}

inline SetPtr union_set(SetPtr a, SetPtr b) { return union_set(std::vector<SetPtr>{std::move(a), std::move(b)}); }

struct RequestSet {
    SetPtr atoms = empty_set();
    Polarity polarity = Polarity::MustBeIn;
};

inline RequestSet must_be_in(SetPtr s) { return {std::move(s), Polarity::MustBeIn}; }
inline RequestSet must_not_be_in(SetPtr s) { return {std::move(s), Polarity::MustNotBeIn}; }

namespace detail {

inline bool suffix_equals(const PointAddr& p, std::size_t pos, const PointAddr& q) {
    if (p.base != q.base || p.levels.size() != pos + q.levels.size()) return false;
    return std::equal(q.levels.begin(), q.levels.end(), p.levels.begin() + static_cast<std::ptrdiff_t>(pos));
}

inline bool contains_rec(const SetNode& s, const DiamondNode* node, const PointAddr& p, std::size_t pos) {
    switch (s.kind) {
        case SetNode::Kind::Empty:
            return false;
        case SetNode::Kind::Point:
            return suffix_equals(p, pos, s.point);
        case SetNode::Kind::Union:
            for (const auto& part : s.parts)
                if (contains_rec(*part, node, p, pos)) return true;
            return false;
        case SetNode::Kind::Prefixed: {
            if (!node || node->is_line) throw std::invalid_argument("copy prefix used outside a recursive space");
            if (s.sel.index < 1 || s.sel.index > node->copies(s.sel.side)) throw std::invalid_argument("copy prefix out of range");
            const DiamondNode* child = node->segment(s.sel).child.get();
            if (pos < p.levels.size() && p.levels[pos] == s.sel) return contains_rec(*s.parts[0], child, p, pos + 1);
            // p may still be a glued terminal of this copy written under a neighbouring copy
            for (bool want_t : {false, true}) {
                PointAddr term = terminal_addr(*child, want_t);
                if (!suffix_equals(p, pos, canon_rec(*node, prefixed(s.sel, term), 0))) continue;
                if (contains_rec(*s.parts[0], child, term, 0)) return true;
            }
            return false;
        }
    }
    return false;
}

inline void flatten_rec(const SetNode& s, PointAddr& prefix, std::vector<PointAddr>& out) {
    switch (s.kind) {
        case SetNode::Kind::Empty:
            return;
        case SetNode::Kind::Point: {
            PointAddr full = prefix;
            full.levels.insert(full.levels.end(), s.point.levels.begin(), s.point.levels.end());
            full.base = s.point.base;
            out.push_back(std::move(full));
            return;
        }
        case SetNode::Kind::Union:
            for (const auto& part : s.parts) flatten_rec(*part, prefix, out);
            return;
        case SetNode::Kind::Prefixed:
            prefix.levels.push_back(s.sel);
            flatten_rec(*s.parts[0], prefix, out);
            prefix.levels.pop_back();
            return;
    }
}

}  // namespace detail

// Membership in the atoms, ignoring polarity.
inline bool contains(const MetricSpace& space, const RequestSet& set, const PointAddr& p) {
    return detail::contains_rec(*set.atoms, space.diamond_root(), p, 0);
}

// Canonical members of the atoms, sorted and deduplicated.
inline std::vector<PointAddr> atom_members(const MetricSpace& space, const SetPtr& atoms) {
    std::vector<PointAddr> raw;
    PointAddr prefix;
    detail::flatten_rec(*atoms, prefix, raw);
    for (auto& p : raw) p = space.canonicalize(p);
    std::sort(raw.begin(), raw.end());
    raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
    return raw;
}

// Points that satisfy the request once polarity is applied.
inline std::vector<PointAddr> eligible_points(const MetricSpace& space, const RequestSet& set) {
    auto members = atom_members(space, set.atoms);
    if (set.polarity == Polarity::MustBeIn) return members;
    std::vector<PointAddr> all = space.points(), out;
    std::set_difference(all.begin(), all.end(), members.begin(), members.end(), std::back_inserter(out));
    return out;
}

inline bool satisfies(const MetricSpace& space, const RequestSet& set, const PointAddr& p) {
    bool in = contains(space, set, p);
    return set.polarity == Polarity::MustBeIn ? in : !in;
}

// Nearest eligible point; ties go to the lexicographically smallest address.
inline std::pair<PointAddr, Q> nearest_among(const MetricSpace& space, const std::vector<PointAddr>& eligible, const PointAddr& from) {
    if (eligible.empty()) throw std::invalid_argument("request admits no point");
    std::size_t best = 0;
    Q bd = space.distance(from, eligible[0]);
    for (std::size_t i = 1; i < eligible.size() && bd > Q(0); ++i) {
        Q d = space.distance(from, eligible[i]);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return {eligible[best], bd};
}

inline std::pair<PointAddr, Q> nearest_in(const MetricSpace& space, const RequestSet& set, const PointAddr& from) {
    if (satisfies(space, set, from)) return {from, Q(0)};
    return nearest_among(space, eligible_points(space, set), from);
}

// ---------------------------------------------------------------------------
// Offline witnesses: trajectories described symbolically, with side choices that
// are fixed only once a generator has decided which path survives.

struct WitnessNode;
using WitnessPtr = std::shared_ptr<const WitnessNode>;
using SideCell = std::shared_ptr<int>;  // -1 undecided, 0 left, 1 right

struct WitnessNode {
    enum class Kind : std::uint8_t { Leaf, Prefix, Choice };
    Kind kind = Kind::Leaf;
    PointAddr point;
    CopySelector sel;
    WitnessPtr a, b;
    SideCell cell;
};

inline WitnessPtr witness_leaf(PointAddr p) {
    auto n = std::make_shared<WitnessNode>();
    n->point = std::move(p);
    return n;
}

inline WitnessPtr witness_prefix(CopySelector sel, WitnessPtr child) {
    auto n = std::make_shared<WitnessNode>();
    n->kind = WitnessNode::Kind::Prefix;
    n->sel = sel;
    n->a = std::move(child);
    return n;
}

inline WitnessPtr witness_choice(SideCell cell, WitnessPtr left, WitnessPtr right) {
    auto n = std::make_shared<WitnessNode>();
    n->kind = WitnessNode::Kind::Choice;
    n->cell = std::move(cell);
    n->a = std::move(left);
    n->b = std::move(right);
    return n;
}

inline SideCell new_side_cell() { return std::make_shared<int>(-1); }

inline PointAddr resolve_witness(const WitnessPtr& w) {
    PointAddr out;
    const WitnessNode* cur = w.get();
    while (true) {
        switch (cur->kind) {
            case WitnessNode::Kind::Leaf:
                out.levels.insert(out.levels.end(), cur->point.levels.begin(), cur->point.levels.end());
                out.base = cur->point.base;
                return out;
            case WitnessNode::Kind::Prefix:
                out.levels.push_back(cur->sel);
                cur = cur->a.get();
                break;
            case WitnessNode::Kind::Choice:
                if (*cur->cell < 0) throw std::logic_error("witness side not decided yet");
                cur = (*cur->cell == 0 ? cur->a : cur->b).get();
                break;
        }
    }
}

// ---------------------------------------------------------------------------

struct ChunkInfo {
    std::size_t begin = 0, end = 0;  // request index range [begin, end)
    std::optional<double> size;
    std::string stage;
};

struct RequestSeq {
    std::vector<RequestSet> requests;
    std::vector<ChunkInfo> chunks;
    std::vector<WitnessPtr> witness;  // optional offline certificate, one per request
    std::string size_mode;

    std::size_t size() const { return requests.size(); }
};

inline std::vector<PointAddr> resolve_witnesses(const MetricSpace& space, const RequestSeq& seq) {
    if (seq.witness.size() != seq.requests.size()) throw std::logic_error("sequence carries no witness");
    std::vector<PointAddr> out;
    out.reserve(seq.witness.size());
    for (const auto& w : seq.witness) out.push_back(space.canonicalize(resolve_witness(w)));
    return out;
}

// Line format: "IN"/"OUT" then canonical member addresses; chunk headers as comments.
inline void write_sequence(std::ostream& os, const MetricSpace& space, const RequestSeq& seq) {
    std::size_t next_chunk = 0;
    for (std::size_t i = 0; i < seq.requests.size(); ++i) {
        while (next_chunk < seq.chunks.size() && seq.chunks[next_chunk].begin == i) {
            const auto& c = seq.chunks[next_chunk];
            os << "# chunk " << (next_chunk + 1) << " size=";
            if (c.size) os << format_double(*c.size); else os << "na";
            os << " stage=" << (c.stage.empty() ? "none" : c.stage) << '\n';
            ++next_chunk;
        }
        const auto& r = seq.requests[i];
        os << (r.polarity == Polarity::MustBeIn ? "IN" : "OUT");
        for (const auto& p : atom_members(space, r.atoms)) os << ' ' << to_string(p);
        os << '\n';
    }
    while (next_chunk < seq.chunks.size()) {  // empty trailing chunks
        const auto& c = seq.chunks[next_chunk];
        os << "# chunk " << (next_chunk + 1) << " size=" << (c.size ? format_double(*c.size) : "na")
           << " stage=" << (c.stage.empty() ? "none" : c.stage) << '\n';
        ++next_chunk;
    }
}

inline RequestSeq read_sequence(std::istream& in) {
    RequestSeq seq;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string word;
            hs >> word;
            if (word != "chunk") continue;
            ChunkInfo c;
            std::size_t idx;
            hs >> idx;
            std::string kv;
            while (hs >> kv) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
                if (k == "size" && v != "na") c.size = std::stod(v);
                if (k == "stage") c.stage = v;
            }
            c.begin = c.end = seq.requests.size();
            if (!seq.chunks.empty()) seq.chunks.back().end = seq.requests.size();
            seq.chunks.push_back(c);
            continue;
        }
        std::istringstream ls(line);
        std::string pol;
        ls >> pol;
        if (pol != "IN" && pol != "OUT") throw std::invalid_argument("bad request line: " + line);
        std::vector<SetPtr> atoms;
        std::string tok;
        while (ls >> tok) atoms.push_back(point_set(parse_point(tok)));
        seq.requests.push_back({union_set(std::move(atoms)), pol == "IN" ? Polarity::MustBeIn : Polarity::MustNotBeIn});
    }
    if (!seq.chunks.empty()) seq.chunks.back().end = seq.requests.size();
    return seq;
}

inline void write_size_manifest(std::ostream& os, const RequestSeq& seq) {
    os << "chunk,begin,end,size,stage\n";
    for (std::size_t i = 0; i < seq.chunks.size(); ++i) {
        const auto& c = seq.chunks[i];
        os << (i + 1) << ',' << c.begin << ',' << c.end << ',' << (c.size ? format_double(*c.size) : "") << ',' << c.stage << '\n';
    }
}

}  // namespace mss
