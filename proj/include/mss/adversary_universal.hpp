#pragma once

#include "mss/algorithms.hpp"
#include "mss/games.hpp"
#include "mss/metrics.hpp"
#include "mss/requests.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mss {

enum class UniversalCase : std::uint8_t { Point, Uniform, Balanced, Binary };

inline std::string to_string(UniversalCase c) {
    switch (c) {
        case UniversalCase::Point: return "point";
        case UniversalCase::Uniform: return "uniform";
        case UniversalCase::Balanced: return "balanced";
        case UniversalCase::Binary: return "binary";
    }
    return "?";
}

// Leaves are indices into the ultrametric space built from the same (preprocessed) tree.
struct UniversalPlan {
    UniversalCase kind = UniversalCase::Point;
    std::vector<std::int64_t> leaves;  // U, sorted
    Q diam{0};
    std::int64_t n = 1;                // |U'|
    std::vector<std::int64_t> child_sizes;  // n_1 >= n_2 >= ... of U'
    int ell = 0;
    double alpha = 1.0 / 16;
    std::vector<UniversalPlan> parts;  // U_1..U_ell
    std::vector<std::int64_t> ranked;  // index of U_i's subtree among the root's children

    bool singleton() const { return leaves.size() == 1; }
    int part_of(std::int64_t leaf) const {
        for (std::size_t i = 0; i < parts.size(); ++i)
            if (std::binary_search(parts[i].leaves.begin(), parts[i].leaves.end(), leaf)) return static_cast<int>(i);
        return -1;
    }
};

// Size dichotomy on sorted sizes: 2 for the binary case, else the smallest l >= 3 with
// l^2 n_l >= n. Returns 0 when neither holds (cannot happen for non-increasing inputs).
inline int sqrt_dichotomy(const std::vector<std::int64_t>& sizes) {
    std::int64_t n = 0;
    for (auto s : sizes) n += s;
    if (sizes.size() >= 2) {
        std::int64_t n1 = sizes[0], n2 = sizes[1];
        std::int64_t rest = n - n1 - n2;
        if (rest <= 0 || 4 * n1 * n2 >= rest * rest) return 2;
    }
    for (std::size_t l = 3; l <= sizes.size(); ++l)
        if (static_cast<std::int64_t>(l * l) * sizes[l - 1] >= n) return static_cast<int>(l);
    return 0;
}

namespace detail {

inline UniversalPlan select_rec(const HstNode& node, std::int64_t& next_leaf, double alpha) {
    UniversalPlan p;
    p.alpha = alpha;
    if (node.is_leaf()) {
        p.leaves = {next_leaf++};
        p.n = 1;
        return p;
    }
    if (node.children.size() == 1) return select_rec(node.children[0], next_leaf, alpha);

    std::vector<std::int64_t> first(node.children.size()), size(node.children.size());
    for (std::size_t i = 0; i < node.children.size(); ++i) {
        first[i] = next_leaf;
        size[i] = static_cast<std::int64_t>(hst_leaf_count(node.children[i]));
        next_leaf += size[i];
    }
    std::vector<std::int64_t> order(node.children.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return size[static_cast<std::size_t>(a)] > size[static_cast<std::size_t>(b)];
    });
    for (auto i : order) p.child_sizes.push_back(size[static_cast<std::size_t>(i)]);
    p.n = next_leaf - first[0];
    p.diam = node.weight;

    int l = sqrt_dichotomy(p.child_sizes);
    if (l == 0) throw std::logic_error("size dichotomy failed");
    p.ell = l;
    bool uniform = false;
    if (l >= 3) {
        double nl = static_cast<double>(p.child_sizes[static_cast<std::size_t>(l - 1)]);
        uniform = std::log2(static_cast<double>(l)) >= 2 * alpha * std::log2(nl);
    }
    p.kind = l == 2 ? UniversalCase::Binary : uniform ? UniversalCase::Uniform : UniversalCase::Balanced;
    for (int r = 0; r < l; ++r) {
        auto ci = static_cast<std::size_t>(order[static_cast<std::size_t>(r)]);
        p.ranked.push_back(static_cast<std::int64_t>(ci));
        std::int64_t cursor = first[ci];
        UniversalPlan sub;
        if (uniform) {
            sub.leaves = {first[ci]};  // first leaf of the subtree
            sub.alpha = alpha;
        } else {
            sub = select_rec(node.children[ci], cursor, alpha);
        }
        p.leaves.insert(p.leaves.end(), sub.leaves.begin(), sub.leaves.end());
        p.parts.push_back(std::move(sub));
    }
    std::sort(p.leaves.begin(), p.leaves.end());
    return p;
}

}  // namespace detail

inline UniversalPlan select_subspace(const HstNode& root, double alpha = 1.0 / 16) {
    std::int64_t next = 0;
    return detail::select_rec(root, next, alpha);
}

// One draw from D with its chunk structure kept.
struct UniversalDraw;
struct UniversalChunk {
    int part = 0;
    bool hit = false;                   // singleton part: whether the request is issued
    std::vector<UniversalDraw> subs;    // non-singleton part
};
struct UniversalDraw {
    std::vector<UniversalChunk> chunks;
};

inline std::int64_t subchunk_count(const UniversalPlan& p, const UniversalPlan& part) {
    Q r = p.diam / (Q(2) * part.diam);
    if (r.denominator() != 1 || r.numerator() < 1) throw std::logic_error("diameter ratio is not a positive integer");
    return r.numerator();
}

inline UniversalDraw sample_draw(const UniversalPlan& p, std::mt19937_64& rng) {
    UniversalDraw d;
    if (p.singleton()) return d;
    std::uniform_int_distribution<int> pick(0, p.ell - 1);
    std::bernoulli_distribution coin(0.5);
    for (int c = 0; c < 2 * p.ell; ++c) {
        UniversalChunk ch;
        ch.part = pick(rng);
        const auto& part = p.parts[static_cast<std::size_t>(ch.part)];
        if (part.singleton()) {
            ch.hit = coin(rng);
        } else {
            std::int64_t k = subchunk_count(p, part);
            for (std::int64_t j = 0; j < k; ++j) ch.subs.push_back(sample_draw(part, rng));
        }
        d.chunks.push_back(std::move(ch));
    }
    return d;
}

// Forbidden point of every request, in order.
inline void flatten_draw(const UniversalPlan& p, const UniversalDraw& d, std::vector<std::int64_t>& out) {
    for (const auto& ch : d.chunks) {
        const auto& part = p.parts[static_cast<std::size_t>(ch.part)];
        if (part.singleton()) {
            if (ch.hit) out.push_back(part.leaves[0]);
        } else {
            for (const auto& s : ch.subs) flatten_draw(part, s, out);
        }
    }
}

inline std::size_t draw_length(const UniversalPlan& p, const UniversalDraw& d) {
    std::vector<std::int64_t> tmp;
    flatten_draw(p, d, tmp);
    return tmp.size();
}

// Requests forbid points of U only; `lift` adds the points of the space outside U.
inline RequestSeq draws_to_sequence(const MetricSpace& space, const UniversalPlan& p, const std::vector<UniversalDraw>& draws,
                                    bool lift) {
    std::vector<SetPtr> outside;
    if (lift)
        for (std::int64_t x = 0; x < space.point_count(); ++x)
            if (!std::binary_search(p.leaves.begin(), p.leaves.end(), x)) outside.push_back(point_set(flat_point(x)));
    RequestSeq seq;
    for (const auto& d : draws) {
        for (const auto& ch : d.chunks) {
            std::size_t begin = seq.requests.size();
            std::vector<std::int64_t> pts;
            const auto& part = p.parts[static_cast<std::size_t>(ch.part)];
            if (part.singleton()) {
                if (ch.hit) pts.push_back(part.leaves[0]);
            } else {
                for (const auto& s : ch.subs) flatten_draw(part, s, pts);
            }
            for (auto x : pts) {
                std::vector<SetPtr> atoms = outside;
                atoms.push_back(point_set(flat_point(x)));
                seq.requests.push_back(must_not_be_in(union_set(std::move(atoms))));
            }
            seq.chunks.push_back({begin, seq.requests.size(), std::nullopt, "universal-U" + std::to_string(ch.part + 1)});
        }
    }
    return seq;
}

inline RequestSeq sample_universal(const MetricSpace& space, const UniversalPlan& p, std::mt19937_64& rng, bool lift = true) {
    return draws_to_sequence(space, p, {sample_draw(p, rng)}, lift);
}

// Adds U' \ U to every request of a sequence produced without lifting.
inline RequestSeq lift_sequence(const MetricSpace& space, const UniversalPlan& p, const RequestSeq& seq) {
    std::vector<SetPtr> outside;
    for (std::int64_t x = 0; x < space.point_count(); ++x)
        if (!std::binary_search(p.leaves.begin(), p.leaves.end(), x)) outside.push_back(point_set(flat_point(x)));
    RequestSeq out = seq;
    for (auto& r : out.requests) {
        if (r.polarity != Polarity::MustNotBeIn) throw std::invalid_argument("lifting needs forbidden-set requests");
        std::vector<SetPtr> atoms = outside;
        atoms.push_back(r.atoms);
        r.atoms = union_set(std::move(atoms));
    }
    return out;
}

// Stays in its part; when a singleton part it occupies is forbidden, moves to the first leaf of
// the next part at the lowest level where that happens. Other requests: nearest eligible point.
class StayInside final : public MssAlgorithm {
public:
    explicit StayInside(UniversalPlan plan) : plan_(std::move(plan)) {}
    std::string name() const override { return "stay_inside"; }
    void reset(const MetricSpace&, const PointAddr&, std::uint64_t) override {}
    Decision step(const StepView& v) override {
        if (view_compliant(v)) return {v.current, false};
        if (v.current.levels.empty()) {
            const UniversalPlan* p = &plan_;
            const UniversalPlan* parent = nullptr;
            int idx = -1;
            while (!p->singleton()) {
                idx = p->part_of(v.current.base);
                if (idx < 0) break;
                parent = p;
                p = &p->parts[static_cast<std::size_t>(idx)];
            }
            if (p->singleton() && parent) {
                const auto& next = parent->parts[static_cast<std::size_t>((idx + 1) % parent->ell)];
                PointAddr target = flat_point(next.leaves[0]);
                if (std::binary_search(v.eligible.begin(), v.eligible.end(), target)) return {target, false};
            }
        }
        return fallback_.step(v);
    }

private:
    UniversalPlan plan_;
    Greedy fallback_;
};

// Exact optimum for forbidden-point requests on a uniform metric among `pts`, from `start`.
inline std::vector<std::int64_t> uniform_opt_positions(const std::vector<std::int64_t>& pts, const std::vector<std::int64_t>& forb,
                                                       std::int64_t start) {
    const std::size_t k = pts.size();
    const std::int64_t inf = std::numeric_limits<std::int64_t>::max() / 4;
    std::vector<std::int64_t> f(k, inf);
    for (std::size_t i = 0; i < k; ++i) f[i] = pts[i] == start ? 0 : 1;
    std::vector<std::size_t> from(forb.size() * k);
    for (std::size_t t = 0; t < forb.size(); ++t) {
        std::size_t arg = 0;
        for (std::size_t i = 1; i < k; ++i)
            if (f[i] < f[arg]) arg = i;
        std::int64_t mn = f[arg];
        std::vector<std::int64_t> g(k, inf);
        for (std::size_t i = 0; i < k; ++i) {
            if (pts[i] == forb[t]) continue;
            if (f[i] <= mn + 1) {
                g[i] = f[i];
                from[t * k + i] = i;
            } else {
                g[i] = mn + 1;
                from[t * k + i] = arg;
            }
        }
        f = std::move(g);
    }
    std::vector<std::int64_t> pos(forb.size());
    if (forb.empty()) return pos;
    std::size_t cur = 0;
    for (std::size_t i = 1; i < k; ++i)
        if (f[i] < f[cur]) cur = i;
    for (std::size_t t = forb.size(); t-- > 0;) {
        pos[t] = pts[cur];
        cur = from[t * k + cur];
    }
    return pos;
}

inline int balanced_phase_length(const UniversalPlan& p) {
    double nl = static_cast<double>(p.child_sizes[static_cast<std::size_t>(p.ell - 1)]);
    double lg = std::log2(nl);
    return std::max(1, static_cast<int>(std::ceil(p.alpha * lg * lg / std::log2(static_cast<double>(p.ell)))));
}

struct BinaryPhaseParams {
    double delta1 = 1, delta2 = 1;
    int mu = 1;
};

inline BinaryPhaseParams binary_phase_params(const UniversalPlan& p) {
    double n1 = static_cast<double>(p.child_sizes[0]), n2 = static_cast<double>(p.child_sizes[1]);
    BinaryPhaseParams b;
    double l1 = std::log2(n1);
    if (l1 <= 0) return b;
    b.delta1 = std::min(1.0, std::max(1 / std::sqrt(p.alpha), std::log2(n1 / n2)) / l1);
    b.delta2 = 1 - (1 - b.delta1) * std::log2(n2) / l1;
    b.mu = std::max(1, static_cast<int>(std::ceil(8 * p.alpha * l1 / b.delta1)));
    return b;
}

inline int phase_length(const UniversalPlan& p) {
    if (p.kind == UniversalCase::Balanced) return balanced_phase_length(p);
    if (p.kind == UniversalCase::Binary) return binary_phase_params(p).mu;
    return 1;
}

namespace detail {

// Positions (leaf indices) of the phase heuristic for every request of `draws`, starting at `start` in U.
inline std::vector<std::int64_t> phase_positions(const UniversalPlan& p, const std::vector<const UniversalDraw*>& draws,
                                                 std::int64_t start) {
    std::vector<std::int64_t> forb;
    for (auto* d : draws) flatten_draw(p, *d, forb);
    if (p.singleton()) return std::vector<std::int64_t>(forb.size(), start);
    bool all_single = std::all_of(p.parts.begin(), p.parts.end(), [](const UniversalPlan& q) { return q.singleton(); });
    if (all_single) return uniform_opt_positions(p.leaves, forb, start);

    const auto ell = static_cast<std::size_t>(p.ell);
    const int mu = phase_length(p);
    const std::size_t phases = (draws.size() + static_cast<std::size_t>(mu) - 1) / static_cast<std::size_t>(mu);
    int home = p.part_of(start);
    std::vector<int> choice(phases);
    for (std::size_t ph = 0; ph < phases; ++ph) {
        std::vector<std::int64_t> cnt(ell, 0);
        std::size_t lo = ph * static_cast<std::size_t>(mu), hi = std::min(draws.size(), lo + static_cast<std::size_t>(mu));
        for (std::size_t d = lo; d < hi; ++d)
            for (const auto& ch : draws[d]->chunks) ++cnt[static_cast<std::size_t>(ch.part)];
        if (p.kind == UniversalCase::Binary) {
            auto bp = binary_phase_params(p);
            bool complete = hi - lo == static_cast<std::size_t>(mu);
            double limit = (1 - bp.delta2) * 2 * mu;
            choice[ph] = complete && static_cast<double>(cnt[1]) <= limit ? 1 : 0;
            if (p.parts[static_cast<std::size_t>(choice[ph])].singleton() && cnt[static_cast<std::size_t>(choice[ph])] > 0)
                choice[ph] = 1 - choice[ph];
        } else {
            int best = ph == 0 ? home : choice[ph - 1];
            for (std::size_t i = 0; i < ell; ++i)
                if (cnt[i] < cnt[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
            choice[ph] = best;
        }
    }

    // Per part, the subchunks served while residing there, as one concatenated recursive instance.
    std::vector<std::vector<const UniversalDraw*>> mine(ell);
    for (std::size_t d = 0; d < draws.size(); ++d) {
        int here = choice[d / static_cast<std::size_t>(mu)];
        for (const auto& ch : draws[d]->chunks)
            if (ch.part == here)
                for (const auto& s : ch.subs) mine[static_cast<std::size_t>(here)].push_back(&s);
    }
    std::vector<std::int64_t> resume(ell);
    std::vector<std::vector<std::int64_t>> track(ell);
    for (std::size_t i = 0; i < ell; ++i) {
        resume[i] = static_cast<int>(i) == home ? start : p.parts[i].leaves[0];
        track[i] = phase_positions(p.parts[i], mine[i], resume[i]);
    }
    std::vector<std::size_t> used(ell, 0);

    std::vector<std::int64_t> pos;
    pos.reserve(forb.size());
    std::int64_t cur = start;
    for (std::size_t d = 0; d < draws.size(); ++d) {
        auto here = static_cast<std::size_t>(choice[d / static_cast<std::size_t>(mu)]);
        if (d % static_cast<std::size_t>(mu) == 0 && p.part_of(cur) != static_cast<int>(here)) cur = resume[here];
        for (const auto& ch : draws[d]->chunks) {
            const auto& part = p.parts[static_cast<std::size_t>(ch.part)];
            if (part.singleton()) {
                if (ch.hit) pos.push_back(cur);
                continue;
            }
            std::vector<std::int64_t> tmp;
            for (const auto& s : ch.subs) flatten_draw(part, s, tmp);
            for (std::size_t r = 0; r < tmp.size(); ++r) {
                if (static_cast<std::size_t>(ch.part) == here) {
                    cur = track[here][used[here]++];
                    resume[here] = cur;
                }
                pos.push_back(cur);
            }
        }
    }
    return pos;
}

}  // namespace detail

struct HeuristicResult {
    Q cost{0};
    std::vector<PointAddr> trajectory;
    int mu = 1;
};

// Phase-based offline strategy: an upper bound on OPT for the concatenation of `draws`.
inline HeuristicResult offline_phase_heuristic(const MetricSpace& space, const UniversalPlan& p,
                                               const std::vector<UniversalDraw>& draws, const PointAddr& start, bool lift = true) {
    if (p.kind != UniversalCase::Balanced && p.kind != UniversalCase::Binary)
        throw std::invalid_argument("phase heuristic needs the balanced or binary case");
    HeuristicResult res;
    res.mu = phase_length(p);
    if (static_cast<int>(draws.size()) < res.mu) throw std::invalid_argument("fewer draws than one phase");
    std::vector<const UniversalDraw*> ptrs;
    for (const auto& d : draws) ptrs.push_back(&d);
    auto pos = detail::phase_positions(p, ptrs, start.base);
    for (auto x : pos) res.trajectory.push_back(flat_point(x));
    RequestSeq seq = draws_to_sequence(space, p, draws, lift);
    TrajectoryAgent agent(res.trajectory);
    res.cost = run_mss(space, seq, agent, start).total;
    return res;
}

struct CouponResult {
    std::map<std::string, double> mean_online;
    double mean_opt = 0;
    std::map<std::string, double> ratio;
    double target = 0;  // H_{l-1}
};

// Uniform case on l points of diameter 1: h draws of 2l chunks, each empty or a random forbidden point.
inline CouponResult coupon_collector_ratio(int ell, int h, int trials, std::uint64_t seed,
                                           const std::vector<std::string>& algorithms = {"random_eligible", "greedy"}) {
    if (ell < 2) throw std::invalid_argument("need at least two points");
    auto space = uniform_metric(ell, Q(1));
    UniversalPlan plan;
    plan.kind = UniversalCase::Uniform;
    plan.ell = ell;
    plan.n = ell;
    plan.diam = Q(1);
    plan.child_sizes.assign(static_cast<std::size_t>(ell), 1);
    for (int i = 0; i < ell; ++i) {
        UniversalPlan q;
        q.leaves = {i};
        plan.parts.push_back(q);
        plan.leaves.push_back(i);
    }
    std::vector<std::int64_t> pts(static_cast<std::size_t>(ell));
    for (int i = 0; i < ell; ++i) pts[static_cast<std::size_t>(i)] = i;

    CouponResult out;
    for (int j = 1; j < ell; ++j) out.target += 1.0 / j;
    std::mt19937_64 rng(seed);
    for (int t = 0; t < trials; ++t) {
        std::vector<UniversalDraw> draws;
        for (int i = 0; i < h; ++i) draws.push_back(sample_draw(plan, rng));
        RequestSeq seq = draws_to_sequence(*space, plan, draws, false);
        std::vector<std::int64_t> forb;
        for (const auto& d : draws) flatten_draw(plan, d, forb);
        auto start = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(ell));
        auto pos = uniform_opt_positions(pts, forb, start);
        std::int64_t opt = 0, cur = start;
        for (auto x : pos) opt += x != cur ? 1 : 0, cur = x;
        out.mean_opt += static_cast<double>(opt);
        for (const auto& name : algorithms) {
            auto alg = make_algorithm(name);
            RunOptions ro;
            ro.record_trajectory = false;
            ro.seed = seed * 1000003ULL + static_cast<std::uint64_t>(t);
            out.mean_online[name] += to_double(run_mss(*space, seq, *alg, flat_point(start), ro).total);
        }
    }
    out.mean_opt /= trials;
    for (auto& [k, v] : out.mean_online) {
        v /= trials;
        out.ratio[k] = out.mean_opt > 0 ? v / out.mean_opt : std::numeric_limits<double>::infinity();
    }
    return out;
}

// Random HST with at most `max_leaves` leaves; weights shrink by a factor 2 or 4 per level.
inline HstNode random_hst(std::mt19937_64& rng, int max_leaves, int max_children = 5) {
    std::int64_t leaves = 0;
    std::function<HstNode(Q, int)> grow = [&](Q w, int budget) -> HstNode {
        std::uniform_real_distribution<double> u(0, 1);
        if (budget <= 1 || w < 2 || u(rng) < 0.2) {
            ++leaves;
            return HstNode{Q(0), {}, "x" + std::to_string(leaves - 1)};
        }
        int k = std::uniform_int_distribution<int>(2, std::min(max_children, budget))(rng);
        std::vector<int> share(static_cast<std::size_t>(k), 1);
        std::uniform_int_distribution<int> who(0, k - 1);
        for (int extra = budget - k; extra > 0; --extra)
            if (u(rng) < 0.7) ++share[static_cast<std::size_t>(who(rng))];
        HstNode n{w, {}, ""};
        for (int b : share) n.children.push_back(grow(w / Q(u(rng) < 0.5 ? 2 : 4), b));
        return n;
    };
    return hst_preprocess(grow(Q(1 << 12), max_leaves));
}

}  // namespace mss
