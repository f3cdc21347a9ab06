#pragma once

#include "mss/adversary_basic.hpp"
#include "mss/adversary_refined.hpp"
#include "mss/adversary_universal.hpp"
#include "mss/algorithms.hpp"
#include "mss/games.hpp"
#include "mss/metrics.hpp"
#include "mss/requests.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mss {

// ---------------------------------------------------------------------------
// Statistics

struct Moments {
    double n = 0, sum = 0, sq = 0;
    void add(double x) {
        n += 1;
        sum += x;
        sq += x * x;
    }
    double mean() const { return n > 0 ? sum / n : 0; }
    double var() const { return n > 1 ? std::max(0.0, (sq - sum * sum / n) / (n - 1)) : 0; }
    double se() const { return n > 0 ? std::sqrt(var() / n) : 0; }
};

constexpr double kZ95 = 1.959963984540054;

struct RatioEstimate {
    double ratio = 0, lo = 0, hi = 0;
};

// Ratio of means with a normal interval from the delta method.
inline RatioEstimate ratio_of_means(const std::vector<double>& num, const std::vector<double>& den) {
    if (num.size() != den.size() || num.empty()) throw std::invalid_argument("ratio needs paired nonempty samples");
    const double n = static_cast<double>(num.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < num.size(); ++i) mx += num[i], my += den[i];
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, cxy = 0;
    for (std::size_t i = 0; i < num.size(); ++i) {
        vx += (num[i] - mx) * (num[i] - mx);
        vy += (den[i] - my) * (den[i] - my);
        cxy += (num[i] - mx) * (den[i] - my);
    }
    if (n > 1) vx /= n - 1, vy /= n - 1, cxy /= n - 1;
    RatioEstimate r;
    r.ratio = my != 0 ? mx / my : std::numeric_limits<double>::infinity();
    double v = my != 0 ? (vx + r.ratio * r.ratio * vy - 2 * r.ratio * cxy) / (n * my * my) : 0;
    double half = kZ95 * std::sqrt(std::max(0.0, v));
    r.lo = r.ratio - half;
    r.hi = r.ratio + half;
    return r;
}

// ---------------------------------------------------------------------------
// Ratio tables

struct RatioRow {
    int w = 0;
    std::string algorithm;
    int trials = 0;
    double mean_cost = 0, mean_opt = 0, ratio = 0, ci_low = 0, ci_high = 0;
    std::string opt_source;  // dp, certificate or heuristic
    double additive = 0;     // constant subtracted from the online cost before dividing
    double adjusted_ratio() const { return mean_opt > 0 ? (mean_cost - additive) / mean_opt : 0.0; }
};

// the adjusted column only appears when some row carries a nonzero constant
inline void write_rows_csv(std::ostream& os, const std::vector<RatioRow>& rows) {
    bool adj = std::any_of(rows.begin(), rows.end(), [](const RatioRow& r) { return r.additive != 0; });
    os << "w,algorithm,trials,mean_cost,mean_opt,ratio,ci_low,ci_high" << (adj ? ",adjusted_ratio" : "") << '\n';
    os << std::setprecision(10);
    for (const auto& r : rows) {
        os << r.w << ',' << r.algorithm << ',' << r.trials << ',' << r.mean_cost << ',' << r.mean_opt << ',' << r.ratio << ','
           << r.ci_low << ',' << r.ci_high;
        if (adj) os << ',' << r.adjusted_ratio();
        os << '\n';
    }
}

inline nlohmann::json rows_to_json(const std::vector<RatioRow>& rows) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : rows)
        a.push_back({{"w", r.w},
                     {"algorithm", r.algorithm},
                     {"trials", r.trials},
                     {"mean_cost", r.mean_cost},
                     {"mean_opt", r.mean_opt},
                     {"ratio", r.ratio},
                     {"ci_low", r.ci_low},
                     {"ci_high", r.ci_high},
                     {"opt_source", r.opt_source},
                     {"additive", r.additive},
                     {"adjusted_ratio", r.adjusted_ratio()}});
    return a;
}

// ---------------------------------------------------------------------------
// Mirroring t -> s on symmetric diamonds

namespace detail {

inline PointAddr reflect_rec(const DiamondNode& node, const PointAddr& p, std::size_t pos) {
    if (node.is_line) return PointAddr{{}, node.edges - p.base};
    const auto sel = p.levels.at(pos);
    CopySelector r{sel.side, node.copies(sel.side) + 1 - sel.index};
    return prefixed(r, reflect_rec(*node.segment(r).child, p, pos + 1));
}

inline PointAddr reflect_point(const DiamondNode& node, const PointAddr& p) { return canon_rec(node, reflect_rec(node, p, 0), 0); }

inline CopySelector reflect_sel(const DiamondNode& node, CopySelector sel) {
    return {sel.side, node.copies(sel.side) + 1 - sel.index};
}

inline SetPtr reflect_set(const DiamondNode& node, const SetPtr& s, std::map<std::pair<const SetNode*, const DiamondNode*>, SetPtr>& memo) {
    auto key = std::make_pair(s.get(), &node);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    SetPtr out;
    switch (s->kind) {
        case SetNode::Kind::Empty: out = s; break;
        case SetNode::Kind::Point: out = point_set(reflect_point(node, s->point)); break;
        case SetNode::Kind::Prefixed: {
            auto r = reflect_sel(node, s->sel);
            out = prefix_set(r, reflect_set(*node.segment(r).child, s->parts[0], memo));
            break;
        }
        case SetNode::Kind::Union: {
            std::vector<SetPtr> parts;
            for (const auto& p : s->parts) parts.push_back(reflect_set(node, p, memo));
            out = union_set(std::move(parts));
            break;
        }
    }
    memo[key] = out;
    return out;
}

inline WitnessPtr reflect_witness(const DiamondNode& node, const WitnessPtr& w) {
    switch (w->kind) {
        case WitnessNode::Kind::Leaf: return witness_leaf(reflect_point(node, w->point));
        case WitnessNode::Kind::Prefix: {
            auto r = reflect_sel(node, w->sel);
            return witness_prefix(r, reflect_witness(*node.segment(r).child, w->a));
        }
        case WitnessNode::Kind::Choice: return witness_choice(w->cell, reflect_witness(node, w->a), reflect_witness(node, w->b));
    }
    return w;
}

// Copies j and copies+1-j of every path share one child and one scale.
inline bool reflection_symmetric(const DiamondNode& node, std::set<const DiamondNode*>& seen) {
    if (node.is_line || !seen.insert(&node).second) return true;
    for (Side sd : {Side::Left, Side::Right}) {
        const auto& path = node.path(sd);
        for (std::size_t j = 0; j < path.size(); ++j) {
            const auto& a = path[j];
            const auto& b = path[path.size() - 1 - j];
            if (a.child.get() != b.child.get() || a.scale != b.scale) return false;
            if (!reflection_symmetric(*a.child, seen)) return false;
        }
    }
    return true;
}

}  // namespace detail

// The same sequence under the reflection exchanging s and t; requires every level to be symmetric.
inline RequestSeq mirror_sequence(const MetricSpace& space, const RequestSeq& seq) {
    const DiamondNode* root = space.diamond_root();
    if (!root) throw std::invalid_argument("mirroring needs a diamond space");
    std::set<const DiamondNode*> seen;
    if (!detail::reflection_symmetric(*root, seen) || detail::reflect_point(*root, space.s()) != space.canonicalize(space.t()))
        throw std::invalid_argument("space is not symmetric under s <-> t");
    RequestSeq out;
    out.size_mode = seq.size_mode;
    out.chunks = seq.chunks;
    std::map<std::pair<const SetNode*, const DiamondNode*>, SetPtr> memo;
    for (const auto& r : seq.requests) out.requests.push_back({detail::reflect_set(*root, r.atoms, memo), r.polarity});
    for (const auto& w : seq.witness) out.witness.push_back(detail::reflect_witness(*root, w));
    return out;
}

// seq, mirror(seq), seq, ... for `reps` rounds; the optimum of each round is d(s,t).
inline RequestSeq repeat_mirrored(const MetricSpace& space, const RequestSeq& seq, int reps) {
    RequestSeq out;
    out.size_mode = seq.size_mode;
    RequestSeq mir = reps > 1 ? mirror_sequence(space, seq) : RequestSeq{};
    for (int k = 0; k < reps; ++k) {
        const RequestSeq& part = k % 2 == 0 ? seq : mir;
        std::size_t off = out.requests.size();
        out.requests.insert(out.requests.end(), part.requests.begin(), part.requests.end());
        out.witness.insert(out.witness.end(), part.witness.begin(), part.witness.end());
        for (auto c : part.chunks) {
            c.begin += off;
            c.end += off;
            out.chunks.push_back(c);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ratio experiments

struct ExperimentConfig {
    std::string family = "refined";  // basic, lgt, refined, coupon
    int w_lo = 1, w_hi = 4;
    std::vector<std::string> algorithms{"greedy", "work_function"};
    int trials = 1000;
    std::uint64_t seed = 0;
    std::int64_t m = 2;  // basic and lgt: every m_i
    RefinedConfig refined{4, 1.5, ExpectationMode::GreedyRealized, 32, false};
    std::string opt = "auto";  // auto, dp, certificate
    double dp_budget = 2e7;
    int mirror_reps = 1;
    int ell = 8, h = 10000;  // coupon
    double additive = 0;
};

struct Instance {
    SpacePtr space;
    RequestSeq seq;
};

inline SpacePtr family_space(const ExperimentConfig& cfg, int w) {
    if (cfg.family == "basic") return diamond_basic(w, std::vector<std::int64_t>(static_cast<std::size_t>(w), cfg.m));
    if (cfg.family == "lgt") return lgt_variant(w, std::vector<std::int64_t>(static_cast<std::size_t>(w), cfg.m));
    if (cfg.family == "refined") return diamond_refined(w, cfg.refined.beta, cfg.refined.alpha);
    throw std::invalid_argument("unknown family: " + cfg.family);
}

inline RequestSeq family_sequence(const ExperimentConfig& cfg, const MetricSpace& space, int w, std::uint64_t seed) {
    std::vector<std::int64_t> m(static_cast<std::size_t>(w), cfg.m);
    if (cfg.family == "basic") return gen_basic_sequence(space, {w, m, seed});
    if (cfg.family == "lgt") return gen_lgt_sequence(space, {w, m, seed});
    if (cfg.family == "refined") return gen_refined_chunks(space, w, cfg.refined, seed).seq;
    throw std::invalid_argument("unknown family: " + cfg.family);
}

inline std::uint64_t cell_seed(std::uint64_t base, int w, int trial) {
    return mix_seed(base, static_cast<std::uint64_t>(w) * 1000003ULL + static_cast<std::uint64_t>(trial));
}

// Optimum of a constructed sequence: DP when allowed and within budget, else the path certificate.
inline std::pair<Q, std::string> sequence_opt(const ExperimentConfig& cfg, const MetricSpace& space, const RequestSeq& seq) {
    if (cfg.opt != "certificate") {
        try {
            return {opt_cost_dp(space, seq, space.s(), cfg.dp_budget).cost, "dp"};
        } catch (const BudgetExceeded&) {
            if (cfg.opt == "dp") throw;
        }
    }
    if (seq.witness.size() != seq.size()) throw std::runtime_error("OPT unavailable and no certificate for this sequence");
    TrajectoryAgent agent(resolve_witnesses(space, seq));
    Q c = run_mss(space, seq, agent, space.s()).total;
    Q d = space.distance(space.s(), space.t()) * Q(std::max(1, cfg.mirror_reps));
    if (c != d) throw std::runtime_error("certificate does not match the terminal distance");
    return {c, "certificate"};
}

inline std::vector<RatioRow> coupon_rows(const ExperimentConfig& cfg) {
    auto res = coupon_collector_ratio(cfg.ell, cfg.h, cfg.trials, cfg.seed, cfg.algorithms);
    std::vector<RatioRow> rows;
    for (const auto& a : cfg.algorithms) {
        RatioRow r;
        r.w = cfg.ell;
        r.algorithm = a;
        r.trials = cfg.trials;
        r.mean_cost = res.mean_online.at(a);
        r.mean_opt = res.mean_opt;
        r.ratio = res.ratio.at(a);
        r.ci_low = r.ci_high = r.ratio;
        r.opt_source = "dp";
        r.additive = cfg.additive;
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<RatioRow> experiment_ratio(const ExperimentConfig& cfg) {
    if (cfg.family == "coupon") return coupon_rows(cfg);
    std::vector<RatioRow> rows;
    for (int w = cfg.w_lo; w <= cfg.w_hi; ++w) {
        auto space = family_space(cfg, w);
        std::map<std::string, std::vector<double>> cost;
        std::vector<double> opt;
        std::string source;
        for (int t = 0; t < cfg.trials; ++t) {
            std::uint64_t s = cell_seed(cfg.seed, w, t);
            RequestSeq seq = family_sequence(cfg, *space, w, s);
            if (cfg.mirror_reps > 1) seq = repeat_mirrored(*space, seq, cfg.mirror_reps);
            auto [o, src] = sequence_opt(cfg, *space, seq);
            opt.push_back(to_double(o));
            if (source.empty()) source = src;
            else if (source != src) source = "mixed";
            for (const auto& a : cfg.algorithms) {
                auto alg = make_algorithm(a);
                RunOptions ro;
                ro.record_trajectory = false;
                ro.seed = s;
                cost[a].push_back(to_double(run_mss(*space, seq, *alg, space->s(), ro).total));
            }
        }
        for (const auto& a : cfg.algorithms) {
            auto est = ratio_of_means(cost[a], opt);
            RatioRow r;
            r.w = w;
            r.algorithm = a;
            r.trials = cfg.trials;
            Moments mc, mo;
            for (double x : cost[a]) mc.add(x);
            for (double x : opt) mo.add(x);
            r.mean_cost = mc.mean();
            r.mean_opt = mo.mean();
            r.ratio = est.ratio;
            r.ci_low = est.lo;
            r.ci_high = est.hi;
            r.opt_source = source;
            r.additive = cfg.additive;
            rows.push_back(r);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Chunk contract: conditional per-chunk cost against the announced size

struct ContractConfig {
    int w = 2;
    RefinedConfig refined{4, 1.5, ExpectationMode::MonteCarloRollout, 32, false};
    std::vector<std::string> algorithms{"greedy", "work_function", "random_eligible", "escape:greedy:1", "escape:work_function:1"};
    int prefixes = 20;      // sampled sequences
    int suffix_samples = 64;  // Monte Carlo draws of each chunk given its prefix
    double z = 3;
    std::uint64_t seed = 0;
};

struct ContractCheck {
    std::string algorithm;
    int checks = 0, violations = 0;
    double worst_gap = 0;  // min over checks of (mean + z se - size), in distance units
    double sum_cost = 0, sum_size = 0;
};

inline std::vector<ContractCheck> verify_chunk_contract(const ContractConfig& cfg) {
    auto space = diamond_refined(cfg.w, cfg.refined.beta, cfg.refined.alpha);
    const DiamondNode& root = *space->diamond_root();
    const double unit = to_double(root.length) / static_cast<double>(cfg.refined.beta);
    const Q price = Q(2) * space->distance(space->s(), space->t());
    std::vector<ContractCheck> out;
    for (const auto& a : cfg.algorithms) out.push_back({a});

    for (int t = 0; t < cfg.prefixes; ++t) {
        auto stream = make_level_stream(root, cfg.w, cfg.refined, mix_seed(cfg.seed, static_cast<std::uint64_t>(t)), false);
        RequestSeq prefix;
        std::size_t idx = 0;
        while (!stream->done()) {
            const double size = stream->peek_size() * unit;
            std::vector<Moments> m(cfg.algorithms.size());
            for (int r = 0; r < cfg.suffix_samples; ++r) {
                StreamPtr alt = stream->clone();
                alt->reseed(mix_seed(cfg.seed ^ 0x5bd1e995ULL, idx * 7919ULL + static_cast<std::uint64_t>(r) * 104729ULL + static_cast<std::uint64_t>(t)));
                Chunk c = alt->next();
                RequestSeq seq = prefix;
                for (auto& s : c.sets) seq.requests.push_back(must_be_in(s));
                for (std::size_t k = 0; k < cfg.algorithms.size(); ++k) {
                    auto alg = make_algorithm(cfg.algorithms[k]);
                    RunOptions ro;
                    ro.record_trajectory = false;
                    ro.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(r));
                    ro.escape = EscapeOption{price, prefix.size()};
                    auto led = run_mss(*space, seq, *alg, space->s(), ro);
                    Q before{0};
                    for (std::size_t q = 0; q < prefix.size(); ++q) before += led.per_request[q];
                    m[k].add(to_double(led.total - before));
                }
            }
            for (std::size_t k = 0; k < cfg.algorithms.size(); ++k) {
                auto& ck = out[k];
                double gap = m[k].mean() + cfg.z * m[k].se() - size;
                if (ck.checks == 0 || gap < ck.worst_gap) ck.worst_gap = gap;
                ++ck.checks;
                if (gap < -1e-9) ++ck.violations;
                ck.sum_cost += m[k].mean();
                ck.sum_size += size;
            }
            Chunk real = stream->next();
            for (auto& s : real.sets) prefix.requests.push_back(must_be_in(std::move(s)));
            ++idx;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Probability oracles

inline double log_binom_pmf(std::int64_t n, std::int64_t k, double p) {
    return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
           std::lgamma(static_cast<double>(n - k) + 1) + static_cast<double>(k) * std::log(p) +
           static_cast<double>(n - k) * std::log1p(-p);
}

struct BinomTail {
    double probability = 0;  // exact Pr[X <= (1-delta) mu]
    double empirical = -1;   // Monte Carlo estimate when trials > 0
    double bound = 0;        // lambda exp(-delta^2 mu / lambda)
    bool holds = false;
};

inline BinomTail oracle_binom_tail(double p, double mu, double delta, double lambda, int trials = 0, std::uint64_t seed = 0) {
    if (!(p > 0 && p <= 0.5)) throw std::invalid_argument("need 0 < p <= 0.5");
    if (mu < 4) throw std::invalid_argument("need mu >= 4");
    if (delta < 0 || delta > 1) throw std::invalid_argument("need delta in [0,1]");
    double nd = mu / p;
    auto n = static_cast<std::int64_t>(std::llround(nd));
    if (std::abs(nd - static_cast<double>(n)) > 1e-9) throw std::invalid_argument("mu/p must be an integer");
    auto kmax = static_cast<std::int64_t>(std::floor((1 - delta) * mu + 1e-12));
    BinomTail r;
    for (std::int64_t k = 0; k <= kmax; ++k) r.probability += std::exp(log_binom_pmf(n, k, p));
    r.bound = lambda * std::exp(-delta * delta * mu / lambda);
    r.holds = r.probability >= r.bound;
    if (trials > 0) {
        std::mt19937_64 rng(seed);
        std::binomial_distribution<std::int64_t> b(n, p);
        int hit = 0;
        for (int t = 0; t < trials; ++t) hit += b(rng) <= kmax ? 1 : 0;
        r.empirical = static_cast<double>(hit) / trials;
    }
    return r;
}

struct BallsBins {
    double mean_min = 0, se = 0;
    double bound = 0;  // m/n - c sqrt(m ln n / n)
    bool holds = false;
};

inline BallsBins oracle_balls_bins(int n, std::int64_t m, int trials, double c, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("need at least two bins");
    if (static_cast<double>(m) < n * std::log(static_cast<double>(n))) throw std::invalid_argument("need m >= n ln n");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> bin(0, n - 1);
    Moments mo;
    std::vector<std::int64_t> load(static_cast<std::size_t>(n));
    for (int t = 0; t < trials; ++t) {
        std::fill(load.begin(), load.end(), 0);
        for (std::int64_t b = 0; b < m; ++b) ++load[static_cast<std::size_t>(bin(rng))];
        mo.add(static_cast<double>(*std::min_element(load.begin(), load.end())));
    }
    BallsBins r;
    r.mean_min = mo.mean();
    r.se = mo.se();
    double md = static_cast<double>(m);
    r.bound = md / n - c * std::sqrt(md * std::log(static_cast<double>(n)) / n);
    r.holds = r.mean_min <= r.bound;
    return r;
}

struct CaseCensus {
    int nodes = 0, binary = 0, balanced = 0, uniform = 0, violations = 0;
};

// Checks the size dichotomy at every internal node of every tree and tallies the selected cases.
inline CaseCensus sweep_case_analysis(const std::vector<HstNode>& corpus, double alpha) {
    CaseCensus c;
    std::function<void(const HstNode&)> nodes = [&](const HstNode& n) {
        if (n.is_leaf()) return;
        if (n.children.size() >= 2) {
            std::vector<std::int64_t> s;
            for (const auto& ch : n.children) s.push_back(static_cast<std::int64_t>(hst_leaf_count(ch)));
            std::sort(s.rbegin(), s.rend());
            ++c.nodes;
            if (sqrt_dichotomy(s) == 0) ++c.violations;
        }
        for (const auto& ch : n.children) nodes(ch);
    };
    std::function<void(const UniversalPlan&)> plans = [&](const UniversalPlan& p) {
        if (p.kind == UniversalCase::Binary) ++c.binary;
        if (p.kind == UniversalCase::Balanced) ++c.balanced;
        if (p.kind == UniversalCase::Uniform) ++c.uniform;
        for (const auto& q : p.parts) plans(q);
    };
    for (const auto& t : corpus) {
        nodes(t);
        plans(select_subspace(t, alpha));
    }
    return c;
}

// Direct check of the dichotomy on random non-increasing size sequences; returns the violation count.
inline int dichotomy_violations(int sequences, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    int bad = 0;
    for (int t = 0; t < sequences; ++t) {
        int k = std::uniform_int_distribution<int>(1, 64)(rng);
        std::int64_t top = std::uniform_int_distribution<std::int64_t>(1, 4096)(rng);
        std::vector<std::int64_t> s(static_cast<std::size_t>(k));
        for (auto& x : s) x = std::uniform_int_distribution<std::int64_t>(1, top)(rng);
        std::sort(s.rbegin(), s.rend());
        double n = 0;
        for (auto x : s) n += static_cast<double>(x);
        bool bin = k == 1 || std::sqrt(double(s[0])) + std::sqrt(double(s[1])) >= std::sqrt(n) - 1e-12;
        bool bal = false;
        for (int l = 3; l <= k && !bal; ++l) bal = l * std::sqrt(double(s[static_cast<std::size_t>(l - 1)])) >= std::sqrt(n) - 1e-12;
        if (!bin && !bal) ++bad;
    }
    return bad;
}

// ---------------------------------------------------------------------------
// Universal per-draw costs

struct DrawCostRow {
    int tree = 0;
    std::string algorithm;
    int draws = 0;
    double mean_cost = 0, se = 0, diam = 0;
    std::string kind;
};

inline std::vector<DrawCostRow> universal_per_draw(const HstNode& tree, int tree_id, const std::vector<std::string>& algorithms,
                                                   int draws, std::uint64_t seed, double alpha = 1.0 / 16) {
    UltrametricSpace sp(tree);
    auto plan = select_subspace(tree, alpha);
    std::vector<DrawCostRow> rows;
    if (plan.singleton()) return rows;
    const Q price = Q(2) * plan.diam;
    std::vector<std::string> names = algorithms;
    names.push_back("stay_inside");
    for (std::size_t k = 0; k < names.size(); ++k) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(tree_id)));
        Moments mo;
        for (int d = 0; d < draws; ++d) {
            auto start = flat_point(plan.leaves[rng() % plan.leaves.size()]);
            auto seq = sample_universal(sp, plan, rng, true);
            std::unique_ptr<MssAlgorithm> alg =
                names[k] == "stay_inside" ? std::make_unique<StayInside>(plan) : make_algorithm(names[k]);
            RunOptions ro;
            ro.record_trajectory = false;
            ro.seed = mix_seed(seed, static_cast<std::uint64_t>(d));
            ro.escape = EscapeOption{price};
            mo.add(to_double(run_mss(sp, seq, *alg, start, ro).total));
        }
        rows.push_back({tree_id, names[k], draws, mo.mean(), mo.se(), to_double(plan.diam), to_string(plan.kind)});
    }
    return rows;
}

}  // namespace mss
