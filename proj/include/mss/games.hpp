#pragma once

#include "mss/requests.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace mss {

// ---------------------------------------------------------------------------
// MSS game

struct EscapeOption {
    Q price;
    std::size_t lo = 0;                                       // first request index where escaping is allowed
    std::size_t hi = std::numeric_limits<std::size_t>::max();  // last such index, inclusive
    bool open_at(std::size_t i) const { return i >= lo && i <= hi; }
};

struct StepView {
    const MetricSpace& space;
    const RequestSet& request;
    const std::vector<PointAddr>& eligible;  // polarity-resolved, sorted
    std::size_t index;
    const PointAddr& current;
    bool escape_open = false;
    Q escape_price{0};
    Q window_cost{0};  // cost accrued since the escape window opened
};

struct Decision {
    PointAddr target;
    bool escape = false;
};

class MssAlgorithm {
public:
    virtual ~MssAlgorithm() = default;
    virtual std::string name() const = 0;
    virtual void reset(const MetricSpace& space, const PointAddr& start, std::uint64_t seed) = 0;
    virtual Decision step(const StepView& view) = 0;
};

struct CostLedger {
    std::vector<Q> per_request;
    std::vector<Q> per_chunk;
    std::vector<PointAddr> trajectory;  // position after each request
    Q total{0};
    Q switching{0}, local{0};
    bool escaped = false;
    std::optional<std::size_t> escape_step;
};

struct RunOptions {
    std::optional<EscapeOption> escape;
    std::function<int(const PointAddr&)> region;  // splits motion into switching and local
    bool record_trajectory = true;
    std::uint64_t seed = 0;
};

class IllegalMove : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::vector<Q> chunk_totals(const RequestSeq& seq, const std::vector<Q>& per_request) {
    if (seq.chunks.empty()) {
        Q s{0};
        for (const auto& c : per_request) s += c;
        return {s};
    }
    std::vector<Q> out;
    for (const auto& c : seq.chunks) {
        Q s{0};
        for (std::size_t i = c.begin; i < c.end && i < per_request.size(); ++i) s += per_request[i];
        out.push_back(s);
    }
    return out;
}

// Runs `alg` from `start`; the algorithm must already be reset.
inline CostLedger play_mss(const MetricSpace& space, const RequestSeq& seq, MssAlgorithm& alg, const PointAddr& start,
                           const RunOptions& opt = {}) {
    space.require_valid(start);
    CostLedger led;
    led.per_request.assign(seq.size(), Q(0));
    PointAddr cur = start;
    Q window{0};
    for (std::size_t i = 0; i < seq.size() && !led.escaped; ++i) {
        const auto& req = seq.requests[i];
        auto eligible = eligible_points(space, req);
        bool open = opt.escape && opt.escape->open_at(i);
        StepView view{space, req, eligible, i, cur, open, open ? opt.escape->price : Q(0), window};
        Decision d = alg.step(view);
        if (d.escape) {
            if (!open) throw IllegalMove(alg.name() + " escaped outside the escape window at request " + std::to_string(i));
            led.per_request[i] = opt.escape->price;
            led.total += opt.escape->price;
            led.escaped = true;
            led.escape_step = i;
            if (opt.record_trajectory) led.trajectory.push_back(cur);
            break;
        }
        if (!std::binary_search(eligible.begin(), eligible.end(), d.target))
            throw IllegalMove(alg.name() + " moved to " + to_string(d.target) + " which violates request " + std::to_string(i));
        Q c = space.distance_unchecked(cur, d.target);
        led.per_request[i] = c;
        led.total += c;
        if (opt.escape && i >= opt.escape->lo) window += c;
        if (opt.region && !(c == Q(0))) {
            if (opt.region(cur) != opt.region(d.target)) led.switching += c; else led.local += c;
        }
        cur = d.target;
        if (opt.record_trajectory) led.trajectory.push_back(cur);
    }
    led.per_chunk = chunk_totals(seq, led.per_request);
    return led;
}

inline CostLedger run_mss(const MetricSpace& space, const RequestSeq& seq, MssAlgorithm& alg, const PointAddr& start,
                          const RunOptions& opt = {}) {
    alg.reset(space, start, opt.seed);
    return play_mss(space, seq, alg, start, opt);
}

// Replays a fixed trajectory; used to check offline witnesses.
class TrajectoryAgent final : public MssAlgorithm {
public:
    explicit TrajectoryAgent(std::vector<PointAddr> path) : path_(std::move(path)) {}
    std::string name() const override { return "trajectory"; }
    void reset(const MetricSpace&, const PointAddr&, std::uint64_t) override {}
    Decision step(const StepView& v) override {
        if (v.index >= path_.size()) throw std::logic_error("trajectory shorter than sequence");
        return {path_[v.index], false};
    }

private:
    std::vector<PointAddr> path_;
};

inline nlohmann::json ledger_to_json(const CostLedger& led, const std::string& algorithm) {
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t i = 0; i < led.per_request.size(); ++i) {
        bool esc = led.escape_step && *led.escape_step == i;
        if (led.escape_step && i > *led.escape_step) break;
        nlohmann::json s;
        s["request"] = i;
        s["response"] = i < led.trajectory.size() ? to_string(led.trajectory[i]) : "";
        s["cost"] = to_string(led.per_request[i]);
        s["escaped"] = esc;
        steps.push_back(s);
    }
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : led.per_chunk) chunks.push_back(to_string(c));
    return {{"algorithm", algorithm}, {"total", to_string(led.total)}, {"escaped", led.escaped}, {"chunks", chunks}, {"steps", steps}};
}

// ---------------------------------------------------------------------------
// Offline optimum by dynamic programming over the polarity-resolved request sets.
// Any feasible trajectory sits inside request t at time t, so restricting states to
// those sets loses nothing.

struct OptResult {
    Q cost{0};
    std::vector<PointAddr> trajectory;
};

class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline OptResult opt_cost_dp(const MetricSpace& space, const RequestSeq& seq, const PointAddr& start,
                             std::uint64_t budget = 200'000'000) {
    space.require_valid(start);
    std::vector<std::vector<PointAddr>> layers;
    std::vector<std::vector<std::int32_t>> back;
    std::vector<PointAddr> prev{start};
    std::vector<Q> f{Q(0)};
    std::uint64_t work = 0;
    for (const auto& req : seq.requests) {
        auto cur = eligible_points(space, req);
        if (cur.empty()) throw std::invalid_argument("request admits no point");
        work += static_cast<std::uint64_t>(cur.size()) * prev.size();
        if (work > budget) throw BudgetExceeded("offline DP exceeds its work budget");
        std::vector<Q> g(cur.size());
        std::vector<std::int32_t> bp(cur.size());
        for (std::size_t y = 0; y < cur.size(); ++y) {
            std::optional<Q> best;
            std::int32_t arg = 0;
            for (std::size_t x = 0; x < prev.size(); ++x) {
                Q v = f[x] + space.distance_unchecked(prev[x], cur[y]);
                if (!best || v < *best) best = v, arg = static_cast<std::int32_t>(x);
            }
            g[y] = *best;
            bp[y] = arg;
        }
        layers.push_back(cur);
        back.push_back(std::move(bp));
        prev = std::move(cur);
        f = std::move(g);
    }
    OptResult res;
    if (layers.empty()) return res;
    std::size_t arg = 0;
    for (std::size_t y = 1; y < f.size(); ++y)
        if (f[y] < f[arg]) arg = y;
    res.cost = f[arg];
    res.trajectory.resize(layers.size());
    for (std::size_t t = layers.size(); t-- > 0;) {
        res.trajectory[t] = layers[t][arg];
        arg = static_cast<std::size_t>(back[t][arg]);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Metrical task systems over an explicit list of states. nullopt marks infinite cost.

using CostVector = std::vector<std::optional<Q>>;

struct MtsInstance {
    std::vector<PointAddr> states;
    std::vector<CostVector> costs;
};

class MtsAlgorithm {
public:
    virtual ~MtsAlgorithm() = default;
    virtual std::string name() const = 0;
    virtual void reset(const MetricSpace& space, const std::vector<PointAddr>& states, std::size_t start, std::uint64_t seed) = 0;
    virtual std::size_t step(const CostVector& cost, std::size_t current) = 0;
};

inline CostLedger run_mts(const MetricSpace& space, const MtsInstance& inst, MtsAlgorithm& alg, std::size_t start,
                          std::uint64_t seed = 0) {
    if (start >= inst.states.size()) throw std::invalid_argument("start state out of range");
    alg.reset(space, inst.states, start, seed);
    CostLedger led;
    std::size_t cur = start;
    for (std::size_t i = 0; i < inst.costs.size(); ++i) {
        const auto& cv = inst.costs[i];
        if (cv.size() != inst.states.size()) throw std::invalid_argument("cost vector has the wrong length");
        std::size_t nxt = alg.step(cv, cur);
        if (nxt >= inst.states.size() || !cv[nxt])
            throw IllegalMove(alg.name() + " occupied an infinite-cost state at task " + std::to_string(i));
        Q c = space.distance_unchecked(inst.states[cur], inst.states[nxt]) + *cv[nxt];
        led.per_request.push_back(c);
        led.total += c;
        cur = nxt;
        led.trajectory.push_back(inst.states[cur]);
    }
    led.per_chunk = {led.total};
    return led;
}

inline MtsInstance mss_to_mts(const MetricSpace& space, const RequestSeq& seq) {
    MtsInstance inst;
    inst.states = space.points();
    for (const auto& req : seq.requests) {
        CostVector cv(inst.states.size());
        for (std::size_t i = 0; i < inst.states.size(); ++i)
            if (satisfies(space, req, inst.states[i])) cv[i] = Q(0);
        inst.costs.push_back(std::move(cv));
    }
    return inst;
}

inline Q mts_opt_dp(const MetricSpace& space, const MtsInstance& inst, std::size_t start) {
    const std::size_t n = inst.states.size();
    std::vector<std::optional<Q>> f(n);
    f[start] = Q(0);
    for (const auto& cv : inst.costs) {
        std::vector<std::optional<Q>> g(n);
        for (std::size_t y = 0; y < n; ++y) {
            if (!cv[y]) continue;
            for (std::size_t x = 0; x < n; ++x) {
                if (!f[x]) continue;
                Q v = *f[x] + space.distance_unchecked(inst.states[x], inst.states[y]) + *cv[y];
                if (!g[y] || v < *g[y]) g[y] = v;
            }
        }
        f = std::move(g);
    }
    std::optional<Q> best;
    for (const auto& v : f)
        if (v && (!best || *v < *best)) best = v;
    if (!best) throw std::invalid_argument("task sequence has no finite-cost schedule");
    return *best;
}

// MTS agent driven by an MSS algorithm: the finite-cost states form the request set.
class MssAsMts final : public MtsAlgorithm {
public:
    explicit MssAsMts(MssAlgorithm& inner) : inner_(inner) {}
    std::string name() const override { return "mirror:" + inner_.name(); }
    void reset(const MetricSpace& space, const std::vector<PointAddr>& states, std::size_t start, std::uint64_t seed) override {
        space_ = &space;
        states_ = &states;
        index_.clear();
        for (std::size_t i = 0; i < states.size(); ++i) index_[states[i]] = i;
        step_ = 0;
        inner_.reset(space, states[start], seed);
    }
    std::size_t step(const CostVector& cost, std::size_t current) override {
        std::vector<SetPtr> atoms;
        std::vector<PointAddr> eligible;
        for (std::size_t i = 0; i < cost.size(); ++i)
            if (cost[i]) {
                atoms.push_back(point_set((*states_)[i]));
                eligible.push_back((*states_)[i]);
            }
        std::sort(eligible.begin(), eligible.end());
        RequestSet req = must_be_in(union_set(std::move(atoms)));
        StepView view{*space_, req, eligible, step_++, (*states_)[current]};
        Decision d = inner_.step(view);
        if (d.escape) throw IllegalMove("escape is not part of the task-system game");
        return index_.at(d.target);
    }

private:
    MssAlgorithm& inner_;
    const MetricSpace* space_ = nullptr;
    const std::vector<PointAddr>* states_ = nullptr;
    std::map<PointAddr, std::size_t> index_;
    std::size_t step_ = 0;
};

// ---------------------------------------------------------------------------
// (n-1)-server game, tracked through its single uncovered point (the hole).

using ServerBatch = std::vector<PointAddr>;  // requests issued repeatedly until all are covered

class HoleAlgorithm {
public:
    virtual ~HoleAlgorithm() = default;
    virtual std::string name() const = 0;
    virtual void reset(const MetricSpace& space, const PointAddr& hole, std::uint64_t seed) = 0;
    virtual void begin_batch(const ServerBatch& batch) = 0;
    // The hole is requested: return the position of the server that moves into it.
    virtual PointAddr serve(const PointAddr& request) = 0;
};

inline std::vector<ServerBatch> mss_to_kserver(const MetricSpace& space, const RequestSeq& seq) {
    auto all = space.points();
    std::vector<ServerBatch> out;
    for (const auto& req : seq.requests) {
        ServerBatch b;
        for (const auto& p : all)
            if (!satisfies(space, req, p)) b.push_back(p);
        out.push_back(std::move(b));
    }
    return out;
}

inline CostLedger run_kserver(const MetricSpace& space, const std::vector<ServerBatch>& batches, HoleAlgorithm& alg,
                              const PointAddr& hole_start, std::uint64_t seed = 0, int max_passes = 64) {
    alg.reset(space, hole_start, seed);
    CostLedger led;
    PointAddr hole = hole_start;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        alg.begin_batch(batches[i]);
        Q c{0};
        bool hit = true;
        for (int pass = 0; hit; ++pass) {
            if (pass == max_passes) throw IllegalMove(alg.name() + " never left the requested batch " + std::to_string(i));
            hit = false;
            for (const auto& r : batches[i]) {
                if (!(r == hole)) continue;
                hit = true;
                PointAddr from = alg.serve(r);
                if (from == hole) throw IllegalMove(alg.name() + " moved a server from the uncovered point");
                space.require_valid(from);
                c += space.distance_unchecked(from, hole);
                hole = from;
            }
        }
        led.per_request.push_back(c);
        led.total += c;
        led.trajectory.push_back(hole);
    }
    led.per_chunk = {led.total};
    return led;
}

// Hole agent driven by an MSS algorithm: the unrequested points form the MSS request.
class MssAsHole final : public HoleAlgorithm {
public:
    explicit MssAsHole(MssAlgorithm& inner) : inner_(inner) {}
    std::string name() const override { return "mirror:" + inner_.name(); }
    void reset(const MetricSpace& space, const PointAddr& hole, std::uint64_t seed) override {
        space_ = &space;
        all_ = space.points();
        hole_ = hole;
        step_ = 0;
        inner_.reset(space, hole, seed);
    }
    void begin_batch(const ServerBatch& batch) override {
        ServerBatch sorted = batch;
        std::sort(sorted.begin(), sorted.end());
        eligible_.clear();
        std::set_difference(all_.begin(), all_.end(), sorted.begin(), sorted.end(), std::back_inserter(eligible_));
        std::vector<SetPtr> atoms;
        for (const auto& p : eligible_) atoms.push_back(point_set(p));
        req_ = must_be_in(union_set(std::move(atoms)));
        // the inner algorithm sees every request, even when the hole is already compliant
        StepView view{*space_, req_, eligible_, step_++, hole_};
        Decision d = inner_.step(view);
        if (d.escape) throw IllegalMove("escape is not part of the server game");
        pending_ = d.target;
    }
    PointAddr serve(const PointAddr& request) override {
        PointAddr to = pending_;
        (void)request;
        hole_ = to;
        return to;
    }

private:
    MssAlgorithm& inner_;
    const MetricSpace* space_ = nullptr;
    std::vector<PointAddr> all_, eligible_;
    RequestSet req_;
    PointAddr hole_, pending_;
    std::size_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Layered graph: layer 0 is the start state, layer i holds the finite-cost states of
// task i, and x -> y between consecutive layers costs d(x,y) + cost_i(y).

struct LayeredEdge {
    std::size_t layer;  // edge goes from layer-1 to layer
    std::size_t from, to;
    Q len;
};

struct LayeredGraph {
    std::vector<std::vector<std::size_t>> layers;  // state indices per layer
    std::vector<LayeredEdge> edges;
};

inline LayeredGraph mts_to_layered_graph(const MetricSpace& space, const MtsInstance& inst, std::size_t start) {
    LayeredGraph g;
    g.layers.push_back({start});
    for (std::size_t i = 0; i < inst.costs.size(); ++i) {
        std::vector<std::size_t> layer;
        for (std::size_t y = 0; y < inst.states.size(); ++y)
            if (inst.costs[i][y]) layer.push_back(y);
        for (std::size_t x : g.layers.back())
            for (std::size_t y : layer)
                g.edges.push_back({i + 1, x, y, space.distance_unchecked(inst.states[x], inst.states[y]) + *inst.costs[i][y]});
        g.layers.push_back(std::move(layer));
    }
    return g;
}

inline void write_layered_graph(std::ostream& os, const LayeredGraph& g) {
    os << "# layers " << g.layers.size() << " edges " << g.edges.size() << '\n';
    for (const auto& e : g.edges) os << (e.layer - 1) << ' ' << e.from << ' ' << e.layer << ' ' << e.to << ' ' << to_string(e.len) << '\n';
}

// Shortest path from the single source to any vertex of the last layer, by Dijkstra on
// the flattened graph.
inline std::optional<Q> layered_shortest_path(const LayeredGraph& g) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> id;
    for (std::size_t l = 0; l < g.layers.size(); ++l)
        for (auto v : g.layers[l]) id.emplace(std::make_pair(l, v), id.size());
    std::vector<std::vector<std::pair<std::size_t, Q>>> adj(id.size());
    for (const auto& e : g.edges) adj[id.at({e.layer - 1, e.from})].push_back({id.at({e.layer, e.to}), e.len});
    std::vector<std::optional<Q>> dist(id.size());
    using Item = std::pair<Q, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    std::size_t src = id.at({0, g.layers[0][0]});
    dist[src] = Q(0);
    pq.push({Q(0), src});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (*dist[u] < d) continue;
        for (const auto& [v, w] : adj[u]) {
            Q nd = d + w;
            if (!dist[v] || nd < *dist[v]) {
                dist[v] = nd;
                pq.push({nd, v});
            }
        }
    }
    std::optional<Q> best;
    std::size_t last = g.layers.size() - 1;
    for (auto v : g.layers[last]) {
        const auto& d = dist[id.at({last, v})];
        if (d && (!best || *d < *best)) best = d;
    }
    return best;
}

}  // namespace mss
