#pragma once

#include "mss/requests.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mss {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL)); }

constexpr double kPhiMinusOne = 0.15865525393145705;  // standard normal CDF at -1

enum class ExpectationMode : std::uint8_t { GreedyRealized, MonteCarloRollout };

inline std::string to_string(ExpectationMode m) { return m == ExpectationMode::GreedyRealized ? "greedy" : "rollout"; }

inline ExpectationMode parse_mode(const std::string& s) {
    if (s == "greedy") return ExpectationMode::GreedyRealized;
    if (s == "rollout") return ExpectationMode::MonteCarloRollout;
    throw std::invalid_argument("mode must be greedy or rollout");
}

inline double default_alpha(std::int64_t beta) {
    double r = kPhiMinusOne / 36.0;
    return r * r / static_cast<double>(beta);
}

struct RefinedConfig {
    std::int64_t beta = 64;
    double alpha = default_alpha(64);
    ExpectationMode mode = ExpectationMode::MonteCarloRollout;
    int rollouts = 256;
    bool strict = true;  // running out of chunks in stage 2a is an error rather than a cap
};

// A chunk at some level; sizes are in units of d/beta for that level.
struct Chunk {
    std::vector<SetPtr> sets;
    std::vector<WitnessPtr> wit;
    double size = 0;
    std::string stage;
};

class ChunkStream {
public:
    virtual ~ChunkStream() = default;
    virtual bool done() = 0;
    virtual double peek_size() = 0;  // fixed by the chunks already produced
    virtual Chunk next() = 0;
    virtual std::unique_ptr<ChunkStream> clone() const = 0;
    virtual void reseed(std::uint64_t seed) = 0;
    virtual void make_fast() = 0;  // greedy sizes, no request sets
};

using StreamPtr = std::unique_ptr<ChunkStream>;

// Base level: the singletons {1}, ..., {beta} on a line, each of size 1.
class LineChunks final : public ChunkStream {
public:
    LineChunks(std::int64_t beta, bool fast) : beta_(beta), fast_(fast) {}
    bool done() override { return i_ > beta_; }
    double peek_size() override {
        if (done()) throw std::logic_error("line chunks exhausted");
        return 1.0;
    }
    Chunk next() override {
        if (done()) throw std::logic_error("line chunks exhausted");
        Chunk c;
        c.size = 1.0;
        c.stage = "base";
        if (!fast_) {
            c.sets.push_back(point_set(flat_point(i_)));
            c.wit.push_back(witness_leaf(flat_point(i_)));
        }
        ++i_;
        return c;
    }
    StreamPtr clone() const override { return std::make_unique<LineChunks>(*this); }
    void reseed(std::uint64_t) override {}
    void make_fast() override { fast_ = true; }

private:
    std::int64_t beta_;
    std::int64_t i_ = 1;
    bool fast_;
};

// Pulls every chunk of a stream, for tests and tools.
inline std::vector<Chunk> drain(ChunkStream& s) {
    std::vector<Chunk> out;
    while (!s.done()) out.push_back(s.next());
    return out;
}

// Stage 2a bookkeeping of one inductive level.
struct Stage2Trace {
    std::vector<double> drift;     // S_j = L_j - R_j after subchunk j
    std::vector<double> products;  // n_L n_R for each evaluated j (including the stopping one)
    int kappa = 0;
    double left_used = 0, right_used = 0;
    Side survivor = Side::Left;
    bool capped = false;
};

inline StreamPtr make_level_stream(const DiamondNode& node, int w, const RefinedConfig& cfg, std::uint64_t seed, bool fast);

// Stage 2a rule: advance left with probability n_R/(n_L+n_R); the subchunk size is
// n_L n_R/(n_L+n_R), the expected size used on the side the server sits on.
inline double stage2_prob_left(double nl, double nr) { return nr / (nl + nr); }
inline double stage2_size(double nl, double nr) { return nl * nr / (nl + nr); }

// Smallest k with sum_{j<=k+1} products[j] >= threshold, or nullopt if never reached.
inline std::optional<int> stage2_kappa(const std::vector<double>& products, double threshold) {
    double s = 0;
    for (std::size_t j = 0; j < products.size(); ++j) {
        s += products[j];
        if (s >= threshold) return static_cast<int>(j);
    }
    return std::nullopt;
}

// Subchunks of one inductive level, in child units (child d/beta).
class SubchunkStream final : public ChunkStream {
public:
    SubchunkStream(const DiamondNode& node, int w, const RefinedConfig& cfg, std::uint64_t seed, bool fast)
        : node_(&node), child_(node.left.at(0).child.get()), w_(w), cfg_(cfg), rng_(seed), fast_(fast) {
        if (refined_is_base(w, cfg.alpha)) throw std::invalid_argument("subchunks need an inductive level");
        threshold_ = cfg.alpha * static_cast<double>(cfg.beta) * (w - 1) * (w - 1) / 4.0;
    }

    SubchunkStream(const SubchunkStream& o)
        : node_(o.node_), child_(o.child_), w_(o.w_), cfg_(o.cfg_), rng_(o.rng_), fast_(o.fast_), stage_(o.stage_),
          threshold_(o.threshold_), prod_sum_(o.prod_sum_), have_pending_(o.have_pending_), n_{o.n_[0], o.n_[1]},
          used_{o.used_[0], o.used_[1]}, keep_(o.keep_), front_{o.front_[0], o.front_[1]},
          cell_(std::make_shared<int>(*o.cell_)), trace_(o.trace_) {
        if (o.s1_) s1_ = o.s1_->clone();
        if (o.s3_) s3_ = o.s3_->clone();
        for (int k = 0; k < 2; ++k)
            if (o.side_[k]) side_[k] = o.side_[k]->clone();
    }

    bool done() override {
        settle();
        return stage_ == Stage::Done;
    }

    double peek_size() override {
        settle();
        switch (stage_) {
            case Stage::S1: return s1_->peek_size();
            case Stage::S2a: return stage2_size(n_[0], n_[1]);
            case Stage::S2b: return side_[idx(keep_)]->peek_size();
            case Stage::S3: return s3_->peek_size();
            case Stage::Done: break;
        }
        throw std::logic_error("subchunks exhausted");
    }

    Chunk next() override {
        settle();
        Chunk out;
        switch (stage_) {
            case Stage::S1: {
                Chunk c = s1_->next();
                out.size = c.size;
                out.stage = "1";
                CopySelector l{Side::Left, 1}, r{Side::Right, 1};
                if (!fast_) {
                    for (std::size_t j = 0; j < c.sets.size(); ++j) {
                        out.sets.push_back(union_set(prefix_set(l, c.sets[j]), prefix_set(r, c.sets[j])));
                        out.wit.push_back(witness_choice(cell_, witness_prefix(l, c.wit[j]), witness_prefix(r, c.wit[j])));
                    }
                    front_[0] = {prefix_set(l, c.sets.back()), witness_prefix(l, c.wit.back())};
                    front_[1] = {prefix_set(r, c.sets.back()), witness_prefix(r, c.wit.back())};
                }
                break;
            }
            case Stage::S2a: {
                double pl = stage2_prob_left(n_[0], n_[1]);
                Side x = std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < pl ? Side::Left : Side::Right;
                Chunk c = side_[idx(x)]->next();
                out.size = stage2_size(n_[0], n_[1]);
                out.stage = "2a";
                used_[idx(x)] += c.size;
                trace_.drift.push_back(used_[0] - used_[1]);
                CopySelector sel{x, 2};
                if (!fast_) {
                    const Frontier& park = front_[idx(other(x))];
                    for (std::size_t j = 0; j < c.sets.size(); ++j) {
                        out.sets.push_back(union_set(prefix_set(sel, c.sets[j]), park.set));
                        WitnessPtr adv = witness_prefix(sel, c.wit[j]);
                        out.wit.push_back(x == Side::Left ? witness_choice(cell_, adv, park.wit) : witness_choice(cell_, park.wit, adv));
                    }
                    front_[idx(x)] = {prefix_set(sel, c.sets.back()), witness_prefix(sel, c.wit.back())};
                }
                have_pending_ = false;
                break;
            }
            case Stage::S2b:
            case Stage::S3: {
                bool b = stage_ == Stage::S2b;
                Chunk c = b ? side_[idx(keep_)]->next() : s3_->next();
                out.size = c.size;
                out.stage = b ? "2b" : "3";
                CopySelector sel{keep_, b ? 2 : 3};
                if (!fast_)
                    for (std::size_t j = 0; j < c.sets.size(); ++j) {
                        out.sets.push_back(prefix_set(sel, c.sets[j]));
                        out.wit.push_back(witness_prefix(sel, c.wit[j]));
                    }
                break;
            }
            case Stage::Done:
                throw std::logic_error("subchunks exhausted");
        }
        return out;
    }

    StreamPtr clone() const override { return std::make_unique<SubchunkStream>(*this); }

    void reseed(std::uint64_t seed) override {
        rng_.seed(seed);
        if (s1_) s1_->reseed(mix_seed(seed, 1));
        if (side_[0]) side_[0]->reseed(mix_seed(seed, 2));
        if (side_[1]) side_[1]->reseed(mix_seed(seed, 3));
        if (s3_) s3_->reseed(mix_seed(seed, 4));
    }

    void make_fast() override {
        fast_ = true;
        for (auto* s : {&s1_, &side_[0], &side_[1], &s3_})
            if (*s) (*s)->make_fast();
    }

    const Stage2Trace& trace() const { return trace_; }

private:
    enum class Stage : std::uint8_t { S1, S2a, S2b, S3, Done };
    struct Frontier {
        SetPtr set;
        WitnessPtr wit;
    };
    static int idx(Side s) { return s == Side::Left ? 0 : 1; }

    StreamPtr spawn() { return make_level_stream(*child_, w_ - 1, cfg_, rng_(), fast_); }

    // Moves through exhausted stages and fixes the stage 2a quantities of the next step.
    void settle() {
        while (true) {
            switch (stage_) {
                case Stage::S1:
                    if (!s1_) s1_ = spawn();
                    if (!s1_->done()) return;
                    side_[0] = spawn();
                    side_[1] = spawn();
                    stage_ = Stage::S2a;
                    continue;
                case Stage::S2a: {
                    if (have_pending_) return;
                    bool out_l = side_[0]->done(), out_r = side_[1]->done();
                    if (out_l || out_r) {
                        if (cfg_.strict) throw std::runtime_error("stage 2a ran out of child chunks before the stopping rule fired");
                        trace_.capped = true;
                        finish_2a();
                        continue;
                    }
                    n_[0] = side_[0]->peek_size();
                    n_[1] = side_[1]->peek_size();
                    trace_.products.push_back(n_[0] * n_[1]);
                    prod_sum_ += n_[0] * n_[1];
                    if (prod_sum_ >= threshold_) {
                        finish_2a();
                        continue;
                    }
                    have_pending_ = true;
                    return;
                }
                case Stage::S2b:
                    if (!side_[idx(keep_)]->done()) return;
                    s3_ = spawn();
                    stage_ = Stage::S3;
                    continue;
                case Stage::S3:
                    if (!s3_->done()) return;
                    stage_ = Stage::Done;
                    continue;
                case Stage::Done:
                    return;
            }
        }
    }

    void finish_2a() {
        trace_.kappa = static_cast<int>(trace_.drift.size());
        trace_.left_used = used_[0];
        trace_.right_used = used_[1];
        keep_ = used_[0] <= used_[1] ? Side::Left : Side::Right;
        trace_.survivor = keep_;
        *cell_ = idx(keep_);
        side_[idx(other(keep_))].reset();
        stage_ = Stage::S2b;
    }

    const DiamondNode* node_;
    const DiamondNode* child_;
    int w_;
    RefinedConfig cfg_;
    std::mt19937_64 rng_;
    bool fast_;
    Stage stage_ = Stage::S1;
    double threshold_ = 0;
    double prod_sum_ = 0;
    bool have_pending_ = false;
    double n_[2] = {0, 0};
    double used_[2] = {0, 0};
    Side keep_ = Side::Left;
    Frontier front_[2];
    SideCell cell_ = new_side_cell();
    Stage2Trace trace_;
    StreamPtr s1_, side_[2], s3_;
};

// Groups subchunks into chunks. A chunk closes once its subchunk sizes reach c_avg; if
// what follows would not reach c_avg again, it is absorbed into the current chunk.
// Rollout mode sizes each chunk by the mean of its capped size over reseeded
// continuations taken at the chunk's start; greedy mode uses the realized sum.
class Combiner final : public ChunkStream {
public:
    Combiner(StreamPtr sub, double c_avg, double c_max, double out_scale, ExpectationMode mode, int rollouts,
             std::uint64_t seed, bool fast)
        : sub_(std::move(sub)), c_avg_(c_avg), cap_(c_avg + c_max), scale_(out_scale), mode_(mode), rollouts_(rollouts),
          seed_(seed), fast_(fast) {
        if (mode_ == ExpectationMode::MonteCarloRollout && rollouts_ <= 0)
            throw std::invalid_argument("rollout mode needs a positive rollout budget");
        if (c_max > c_avg) throw std::invalid_argument("c_max must not exceed c_avg");
        if (fast_) {
            mode_ = ExpectationMode::GreedyRealized;
            sub_->make_fast();
        }
    }

    Combiner(const Combiner& o)
        : sub_(o.sub_->clone()), c_avg_(o.c_avg_), cap_(o.cap_), scale_(o.scale_), mode_(o.mode_), rollouts_(o.rollouts_),
          seed_(o.seed_), fast_(o.fast_), carry_(o.carry_), carry_est_(o.carry_est_), ready_(o.ready_), finished_(o.finished_),
          index_(o.index_), subchunks_(o.subchunks_), base_(o.base_), base_est_(o.base_est_), base_index_(o.base_index_),
          pending_(o.pending_), pending_est_(o.pending_est_) {}

    bool done() override {
        build();
        return !ready_;
    }
    double peek_size() override {
        build();
        if (!ready_) throw std::logic_error("chunks exhausted");
        return ready_->size;
    }
    Chunk next() override {
        build();
        if (!ready_) throw std::logic_error("chunks exhausted");
        Chunk c = std::move(*ready_);
        ready_.reset();
        base_ = std::move(pending_);
        base_est_ = pending_est_;
        base_index_ = index_;
        return c;
    }
    StreamPtr clone() const override { return std::make_unique<Combiner>(*this); }
    // In rollout mode the stream rewinds to the last chunk boundary first, so that buffered
    // lookahead is redrawn as well; only the announced size of the next chunk is kept.
    void reseed(std::uint64_t seed) override {
        seed_ = seed;
        if (rewindable() && base_) {
            sub_ = base_->clone();
            carry_.clear();
            carry_est_ = base_est_;
            ready_.reset();
            finished_ = false;
            index_ = base_index_;
            pending_.reset();
            pending_est_.reset();
        }
        sub_->reseed(mix_seed(seed, 99));
    }
    void make_fast() override {
        fast_ = true;
        mode_ = ExpectationMode::GreedyRealized;
        sub_->make_fast();
    }

    // Mean capped size of the chunk starting at the state of `snap`, over rollouts in which that
    // chunk exists (a remainder below c_avg would have been merged into the previous chunk).
    double estimate(const ChunkStream& snap, std::size_t chunk_index) const {
        double acc = 0;
        int kept = 0;
        for (int r = 0; r < rollouts_; ++r) {
            StreamPtr s = snap.clone();
            s->make_fast();
            s->reseed(mix_seed(seed_, chunk_index * 1000003ULL + static_cast<std::uint64_t>(r)));
            double S = 0, T = 0;
            while (S < c_avg_ && !s->done()) S += s->next().size;
            while (T < c_avg_ && !s->done()) T += s->next().size;
            if (T < c_avg_) S += T;
            if (S < c_avg_) continue;
            acc += std::min(S, cap_);
            ++kept;
        }
        return kept ? acc / kept : c_avg_ - (cap_ - c_avg_);
    }

    std::size_t subchunks_seen() const { return subchunks_; }
    ChunkStream& inner() { return *sub_; }

private:
    bool rewindable() const { return mode_ == ExpectationMode::MonteCarloRollout && !fast_; }

    void build() {
        if (ready_ || finished_) return;
        if (rewindable() && !base_ && index_ == 0) {
            base_ = std::shared_ptr<const ChunkStream>(sub_->clone());
            base_est_ = carry_est_;
            base_index_ = 0;
        }
        std::vector<Chunk> cur = std::move(carry_);
        carry_.clear();
        std::optional<double> est = carry_est_;
        carry_est_.reset();
        if (cur.empty() && sub_->done()) {
            finished_ = true;
            return;
        }
        if (mode_ == ExpectationMode::MonteCarloRollout && !est) est = estimate(*sub_, index_);
        if (rewindable() && index_ == base_index_ && !base_est_) base_est_ = est;
        double s = 0;
        for (const auto& c : cur) s += c.size;
        while (s < c_avg_ && !sub_->done()) {
            cur.push_back(sub_->next());
            s += cur.back().size;
            ++subchunks_;
        }
        StreamPtr snap;
        if (mode_ == ExpectationMode::MonteCarloRollout && !sub_->done()) snap = sub_->clone();
        std::vector<Chunk> look;
        double t = 0;
        while (t < c_avg_ && !sub_->done()) {
            look.push_back(sub_->next());
            t += look.back().size;
            ++subchunks_;
        }
        if (t < c_avg_) {
            for (auto& c : look) cur.push_back(std::move(c));
            s += t;
            finished_ = true;
        } else {
            carry_ = std::move(look);
            if (snap) carry_est_ = estimate(*snap, index_ + 1);
            if (snap && rewindable()) {
                pending_ = std::shared_ptr<const ChunkStream>(std::move(snap));
                pending_est_ = carry_est_;
            }
        }
        Chunk out;
        out.size = (mode_ == ExpectationMode::MonteCarloRollout && est ? *est : s) / scale_;
        for (auto& c : cur) {
            if (out.stage.empty() || out.stage.substr(out.stage.rfind('+') + 1) != c.stage)
                out.stage += (out.stage.empty() ? "" : "+") + c.stage;
            if (!fast_) {
                out.sets.insert(out.sets.end(), c.sets.begin(), c.sets.end());
                out.wit.insert(out.wit.end(), c.wit.begin(), c.wit.end());
            }
        }
        ready_ = std::move(out);
        ++index_;
        // an emitted chunk never leaves the stream empty-handed: finished_ only stops further builds
    }

    StreamPtr sub_;
    double c_avg_, cap_, scale_;
    ExpectationMode mode_;
    int rollouts_;
    std::uint64_t seed_;
    bool fast_;
    std::vector<Chunk> carry_;
    std::optional<double> carry_est_;
    std::optional<Chunk> ready_;
    bool finished_ = false;
    std::size_t index_ = 0;
    std::size_t subchunks_ = 0;
    // immutable snapshots of the sub-stream at the current and the next chunk boundary
    std::shared_ptr<const ChunkStream> base_;
    std::optional<double> base_est_;
    std::size_t base_index_ = 0;
    std::shared_ptr<const ChunkStream> pending_;
    std::optional<double> pending_est_;
};

inline StreamPtr make_level_stream(const DiamondNode& node, int w, const RefinedConfig& cfg, std::uint64_t seed, bool fast) {
    if (refined_is_base(w, cfg.alpha)) {
        if (!node.is_line || node.edges != cfg.beta) throw std::invalid_argument("space does not match the refined parameters");
        return std::make_unique<LineChunks>(cfg.beta, fast);
    }
    auto sub = std::make_unique<SubchunkStream>(node, w, cfg, mix_seed(seed, 0), fast);
    // c_avg = 3 and c_max = 3/2 child units; one parent unit is three child units
    return std::make_unique<Combiner>(std::move(sub), 3.0, 1.5, 3.0, cfg.mode, cfg.rollouts, mix_seed(seed, 1), fast);
}

// ---------------------------------------------------------------------------

struct RefinedResult {
    RequestSeq seq;     // chunk sizes in distance units
    double unit = 1;    // d_w(s,t) / beta
    std::vector<double> sizes;  // chunk sizes in units of d_w/beta
};

inline RefinedResult gen_refined_chunks(const MetricSpace& space, int w, const RefinedConfig& cfg, std::uint64_t seed) {
    const DiamondNode* root = space.diamond_root();
    if (!root) throw std::invalid_argument("refined chunks need a diamond space");
    if (cfg.beta < 2) throw std::invalid_argument("beta must be at least 2");
    auto stream = make_level_stream(*root, w, cfg, seed, false);
    RefinedResult res;
    res.unit = to_double(root->length) / static_cast<double>(cfg.beta);
    res.seq.size_mode = to_string(cfg.mode);
    while (!stream->done()) {
        Chunk c = stream->next();
        ChunkInfo info;
        info.begin = res.seq.requests.size();
        for (auto& s : c.sets) res.seq.requests.push_back(must_be_in(std::move(s)));
        for (auto& x : c.wit) res.seq.witness.push_back(std::move(x));
        info.end = res.seq.requests.size();
        info.size = c.size * res.unit;
        info.stage = c.stage;
        res.sizes.push_back(c.size);
        res.seq.chunks.push_back(info);
    }
    return res;
}

inline std::vector<Chunk> gen_subchunks(const DiamondNode& node, int w, const RefinedConfig& cfg, std::uint64_t seed,
                                        Stage2Trace* trace = nullptr, bool fast = false) {
    SubchunkStream s(node, w, cfg, seed, fast);
    auto out = drain(s);
    if (trace) *trace = s.trace();
    return out;
}

// ---------------------------------------------------------------------------
// Stage 2a in isolation: two independent chunk sequences of level w, advanced by
// the martingale rule until sum_{j<=k+1} n_L n_R >= alpha beta w^2 / 4.

struct MartingaleSummary {
    int trials = 0;
    std::vector<double> mean_s, se_s;  // per step j (1-based index j-1), over trials that reached j
    std::vector<int> reached;
    double mean_abs_stop = 0, se_abs_stop = 0;
    double min_var = 0, max_var = 0;  // conditional variances n_L n_R
    double mean_kappa = 0;
    int max_kappa = 0;
    double eta = 0;
    double bound = 0;  // Phi(-1) * eta
};

inline Stage2Trace simulate_stage2a(const DiamondNode& child, int w, const RefinedConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    StreamPtr side[2] = {make_level_stream(child, w, cfg, rng(), true), make_level_stream(child, w, cfg, rng(), true)};
    const double threshold = cfg.alpha * static_cast<double>(cfg.beta) * w * w / 4.0;
    Stage2Trace tr;
    double sum = 0, used[2] = {0, 0};
    while (true) {
        if (side[0]->done() || side[1]->done()) {
            if (cfg.strict) throw std::runtime_error("stage 2a ran out of child chunks before the stopping rule fired");
            tr.capped = true;
            break;
        }
        double nl = side[0]->peek_size(), nr = side[1]->peek_size();
        tr.products.push_back(nl * nr);
        sum += nl * nr;
        if (sum >= threshold) break;
        int x = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < stage2_prob_left(nl, nr) ? 0 : 1;
        used[x] += side[x]->next().size;
        tr.drift.push_back(used[0] - used[1]);
    }
    tr.kappa = static_cast<int>(tr.drift.size());
    tr.left_used = used[0];
    tr.right_used = used[1];
    tr.survivor = used[0] <= used[1] ? Side::Left : Side::Right;
    return tr;
}

inline MartingaleSummary martingale_stats(const DiamondNode& child, int w, const RefinedConfig& cfg, int trials, std::uint64_t seed) {
    MartingaleSummary out;
    out.trials = trials;
    std::vector<double> sum, sq;
    double abs_sum = 0, abs_sq = 0, kap = 0;
    out.min_var = std::numeric_limits<double>::infinity();
    out.max_var = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        auto tr = simulate_stage2a(child, w, cfg, mix_seed(seed, static_cast<std::uint64_t>(t)));
        for (std::size_t j = 0; j < tr.drift.size(); ++j) {
            if (sum.size() <= j) sum.push_back(0), sq.push_back(0), out.reached.push_back(0);
            sum[j] += tr.drift[j];
            sq[j] += tr.drift[j] * tr.drift[j];
            ++out.reached[j];
        }
        for (double v : tr.products) out.min_var = std::min(out.min_var, v), out.max_var = std::max(out.max_var, v);
        double a = tr.drift.empty() ? 0.0 : std::abs(tr.drift.back());
        abs_sum += a;
        abs_sq += a * a;
        kap += tr.kappa;
        out.max_kappa = std::max(out.max_kappa, tr.kappa);
    }
    for (std::size_t j = 0; j < sum.size(); ++j) {
        double n = out.reached[j], m = sum[j] / n;
        out.mean_s.push_back(m);
        out.se_s.push_back(n > 1 ? std::sqrt(std::max(0.0, sq[j] / n - m * m) / (n - 1)) : 0.0);
    }
    out.mean_abs_stop = abs_sum / trials;
    out.se_abs_stop = std::sqrt(std::max(0.0, abs_sq / trials - out.mean_abs_stop * out.mean_abs_stop) / std::max(1, trials - 1));
    out.mean_kappa = kap / trials;
    out.eta = std::sqrt(cfg.alpha * static_cast<double>(cfg.beta)) * w / 2.0;
    out.bound = kPhiMinusOne * out.eta;
    return out;
}

}  // namespace mss
