#include "mss/adversary_refined.hpp"
#include "mss/algorithms.hpp"
#include "mss/games.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mss;

namespace {

// Subchunks with sizes drawn i.i.d. from a fixed list; the count is fixed.
class ScriptedStream final : public ChunkStream {
public:
    ScriptedStream(std::vector<double> sizes, int count, std::uint64_t seed, bool random)
        : sizes_(std::move(sizes)), count_(count), rng_(seed), random_(random) {
        draw();
    }
    bool done() override { return i_ >= count_; }
    double peek_size() override { return cur_; }
    Chunk next() override {
        Chunk c;
        c.size = cur_;
        c.stage = "x";
        ++i_;
        draw();
        return c;
    }
    StreamPtr clone() const override { return std::make_unique<ScriptedStream>(*this); }
    void reseed(std::uint64_t s) override {
        rng_.seed(s);
        draw();
    }
    void make_fast() override {}

private:
    void draw() {
        if (!random_) {
            cur_ = sizes_[static_cast<std::size_t>(i_) % sizes_.size()];
            return;
        }
        std::uniform_int_distribution<std::size_t> u(0, sizes_.size() - 1);
        cur_ = sizes_[u(rng_)];
    }
    std::vector<double> sizes_;
    int count_;
    int i_ = 0;
    std::mt19937_64 rng_;
    bool random_;
    double cur_ = 0;
};

Q witness_cost(const MetricSpace& sp, const RequestSeq& seq) {
    TrajectoryAgent agent(resolve_witnesses(sp, seq));
    return run_mss(sp, seq, agent, sp.s()).total;
}

}  // namespace

TEST(Refined, BaseChunks) {
    RefinedConfig cfg{4, 0.01};
    auto sp = diamond_refined(0, 4, cfg.alpha);
    auto r = gen_refined_chunks(*sp, 0, cfg, 1);
    ASSERT_EQ(r.seq.chunks.size(), 4u);
    for (int i = 0; i < 4; ++i) {
        auto mem = atom_members(*sp, r.seq.requests[static_cast<std::size_t>(i)].atoms);
        ASSERT_EQ(mem.size(), 1u);
        EXPECT_EQ(mem[0], flat_point(i + 1));
        EXPECT_DOUBLE_EQ(*r.seq.chunks[static_cast<std::size_t>(i)].size, 1.0);
    }
}

TEST(Refined, Stage2Formulas) {
    EXPECT_DOUBLE_EQ(stage2_prob_left(1.5, 1.5), 0.5);
    EXPECT_DOUBLE_EQ(stage2_size(1.5, 1.5), 0.75);
    EXPECT_DOUBLE_EQ(stage2_prob_left(0.5, 1.5), 0.75);
    EXPECT_DOUBLE_EQ(stage2_size(0.5, 1.5), 0.375);
    for (double target : {1.0, 2.5, 7.0, 12.25}) {
        std::vector<double> prods(100, 0.25);
        // products of 1/4 against threshold target/4
        EXPECT_EQ(*stage2_kappa(prods, target / 4), static_cast<int>(std::ceil(target)) - 1);
    }
}

TEST(Refined, OneLevelAboveBase) {
    RefinedConfig cfg{4, 1.5, ExpectationMode::MonteCarloRollout, 64, true};
    auto sp = diamond_refined(1, 4, cfg.alpha);
    EXPECT_EQ(sp->diameter(), Q(12));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto r = gen_refined_chunks(*sp, 1, cfg, seed);
        EXPECT_EQ(witness_cost(*sp, r.seq), sp->diameter());
        EXPECT_EQ(opt_cost_dp(*sp, r.seq, sp->s()).cost, sp->diameter());
        auto last = atom_members(*sp, r.seq.requests.back().atoms);
        ASSERT_EQ(last.size(), 1u);
        EXPECT_EQ(last[0], sp->t());
        for (double c : r.sizes) {
            EXPECT_GE(c, 0.5);
            EXPECT_LE(c, 1.5);
        }
    }
}

TEST(Refined, TwoInductiveLevelsCertificate) {
    for (auto mode : {ExpectationMode::GreedyRealized, ExpectationMode::MonteCarloRollout}) {
        RefinedConfig cfg{4, 1.5, mode, 32, true};
        auto sp = diamond_refined(2, 4, cfg.alpha);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto r = gen_refined_chunks(*sp, 2, cfg, seed);
            EXPECT_EQ(witness_cost(*sp, r.seq), sp->diameter());
            EXPECT_EQ(opt_cost_dp(*sp, r.seq, sp->s()).cost, sp->diameter());
            for (const auto& c : r.seq.chunks) EXPECT_LT(c.begin, c.end);
            EXPECT_EQ(r.seq.chunks.back().end, r.seq.size());
        }
    }
}

TEST(Refined, StrictModeReportsExhaustion) {
    // threshold alpha*beta*(w-1)^2/4 = 10 needs far more child chunks than a side holds
    RefinedConfig cfg{4, 10.0, ExpectationMode::GreedyRealized, 1, true};
    auto sp = diamond_refined(2, 4, cfg.alpha);
    EXPECT_THROW(gen_refined_chunks(*sp, 2, cfg, 0), std::runtime_error);
    cfg.strict = false;
    auto r = gen_refined_chunks(*sp, 2, cfg, 0);
    EXPECT_EQ(witness_cost(*sp, r.seq), sp->diameter());
}

TEST(Refined, SubchunkSizesBounded) {
    RefinedConfig cfg{4, 1.5, ExpectationMode::GreedyRealized, 1, false};
    auto sp = diamond_refined(3, 4, cfg.alpha);
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        for (const auto& c : gen_subchunks(*sp->diamond_root(), 3, cfg, seed)) {
            EXPECT_GE(c.size, 0.0);
            EXPECT_LE(c.size, 1.5);
        }
}

TEST(Refined, DefaultAlphaFirstInductiveLevel) {
    RefinedConfig cfg;
    cfg.rollouts = 16;
    int w = 1;
    while (refined_is_base(w, cfg.alpha)) ++w;
    auto sp = diamond_refined(w, cfg.beta, cfg.alpha);
    EXPECT_EQ(sp->diameter(), Q(3 * 64));
    Stage2Trace tr;
    gen_subchunks(*sp->diamond_root(), w, cfg, 3, &tr, true);
    // unit products against alpha*beta*(w-1)^2/4 just below 16
    EXPECT_EQ(tr.kappa, 15);
    auto r = gen_refined_chunks(*sp, w, cfg, 3);
    EXPECT_EQ(witness_cost(*sp, r.seq), sp->diameter());
}

TEST(Combiner, DeterministicSizes) {
    for (auto mode : {ExpectationMode::GreedyRealized, ExpectationMode::MonteCarloRollout}) {
        Combiner c(std::make_unique<ScriptedStream>(std::vector<double>{3.0}, 7, 0, false), 3.0, 1.5, 1.0, mode, 8, 1, false);
        auto out = drain(c);
        ASSERT_EQ(out.size(), 7u);
        for (const auto& ch : out) EXPECT_DOUBLE_EQ(ch.size, 3.0);
        EXPECT_EQ(c.subchunks_seen(), 7u);
    }
}

TEST(Combiner, ZeroRolloutsRejected) {
    EXPECT_THROW(Combiner(std::make_unique<ScriptedStream>(std::vector<double>{1.0}, 3, 0, false), 3.0, 1.5, 1.0,
                          ExpectationMode::MonteCarloRollout, 0, 1, false),
                 std::invalid_argument);
}

TEST(Combiner, RolloutSizesInIntervalAndTotalLoss) {
    const int N = 1000;
    double sum_out = 0, sum_in = 0;
    for (int seed = 0; seed < N; ++seed) {
        std::vector<double> menu{0.0, 0.25, 0.75, 1.0, 1.5};
        ScriptedStream probe(menu, 40, static_cast<std::uint64_t>(seed), true);
        auto copy = probe.clone();
        for (const auto& ch : drain(*copy)) sum_in += ch.size;
        Combiner c(probe.clone(), 3.0, 1.5, 1.0, ExpectationMode::MonteCarloRollout, 64, static_cast<std::uint64_t>(seed), false);
        for (const auto& ch : drain(c)) {
            EXPECT_GE(ch.size, 1.5);
            EXPECT_LE(ch.size, 4.5);
            sum_out += ch.size;
        }
    }
    EXPECT_GE(sum_out / N, sum_in / N - 3.0);
}

TEST(Martingale, UnitChildren) {
    // alpha*beta*w^2/4 = 16 with unit chunk sizes: kappa = 15 every time
    RefinedConfig cfg{64, 1.0 / 16};
    auto child = make_line(64);
    auto ms = martingale_stats(*child, 4, cfg, 2000, 5);
    EXPECT_EQ(ms.max_kappa, 15);
    EXPECT_DOUBLE_EQ(ms.mean_kappa, 15.0);
    for (std::size_t j = 0; j < ms.mean_s.size(); ++j) EXPECT_LE(std::abs(ms.mean_s[j]), 3 * ms.se_s[j] + 1e-12);
    EXPECT_GE(ms.min_var, 0.25);
    EXPECT_LE(ms.max_var, 2.25);
    EXPECT_GE(ms.mean_abs_stop, ms.bound);
}

TEST(Martingale, InductiveChildrenVariances) {
    RefinedConfig cfg{4, 1.5, ExpectationMode::GreedyRealized, 1, false};
    auto sp = diamond_refined(2, 4, cfg.alpha);
    auto ms = martingale_stats(*sp->diamond_root(), 2, cfg, 300, 9);
    EXPECT_GE(ms.min_var, 0.25);
    EXPECT_LE(ms.max_var, 2.25);
}
