#include "mss/harness.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <memory>

using namespace mss;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "csv";
};

// stdout unless --out names a file
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw std::runtime_error("cannot open " + path);
        }
    }
    std::ostream& os() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

struct SpaceOpts {
    std::string kind = "diamond_refined";
    int w = 2;
    std::string m;
    std::int64_t beta = 4;
    double alpha = 1.5;
    std::int64_t l = 8;
    std::string diam = "1";
    int leaves = 32;
    std::string space_file, hst_file;

    void add(CLI::App* app) {
        app->add_option("--kind", kind, "line, uniform, diamond_basic, lgt_variant, diamond_refined, hst")->capture_default_str();
        app->add_option("--w", w, "level")->capture_default_str();
        app->add_option("--m", m, "comma separated m_1..m_w (basic and lgt)");
        app->add_option("--beta", beta, "edges per base line (refined, line)")->capture_default_str();
        app->add_option("--alpha", alpha, "refined base threshold constant")->capture_default_str();
        app->add_option("--l", l, "points of a uniform space")->capture_default_str();
        app->add_option("--diam", diam, "diameter of a uniform space")->capture_default_str();
        app->add_option("--leaves", leaves, "leaf budget for a random HST")->capture_default_str();
        app->add_option("--space", space_file, "space descriptor file (key = value)");
        app->add_option("--hst", hst_file, "HST file (indented tree)");
    }

    std::vector<std::int64_t> mvec() const {
        auto v = parse_m(m);
        if (v.empty()) v.assign(static_cast<std::size_t>(w), 2);
        return v;
    }

    SpacePtr build() const {
        if (!hst_file.empty()) {
            auto in = open_in(hst_file);
            return ultrametric(hst_preprocess(parse_hst(in)));
        }
        if (!space_file.empty()) {
            auto in = open_in(space_file);
            return space_from_descriptor(parse_kv(in));
        }
        return from_flags();
    }

    // a descriptor file overrides the shape flags, so generators see the same parameters
    void load() {
        if (space_file.empty()) return;
        auto in = open_in(space_file);
        auto d = parse_kv(in);
        if (d.count("kind")) kind = d.at("kind");
        if (d.count("w")) w = std::stoi(d.at("w"));
        if (d.count("m")) m = d.at("m");
        if (d.count("beta")) beta = std::stoll(d.at("beta"));
        if (d.count("alpha")) alpha = std::stod(d.at("alpha"));
    }

    SpacePtr from_flags() const {
        if (kind == "line") return line_metric(beta);
        if (kind == "uniform") return uniform_metric(l, parse_rational(diam));
        if (kind == "diamond_basic") return diamond_basic(w, mvec());
        if (kind == "lgt_variant") return lgt_variant(w, mvec());
        if (kind == "diamond_refined") return diamond_refined(w, beta, alpha);
        throw std::invalid_argument("unknown space kind: " + kind);
    }
};

void write_table(std::ostream& os, const Globals& g, const std::vector<RatioRow>& rows) {
    if (g.format == "json") os << rows_to_json(rows).dump(2) << '\n';
    else write_rows_csv(os, rows);
}

int cmd_gen_metric(const Globals& g, const SpaceOpts& so, bool edges) {
    Sink sink(g.out);
    if (so.kind == "hst") {
        std::mt19937_64 rng(g.seed);
        write_hst(sink.os(), random_hst(rng, so.leaves));
        return 0;
    }
    auto sp = so.build();
    if (edges) {
        write_edge_list(sink.os(), materialize_graph(*sp));
        return 0;
    }
    auto d = sp->descriptor();
    if (g.format == "json") {
        json j(d);
        j["points"] = sp->point_count();
        j["diameter"] = to_string(sp->diameter());
        sink.os() << j.dump(2) << '\n';
    } else {
        write_kv(sink.os(), d);
    }
    return 0;
}

struct SeqOpts {
    std::string family = "refined";
    std::string mode = "rollout";
    int rollouts = 256;
    bool lenient = false;
    int h = 1;
    int mirror = 1;
    double ualpha = 1.0 / 16;
    std::string sizes;
};

RequestSeq make_sequence(const Globals& g, const SpaceOpts& so, const SeqOpts& q, const MetricSpace& sp) {
    if (q.family == "basic") return gen_basic_sequence(sp, {so.w, so.mvec(), g.seed});
    if (q.family == "lgt") return gen_lgt_sequence(sp, {so.w, so.mvec(), g.seed});
    if (q.family == "refined") {
        RefinedConfig rc{so.beta, so.alpha, parse_mode(q.mode), q.rollouts, !q.lenient};
        return gen_refined_chunks(sp, so.w, rc, g.seed).seq;
    }
    if (q.family == "universal") {
        const auto* um = dynamic_cast<const UltrametricSpace*>(&sp);
        if (!um) throw std::invalid_argument("universal sequences need --hst");
        auto plan = select_subspace(um->tree(), q.ualpha);
        std::mt19937_64 rng(g.seed);
        std::vector<UniversalDraw> draws;
        for (int i = 0; i < q.h; ++i) draws.push_back(sample_draw(plan, rng));
        return draws_to_sequence(sp, plan, draws, true);
    }
    throw std::invalid_argument("unknown family: " + q.family);
}

int cmd_gen_seq(const Globals& g, const SpaceOpts& so, const SeqOpts& q) {
    auto sp = so.build();
    RequestSeq seq = make_sequence(g, so, q, *sp);
    if (q.mirror > 1) seq = repeat_mirrored(*sp, seq, q.mirror);
    Sink sink(g.out);
    if (g.format == "json") {
        json j;
        j["space"] = sp->descriptor();
        j["size_mode"] = seq.size_mode;
        j["requests"] = json::array();
        for (const auto& r : seq.requests) {
            json members = json::array();
            for (const auto& p : atom_members(*sp, r.atoms)) members.push_back(to_string(p));
            j["requests"].push_back({{"polarity", r.polarity == Polarity::MustBeIn ? "in" : "out"}, {"points", members}});
        }
        j["chunks"] = json::array();
        for (const auto& c : seq.chunks) {
            json cj{{"begin", c.begin}, {"end", c.end}, {"stage", c.stage}};
            cj["size"] = c.size ? json(*c.size) : json(nullptr);
            j["chunks"].push_back(cj);
        }
        sink.os() << j.dump(2) << '\n';
    } else {
        write_sequence(sink.os(), *sp, seq);
    }
    if (!q.sizes.empty()) {
        std::ofstream mf(q.sizes);
        if (!mf) throw std::runtime_error("cannot open " + q.sizes);
        write_size_manifest(mf, seq);
    }
    return 0;
}

struct RunOpts {
    std::string seq_file;
    std::string algorithm = "greedy";
    std::string start;
    std::string escape;
    bool opt = false;
    double ualpha = 1.0 / 16;
};

int cmd_run(const Globals& g, const SpaceOpts& so, const RunOpts& ro) {
    auto sp = so.build();
    auto in = open_in(ro.seq_file);
    RequestSeq seq = read_sequence(in);
    PointAddr start = ro.start.empty() ? sp->s() : sp->canonicalize(parse_point(ro.start));
    std::unique_ptr<MssAlgorithm> alg;
    if (ro.algorithm == "stay_inside") {
        const auto* um = dynamic_cast<const UltrametricSpace*>(sp.get());
        if (!um) throw std::invalid_argument("stay_inside needs --hst");
        alg = std::make_unique<StayInside>(select_subspace(um->tree(), ro.ualpha));
    } else {
        alg = make_algorithm(ro.algorithm);
    }
    RunOptions opt;
    opt.seed = g.seed;
    if (!ro.escape.empty()) opt.escape = EscapeOption{parse_rational(ro.escape)};
    auto led = run_mss(*sp, seq, *alg, start, opt);
    Sink sink(g.out);
    std::optional<Q> best;
    if (ro.opt) best = opt_cost_dp(*sp, seq, start).cost;
    if (g.format == "json") {
        json j = ledger_to_json(led, ro.algorithm);
        if (best) j["opt"] = to_string(*best);
        sink.os() << j.dump(2) << '\n';
    } else {
        sink.os() << "request,cost,position\n";
        for (std::size_t i = 0; i < led.per_request.size(); ++i)
            sink.os() << i << ',' << to_string(led.per_request[i]) << ','
                      << (i < led.trajectory.size() ? to_string(led.trajectory[i]) : "") << '\n';
        sink.os() << "# total=" << to_string(led.total) << (led.escaped ? " escaped" : "");
        if (best) sink.os() << " opt=" << to_string(*best);
        sink.os() << '\n';
    }
    return 0;
}

struct ExpOpts {
    ExperimentConfig cfg;
    std::string algorithms = "greedy,work_function";
    std::string mode = "greedy";
    bool strict = false;
    int trees = 50, draws = 400, leaves = 64;
    double ualpha = 1.0 / 16;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

int cmd_experiment(const Globals& g, ExpOpts e, const SpaceOpts& so) {
    e.cfg.seed = g.seed;
    e.cfg.algorithms = split_list(e.algorithms);
    Sink sink(g.out);
    if (e.cfg.family == "universal") {
        std::mt19937_64 rng(g.seed);
        std::vector<DrawCostRow> rows;
        for (int t = 0; t < e.trees; ++t) {
            auto tree = random_hst(rng, e.leaves);
            auto r = universal_per_draw(tree, t, e.cfg.algorithms, e.draws, g.seed, e.ualpha);
            rows.insert(rows.end(), r.begin(), r.end());
        }
        if (g.format == "json") {
            json a = json::array();
            for (const auto& r : rows)
                a.push_back({{"tree", r.tree}, {"case", r.kind}, {"algorithm", r.algorithm}, {"draws", r.draws},
                             {"mean_cost", r.mean_cost}, {"se", r.se}, {"diam", r.diam}});
            sink.os() << a.dump(2) << '\n';
        } else {
            sink.os() << "tree,case,algorithm,draws,mean_cost,se,diam\n" << std::setprecision(10);
            for (const auto& r : rows)
                sink.os() << r.tree << ',' << r.kind << ',' << r.algorithm << ',' << r.draws << ',' << r.mean_cost << ',' << r.se
                          << ',' << r.diam << '\n';
        }
        return 0;
    }
    e.cfg.refined = RefinedConfig{so.beta, so.alpha, parse_mode(e.mode), e.cfg.refined.rollouts, e.strict};
    auto m = so.mvec();
    if (!m.empty()) e.cfg.m = m.front();
    write_table(sink.os(), g, experiment_ratio(e.cfg));
    return 0;
}

int cmd_verify(const Globals& g, ContractConfig c, const std::string& algorithms, const SpaceOpts& so, const std::string& mode) {
    c.seed = g.seed;
    c.refined.beta = so.beta;
    c.refined.alpha = so.alpha;
    c.refined.mode = parse_mode(mode);
    c.w = so.w;
    if (!algorithms.empty()) c.algorithms = split_list(algorithms);
    auto rep = verify_chunk_contract(c);
    Sink sink(g.out);
    if (g.format == "json") {
        json a = json::array();
        for (const auto& r : rep)
            a.push_back({{"algorithm", r.algorithm}, {"checks", r.checks}, {"violations", r.violations},
                         {"worst_gap", r.worst_gap}, {"sum_cost", r.sum_cost}, {"sum_size", r.sum_size}});
        sink.os() << a.dump(2) << '\n';
    } else {
        sink.os() << "algorithm,checks,violations,worst_gap,sum_cost,sum_size\n" << std::setprecision(10);
        for (const auto& r : rep)
            sink.os() << r.algorithm << ',' << r.checks << ',' << r.violations << ',' << r.worst_gap << ',' << r.sum_cost << ','
                      << r.sum_size << '\n';
    }
    bool bad = false;
    for (const auto& r : rep) bad = bad || r.violations > 0;
    return bad ? 2 : 0;
}

struct OracleOpts {
    std::string which = "binom";
    double p = 0.5, mu = 16, lambda = 0.3, c = 0.1;
    int trials = 100000;
    int sequences = 1000;
    int trees = 100;
    double ualpha = 1.0 / 16;
};

int cmd_oracle(const Globals& g, const OracleOpts& o) {
    Sink sink(g.out);
    json rows = json::array();
    if (o.which == "binom") {
        for (int k = 1; k <= 9; ++k) {
            double delta = k / 10.0;
            auto r = oracle_binom_tail(o.p, o.mu, delta, o.lambda);
            rows.push_back({{"delta", delta}, {"probability", r.probability}, {"bound", r.bound}, {"holds", r.holds}});
        }
    } else if (o.which == "balls") {
        for (int n : {2, 4, 8}) {
            auto base = static_cast<std::int64_t>(std::ceil(n * std::log(static_cast<double>(n))));
            for (int f : {1, 4, 16}) {
                auto r = oracle_balls_bins(n, base * f, o.trials, o.c, mix_seed(g.seed, static_cast<std::uint64_t>(n * 100 + f)));
                rows.push_back({{"n", n}, {"m", base * f}, {"mean_min", r.mean_min}, {"se", r.se}, {"bound", r.bound}, {"holds", r.holds}});
            }
        }
    } else if (o.which == "dichotomy") {
        rows.push_back({{"sequences", o.sequences}, {"violations", dichotomy_violations(o.sequences, g.seed)}});
    } else if (o.which == "census") {
        std::mt19937_64 rng(g.seed);
        std::vector<HstNode> corpus;
        for (int t = 0; t < o.trees; ++t) corpus.push_back(random_hst(rng, 64));
        auto c = sweep_case_analysis(corpus, o.ualpha);
        rows.push_back({{"nodes", c.nodes}, {"violations", c.violations}, {"binary", c.binary}, {"balanced", c.balanced}, {"uniform", c.uniform}});
    } else {
        throw std::invalid_argument("oracle must be binom, balls, dichotomy or census");
    }
    if (g.format == "json") {
        sink.os() << rows.dump(2) << '\n';
        return 0;
    }
    bool header = false;
    for (const auto& r : rows) {
        if (!header) {
            bool first = true;
            for (auto it = r.begin(); it != r.end(); ++it) sink.os() << (first ? "" : ",") << it.key(), first = false;
            sink.os() << '\n';
            header = true;
        }
        bool first = true;
        for (auto it = r.begin(); it != r.end(); ++it) sink.os() << (first ? "" : ",") << it.value().dump(), first = false;
        sink.os() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lower-bound constructions and experiments for metrical service systems"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key = value file; subcommand keys go under a [subcommand] section");
    Globals g;
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--out", g.out, "output file (default stdout)");
    app.add_option("--format", g.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    auto* gm = app.add_subcommand("gen-metric", "describe or materialize a metric space");
    SpaceOpts gm_s;
    gm_s.add(gm);
    bool edges = false;
    gm->add_flag("--edges", edges, "write the materialized edge list instead of the descriptor");

    auto* gs = app.add_subcommand("gen-seq", "generate a request sequence");
    SpaceOpts gs_s;
    SeqOpts gs_q;
    gs_s.add(gs);
    gs->add_option("--family", gs_q.family, "basic, lgt, refined, universal")->capture_default_str();
    gs->add_option("--mode", gs_q.mode, "refined size mode: rollout or greedy")->capture_default_str();
    gs->add_option("--rollouts", gs_q.rollouts, "rollouts per chunk size")->capture_default_str();
    gs->add_flag("--lenient", gs_q.lenient, "cap stage 2a instead of failing when children run out");
    gs->add_option("--draws", gs_q.h, "universal: number of draws")->capture_default_str();
    gs->add_option("--mirror", gs_q.mirror, "repeat s->t, t->s, ... this many rounds")->capture_default_str();
    gs->add_option("--universal-alpha", gs_q.ualpha, "universal case-selection constant")->capture_default_str();
    gs->add_option("--sizes", gs_q.sizes, "write the chunk size manifest (CSV) here");

    auto* rn = app.add_subcommand("run", "race an algorithm on a stored sequence");
    SpaceOpts rn_s;
    RunOpts rn_o;
    rn_s.add(rn);
    rn->add_option("--seq", rn_o.seq_file, "sequence file")->required();
    rn->add_option("--algorithm", rn_o.algorithm, "name from the registry, or escape:<base>:<threshold>")->capture_default_str();
    rn->add_option("--start", rn_o.start, "start address (default s)");
    rn->add_option("--escape", rn_o.escape, "escape price (rational)");
    rn->add_flag("--opt", rn_o.opt, "also report the DP optimum");
    rn->add_option("--universal-alpha", rn_o.ualpha, "stay_inside case-selection constant")->capture_default_str();

    auto* ex = app.add_subcommand("experiment", "ratio tables and universal per-draw costs");
    SpaceOpts ex_s;
    ExpOpts ex_o;
    ex_s.beta = 4;
    ex_s.alpha = 1.5;
    ex_s.add(ex);
    ex->add_option("--family", ex_o.cfg.family, "basic, lgt, refined, coupon, universal")->capture_default_str();
    ex->add_option("--w-lo", ex_o.cfg.w_lo, "first level")->capture_default_str();
    ex->add_option("--w-hi", ex_o.cfg.w_hi, "last level")->capture_default_str();
    ex->add_option("--algorithms", ex_o.algorithms, "comma separated")->capture_default_str();
    ex->add_option("--trials", ex_o.cfg.trials, "sequences per cell")->capture_default_str();
    ex->add_option("--opt", ex_o.cfg.opt, "auto, dp or certificate")->capture_default_str();
    ex->add_option("--dp-budget", ex_o.cfg.dp_budget, "DP work budget")->capture_default_str();
    ex->add_option("--mode", ex_o.mode, "refined size mode")->capture_default_str();
    ex->add_option("--rollouts", ex_o.cfg.refined.rollouts, "rollouts per chunk size")->capture_default_str();
    ex->add_flag("--strict", ex_o.strict, "fail instead of capping stage 2a");
    ex->add_option("--additive", ex_o.cfg.additive, "constant subtracted from online cost for the adjusted ratio")->capture_default_str();
    ex->add_option("--mirror", ex_o.cfg.mirror_reps, "mirrored repetitions")->capture_default_str();
    ex->add_option("--ell", ex_o.cfg.ell, "coupon: points")->capture_default_str();
    ex->add_option("--coupon-draws", ex_o.cfg.h, "coupon: draws")->capture_default_str();
    ex->add_option("--trees", ex_o.trees, "universal: random HSTs")->capture_default_str();
    ex->add_option("--draws", ex_o.draws, "universal: draws per tree and algorithm")->capture_default_str();
    ex->add_option("--tree-leaves", ex_o.leaves, "universal: leaf budget")->capture_default_str();
    ex->add_option("--universal-alpha", ex_o.ualpha, "universal case-selection constant")->capture_default_str();

    auto* vf = app.add_subcommand("verify", "Monte Carlo check of per-chunk expected cost against chunk sizes");
    SpaceOpts vf_s;
    ContractConfig vf_c;
    std::string vf_alg, vf_mode = "rollout";
    vf_s.add(vf);
    vf->add_option("--algorithms", vf_alg, "comma separated (default: the full suite)");
    vf->add_option("--prefixes", vf_c.prefixes, "sampled sequences")->capture_default_str();
    vf->add_option("--samples", vf_c.suffix_samples, "suffix draws per chunk")->capture_default_str();
    vf->add_option("--rollouts", vf_c.refined.rollouts, "rollouts per chunk size")->capture_default_str();
    vf->add_option("--mode", vf_mode, "refined size mode")->capture_default_str();
    vf->add_option("--z", vf_c.z, "standard errors of slack")->capture_default_str();

    auto* orc = app.add_subcommand("oracle", "probability checks behind the lower bounds");
    OracleOpts oo;
    orc->add_option("--which", oo.which, "binom, balls, dichotomy, census")->capture_default_str();
    orc->add_option("--p", oo.p, "binomial p")->capture_default_str();
    orc->add_option("--mu", oo.mu, "binomial mean")->capture_default_str();
    orc->add_option("--lambda", oo.lambda, "binomial tail constant")->capture_default_str();
    orc->add_option("--c", oo.c, "balls-in-bins constant")->capture_default_str();
    orc->add_option("--trials", oo.trials, "balls-in-bins trials")->capture_default_str();
    orc->add_option("--sequences", oo.sequences, "dichotomy: random size sequences")->capture_default_str();
    orc->add_option("--trees", oo.trees, "census: random HSTs")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        for (auto* so : {&gm_s, &gs_s, &rn_s, &ex_s, &vf_s}) so->load();
        if (*gm) return cmd_gen_metric(g, gm_s, edges);
        if (*gs) return cmd_gen_seq(g, gs_s, gs_q);
        if (*rn) return cmd_run(g, rn_s, rn_o);
        if (*ex) return cmd_experiment(g, ex_o, ex_s);
        if (*vf) return cmd_verify(g, vf_c, vf_alg, vf_s, vf_mode);
        if (*orc) return cmd_oracle(g, oo);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
