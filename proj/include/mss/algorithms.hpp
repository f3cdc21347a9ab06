#pragma once

#include "mss/games.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mss {

inline bool view_compliant(const StepView& v) {
    return std::binary_search(v.eligible.begin(), v.eligible.end(), v.current);
}

class Greedy final : public MssAlgorithm {
public:
    std::string name() const override { return "greedy"; }
    void reset(const MetricSpace&, const PointAddr&, std::uint64_t) override {}
    Decision step(const StepView& v) override {
        if (view_compliant(v)) return {v.current, false};
        if (v.eligible.empty()) throw std::invalid_argument("request admits no point");
        std::size_t best = 0;
        Q bd = v.space.distance_unchecked(v.current, v.eligible[0]);
        for (std::size_t i = 1; i < v.eligible.size(); ++i) {
            Q d = v.space.distance_unchecked(v.current, v.eligible[i]);
            if (d < bd) bd = d, best = i;
        }
        return {v.eligible[best], false};
    }
};

// Work function restricted to the current request: f(y) = min_x f_prev(x) + d(x,y).
// Moves to argmin f(x) + d(cur,x); staying put wins ties, then the smallest address.
class WorkFunction final : public MssAlgorithm {
public:
    std::string name() const override { return "work_function"; }
    void reset(const MetricSpace&, const PointAddr& start, std::uint64_t) override {
        support_ = {start};
        f_ = {Q(0)};
    }
    Decision step(const StepView& v) override {
        if (v.eligible.empty()) throw std::invalid_argument("request admits no point");
        std::vector<Q> g(v.eligible.size());
        for (std::size_t y = 0; y < v.eligible.size(); ++y) {
            std::optional<Q> best;
            for (std::size_t x = 0; x < support_.size(); ++x) {
                Q val = f_[x] + v.space.distance_unchecked(support_[x], v.eligible[y]);
                if (!best || val < *best) best = val;
            }
            g[y] = *best;
        }
        support_ = v.eligible;
        f_ = std::move(g);
        std::optional<Q> best;
        std::size_t arg = 0;
        for (std::size_t y = 0; y < support_.size(); ++y) {
            Q val = f_[y] + v.space.distance_unchecked(v.current, support_[y]);
            bool stay = support_[y] == v.current;
            if (!best || val < *best || (val == *best && stay)) best = val, arg = y;
        }
        return {support_[arg], false};
    }
    const std::vector<PointAddr>& support() const { return support_; }
    const std::vector<Q>& values() const { return f_; }

private:
    std::vector<PointAddr> support_;
    std::vector<Q> f_;
};

class RandomEligible final : public MssAlgorithm {
public:
    std::string name() const override { return "random_eligible"; }
    void reset(const MetricSpace&, const PointAddr&, std::uint64_t seed) override { rng_.seed(seed); }
    Decision step(const StepView& v) override {
        if (view_compliant(v)) return {v.current, false};
        if (v.eligible.empty()) throw std::invalid_argument("request admits no point");
        std::uniform_int_distribution<std::size_t> u(0, v.eligible.size() - 1);
        return {v.eligible[u(rng_)], false};
    }

private:
    std::mt19937_64 rng_;
};

// Escapes once the cost accrued inside the window plus the base algorithm's next move
// reaches threshold * price. An infinite threshold never escapes.
class EscapeAware final : public MssAlgorithm {
public:
    EscapeAware(std::unique_ptr<MssAlgorithm> base, double threshold) : base_(std::move(base)), threshold_(threshold) {}
    std::string name() const override { return "escape(" + base_->name() + "," + format_double(threshold_) + ")"; }
    void reset(const MetricSpace& space, const PointAddr& start, std::uint64_t seed) override { base_->reset(space, start, seed); }
    Decision step(const StepView& v) override {
        Decision d = base_->step(v);
        if (!v.escape_open || std::isinf(threshold_)) return d;
        double projected = to_double(v.window_cost + v.space.distance_unchecked(v.current, d.target));
        if (projected >= threshold_ * to_double(v.escape_price)) return {v.current, true};
        return d;
    }

private:
    std::unique_ptr<MssAlgorithm> base_;
    double threshold_;
};

// ---------------------------------------------------------------------------

using AlgorithmFactory = std::function<std::unique_ptr<MssAlgorithm>()>;

inline std::map<std::string, AlgorithmFactory>& algorithm_registry() {
    static std::map<std::string, AlgorithmFactory> reg = [] {
        std::map<std::string, AlgorithmFactory> r;
        r["greedy"] = [] { return std::make_unique<Greedy>(); };
        r["work_function"] = [] { return std::make_unique<WorkFunction>(); };
        r["random_eligible"] = [] { return std::make_unique<RandomEligible>(); };
        return r;
    }();
    return reg;
}

inline void register_algorithm(const std::string& name, AlgorithmFactory f) { algorithm_registry()[name] = std::move(f); }

// Names look like "greedy" or "escape:greedy:2" (base algorithm, threshold).
inline std::unique_ptr<MssAlgorithm> make_algorithm(const std::string& name) {
    if (name.rfind("escape:", 0) == 0) {
        auto rest = name.substr(7);
        auto colon = rest.rfind(':');
        if (colon == std::string::npos) throw std::invalid_argument("escape wrapper needs base:threshold");
        double th = rest.substr(colon + 1) == "inf" ? std::numeric_limits<double>::infinity() : std::stod(rest.substr(colon + 1));
        return std::make_unique<EscapeAware>(make_algorithm(rest.substr(0, colon)), th);
    }
    auto& reg = algorithm_registry();
    auto it = reg.find(name);
    if (it == reg.end()) throw std::invalid_argument("unknown algorithm '" + name + "'");
    return it->second();
}

inline std::vector<std::string> algorithm_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : algorithm_registry()) out.push_back(k);
    return out;
}

}  // namespace mss
