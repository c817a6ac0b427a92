#include "treedtn/mc_oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include <json.hpp>

#include "treedtn/errors.hpp"

namespace treedtn {

void WalkConfig::validate() const {
    if (beta.beta() < 0 || !beta.below_half())
        throw PreconditionError("walks need 0 <= beta < 1/2, got beta = " + beta.to_string());
    if (max_depth < 1) throw PreconditionError("walk depth must be at least 1");
    if (samples < 1) throw PreconditionError("walk needs at least one sample");
}

namespace {

// One transition on a digit stack; shared by walk_step and the estimator.
void step_digits(std::vector<Digit>& digits, int m, double beta, WalkRng& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double u = uniform(rng);
    if (digits.empty()) {
        digits.push_back(std::min<Digit>(static_cast<Digit>(u * m), static_cast<Digit>(m - 1)));
        return;
    }
    if (u < beta) {
        digits.pop_back();
        return;
    }
    const double v = (u - beta) / (1.0 - beta) * m;
    digits.push_back(std::min<Digit>(static_cast<Digit>(v), static_cast<Digit>(m - 1)));
}

double psi_of(const std::vector<Digit>& digits, int m) {
    double s = 0.0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) s = (s + *it) / m;
    return s;
}

// Running mean and squared deviation, merged pairwise.
struct Moments {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;
    double steps = 0.0;

    void add(double v) {
        n += 1;
        const double delta = v - mean;
        mean += delta / n;
        m2 += delta * (v - mean);
    }
    void merge(const Moments& o) {
        if (o.n == 0) return;
        const double total = n + o.n;
        const double delta = o.mean - mean;
        mean += delta * o.n / total;
        m2 += o.m2 + delta * delta * n * o.n / total;
        n = total;
        steps += o.steps;
    }
};

}  // namespace

Vertex walk_step(const Vertex& current, double beta, WalkRng& rng) {
    std::vector<Digit> digits(current.digits().begin(), current.digits().end());
    step_digits(digits, current.m(), beta, rng);
    return Vertex(current.config(), std::move(digits));
}

double truncation_bias_bound(const BoundaryDatum& g, const BetaParam& beta, TreeConfig config,
                             std::size_t depth) {
    const auto lip = g.lipschitz_bound();
    if (!lip) {
        const auto [lo, hi] = g.range();
        return hi - lo;
    }
    const double p = beta.p().get_d();
    const double m = config.m();
    double s = 0.0;
    for (std::size_t j = 0; j < depth; ++j) s += std::pow(p, j) * std::pow(m, -static_cast<double>(depth - j));
    return *lip * (std::pow(p, depth) + (1 - p) * s);
}

WalkEstimate estimate_u(const BoundaryDatum& g, const WalkConfig& cfg, const Vertex& x) {
    cfg.validate();
    if (x.m() != cfg.config.m()) throw PreconditionError("start vertex is on a different tree");
    if (x.level() >= cfg.max_depth)
        throw PreconditionError("start vertex must lie above the walk depth " + std::to_string(cfg.max_depth));

    const int m = cfg.config.m();
    const double beta = cfg.beta.value();
    const std::size_t D = cfg.max_depth;
    constexpr std::size_t chunk = 4096;
    const std::size_t chunks = (cfg.samples + chunk - 1) / chunk;
    std::vector<Moments> partial(chunks);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        std::vector<Digit> digits;
        digits.reserve(D + 1);
        for (std::size_t c = next++; c < chunks; c = next++) {
            Moments acc;
            const std::size_t end = std::min(cfg.samples, (c + 1) * chunk);
            for (std::size_t i = c * chunk; i < end; ++i) {
                WalkRng rng(cfg.seed + i);
                digits.assign(x.digits().begin(), x.digits().end());
                std::size_t steps = 0;
                while (digits.size() < D) {
                    step_digits(digits, m, beta, rng);
                    ++steps;
                }
                acc.add(g.eval(psi_of(digits, m)));
                acc.steps += static_cast<double>(steps);
            }
            partial[c] = acc;
        }
    };
    const std::size_t threads =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), chunks));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    Moments total;
    for (const auto& p : partial) total.merge(p);
    const double n = total.n;
    WalkEstimate e;
    e.mean = total.mean;
    if (cfg.samples > 1) e.stderr_ = std::sqrt(total.m2 / (n - 1) / n);
    e.bias_bound = truncation_bias_bound(g, cfg.beta, cfg.config, D);
    e.samples = cfg.samples;
    e.depth = D;
    e.seed = cfg.seed;
    e.mean_steps = total.steps / n;
    return e;
}

std::string WalkEstimate::to_json() const {
    nlohmann::ordered_json j;
    j["mean"] = mean;
    j["stderr"] = stderr_;
    j["bias_bound"] = bias_bound;
    j["N"] = samples;
    j["D"] = depth;
    j["seed"] = seed;
    return j.dump();
}

}  // namespace treedtn
