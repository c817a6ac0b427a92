#include "treedtn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "treedtn/boundary_data.hpp"
#include "treedtn/dirichlet_solver.hpp"
#include "treedtn/dtn_maps.hpp"
#include "treedtn/errors.hpp"
#include "treedtn/level_sweep.hpp"
#include "treedtn/mc_oracle.hpp"
#include "treedtn/tree_core.hpp"

namespace treedtn::cli {

using Json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Settings: flag value, else config-file value, else default.

struct Key {
    const char* name;
    const char* fallback;
    const char* help;
};

const std::vector<Key> kKeys = {
    {"m", "2", "branching factor"},
    {"beta", "1/3", "ancestor weight, a/b or decimal"},
    {"datum", "linear", "boundary datum: linear, square, one, zero, const(c), poly(c0,c1,..), chi(n,j), exp, sin, piecewise(..)"},
    {"branch", "t:1/3", "branch: t:<point> or d:<preperiod>|<period> digits"},
    {"depths", "1..12", "depth list, e.g. 1..12 or 2,4,8"},
    {"eta", "", "normal vector, e.g. -1,1 (default -e_0 + e_{m-1})"},
    {"tol", "1e-12", "quadrature and comparison tolerance"},
    {"seed", "1", "random seed"},
    {"depth", "4", "tree depth for solve, compare and check"},
    {"vertex", "root", "vertex digits a1.a2.a3"},
    {"samples", "100000", "Monte Carlo samples"},
    {"walk-depth", "30", "walk truncation level"},
    {"datum2", "", "lower datum f for compare (random pairs when empty)"},
    {"pairs", "10", "random ordered pairs for compare"},
    {"grid", "27", "kernel grid: t = i/grid"},
    {"j", "0", "successor digit for the K_m^j profile"},
    {"a1", "1", "first increment of the growth witness"},
    {"steps", "20", "growth witness length"},
    {"threshold", "", "growth: report the first n with u(x_n) above this"},
    {"out", "", "output file (stdout when empty)"},
    {"format", "", "csv or json"},
};

class Settings {
public:
    std::map<std::string, std::optional<std::string>> flags;
    Json file = Json::object();

    std::string get(const std::string& key) const {
        if (auto it = flags.find(key); it != flags.end() && it->second) return *it->second;
        for (const std::string& k : {key, underscored(key)}) {
            if (file.contains(k)) {
                const Json& v = file[k];
                if (v.is_string()) return v.get<std::string>();
                if (v.is_array()) {
                    std::string s;
                    for (const auto& e : v) s += (s.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
                    return s;
                }
                return v.dump();
            }
        }
        for (const auto& k : kKeys)
            if (key == k.name) return k.fallback;
        throw PreconditionError("unknown setting " + key);
    }

    int integer(const std::string& key) const { return static_cast<int>(parse_count(key, true)); }
    std::size_t count(const std::string& key) const { return parse_count(key, false); }
    double real(const std::string& key) const {
        const std::string v = get(key);
        try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used == v.size()) return d;
        } catch (const std::exception&) {
        }
        throw PreconditionError("--" + key + " expects a number, got '" + v + "'");
    }

private:
    static std::string underscored(std::string s) {
        std::replace(s.begin(), s.end(), '-', '_');
        return s;
    }
    std::size_t parse_count(const std::string& key, bool allow_sign) const {
        const std::string v = get(key);
        try {
            std::size_t used = 0;
            const long long n = std::stoll(v, &used);
            if (used == v.size() && (allow_sign || n >= 0)) return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
        }
        throw PreconditionError("--" + key + " expects a non-negative integer, got '" + v + "'");
    }
};

std::vector<std::size_t> parse_depths(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    auto number = [&text](const std::string& s) {
        try {
            std::size_t used = 0;
            const long long n = std::stoll(s, &used);
            if (used == s.size() && n >= 0) return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
        }
        throw PreconditionError("bad depth list '" + text + "'");
    };
    while (std::getline(ss, item, ',')) {
        if (const auto dots = item.find(".."); dots != std::string::npos) {
            const std::size_t a = number(item.substr(0, dots)), b = number(item.substr(dots + 2));
            if (b < a) throw PreconditionError("empty depth range '" + item + "'");
            for (std::size_t k = a; k <= b; ++k) out.push_back(k);
        } else {
            out.push_back(number(item));
        }
    }
    if (out.empty()) throw PreconditionError("empty depth list");
    return out;
}

std::vector<Digit> parse_digits(const std::string& s, int m) {
    std::vector<Digit> d;
    if (s.empty()) return d;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, '.')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            throw PreconditionError("bad digit '" + item + "'");
        const unsigned long v = std::stoul(item);
        if (v >= static_cast<unsigned long>(m)) throw PreconditionError("digit " + item + " out of range for m");
        d.push_back(static_cast<Digit>(v));
    }
    return d;
}

Branch parse_branch(const std::string& text, TreeConfig config) {
    if (text.rfind("d:", 0) == 0) {
        const std::string body = text.substr(2);
        const auto bar = body.find('|');
        Branch::Periodic p;
        if (bar == std::string::npos) {
            p.preperiod = parse_digits(body, config.m());
            p.period = {0};
        } else {
            p.preperiod = parse_digits(body.substr(0, bar), config.m());
            p.period = parse_digits(body.substr(bar + 1), config.m());
            if (p.period.empty()) throw PreconditionError("branch period must be non-empty");
        }
        return Branch(config, std::move(p));
    }
    const std::string point = text.rfind("t:", 0) == 0 ? text.substr(2) : text;
    const Rational t = parse_rational(point);
    if (t < 0 || t > 1) throw PreconditionError("branch point must lie in [0,1]");
    return branch_of_point(t, config);
}

// ---------------------------------------------------------------------------
// Output

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_cell(const Json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s.find_first_of(",\"") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    if (v.is_number_float()) return format_double(v.get<double>());
    return v.dump();
}

struct Report {
    std::vector<std::string> columns;
    std::vector<Json> rows;  // objects keyed by column
    Json summary = Json::object();
    bool single = false;     // a single result: summary only
};

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string vertex_name(const Vertex& v) { return v.is_root() ? "root" : v.to_string(); }

// ---------------------------------------------------------------------------
// Commands

struct Context {
    const Settings& s;
    std::ostream& err;

    TreeConfig config() const {
        const int m = s.integer("m");
        if (m < 2) throw PreconditionError("--m must be at least 2");
        return TreeConfig(m);
    }
    BetaParam beta() const {
        bool decimal = false;
        BetaParam b = BetaParam::parse(s.get("beta"), &decimal);
        if (decimal)
            err << "note: decimal beta " << s.get("beta") << " taken as the exact fraction " << b.to_string()
                << "\n";
        return b;
    }
    BoundaryDatum datum(const std::string& key = "datum") const { return parse_datum(s.get(key), config()); }
    Branch branch() const { return parse_branch(s.get("branch"), config()); }
    std::vector<std::size_t> depths() const { return parse_depths(s.get("depths")); }
    QuadratureOptions quadrature() const {
        QuadratureOptions q;
        q.abs_tol = s.real("tol");
        if (!(q.abs_tol > 0)) throw PreconditionError("--tol must be positive");
        return q;
    }
    Vertex vertex() const {
        const std::string v = s.get("vertex");
        return Vertex::parse(config(), v == "root" ? "" : v);
    }
};

struct Outcome {
    Report report;
    int code = Success;
};

Outcome cmd_solve(const Context& c) {
    const TreeConfig config = c.config();
    const BetaParam beta = c.beta();
    const BoundaryDatum g = c.datum();
    const std::size_t depth = c.s.count("depth");
    Outcome o;
    o.report.columns = {"vertex", "level", "value", "residual"};
    double worst = 0.0;
    if (g.is_exact()) {
        ExactSolution u(g, beta, config);
        for (const auto& x : vertices_to_depth(config, depth)) {
            const Rational r = harmonic_residual(u, x);
            if (r != 0) o.code = InvariantFailure;
            o.report.rows.push_back({{"vertex", vertex_name(x)},
                                     {"level", x.level()},
                                     {"value", fraction_string(u.value(x))},
                                     {"residual", fraction_string(r)}});
        }
        o.report.summary["backend"] = "exact";
    } else {
        FloatSolution u(g, beta, config, c.quadrature());
        for (const auto& x : vertices_to_depth(config, depth)) {
            const double r = harmonic_residual(u, x);
            worst = std::max(worst, std::abs(r));
            o.report.rows.push_back(
                {{"vertex", vertex_name(x)}, {"level", x.level()}, {"value", u.value(x)}, {"residual", r}});
        }
        o.report.summary["backend"] = "double";
        o.report.summary["max_residual"] = worst;
        o.report.summary["max_quadrature_error"] = u.max_quadrature_error();
        if (worst > 1e-10 + 10 * u.max_quadrature_error()) o.code = InvariantFailure;
        if (u.note()) o.report.summary["note"] = *u.note();
    }
    return o;
}

Outcome cmd_trace(const Context& c) {
    const auto rows = boundary_trace(c.datum(), c.beta(), c.branch(), c.depths(), c.quadrature());
    Outcome o;
    o.report.columns = {"k", "u", "target", "gap", "u_exact"};
    for (const auto& r : rows)
        o.report.rows.push_back({{"k", r.k},
                                 {"u", r.u},
                                 {"target", r.target},
                                 {"gap", r.gap},
                                 {"u_exact", r.u_exact ? Json(fraction_string(*r.u_exact)) : Json(nullptr)}});
    return o;
}

NormalVector default_eta(int m) {
    std::vector<Rational> e(static_cast<std::size_t>(m), Rational(0));
    e.front() = -1;
    e.back() = 1;
    return NormalVector(std::move(e));
}

Outcome cmd_lambda(const Context& c) {
    const TreeConfig config = c.config();
    const std::string eta_text = c.s.get("eta");
    const NormalVector eta = eta_text.empty() ? default_eta(config.m()) : NormalVector::parse(eta_text);
    const DtnSweep sweep = lambda_sweep(c.datum(), c.beta(), eta, c.branch(), c.depths(), c.quadrature());
    Outcome o;
    o.report.columns = {"k", "estimate", "target", "gap", "ratio", "status"};
    for (const auto& r : sweep.rows)
        o.report.rows.push_back({{"k", r.k},
                                 {"estimate", r.value},
                                 {"target", opt(r.target)},
                                 {"gap", opt(r.gap)},
                                 {"ratio", opt(r.ratio)},
                                 {"status", r.status}});
    o.report.summary["eta"] = eta.to_string();
    o.report.summary["slope"] = opt(sweep.slope);
    o.report.summary["reference_slope"] = -std::log(static_cast<double>(config.m()));
    return o;
}

Outcome cmd_gamma(const Context& c) {
    const BoundaryDatum g = c.datum();
    const BetaParam beta = c.beta();
    const Branch pi = c.branch();
    const auto depths = c.depths();
    const DtnSweep sweep = gamma_sweep(g, beta, pi, depths, c.quadrature());
    Outcome o;
    o.report.columns = {"k", "estimate", "target", "gap", "bulk", "j1", "j2", "j2_ratio", "tail", "status"};
    std::optional<double> prev_j2;
    for (const auto& r : sweep.rows) {
        std::optional<double> j2_ratio;
        if (prev_j2 && r.j2 && *r.j2 != 0) j2_ratio = std::abs(*prev_j2 / *r.j2);
        prev_j2 = r.j2;
        o.report.rows.push_back({{"k", r.k},
                                 {"estimate", r.value},
                                 {"target", opt(r.target)},
                                 {"gap", opt(r.gap)},
                                 {"bulk", opt(r.bulk)},
                                 {"j1", opt(r.j1)},
                                 {"j2", opt(r.j2)},
                                 {"j2_ratio", opt(j2_ratio)},
                                 {"tail", opt(r.tail)},
                                 {"status", r.status}});
    }
    o.report.summary["pm"] = fraction_string(beta.p() * pi.m());
    o.report.summary["slope"] = opt(sweep.slope);
    o.report.summary["reference_slope"] = -std::log(Rational(beta.p() * pi.m()).get_d());
    return o;
}

Outcome cmd_kernel(const Context& c) {
    const BetaParam beta = c.beta();
    const std::size_t n = c.s.count("grid");
    if (n < 1) throw PreconditionError("--grid must be at least 1");
    std::vector<Rational> grid;
    for (std::size_t i = 0; i <= n; ++i) grid.emplace_back(static_cast<long>(i), static_cast<long>(n));
    for (auto& t : grid) t.canonicalize();
    Outcome o;
    const std::string v = c.s.get("vertex");
    if (v != "root" && !v.empty()) {
        const Vertex x = c.vertex();
        const Digit j = static_cast<Digit>(c.s.count("j"));
        o.report.columns = {"t", "K"};
        for (const auto& t : grid)
            o.report.rows.push_back(
                {{"t", fraction_string(t)}, {"K", fraction_string(kernel_Kj(x, j, t, beta))}});
        o.report.summary["kernel"] = "K_m^j at x = " + x.to_string() + ", j = " + std::to_string(j);
        return o;
    }
    const Branch pi = c.branch();
    o.report.columns = {"t", "N", "K", "K_float"};
    for (const auto& r : kernel_profile(pi, beta, grid))
        o.report.rows.push_back({{"t", fraction_string(r.t)},
                                 {"N", r.N ? Json(*r.N) : Json(nullptr)},
                                 {"K", fraction_string(r.value)},
                                 {"K_float", r.value.get_d()}});
    o.report.summary["kernel"] = "limit kernel at psi = " + fraction_string(pi.psi());
    return o;
}

// f random with coefficients in [-4,4]; g = f + (a + b t)^2 + c with c >= 0.
std::pair<BoundaryDatum, BoundaryDatum> random_ordered_pair(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> num(-4, 4), den(1, 4), deg(0, 3), nonneg(0, 4);
    auto r = [&] {
        Rational q(num(rng), den(rng));
        q.canonicalize();
        return q;
    };
    std::vector<Rational> f(static_cast<std::size_t>(deg(rng)) + 1);
    for (auto& x : f) x = r();
    const Rational a = r(), b = r();
    Rational cst(nonneg(rng), den(rng));
    cst.canonicalize();
    std::vector<Rational> g = f;
    g.resize(std::max<std::size_t>(g.size(), 3), Rational(0));
    g[0] += a * a + cst;
    g[1] += 2 * a * b;
    g[2] += b * b;
    return {BoundaryDatum(Polynomial(f)), BoundaryDatum(Polynomial(g))};
}

Outcome cmd_compare(const Context& c) {
    const TreeConfig config = c.config();
    const BetaParam beta = c.beta();
    const std::size_t depth = c.s.count("depth");
    const double tol = c.s.real("tol");
    std::vector<std::pair<BoundaryDatum, BoundaryDatum>> pairs;
    std::vector<std::string> names;
    if (!c.s.get("datum2").empty()) {
        pairs.emplace_back(c.datum("datum2"), c.datum());
        names.push_back(c.s.get("datum2") + " <= " + c.s.get("datum"));
    } else {
        std::mt19937_64 rng(static_cast<std::uint64_t>(c.s.count("seed")));
        for (std::size_t i = 0, n = c.s.count("pairs"); i < n; ++i) {
            pairs.push_back(random_ordered_pair(rng));
            names.push_back(pairs.back().first.describe() + " <= " + pairs.back().second.describe());
        }
    }
    Outcome o;
    o.report.columns = {"pair", "vertices", "violations", "datum_violations", "touching", "propagation_failures",
                        "strong_consistent", "exact"};
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [f, g] = pairs[i];
        const ComparisonReport weak = comparison_check(f, g, beta, config, depth, tol);
        const StrongComparisonReport strong = strong_comparison_check(f, g, beta, config, depth, tol);
        if (!weak.datum_violations.empty()) {
            o.code = PreconditionFailure;
        } else if ((weak.violation_count > 0 || !strong.consistent()) && o.code == Success) {
            o.code = InvariantFailure;
        }
        o.report.rows.push_back({{"pair", names[i]},
                                 {"vertices", weak.vertices_checked},
                                 {"violations", weak.violation_count},
                                 {"datum_violations", weak.datum_violations.size()},
                                 {"touching", strong.touching_count},
                                 {"propagation_failures", strong.propagation_failure_count},
                                 {"strong_consistent", strong.consistent()},
                                 {"exact", weak.exact}});
    }
    if (o.code == PreconditionFailure) c.err << "error: the lower datum exceeds the upper one somewhere on [0,1]\n";
    return o;
}

Outcome cmd_counterexample(const Context& c) {
    const CounterexampleResult r = counterexample_beta0(c.s.count("depth"));
    Outcome o;
    o.report.single = true;
    o.report.summary["m"] = r.config.m();
    o.report.summary["beta"] = "0";
    o.report.summary["datum"] = r.datum.describe();
    o.report.summary["u(root)"] = fraction_string(r.u_root);
    o.report.summary["u(0)"] = fraction_string(r.u_first);
    o.report.summary["u(2)"] = fraction_string(r.u_last);
    o.report.summary["touching"] = r.report.touching_count;
    o.report.summary["propagation_failures"] = r.report.propagation_failure_count;
    o.report.summary["strong_comparison_fails"] = r.report.propagation_failure_count > 0;
    if (r.u_first != 0 || r.u_last != 1) o.code = InvariantFailure;
    return o;
}

Outcome cmd_growth(const Context& c) {
    const BetaParam beta = c.beta();
    const Rational a1 = parse_rational(c.s.get("a1"));
    Outcome o;
    const std::string threshold = c.s.get("threshold");
    if (!threshold.empty()) {
        const GrowthRun run = growth_until(beta, a1, parse_rational(threshold), 100'000'000);
        o.report.single = true;
        o.report.summary["beta"] = beta.to_string();
        o.report.summary["threshold"] = threshold;
        o.report.summary["first_exceeding"] = run.first_exceeding ? Json(*run.first_exceeding) : Json(nullptr);
        o.report.summary["steps"] = run.steps;
        o.report.summary["increments_exact"] = run.increments_exact;
        o.report.summary["last_value"] = run.last_value.get_d();
        if (!run.increments_exact) o.code = InvariantFailure;
        return o;
    }
    const std::size_t steps = c.s.count("steps");
    const GrowthWitness w = growth_witness(beta, a1, steps, c.config());
    o.report.columns = {"n", "vertex", "value", "increment", "residual"};
    for (std::size_t n = 0; n <= steps; ++n) {
        Json row = {{"n", n}, {"vertex", vertex_name(w.path(n))}, {"value", fraction_string(w.value(n))}};
        row["increment"] = n + 1 <= steps ? Json(fraction_string(w.a[n + 1] - w.a[n])) : Json(nullptr);
        if (n < steps) {
            const Rational r = w.residual(n);
            if (r != 0) o.code = InvariantFailure;
            row["residual"] = fraction_string(r);
        } else {
            row["residual"] = nullptr;
        }
        o.report.rows.push_back(std::move(row));
    }
    o.report.summary["sibling_value"] = fraction_string(w.sibling_value);
    return o;
}

Outcome cmd_walk(const Context& c) {
    WalkConfig cfg{c.beta(), c.config(), c.s.count("walk-depth"), c.s.count("samples"),
                   static_cast<std::uint64_t>(c.s.count("seed"))};
    const BoundaryDatum g = c.datum();
    const Vertex x = c.vertex();
    const WalkEstimate e = estimate_u(g, cfg, x);
    const double exact = g.is_exact() ? solve_exact(g, cfg.beta, x).get_d() : solve(g, cfg.beta, x, c.quadrature());
    const double gap = std::abs(e.mean - exact);
    const double allowed = 3 * e.stderr_ + e.bias_bound;
    Outcome o;
    o.report.single = true;
    o.report.summary = Json::parse(e.to_json());
    o.report.summary["vertex"] = vertex_name(x);
    o.report.summary["solver"] = exact;
    o.report.summary["gap"] = gap;
    o.report.summary["allowed"] = allowed;
    o.report.summary["consistent"] = gap <= allowed;
    if (gap > allowed) o.code = InvariantFailure;
    return o;
}

// The invariant suite on a small grid.
Outcome cmd_check(const Context& c) {
    const std::size_t depth = c.s.count("depth");
    const std::size_t shallow = std::min<std::size_t>(depth, 4);
    struct Case {
        std::string invariant, label;
        std::function<std::string()> run;  // empty string on success
    };
    std::vector<Case> cases;
    const std::vector<Rational> betas = {Rational(0), Rational(1, 10), Rational(1, 3)};
    for (int m : {2, 3}) {
        const TreeConfig config(m);
        const std::vector<std::pair<std::string, BoundaryDatum>> data = {
            {"one", BoundaryDatum::constant(1)},
            {"t", BoundaryDatum::linear()},
            {"t^2", BoundaryDatum::square()},
            {"chi(1,0)", BoundaryDatum::characteristic(config, 1, 0)}};
        for (const auto& b : betas) {
            const BetaParam beta(b);
            const std::string tag = "m=" + std::to_string(m) + " beta=" + beta.to_string();
            for (const auto& [name, g] : data) {
                const std::string label = tag + " g=" + name;
                cases.push_back({"harmonicity", label, [=] {
                                     const auto r = exact_harmonic_sweep(g, beta, config, depth);
                                     return r.ok() ? std::string() : std::to_string(r.nonzero) + " nonzero residuals";
                                 }});
                cases.push_back({"range", label, [=] {
                                     ExactSolution u(g, beta, config);
                                     const auto [lo, hi] = g.range_exact();
                                     for (const auto& x : vertices_to_depth(config, shallow)) {
                                         const Rational v = u.value(x);
                                         if (v < lo || v > hi) return "out of range at " + vertex_name(x);
                                     }
                                     return std::string();
                                 }});
                cases.push_back({"evaluation order", label, [=] {
                                     ExactSolution u(g, beta, config);
                                     for (const auto& x : vertices_to_depth(config, shallow))
                                         if (u.value(x) != u.direct(x)) return "mismatch at " + vertex_name(x);
                                     return std::string();
                                 }});
            }
            cases.push_back({"linearity", tag, [=] {
                                 const BoundaryDatum f = BoundaryDatum::square();
                                 const BoundaryDatum g = BoundaryDatum::characteristic(config, 1, 0);
                                 const BoundaryDatum h = combine(Rational(2), f, Rational(-3), g);
                                 ExactSolution uf(f, beta, config), ug(g, beta, config), uh(h, beta, config);
                                 for (const auto& x : vertices_to_depth(config, shallow))
                                     if (uh.value(x) != 2 * uf.value(x) - 3 * ug.value(x))
                                         return "mismatch at " + vertex_name(x);
                                 return std::string();
                             }});
            cases.push_back({"comparison", tag, [=] {
                                 const auto weak = comparison_check(BoundaryDatum::square(), BoundaryDatum::linear(),
                                                                    beta, config, depth);
                                 const auto strong = strong_comparison_check(
                                     BoundaryDatum::square(), BoundaryDatum::linear(), beta, config, depth);
                                 if (!weak.empty()) return std::to_string(weak.violation_count) + " violations";
                                 if (!strong.consistent()) return std::string("strong comparison inconsistent");
                                 return std::string();
                             }});
            if (b == 0) continue;
            cases.push_back({"characteristic recursion", tag, [=] {
                                 const Integer j = 1;
                                 const RecursionTrace tr = solve_characteristic(config, 2, j, beta, shallow);
                                 ExactSolution u(BoundaryDatum::characteristic(config, 2, j), beta, config);
                                 for (const auto& x : vertices_to_depth(config, shallow))
                                     if (tr.u(x) != u.value(x)) return "mismatch at " + vertex_name(x);
                                 return std::string();
                             }});
            cases.push_back({"kernel identities", tag, [=] {
                                 const BoundaryDatum one = BoundaryDatum::constant(1);
                                 const BoundaryDatum g = BoundaryDatum::square();
                                 ExactSolution u(g, beta, config);
                                 for (const auto& x : vertices_to_depth(config, 3)) {
                                     if (x.is_root()) continue;
                                     for (Digit j = 0; j < static_cast<Digit>(m); ++j) {
                                         if (kernel_integral(x, j, beta, one) != 0)
                                             return "nonzero kernel mass at " + vertex_name(x);
                                         if (u.value(x.child(j)) - u.value(x) !=
                                             -(1 - beta.p()) * kernel_integral(x, j, beta, g))
                                             return "difference identity fails at " + vertex_name(x);
                                     }
                                 }
                                 return std::string();
                             }});
        }
    }
    cases.push_back({"counterexample", "m=3 beta=0", [] {
                         const auto r = counterexample_beta0();
                         if (r.u_first != 0 || r.u_last != 1) return std::string("unexpected values");
                         if (r.report.propagation_failure_count == 0) return std::string("no propagation failure");
                         return std::string();
                     }});
    for (const Rational& b : {Rational(1, 2), Rational(3, 5)})
        cases.push_back({"growth witness", "beta=" + fraction_string(b), [b] {
                             const BetaParam beta(b);
                             const GrowthWitness w = growth_witness(beta, Rational(1), 30);
                             const Rational p = beta.p();
                             for (std::size_t n = 0; n < 30; ++n)
                                 if (w.residual(n) != 0) return "residual at n = " + std::to_string(n);
                             for (std::size_t n = 1; n < 30; ++n)
                                 if (w.a[n + 1] - w.a[n] != rpow(p, n - 1) * (w.a[2] - w.a[1]))
                                     return "increment at n = " + std::to_string(n);
                             return std::string();
                         }});

    std::vector<std::future<std::string>> results;
    for (const auto& k : cases)
        results.push_back(std::async(std::launch::async, [&k]() -> std::string {
            try {
                return k.run();
            } catch (const std::exception& e) {
                return std::string("error: ") + e.what();
            }
        }));
    Outcome o;
    o.report.columns = {"invariant", "case", "status", "detail"};
    std::size_t failed = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string detail = results[i].get();
        if (!detail.empty()) ++failed;
        o.report.rows.push_back({{"invariant", cases[i].invariant},
                                 {"case", cases[i].label},
                                 {"status", detail.empty() ? "pass" : "fail"},
                                 {"detail", detail}});
    }
    o.report.summary["cases"] = cases.size();
    o.report.summary["failed"] = failed;
    if (failed) o.code = InvariantFailure;
    return o;
}

struct Command {
    const char* name;
    const char* help;
    std::vector<std::string> keys;  // settings echoed in the output
    Outcome (*run)(const Context&);
    const char* default_format;
};

const std::vector<Command> kCommands = {
    {"solve", "values and harmonic residuals to --depth", {"m", "beta", "datum", "depth", "tol"}, cmd_solve, "csv"},
    {"trace", "u along a branch against g(psi)", {"m", "beta", "datum", "branch", "depths", "tol"}, cmd_trace, "csv"},
    {"lambda", "first DtN map: sweep, closed form and rate fit",
     {"m", "beta", "datum", "branch", "depths", "eta", "tol"}, cmd_lambda, "csv"},
    {"gamma", "second DtN map: sweep, kernel quadrature and J1/J2", {"m", "beta", "datum", "branch", "depths", "tol"},
     cmd_gamma, "csv"},
    {"kernel", "kernel profile on t = i/grid", {"m", "beta", "branch", "grid", "vertex", "j"}, cmd_kernel, "csv"},
    {"compare", "comparison principle to --depth",
     {"m", "beta", "datum", "datum2", "depth", "pairs", "seed", "tol"}, cmd_compare, "csv"},
    {"counterexample", "strong comparison fails at beta = 0", {"depth"}, cmd_counterexample, "json"},
    {"growth", "unbounded witness for beta >= 1/2", {"m", "beta", "a1", "steps", "threshold"}, cmd_growth, "csv"},
    {"walk", "Monte Carlo estimate against the solver",
     {"m", "beta", "datum", "vertex", "samples", "walk-depth", "seed", "tol"}, cmd_walk, "json"},
    {"check", "invariant suite", {"depth"}, cmd_check, "csv"},
};

void render(std::ostream& os, const Command& cmd, const Settings& s, const Report& r, const std::string& format) {
    if (format == "json") {
        Json j;
        j["command"] = cmd.name;
        Json config = Json::object();
        for (const auto& k : cmd.keys) config[k] = s.get(k);
        j["config"] = config;
        if (!r.single) {
            Json rows = Json::array();
            for (const auto& row : r.rows) rows.push_back(row);
            j["rows"] = rows;
        }
        j[r.single ? "result" : "summary"] = r.summary;
        os << j.dump(2) << "\n";
        return;
    }
    os << "# config: command=" << cmd.name;
    for (const auto& k : cmd.keys) os << " " << k << "=" << s.get(k);
    os << "\n";
    if (r.single) {
        os << "key,value\n";
        for (const auto& [k, v] : r.summary.items()) os << k << "," << csv_cell(v) << "\n";
        return;
    }
    for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
    os << "\n";
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < r.columns.size(); ++i)
            os << (i ? "," : "") << (row.contains(r.columns[i]) ? csv_cell(row[r.columns[i]]) : "");
        os << "\n";
    }
    for (const auto& [k, v] : r.summary.items()) os << "# " << k << ": " << csv_cell(v) << "\n";
}

int exit_code(const Error& e) {
    return e.kind() == ErrorKind::ToleranceNotMet ? ToleranceFailure : PreconditionFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"beta-harmonic functions on regular trees and their Dirichlet-to-Neumann maps", "treedtn"};
    app.require_subcommand(1);
    Settings settings;
    std::string config_path;
    std::map<std::string, CLI::App*> subs;
    for (const auto& cmd : kCommands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", config_path, "JSON file with the same keys; flags win");
        for (const auto& k : kKeys) {
            settings.flags[k.name];
            sub->add_option(std::string("--") + k.name, settings.flags[k.name], k.help);
        }
        subs[cmd.name] = sub;
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        const int rc = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return rc == 0 ? Success : PreconditionFailure;
    }

    const Command* cmd = nullptr;
    for (const auto& c : kCommands)
        if (subs[c.name]->parsed()) cmd = &c;

    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw PreconditionError("cannot read config file " + config_path);
            try {
                settings.file = Json::parse(in);
            } catch (const Json::exception& e) {
                throw PreconditionError("config file " + config_path + ": " + e.what());
            }
            if (!settings.file.is_object()) throw PreconditionError("config file must hold a JSON object");
        }
        std::string format = settings.get("format");
        if (format.empty()) format = cmd->default_format;
        if (format != "csv" && format != "json") throw PreconditionError("--format must be csv or json");

        Context ctx{settings, err};
        Outcome o = cmd->run(ctx);
        const std::string path = settings.get("out");
        if (path.empty()) {
            render(out, *cmd, settings, o.report, format);
        } else {
            std::ofstream file(path);
            if (!file) throw PreconditionError("cannot write " + path);
            render(file, *cmd, settings, o.report, format);
        }
        if (o.code == InvariantFailure) err << "invariant failure in " << cmd->name << "\n";
        return o.code;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return PreconditionFailure;
    }
}

}  // namespace treedtn::cli
