#include "treedtn/tree_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "treedtn/errors.hpp"

namespace treedtn {

TreeConfig::TreeConfig(int m) : m_(m) {
    if (m < 2) throw PreconditionError("branching factor m must be >= 2, got " + std::to_string(m));
}

// ---------------------------------------------------------------------------
// Vertex

Vertex::Vertex(TreeConfig config) : config_(config) {}

Vertex::Vertex(TreeConfig config, std::vector<Digit> digits)
    : config_(config), digits_(std::move(digits)) {
    for (Digit d : digits_)
        if (d >= static_cast<Digit>(config_.m()))
            throw PreconditionError("digit " + std::to_string(d) + " out of range for m=" +
                                    std::to_string(config_.m()));
}

Vertex Vertex::parse(TreeConfig config, std::string_view text) {
    if (text.empty() || text == "root" || text == "-") return Vertex(config);
    std::vector<Digit> digits;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t dot = text.find('.', pos);
        std::string_view tok = text.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
        Digit d = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
        if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
            throw PreconditionError("malformed vertex '" + std::string(text) + "'");
        digits.push_back(d);
        if (dot == std::string_view::npos) break;
        pos = dot + 1;
    }
    return Vertex(config, std::move(digits));
}

Digit Vertex::last_digit() const {
    if (digits_.empty()) throw PreconditionError("the root has no last digit");
    return digits_.back();
}

Vertex Vertex::child(Digit i) const {
    if (i >= static_cast<Digit>(m())) throw PreconditionError("successor index out of range");
    Vertex c = *this;
    c.digits_.push_back(i);
    return c;
}

std::vector<Vertex> Vertex::successors() const {
    std::vector<Vertex> out;
    out.reserve(static_cast<std::size_t>(m()));
    for (int i = 0; i < m(); ++i) out.push_back(child(static_cast<Digit>(i)));
    return out;
}

Vertex Vertex::ancestor(std::size_t j) const {
    if (j > level())
        throw PreconditionError("ancestor index " + std::to_string(j) + " exceeds level " +
                                std::to_string(level()));
    return prefix(level() - j);
}

Vertex Vertex::prefix(std::size_t lvl) const {
    if (lvl > level()) throw PreconditionError("prefix level exceeds vertex level");
    Vertex v(config_);
    v.digits_.assign(digits_.begin(), digits_.begin() + static_cast<std::ptrdiff_t>(lvl));
    return v;
}

Vertex Vertex::from_index(TreeConfig config, std::size_t level, const Integer& j) {
    if (j < 0 || j >= ipow(config.m(), level)) throw PreconditionError("vertex index out of range");
    std::vector<Digit> digits(level);
    Integer rest = j;
    for (std::size_t i = level; i-- > 0;) {
        digits[i] = static_cast<Digit>(mpz_fdiv_ui(rest.get_mpz_t(), static_cast<unsigned long>(config.m())));
        rest /= config.m();
    }
    return Vertex(config, std::move(digits));
}

std::vector<Vertex> vertices_to_depth(TreeConfig config, std::size_t depth) {
    std::vector<Vertex> out{Vertex(config)};
    std::size_t begin = 0;
    for (std::size_t l = 0; l < depth; ++l) {
        const std::size_t end = out.size();
        for (std::size_t i = begin; i < end; ++i)
            for (Digit d = 0; d < static_cast<Digit>(config.m()); ++d) out.push_back(out[i].child(d));
        begin = end;
    }
    return out;
}

bool Vertex::has_prefix(const Vertex& other) const {
    return other.config_ == config_ && other.level() <= level() &&
           std::equal(other.digits_.begin(), other.digits_.end(), digits_.begin());
}

namespace {
Integer digits_value(std::span<const Digit> digits, int m) {
    Integer v = 0;
    for (Digit d : digits) v = v * m + d;
    return v;
}
}  // namespace

Rational Vertex::psi() const {
    Rational r(digits_value(digits_, m()), ipow(m(), level()));
    r.canonicalize();
    return r;
}

MadicInterval Vertex::interval() const {
    return MadicInterval(config_, digits_value(digits_, m()), level());
}

Rational Vertex::midpoint() const { return interval().midpoint(); }

std::string Vertex::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < digits_.size(); ++i) {
        if (i) s += '.';
        s += std::to_string(digits_[i]);
    }
    return s;
}

std::size_t VertexHash::operator()(const Vertex& v) const noexcept {
    std::size_t h = std::hash<int>{}(v.m()) ^ (v.level() * 0x9e3779b97f4a7c15ull);
    for (Digit d : v.digits()) h = (h ^ d) * 0x100000001b3ull + (h >> 29);
    return h;
}

// ---------------------------------------------------------------------------
// MadicInterval

MadicInterval::MadicInterval(TreeConfig config, Integer index, std::size_t depth)
    : config_(config), index_(std::move(index)), depth_(depth) {
    if (index_ < 0 || index_ >= ipow(config_.m(), depth_))
        throw PreconditionError("m-adic interval index out of range");
}

Rational MadicInterval::lower() const {
    Rational r(index_, ipow(config_.m(), depth_));
    r.canonicalize();
    return r;
}

Rational MadicInterval::upper() const {
    Rational r(index_ + 1, ipow(config_.m(), depth_));
    r.canonicalize();
    return r;
}

Rational MadicInterval::length() const {
    Rational r(1, ipow(config_.m(), depth_));
    return r;
}

Rational MadicInterval::midpoint() const {
    Rational r(2 * index_ + 1, 2 * ipow(config_.m(), depth_));
    r.canonicalize();
    return r;
}

bool MadicInterval::contains(const Rational& t) const { return lower() <= t && t <= upper(); }

bool MadicInterval::contains_strictly(const Rational& t) const { return lower() < t && t < upper(); }

bool MadicInterval::contains(const MadicInterval& other) const {
    if (!(other.config_ == config_) || other.depth_ < depth_) return false;
    Integer scale = ipow(config_.m(), other.depth_ - depth_);
    Integer q;
    mpz_fdiv_q(q.get_mpz_t(), other.index_.get_mpz_t(), scale.get_mpz_t());
    return q == index_;
}

std::string MadicInterval::to_string() const {
    return fraction_string(lower()) + "," + fraction_string(upper());
}

// ---------------------------------------------------------------------------
// Branch

Branch::Branch(TreeConfig config, Periodic digits) : config_(config), repr_(std::move(digits)) {
    const auto& p = std::get<Periodic>(repr_);
    if (p.period.empty()) throw PreconditionError("branch period must be non-empty");
    for (const auto* seq : {&p.preperiod, &p.period})
        for (Digit d : *seq)
            if (d >= static_cast<Digit>(config_.m())) throw PreconditionError("branch digit out of range");
}

Branch::Branch(TreeConfig config, Point point) : config_(config), repr_(std::move(point)) {
    const auto& pt = std::get<Point>(repr_);
    if (pt.t < 0 || pt.t >= 1) throw PreconditionError("generated branch point must lie in [0,1)");
}

Digit Branch::digit(std::size_t k) const {
    if (k == 0) throw PreconditionError("branch digits are indexed from 1");
    if (const auto* p = periodic()) {
        if (k <= p->preperiod.size()) return p->preperiod[k - 1];
        return p->period[(k - 1 - p->preperiod.size()) % p->period.size()];
    }
    return prefix(k).last_digit();
}

Vertex Branch::prefix(std::size_t k) const {
    std::vector<Digit> digits(k);
    if (const auto* p = periodic()) {
        for (std::size_t i = 1; i <= k; ++i) {
            digits[i - 1] = i <= p->preperiod.size()
                                ? p->preperiod[i - 1]
                                : p->period[(i - 1 - p->preperiod.size()) % p->period.size()];
        }
        return Vertex(config_, std::move(digits));
    }
    // floor(m^k t) written in base m with k digits.
    const Rational& t = std::get<Point>(repr_).t;
    Integer scaled = ipow(m(), k) * t.get_num();
    Integer q;
    mpz_fdiv_q(q.get_mpz_t(), scaled.get_mpz_t(), t.get_den().get_mpz_t());
    for (std::size_t i = k; i-- > 0;) {
        Integer r;
        mpz_fdiv_qr_ui(q.get_mpz_t(), r.get_mpz_t(), q.get_mpz_t(), static_cast<unsigned long>(m()));
        digits[i] = static_cast<Digit>(r.get_ui());
    }
    return Vertex(config_, std::move(digits));
}

Rational Branch::psi() const {
    if (const auto* p = periodic()) {
        Integer pre = digits_value(p->preperiod, m());
        Integer per = digits_value(p->period, m());
        Integer cycle = ipow(m(), p->period.size()) - 1;
        Rational tail(per, cycle);
        Rational r = (Rational(pre) + tail) / Rational(ipow(m(), p->preperiod.size()));
        r.canonicalize();
        return r;
    }
    return std::get<Point>(repr_).t;
}

std::size_t Branch::significant_depth() const noexcept {
    if (const auto* pt = std::get_if<Point>(&repr_)) return pt->significant_depth;
    return static_cast<std::size_t>(-1);
}

std::string Branch::to_string() const {
    if (const auto* p = periodic()) {
        auto join = [](const std::vector<Digit>& ds) {
            std::string s;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                if (i) s += '.';
                s += std::to_string(ds[i]);
            }
            return s;
        };
        return "d:" + join(p->preperiod) + "|" + join(p->period);
    }
    return "t:" + fraction_string(std::get<Point>(repr_).t);
}

Branch Branch::reflected() const {
    const Digit top = static_cast<Digit>(m() - 1);
    if (const auto* p = periodic()) {
        Periodic r = *p;
        for (auto& d : r.preperiod) d = top - d;
        for (auto& d : r.period) d = top - d;
        return Branch(config_, std::move(r));
    }
    // Digit reflection of a generated expansion of t gives 1 - t, which is never
    // m-adic here (m-adic points are always stored periodically).
    const auto& pt = std::get<Point>(repr_);
    return Branch(config_, Point{Rational(1) - pt.t, pt.significant_depth});
}

Branch branch_of_point(const Rational& t, TreeConfig config, std::size_t period_budget) {
    if (t < 0 || t > 1) throw PreconditionError("boundary point must lie in [0,1], got " + fraction_string(t));
    const int m = config.m();
    if (t == 1) return Branch(config, Branch::Periodic{{}, {static_cast<Digit>(m - 1)}});

    // Long division of num/den in base m; a repeated remainder closes the period.
    Integer num = t.get_num();
    const Integer& den = t.get_den();
    std::map<Integer, std::size_t> seen;
    std::vector<Digit> digits;
    while (digits.size() <= period_budget) {
        if (auto it = seen.find(num); it != seen.end()) {
            Branch::Periodic p;
            p.preperiod.assign(digits.begin(), digits.begin() + static_cast<std::ptrdiff_t>(it->second));
            p.period.assign(digits.begin() + static_cast<std::ptrdiff_t>(it->second), digits.end());
            return Branch(config, std::move(p));
        }
        seen.emplace(num, digits.size());
        Integer scaled = num * m;
        Integer q, r;
        mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), scaled.get_mpz_t(), den.get_mpz_t());
        digits.push_back(static_cast<Digit>(q.get_ui()));
        num = r;
    }
    return Branch(config, Branch::Point{t, static_cast<std::size_t>(-1)});
}

Branch branch_of_point(double t, TreeConfig config) {
    if (!(t >= 0.0 && t <= 1.0)) throw PreconditionError("boundary point must lie in [0,1]");
    Rational exact(t);  // exact binary value
    const auto budget_depth =
        static_cast<std::size_t>(std::floor(53.0 / std::log2(static_cast<double>(config.m()))));
    if (exact == 1) return branch_of_point(exact, config);
    Branch b = branch_of_point(exact, config, 256);
    if (b.is_periodic()) return b;
    return Branch(config, Branch::Point{exact, budget_depth});
}

std::size_t n_of(const Vertex& x, const Rational& t) {
    if (x.level() < 1) throw PreconditionError("n(x,t) requires |x| >= 1");
    if (!x.prefix(1).interval().contains(t))
        throw PreconditionError("n(x,t): t=" + fraction_string(t) + " outside I_{x_1}");
    for (std::size_t l = x.level(); l >= 1; --l)
        if (x.prefix(l).interval().contains(t)) return l;
    return 1;  // unreachable: level 1 contains t
}

std::size_t big_n(const Branch& pi, const Rational& t) {
    if (t == pi.psi()) throw SingularPointError("N(psi(pi), t) is unbounded at t = psi(pi)");
    if (!pi.interval(1).contains(t))
        throw PreconditionError("N(psi(pi), t): t=" + fraction_string(t) + " outside I_{pi,1}");
    const int m = pi.m();
    Integer index = pi.digit(1);
    std::size_t k = 1;
    while (true) {
        Integer next = index * m + pi.digit(k + 1);
        MadicInterval I(pi.config(), next, k + 1);
        if (!I.contains(t)) return k;
        index = next;
        ++k;
    }
}

}  // namespace treedtn
