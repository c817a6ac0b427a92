#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "treedtn/rational.hpp"

namespace treedtn {

/// Branching factor of the regular tree T_m.
class TreeConfig {
public:
    explicit TreeConfig(int m);
    int m() const noexcept { return m_; }
    friend bool operator==(const TreeConfig&, const TreeConfig&) = default;

private:
    int m_;
};

using Digit = std::uint32_t;

class MadicInterval;

/// A vertex of T_m: the finite digit sequence (a_1, ..., a_k). The empty
/// sequence is the root.
class Vertex {
public:
    explicit Vertex(TreeConfig config);  // root
    Vertex(TreeConfig config, std::vector<Digit> digits);

    static Vertex root(TreeConfig config) { return Vertex(config); }
    /// Parses "a1.a2.a3"; the empty string (or "root") is the root.
    static Vertex parse(TreeConfig config, std::string_view text);
    /// The vertex of the given level whose interval is I_{level,j}.
    static Vertex from_index(TreeConfig config, std::size_t level, const Integer& j);

    TreeConfig config() const noexcept { return config_; }
    int m() const noexcept { return config_.m(); }
    std::size_t level() const noexcept { return digits_.size(); }
    bool is_root() const noexcept { return digits_.empty(); }
    std::span<const Digit> digits() const noexcept { return digits_; }
    Digit last_digit() const;

    /// (x, i)
    Vertex child(Digit i) const;
    /// (x,0), ..., (x,m-1) in digit order.
    std::vector<Vertex> successors() const;
    /// x^{-j}: the last j digits removed. ancestor(0) is x itself.
    Vertex ancestor(std::size_t j) const;
    /// The immediate predecessor x-hat.
    Vertex parent() const { return ancestor(1); }
    /// The ancestor at the given level (level <= |x|).
    Vertex prefix(std::size_t level) const;
    bool has_prefix(const Vertex& other) const;

    /// sum a_k m^{-k}, exact.
    Rational psi() const;
    MadicInterval interval() const;
    /// Midpoint of I_x.
    Rational midpoint() const;

    /// "a1.a2.a3"; the root prints as "".
    std::string to_string() const;

    friend bool operator==(const Vertex& a, const Vertex& b) {
        return a.config_ == b.config_ && a.digits_ == b.digits_;
    }

private:
    TreeConfig config_;
    std::vector<Digit> digits_;
};

/// All vertices of levels 0..depth, level by level, digits in lexicographic order.
std::vector<Vertex> vertices_to_depth(TreeConfig config, std::size_t depth);

struct VertexHash {
    std::size_t operator()(const Vertex& v) const noexcept;
};

/// The closed interval [j m^{-k}, (j+1) m^{-k}].
class MadicInterval {
public:
    MadicInterval(TreeConfig config, Integer index, std::size_t depth);

    TreeConfig config() const noexcept { return config_; }
    const Integer& index() const noexcept { return index_; }
    std::size_t depth() const noexcept { return depth_; }
    Rational lower() const;
    Rational upper() const;
    Rational length() const;
    Rational midpoint() const;

    bool contains(const Rational& t) const;        // closed
    bool contains_strictly(const Rational& t) const;  // open
    bool contains(const MadicInterval& other) const;

    /// "p/q,p/q"
    std::string to_string() const;

    friend bool operator==(const MadicInterval& a, const MadicInterval& b) {
        return a.config_ == b.config_ && a.depth_ == b.depth_ && a.index_ == b.index_;
    }

private:
    TreeConfig config_;
    Integer index_;
    std::size_t depth_;
};

/// A boundary point of T_m as an infinite digit sequence, queryable for any
/// prefix length. Eventually periodic expansions are stored exactly; other
/// rational points generate digits on demand by exact arithmetic.
class Branch {
public:
    struct Periodic {
        std::vector<Digit> preperiod;
        std::vector<Digit> period;  // non-empty
    };
    struct Point {
        Rational t;                  // in [0,1)
        std::size_t significant_depth;  // digits beyond this reflect input rounding
    };

    Branch(TreeConfig config, Periodic digits);
    Branch(TreeConfig config, Point point);

    TreeConfig config() const noexcept { return config_; }
    int m() const noexcept { return config_.m(); }
    bool is_periodic() const noexcept { return std::holds_alternative<Periodic>(repr_); }
    const Periodic* periodic() const noexcept { return std::get_if<Periodic>(&repr_); }

    Digit digit(std::size_t k) const;  // a_k, k >= 1
    /// x_k = (a_1, ..., a_k).
    Vertex prefix(std::size_t k) const;
    /// I_{pi,k}
    MadicInterval interval(std::size_t k) const { return prefix(k).interval(); }
    Rational psi() const;
    /// Depth to which the digits are meaningful (unbounded for exact input).
    std::size_t significant_depth() const noexcept;

    /// Digit-string form: "d:a1.a2|p1.p2" for periodic branches, "t:p/q" otherwise.
    std::string to_string() const;

    /// Branch with every digit d replaced by m-1-d (psi -> 1 - psi).
    Branch reflected() const;

private:
    TreeConfig config_;
    std::variant<Periodic, Point> repr_;
};

/// Default budget for detecting the period of a rational expansion.
inline constexpr std::size_t kDefaultPeriodBudget = 1u << 16;

/// The canonical branch with psi(branch) = t. m-adic rationals t < 1 take the
/// expansion ending in zeros; t = 1 is all (m-1).
Branch branch_of_point(const Rational& t, TreeConfig config,
                       std::size_t period_budget = kDefaultPeriodBudget);
/// Uses the exact binary value of the double; significant_depth records the
/// 53-bit precision budget.
Branch branch_of_point(double t, TreeConfig config);

/// n(x, t): deepest level l <= |x| such that t lies in the level-l ancestor
/// interval of x. Requires |x| >= 1 and t in I_{x_1}.
std::size_t n_of(const Vertex& x, const Rational& t);

/// N(psi(pi), t) = max{k : t in I_{pi,k}}. Requires t in I_{pi,1} and t != psi(pi).
/// Closed-interval membership: a shared endpoint counts as inside.
std::size_t big_n(const Branch& pi, const Rational& t);

}  // namespace treedtn
