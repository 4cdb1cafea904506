#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace roa {

using VarList = std::vector<std::string>;

/// Coefficients with smaller magnitude are dropped by every normalization pass.
inline constexpr double kCleanupThreshold = 1e-12;

/// Degree reported for the zero polynomial.
inline constexpr int kZeroDegree = std::numeric_limits<int>::min();

/// Exponent vector over an ambient variable list.
///
/// Ordering is graded lexicographic: lower total degree first, then the
/// monomial with the larger exponent on the earliest variable first. The
/// order is global so that every basis and export is reproducible.
class Monomial {
public:
    Monomial() = default;
    explicit Monomial(std::size_t dim) : exps_(dim, 0) {}
    explicit Monomial(std::vector<unsigned> exps);

    [[nodiscard]] std::size_t dim() const noexcept { return exps_.size(); }
    [[nodiscard]] unsigned degree() const noexcept { return degree_; }
    [[nodiscard]] unsigned operator[](std::size_t i) const { return exps_[i]; }
    [[nodiscard]] const std::vector<unsigned>& exponents() const noexcept { return exps_; }

    void set(std::size_t i, unsigned e);

    [[nodiscard]] Monomial operator*(const Monomial& other) const;

    /// True when every exponent of `this` is at most the one in `other`.
    [[nodiscard]] bool divides(const Monomial& other) const;

    friend bool operator==(const Monomial& a, const Monomial& b) noexcept {
        return a.exps_ == b.exps_;
    }
    friend std::strong_ordering operator<=>(const Monomial& a, const Monomial& b) noexcept;

private:
    std::vector<unsigned> exps_;
    unsigned degree_ = 0;
};

struct MonomialHash {
    std::size_t operator()(const Monomial& m) const noexcept;
};

/// Axis-aligned box; lower[c] < upper[c] for every coordinate.
class Box {
public:
    Box() = default;
    Box(std::vector<double> lower, std::vector<double> upper);

    static Box cube(std::size_t dim, double lo, double hi);

    [[nodiscard]] std::size_t dim() const noexcept { return lower_.size(); }
    [[nodiscard]] const std::vector<double>& lower() const noexcept { return lower_; }
    [[nodiscard]] const std::vector<double>& upper() const noexcept { return upper_; }
    [[nodiscard]] double lower(std::size_t c) const { return lower_[c]; }
    [[nodiscard]] double upper(std::size_t c) const { return upper_[c]; }
    [[nodiscard]] double volume() const;
    [[nodiscard]] bool contains(std::span<const double> point) const;
    /// Componentwise inclusion of `this` in `outer`.
    [[nodiscard]] bool subset_of(const Box& outer) const;
    /// Cartesian product.
    [[nodiscard]] Box operator*(const Box& other) const;

    friend bool operator==(const Box&, const Box&) = default;

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
};

/// Coordinatewise map y -> scale * y + offset.
class AffineMap {
public:
    AffineMap() = default;
    AffineMap(std::vector<double> scale, std::vector<double> offset);

    static AffineMap identity(std::size_t dim);
    /// Map sending [-1,1]^dim onto `box`.
    static AffineMap from_unit_box(const Box& box);

    [[nodiscard]] std::size_t dim() const noexcept { return scale_.size(); }
    [[nodiscard]] const std::vector<double>& scale() const noexcept { return scale_; }
    [[nodiscard]] const std::vector<double>& offset() const noexcept { return offset_; }

    [[nodiscard]] std::vector<double> apply(std::span<const double> y) const;
    [[nodiscard]] AffineMap inverse() const;
    /// (this ∘ inner)(y) = this(inner(y)).
    [[nodiscard]] AffineMap compose(const AffineMap& inner) const;

    friend bool operator==(const AffineMap&, const AffineMap&) = default;

private:
    std::vector<double> scale_;
    std::vector<double> offset_;
};

/// Sparse multivariate polynomial with double coefficients over a named
/// ambient variable list. Values are treated as immutable once built.
class Polynomial {
public:
    using TermMap = std::map<Monomial, double>;

    Polynomial() = default;
    explicit Polynomial(VarList vars) : vars_(std::move(vars)) {}
    Polynomial(VarList vars, TermMap terms);

    static Polynomial constant(VarList vars, double value);
    static Polynomial variable(VarList vars, std::string_view name);
    /// Parse textual syntax such as `3.5*x1^2*x2 - 0.25*(x1 + 1)^2`.
    static Polynomial parse(std::string_view text, VarList vars);

    [[nodiscard]] const VarList& vars() const noexcept { return vars_; }
    [[nodiscard]] std::size_t dim() const noexcept { return vars_.size(); }
    [[nodiscard]] const TermMap& terms() const noexcept { return terms_; }
    [[nodiscard]] std::size_t size() const noexcept { return terms_.size(); }
    [[nodiscard]] bool is_zero() const noexcept { return terms_.empty(); }
    /// Total degree; kZeroDegree for the zero polynomial.
    [[nodiscard]] int degree() const;
    /// Highest exponent of variable `var` (0 if absent).
    [[nodiscard]] unsigned degree_in(std::size_t var) const;
    [[nodiscard]] double coefficient(const Monomial& m) const;
    /// Index of `name` in the ambient list; throws StructuralError if absent.
    [[nodiscard]] std::size_t var_index(std::string_view name) const;
    /// Ambient indices of variables that occur with a nonzero exponent.
    [[nodiscard]] std::vector<std::size_t> support() const;

    void add_term(const Monomial& m, double coeff);

    Polynomial& operator+=(const Polynomial& other);
    Polynomial& operator-=(const Polynomial& other);
    Polynomial& operator*=(double s);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
    friend Polynomial operator-(Polynomial a) { return a *= -1.0; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) { return a.multiply(b); }

    [[nodiscard]] Polynomial multiply(const Polynomial& other) const;
    [[nodiscard]] Polynomial pow(unsigned k) const;
    [[nodiscard]] Polynomial partial_derivative(std::string_view var) const;
    [[nodiscard]] Polynomial partial_derivative(std::size_t var) const;
    [[nodiscard]] double evaluate(std::span<const double> point) const;
    /// q(y) = p(scale * y + offset), expanded exactly.
    [[nodiscard]] Polynomial substitute_affine(const AffineMap& map) const;
    /// Fix variable `var` to `value`; the ambient list is unchanged.
    [[nodiscard]] Polynomial fix_variable(std::size_t var, double value) const;
    /// Re-express over `target`, which must contain every variable in the support.
    [[nodiscard]] Polynomial embed(const VarList& target) const;

    /// Canonical text, highest degree first, shortest round-trip coefficients.
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    void check_same_vars(const Polynomial& other) const;
    void cleanup();

    VarList vars_;
    TermMap terms_;
};

/// All monomials of total degree <= max_degree in `dim` variables, graded
/// lexicographic order. Size is C(dim + max_degree, dim).
std::vector<Monomial> monomial_basis(std::size_t dim, unsigned max_degree);

/// Exact integral of `p` over `box` from closed-form monomial moments.
double box_integral(const Polynomial& p, const Box& box);

/// Integral of x^e over [lo, hi].
double monomial_moment_1d(unsigned e, double lo, double hi);

/// Binomial coefficient C(n, k); saturates at SIZE_MAX.
std::size_t binomial(std::size_t n, std::size_t k);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(std::string_view text);

/// Flat form of a polynomial for repeated evaluation.
class PolyEvaluator {
public:
    PolyEvaluator() = default;
    explicit PolyEvaluator(const Polynomial& p);

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] double operator()(std::span<const double> point) const;

private:
    struct Factor {
        std::uint32_t var;
        std::uint32_t exp;
    };
    std::size_t dim_ = 0;
    std::vector<double> coeffs_;
    std::vector<std::uint32_t> starts_;  // size coeffs_.size() + 1
    std::vector<Factor> factors_;
};

} // namespace roa
