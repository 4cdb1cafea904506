#include "roa/poly.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "roa/error.hpp"

namespace roa {

// ---------------------------------------------------------------- Monomial

Monomial::Monomial(std::vector<unsigned> exps) : exps_(std::move(exps)) {
    degree_ = std::accumulate(exps_.begin(), exps_.end(), 0u);
}

void Monomial::set(std::size_t i, unsigned e) {
    degree_ = degree_ - exps_[i] + e;
    exps_[i] = e;
}

Monomial Monomial::operator*(const Monomial& other) const {
    if (other.dim() != dim()) {
        throw StructuralError("monomial product over different ambient dimensions");
    }
    Monomial r = *this;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
        r.exps_[i] += other.exps_[i];
    }
    r.degree_ += other.degree_;
    return r;
}

bool Monomial::divides(const Monomial& other) const {
    for (std::size_t i = 0; i < exps_.size(); ++i) {
        if (exps_[i] > other.exps_[i]) return false;
    }
    return true;
}

std::strong_ordering operator<=>(const Monomial& a, const Monomial& b) noexcept {
    if (a.degree_ != b.degree_) return a.degree_ <=> b.degree_;
    const std::size_t n = std::min(a.exps_.size(), b.exps_.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a.exps_[i] != b.exps_[i]) return b.exps_[i] <=> a.exps_[i];
    }
    return a.exps_.size() <=> b.exps_.size();
}

std::size_t MonomialHash::operator()(const Monomial& m) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (unsigned e : m.exponents()) {
        h ^= e + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
}

// --------------------------------------------------------------------- Box

Box::Box(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) {
        throw StructuralError("box bounds have different lengths");
    }
    for (std::size_t c = 0; c < lower_.size(); ++c) {
        if (!(lower_[c] < upper_[c])) {
            throw StructuralError("degenerate box: coordinate " + std::to_string(c) +
                                  " has lower >= upper");
        }
    }
}

Box Box::cube(std::size_t dim, double lo, double hi) {
    return Box(std::vector<double>(dim, lo), std::vector<double>(dim, hi));
}

double Box::volume() const {
    double v = 1.0;
    for (std::size_t c = 0; c < dim(); ++c) v *= upper_[c] - lower_[c];
    return v;
}

bool Box::contains(std::span<const double> point) const {
    if (point.size() != dim()) throw StructuralError("point dimension does not match box");
    for (std::size_t c = 0; c < dim(); ++c) {
        if (!(point[c] >= lower_[c] && point[c] <= upper_[c])) return false;
    }
    return true;
}

bool Box::subset_of(const Box& outer) const {
    if (outer.dim() != dim()) return false;
    for (std::size_t c = 0; c < dim(); ++c) {
        if (lower_[c] < outer.lower_[c] || upper_[c] > outer.upper_[c]) return false;
    }
    return true;
}

Box Box::operator*(const Box& other) const {
    std::vector<double> lo = lower_, hi = upper_;
    lo.insert(lo.end(), other.lower_.begin(), other.lower_.end());
    hi.insert(hi.end(), other.upper_.begin(), other.upper_.end());
    return Box(std::move(lo), std::move(hi));
}

// --------------------------------------------------------------- AffineMap

AffineMap::AffineMap(std::vector<double> scale, std::vector<double> offset)
    : scale_(std::move(scale)), offset_(std::move(offset)) {
    if (scale_.size() != offset_.size()) {
        throw StructuralError("affine map scale and offset have different lengths");
    }
    for (double s : scale_) {
        if (s == 0.0 || !std::isfinite(s)) throw StructuralError("affine map scale must be nonzero");
    }
}

AffineMap AffineMap::identity(std::size_t dim) {
    return AffineMap(std::vector<double>(dim, 1.0), std::vector<double>(dim, 0.0));
}

AffineMap AffineMap::from_unit_box(const Box& box) {
    std::vector<double> s(box.dim()), o(box.dim());
    for (std::size_t c = 0; c < box.dim(); ++c) {
        s[c] = 0.5 * (box.upper(c) - box.lower(c));
        o[c] = 0.5 * (box.upper(c) + box.lower(c));
    }
    return AffineMap(std::move(s), std::move(o));
}

std::vector<double> AffineMap::apply(std::span<const double> y) const {
    if (y.size() != dim()) throw StructuralError("affine map applied to point of wrong dimension");
    std::vector<double> x(dim());
    for (std::size_t c = 0; c < dim(); ++c) x[c] = scale_[c] * y[c] + offset_[c];
    return x;
}

AffineMap AffineMap::inverse() const {
    std::vector<double> s(dim()), o(dim());
    for (std::size_t c = 0; c < dim(); ++c) {
        s[c] = 1.0 / scale_[c];
        o[c] = -offset_[c] / scale_[c];
    }
    return AffineMap(std::move(s), std::move(o));
}

AffineMap AffineMap::compose(const AffineMap& inner) const {
    if (inner.dim() != dim()) throw StructuralError("composing affine maps of different dimension");
    std::vector<double> s(dim()), o(dim());
    for (std::size_t c = 0; c < dim(); ++c) {
        s[c] = scale_[c] * inner.scale_[c];
        o[c] = scale_[c] * inner.offset_[c] + offset_[c];
    }
    return AffineMap(std::move(s), std::move(o));
}

// -------------------------------------------------------------- Polynomial

Polynomial::Polynomial(VarList vars, TermMap terms) : vars_(std::move(vars)), terms_(std::move(terms)) {
    for (const auto& [m, c] : terms_) {
        if (m.dim() != vars_.size()) throw StructuralError("monomial dimension does not match ambient list");
    }
    cleanup();
}

Polynomial Polynomial::constant(VarList vars, double value) {
    Polynomial p(std::move(vars));
    p.add_term(Monomial(p.dim()), value);
    return p;
}

Polynomial Polynomial::variable(VarList vars, std::string_view name) {
    Polynomial p(std::move(vars));
    Monomial m(p.dim());
    m.set(p.var_index(name), 1);
    p.add_term(m, 1.0);
    return p;
}

int Polynomial::degree() const {
    if (terms_.empty()) return kZeroDegree;
    // Graded order: the last key has the largest total degree.
    return static_cast<int>(terms_.rbegin()->first.degree());
}

unsigned Polynomial::degree_in(std::size_t var) const {
    unsigned d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m[var]);
    return d;
}

double Polynomial::coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
}

std::size_t Polynomial::var_index(std::string_view name) const {
    auto it = std::find(vars_.begin(), vars_.end(), name);
    if (it == vars_.end()) {
        throw StructuralError("unknown variable '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - vars_.begin());
}

std::vector<std::size_t> Polynomial::support() const {
    std::vector<bool> used(dim(), false);
    for (const auto& [m, c] : terms_) {
        for (std::size_t i = 0; i < dim(); ++i) {
            if (m[i] != 0) used[i] = true;
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dim(); ++i) {
        if (used[i]) out.push_back(i);
    }
    return out;
}

void Polynomial::add_term(const Monomial& m, double coeff) {
    if (m.dim() != dim()) throw StructuralError("monomial dimension does not match ambient list");
    auto [it, inserted] = terms_.try_emplace(m, coeff);
    if (!inserted) it->second += coeff;
    if (std::abs(it->second) < kCleanupThreshold) terms_.erase(it);
}

void Polynomial::check_same_vars(const Polynomial& other) const {
    if (vars_ != other.vars_) throw StructuralError("polynomials over different ambient variable lists");
}

void Polynomial::cleanup() {
    std::erase_if(terms_, [](const auto& kv) { return std::abs(kv.second) < kCleanupThreshold; });
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    check_same_vars(other);
    for (const auto& [m, c] : other.terms_) add_term(m, c);
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
    check_same_vars(other);
    for (const auto& [m, c] : other.terms_) add_term(m, -c);
    return *this;
}

Polynomial& Polynomial::operator*=(double s) {
    for (auto& [m, c] : terms_) c *= s;
    cleanup();
    return *this;
}

Polynomial Polynomial::multiply(const Polynomial& other) const {
    check_same_vars(other);
    Polynomial r(vars_);
    for (const auto& [ma, ca] : terms_) {
        for (const auto& [mb, cb] : other.terms_) {
            auto [it, inserted] = r.terms_.try_emplace(ma * mb, ca * cb);
            if (!inserted) it->second += ca * cb;
        }
    }
    r.cleanup();
    return r;
}

Polynomial Polynomial::pow(unsigned k) const {
    Polynomial r = constant(vars_, 1.0);
    for (unsigned i = 0; i < k; ++i) r = r.multiply(*this);
    return r;
}

Polynomial Polynomial::partial_derivative(std::string_view var) const {
    return partial_derivative(var_index(var));
}

Polynomial Polynomial::partial_derivative(std::size_t var) const {
    if (var >= dim()) throw StructuralError("derivative variable index out of range");
    Polynomial r(vars_);
    for (const auto& [m, c] : terms_) {
        const unsigned e = m[var];
        if (e == 0) continue;
        Monomial dm = m;
        dm.set(var, e - 1);
        r.add_term(dm, c * static_cast<double>(e));
    }
    return r;
}

double Polynomial::evaluate(std::span<const double> point) const {
    if (point.size() != dim()) {
        throw StructuralError("evaluation point has dimension " + std::to_string(point.size()) +
                              ", expected " + std::to_string(dim()));
    }
    double sum = 0.0;
    for (const auto& [m, c] : terms_) {
        double v = c;
        for (std::size_t i = 0; i < dim(); ++i) {
            for (unsigned e = 0; e < m[i]; ++e) v *= point[i];
        }
        sum += v;
    }
    return sum;
}

Polynomial Polynomial::substitute_affine(const AffineMap& map) const {
    if (map.dim() != dim()) throw StructuralError("affine map dimension does not match ambient list");
    // expansions[i][k] = coefficients of (s_i y + o_i)^k in powers of y.
    std::vector<std::vector<std::vector<double>>> expansions(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        const unsigned kmax = degree_in(i);
        const double s = map.scale()[i], o = map.offset()[i];
        auto& ex = expansions[i];
        ex.push_back({1.0});
        for (unsigned k = 1; k <= kmax; ++k) {
            std::vector<double> next(k + 1, 0.0);
            for (unsigned j = 0; j < k; ++j) {
                next[j] += ex[k - 1][j] * o;
                next[j + 1] += ex[k - 1][j] * s;
            }
            ex.push_back(std::move(next));
        }
    }
    Polynomial r(vars_);
    for (const auto& [m, c] : terms_) {
        // Expand the product of univariate factors term by term.
        std::vector<std::pair<Monomial, double>> partial{{Monomial(dim()), c}};
        for (std::size_t i = 0; i < dim(); ++i) {
            const unsigned e = m[i];
            if (e == 0) continue;
            const auto& coeffs = expansions[i][e];
            std::vector<std::pair<Monomial, double>> next;
            next.reserve(partial.size() * coeffs.size());
            for (const auto& [pm, pc] : partial) {
                for (unsigned j = 0; j <= e; ++j) {
                    if (coeffs[j] == 0.0) continue;
                    Monomial nm = pm;
                    nm.set(i, j);
                    next.emplace_back(std::move(nm), pc * coeffs[j]);
                }
            }
            partial = std::move(next);
        }
        for (const auto& [pm, pc] : partial) {
            auto [it, inserted] = r.terms_.try_emplace(pm, pc);
            if (!inserted) it->second += pc;
        }
    }
    r.cleanup();
    return r;
}

Polynomial Polynomial::fix_variable(std::size_t var, double value) const {
    if (var >= dim()) throw StructuralError("variable index out of range");
    Polynomial r(vars_);
    for (const auto& [m, c] : terms_) {
        Monomial nm = m;
        nm.set(var, 0);
        auto [it, inserted] = r.terms_.try_emplace(nm, c * std::pow(value, m[var]));
        if (!inserted) it->second += c * std::pow(value, m[var]);
    }
    r.cleanup();
    return r;
}

Polynomial Polynomial::embed(const VarList& target) const {
    std::vector<std::size_t> where(dim());
    const auto used = support();
    for (std::size_t i = 0; i < dim(); ++i) {
        auto it = std::find(target.begin(), target.end(), vars_[i]);
        if (it == target.end()) {
            if (std::find(used.begin(), used.end(), i) != used.end()) {
                throw StructuralError("variable '" + vars_[i] + "' missing from target ambient list");
            }
            where[i] = target.size();
        } else {
            where[i] = static_cast<std::size_t>(it - target.begin());
        }
    }
    Polynomial r(target);
    for (const auto& [m, c] : terms_) {
        Monomial nm(target.size());
        for (std::size_t i = 0; i < dim(); ++i) {
            if (m[i] != 0) nm.set(where[i], m[i]);
        }
        r.terms_.emplace(std::move(nm), c);
    }
    return r;
}

std::string Polynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::string out;
    bool first = true;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
        const auto& [m, c] = *it;
        const bool neg = std::signbit(c);
        const double a = std::abs(c);
        if (first) {
            if (neg) out += "-";
        } else {
            out += neg ? " - " : " + ";
        }
        first = false;
        std::string factors;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (m[i] == 0) continue;
            if (!factors.empty()) factors += "*";
            factors += vars_[i];
            if (m[i] > 1) factors += "^" + std::to_string(m[i]);
        }
        if (factors.empty()) {
            out += format_double(a);
        } else if (a == 1.0) {
            out += factors;
        } else {
            out += format_double(a) + "*" + factors;
        }
    }
    return out;
}

// ------------------------------------------------------------------ parser

namespace {

class PolyParser {
public:
    PolyParser(std::string_view text, const VarList& vars) : text_(text), vars_(vars) {}

    Polynomial run() {
        Polynomial p = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
        return p;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("polynomial syntax error at offset " + std::to_string(pos_) + ": " + what +
                         " in \"" + std::string(text_) + "\"");
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char ch) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ch) {
            ++pos_;
            return true;
        }
        return false;
    }

    Polynomial expr() {
        Polynomial acc = term();
        while (true) {
            if (accept('+')) {
                acc += term();
            } else if (accept('-')) {
                acc -= term();
            } else {
                return acc;
            }
        }
    }

    Polynomial term() {
        Polynomial acc = unary();
        while (accept('*')) acc = acc.multiply(unary());
        return acc;
    }

    Polynomial unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return power();
    }

    Polynomial power() {
        Polynomial base = primary();
        if (accept('^')) {
            skip_ws();
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (start == pos_) fail("expected non-negative integer exponent");
            unsigned k = 0;
            std::from_chars(text_.data() + start, text_.data() + pos_, k);
            return base.pow(k);
        }
        return base;
    }

    Polynomial primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char ch = text_[pos_];
        if (ch == '(') {
            ++pos_;
            Polynomial p = expr();
            if (!accept(')')) fail("expected ')'");
            return p;
        }
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
            const char* begin = text_.data() + pos_;
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(begin, text_.data() + text_.size(), v);
            if (ec != std::errc()) fail("malformed number");
            pos_ += static_cast<std::size_t>(ptr - begin);
            return Polynomial::constant(vars_, v);
        }
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            const std::string_view name = text_.substr(start, pos_ - start);
            if (std::find(vars_.begin(), vars_.end(), name) == vars_.end()) {
                pos_ = start;
                fail("unknown identifier '" + std::string(name) + "'");
            }
            return Polynomial::variable(vars_, name);
        }
        fail("unexpected character '" + std::string(1, ch) + "'");
    }

    std::string_view text_;
    const VarList& vars_;
    std::size_t pos_ = 0;
};

} // namespace

Polynomial Polynomial::parse(std::string_view text, VarList vars) {
    return PolyParser(text, vars).run();
}

// ---------------------------------------------------------- free functions

std::vector<Monomial> monomial_basis(std::size_t dim, unsigned max_degree) {
    if (dim == 0) throw StructuralError("monomial basis needs at least one variable");
    std::vector<Monomial> out;
    out.reserve(binomial(dim + max_degree, dim));
    std::vector<unsigned> exps(dim, 0);
    // Exponent vectors of total degree `deg`, largest leading exponent first.
    std::function<void(std::size_t, unsigned)> fill = [&](std::size_t i, unsigned remaining) {
        if (i + 1 == dim) {
            exps[i] = remaining;
            out.emplace_back(exps);
            return;
        }
        for (unsigned e = remaining + 1; e-- > 0;) {
            exps[i] = e;
            fill(i + 1, remaining - e);
        }
        exps[i] = 0;
    };
    for (unsigned deg = 0; deg <= max_degree; ++deg) fill(0, deg);
    return out;
}

double monomial_moment_1d(unsigned e, double lo, double hi) {
    return (std::pow(hi, e + 1) - std::pow(lo, e + 1)) / static_cast<double>(e + 1);
}

double box_integral(const Polynomial& p, const Box& box) {
    if (box.dim() != p.dim()) throw StructuralError("box dimension does not match ambient list");
    double sum = 0.0;
    for (const auto& [m, c] : p.terms()) {
        double v = c;
        for (std::size_t i = 0; i < p.dim(); ++i) v *= monomial_moment_1d(m[i], box.lower(i), box.upper(i));
        sum += v;
    }
    return sum;
}

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        const std::size_t num = n - k + i;
        if (r > std::numeric_limits<std::size_t>::max() / num) return std::numeric_limits<std::size_t>::max();
        r = r * num / i;
    }
    return r;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) throw ParseError("malformed number '" + std::string(text) + "'");
    return v;
}

// ---------------------------------------------------------- PolyEvaluator

PolyEvaluator::PolyEvaluator(const Polynomial& p) : dim_(p.dim()) {
    starts_.push_back(0);
    for (const auto& [m, c] : p.terms()) {
        coeffs_.push_back(c);
        for (std::size_t i = 0; i < dim_; ++i) {
            if (m[i] != 0) factors_.push_back({static_cast<std::uint32_t>(i), m[i]});
        }
        starts_.push_back(static_cast<std::uint32_t>(factors_.size()));
    }
}

double PolyEvaluator::operator()(std::span<const double> point) const {
    if (point.size() != dim_) throw StructuralError("evaluation point has wrong dimension");
    double sum = 0.0;
    for (std::size_t k = 0; k < coeffs_.size(); ++k) {
        double v = coeffs_[k];
        for (std::uint32_t f = starts_[k]; f < starts_[k + 1]; ++f) {
            const double x = point[factors_[f].var];
            for (std::uint32_t e = 0; e < factors_[f].exp; ++e) v *= x;
        }
        sum += v;
    }
    return sum;
}

} // namespace roa
