#include "roa/sos.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include "roa/error.hpp"

namespace roa {

namespace {

bool negligible(double v) { return std::abs(v) < kCleanupThreshold; }

double monomial_value(const Monomial& m, std::span<const double> point) {
    double v = 1.0;
    for (std::size_t i = 0; i < m.dim(); ++i) {
        for (unsigned e = 0; e < m[i]; ++e) v *= point[i];
    }
    return v;
}

std::size_t index_of(const VarList& vars, const std::string& name) {
    const auto it = std::find(vars.begin(), vars.end(), name);
    if (it == vars.end()) throw StructuralError("variable '" + name + "' is not declared");
    return static_cast<std::size_t>(it - vars.begin());
}

} // namespace

// ---------------------------------------------------------------- AffineCoeff

double AffineCoeff::evaluate(const std::vector<double>& y) const {
    double v = constant;
    for (const auto& [slot, a] : linear) v += a * y.at(slot);
    return v;
}

AffineCoeff& AffineCoeff::operator+=(const AffineCoeff& other) {
    constant += other.constant;
    if (negligible(constant)) constant = 0.0;
    if (other.linear.empty()) return *this;
    std::vector<std::pair<std::uint32_t, double>> merged;
    merged.reserve(linear.size() + other.linear.size());
    auto a = linear.begin();
    auto b = other.linear.begin();
    while (a != linear.end() || b != other.linear.end()) {
        if (b == other.linear.end() || (a != linear.end() && a->first < b->first)) {
            merged.push_back(*a++);
        } else if (a == linear.end() || b->first < a->first) {
            merged.push_back(*b++);
        } else {
            const double s = a->second + b->second;
            if (!negligible(s)) merged.emplace_back(a->first, s);
            ++a;
            ++b;
        }
    }
    linear = std::move(merged);
    return *this;
}

AffineCoeff& AffineCoeff::operator*=(double s) {
    constant *= s;
    if (negligible(constant)) constant = 0.0;
    std::erase_if(linear, [s](auto& e) {
        e.second *= s;
        return negligible(e.second);
    });
    return *this;
}

// ----------------------------------------------------------------- AffinePoly

AffinePoly AffinePoly::from_polynomial(const Polynomial& p) {
    AffinePoly out(p.vars());
    for (const auto& [m, c] : p.terms()) out.terms_[m].constant = c;
    return out;
}

int AffinePoly::degree() const {
    int d = kZeroDegree;
    for (const auto& [m, c] : terms_) d = std::max(d, static_cast<int>(m.degree()));
    return d;
}

void AffinePoly::add_term(const Monomial& m, const AffineCoeff& c) {
    if (m.dim() != vars_.size()) throw StructuralError("monomial dimension does not match the variable list");
    auto [it, inserted] = terms_.try_emplace(m);
    it->second += c;
    if (it->second.is_zero()) terms_.erase(it);
}

void AffinePoly::check_same_vars(const AffinePoly& other) const {
    if (vars_ != other.vars_) throw StructuralError("affine polynomials live on different variable lists");
}

AffinePoly& AffinePoly::operator+=(const AffinePoly& other) {
    check_same_vars(other);
    for (const auto& [m, c] : other.terms_) add_term(m, c);
    return *this;
}

AffinePoly& AffinePoly::operator-=(const AffinePoly& other) {
    check_same_vars(other);
    for (auto [m, c] : other.terms_) add_term(m, c *= -1.0);
    return *this;
}

AffinePoly& AffinePoly::operator*=(double s) {
    for (auto it = terms_.begin(); it != terms_.end();) {
        it->second *= s;
        it = it->second.is_zero() ? terms_.erase(it) : std::next(it);
    }
    return *this;
}

AffinePoly AffinePoly::multiply(const Polynomial& p) const {
    if (p.vars() != vars_) throw StructuralError("multiplier lives on a different variable list");
    AffinePoly out(vars_);
    for (const auto& [m, c] : terms_) {
        for (const auto& [pm, pc] : p.terms()) {
            AffineCoeff term = c;
            term *= pc;
            out.add_term(m * pm, term);
        }
    }
    return out;
}

AffinePoly AffinePoly::partial_derivative(std::size_t var) const {
    if (var >= vars_.size()) throw StructuralError("derivative variable out of range");
    AffinePoly out(vars_);
    for (const auto& [m, c] : terms_) {
        const unsigned e = m[var];
        if (e == 0) continue;
        Monomial dm = m;
        dm.set(var, e - 1);
        AffineCoeff term = c;
        term *= static_cast<double>(e);
        out.add_term(dm, term);
    }
    return out;
}

AffinePoly AffinePoly::fix_variable(std::size_t var, double value) const {
    if (var >= vars_.size()) throw StructuralError("fixed variable out of range");
    AffinePoly out(vars_);
    for (const auto& [m, c] : terms_) {
        Monomial fm = m;
        fm.set(var, 0);
        AffineCoeff term = c;
        term *= std::pow(value, m[var]);
        out.add_term(fm, term);
    }
    return out;
}

Polynomial AffinePoly::instantiate(const std::vector<double>& y) const {
    Polynomial::TermMap terms;
    for (const auto& [m, c] : terms_) terms.emplace(m, c.evaluate(y));
    return Polynomial(vars_, std::move(terms));
}

// -------------------------------------------------------------------- domains

SemialgebraicDomain box_domain(VarList vars, const Box& box) {
    if (vars.size() != box.dim()) throw StructuralError("domain box dimension does not match its variables");
    SemialgebraicDomain d;
    d.box = box;
    const Polynomial one = Polynomial::constant(vars, 1.0);
    Polynomial ball = Polynomial::constant(vars, static_cast<double>(vars.size()));
    for (std::size_t c = 0; c < vars.size(); ++c) {
        d.center.push_back(0.5 * (box.lower(c) + box.upper(c)));
        d.half.push_back(0.5 * (box.upper(c) - box.lower(c)));
        const auto s = Polynomial::variable(vars, vars[c]);
        d.generators.push_back((one + s) * (one - s));
        ball -= s * s;
    }
    d.generators.push_back(std::move(ball));
    d.has_ball = true;
    d.vars = std::move(vars);
    return d;
}

std::vector<double> SemialgebraicDomain::to_chart(std::span<const double> z) const {
    std::vector<double> s(z.begin(), z.end());
    if (has_chart()) {
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = (s[i] - center[i]) / half[i];
    }
    return s;
}

SemialgebraicDomain free_domain(VarList vars) {
    SemialgebraicDomain d;
    d.box = Box::cube(vars.size(), -1.0, 1.0);
    d.vars = std::move(vars);
    return d;
}

// ----------------------------------------------------------------- SosProgram

const DecisionPoly& SosProgram::add_decision(const std::string& name, const VarList& vars, unsigned degree) {
    return add_decision(name, vars, monomial_basis(vars.size(), degree));
}

const DecisionPoly& SosProgram::add_decision(const std::string& name, const VarList& vars, std::vector<Monomial> basis) {
    for (const auto& d : decisions_) {
        if (d.name == name) throw StructuralError("decision polynomial '" + name + "' declared twice");
    }
    DecisionPoly d;
    d.name = name;
    d.vars = vars;
    for (const auto& v : vars) d.var_indices.push_back(index_of(vars_, v));
    for (const auto& m : basis) {
        if (m.dim() != vars.size()) throw StructuralError("decision polynomial '" + name + "' has a basis of wrong dimension");
        d.degree = std::max(d.degree, m.degree());
    }
    d.basis = std::move(basis);
    d.first_slot = static_cast<std::uint32_t>(n_slots_);
    n_slots_ += d.basis.size();
    decisions_.push_back(std::move(d));
    return decisions_.back();
}

const DecisionPoly& SosProgram::decision(const std::string& name) const {
    for (const auto& d : decisions_) {
        if (d.name == name) return d;
    }
    throw StructuralError("unknown decision polynomial '" + name + "'");
}

AffinePoly SosProgram::affine(const std::string& name) const {
    const auto& d = decision(name);
    AffinePoly out(vars_);
    for (std::size_t s = 0; s < d.basis.size(); ++s) {
        Monomial m(vars_.size());
        for (std::size_t i = 0; i < d.vars.size(); ++i) m.set(d.var_indices[i], d.basis[s][i]);
        AffineCoeff c;
        c.linear.emplace_back(d.first_slot + static_cast<std::uint32_t>(s), 1.0);
        out.add_term(m, c);
    }
    return out;
}

void SosProgram::add_constraint(const std::string& name, AffinePoly target, SemialgebraicDomain domain,
                                std::optional<unsigned> order) {
    if (target.vars() != vars_) throw StructuralError("constraint '" + name + "' is not on the program variables");
    for (const auto& v : domain.vars) index_of(vars_, v);
    const int deg = std::max(0, target.degree());
    const unsigned r = order.value_or(std::max(1u, static_cast<unsigned>((deg + 1) / 2)));
    constraints_.push_back({name, std::move(target), std::move(domain), r});
}

void SosProgram::add_integral_objective(const std::string& name, const Box& box, double weight) {
    const auto& d = decision(name);
    if (box.dim() != d.vars.size()) throw StructuralError("integration box does not match '" + name + "'");
    for (std::size_t s = 0; s < d.basis.size(); ++s) {
        double v = weight;
        for (std::size_t i = 0; i < d.vars.size(); ++i) v *= monomial_moment_1d(d.basis[s][i], box.lower(i), box.upper(i));
        if (v != 0.0) add_objective(d.first_slot + static_cast<std::uint32_t>(s), v);
    }
}

void SosProgram::add_objective(std::uint32_t slot, double weight) {
    if (slot >= n_slots_) throw StructuralError("objective slot out of range");
    objective_[slot] += weight;
}

std::map<std::string, Polynomial> SosProgram::instantiate(const std::vector<double>& y) const {
    if (y.size() != n_slots_) throw StructuralError("decision vector has the wrong length");
    std::map<std::string, Polynomial> out;
    for (const auto& d : decisions_) {
        Polynomial::TermMap terms;
        for (std::size_t s = 0; s < d.basis.size(); ++s) {
            const double c = y[d.first_slot + s];
            if (!negligible(c)) terms.emplace(d.basis[s], c);
        }
        out.emplace(d.name, Polynomial(d.vars, std::move(terms)));
    }
    return out;
}

// ------------------------------------------------------------------ expansion

PutinarExpansion putinar_expand(const SosConstraint& c) {
    const auto& dom = c.domain;
    const std::size_t k = dom.vars.size();
    const unsigned r = c.order;
    if (k == 0) throw StructuralError("constraint '" + c.name + "' has an empty domain");

    // Target monomials restricted to the domain variables.
    std::vector<std::size_t> to_ambient(k);
    for (std::size_t i = 0; i < k; ++i) to_ambient[i] = index_of(c.target.vars(), dom.vars[i]);
    std::vector<int> to_local(c.target.vars().size(), -1);
    for (std::size_t i = 0; i < k; ++i) to_local[to_ambient[i]] = static_cast<int>(i);

    const auto row_monomials = monomial_basis(k, 2 * r);
    std::unordered_map<Monomial, std::size_t, MonomialHash> row_of;
    row_of.reserve(row_monomials.size());
    for (std::size_t i = 0; i < row_monomials.size(); ++i) row_of.emplace(row_monomials[i], i);

    // z^a = prod_i (center_i + half_i s_i)^a_i, expanded over chart monomials.
    auto chart_terms = [&](const Monomial& local) {
        std::vector<std::pair<Monomial, double>> out{{Monomial(k), 1.0}};
        if (!dom.has_chart()) {
            out.front().first = local;
            return out;
        }
        for (std::size_t i = 0; i < k; ++i) {
            const unsigned a = local[i];
            if (a == 0) continue;
            std::vector<std::pair<Monomial, double>> next;
            for (const auto& [m, v] : out) {
                for (unsigned b = 0; b <= a; ++b) {
                    const double f = static_cast<double>(binomial(a, b)) * std::pow(dom.center[i], a - b) *
                                     std::pow(dom.half[i], b);
                    if (f == 0.0) continue;
                    Monomial mb = m;
                    mb.set(i, b);
                    next.emplace_back(std::move(mb), v * f);
                }
            }
            out = std::move(next);
        }
        return out;
    };

    PutinarExpansion out;
    out.rows.resize(row_monomials.size());
    for (const auto& [m, coeff] : c.target.terms()) {
        Monomial local(k);
        for (std::size_t a = 0; a < m.dim(); ++a) {
            if (m[a] == 0) continue;
            if (to_local[a] < 0) {
                throw StructuralError("constraint '" + c.name + "': target uses variable '" + c.target.vars()[a] +
                                      "' outside its domain");
            }
            local.set(static_cast<std::size_t>(to_local[a]), m[a]);
        }
        if (local.degree() > 2 * r) {
            throw StructuralError("constraint '" + c.name + "': target degree " + std::to_string(local.degree()) +
                                  " exceeds twice the relaxation order " + std::to_string(r));
        }
        for (const auto& [cm, f] : chart_terms(local)) {
            auto& row = out.rows[row_of.at(cm)];
            row.rhs += f * coeff.constant;
            for (const auto& [slot, a] : coeff.linear) row.free.push_back({slot, -a * f});
        }
    }

    std::vector<const Polynomial*> multipliers{nullptr};
    for (const auto& g : dom.generators) multipliers.push_back(&g);
    for (const auto* g : multipliers) {
        const int gdeg = g ? g->degree() : 0;
        if (gdeg > static_cast<int>(2 * r)) continue;
        GramBlockLayout layout;
        layout.basis = monomial_basis(k, static_cast<unsigned>((2 * static_cast<int>(r) - gdeg) / 2));
        layout.multiplier = g ? *g : Polynomial::constant(dom.vars, 1.0);
        const auto blk = static_cast<std::uint32_t>(out.blocks.size());
        const auto& basis = layout.basis;
        for (std::uint32_t i = 0; i < basis.size(); ++i) {
            for (std::uint32_t j = i; j < basis.size(); ++j) {
                const Monomial prod = basis[i] * basis[j];
                for (const auto& [gm, gc] : layout.multiplier.terms()) {
                    out.rows[row_of.at(prod * gm)].psd.push_back({blk, i, j, gc});
                }
            }
        }
        out.blocks.push_back(std::move(layout));
    }
    // Each row's free entries were appended in target-term order; keep one per slot.
    for (auto& row : out.rows) {
        std::sort(row.free.begin(), row.free.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
        std::size_t kept = 0;
        for (std::size_t i = 0; i < row.free.size(); ++i) {
            if (kept > 0 && row.free[kept - 1].index == row.free[i].index) {
                row.free[kept - 1].value += row.free[i].value;
            } else {
                row.free[kept++] = row.free[i];
            }
        }
        row.free.resize(kept);
        std::erase_if(row.free, [](const auto& e) { return e.value == 0.0; });
    }
    return out;
}

CompiledProgram compile_with_layout(const SosProgram& prog) {
    CompiledProgram out;
    auto& p = out.problem;
    p.n_free = prog.n_slots();
    for (const auto& [slot, w] : prog.objective()) {
        if (w != 0.0) p.objective.push_back({slot, w});
    }
    for (const auto& c : prog.constraints()) {
        auto exp = putinar_expand(c);
        ConstraintLayout layout;
        layout.first_row = p.rows.size();
        layout.n_rows = exp.rows.size();
        layout.first_block = p.psd_dims.size();
        const auto offset = static_cast<std::uint32_t>(layout.first_block);
        for (const auto& b : exp.blocks) p.psd_dims.push_back(b.basis.size());
        for (auto& row : exp.rows) {
            for (auto& e : row.psd) e.block += offset;
            p.rows.push_back(std::move(row));
        }
        layout.blocks = std::move(exp.blocks);
        layout.domain = c.domain;
        out.layouts.push_back(std::move(layout));
    }
    return out;
}

ConicProblem compile(const SosProgram& prog) { return compile_with_layout(prog).problem; }

std::size_t max_block_dim(const SosProgram& prog) {
    std::size_t best = 0;
    for (const auto& c : prog.constraints()) best = std::max(best, binomial(c.domain.vars.size() + c.order, c.order));
    return best;
}

double gram_value(const ConstraintLayout& layout, const std::vector<Eigen::MatrixXd>& blocks,
                  std::span<const double> point) {
    const auto s = layout.domain.to_chart(point);
    double total = 0.0;
    for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
        const auto& gl = layout.blocks[b];
        Eigen::VectorXd z(static_cast<Eigen::Index>(gl.basis.size()));
        for (std::size_t i = 0; i < gl.basis.size(); ++i) z(static_cast<Eigen::Index>(i)) = monomial_value(gl.basis[i], s);
        const auto& Q = blocks.at(layout.first_block + b);
        total += z.dot(Q * z) * gl.multiplier.evaluate(s);
    }
    return total;
}

std::vector<double> reconstruction_errors(const SosProgram& prog, const CompiledProgram& compiled,
                                          const ConicSolution& sol, std::size_t n_points, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> worst;
    for (std::size_t ci = 0; ci < prog.constraints().size(); ++ci) {
        const auto& c = prog.constraints()[ci];
        const Polynomial target = c.target.instantiate(sol.free_values);
        std::vector<std::size_t> to_ambient;
        for (const auto& v : c.domain.vars) to_ambient.push_back(index_of(prog.vars(), v));
        std::vector<double> local(c.domain.vars.size()), ambient(prog.vars().size(), 0.0);
        double err = 0.0;
        for (std::size_t s = 0; s < n_points; ++s) {
            for (std::size_t i = 0; i < local.size(); ++i) {
                local[i] = c.domain.box.lower(i) + unit(rng) * (c.domain.box.upper(i) - c.domain.box.lower(i));
                ambient[to_ambient[i]] = local[i];
            }
            const double gv = gram_value(compiled.layouts[ci], sol.blocks, local);
            err = std::max(err, std::abs(target.evaluate(ambient) - gv));
        }
        worst.push_back(err);
    }
    return worst;
}

} // namespace roa
