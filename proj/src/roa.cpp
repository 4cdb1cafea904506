#include "roa/roa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "roa/error.hpp"

namespace roa {

std::string to_string(Mode m) { return m == Mode::dense ? "dense" : "sparse"; }

Mode mode_from_string(std::string_view s) {
    if (s == "dense") return Mode::dense;
    if (s == "sparse") return Mode::sparse;
    throw ParseError("unknown mode '" + std::string(s) + "' (expected dense or sparse)");
}

namespace {

void check_degree(unsigned degree) {
    if (degree < 2 || degree % 2 != 0) {
        throw StructuralError("degree must be even and at least 2, got " + std::to_string(degree));
    }
}

VarList program_vars(const ChainSystem& sys) {
    VarList vars{"t"};
    vars.insert(vars.end(), sys.state_vars().begin(), sys.state_vars().end());
    return vars;
}

VarList with_time(const VarList& states) {
    VarList out{"t"};
    out.insert(out.end(), states.begin(), states.end());
    return out;
}

VarList concat(const VarList& a, const VarList& b) {
    VarList out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

Box time_box() { return Box({0.0}, {1.0}); }

double jacobian(const AffineMap& map, const std::vector<std::size_t>& states) {
    double j = 1.0;
    for (auto s : states) j *= std::abs(map.scale()[s]);
    return j;
}

// sum_c d(p)/d(x_c) * f_c over the listed state coordinates (program indices are state + 1).
AffinePoly directional(const AffinePoly& p, const std::vector<Polynomial>& field, const std::vector<std::size_t>& states) {
    AffinePoly out(p.vars());
    for (auto s : states) {
        if (field[s].is_zero()) continue;
        out += p.partial_derivative(s + 1).multiply(field[s]);
    }
    return out;
}

std::vector<std::size_t> block_states(const ChainSystem& sys, std::size_t block) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < sys.block(block).dim(); ++i) out.push_back(sys.block_offset(block) + i);
    return out;
}

int field_degree(const ChainSystem& sys, const std::vector<std::size_t>& states) {
    int d = kZeroDegree;
    for (auto s : states) d = std::max(d, sys.dynamics()[s].degree());
    return d;
}

std::string clique_name(const std::string& base, std::size_t j) { return base + std::to_string(j); }

} // namespace

// ------------------------------------------------------------------- builders

RoaProgram build_dense(const ChainSystem& sys, unsigned degree) {
    check_degree(degree);
    RoaProgram rp;
    rp.mode = Mode::dense;
    rp.degree = degree;
    rp.normalized = normalize(sys);
    const ChainSystem& ns = rp.normalized.system;
    const VarList& states = ns.state_vars();
    const VarList all = program_vars(ns);
    rp.program = SosProgram(all);
    auto& prog = rp.program;

    // Dynamics embedded in the program variable list (t first).
    std::vector<Polynomial> field;
    for (const auto& f : ns.dynamics()) field.push_back(f.embed(all));
    std::vector<std::size_t> every(states.size());
    for (std::size_t i = 0; i < every.size(); ++i) every[i] = i;

    prog.add_decision("v", all, degree);
    prog.add_decision("w", states, degree);
    const AffinePoly v = prog.affine("v");
    const AffinePoly w = prog.affine("w");
    const Polynomial one = Polynomial::constant(all, 1.0);
    const Box X = ns.state_box();

    prog.add_constraint("initial", w - v.fix_variable(0, 0.0) - one, box_domain(states, X));
    prog.add_constraint("w_nonnegative", w, box_domain(states, X));
    prog.add_constraint("decrease", -v.partial_derivative(0) - directional(v, field, every),
                        box_domain(all, time_box() * X));
    prog.add_constraint("terminal", v.fix_variable(0, 1.0), box_domain(states, ns.target_box()));
    prog.add_integral_objective("w", X, jacobian(rp.normalized.state_map, every));
    return rp;
}

RoaProgram build_sparse(const ChainSystem& sys, unsigned degree) {
    check_degree(degree);
    validate_chain(sys);
    if (sys.n_blocks() == 2) return build_dense(sys, degree);

    RoaProgram rp;
    rp.mode = Mode::sparse;
    rp.degree = degree;
    rp.normalized = normalize(sys);
    const ChainSystem& ns = rp.normalized.system;
    rp.cliques = validate_chain(ns);
    const VarList all = program_vars(ns);
    rp.program = SosProgram(all);
    auto& prog = rp.program;

    std::vector<Polynomial> field;
    for (const auto& f : ns.dynamics()) field.push_back(f.embed(all));
    const Polynomial one = Polynomial::constant(all, 1.0);
    const std::size_t K = rp.cliques.size();

    auto without_pure_time = [](std::size_t dim, unsigned deg) {
        std::vector<Monomial> basis;
        for (auto& m : monomial_basis(dim, deg)) {
            if (m.degree() != m[0]) basis.push_back(std::move(m));
        }
        return basis;
    };

    for (std::size_t j = 1; j < K; ++j) {
        const Clique& cl = rp.cliques[j - 1];
        const Clique& next = rp.cliques[j];
        const auto& bj = ns.block(j - 1);
        const auto& bn = ns.block(j);
        const auto sj = block_states(ns, j - 1);
        const auto sn = block_states(ns, j);

        const std::string v1 = clique_name("v", j) + "_1", v2 = clique_name("v", j) + "_2";
        const std::string u = clique_name("u", j), w = clique_name("w", j);
        prog.add_decision(v1, with_time(bj.vars), degree);
        // v_j2 carries no pure-time terms: those shift freely between v_j1 and v_j2.
        prog.add_decision(v2, with_time(bn.vars), without_pure_time(bn.vars.size() + 1, degree));
        prog.add_decision(u, with_time(bn.vars), degree);
        prog.add_decision(w, concat(bj.vars, bn.vars), degree);
        const AffinePoly V1 = prog.affine(v1), V2 = prog.affine(v2), U = prog.affine(u), W = prog.affine(w);

        const std::string tag = std::to_string(j);
        prog.add_constraint("initial_" + tag, W - V1.fix_variable(0, 0.0) - V2.fix_variable(0, 0.0) - one,
                            box_domain(cl.vars, cl.box));
        prog.add_constraint("w_nonnegative_" + tag, W, box_domain(cl.vars, cl.box));
        prog.add_constraint("terminal_" + tag, V1.fix_variable(0, 1.0) + V2.fix_variable(0, 1.0),
                            box_domain(cl.vars, cl.target));
        // u_j bounds the drift of v_j2 along the next block's dynamics.
        prog.add_constraint("coupling_" + tag, -U - directional(V2, field, sn),
                            box_domain(with_time(next.vars), time_box() * next.box));
        prog.add_constraint("decrease_" + tag,
                            U - V1.partial_derivative(0) - V2.partial_derivative(0) - directional(V1, field, sj),
                            box_domain(with_time(cl.vars), time_box() * cl.box));
        prog.add_integral_objective(w, cl.box, jacobian(rp.normalized.state_map, cl.var_indices));
    }

    const Clique& last = rp.cliques.back();
    const std::string v = clique_name("v", K), w = clique_name("w", K);
    prog.add_decision(v, with_time(last.vars), degree);
    prog.add_decision(w, last.vars, degree);
    const AffinePoly V = prog.affine(v), W = prog.affine(w);
    const std::string tag = std::to_string(K);
    prog.add_constraint("initial_" + tag, W - V.fix_variable(0, 0.0) - one, box_domain(last.vars, last.box));
    prog.add_constraint("w_nonnegative_" + tag, W, box_domain(last.vars, last.box));
    prog.add_constraint("terminal_" + tag, V.fix_variable(0, 1.0), box_domain(last.vars, last.target));
    prog.add_constraint("decrease_" + tag, -V.partial_derivative(0) - directional(V, field, last.var_indices),
                        box_domain(with_time(last.vars), time_box() * last.box));
    prog.add_integral_objective(w, last.box, jacobian(rp.normalized.state_map, last.var_indices));
    return rp;
}

RoaProgram build(const ChainSystem& sys, Mode mode, unsigned degree) {
    return mode == Mode::dense ? build_dense(sys, degree) : build_sparse(sys, degree);
}

ProgramSize estimate_size(const ChainSystem& sys, Mode mode, unsigned degree) {
    check_degree(degree);
    const int d = static_cast<int>(degree);
    auto flow_degree = [d](int fdeg) { return fdeg == kZeroDegree ? d - 1 : d - 1 + fdeg; };
    ProgramSize size;
    auto& cs = size.constraints;
    if (mode == Mode::dense || sys.n_blocks() == 2) {
        const std::size_t n = sys.dim();
        std::vector<std::size_t> every(n);
        for (std::size_t i = 0; i < n; ++i) every[i] = i;
        cs.push_back({"initial", n, d});
        cs.push_back({"w_nonnegative", n, d});
        cs.push_back({"decrease", n + 1, flow_degree(field_degree(sys, every))});
        cs.push_back({"terminal", n, d});
    } else {
        const auto cliques = validate_chain(sys);
        const std::size_t K = cliques.size();
        for (std::size_t j = 1; j < K; ++j) {
            const auto tag = std::to_string(j);
            const std::size_t nj = cliques[j - 1].dim();
            cs.push_back({"initial_" + tag, nj, d});
            cs.push_back({"w_nonnegative_" + tag, nj, d});
            cs.push_back({"terminal_" + tag, nj, d});
            cs.push_back({"coupling_" + tag, cliques[j].dim() + 1,
                          std::max(d, flow_degree(field_degree(sys, block_states(sys, j))))});
            cs.push_back({"decrease_" + tag, nj + 1,
                          std::max(d, flow_degree(field_degree(sys, block_states(sys, j - 1))))});
        }
        const auto tag = std::to_string(K);
        const std::size_t nk = cliques.back().dim();
        cs.push_back({"initial_" + tag, nk, d});
        cs.push_back({"w_nonnegative_" + tag, nk, d});
        cs.push_back({"terminal_" + tag, nk, d});
        cs.push_back({"decrease_" + tag, nk + 1, flow_degree(field_degree(sys, cliques.back().var_indices))});
    }
    for (const auto& c : cs) {
        size.max_block_dim = std::max(size.max_block_dim, c.gram_dim());
        size.total_rows += c.n_rows();
    }
    return size;
}

// ---------------------------------------------------------------- certificate

RoaCertificate::RoaCertificate(Mode mode, unsigned degree, std::string system_name, VarList state_vars,
                               std::vector<std::size_t> block_sizes, AffineMap state_map, double time_scale,
                               std::map<std::string, Polynomial> polys, double objective)
    : mode_(mode),
      degree_(degree),
      system_name_(std::move(system_name)),
      state_vars_(std::move(state_vars)),
      block_sizes_(std::move(block_sizes)),
      state_map_(std::move(state_map)),
      time_scale_(time_scale),
      polys_(std::move(polys)),
      objective_(objective) {
    std::size_t total = 0;
    for (auto b : block_sizes_) total += b;
    if (total != state_vars_.size() || state_map_.dim() != state_vars_.size()) {
        throw StructuralError("certificate block sizes do not match its state variables");
    }
    if (mode_ == Mode::sparse && block_sizes_.size() < 3) {
        throw StructuralError("sparse certificate needs at least three blocks");
    }
    build_clauses();
}

const Polynomial& RoaCertificate::poly(const std::string& name) const {
    const auto it = polys_.find(name);
    if (it == polys_.end()) throw StructuralError("certificate has no polynomial '" + name + "'");
    return it->second;
}

std::size_t RoaCertificate::n_cliques() const noexcept {
    return mode_ == Mode::dense ? 1 : block_sizes_.size() - 1;
}

void RoaCertificate::build_clauses() {
    clauses_.clear();
    auto term = [&](const std::string& name) {
        const Polynomial& p = poly(name);
        if (p.vars().empty() || p.vars().front() != "t") {
            throw StructuralError("certificate polynomial '" + name + "' must have t as first variable");
        }
        Term out;
        for (std::size_t i = 1; i < p.vars().size(); ++i) {
            const auto it = std::find(state_vars_.begin(), state_vars_.end(), p.vars()[i]);
            if (it == state_vars_.end()) throw StructuralError("unknown variable in '" + name + "'");
            out.states.push_back(static_cast<std::size_t>(it - state_vars_.begin()));
        }
        out.eval = PolyEvaluator(p.fix_variable(0, 0.0));
        return out;
    };
    if (mode_ == Mode::dense) {
        clauses_.push_back({{term("v")}});
        return;
    }
    const std::size_t K = n_cliques();
    for (std::size_t j = 1; j < K; ++j) {
        clauses_.push_back({{term(clique_name("v", j) + "_1"), term(clique_name("v", j) + "_2")}});
    }
    clauses_.push_back({{term(clique_name("v", K))}});
}

std::vector<double> RoaCertificate::clause_values(std::span<const double> x0) const {
    if (x0.size() != state_vars_.size()) {
        throw StructuralError("point has dimension " + std::to_string(x0.size()) + ", certificate expects " +
                              std::to_string(state_vars_.size()));
    }
    std::vector<double> y(x0.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = (x0[i] - state_map_.offset()[i]) / state_map_.scale()[i];
    std::vector<double> out;
    out.reserve(clauses_.size());
    std::vector<double> local;
    for (const auto& clause : clauses_) {
        double s = 0.0;
        for (const auto& t : clause.terms) {
            local.assign(t.states.size() + 1, 0.0);
            for (std::size_t i = 0; i < t.states.size(); ++i) local[i + 1] = y[t.states[i]];
            s += t.eval(local);
        }
        out.push_back(s);
    }
    return out;
}

Membership RoaCertificate::member(std::span<const double> x0) const {
    const auto values = clause_values(x0);
    Membership m;
    m.in_domain = true;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const double a = state_map_.offset()[i] - std::abs(state_map_.scale()[i]);
        const double b = state_map_.offset()[i] + std::abs(state_map_.scale()[i]);
        if (!(x0[i] >= a && x0[i] <= b)) m.in_domain = false;
    }
    if (!m.in_domain) {
        m.margin = -std::numeric_limits<double>::infinity();
        return m;
    }
    m.margin = *std::min_element(values.begin(), values.end());
    m.member = m.margin >= 0.0;
    return m;
}

double RoaCertificate::w_integral() const {
    auto unit_integral = [&](const std::string& name) {
        const Polynomial& w = poly(name);
        double jac = 1.0;
        for (const auto& v : w.vars()) {
            const auto idx = static_cast<std::size_t>(std::find(state_vars_.begin(), state_vars_.end(), v) - state_vars_.begin());
            jac *= std::abs(state_map_.scale().at(idx));
        }
        return jac * box_integral(w, Box::cube(w.dim(), -1.0, 1.0));
    };
    if (mode_ == Mode::dense) return unit_integral("w");
    double total = 0.0;
    for (std::size_t j = 1; j <= n_cliques(); ++j) total += unit_integral(clique_name("w", j));
    return total;
}

RoaCertificate extract(const RoaProgram& prog, const ConicSolution& sol) {
    if (!sol.usable()) {
        throw SolveError("conic solve ended with status " + to_string(sol.status) + " (" + sol.diagnostic +
                         "); try a different degree or looser solver tolerances");
    }
    const ChainSystem& ns = prog.normalized.system;
    std::vector<std::size_t> sizes;
    for (const auto& b : ns.blocks()) sizes.push_back(b.dim());
    return RoaCertificate(prog.mode, prog.degree, ns.name(), ns.state_vars(), std::move(sizes),
                          prog.normalized.state_map, prog.normalized.time_scale,
                          prog.program.instantiate(sol.free_values), sol.objective);
}

// -------------------------------------------------------------- serialization

namespace {

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + format_double(v[i]);
    return out;
}

std::vector<std::string> split_words(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream is{std::string(line)};
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

} // namespace

std::string save_certificate(const RoaCertificate& cert) {
    std::ostringstream os;
    os << "roa-certificate 1\n";
    os << "mode " << to_string(cert.mode()) << "\n";
    os << "degree " << cert.degree() << "\n";
    os << "system " << cert.system_name() << "\n";
    os << "objective " << format_double(cert.objective()) << "\n";
    os << "time_scale " << format_double(cert.time_scale()) << "\n";
    os << "vars";
    for (const auto& v : cert.state_vars()) os << " " << v;
    os << "\nblocks";
    for (auto b : cert.block_sizes()) os << " " << b;
    os << "\nscale " << join_doubles(cert.state_map().scale()) << "\n";
    os << "offset " << join_doubles(cert.state_map().offset()) << "\n";
    for (const auto& [name, p] : cert.polys()) {
        os << "poly " << name;
        for (const auto& v : p.vars()) os << " " << v;
        os << " = " << p.to_string() << "\n";
    }
    os << "end\n";
    return os.str();
}

RoaCertificate load_certificate(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    auto fail = [](const std::string& why) -> RoaCertificate { throw ParseError("certificate: " + why); };
    if (!std::getline(is, line) || line != "roa-certificate 1") return fail("missing 'roa-certificate 1' header");
    Mode mode = Mode::dense;
    unsigned degree = 0;
    std::string name;
    double objective = 0.0, time_scale = 1.0;
    VarList vars;
    std::vector<std::size_t> blocks;
    std::vector<double> scale, offset;
    std::map<std::string, Polynomial> polys;
    bool ended = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto sp = line.find(' ');
        const std::string key = line.substr(0, sp);
        const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
        if (key == "end") {
            ended = true;
            break;
        }
        if (key == "mode") {
            mode = mode_from_string(rest);
        } else if (key == "degree") {
            degree = static_cast<unsigned>(std::stoul(rest));
        } else if (key == "system") {
            name = rest;
        } else if (key == "objective") {
            objective = parse_double(rest);
        } else if (key == "time_scale") {
            time_scale = parse_double(rest);
        } else if (key == "vars") {
            vars = split_words(rest);
        } else if (key == "blocks") {
            for (const auto& w : split_words(rest)) blocks.push_back(std::stoul(w));
        } else if (key == "scale") {
            for (const auto& w : split_words(rest)) scale.push_back(parse_double(w));
        } else if (key == "offset") {
            for (const auto& w : split_words(rest)) offset.push_back(parse_double(w));
        } else if (key == "poly") {
            const auto eq = rest.find(" = ");
            if (eq == std::string::npos) return fail("poly line without ' = '");
            auto words = split_words(rest.substr(0, eq));
            if (words.empty()) return fail("poly line without a name");
            const std::string pname = words.front();
            VarList pvars(words.begin() + 1, words.end());
            polys.emplace(pname, Polynomial::parse(rest.substr(eq + 3), std::move(pvars)));
        } else {
            return fail("unknown field '" + key + "'");
        }
    }
    if (!ended) return fail("missing 'end'");
    return RoaCertificate(mode, degree, name, std::move(vars), std::move(blocks),
                          AffineMap(std::move(scale), std::move(offset)), time_scale, std::move(polys), objective);
}

void save_certificate_file(const RoaCertificate& cert, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write certificate to '" + path + "'");
    out << save_certificate(cert);
}

RoaCertificate load_certificate_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read certificate '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_certificate(ss.str());
}

} // namespace roa
