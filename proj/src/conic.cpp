#include "roa/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "roa/error.hpp"
#include "roa/poly.hpp"

namespace roa {

void ConicProblem::validate() const {
    for (const auto& e : objective) {
        if (e.index >= n_free) throw StructuralError("objective index out of range");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const auto& e : rows[i].free) {
            if (e.index >= n_free) throw StructuralError("row " + std::to_string(i) + ": free index out of range");
        }
        for (const auto& e : rows[i].psd) {
            if (e.block >= psd_dims.size() || e.col >= psd_dims[e.block] || e.row > e.col) {
                throw StructuralError("row " + std::to_string(i) + ": PSD entry out of range or below diagonal");
            }
        }
    }
}

std::string to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::near_optimal: return "near_optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::failed: return "failed";
    }
    return "failed";
}

SolveStatus status_from_string(std::string_view s) {
    for (auto st : {SolveStatus::optimal, SolveStatus::near_optimal, SolveStatus::infeasible, SolveStatus::unbounded,
                    SolveStatus::failed}) {
        if (to_string(st) == s) return st;
    }
    throw ParseError("unknown solve status '" + std::string(s) + "'");
}

std::vector<double> equality_residuals(const ConicProblem& p, const std::vector<double>& y,
                                       const std::vector<Eigen::MatrixXd>& blocks) {
    if (y.size() != p.n_free || blocks.size() != p.psd_dims.size()) {
        throw StructuralError("solution dimensions do not match the problem");
    }
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto n = static_cast<Eigen::Index>(p.psd_dims[k]);
        if (blocks[k].rows() != n || blocks[k].cols() != n) {
            throw StructuralError("PSD block " + std::to_string(k) + " has wrong size");
        }
    }
    std::vector<double> r(p.rows.size());
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        const auto& row = p.rows[i];
        double s = 0.0;
        for (const auto& e : row.free) s += e.value * y[e.index];
        for (const auto& e : row.psd) {
            const auto& X = blocks[e.block];
            s += e.row == e.col ? e.value * X(e.row, e.col) : e.value * (X(e.row, e.col) + X(e.col, e.row));
        }
        r[i] = row.rhs - s;
    }
    return r;
}

ConicSolution ingest(const ConicProblem& p, RawSolution raw) {
    ConicSolution sol;
    sol.status = raw.status;
    sol.iterations = raw.iterations;
    sol.dual_objective = raw.dual_objective;
    sol.diagnostic = raw.message;
    if (raw.free_values.empty() && p.n_free > 0) raw.free_values.assign(p.n_free, 0.0);
    if (raw.blocks.empty() && !p.psd_dims.empty()) {
        for (auto n : p.psd_dims) raw.blocks.push_back(Eigen::MatrixXd::Zero(n, n));
    }
    const auto res = equality_residuals(p, raw.free_values, raw.blocks);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        double norm2 = 0.0;
        for (const auto& e : p.rows[i].free) norm2 += e.value * e.value;
        for (const auto& e : p.rows[i].psd) norm2 += (e.row == e.col ? 1.0 : 2.0) * e.value * e.value;
        worst = std::max(worst, std::abs(res[i]) / std::max(1.0, std::sqrt(norm2)));
    }
    sol.max_residual = worst;
    double min_eig = std::numeric_limits<double>::infinity();
    for (const auto& X : raw.blocks) {
        if (X.rows() == 0) continue;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (X + X.transpose()), Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues()(0));
    }
    sol.min_eigenvalue = min_eig;
    double obj = 0.0;
    for (const auto& e : p.objective) obj += e.value * raw.free_values[e.index];
    sol.objective = obj;
    sol.free_values = std::move(raw.free_values);
    sol.blocks = std::move(raw.blocks);
    if (sol.usable()) {
        if (!(sol.max_residual <= kMaxEqualityResidual) || !(sol.min_eigenvalue >= kMinGramEigenvalue)) {
            std::ostringstream os;
            os << "backend reported " << to_string(sol.status) << " but verification failed (max residual "
               << sol.max_residual << ", min eigenvalue " << sol.min_eigenvalue << ")";
            sol.diagnostic = os.str();
            sol.status = SolveStatus::failed;
        }
    }
    return sol;
}

ConicSolution solve(const ConicProblem& problem, const SolverOptions& options) {
    problem.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RawSolution raw;
    try {
        raw = detail::interior_point(problem, options);
    } catch (const std::exception& e) {
        raw.status = SolveStatus::failed;
        raw.message = std::string("backend error: ") + e.what();
    }
    ConicSolution sol = ingest(problem, std::move(raw));
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

// ------------------------------------------------------------------ export

namespace {

using ojson = nlohmann::ordered_json;

std::string native_export(const ConicProblem& p) {
    std::string out = "{\n";
    out += "\"format\": \"roa-conic\",\n\"version\": 1,\n";
    out += "\"n_free\": " + std::to_string(p.n_free) + ",\n";
    out += "\"n_rows\": " + std::to_string(p.rows.size()) + ",\n";
    out += "\"psd_dims\": " + ojson(p.psd_dims).dump() + ",\n";
    ojson obj = ojson::array();
    for (const auto& e : p.objective) obj.push_back(ojson::array({e.index, e.value}));
    out += "\"objective\": " + obj.dump() + ",\n";
    out += "\"rows\": [";
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        const auto& r = p.rows[i];
        ojson jr;
        jr["rhs"] = r.rhs;
        ojson fr = ojson::array();
        for (const auto& e : r.free) fr.push_back(ojson::array({e.index, e.value}));
        jr["free"] = std::move(fr);
        ojson ps = ojson::array();
        for (const auto& e : r.psd) ps.push_back(ojson::array({e.block, e.row, e.col, e.value}));
        jr["psd"] = std::move(ps);
        out += (i == 0 ? "\n" : ",\n") + jr.dump();
    }
    out += p.rows.empty() ? "]\n}\n" : "\n]\n}\n";
    return out;
}

ConicProblem native_import(std::string_view text) {
    ConicProblem p;
    try {
        const auto root = nlohmann::json::parse(text);
        if (root.at("format").get<std::string>() != "roa-conic" || root.at("version").get<int>() != 1) {
            throw ParseError("not a version 1 roa-conic file");
        }
        p.n_free = root.at("n_free").get<std::size_t>();
        p.psd_dims = root.at("psd_dims").get<std::vector<std::size_t>>();
        for (const auto& e : root.at("objective")) {
            p.objective.push_back({e.at(0).get<std::uint32_t>(), e.at(1).get<double>()});
        }
        for (const auto& jr : root.at("rows")) {
            EqualityRow r;
            r.rhs = jr.at("rhs").get<double>();
            for (const auto& e : jr.at("free")) r.free.push_back({e.at(0).get<std::uint32_t>(), e.at(1).get<double>()});
            for (const auto& e : jr.at("psd")) {
                r.psd.push_back({e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>(),
                                 e.at(2).get<std::uint32_t>(), e.at(3).get<double>()});
            }
            p.rows.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed native conic file: ") + e.what());
    }
    p.validate();
    return p;
}

// SDPA sparse layout, read as the SDPA dual problem
//     max <F0, Y>  s.t.  <F_i, Y> = c_i,  Y PSD.
// Row i of our problem is constraint i; each free variable y_j becomes the
// pair (y_j+, y_j-) of diagonal entries 2j-1, 2j of a trailing LP block.
std::string sdpa_export(const ConicProblem& p) {
    std::ostringstream os;
    os << "\"roa-conic: " << p.rows.size() << " equality rows, " << p.psd_dims.size() << " PSD blocks, " << p.n_free
       << " free variables as (+,-) pairs of the trailing diagonal block\n";
    const std::size_t n_blocks = p.psd_dims.size() + (p.n_free > 0 ? 1 : 0);
    os << p.rows.size() << "\n" << n_blocks << "\n";
    bool first = true;
    for (auto d : p.psd_dims) {
        os << (first ? "" : " ") << d;
        first = false;
    }
    if (p.n_free > 0) os << (first ? "" : " ") << "-" << 2 * p.n_free;
    os << "\n";
    for (std::size_t i = 0; i < p.rows.size(); ++i) os << (i ? " " : "") << format_double(p.rows[i].rhs);
    os << "\n";
    const std::size_t lp_block = p.psd_dims.size() + 1;
    for (const auto& e : p.objective) {
        os << "0 " << lp_block << " " << 2 * e.index + 1 << " " << 2 * e.index + 1 << " " << format_double(-e.value)
           << "\n";
        os << "0 " << lp_block << " " << 2 * e.index + 2 << " " << 2 * e.index + 2 << " " << format_double(e.value)
           << "\n";
    }
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        const auto& r = p.rows[i];
        for (const auto& e : r.psd) {
            os << i + 1 << " " << e.block + 1 << " " << e.row + 1 << " " << e.col + 1 << " " << format_double(e.value)
               << "\n";
        }
        for (const auto& e : r.free) {
            os << i + 1 << " " << lp_block << " " << 2 * e.index + 1 << " " << 2 * e.index + 1 << " "
               << format_double(e.value) << "\n";
            os << i + 1 << " " << lp_block << " " << 2 * e.index + 2 << " " << 2 * e.index + 2 << " "
               << format_double(-e.value) << "\n";
        }
    }
    return os.str();
}

ConicProblem sdpa_import(std::string_view text) {
    std::string body;
    {
        std::istringstream in{std::string(text)};
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            const auto pos = line.find_first_not_of(" \t\r");
            if (header && (pos == std::string::npos || line[pos] == '"' || line[pos] == '*')) continue;
            header = false;
            body += line;
            body += '\n';
        }
    }
    for (char& ch : body) {
        if (ch == '{' || ch == '}' || ch == '(' || ch == ')' || ch == ',') ch = ' ';
    }
    std::istringstream in(body);
    auto next = [&in]() {
        std::string tok;
        if (!(in >> tok)) throw ParseError("SDPA file ended early");
        return tok;
    };
    auto next_int = [&]() {
        const auto tok = next();
        try {
            return std::stol(tok);
        } catch (...) {
            throw ParseError("expected integer in SDPA file, got '" + tok + "'");
        }
    };
    const long m = next_int();
    const long nb = next_int();
    if (m < 0 || nb < 0) throw ParseError("negative sizes in SDPA header");
    std::vector<long> dims(static_cast<std::size_t>(nb));
    for (auto& d : dims) d = next_int();
    std::vector<double> rhs(static_cast<std::size_t>(m));
    for (auto& v : rhs) v = parse_double(next());

    struct Raw {
        long mat, blk, i, j;
        double v;
    };
    std::vector<Raw> entries;
    std::string tok;
    while (in >> tok) {
        Raw r{};
        try {
            r.mat = std::stol(tok);
            r.blk = next_int();
            r.i = next_int();
            r.j = next_int();
        } catch (const std::invalid_argument&) {
            throw ParseError("malformed SDPA entry line");
        }
        r.v = parse_double(next());
        if (r.mat < 0 || r.mat > m || r.blk < 1 || r.blk > nb) throw ParseError("SDPA entry index out of range");
        const long dim = std::abs(dims[static_cast<std::size_t>(r.blk - 1)]);
        if (r.i < 1 || r.j < 1 || r.i > dim || r.j > dim) throw ParseError("SDPA entry position out of range");
        if (r.i > r.j) std::swap(r.i, r.j);
        entries.push_back(r);
    }

    // A trailing negative block of even size whose diagonal comes in (v, -v)
    // pairs encodes free variables; any other diagonal block becomes 1x1 PSD blocks.
    long free_block = 0;
    if (nb > 0 && dims.back() < 0 && (-dims.back()) % 2 == 0) {
        const long b = nb;
        std::map<std::pair<long, long>, double> plus, minus;
        bool paired = true;
        for (const auto& e : entries) {
            if (e.blk != b) continue;
            if (e.i != e.j) paired = false;
            (e.i % 2 == 1 ? plus : minus)[{e.mat, (e.i + 1) / 2}] += e.v;
        }
        if (plus.size() != minus.size()) paired = false;
        for (const auto& [key, v] : plus) {
            auto it = minus.find(key);
            if (it == minus.end() || it->second != -v) paired = false;
        }
        if (paired) free_block = b;
    }

    ConicProblem p;
    p.rows.resize(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i) p.rows[static_cast<std::size_t>(i)].rhs = rhs[static_cast<std::size_t>(i)];
    std::vector<long> first_psd(static_cast<std::size_t>(nb), -1);
    for (long b = 0; b < nb; ++b) {
        if (b + 1 == free_block) {
            p.n_free = static_cast<std::size_t>(-dims[static_cast<std::size_t>(b)] / 2);
            continue;
        }
        first_psd[static_cast<std::size_t>(b)] = static_cast<long>(p.psd_dims.size());
        const long d = dims[static_cast<std::size_t>(b)];
        if (d > 0) {
            p.psd_dims.push_back(static_cast<std::size_t>(d));
        } else {
            for (long k = 0; k < -d; ++k) p.psd_dims.push_back(1);
        }
    }
    for (const auto& e : entries) {
        const std::size_t b = static_cast<std::size_t>(e.blk - 1);
        if (e.blk == free_block) {
            if (e.i % 2 == 0) continue;
            const auto idx = static_cast<std::uint32_t>((e.i - 1) / 2);
            if (e.mat == 0) {
                p.objective.push_back({idx, -e.v});
            } else {
                p.rows[static_cast<std::size_t>(e.mat - 1)].free.push_back({idx, e.v});
            }
            continue;
        }
        if (e.mat == 0) throw ParseError("objective terms on PSD blocks are not supported");
        PsdEntry pe;
        if (dims[b] > 0) {
            pe = {static_cast<std::uint32_t>(first_psd[b]), static_cast<std::uint32_t>(e.i - 1),
                  static_cast<std::uint32_t>(e.j - 1), e.v};
        } else {
            if (e.i != e.j) throw ParseError("off-diagonal entry in a diagonal SDPA block");
            pe = {static_cast<std::uint32_t>(first_psd[b] + e.i - 1), 0, 0, e.v};
        }
        p.rows[static_cast<std::size_t>(e.mat - 1)].psd.push_back(pe);
    }
    auto psd_less = [](const PsdEntry& a, const PsdEntry& b) {
        return std::tie(a.block, a.row, a.col) < std::tie(b.block, b.row, b.col);
    };
    auto free_less = [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; };
    for (auto& r : p.rows) {
        std::stable_sort(r.psd.begin(), r.psd.end(), psd_less);
        std::stable_sort(r.free.begin(), r.free.end(), free_less);
    }
    std::stable_sort(p.objective.begin(), p.objective.end(), free_less);
    p.validate();
    return p;
}

} // namespace

std::string export_problem(const ConicProblem& problem, ExportFormat format) {
    problem.validate();
    return format == ExportFormat::native_json ? native_export(problem) : sdpa_export(problem);
}

ConicProblem import_problem(std::string_view text, ExportFormat format) {
    return format == ExportFormat::native_json ? native_import(text) : sdpa_import(text);
}

std::string export_solution(const ConicSolution& sol) {
    ojson j;
    j["format"] = "roa-conic-solution";
    j["version"] = 1;
    j["status"] = to_string(sol.status);
    j["objective"] = sol.objective;
    j["dual_objective"] = sol.dual_objective;
    j["max_residual"] = sol.max_residual;
    j["min_eigenvalue"] = std::isfinite(sol.min_eigenvalue) ? ojson(sol.min_eigenvalue) : ojson(nullptr);
    j["iterations"] = sol.iterations;
    j["seconds"] = sol.seconds;
    j["diagnostic"] = sol.diagnostic;
    j["free_values"] = sol.free_values;
    ojson blocks = ojson::array();
    for (const auto& X : sol.blocks) {
        ojson upper = ojson::array();
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            for (Eigen::Index r = 0; r <= c; ++r) upper.push_back(X(r, c));
        }
        blocks.push_back(ojson{{"dim", X.rows()}, {"upper_colwise", std::move(upper)}});
    }
    j["blocks"] = std::move(blocks);
    return j.dump() + "\n";
}

} // namespace roa
