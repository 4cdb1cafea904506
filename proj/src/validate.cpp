#include "roa/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "roa/error.hpp"

namespace roa {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// X in original coordinates: the image of [-1,1]^n under the state map.
Box state_box(const RoaCertificate& cert) {
    const auto& m = cert.state_map();
    std::vector<double> lo(m.dim()), hi(m.dim());
    for (std::size_t i = 0; i < m.dim(); ++i) {
        const double a = m.offset()[i] - m.scale()[i], b = m.offset()[i] + m.scale()[i];
        lo[i] = std::min(a, b);
        hi[i] = std::max(a, b);
    }
    return Box(std::move(lo), std::move(hi));
}

class BoxSampler {
public:
    BoxSampler(const Box& box, std::uint64_t seed) : box_(box), rng_(seed) {}

    void draw(std::vector<double>& x) {
        x.resize(box_.dim());
        for (std::size_t i = 0; i < box_.dim(); ++i) {
            x[i] = box_.lower(i) + (box_.upper(i) - box_.lower(i)) * unit_(rng_);
        }
    }

private:
    Box box_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

double min_clause(const RoaCertificate& cert, std::span<const double> x) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : cert.clause_values(x)) m = std::min(m, v);
    return m;
}

nlohmann::json to_json(const SoundnessResult& s) {
    nlohmann::json j{{"samples", s.samples},
                     {"confirmed", s.confirmed},
                     {"unconfirmed", s.unconfirmed},
                     {"violations", s.violations},
                     {"seconds", s.seconds}};
    j["worst_margin"] = std::isfinite(s.worst_margin) ? nlohmann::json(s.worst_margin) : nlohmann::json(nullptr);
    j["witnesses"] = nlohmann::json::array();
    for (const auto& w : s.witnesses) j["witnesses"].push_back({{"x0", w.x0}, {"margin", w.margin}});
    return j;
}

} // namespace

void check_compatible(const RoaCertificate& cert, const ChainSystem& sys) {
    if (cert.state_vars().size() != sys.dim()) {
        throw StructuralError("certificate has " + std::to_string(cert.state_vars().size()) +
                              " states, system '" + sys.name() + "' has " + std::to_string(sys.dim()));
    }
    if (cert.block_sizes().size() != sys.n_blocks()) {
        throw StructuralError("certificate block structure does not match system '" + sys.name() + "'");
    }
    for (std::size_t i = 0; i < sys.n_blocks(); ++i) {
        if (cert.block_sizes()[i] != sys.block(i).dim()) {
            throw StructuralError("certificate block structure does not match system '" + sys.name() + "'");
        }
    }
    const Box x = state_box(cert), y = sys.state_box();
    for (std::size_t i = 0; i < sys.dim(); ++i) {
        const double tol = 1e-12 * (1.0 + std::abs(y.upper(i)) + std::abs(y.lower(i)));
        if (std::abs(x.lower(i) - y.lower(i)) > tol || std::abs(x.upper(i) - y.upper(i)) > tol) {
            throw StructuralError("certificate state box differs from system '" + sys.name() + "' in coordinate " +
                                  sys.state_vars()[i]);
        }
    }
    if (std::abs(cert.time_scale() - sys.horizon()) > 1e-12 * sys.horizon()) {
        throw StructuralError("certificate horizon differs from system '" + sys.name() + "'");
    }
}

SoundnessResult soundness_sweep(const RoaCertificate& cert, const ChainSystem& sys, std::size_t n_samples,
                                std::uint64_t seed, double h, double tol, std::size_t max_witnesses) {
    check_compatible(cert, sys);
    const auto t0 = Clock::now();
    if (!(h > 0.0)) h = default_step(sys);
    const Classifier classifier(sys);
    BoxSampler sampler(sys.state_box(), seed);
    SoundnessResult res;
    res.worst_margin = std::numeric_limits<double>::infinity();
    std::vector<double> x;
    for (std::size_t s = 0; s < n_samples; ++s) {
        sampler.draw(x);
        ++res.samples;
        if (classifier.classify(x, h) != TrajectoryStatus::reached_target) continue;
        if (classifier.classify(x, 0.5 * h) != TrajectoryStatus::reached_target) {
            ++res.unconfirmed;
            continue;
        }
        ++res.confirmed;
        const double margin = min_clause(cert, x);
        res.worst_margin = std::min(res.worst_margin, margin);
        if (margin < tol) {
            ++res.violations;
            if (res.witnesses.size() < max_witnesses) res.witnesses.push_back({x, margin});
        }
    }
    res.seconds = seconds_since(t0);
    return res;
}

std::vector<ConstraintResidual> residual_sweep(const RoaCertificate& cert, const RoaProgram& prog,
                                               std::size_t n_samples, std::uint64_t seed) {
    const auto& sp = prog.program;
    std::vector<double> y(sp.n_slots(), 0.0);
    for (const auto& d : sp.decisions()) {
        const Polynomial& p = cert.poly(d.name);
        if (p.vars() != d.vars) throw StructuralError("certificate polynomial '" + d.name + "' has other variables");
        for (std::size_t s = 0; s < d.basis.size(); ++s) y[d.first_slot + s] = p.coefficient(d.basis[s]);
    }
    std::vector<ConstraintResidual> out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& c : sp.constraints()) {
        const PolyEvaluator target(c.target.instantiate(y));
        std::vector<std::size_t> pos;
        for (const auto& v : c.domain.vars) {
            pos.push_back(static_cast<std::size_t>(std::find(sp.vars().begin(), sp.vars().end(), v) - sp.vars().begin()));
        }
        ConstraintResidual r{c.name, std::numeric_limits<double>::infinity(), {}};
        std::vector<double> pt(sp.vars().size(), 0.0);
        const Box& box = c.domain.box;
        // Corners of the domain box are tried first: extremes often sit there.
        const std::size_t k = pos.size();
        const std::size_t corners = k < 12 ? std::size_t{1} << k : 0;
        for (std::size_t s = 0; s < corners + n_samples; ++s) {
            for (std::size_t i = 0; i < k; ++i) {
                pt[pos[i]] = s < corners ? ((s >> i) & 1 ? box.upper(i) : box.lower(i))
                                         : box.lower(i) + (box.upper(i) - box.lower(i)) * unit(rng);
            }
            const double v = target(pt);
            if (v < r.minimum) {
                r.minimum = v;
                r.argmin = pt;
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

VolumeEstimate mc_volume(const RoaCertificate& cert, std::size_t n_samples, std::uint64_t seed) {
    const Box box = state_box(cert);
    BoxSampler sampler(box, seed);
    VolumeEstimate v;
    std::vector<double> x;
    for (std::size_t s = 0; s < n_samples; ++s) {
        sampler.draw(x);
        ++v.samples;
        if (cert.member(x).member) ++v.members;
    }
    if (v.samples == 0) return v;
    const double p = static_cast<double>(v.members) / static_cast<double>(v.samples);
    v.estimate = p * box.volume();
    v.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(v.samples)) * box.volume();
    return v;
}

GridData grid_sample(const RoaCertificate& cert, const GridSpec& spec) {
    const std::size_t n = cert.state_vars().size();
    if (spec.axes.empty() || spec.axes.size() > 3) throw StructuralError("grid needs one to three free axes");
    if (spec.resolution.size() != spec.axes.size()) throw StructuralError("grid needs one resolution per axis");
    for (std::size_t i = 0; i < spec.axes.size(); ++i) {
        if (spec.axes[i] >= n) throw StructuralError("grid axis out of range");
        if (spec.resolution[i] < 2) throw StructuralError("grid resolution must be at least 2 per axis");
        for (std::size_t j = 0; j < i; ++j) {
            if (spec.axes[j] == spec.axes[i]) throw StructuralError("grid axes must be distinct");
        }
    }
    if (!spec.slice.empty() && spec.slice.size() != n) throw StructuralError("grid slice needs one value per state");
    if (spec.clause && *spec.clause >= cert.n_clauses()) throw StructuralError("grid clause out of range");

    const Box box = state_box(cert);
    GridData g;
    g.resolution = spec.resolution;
    g.slice = spec.slice.empty() ? std::vector<double>(n, 0.0) : spec.slice;
    for (auto a : spec.axes) g.axis_names.push_back(cert.state_vars()[a]);
    std::size_t total = 1;
    for (auto r : spec.resolution) total *= r;
    g.rows.reserve(total);
    std::vector<double> x = g.slice;
    std::vector<std::size_t> idx(spec.axes.size(), 0);
    for (std::size_t count = 0; count < total; ++count) {
        std::vector<double> row;
        for (std::size_t i = 0; i < spec.axes.size(); ++i) {
            const auto a = spec.axes[i];
            const double frac = static_cast<double>(idx[i]) / static_cast<double>(spec.resolution[i] - 1);
            x[a] = box.lower(a) + (box.upper(a) - box.lower(a)) * frac;
            row.push_back(x[a]);
        }
        row.push_back(spec.clause ? cert.clause_values(x)[*spec.clause] : min_clause(cert, x));
        g.rows.push_back(std::move(row));
        // Last axis varies fastest.
        for (std::size_t i = spec.axes.size(); i-- > 0;) {
            if (++idx[i] < spec.resolution[i]) break;
            idx[i] = 0;
        }
    }
    return g;
}

void write_grid(std::ostream& out, const RoaCertificate& cert, const GridSpec& spec, const GridData& grid) {
    out << "# roa-grid 1\n";
    out << "# system " << cert.system_name() << '\n';
    out << "# mode " << to_string(cert.mode()) << '\n';
    out << "# degree " << cert.degree() << '\n';
    out << "# axes";
    for (const auto& a : grid.axis_names) out << ' ' << a;
    out << "\n# resolution";
    for (auto r : grid.resolution) out << ' ' << r;
    out << "\n# slice";
    for (std::size_t i = 0; i < grid.slice.size(); ++i) {
        const bool free = std::find(spec.axes.begin(), spec.axes.end(), i) != spec.axes.end();
        out << ' ' << cert.state_vars()[i] << '=' << (free ? std::string("*") : format_double(grid.slice[i]));
    }
    out << "\n# clause " << (spec.clause ? std::to_string(*spec.clause + 1) : std::string("all")) << '\n';
    for (const auto& a : grid.axis_names) out << a << ' ';
    out << "margin\n";
    for (const auto& row : grid.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << format_double(row[i]);
        out << '\n';
    }
}

void grid_export(const RoaCertificate& cert, const GridSpec& spec, const std::string& path) {
    const auto grid = grid_sample(cert, spec);
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    write_grid(out, cert, spec, grid);
}

bool ValidationReport::residuals_ok(double tol) const {
    for (const auto& r : residuals) {
        if (r.minimum < tol) return false;
    }
    return true;
}

bool ValidationReport::passed(double tol) const {
    return (!soundness || soundness->passed()) && residuals_ok(tol);
}

std::string report_json(const ValidationReport& report) {
    nlohmann::json j;
    j["version"] = 1;
    j["system"] = report.system;
    j["mode"] = report.mode;
    j["degree"] = report.degree;
    j["passed"] = report.passed();
    if (report.soundness) j["soundness"] = to_json(*report.soundness);
    j["residuals"] = nlohmann::json::array();
    for (const auto& r : report.residuals) j["residuals"].push_back({{"constraint", r.name}, {"minimum", r.minimum}});
    if (report.volume) {
        j["volume"] = {{"samples", report.volume->samples},
                       {"members", report.volume->members},
                       {"estimate", report.volume->estimate},
                       {"std_error", report.volume->std_error}};
    }
    j["timings"] = nlohmann::json::object();
    for (const auto& [phase, s] : report.timings) j["timings"][phase] = s;
    return j.dump(2) + "\n";
}

std::string report_summary(const ValidationReport& report) {
    std::ostringstream os;
    os << "system " << report.system << ", " << report.mode << " degree " << report.degree << '\n';
    if (report.soundness) {
        const auto& s = *report.soundness;
        os << "soundness: " << s.samples << " samples, " << s.confirmed << " confirmed in ROA, " << s.violations
           << " violations";
        if (s.confirmed > 0) os << ", worst margin " << s.worst_margin;
        os << '\n';
        for (const auto& w : s.witnesses) {
            os << "  witness";
            for (double v : w.x0) os << ' ' << v;
            os << "  margin " << w.margin << '\n';
        }
    }
    for (const auto& r : report.residuals) os << "residual " << r.name << ": min " << r.minimum << '\n';
    if (report.volume) {
        os << "volume: " << report.volume->estimate << " +- " << report.volume->std_error << " ("
           << report.volume->members << "/" << report.volume->samples << ")\n";
    }
    for (const auto& [phase, s] : report.timings) os << "time " << phase << ": " << s << " s\n";
    os << (report.passed() ? "PASS" : "FAIL") << '\n';
    return os.str();
}

} // namespace roa
