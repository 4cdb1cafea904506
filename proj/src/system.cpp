#include "roa/system.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "roa/error.hpp"

namespace roa {

ChainSystem::ChainSystem(std::string name, std::vector<Block> blocks, std::vector<Polynomial> dynamics,
                         double horizon)
    : name_(std::move(name)), blocks_(std::move(blocks)), dynamics_(std::move(dynamics)), horizon_(horizon) {
    if (!(horizon_ > 0.0)) throw StructuralError("horizon T must be positive");
    if (blocks_.empty()) throw StructuralError("chain system needs at least one block");
    for (const Block& b : blocks_) {
        if (b.vars.empty()) throw StructuralError("block '" + b.name + "' has no variables");
        if (b.box.dim() != b.dim() || b.target.dim() != b.dim()) {
            throw StructuralError("block '" + b.name + "' boxes do not match its dimension");
        }
        if (!b.target.subset_of(b.box)) {
            throw StructuralError("block '" + b.name + "' target box is not contained in its state box");
        }
        offsets_.push_back(vars_.size());
        for (const auto& v : b.vars) {
            if (v == "t") throw StructuralError("'t' is reserved for time");
            if (std::find(vars_.begin(), vars_.end(), v) != vars_.end()) {
                throw StructuralError("duplicate state variable '" + v + "'");
            }
            vars_.push_back(v);
        }
    }
    if (dynamics_.size() != vars_.size()) {
        throw StructuralError("expected " + std::to_string(vars_.size()) + " dynamics components, got " +
                              std::to_string(dynamics_.size()));
    }
    for (auto& f : dynamics_) {
        if (f.vars() != vars_) f = f.embed(vars_);
    }
}

std::size_t ChainSystem::block_of(std::size_t var) const {
    if (var >= dim()) throw StructuralError("state index out of range");
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), var);
    return static_cast<std::size_t>(it - offsets_.begin()) - 1;
}

Box ChainSystem::state_box() const {
    Box out = blocks_.front().box;
    for (std::size_t i = 1; i < blocks_.size(); ++i) out = out * blocks_[i].box;
    return out;
}

Box ChainSystem::target_box() const {
    Box out = blocks_.front().target;
    for (std::size_t i = 1; i < blocks_.size(); ++i) out = out * blocks_[i].target;
    return out;
}

unsigned ChainSystem::dynamics_degree() const {
    int d = 0;
    for (const auto& f : dynamics_) d = std::max(d, f.degree());
    return static_cast<unsigned>(d);
}

std::vector<PolyEvaluator> ChainSystem::vector_field() const {
    std::vector<PolyEvaluator> out;
    out.reserve(dynamics_.size());
    for (const auto& f : dynamics_) out.emplace_back(f);
    return out;
}

std::vector<Clique> validate_chain(const ChainSystem& sys) {
    const std::size_t n_blocks = sys.n_blocks();
    if (n_blocks < 2) throw StructuralError("a chain needs at least two blocks (K = N - 1 >= 1)");
    for (std::size_t c = 0; c < sys.dim(); ++c) {
        const std::size_t i = sys.block_of(c);
        const std::size_t lo = (i + 1 == n_blocks) ? i - 1 : i;
        const std::size_t hi = lo + 1;
        for (const auto& [m, coeff] : sys.dynamics()[c].terms()) {
            for (std::size_t v = 0; v < sys.dim(); ++v) {
                if (m[v] == 0) continue;
                const std::size_t bv = sys.block_of(v);
                if (bv < lo || bv > hi) {
                    Polynomial term(sys.state_vars());
                    term.add_term(m, coeff);
                    throw StructuralError("sparsity violation: term '" + term.to_string() + "' in f of block '" +
                                          sys.block(i).name + "' (variable " + sys.state_vars()[c] +
                                          ") references block '" + sys.block(bv).name + "'; allowed blocks are '" +
                                          sys.block(lo).name + "' and '" + sys.block(hi).name + "'");
                }
            }
        }
    }
    std::vector<Clique> cliques;
    for (std::size_t j = 0; j + 1 < n_blocks; ++j) {
        Clique q;
        q.index = j + 1;
        q.first_block = j;
        const Block& a = sys.block(j);
        const Block& b = sys.block(j + 1);
        q.vars = a.vars;
        q.vars.insert(q.vars.end(), b.vars.begin(), b.vars.end());
        for (std::size_t k = 0; k < a.dim() + b.dim(); ++k) q.var_indices.push_back(sys.block_offset(j) + k);
        q.box = a.box * b.box;
        q.target = a.target * b.target;
        cliques.push_back(std::move(q));
    }
    return cliques;
}

namespace {

std::vector<Block> scalar_blocks(const VarList& vars, double x_half, double target_half) {
    std::vector<Block> blocks;
    for (const auto& v : vars) {
        blocks.push_back({v, {v}, Box::cube(1, -x_half, x_half), Box::cube(1, -target_half, target_half)});
    }
    return blocks;
}

} // namespace

ChainSystem bicylinder() {
    const VarList vars{"x1", "x2", "x3"};
    auto P = [&](std::string_view s) { return Polynomial::parse(s, vars); };
    std::vector<Polynomial> f{
        P("(x1^2 + x2^2 - 0.25)*x1"),
        P("(x2^2 + x3^2 - 0.25)*x2"),
        P("(x2^2 + x3^2 - 0.25)*x3"),
    };
    return ChainSystem("bicylinder", scalar_blocks(vars, 1.0, 0.1), std::move(f), 100.0);
}

std::vector<double> vdp_couplings(std::size_t k, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<double> eps;
    for (std::size_t j = 0; j + 1 < k; ++j) {
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        eps.push_back(u - 0.5);
    }
    return eps;
}

ChainSystem vdp_chain(std::size_t k, std::uint64_t seed) {
    if (k < 2) throw StructuralError("Van der Pol chain needs K >= 2 oscillators");
    const std::size_t n = 2 * k;
    VarList vars;
    for (std::size_t i = 1; i <= n; ++i) vars.push_back("x" + std::to_string(i));
    // Positions of y_i and z_i in the state list (0-based oscillator index).
    auto y_of = [&](std::size_t i) { return i + 1 < k ? 2 * i : n - 1; };
    auto z_of = [&](std::size_t i) { return i + 1 < k ? 2 * i + 1 : n - 2; };
    auto var = [&](std::size_t idx) { return Polynomial::variable(vars, vars[idx]); };
    auto cst = [&](double c) { return Polynomial::constant(vars, c); };

    const auto eps = vdp_couplings(k, seed);
    std::vector<Polynomial> f(n, Polynomial(vars));
    for (std::size_t i = 0; i < k; ++i) {
        const Polynomial y = var(y_of(i)), z = var(z_of(i));
        f[y_of(i)] = -2.0 * z;
        Polynomial zdot = 0.8 * y + 10.0 * (1.2 * 1.2 * y * y - cst(0.21)) * z;
        if (i + 1 < k) zdot += eps[i] * var(z_of(i + 1)) * y;
        f[z_of(i)] = zdot;
    }

    std::vector<Block> blocks;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        blocks.push_back({"osc" + std::to_string(i + 1), {vars[2 * i], vars[2 * i + 1]}, Box::cube(2, -1, 1),
                          Box::cube(2, -0.1, 0.1)});
    }
    blocks.push_back({"z" + std::to_string(k), {vars[n - 2]}, Box::cube(1, -1, 1), Box::cube(1, -0.1, 0.1)});
    blocks.push_back({"y" + std::to_string(k), {vars[n - 1]}, Box::cube(1, -1, 1), Box::cube(1, -0.1, 0.1)});
    return ChainSystem("vdp" + std::to_string(k), std::move(blocks), std::move(f), 30.0);
}

ChainSystem static_chain(std::size_t n_blocks) {
    VarList vars;
    for (std::size_t i = 1; i <= n_blocks; ++i) vars.push_back("x" + std::to_string(i));
    std::vector<Polynomial> f(n_blocks, Polynomial(vars));
    return ChainSystem("static", scalar_blocks(vars, 1.0, 1.0), std::move(f), 1.0);
}

// ------------------------------------------------------------ normalization

std::vector<double> NormalizedSystem::to_normalized(std::span<const double> x) const {
    return state_map.inverse().apply(x);
}

std::vector<double> NormalizedSystem::to_original(std::span<const double> y) const {
    return state_map.apply(y);
}

namespace {

AffineMap concat_maps(const std::vector<AffineMap>& maps) {
    std::vector<double> s, o;
    for (const auto& m : maps) {
        s.insert(s.end(), m.scale().begin(), m.scale().end());
        o.insert(o.end(), m.offset().begin(), m.offset().end());
    }
    return AffineMap(std::move(s), std::move(o));
}

Box map_box(const Box& box, const AffineMap& to_new) {
    std::vector<double> lo(box.dim()), hi(box.dim());
    for (std::size_t c = 0; c < box.dim(); ++c) {
        const double a = to_new.scale()[c] * box.lower(c) + to_new.offset()[c];
        const double b = to_new.scale()[c] * box.upper(c) + to_new.offset()[c];
        lo[c] = std::min(a, b);
        hi[c] = std::max(a, b);
    }
    return Box(std::move(lo), std::move(hi));
}

} // namespace

NormalizedSystem normalize(const ChainSystem& sys) {
    NormalizedSystem ns;
    ns.time_scale = sys.horizon();
    std::vector<Block> blocks;
    for (const Block& b : sys.blocks()) {
        AffineMap m = AffineMap::from_unit_box(b.box);
        const AffineMap inv = m.inverse();
        blocks.push_back({b.name, b.vars, Box::cube(b.dim(), -1.0, 1.0), map_box(b.target, inv)});
        ns.block_maps.push_back(std::move(m));
    }
    ns.state_map = concat_maps(ns.block_maps);
    std::vector<Polynomial> f;
    for (std::size_t c = 0; c < sys.dim(); ++c) {
        f.push_back(sys.dynamics()[c].substitute_affine(ns.state_map) * (sys.horizon() / ns.state_map.scale()[c]));
    }
    ns.system = ChainSystem(sys.name(), std::move(blocks), std::move(f), 1.0);
    return ns;
}

ChainSystem denormalize(const NormalizedSystem& ns) {
    const AffineMap inv = ns.state_map.inverse();
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < ns.system.n_blocks(); ++i) {
        const Block& b = ns.system.block(i);
        blocks.push_back({b.name, b.vars, map_box(b.box, ns.block_maps[i]), map_box(b.target, ns.block_maps[i])});
    }
    std::vector<Polynomial> f;
    for (std::size_t c = 0; c < ns.system.dim(); ++c) {
        f.push_back(ns.system.dynamics()[c].substitute_affine(inv) * (ns.state_map.scale()[c] / ns.time_scale));
    }
    return ChainSystem(ns.system.name(), std::move(blocks), std::move(f), ns.time_scale);
}

// --------------------------------------------------------------------- JSON

std::string save_system_json(const ChainSystem& sys) {
    using json = nlohmann::ordered_json;
    json root;
    root["format"] = "roa-system";
    root["version"] = 1;
    root["name"] = sys.name();
    root["horizon"] = sys.horizon();
    json blocks = json::array();
    for (std::size_t i = 0; i < sys.n_blocks(); ++i) {
        const Block& b = sys.block(i);
        json jb;
        jb["name"] = b.name;
        jb["vars"] = b.vars;
        jb["lower"] = b.box.lower();
        jb["upper"] = b.box.upper();
        jb["target_lower"] = b.target.lower();
        jb["target_upper"] = b.target.upper();
        json dyn = json::array();
        for (std::size_t k = 0; k < b.dim(); ++k) dyn.push_back(sys.dynamics()[sys.block_offset(i) + k].to_string());
        jb["dynamics"] = std::move(dyn);
        blocks.push_back(std::move(jb));
    }
    root["blocks"] = std::move(blocks);
    return root.dump(2) + "\n";
}

ChainSystem load_system_json(const std::string& text) {
    using json = nlohmann::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("system config is not valid JSON: ") + e.what());
    }
    try {
        if (root.contains("version") && root.at("version").get<int>() != 1) {
            throw ParseError("unsupported system config version");
        }
        std::vector<Block> blocks;
        std::vector<std::string> dyn_text;
        VarList vars;
        for (const auto& jb : root.at("blocks")) {
            Block b;
            b.name = jb.at("name").get<std::string>();
            b.vars = jb.at("vars").get<VarList>();
            b.box = Box(jb.at("lower").get<std::vector<double>>(), jb.at("upper").get<std::vector<double>>());
            if (jb.contains("target_lower")) {
                b.target = Box(jb.at("target_lower").get<std::vector<double>>(),
                               jb.at("target_upper").get<std::vector<double>>());
            } else {
                b.target = b.box;
            }
            const auto d = jb.at("dynamics").get<std::vector<std::string>>();
            if (d.size() != b.vars.size()) {
                throw ParseError("block '" + b.name + "' needs one dynamics string per variable");
            }
            dyn_text.insert(dyn_text.end(), d.begin(), d.end());
            vars.insert(vars.end(), b.vars.begin(), b.vars.end());
            blocks.push_back(std::move(b));
        }
        for (const auto& v : vars) {
            const bool ok = v.size() > 1 && v[0] == 'x' &&
                            std::all_of(v.begin() + 1, v.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
            if (!ok) throw ParseError("state variables must be named x<i>, got '" + v + "'");
        }
        std::vector<Polynomial> f;
        for (const auto& s : dyn_text) f.push_back(Polynomial::parse(s, vars));
        return ChainSystem(root.value("name", std::string("custom")), std::move(blocks), std::move(f),
                           root.at("horizon").get<double>());
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed system config: ") + e.what());
    }
}

ChainSystem load_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open system config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_system_json(ss.str());
}

void save_system_file(const ChainSystem& sys, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << save_system_json(sys);
}

} // namespace roa
