// Primal-dual interior-point backend for the equality-form conic problem
//
//     min c^T y   s.t.  A(X) + B y = b,  X_k PSD,
//     max b^T l   s.t.  B^T l = c,  Z = -A^*(l) PSD.
//
// HKM search direction with Mehrotra predictor-corrector. The problem is first
// split into independent components (rows linked through shared PSD blocks or
// free variables); inside a component the Schur complement M is block diagonal
// over row groups (rows linked through PSD blocks), and free variables are
// eliminated through S = B^T M^{-1} B.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "roa/conic.hpp"
#include "roa/error.hpp"

namespace roa::detail {
namespace {

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Entry {
    std::uint32_t r;
    std::uint32_t c;
    double v;
};

/// Rows touching one PSD block, with their entries in CSR form.
struct LocalBlock {
    std::size_t dim = 0;
    std::vector<std::uint32_t> rows;   // local row ids, ascending
    std::vector<std::uint32_t> start;  // size rows.size() + 1
    std::vector<Entry> entries;
};

/// Rows connected through PSD blocks; its slice of M is dense.
struct RowGroup {
    Index row_begin = 0;
    Index row_end = 0;
    std::vector<std::size_t> blocks;
    std::vector<Index> free_cols;  // local free ids touched by the group
    MatrixXd Bd;                   // (row_end - row_begin) x free_cols.size()
};

struct Component {
    std::vector<std::size_t> rows_global;
    std::vector<std::size_t> blocks_global;
    std::vector<std::size_t> free_global;
    std::vector<LocalBlock> blocks;
    std::vector<RowGroup> groups;
    VectorXd b;
    VectorXd c;
};

struct ComponentResult {
    SolveStatus status = SolveStatus::failed;
    std::vector<MatrixXd> X;
    VectorXd y;
    double dual_objective = 0.0;
    int iterations = 0;
    std::string message;
};

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

double row_norm(const EqualityRow& r) {
    double s = 0.0;
    for (const auto& e : r.free) s += e.value * e.value;
    for (const auto& e : r.psd) s += (e.row == e.col ? 1.0 : 2.0) * e.value * e.value;
    return std::sqrt(s);
}

// Split the problem into independent components. Rows are rescaled to unit norm.
std::vector<Component> decompose(const ConicProblem& p, std::vector<std::size_t>& orphan_free) {
    const std::size_t m = p.rows.size(), nb = p.psd_dims.size(), nf = p.n_free;
    UnionFind all(m + nb + nf);
    UnionFind by_block(m + nb);
    for (std::size_t i = 0; i < m; ++i) {
        for (const auto& e : p.rows[i].psd) {
            all.unite(i, m + e.block);
            by_block.unite(i, m + e.block);
        }
        for (const auto& e : p.rows[i].free) all.unite(i, m + nb + e.index);
    }
    std::map<std::size_t, std::size_t> comp_of_root;
    std::vector<Component> comps;
    auto comp_index = [&](std::size_t node) {
        const auto root = all.find(node);
        auto [it, inserted] = comp_of_root.try_emplace(root, comps.size());
        if (inserted) comps.emplace_back();
        return it->second;
    };
    std::vector<std::size_t> block_local(nb), free_local(nf, SIZE_MAX);
    // Row order inside a component: grouped by PSD-connected group, groups in
    // order of their first row.
    std::vector<std::vector<std::size_t>> group_rows_by_root(m + nb);
    for (std::size_t i = 0; i < m; ++i) group_rows_by_root[by_block.find(i)].push_back(i);
    std::vector<std::vector<std::vector<std::size_t>>> comp_groups;
    for (std::size_t i = 0; i < m; ++i) {
        const auto root = by_block.find(i);
        if (group_rows_by_root[root].empty() || group_rows_by_root[root].front() != i) continue;
        const auto ci = comp_index(i);
        if (comp_groups.size() <= ci) comp_groups.resize(ci + 1);
        comp_groups[ci].push_back(group_rows_by_root[root]);
    }
    for (std::size_t j = 0; j < nf; ++j) {
        const auto root = all.find(m + nb + j);
        if (root >= m) {
            orphan_free.push_back(j);  // free variable in no row
            continue;
        }
        const auto ci = comp_index(m + nb + j);
        free_local[j] = comps[ci].free_global.size();
        comps[ci].free_global.push_back(j);
    }
    comp_groups.resize(comps.size());

    std::vector<std::size_t> local_row(m);
    for (std::size_t ci = 0; ci < comps.size(); ++ci) {
        Component& C = comps[ci];
        for (const auto& rows : comp_groups[ci]) {
            RowGroup g;
            g.row_begin = static_cast<Index>(C.rows_global.size());
            for (auto r : rows) {
                local_row[r] = C.rows_global.size();
                C.rows_global.push_back(r);
            }
            g.row_end = static_cast<Index>(C.rows_global.size());
            C.groups.push_back(std::move(g));
        }
        const auto mc = static_cast<Index>(C.rows_global.size());
        C.b = VectorXd::Zero(mc);
        C.c = VectorXd::Zero(static_cast<Index>(C.free_global.size()));
    }
    for (std::size_t k = 0; k < nb; ++k) {
        const auto root = all.find(m + k);
        if (root >= m) {
            block_local[k] = SIZE_MAX;  // block in no row: left at zero
            continue;
        }
        Component& C = comps[comp_index(m + k)];
        block_local[k] = C.blocks_global.size();
        C.blocks_global.push_back(k);
        LocalBlock lb;
        lb.dim = p.psd_dims[k];
        lb.start.push_back(0);
        C.blocks.push_back(std::move(lb));
    }

    // Fill per-block CSR data in ascending local row order.
    for (auto& C : comps) {
        for (std::size_t lr = 0; lr < C.rows_global.size(); ++lr) {
            const auto& row = p.rows[C.rows_global[lr]];
            const double rho = row_norm(row);
            const double s = rho > 0.0 ? 1.0 / rho : 1.0;
            C.b(static_cast<Index>(lr)) = row.rhs * s;
            std::size_t current = SIZE_MAX;
            for (const auto& e : row.psd) {
                LocalBlock& lb = C.blocks[block_local[e.block]];
                if (current != e.block) {
                    if (lb.rows.empty() || lb.rows.back() != lr) {
                        lb.rows.push_back(static_cast<std::uint32_t>(lr));
                        lb.start.push_back(static_cast<std::uint32_t>(lb.entries.size()));
                    }
                    current = e.block;
                }
                lb.entries.push_back({e.row, e.col, e.value * s});
                lb.start.back() = static_cast<std::uint32_t>(lb.entries.size());
            }
        }
        for (auto& g : C.groups) {
            std::map<std::size_t, Index> cols;
            for (Index lr = g.row_begin; lr < g.row_end; ++lr) {
                for (const auto& e : p.rows[C.rows_global[static_cast<std::size_t>(lr)]].free) {
                    cols.try_emplace(free_local[e.index], 0);
                }
            }
            Index k = 0;
            for (auto& [col, pos] : cols) {
                pos = k++;
                g.free_cols.push_back(static_cast<Index>(col));
            }
            g.Bd = MatrixXd::Zero(g.row_end - g.row_begin, k);
            for (Index lr = g.row_begin; lr < g.row_end; ++lr) {
                const auto& row = p.rows[C.rows_global[static_cast<std::size_t>(lr)]];
                const double rho = row_norm(row);
                const double s = rho > 0.0 ? 1.0 / rho : 1.0;
                for (const auto& e : row.free) g.Bd(lr - g.row_begin, cols.at(free_local[e.index])) += e.value * s;
            }
        }
        for (std::size_t lb = 0; lb < C.blocks.size(); ++lb) {
            const auto& blk = C.blocks[lb];
            if (blk.rows.empty()) continue;
            const auto first_row = static_cast<Index>(blk.rows.front());
            for (std::size_t gi = 0; gi < C.groups.size(); ++gi) {
                if (first_row >= C.groups[gi].row_begin && first_row < C.groups[gi].row_end) {
                    C.groups[gi].blocks.push_back(lb);
                }
            }
        }
    }
    for (const auto& e : p.objective) {
        if (free_local[e.index] == SIZE_MAX) continue;
        const auto ci = comp_index(m + nb + e.index);
        comps[ci].c(static_cast<Index>(free_local[e.index])) += e.value;
    }
    return comps;
}

void symmetrize(MatrixXd& a) { a = (0.5 * (a + a.transpose())).eval(); }

double frob_dot(const MatrixXd& a, const MatrixXd& b) { return (a.array() * b.array()).sum(); }

/// One block entry addressed by its column-major upper-triangle position.
struct Scatter {
    std::uint32_t pos;
    std::uint32_t row;  // index into LocalBlock::rows
    double coef;        // off-diagonal entries count twice
};

class ComponentSolver {
public:
    ComponentSolver(Component& comp, const SolverOptions& opt) : C_(comp), opt_(opt) {
        m_ = static_cast<Index>(C_.rows_global.size());
        nf_ = static_cast<Index>(C_.free_global.size());
        for (const auto& b : C_.blocks) n_total_ += static_cast<double>(b.dim);
        build_scatter();
    }

    ComponentResult run();

private:
    // sum_k <A_ik, Y_k>; Y_k need not be symmetric.
    VectorXd apply_A(const std::vector<MatrixXd>& Y) const {
        VectorXd out = VectorXd::Zero(m_);
        for (std::size_t k = 0; k < C_.blocks.size(); ++k) {
            const auto& blk = C_.blocks[k];
            const auto& M = Y[k];
            for (std::size_t a = 0; a < blk.rows.size(); ++a) {
                double s = 0.0;
                for (auto e = blk.start[a]; e < blk.start[a + 1]; ++e) {
                    const auto& en = blk.entries[e];
                    s += en.r == en.c ? en.v * M(en.r, en.r) : en.v * (M(en.r, en.c) + M(en.c, en.r));
                }
                out(blk.rows[a]) += s;
            }
        }
        return out;
    }

    void apply_At(const VectorXd& lam, std::vector<MatrixXd>& out) const {
        out.resize(C_.blocks.size());
        for (std::size_t k = 0; k < C_.blocks.size(); ++k) {
            const auto& blk = C_.blocks[k];
            const auto n = static_cast<Index>(blk.dim);
            out[k].setZero(n, n);
            for (std::size_t a = 0; a < blk.rows.size(); ++a) {
                const double l = lam(blk.rows[a]);
                if (l == 0.0) continue;
                for (auto e = blk.start[a]; e < blk.start[a + 1]; ++e) {
                    const auto& en = blk.entries[e];
                    out[k](en.r, en.c) += l * en.v;
                    if (en.r != en.c) out[k](en.c, en.r) += l * en.v;
                }
            }
        }
    }

    VectorXd apply_B(const VectorXd& y) const {
        VectorXd out = VectorXd::Zero(m_);
        for (const auto& g : C_.groups) {
            if (g.free_cols.empty()) continue;
            VectorXd yg(static_cast<Index>(g.free_cols.size()));
            for (std::size_t k = 0; k < g.free_cols.size(); ++k) yg(static_cast<Index>(k)) = y(g.free_cols[k]);
            out.segment(g.row_begin, g.row_end - g.row_begin) += g.Bd * yg;
        }
        return out;
    }

    VectorXd apply_Bt(const VectorXd& lam) const {
        VectorXd out = VectorXd::Zero(nf_);
        for (const auto& g : C_.groups) {
            if (g.free_cols.empty()) continue;
            const VectorXd t = g.Bd.transpose() * lam.segment(g.row_begin, g.row_end - g.row_begin);
            for (std::size_t k = 0; k < g.free_cols.size(); ++k) out(g.free_cols[k]) += t(static_cast<Index>(k));
        }
        return out;
    }

    void build_scatter() {
        scatter_.resize(C_.blocks.size());
        for (std::size_t k = 0; k < C_.blocks.size(); ++k) {
            const auto& blk = C_.blocks[k];
            auto& list = scatter_[k];
            list.reserve(blk.entries.size());
            for (std::size_t b = 0; b < blk.rows.size(); ++b) {
                for (auto e = blk.start[b]; e < blk.start[b + 1]; ++e) {
                    const auto& en = blk.entries[e];
                    const auto lo = std::min(en.r, en.c);
                    const auto hi = std::max(en.r, en.c);
                    list.push_back({static_cast<std::uint32_t>(lo + hi * blk.dim), static_cast<std::uint32_t>(b),
                                    lo == hi ? en.v : 2.0 * en.v});
                }
            }
            std::sort(list.begin(), list.end(), [](const Scatter& x, const Scatter& y) { return x.pos < y.pos; });
        }
    }

    // M_ij = <A_i, W A_j W> restricted to one row group. W A_a W is symmetric,
    // so only its upper triangle is formed: [U V] [V U]^T with U = v W_r, V = W_c.
    // Rows are processed in batches whose upper triangles are interleaved, so
    // each scatter entry updates a whole batch at once.
    void form_M(const RowGroup& g, MatrixXd& M) const {
        constexpr Index batch = 8;
        using BatchRows = Eigen::Matrix<double, Eigen::Dynamic, batch, Eigen::RowMajor>;
        const Index mg = g.row_end - g.row_begin;
        M.setZero(mg, mg);
        MatrixXd L, R;
        std::array<MatrixXd, batch> G;
        BatchRows packed, acc;
        MatrixXd sums;
        for (auto k : g.blocks) {
            const auto& blk = C_.blocks[k];
            const auto& Wk = W_[k];
            const auto& list = scatter_[k];
            const auto n = static_cast<Index>(blk.dim);
            const auto nrows = static_cast<Index>(blk.rows.size());
            for (auto& Gt : G) Gt.resize(n, n);
            packed.resize(n * n, batch);
            acc.resize(nrows, batch);
            for (Index a0 = 0; a0 < nrows; a0 += batch) {
                const Index nb = std::min(batch, nrows - a0);
                for (Index t = 0; t < nb; ++t) {
                    const auto a = static_cast<std::size_t>(a0 + t);
                    const auto p = static_cast<Index>(blk.start[a + 1] - blk.start[a]);
                    L.resize(n, 2 * p);
                    R.resize(n, 2 * p);
                    Index q = 0;
                    for (auto e = blk.start[a]; e < blk.start[a + 1]; ++e, ++q) {
                        const auto& en = blk.entries[e];
                        const double h = en.r == en.c ? 0.5 * en.v : en.v;
                        L.col(q) = h * Wk.col(en.r);
                        L.col(p + q) = Wk.col(en.c);
                        R.col(q) = Wk.col(en.c);
                        R.col(p + q) = h * Wk.col(en.r);
                    }
                    G[static_cast<std::size_t>(t)].triangularView<Eigen::Upper>() = L * R.transpose();
                }
                for (Index c = 0; c < n; ++c) {
                    for (Index r = 0; r <= c; ++r) {
                        double* out = packed.data() + (r + c * n) * batch;
                        for (Index t = 0; t < nb; ++t) out[t] = G[static_cast<std::size_t>(t)](r, c);
                    }
                }
                acc.setZero();
                for (const auto& sc : list) acc.row(sc.row) += sc.coef * packed.row(sc.pos);
                sums = acc.leftCols(nb);
                for (Index t = 0; t < nb; ++t) {
                    const Index i = blk.rows[static_cast<std::size_t>(a0 + t)] - g.row_begin;
                    auto col = M.col(i);
                    const auto* s = sums.col(t).data();
                    for (Index b = 0; b < nrows; ++b) col(blk.rows[static_cast<std::size_t>(b)] - g.row_begin) += s[b];
                }
            }
        }
    }

    // Factor every M_g = L_g L_g^T and the stacked W = L^{-1} B = Q R.
    // Working with R instead of S = W^T W avoids squaring cond(W).
    bool factorize() {
        const std::size_t ng = C_.groups.size();
        Mfac_.resize(ng);
        Mraw_.resize(ng);
        if (nf_ > 0) W_free_.setZero(m_, nf_);
        for (std::size_t gi = 0; gi < ng; ++gi) {
            const auto& g = C_.groups[gi];
            MatrixXd M;
            auto t0 = Clock::now();
            form_M(g, M);
            phase_[0] += seconds_since(t0);
            t0 = Clock::now();
            const double maxdiag = M.rows() ? M.diagonal().cwiseAbs().maxCoeff() : 0.0;
            double reg = 0.0;
            Eigen::LLT<MatrixXd> llt;
            for (int attempt = 0; attempt < 8; ++attempt) {
                MatrixXd Mr = M;
                Mr.diagonal().array() += reg;
                llt.compute(Mr);
                if (llt.info() == Eigen::Success) break;
                reg = reg == 0.0 ? std::max(1e-14 * maxdiag, 1e-13) : reg * 100.0;
            }
            if (llt.info() != Eigen::Success) return false;
            Mfac_[gi] = std::move(llt);
            Mraw_[gi] = std::move(M);
            phase_[1] += seconds_since(t0);
            t0 = Clock::now();
            if (!g.free_cols.empty()) {
                const MatrixXd W = Mfac_[gi].matrixL().solve(g.Bd);
                for (std::size_t a = 0; a < g.free_cols.size(); ++a) {
                    W_free_.block(g.row_begin, g.free_cols[a], W.rows(), 1) = W.col(static_cast<Index>(a));
                }
            }
            phase_[2] += seconds_since(t0);
        }
        if (nf_ > 0) {
            const auto t0 = Clock::now();
            qr_.compute(W_free_);
            phase_[3] += seconds_since(t0);
            R_ = qr_.matrixQR().topRows(nf_).triangularView<Eigen::Upper>();
            const double rmax = R_.diagonal().cwiseAbs().maxCoeff();
            if (!(rmax > 0.0)) return false;
            for (Index i = 0; i < nf_; ++i) {
                if (std::abs(R_(i, i)) < 1e-13 * rmax) R_(i, i) = R_(i, i) < 0.0 ? -1e-13 * rmax : 1e-13 * rmax;
            }
        }
        return true;
    }

    VectorXd solve_L(const VectorXd& h) const {
        VectorXd out(m_);
        for (std::size_t gi = 0; gi < C_.groups.size(); ++gi) {
            const auto& g = C_.groups[gi];
            const Index n = g.row_end - g.row_begin;
            out.segment(g.row_begin, n) = Mfac_[gi].matrixL().solve(h.segment(g.row_begin, n));
        }
        return out;
    }

    VectorXd solve_Lt(const VectorXd& u) const {
        VectorXd out(m_);
        for (std::size_t gi = 0; gi < C_.groups.size(); ++gi) {
            const auto& g = C_.groups[gi];
            const Index n = g.row_end - g.row_begin;
            out.segment(g.row_begin, n) = Mfac_[gi].matrixU().solve(u.segment(g.row_begin, n));
        }
        return out;
    }

    VectorXd apply_M(const VectorXd& v) const {
        VectorXd out(m_);
        for (std::size_t gi = 0; gi < C_.groups.size(); ++gi) {
            const auto& g = C_.groups[gi];
            const Index n = g.row_end - g.row_begin;
            out.segment(g.row_begin, n) = Mraw_[gi] * v.segment(g.row_begin, n);
        }
        return out;
    }

    // u = L^T dl: u + W dy = L^{-1} h, W^T u = rf.
    void solve_kkt_once(const VectorXd& h, const VectorXd& rf, VectorXd& dl, VectorXd& dy) const {
        const VectorXd g = solve_L(h);
        if (nf_ > 0) {
            const VectorXd qg = (qr_.householderQ().transpose() * g).head(nf_);
            const VectorXd z = R_.transpose().triangularView<Eigen::Lower>().solve(rf);
            dy = R_.triangularView<Eigen::Upper>().solve(qg - z);
            dl = solve_Lt(g - W_free_ * dy);
        } else {
            dy.resize(0);
            dl = solve_Lt(g);
        }
    }

    // Solve [M B; B^T 0][dl; dy] = [h; rf] with refinement sweeps
    // against the unregularized system.
    void solve_kkt(const VectorXd& h, const VectorXd& rf, VectorXd& dl, VectorXd& dy) const {
        solve_kkt_once(h, rf, dl, dy);
        for (int sweep = 0; sweep < 4; ++sweep) {
            VectorXd r1 = h - apply_M(dl);
            VectorXd r2 = rf;
            if (nf_ > 0) {
                r1 -= apply_B(dy);
                r2 -= apply_Bt(dl);
            }
            VectorXd cl, cy;
            solve_kkt_once(r1, r2, cl, cy);
            dl += cl;
            if (nf_ > 0) dy += cy;
        }
    }

    // Largest a with diag(d) + a*dS PSD.
    static double scaled_step(const VectorXd& d, const MatrixXd& dS) {
        if (d.size() == 0) return std::numeric_limits<double>::infinity();
        const VectorXd s = d.cwiseSqrt().cwiseInverse();
        MatrixXd R = s.asDiagonal() * dS * s.asDiagonal();
        symmetrize(R);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(R, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues()(0);
        return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
    }

    // L_Z^T L_X = U S V^T gives G = L_X V S^{-1/2} and d = diag(S).
    bool nt_scaling(std::size_t k) {
        const Index n = X_[k].rows();
        if (n == 0) {
            G_[k].resize(0, 0);
            W_[k].resize(0, 0);
            d_[k].resize(0);
            return true;
        }
        Eigen::LLT<MatrixXd> lx(X_[k]), lz(Z_[k]);
        if (lx.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
        const MatrixXd Lx = lx.matrixL(), Lz = lz.matrixL();
        Eigen::BDCSVD<MatrixXd> svd(Lz.transpose() * Lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
        d_[k] = svd.singularValues();
        if (!(d_[k].minCoeff() > 0.0)) return false;
        G_[k] = Lx * svd.matrixV() * d_[k].cwiseSqrt().cwiseInverse().asDiagonal();
        W_[k] = G_[k] * G_[k].transpose();
        return true;
    }

    void polish();
    void factor_row_gram();
    std::vector<MatrixXd> min_norm_correction(const VectorXd& r);
    struct Correction {
        std::vector<MatrixXd> dX;
        VectorXd dy;
    };
    Correction joint_correction(const VectorXd& r, double omega);
    bool try_correction(const Correction& corr);

    Component& C_;
    const SolverOptions& opt_;
    Index m_ = 0;
    Index nf_ = 0;
    double n_total_ = 0.0;
    std::vector<MatrixXd> X_, Z_;
    // NT scaling per block: W = G G^T, G^{-1} X G^{-T} = G^T Z G = diag(d).
    std::vector<MatrixXd> G_, W_;
    std::vector<std::vector<Scatter>> scatter_;
    std::vector<VectorXd> d_;
    VectorXd y_, lam_;
    std::vector<Eigen::LLT<MatrixXd>> Mfac_;
    std::vector<MatrixXd> Mraw_;
    MatrixXd W_free_, R_;
    // Seconds spent in: forming M, factoring M, forming W, QR of W.
    std::array<double, 4> phase_{};
    Eigen::HouseholderQR<MatrixXd> qr_;
    std::vector<Eigen::LLT<MatrixXd>> gram_;
};

// Cholesky factor of A_g A_g^T for every row group, built once.
void ComponentSolver::factor_row_gram() {
    if (!gram_.empty()) return;
    gram_.resize(C_.groups.size());
    for (std::size_t gi = 0; gi < C_.groups.size(); ++gi) {
        const auto& g = C_.groups[gi];
        if (g.blocks.empty()) continue;
        const Index mg = g.row_end - g.row_begin;
        MatrixXd G = MatrixXd::Zero(mg, mg);
        for (auto k : g.blocks) {
            const auto& blk = C_.blocks[k];
            struct PE {
                std::uint64_t pos;
                Index row;
                double v;
            };
            std::vector<PE> list;
            list.reserve(blk.entries.size());
            for (std::size_t a = 0; a < blk.rows.size(); ++a) {
                for (auto e = blk.start[a]; e < blk.start[a + 1]; ++e) {
                    const auto& en = blk.entries[e];
                    list.push_back({static_cast<std::uint64_t>(en.r) * blk.dim + en.c, blk.rows[a] - g.row_begin, en.v});
                }
            }
            std::sort(list.begin(), list.end(), [](const PE& x, const PE& y) { return x.pos < y.pos; });
            for (std::size_t s = 0; s < list.size();) {
                std::size_t e = s;
                while (e < list.size() && list[e].pos == list[s].pos) ++e;
                const auto r0 = list[s].pos / blk.dim, c0 = list[s].pos % blk.dim;
                const double w = r0 == c0 ? 1.0 : 2.0;
                for (std::size_t a = s; a < e; ++a) {
                    for (std::size_t b = s; b < e; ++b) G(list[a].row, list[b].row) += w * list[a].v * list[b].v;
                }
                s = e;
            }
        }
        G.diagonal().array() += 1e-14 * std::max(1.0, G.diagonal().maxCoeff());
        gram_[gi].compute(G);
    }
}

// Minimum-norm D with A(D) = r, restricted to rows that touch a PSD block.
std::vector<MatrixXd> ComponentSolver::min_norm_correction(const VectorXd& r) {
    factor_row_gram();
    VectorXd eta = VectorXd::Zero(m_);
    for (std::size_t gi = 0; gi < C_.groups.size(); ++gi) {
        const auto& g = C_.groups[gi];
        if (g.blocks.empty() || gram_[gi].info() != Eigen::Success) continue;
        const Index mg = g.row_end - g.row_begin;
        eta.segment(g.row_begin, mg) = gram_[gi].solve(r.segment(g.row_begin, mg));
    }
    std::vector<MatrixXd> D;
    apply_At(eta, D);
    return D;
}

// Minimum-norm correction of (X, y) onto {A(X) + B y = b}, with free
// variables weighted by `omega`: dX = A^*(eta), dy = omega B^T eta and
// (A A^* + omega B B^T) eta = r, solved by Woodbury on the free columns.
ComponentSolver::Correction ComponentSolver::joint_correction(const VectorXd& r, double omega) {
    factor_row_gram();
    VectorXd u = VectorXd::Zero(m_);
    MatrixXd K = MatrixXd::Identity(nf_, nf_) / omega;
    VectorXd rhs = VectorXd::Zero(nf_);
    std::vector<MatrixXd> T(C_.groups.size());
    for (std::size_t gi = 0; gi < C_.groups.size(); ++gi) {
        const auto& g = C_.groups[gi];
        if (g.blocks.empty() || gram_[gi].info() != Eigen::Success) continue;
        const Index mg = g.row_end - g.row_begin;
        u.segment(g.row_begin, mg) = gram_[gi].solve(r.segment(g.row_begin, mg));
        if (g.free_cols.empty()) continue;
        T[gi] = gram_[gi].matrixL().solve(g.Bd);
        const MatrixXd TtT = T[gi].transpose() * T[gi];
        const VectorXd Btu = g.Bd.transpose() * u.segment(g.row_begin, mg);
        for (std::size_t a = 0; a < g.free_cols.size(); ++a) {
            rhs(g.free_cols[a]) += Btu(static_cast<Index>(a));
            for (std::size_t c = 0; c < g.free_cols.size(); ++c) {
                K(g.free_cols[a], g.free_cols[c]) += TtT(static_cast<Index>(a), static_cast<Index>(c));
            }
        }
    }
    const VectorXd z = nf_ > 0 ? VectorXd(K.ldlt().solve(rhs)) : VectorXd();
    VectorXd eta = u;
    for (std::size_t gi = 0; gi < C_.groups.size(); ++gi) {
        const auto& g = C_.groups[gi];
        if (g.blocks.empty() || g.free_cols.empty() || gram_[gi].info() != Eigen::Success) continue;
        VectorXd zg(static_cast<Index>(g.free_cols.size()));
        for (std::size_t a = 0; a < g.free_cols.size(); ++a) zg(static_cast<Index>(a)) = z(g.free_cols[a]);
        eta.segment(g.row_begin, g.row_end - g.row_begin) -= gram_[gi].solve(g.Bd * zg);
    }
    Correction corr;
    apply_At(eta, corr.dX);
    corr.dy = nf_ > 0 ? VectorXd(omega * apply_Bt(eta)) : VectorXd();
    return corr;
}

// Applies a correction, clips negative eigenvalues so every block stays PSD,
// and keeps the result only if the equality residual shrank.
bool ComponentSolver::try_correction(const Correction& corr) {
    const double before = (C_.b - apply_A(X_) - apply_B(y_)).lpNorm<Eigen::Infinity>();
    std::vector<MatrixXd> candidate = X_;
    for (std::size_t k = 0; k < X_.size(); ++k) {
        candidate[k] += corr.dX[k];
        if (candidate[k].rows() == 0) continue;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(candidate[k]);
        if (es.eigenvalues()(0) >= 0.0) continue;
        const VectorXd lam = es.eigenvalues().cwiseMax(0.0);
        candidate[k] = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    }
    const VectorXd y = corr.dy.size() ? VectorXd(y_ + corr.dy) : y_;
    const double after = (C_.b - apply_A(candidate) - apply_B(y)).lpNorm<Eigen::Infinity>();
    if (!(after < before)) return false;
    X_ = std::move(candidate);
    y_ = y;
    return true;
}

void ComponentSolver::polish() {
    for (int pass = 0; pass < 4; ++pass) {
        const VectorXd r = C_.b - apply_A(X_) - apply_B(y_);
        if (r.size() == 0 || r.lpNorm<Eigen::Infinity>() == 0.0) return;
        if (!try_correction(joint_correction(r, 1e6))) return;
    }
}

ComponentResult ComponentSolver::run() {
    ComponentResult res;
    const std::size_t nb = C_.blocks.size();
    const double b_scale = std::max(1.0, C_.b.norm());
    const double c_scale = std::max(1.0, C_.c.norm());
    C_.b /= b_scale;
    C_.c /= c_scale;

    X_.resize(nb);
    Z_.resize(nb);
    G_.resize(nb);
    W_.resize(nb);
    d_.resize(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        const auto n = static_cast<Index>(C_.blocks[k].dim);
        double max_ratio = 0.0, max_norm = 0.0;
        const auto& blk = C_.blocks[k];
        for (std::size_t a = 0; a < blk.rows.size(); ++a) {
            double nrm = 0.0;
            for (auto e = blk.start[a]; e < blk.start[a + 1]; ++e) {
                nrm += (blk.entries[e].r == blk.entries[e].c ? 1.0 : 2.0) * blk.entries[e].v * blk.entries[e].v;
            }
            nrm = std::sqrt(nrm);
            max_ratio = std::max(max_ratio, (1.0 + std::abs(C_.b(blk.rows[a]))) / (1.0 + nrm));
            max_norm = std::max(max_norm, nrm);
        }
        const double sq = std::sqrt(static_cast<double>(n));
        const double xi = std::max({10.0, sq, static_cast<double>(n) * max_ratio});
        const double eta = std::max({10.0, sq, max_norm});
        X_[k] = xi * MatrixXd::Identity(n, n);
        Z_[k] = eta * MatrixXd::Identity(n, n);
    }
    y_ = VectorXd::Zero(nf_);
    lam_ = VectorXd::Zero(m_);

    const double tol = opt_.feasibility_tol;
    double best_merit = std::numeric_limits<double>::infinity();
    std::vector<MatrixXd> bestX;
    VectorXd best_y;
    double best_dobj = 0.0;
    double best_pinf = 1.0, best_dinf = 1.0, best_gap = 1.0;
    int stall = 0;
    int since_progress = 0;
    auto finish = [&](SolveStatus st, std::string msg) {
        res.status = st;
        res.message = std::move(msg);
    };

    for (int it = 0;; ++it) {
        res.iterations = it;
        const VectorXd rp = C_.b - apply_A(X_) - apply_B(y_);
        std::vector<MatrixXd> Rd;
        apply_At(lam_, Rd);
        double rd_norm2 = 0.0;
        for (std::size_t k = 0; k < nb; ++k) {
            Rd[k] = -Rd[k] - Z_[k];
            rd_norm2 += Rd[k].squaredNorm();
        }
        const VectorXd rf = C_.c - apply_Bt(lam_);
        double xz = 0.0;
        for (std::size_t k = 0; k < nb; ++k) xz += frob_dot(X_[k], Z_[k]);
        const double mu = n_total_ > 0 ? xz / n_total_ : 0.0;
        const double pobj = C_.c.dot(y_);
        const double dobj = C_.b.dot(lam_);
        const double pinf = rp.norm() / (1.0 + C_.b.norm());
        const double dinf = (std::sqrt(rd_norm2) + rf.norm()) / (1.0 + C_.c.norm());
        const double gap = std::max(std::abs(pobj - dobj), xz) / (1.0 + std::abs(pobj) + std::abs(dobj));

        if (opt_.verbose) {
            std::fprintf(stderr, "  it %3d  pobj % .8e  dobj % .8e  pinf %.2e  dinf %.2e  gap %.2e  mu %.2e\n", it,
                         pobj * b_scale * c_scale, dobj * b_scale * c_scale, pinf, dinf, gap, mu);
        }
        const double merit = std::max({pinf, dinf, gap});
        since_progress = merit < 0.95 * best_merit ? 0 : since_progress + 1;
        if (merit < best_merit) {
            best_merit = merit;
            bestX = X_;
            best_y = y_;
            best_dobj = dobj;
            best_pinf = pinf;
            best_dinf = dinf;
            best_gap = gap;
        }
        if (pinf < tol && dinf < tol && gap < opt_.gap_tol) {
            finish(SolveStatus::optimal, "converged");
            break;
        }
        // Infeasibility certificates from diverging iterates.
        if (dobj > 0.0) {
            const double cert = (std::sqrt(rd_norm2) + (C_.c - rf).norm()) / dobj;
            if (cert < tol && dobj > 1e3) {
                finish(SolveStatus::infeasible, "primal infeasible: dual ray found");
                break;
            }
        }
        if (pobj < 0.0) {
            const double cert = (C_.b - rp).norm() / -pobj;
            if (cert < tol && -pobj > 1e3) {
                finish(SolveStatus::unbounded, "dual infeasible: primal ray found");
                break;
            }
        }
        const bool close = best_pinf < 1e3 * tol && best_dinf < 1e3 * tol && best_gap < 1e3 * opt_.gap_tol;
        if (since_progress >= (close ? 3 : 15)) {
            finish(SolveStatus::failed, "no progress");
            break;
        }
        if (it >= opt_.max_iterations) {
            finish(SolveStatus::failed, "iteration limit reached");
            break;
        }

        bool ok = true;
        for (std::size_t k = 0; k < nb && ok; ++k) ok = nt_scaling(k);
        if (!ok || !factorize()) {
            finish(SolveStatus::failed, "numerical breakdown in the Schur complement");
            break;
        }

        // Scaled space: dXs + dZs = Rc with D o Rc = sigma*mu*I - D^2 - corr.
        // Original space: dX = G dXs G^T, dZ = Rd - A^*(dl), dZs = G^T dZ G.
        struct Direction {
            std::vector<MatrixXd> dX, dZ, dXs, dZs;
            VectorXd dl, dy;
        };
        auto direction = [&](double sigma_mu, const std::vector<MatrixXd>* corr) {
            Direction D;
            std::vector<MatrixXd> Rc(nb), T(nb);
            for (std::size_t k = 0; k < nb; ++k) {
                const VectorXd& d = d_[k];
                const Index n = d.size();
                MatrixXd R = corr ? MatrixXd(-(*corr)[k]) : MatrixXd::Zero(n, n);
                R.diagonal().array() += sigma_mu - d.array().square();
                for (Index j = 0; j < n; ++j) {
                    for (Index i = 0; i < n; ++i) R(i, j) *= 2.0 / (d(i) + d(j));
                }
                Rc[k] = std::move(R);
                T[k] = G_[k] * Rc[k] * G_[k].transpose() - W_[k] * Rd[k] * W_[k];
                symmetrize(T[k]);
            }
            const VectorXd h = rp - apply_A(T);
            solve_kkt(h, rf, D.dl, D.dy);
            apply_At(D.dl, D.dZ);
            D.dX.resize(nb);
            D.dXs.resize(nb);
            D.dZs.resize(nb);
            for (std::size_t k = 0; k < nb; ++k) {
                D.dZ[k] = Rd[k] - D.dZ[k];
                D.dZs[k] = G_[k].transpose() * D.dZ[k] * G_[k];
                symmetrize(D.dZs[k]);
                D.dXs[k] = Rc[k] - D.dZs[k];
                symmetrize(D.dXs[k]);
                D.dX[k] = G_[k] * D.dXs[k] * G_[k].transpose();
                symmetrize(D.dX[k]);
            }
            // Rounding in M leaves A(dX) + B dy - rp nonzero; remove it so
            // full steps keep primal feasibility.
            VectorXd e = rp - apply_A(D.dX);
            if (nf_ > 0) e -= apply_B(D.dy);
            const auto fix = min_norm_correction(e);
            for (std::size_t k = 0; k < nb; ++k) {
                if (fix[k].rows() == 0) continue;
                D.dX[k] += fix[k];
                const auto lu = G_[k].partialPivLu();
                D.dXs[k] += lu.solve(lu.solve(fix[k]).transpose().eval());
                symmetrize(D.dXs[k]);
            }
            return D;
        };
        auto steps = [&](const Direction& D) {
            double ap = std::numeric_limits<double>::infinity(), ad = ap;
            for (std::size_t k = 0; k < nb; ++k) {
                ap = std::min(ap, scaled_step(d_[k], D.dXs[k]));
                ad = std::min(ad, scaled_step(d_[k], D.dZs[k]));
            }
            return std::pair{ap, ad};
        };

        const Direction pred = direction(0.0, nullptr);
        auto [apm, adm] = steps(pred);
        const double ap_aff = std::min(1.0, apm), ad_aff = std::min(1.0, adm);
        double sigma = 0.0;
        if (n_total_ > 0) {
            double xz_aff = 0.0;
            for (std::size_t k = 0; k < nb; ++k) {
                MatrixXd Xa = ap_aff * pred.dXs[k], Za = ad_aff * pred.dZs[k];
                Xa.diagonal() += d_[k];
                Za.diagonal() += d_[k];
                xz_aff += frob_dot(Xa, Za);
            }
            const double ratio = std::max(0.0, xz_aff / xz);
            const double expon = std::max(1.0, 3.0 * std::pow(std::min(ap_aff, ad_aff), 2));
            sigma = std::min(1.0, std::pow(ratio, expon));
        }
        std::vector<MatrixXd> corr(nb);
        for (std::size_t k = 0; k < nb; ++k) {
            corr[k] = pred.dXs[k] * pred.dZs[k];
            symmetrize(corr[k]);
        }
        const Direction full = direction(sigma * mu, &corr);
        const auto& dX = full.dX;
        const auto& dZ = full.dZ;
        const auto& dl = full.dl;
        const auto& dy = full.dy;
        auto [apx, adx] = steps(full);
        const double gamma = 0.9 + 0.09 * std::min(ap_aff, ad_aff);
        const double ap = std::min(1.0, gamma * apx);
        const double ad = std::min(1.0, gamma * adx);

        for (std::size_t k = 0; k < nb; ++k) {
            X_[k] += ap * dX[k];
            Z_[k] += ad * dZ[k];
        }
        if (nf_ > 0) y_ += ap * dy;
        lam_ += ad * dl;

        if (opt_.verbose) std::fprintf(stderr, "          sigma %.2e  alpha_p %.3e  alpha_d %.3e\n", sigma, ap, ad);
        stall = (ap < 1e-8 && ad < 1e-8) ? stall + 1 : 0;
        if (stall >= 3) {
            finish(SolveStatus::failed, "step lengths collapsed");
            break;
        }
    }

    if (res.status != SolveStatus::optimal && res.status != SolveStatus::infeasible &&
        res.status != SolveStatus::unbounded && !bestX.empty()) {
        // Fall back to the best iterate seen.
        X_ = bestX;
        y_ = best_y;
        const double loose = 1e3 * std::max(opt_.feasibility_tol, opt_.gap_tol);
        if (best_pinf < loose && best_dinf < loose && best_gap < loose) {
            res.status = SolveStatus::near_optimal;
            res.message += "; best iterate within relaxed tolerance";
        }
        res.dual_objective = best_dobj * b_scale * c_scale;
    } else {
        res.dual_objective = C_.b.dot(lam_) * b_scale * c_scale;
    }
    if (opt_.polish && (res.status == SolveStatus::optimal || res.status == SolveStatus::near_optimal)) {
        polish();
    }

    res.X.resize(nb);
    for (std::size_t k = 0; k < nb; ++k) res.X[k] = X_[k] * b_scale;
    res.y = y_ * b_scale;
    C_.b *= b_scale;
    C_.c *= c_scale;
    if (opt_.verbose) {
        std::fprintf(stderr, "  time form_M %.2fs  chol_M %.2fs  W %.2fs  qr %.2fs  (rows %ld free %ld)\n", phase_[0],
                     phase_[1], phase_[2], phase_[3], static_cast<long>(m_), static_cast<long>(nf_));
    }
    return res;
}

int severity(SolveStatus s) {
    switch (s) {
    case SolveStatus::optimal: return 0;
    case SolveStatus::near_optimal: return 1;
    case SolveStatus::failed: return 2;
    case SolveStatus::unbounded: return 3;
    case SolveStatus::infeasible: return 4;
    }
    return 2;
}

} // namespace

RawSolution interior_point(const ConicProblem& problem, const SolverOptions& options) {
    RawSolution raw;
    raw.status = SolveStatus::optimal;
    raw.free_values.assign(problem.n_free, 0.0);
    for (auto n : problem.psd_dims) raw.blocks.push_back(MatrixXd::Zero(n, n));

    for (const auto& row : problem.rows) {
        if (row.free.empty() && row.psd.empty() && row.rhs != 0.0) {
            raw.status = SolveStatus::infeasible;
            raw.message = "empty equality row with nonzero right-hand side";
            return raw;
        }
    }

    std::vector<std::size_t> orphans;
    std::vector<Component> comps = decompose(problem, orphans);
    for (auto j : orphans) {
        for (const auto& e : problem.objective) {
            if (e.index == j && e.value != 0.0) {
                raw.status = SolveStatus::unbounded;
                raw.message = "free variable " + std::to_string(j) + " has a cost but appears in no constraint";
                return raw;
            }
        }
    }

    std::vector<ComponentResult> results(comps.size());
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned threads = options.threads == 0 ? hw : options.threads;
    if (threads <= 1 || comps.size() <= 1) {
        for (std::size_t i = 0; i < comps.size(); ++i) {
            if (options.verbose) std::fprintf(stderr, "component %zu/%zu\n", i + 1, comps.size());
            results[i] = ComponentSolver(comps[i], options).run();
        }
    } else {
        std::size_t next = 0;
        while (next < comps.size()) {
            std::vector<std::future<void>> batch;
            for (unsigned t = 0; t < threads && next < comps.size(); ++t, ++next) {
                batch.push_back(std::async(std::launch::async, [&, i = next] {
                    results[i] = ComponentSolver(comps[i], options).run();
                }));
            }
            for (auto& f : batch) f.get();
        }
    }

    std::string messages;
    double dual = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto& C = comps[i];
        const auto& r = results[i];
        if (severity(r.status) > severity(raw.status)) raw.status = r.status;
        raw.iterations = std::max(raw.iterations, r.iterations);
        dual += r.dual_objective;
        if (r.status != SolveStatus::optimal) {
            messages += "component " + std::to_string(i) + ": " + r.message + "; ";
        }
        for (std::size_t k = 0; k < C.blocks_global.size(); ++k) raw.blocks[C.blocks_global[k]] = r.X[k];
        for (std::size_t j = 0; j < C.free_global.size(); ++j) {
            raw.free_values[C.free_global[j]] = r.y(static_cast<Index>(j));
        }
    }
    raw.dual_objective = dual;
    raw.message = messages.empty() ? std::string("converged") : messages;
    return raw;
}

} // namespace roa::detail
