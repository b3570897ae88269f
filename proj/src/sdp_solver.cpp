#include "conicpf/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "conicpf/kernels.hpp"

namespace conicpf {

long RealConicProgram::scalar_variable_count() const {
    long total = lp_size;
    for (int n : block_sizes) total += static_cast<long>(n) * (n + 1) / 2;
    return total;
}

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::numerical_failure: return "numerical_failure";
    }
    return "?";
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const RealConicProgram& p) {
    const int nb = static_cast<int>(p.block_sizes.size());
    for (int n : p.block_sizes) {
        if (n <= 0) throw std::invalid_argument("conic block sizes must be positive");
    }
    if (p.lp_size < 0) throw std::invalid_argument("negative LP block size");
    if (!p.lp_cost.empty() && static_cast<int>(p.lp_cost.size()) != p.lp_size) {
        throw std::invalid_argument("LP cost length does not match the LP block");
    }
    auto check = [&](const BlockEntry& e) {
        if (e.block < 0 || e.block >= nb) throw std::invalid_argument("block index out of range");
        const int n = p.block_sizes[e.block];
        if (e.row < 0 || e.col >= n || e.row > e.col) throw std::invalid_argument("block entry out of range");
        if (!std::isfinite(e.value)) throw std::invalid_argument("non-finite conic data");
    };
    for (const auto& e : p.objective) check(e);
    for (const auto& c : p.constraints) {
        for (const auto& e : c.block_entries) check(e);
        for (const auto& e : c.lp_entries) {
            if (e.index < 0 || e.index >= p.lp_size) throw std::invalid_argument("LP index out of range");
        }
        if (!std::isfinite(c.rhs)) throw std::invalid_argument("non-finite right-hand side");
    }
    if (p.block_sizes.empty() && p.lp_size == 0) throw std::invalid_argument("program has no variables");
}

double inner(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

double inner(const std::vector<Mat>& a, const std::vector<Mat>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += inner(a[k], b[k]);
    return s;
}

double squared_norm(const std::vector<Mat>& a) {
    double s = 0.0;
    for (const auto& m : a) s += m.squaredNorm();
    return s;
}

Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

Vec apply_a(const SchurLayout& layout, const std::vector<Mat>& x, const Vec& x_lp) {
    Vec out(layout.m);
    for (int i = 0; i < layout.m; ++i) {
        double s = 0.0;
        for (const auto& piece : layout.pieces[i]) {
            const auto& xb = x[piece.block];
            for (const auto& e : piece.entries) s += e.value * xb(e.row, e.col);
        }
        for (const auto& e : layout.lp_rows[i]) s += e.value * x_lp[e.index];
        out[i] = s;
    }
    return out;
}

void apply_at(const SchurLayout& layout, const Vec& y, std::vector<Mat>& blocks, Vec& lp) {
    for (auto& b : blocks) b.setZero();
    lp.setZero();
    for (int i = 0; i < layout.m; ++i) {
        const double yi = y[i];
        if (yi == 0.0) continue;
        for (const auto& piece : layout.pieces[i]) {
            auto& mb = blocks[piece.block];
            for (const auto& e : piece.entries) mb(e.row, e.col) += yi * e.value;
        }
        for (const auto& e : layout.lp_rows[i]) lp[e.index] += yi * e.value;
    }
}

// Largest alpha with X + alpha dX PSD (unbounded -> inf).
double max_step_psd(const Mat& x, const Mat& dx) {
    Eigen::LLT<Mat> llt(x);
    if (llt.info() != Eigen::Success) return 0.0;
    const auto l = llt.matrixL();
    Mat a = l.solve(dx);
    Mat t = l.solve(a.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(t), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    return lmin < 0.0 ? -1.0 / lmin : kInf;
}

double max_step_lp(const Vec& x, const Vec& dx) {
    double alpha = kInf;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (dx[k] < 0.0) alpha = std::min(alpha, -x[k] / dx[k]);
    }
    return alpha;
}

struct Presolve {
    std::vector<int> kept;
    Vec row_norm;  // over all constraints
    bool infeasible = false;
    int dropped = 0;
    std::string message;
};

// Row norms in the trace inner product, plus detection of linearly dependent
// equalities through a Cholesky factorization of the Gram matrix that skips
// rows with a vanishing pivot.
Presolve presolve(const RealConicProgram& p) {
    const int m = p.constraint_count();
    Presolve out;
    out.row_norm = Vec::Zero(m);

    std::vector<long> offset(p.block_sizes.size() + 1, 0);
    for (std::size_t b = 0; b < p.block_sizes.size(); ++b) {
        const long n = p.block_sizes[b];
        offset[b + 1] = offset[b] + n * (n + 1) / 2;
    }
    const long n_var = offset.back() + p.lp_size;
    std::vector<Eigen::Triplet<double, long>> trip;
    for (int i = 0; i < m; ++i) {
        const auto& c = p.constraints[i];
        for (const auto& e : c.block_entries) {
            const long col = offset[e.block] + static_cast<long>(e.col) * (e.col + 1) / 2 + e.row;
            trip.emplace_back(i, col, e.row == e.col ? e.value : std::sqrt(2.0) * e.value);
        }
        for (const auto& e : c.lp_entries) trip.emplace_back(i, offset.back() + e.index, e.value);
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor, long> a(m, n_var);
    a.setFromTriplets(trip.begin(), trip.end());  // duplicates are summed
    for (int i = 0; i < m; ++i) out.row_norm[i] = a.row(i).norm();

    Vec b(m);
    for (int i = 0; i < m; ++i) b[i] = p.constraints[i].rhs;

    if (m > 2000) {
        // too large for the dense Gram check; only empty rows are screened
        for (int i = 0; i < m; ++i) {
            if (out.row_norm[i] == 0.0) {
                if (std::abs(b[i]) > 1e-12) {
                    out.infeasible = true;
                    out.message = "empty constraint with nonzero right-hand side";
                    return out;
                }
                ++out.dropped;
            } else {
                out.kept.push_back(i);
            }
        }
        return out;
    }

    Vec inv = Vec::Zero(m);
    for (int i = 0; i < m; ++i) inv[i] = out.row_norm[i] > 0.0 ? 1.0 / out.row_norm[i] : 0.0;
    Eigen::SparseMatrix<double, Eigen::RowMajor, long> an = inv.asDiagonal() * a;
    const Mat gram = Mat(an * an.transpose());
    const Vec bn = inv.asDiagonal() * b;

    Mat l = Mat::Zero(m, m);  // rows/cols indexed by position in `kept`
    for (int i = 0; i < m; ++i) {
        const int k = static_cast<int>(out.kept.size());
        Vec g(k);
        for (int r = 0; r < k; ++r) g[r] = gram(out.kept[r], i);
        Vec w = k > 0 ? Vec(l.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(g)) : Vec();
        const double d = gram(i, i) - w.squaredNorm();
        if (out.row_norm[i] > 0.0 && d > 1e-9) {
            l.row(k).head(k) = w.transpose();
            l(k, k) = std::sqrt(d);
            out.kept.push_back(i);
            continue;
        }
        // row i is a combination of kept rows; its right-hand side must agree
        double predicted = 0.0;
        if (k > 0) {
            const Vec coef = l.topLeftCorner(k, k).transpose().triangularView<Eigen::Upper>().solve(w);
            for (int r = 0; r < k; ++r) predicted += coef[r] * bn[out.kept[r]];
        }
        if (std::abs(bn[i] - predicted) > 1e-7 * std::max(1.0, std::abs(bn[i]))) {
            out.infeasible = true;
            out.message = "inconsistent linearly dependent equality constraints (row " + std::to_string(i) + ")";
            return out;
        }
        ++out.dropped;
    }
    return out;
}

// Factorization of the Schur matrix, dense or sparse depending on size.
class SchurSolver {
public:
    bool factor(const SchurRows& rows) {
        m_ = static_cast<int>(rows.rows.size());
        sparse_ = m_ > 3000;
        double max_diag = 1.0;
        for (int i = 0; i < m_; ++i) {
            if (!rows.rows[i].empty() && rows.rows[i].front().first == i) {
                max_diag = std::max(max_diag, rows.rows[i].front().second);
            }
        }
        for (double delta : {0.0, 1e-14, 1e-12, 1e-10, 1e-8}) {
            if (try_factor(rows, delta * max_diag)) return true;
        }
        return false;
    }

    Vec solve(const Vec& rhs) const { return sparse_ ? Vec(ldlt_.solve(rhs)) : Vec(llt_.solve(rhs)); }

private:
    bool try_factor(const SchurRows& rows, double shift) {
        if (!sparse_) {
            Mat dense = to_dense(rows);
            dense.diagonal().array() += shift;
            llt_.compute(dense);
            return llt_.info() == Eigen::Success;
        }
        std::vector<Eigen::Triplet<double>> trip;
        for (int i = 0; i < m_; ++i) {
            for (const auto& [j, v] : rows.rows[i]) trip.emplace_back(i, j, v);
            trip.emplace_back(i, i, shift);
        }
        Eigen::SparseMatrix<double> s(m_, m_);
        s.setFromTriplets(trip.begin(), trip.end());
        ldlt_.compute(s);
        if (ldlt_.info() != Eigen::Success) return false;
        return (ldlt_.vectorD().array() > 0.0).all();
    }

    int m_ = 0;
    bool sparse_ = false;
    Eigen::LLT<Mat> llt_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper> ldlt_;
};

struct Direction {
    std::vector<Mat> dx, ds;
    Vec dx_lp, ds_lp, dy;
};

}  // namespace

RealSolution solve_real(const RealConicProgram& program, const SolverOptions& options) {
    validate(program);
    RealSolution sol;
    const int nb = static_cast<int>(program.block_sizes.size());
    const int n_lp = program.lp_size;
    const int m_all = program.constraint_count();

    Presolve pre = presolve(program);
    if (pre.infeasible) {
        sol.status = SolveStatus::infeasible;
        sol.message = pre.message;
        return sol;
    }

    // Scaled copy: kept rows normalized, then b and C scaled to unit size.
    RealConicProgram work;
    work.block_sizes = program.block_sizes;
    work.lp_size = n_lp;
    const int m = static_cast<int>(pre.kept.size());
    Vec b(m);
    for (int r = 0; r < m; ++r) {
        const int i = pre.kept[r];
        const double inv = 1.0 / pre.row_norm[i];
        RealConstraint c = program.constraints[i];
        for (auto& e : c.block_entries) e.value *= inv;
        for (auto& e : c.lp_entries) e.value *= inv;
        c.rhs *= inv;
        b[r] = c.rhs;
        work.constraints.push_back(std::move(c));
    }
    std::vector<Mat> cmat(nb);
    for (int k = 0; k < nb; ++k) cmat[k] = Mat::Zero(program.block_sizes[k], program.block_sizes[k]);
    for (const auto& e : program.objective) {
        cmat[e.block](e.row, e.col) += e.value;
        if (e.row != e.col) cmat[e.block](e.col, e.row) += e.value;
    }
    Vec c_lp = Vec::Zero(n_lp);
    for (int k = 0; k < n_lp && !program.lp_cost.empty(); ++k) c_lp[k] = program.lp_cost[k];

    const double b_scale = std::max(1.0, b.norm());
    const double c_scale = std::max(1.0, std::sqrt(squared_norm(cmat) + c_lp.squaredNorm()));
    b /= b_scale;
    for (auto& c : cmat) c /= c_scale;
    c_lp /= c_scale;

    const SchurLayout layout = make_schur_layout(work);
    const double b_norm = b.norm();
    const double c_norm = std::sqrt(squared_norm(cmat) + c_lp.squaredNorm());
    const double unit = 1.0 / (b_scale * c_scale);

    // Starting point: scaled identities sized from the data.
    std::vector<double> a_block_norm(nb, 0.0);
    double a_lp_norm = 0.0;
    for (int i = 0; i < m; ++i) {
        for (const auto& piece : layout.pieces[i]) {
            double s = 0.0;
            for (const auto& e : piece.entries) s += e.value * e.value;
            a_block_norm[piece.block] = std::max(a_block_norm[piece.block], std::sqrt(s));
        }
        double s = 0.0;
        for (const auto& e : layout.lp_rows[i]) s += e.value * e.value;
        a_lp_norm = std::max(a_lp_norm, std::sqrt(s));
    }
    const double b_max = b.size() > 0 ? b.cwiseAbs().maxCoeff() : 0.0;
    std::vector<Mat> x(nb), s(nb), z(nb);
    for (int k = 0; k < nb; ++k) {
        const double n = program.block_sizes[k];
        const double xi = std::max({10.0, std::sqrt(n), n * (1.0 + b_max) / (1.0 + a_block_norm[k])});
        const double eta = std::max({10.0, std::sqrt(n), cmat[k].norm(), a_block_norm[k]});
        x[k] = xi * Mat::Identity(program.block_sizes[k], program.block_sizes[k]);
        s[k] = eta * Mat::Identity(program.block_sizes[k], program.block_sizes[k]);
    }
    const double xi_lp = std::max({10.0, std::sqrt(double(n_lp)), (1.0 + b_max) / (1.0 + a_lp_norm)});
    const double eta_lp = std::max({10.0, std::sqrt(double(n_lp)), c_lp.norm(), a_lp_norm});
    Vec x_lp = Vec::Constant(n_lp, xi_lp);
    Vec s_lp = Vec::Constant(n_lp, eta_lp);
    Vec y = Vec::Zero(m);

    double total_dim = n_lp;
    for (int n : program.block_sizes) total_dim += n;

    std::vector<Mat> rd(nb), aty(nb);
    for (int k = 0; k < nb; ++k) aty[k] = Mat::Zero(program.block_sizes[k], program.block_sizes[k]);
    Vec aty_lp(n_lp), rd_lp(n_lp);

    SchurSolver schur;
    Direction pred, corr;
    sol.status = SolveStatus::numerical_failure;
    sol.message = "iteration limit reached";
    double best_err = kInf;
    int stalled = 0;
    // best iterate seen, restored if the run ends without converging
    struct Snapshot {
        std::vector<Mat> x, s;
        Vec x_lp, s_lp, y;
        double err = kInf;
    } best;
    double last_err = kInf;
    int it = 0;
    for (; it <= options.max_iterations; ++it) {
        const Vec ax = apply_a(layout, x, x_lp);
        const Vec rp = b - ax;
        apply_at(layout, y, aty, aty_lp);
        for (int k = 0; k < nb; ++k) rd[k] = cmat[k] - aty[k] - s[k];
        rd_lp = c_lp - aty_lp - s_lp;

        const double pobj = inner(cmat, x) + c_lp.dot(x_lp);
        const double dobj = b.dot(y);
        const double mu = (inner(x, s) + x_lp.dot(s_lp)) / total_dim;
        const double pinf = rp.norm() / (1.0 + b_norm);
        const double rd_norm = std::sqrt(squared_norm(rd) + rd_lp.squaredNorm());
        const double dinf = rd_norm / (1.0 + c_norm);
        // relative to objectives in the original units, so a large c_scale cannot hide the gap
        const double gap = std::abs(pobj - dobj) / (unit + std::abs(pobj) + std::abs(dobj));
        const double err = std::max({pinf, dinf, gap});
        last_err = err;
        if (err < best.err) best = {x, s, x_lp, s_lp, y, err};
        if (options.verbose) {
            std::fprintf(stderr, "%3d  pobj %+.8e  dobj %+.8e  pinf %.2e  dinf %.2e  gap %.2e  mu %.2e\n", it,
                         pobj, dobj, pinf, dinf, gap, mu);
        }
        if (err <= options.tol) {
            sol.status = SolveStatus::optimal;
            sol.message = "converged";
            break;
        }
        // infeasibility certificates: y with b^T y > 0 and A^T y + S ~ 0, or X with <C,X> < 0 and A(X) ~ 0
        if (dobj > 0.0) {
            double atys = 0.0;
            for (int k = 0; k < nb; ++k) atys += (aty[k] + s[k]).squaredNorm();
            atys = std::sqrt(atys + (aty_lp + s_lp).squaredNorm());
            if (atys / dobj <= 1e-8) {
                sol.status = SolveStatus::infeasible;
                sol.message = "primal infeasibility certificate found";
                break;
            }
        }
        if (pobj < 0.0 && ax.norm() / -pobj <= 1e-8) {
            sol.status = SolveStatus::unbounded;
            sol.message = "dual infeasibility certificate found";
            break;
        }
        if (it == options.max_iterations) break;

        if (err < best_err * 0.999) {
            best_err = err;
            stalled = 0;
        } else if (++stalled > 15) {
            sol.message = "progress stalled";
            break;
        }

        bool ok = true;
        for (int k = 0; k < nb && ok; ++k) {
            Eigen::LLT<Mat> llt(s[k]);
            if (llt.info() != Eigen::Success) ok = false;
            else z[k] = llt.solve(Mat::Identity(s[k].rows(), s[k].cols()));
        }
        if (!ok) {
            sol.message = "dual slack lost definiteness";
            break;
        }
        const Vec z_lp = s_lp.cwiseInverse();
        const Vec d_lp = x_lp.cwiseProduct(z_lp);

        const SchurRows rows = assemble_schur(layout, x, z, d_lp, options.policy);
        if (!schur.factor(rows)) {
            sol.message = "Schur complement factorization failed";
            break;
        }

        // g: target for dX given the centering blocks; returns direction
        auto direction = [&](const std::vector<Mat>& g, const Vec& g_lp, Direction& dir) {
            std::vector<Mat> t(nb);
            for (int k = 0; k < nb; ++k) t[k] = g[k] - x[k] * rd[k] * z[k];
            const Vec t_lp = g_lp - d_lp.cwiseProduct(rd_lp);
            const Vec h = rp - apply_a(layout, t, t_lp);
            dir.dy = schur.solve(h);
            dir.ds.resize(nb);
            dir.dx.resize(nb);
            std::vector<Mat> atdy(nb);
            for (int k = 0; k < nb; ++k) atdy[k] = Mat::Zero(s[k].rows(), s[k].cols());
            Vec atdy_lp(n_lp);
            apply_at(layout, dir.dy, atdy, atdy_lp);
            for (int k = 0; k < nb; ++k) {
                dir.ds[k] = rd[k] - atdy[k];
                dir.dx[k] = sym(g[k] - x[k] * dir.ds[k] * z[k]);
            }
            dir.ds_lp = rd_lp - atdy_lp;
            dir.dx_lp = g_lp - d_lp.cwiseProduct(dir.ds_lp);
        };
        auto steps = [&](const Direction& dir) {
            double ap = max_step_lp(x_lp, dir.dx_lp);
            double ad = max_step_lp(s_lp, dir.ds_lp);
            for (int k = 0; k < nb; ++k) {
                ap = std::min(ap, max_step_psd(x[k], dir.dx[k]));
                ad = std::min(ad, max_step_psd(s[k], dir.ds[k]));
            }
            return std::pair{ap, ad};
        };

        std::vector<Mat> g(nb);
        for (int k = 0; k < nb; ++k) g[k] = -x[k];
        direction(g, -x_lp, pred);
        auto [ap, ad] = steps(pred);
        ap = std::min(1.0, ap);
        ad = std::min(1.0, ad);
        double mu_aff = 0.0;
        for (int k = 0; k < nb; ++k) mu_aff += inner(x[k] + ap * pred.dx[k], s[k] + ad * pred.ds[k]);
        mu_aff += (x_lp + ap * pred.dx_lp).dot(s_lp + ad * pred.ds_lp);
        mu_aff /= total_dim;
        const double expon = std::max(1.0, 3.0 * std::pow(std::min(ap, ad), 2));
        const double sigma = std::min(1.0, std::pow(std::max(mu_aff, 0.0) / mu, expon));
        const double gamma = 0.9 + 0.09 * std::min(ap, ad);

        for (int k = 0; k < nb; ++k) g[k] = sigma * mu * z[k] - x[k] - pred.dx[k] * pred.ds[k] * z[k];
        const Vec g_lp = sigma * mu * z_lp - x_lp - pred.dx_lp.cwiseProduct(pred.ds_lp).cwiseProduct(z_lp);
        direction(g, g_lp, corr);
        auto [cp, cd] = steps(corr);
        cp = std::min(1.0, gamma * cp);
        cd = std::min(1.0, gamma * cd);
        if (cp < 1e-12 && cd < 1e-12) {
            sol.message = "step length collapsed";
            break;
        }
        for (int k = 0; k < nb; ++k) {
            x[k] = sym(x[k] + cp * corr.dx[k]);
            s[k] = sym(s[k] + cd * corr.ds[k]);
        }
        x_lp += cp * corr.dx_lp;
        s_lp += cd * corr.ds_lp;
        y += cd * corr.dy;
    }
    sol.iterations = it;
    if (sol.status == SolveStatus::numerical_failure && best.err < last_err) {
        x = std::move(best.x);
        s = std::move(best.s);
        x_lp = std::move(best.x_lp);
        s_lp = std::move(best.s_lp);
        y = std::move(best.y);
        sol.message += "; returned the best iterate";
    }

    // Undo scaling and map multipliers back to the original rows.
    sol.x_blocks.resize(nb);
    sol.s_blocks.resize(nb);
    for (int k = 0; k < nb; ++k) {
        sol.x_blocks[k] = b_scale * x[k];
        sol.s_blocks[k] = c_scale * s[k];
    }
    sol.x_lp = b_scale * x_lp;
    sol.s_lp = c_scale * s_lp;
    sol.y = Vec::Zero(m_all);
    for (int r = 0; r < m; ++r) sol.y[pre.kept[r]] = c_scale * y[r] / pre.row_norm[pre.kept[r]];

    // Residuals on the original data.
    std::vector<Mat> res_d(nb);
    for (int k = 0; k < nb; ++k) res_d[k] = Mat::Zero(program.block_sizes[k], program.block_sizes[k]);
    Vec res_d_lp = Vec::Zero(n_lp);
    for (const auto& e : program.objective) {
        res_d[e.block](e.row, e.col) += e.value;
        if (e.row != e.col) res_d[e.block](e.col, e.row) += e.value;
    }
    double c_orig = std::sqrt(squared_norm(res_d));
    for (int k = 0; k < n_lp && !program.lp_cost.empty(); ++k) res_d_lp[k] = program.lp_cost[k];
    c_orig = std::sqrt(c_orig * c_orig + res_d_lp.squaredNorm());
    sol.primal_objective = inner(res_d, sol.x_blocks) + res_d_lp.dot(sol.x_lp);
    double rp2 = 0.0, b2 = 0.0, dobj = 0.0;
    for (int i = 0; i < m_all; ++i) {
        const auto& c = program.constraints[i];
        double ax = 0.0;
        for (const auto& e : c.block_entries) {
            const double v = sol.x_blocks[e.block](e.row, e.col);
            ax += (e.row == e.col ? 1.0 : 2.0) * e.value * v;
            res_d[e.block](e.row, e.col) -= sol.y[i] * e.value;
            if (e.row != e.col) res_d[e.block](e.col, e.row) -= sol.y[i] * e.value;
        }
        for (const auto& e : c.lp_entries) {
            ax += e.value * sol.x_lp[e.index];
            res_d_lp[e.index] -= sol.y[i] * e.value;
        }
        rp2 += (c.rhs - ax) * (c.rhs - ax);
        b2 += c.rhs * c.rhs;
        dobj += c.rhs * sol.y[i];
    }
    for (int k = 0; k < nb; ++k) res_d[k] -= sol.s_blocks[k];
    res_d_lp -= sol.s_lp;
    sol.dual_objective = dobj;
    sol.primal_residual = std::sqrt(rp2) / (1.0 + std::sqrt(b2));
    sol.dual_residual = std::sqrt(squared_norm(res_d) + res_d_lp.squaredNorm()) / (1.0 + c_orig);
    sol.gap = std::abs(sol.primal_objective - sol.dual_objective) /
              (1.0 + std::abs(sol.primal_objective) + std::abs(sol.dual_objective));

    if (sol.status == SolveStatus::numerical_failure) {
        // accept a slightly looser point rather than discard a near-solution
        const double err = std::max({sol.primal_residual, sol.dual_residual, sol.gap});
        if (err <= 1e3 * options.tol) {
            sol.status = SolveStatus::optimal;
            sol.message += "; accepted at reduced accuracy " + std::to_string(err);
        }
    }
    if (pre.dropped > 0) sol.message += "; dropped " + std::to_string(pre.dropped) + " dependent equalities";
    return sol;
}

}  // namespace conicpf
