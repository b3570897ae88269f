#include "conicpf/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace conicpf {

SchurLayout make_schur_layout(const RealConicProgram& program) {
    SchurLayout layout;
    const int m = program.constraint_count();
    layout.m = m;
    layout.pieces.resize(m);
    layout.block_users.resize(program.block_sizes.size());
    layout.lp_rows.resize(m);
    layout.lp_columns.resize(program.lp_size);
    for (int i = 0; i < m; ++i) {
        const auto& con = program.constraints[i];
        auto& pieces = layout.pieces[i];
        for (const auto& e : con.block_entries) {
            auto it = std::find_if(pieces.begin(), pieces.end(),
                                   [&](const SchurLayout::Piece& p) { return p.block == e.block; });
            if (it == pieces.end()) {
                pieces.push_back({e.block, {}});
                it = pieces.end() - 1;
            }
            it->entries.push_back({e.row, e.col, e.value});
            if (e.row != e.col) it->entries.push_back({e.col, e.row, e.value});
        }
        for (int p = 0; p < static_cast<int>(pieces.size()); ++p) {
            layout.block_users[pieces[p].block].emplace_back(i, p);
        }
        for (const auto& e : con.lp_entries) {
            layout.lp_rows[i].push_back(e);
            layout.lp_columns[e.index].emplace_back(i, e.value);
        }
    }
    return layout;
}

namespace {

// Tr(A X B Z) for symmetric A, B given as full entry lists.
inline double trace_axbz(const std::vector<FullEntry>& a, const std::vector<FullEntry>& b, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& z) {
    double acc = 0.0;
    for (const auto& ea : a) {
        double inner = 0.0;
        for (const auto& eb : b) {
            inner += eb.value * x(ea.col, eb.row) * z(eb.col, ea.row);
        }
        acc += ea.value * inner;
    }
    return acc;
}

void assemble_row(int i, const SchurLayout& layout, const std::vector<Eigen::MatrixXd>& x,
                  const std::vector<Eigen::MatrixXd>& z, const Eigen::VectorXd& lp_scale, std::vector<double>& scratch,
                  std::vector<int>& touched, std::vector<std::pair<int, double>>& row) {
    touched.clear();
    auto bump = [&](int j, double v) {
        if (scratch[j] == 0.0) touched.push_back(j);
        scratch[j] += v;
        if (scratch[j] == 0.0) scratch[j] = 1e-300;  // keep the slot marked as touched
    };
    for (const auto& piece : layout.pieces[i]) {
        const auto& xb = x[piece.block];
        const auto& zb = z[piece.block];
        for (const auto& [j, pj] : layout.block_users[piece.block]) {
            if (j < i) continue;
            bump(j, trace_axbz(piece.entries, layout.pieces[j][pj].entries, xb, zb));
        }
    }
    for (const auto& e : layout.lp_rows[i]) {
        const double d = lp_scale[e.index];
        for (const auto& [j, aj] : layout.lp_columns[e.index]) {
            if (j < i) continue;
            bump(j, e.value * aj * d);
        }
    }
    std::sort(touched.begin(), touched.end());
    row.clear();
    row.reserve(touched.size());
    for (int j : touched) {
        row.emplace_back(j, scratch[j]);
        scratch[j] = 0.0;
    }
}

}  // namespace

SchurRows assemble_schur_serial(const SchurLayout& layout, const std::vector<Eigen::MatrixXd>& x,
                                const std::vector<Eigen::MatrixXd>& z, const Eigen::VectorXd& lp_scale) {
    SchurRows out;
    out.rows.resize(layout.m);
    std::vector<double> scratch(layout.m, 0.0);
    std::vector<int> touched;
    for (int i = 0; i < layout.m; ++i) {
        assemble_row(i, layout, x, z, lp_scale, scratch, touched, out.rows[i]);
    }
    return out;
}

SchurRows assemble_schur_parallel(const SchurLayout& layout, const std::vector<Eigen::MatrixXd>& x,
                                  const std::vector<Eigen::MatrixXd>& z, const Eigen::VectorXd& lp_scale) {
    SchurRows out;
    out.rows.resize(layout.m);
#pragma omp parallel
    {
        std::vector<double> scratch(layout.m, 0.0);
        std::vector<int> touched;
#pragma omp for schedule(dynamic, 16)
        for (int i = 0; i < layout.m; ++i) {
            assemble_row(i, layout, x, z, lp_scale, scratch, touched, out.rows[i]);
        }
    }
    return out;
}

SchurRows assemble_schur(const SchurLayout& layout, const std::vector<Eigen::MatrixXd>& x,
                         const std::vector<Eigen::MatrixXd>& z, const Eigen::VectorXd& lp_scale, ExecPolicy policy) {
#ifdef _OPENMP
    // nested calls from parallel Monte-Carlo trials stay serial
    if (policy == ExecPolicy::parallel && !omp_in_parallel() && layout.m >= 64) {
        return assemble_schur_parallel(layout, x, z, lp_scale);
    }
#endif
    (void)policy;
    return assemble_schur_serial(layout, x, z, lp_scale);
}

Eigen::MatrixXd to_dense(const SchurRows& rows) {
    const auto m = static_cast<Eigen::Index>(rows.rows.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (const auto& [j, v] : rows.rows[i]) {
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

}  // namespace conicpf
