#include <doctest.h>

#include <random>

#include "conicpf/kernels.hpp"
#include "conicpf/sdp.hpp"

using namespace conicpf;

namespace {

Eigen::MatrixXd dense_block(const std::vector<BlockEntry>& entries, int block, int n) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : entries) {
        if (e.block != block) continue;
        m(e.row, e.col) += e.value;
        if (e.row != e.col) m(e.col, e.row) += e.value;
    }
    return m;
}

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    return a * a.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

// Random program with a strictly feasible primal point and a strictly feasible dual point.
RealConicProgram random_program(std::mt19937_64& rng, std::vector<int> sizes, int lp, int m) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.5, 2.0);
    RealConicProgram p;
    p.block_sizes = sizes;
    p.lp_size = lp;
    std::vector<Eigen::MatrixXd> x0;
    for (int n : sizes) x0.push_back(random_spd(n, rng));
    Eigen::VectorXd x0_lp(lp);
    for (int k = 0; k < lp; ++k) x0_lp[k] = u(rng);
    Eigen::VectorXd y0(m);
    for (int i = 0; i < m; ++i) y0[i] = g(rng);

    std::vector<Eigen::MatrixXd> c(sizes.size());
    for (std::size_t b = 0; b < sizes.size(); ++b) c[b] = random_spd(sizes[b], rng);
    Eigen::VectorXd c_lp(lp);
    for (int k = 0; k < lp; ++k) c_lp[k] = u(rng);

    for (int i = 0; i < m; ++i) {
        RealConstraint con;
        double rhs = 0.0;
        for (std::size_t b = 0; b < sizes.size(); ++b) {
            for (int r = 0; r < sizes[b]; ++r) {
                for (int s = r; s < sizes[b]; ++s) {
                    if (std::bernoulli_distribution(0.5)(rng)) continue;
                    const double v = g(rng);
                    con.block_entries.push_back({int(b), r, s, v});
                    rhs += (r == s ? 1.0 : 2.0) * v * x0[b](r, s);
                    c[b](r, s) += y0[i] * v;
                    if (r != s) c[b](s, r) += y0[i] * v;
                }
            }
        }
        for (int k = 0; k < lp; ++k) {
            const double v = g(rng);
            con.lp_entries.push_back({k, v});
            rhs += v * x0_lp[k];
            c_lp[k] += y0[i] * v;
        }
        con.rhs = rhs;
        p.constraints.push_back(con);
    }
    for (std::size_t b = 0; b < sizes.size(); ++b)
        for (int r = 0; r < sizes[b]; ++r)
            for (int s = r; s < sizes[b]; ++s) p.objective.push_back({int(b), r, s, c[b](r, s)});
    p.lp_cost.assign(c_lp.data(), c_lp.data() + lp);
    return p;
}

}  // namespace

TEST_CASE("two-variable max-cut style SDP") {
    // min 2 X12 s.t. X11 = X22 = 1; optimum -2 at X = [1 -1; -1 1]
    RealConicProgram p;
    p.block_sizes = {2};
    p.objective = {{0, 0, 1, 1.0}};
    p.constraints = {{{{0, 0, 0, 1.0}}, {}, 1.0}, {{{0, 1, 1, 1.0}}, {}, 1.0}};
    const auto sol = solve_real(p);
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.primal_objective == doctest::Approx(-2.0).epsilon(1e-7));
    CHECK(sol.dual_objective == doctest::Approx(-2.0).epsilon(1e-7));
    CHECK(sol.x_blocks[0](0, 1) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("pure LP") {
    RealConicProgram p;
    p.lp_size = 2;
    p.lp_cost = {1.0, 2.0};
    p.constraints = {{{}, {{0, 1.0}, {1, 1.0}}, 1.0}};
    const auto sol = solve_real(p);
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.primal_objective == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.x_lp[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.y[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("inconsistent duplicate equalities are infeasible") {
    RealConicProgram p;
    p.block_sizes = {2};
    p.objective = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
    p.constraints = {{{{0, 0, 0, 1.0}}, {}, 1.0}, {{{0, 0, 0, 1.0}}, {}, 2.0}};
    CHECK(solve_real(p).status == SolveStatus::infeasible);
}

TEST_CASE("consistent duplicate equalities are dropped") {
    RealConicProgram p;
    p.block_sizes = {2};
    p.objective = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
    p.constraints = {{{{0, 0, 0, 1.0}}, {}, 1.0}, {{{0, 0, 0, 2.0}}, {}, 2.0}};
    const auto sol = solve_real(p);
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.primal_objective == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.y[1] == 0.0);
}

TEST_CASE("infeasibility and unboundedness detected by the iterations") {
    RealConicProgram infeasible;
    infeasible.lp_size = 2;
    infeasible.lp_cost = {1.0, 1.0};
    infeasible.constraints = {{{}, {{0, 1.0}, {1, 1.0}}, -1.0}};
    CHECK(solve_real(infeasible).status == SolveStatus::infeasible);

    RealConicProgram unbounded;
    unbounded.lp_size = 2;
    unbounded.lp_cost = {-1.0, 0.0};
    unbounded.constraints = {{{}, {{0, 1.0}, {1, -1.0}}, 0.0}};
    CHECK(solve_real(unbounded).status == SolveStatus::unbounded);
}

TEST_CASE("random feasible programs satisfy the optimality conditions") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 6; ++trial) {
        const auto p = random_program(rng, {3 + trial, 2}, trial % 3, 4 + trial);
        const auto sol = solve_real(p);
        REQUIRE(sol.status == SolveStatus::optimal);
        CHECK(sol.primal_residual < 1e-7);
        CHECK(sol.dual_residual < 1e-7);
        CHECK(sol.gap < 1e-7);
        for (std::size_t b = 0; b < p.block_sizes.size(); ++b) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(sol.x_blocks[b]), es(sol.s_blocks[b]);
            CHECK(ex.eigenvalues().minCoeff() > -1e-7);
            CHECK(es.eigenvalues().minCoeff() > -1e-7);
            CHECK(std::abs((sol.x_blocks[b] * sol.s_blocks[b]).trace()) < 1e-6 * (1.0 + std::abs(sol.primal_objective)));
        }
    }
}

TEST_CASE("Schur kernels match the dense trace formula") {
    std::mt19937_64 rng(11);
    const auto p = random_program(rng, {5, 3}, 2, 90);
    const auto layout = make_schur_layout(p);
    std::vector<Eigen::MatrixXd> x{random_spd(5, rng), random_spd(3, rng)};
    std::vector<Eigen::MatrixXd> z{random_spd(5, rng), random_spd(3, rng)};
    Eigen::VectorXd d(2);
    d << 0.7, 1.9;

    const auto serial = to_dense(assemble_schur_serial(layout, x, z, d));
    const auto parallel = to_dense(assemble_schur_parallel(layout, x, z, d));
    CHECK((serial - parallel).cwiseAbs().maxCoeff() < 1e-10);

    const int m = p.constraint_count();
    Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            for (int b = 0; b < 2; ++b) {
                const auto ai = dense_block(p.constraints[i].block_entries, b, p.block_sizes[b]);
                const auto aj = dense_block(p.constraints[j].block_entries, b, p.block_sizes[b]);
                oracle(i, j) += (ai * x[b] * aj * z[b]).trace();
            }
            for (const auto& ei : p.constraints[i].lp_entries)
                for (const auto& ej : p.constraints[j].lp_entries)
                    if (ei.index == ej.index) oracle(i, j) += ei.value * ej.value * d[ei.index];
        }
    }
    CHECK((serial - oracle).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + oracle.cwiseAbs().maxCoeff()));
}
