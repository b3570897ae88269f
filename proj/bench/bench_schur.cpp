// Serial reference vs OpenMP Schur assembly, plus end-to-end solves under both policies.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "conicpf/conic.hpp"
#include "conicpf/kernels.hpp"
#include "conicpf/relaxations.hpp"

using namespace conicpf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    return a * a.transpose() / n + Eigen::MatrixXd::Identity(n, n);
}

ConicProgram psse_program(const std::string& path, RelaxationKind kind, bool bags) {
    const NetworkCase net = load_case(path);
    const AdmittanceModel model = build_admittance(net);
    const EdgeSet tree = spanning_subgraph(net, model, TreeStrategy::min_weight_tree);
    MeasurementPlan plan;
    plan.tree_flows = tree;
    NoiseConfig noise;
    noise.level = 0.01;
    const MeasurementSet ms = sample_measurements(model, operating_point(net, model), plan, noise);
    ConicProgram p = assemble(kind, design_m0(model, tree, M0Strategy::minus_susceptance), ms, 1.0);
    return bags ? decompose(p) : p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schur assembly benchmark"};
    std::vector<std::string> cases = {"case30", "case57", "case118"};
    std::string data_dir = CONICPF_DATA_DIR;
    int reps = 5;
    app.add_option("--case", cases, "case names under the data directory");
    app.add_option("--data-dir", data_dir);
    app.add_option("--reps", reps, "repetitions per kernel");
    CLI11_PARSE(app, argc, argv);

    std::printf("threads %d\n", omp_get_max_threads());
    std::printf("%-8s %-10s %6s %10s %10s %8s %10s\n", "case", "program", "rows", "serial_s", "parallel_s", "speedup",
                "max_diff");
    std::mt19937_64 rng(1);
    for (const auto& name : cases) {
        const std::string path = data_dir + "/" + name + ".m";
        for (auto [label, kind, bags] : {std::tuple{"sdp", RelaxationKind::psse_sdp, false},
                                         std::tuple{"sdp_bags", RelaxationKind::psse_sdp, true},
                                         std::tuple{"socp", RelaxationKind::psse_socp, false}}) {
            const RealForm rf = to_real(psse_program(path, kind, bags));
            const SchurLayout layout = make_schur_layout(rf.program);
            std::vector<Eigen::MatrixXd> x, z;
            for (int n : rf.program.block_sizes) {
                x.push_back(random_spd(n, rng));
                z.push_back(random_spd(n, rng));
            }
            const Eigen::VectorXd lp = Eigen::VectorXd::Constant(rf.program.lp_size, 0.5);

            auto t0 = Clock::now();
            SchurRows serial;
            for (int r = 0; r < reps; ++r) serial = assemble_schur_serial(layout, x, z, lp);
            const double ts = seconds_since(t0) / reps;
            t0 = Clock::now();
            SchurRows parallel;
            for (int r = 0; r < reps; ++r) parallel = assemble_schur_parallel(layout, x, z, lp);
            const double tp = seconds_since(t0) / reps;
            const double diff = (to_dense(serial) - to_dense(parallel)).cwiseAbs().maxCoeff();
            std::printf("%-8s %-10s %6d %10.4f %10.4f %8.2f %10.1e\n", name.c_str(), label, layout.m, ts, tp, ts / tp,
                        diff);
        }
    }

    std::printf("\n%-8s %-10s %10s %10s %6s\n", "case", "solve", "serial_s", "parallel_s", "iters");
    for (const auto& name : cases) {
        const ConicProgram p = psse_program(data_dir + "/" + name + ".m", RelaxationKind::psse_sdp, false);
        SolverOptions opt;
        opt.policy = ExecPolicy::serial;
        auto t0 = Clock::now();
        const ConicSolution a = solve(p, opt);
        const double ts = seconds_since(t0);
        opt.policy = ExecPolicy::parallel;
        t0 = Clock::now();
        const ConicSolution b = solve(p, opt);
        const double tp = seconds_since(t0);
        std::printf("%-8s %-10s %10.3f %10.3f %6d%s\n", name.c_str(), "psse_sdp", ts, tp, b.iterations,
                    a.iterations == b.iterations ? "" : " (iteration counts differ)");
    }
    return 0;
}
