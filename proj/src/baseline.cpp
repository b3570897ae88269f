#include "conicpf/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/QR>

namespace conicpf {

std::string to_string(GaussNewtonStatus status) {
    switch (status) {
        case GaussNewtonStatus::converged: return "converged";
        case GaussNewtonStatus::max_iterations: return "max_iterations";
        case GaussNewtonStatus::diverged: return "diverged";
        case GaussNewtonStatus::singular: return "singular";
    }
    return "?";
}

namespace {

struct Residuals {
    Eigen::VectorXd r;  // weighted residuals
    Eigen::MatrixXd j;  // weighted Jacobian of h
};

}  // namespace

GaussNewtonResult gauss_newton_wls(const MeasurementSet& measurements, const NetworkCase& net,
                                   const GaussNewtonConfig& config) {
    if (config.max_iterations <= 0 || !(config.step_tolerance > 0.0)) {
        throw std::invalid_argument("Gauss-Newton limits must be positive");
    }
    const int n = measurements.n_bus;
    if (n != static_cast<int>(net.buses.size())) throw std::invalid_argument("measurement set does not match the case");
    const int ref = net.slack_index();
    const int m = measurements.size();

    GaussNewtonResult result;
    result.estimate.ref_bus = ref;
    result.estimate.method = RecoveryMethod::gauss_newton;

    // state: theta for buses other than ref, then |v| for every bus
    std::vector<int> col(n, -1);
    int nt = 0;
    for (int k = 0; k < n; ++k)
        if (k != ref) col[k] = nt++;
    const int nx = nt + n;

    Eigen::VectorXd theta(n), vm(n);
    const CVector stored = net.stored_voltages();
    for (int k = 0; k < n; ++k) {
        theta[k] = config.flat_start ? 0.0 : std::arg(stored[k]) - std::arg(stored[ref]);
        vm[k] = config.flat_start ? 1.0 : std::abs(stored[k]);
    }
    auto voltage = [&] {
        CVector v(n);
        for (int k = 0; k < n; ++k) v[k] = std::polar(vm[k], theta[k]);
        return v;
    };
    result.estimate.v = voltage();

    if (m < 2 * n - 1) {
        result.status = GaussNewtonStatus::singular;
        result.message = "fewer measurements than state variables";
        return result;
    }

    auto evaluate = [&](Residuals& out) {
        const CVector v = voltage();
        out.r.resize(m);
        out.j = Eigen::MatrixXd::Zero(m, nx);
        for (int i = 0; i < m; ++i) {
            const auto& rec = measurements.records[i];
            const auto& d = rec.coeff.descriptor;
            if (d.kind == MeasurementKind::voltage_sq) {
                const double z = std::sqrt(std::max(rec.observed, 0.0));
                const double sigma = rec.sigma / (2.0 * std::max(z, 1e-6));
                out.r[i] = (z - vm[d.index]) / sigma;
                out.j(i, nt + d.index) = 1.0 / sigma;
                continue;
            }
            const auto& mat = rec.coeff.matrix;
            const CVector mv = mat.multiply(v);
            out.r[i] = (rec.observed - mat.quadratic_form(v)) / rec.sigma;
            // d(v* M v)/d theta_k = 2 Im(conj(v_k) (Mv)_k), d/d|v_k| = 2 Re(conj(v_k) (Mv)_k) / |v_k|
            std::vector<int> buses;
            for (const auto& e : mat.entries()) {
                buses.push_back(e.row);
                buses.push_back(e.col);
            }
            std::sort(buses.begin(), buses.end());
            buses.erase(std::unique(buses.begin(), buses.end()), buses.end());
            for (int k : buses) {
                const cplx g = std::conj(v[k]) * mv[k];
                if (col[k] >= 0) out.j(i, col[k]) = 2.0 * g.imag() / rec.sigma;
                out.j(i, nt + k) = 2.0 * g.real() / std::max(vm[k], 1e-12) / rec.sigma;
            }
        }
    };

    Residuals res;
    evaluate(res);
    double obj = res.r.squaredNorm();
    double best = obj;
    Eigen::VectorXd best_theta = theta, best_vm = vm;
    double prev = obj;
    int growth = 0;

    int it = 0;
    for (; it < config.max_iterations; ++it) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(res.j);
        qr.setThreshold(1e-12);
        if (qr.rank() < nx) {
            result.status = GaussNewtonStatus::singular;
            result.message = "gain matrix is singular (rank " + std::to_string(qr.rank()) + " of " +
                             std::to_string(nx) + ")";
            break;
        }
        const Eigen::VectorXd dx = qr.solve(res.r);
        for (int k = 0; k < n; ++k) {
            if (col[k] >= 0) theta[k] += dx[col[k]];
            vm[k] += dx[nt + k];
        }
        evaluate(res);
        obj = res.r.squaredNorm();
        if (!std::isfinite(obj)) {
            result.status = GaussNewtonStatus::diverged;
            result.message = "non-finite residual";
            break;
        }
        if (obj < best) {
            best = obj;
            best_theta = theta;
            best_vm = vm;
        }
        growth = obj > 10.0 * prev ? growth + 1 : 0;
        prev = obj;
        if (growth >= 3) {
            result.status = GaussNewtonStatus::diverged;
            result.message = "residual grew tenfold three times in a row";
            break;
        }
        if (dx.lpNorm<Eigen::Infinity>() < config.step_tolerance) {
            result.status = GaussNewtonStatus::converged;
            ++it;
            break;
        }
    }
    result.iterations = it;
    theta = best_theta;
    vm = best_vm;
    result.estimate.v = voltage();
    result.objective = best;
    if (result.status == GaussNewtonStatus::max_iterations && result.message.empty()) {
        result.message = "iteration limit reached";
    }
    return result;
}

}  // namespace conicpf
