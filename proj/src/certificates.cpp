#include "conicpf/certificates.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace conicpf {

EigenData hermitian_eigen(const HermitianSparse& h) {
    EigenData out;
    if (h.dim() == 0) return out;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h.to_dense(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("Hermitian eigendecomposition failed");
    out.values = es.eigenvalues();
    out.lambda_min = out.values[0];
    out.lambda2 = out.values.size() > 1 ? out.values[1] : out.values[0];
    out.lambda_max = out.values[out.values.size() - 1];
    return out;
}

HermitianSparse dual_matrix(const HermitianSparse& m0, const std::vector<HermitianSparse>& matrices,
                            const std::vector<double>& mu) {
    if (matrices.size() != mu.size()) throw std::invalid_argument("multiplier count mismatch");
    std::vector<HermitianEntry> entries(m0.entries().begin(), m0.entries().end());
    for (std::size_t j = 0; j < mu.size(); ++j) {
        if (mu[j] == 0.0) continue;
        for (const auto& e : matrices[j].entries()) entries.push_back({e.row, e.col, mu[j] * e.value});
    }
    return HermitianSparse::from_entries(m0.dim(), std::move(entries));
}

DualCertificate build_certificate(const CVector& v, const ObjectiveDesign& design, const EdgeSet& edges,
                                  const AdmittanceModel& model) {
    const int n = model.n_bus;
    if (v.size() != n) throw std::invalid_argument("voltage profile does not match the network");
    for (int k = 0; k < n; ++k) {
        if (std::abs(v[k]) == 0.0) throw std::invalid_argument("zero voltage magnitude at bus index " + std::to_string(k));
    }
    // A 180 degree boundary on the last condition only zeroes the flow multiplier;
    // the edge block stays rank-one PSD, so construction goes ahead and verification decides.
    const auto report = check_assumption1(design, model, v, edges);
    std::vector<std::string> warnings;
    for (const auto& e : report.edges) {
        if (e.pass()) continue;
        const bool boundary = e.cond15 && e.cond16a && std::abs(std::abs(e.v_minus_m0) - 180.0) <= 1e-9;
        if (!boundary) {
            throw std::invalid_argument("assumption fails on branch " + std::to_string(e.branch) + " (angles " +
                                        std::to_string(e.m0_minus_y) + ", " + std::to_string(e.v_minus_y) + ", " +
                                        std::to_string(e.v_minus_m0) + ")");
        }
        warnings.push_back("branch " + std::to_string(e.branch) + " sits on the 180 degree boundary");
    }

    const int l_count = static_cast<int>(edges.branches.size());
    DualCertificate cert;
    cert.warnings = std::move(warnings);
    cert.mu.assign(n + l_count, 0.0);
    std::vector<HermitianSparse> matrices;
    for (int k = 0; k < n; ++k) {
        cert.descriptors.push_back({MeasurementKind::voltage_sq, k});
        matrices.push_back(build_matrix(model, cert.descriptors.back()).matrix);
    }
    for (int idx = 0; idx < l_count; ++idx) {
        const int l = edges.branches[idx];
        const int s = model.from[l], t = model.to[l];
        cert.descriptors.push_back({MeasurementKind::p_from, l});
        matrices.push_back(build_matrix(model, cert.descriptors.back()).matrix);

        // the p_from matrix has entries a at (s,s) and -w/2 at (s,t)
        const double a = model.yf.coeff(l, s).real();
        const cplx w = -model.yf.coeff(l, t);
        const cplx m = design.m0.at(s, t);
        const cplx u = v[s] * std::conj(v[t]);
        const double den = std::imag(u * std::conj(w));
        if (std::abs(den) <= 1e-14 * std::abs(u) * std::abs(w)) {
            throw std::invalid_argument("degenerate certificate denominator on branch " + std::to_string(l));
        }
        const double mu_n = 2.0 * std::imag(u * std::conj(m)) / den;
        const double mu_t = -std::norm(v[s]) * std::imag(m * std::conj(w)) / den;
        const double mu_s = std::norm(v[t]) / std::norm(v[s]) * mu_t - a * mu_n;
        cert.mu[n + idx] = mu_n;
        cert.mu[s] += mu_s;
        cert.mu[t] += mu_t;
    }
    for (int k = 0; k < n; ++k) cert.mu[k] -= design.m0.at(k, k).real();

    cert.h = dual_matrix(design.m0, matrices, cert.mu);
    const auto eig = hermitian_eigen(cert.h);
    cert.lambda = eig.lambda2;
    cert.lambda_min = eig.lambda_min;
    cert.lambda_max = eig.lambda_max;
    cert.null_residual = cert.h.multiply(v).norm();
    const double cut = 1e-6 * std::max(eig.lambda_max, 0.0);
    cert.rank_deficiency = static_cast<int>((eig.values.array() <= cut).count());
    return cert;
}

std::vector<double> align_multipliers(const DualCertificate& cert, const MeasurementSet& measurements) {
    std::vector<double> out(measurements.size(), 0.0);
    for (std::size_t k = 0; k < cert.descriptors.size(); ++k) {
        const int j = measurements.find(cert.descriptors[k]);
        if (j >= 0) out[j] = cert.mu[k];
    }
    return out;
}

CertificateCheck verify_certificate(const HermitianSparse& h, const CVector& v) {
    CertificateCheck c;
    const auto eig = hermitian_eigen(h);
    const double lmax = std::max(eig.lambda_max, 0.0);
    double fro2 = 0.0;
    for (const auto& e : h.entries()) fro2 += (e.row == e.col ? 1.0 : 2.0) * std::norm(e.value);
    const double fro = std::sqrt(fro2);
    const double hv = h.multiply(v).norm();
    c.psd = eig.lambda_min >= -1e-8 * lmax;
    c.psd_margin = lmax > 0.0 ? eig.lambda_min / lmax : eig.lambda_min;
    c.null_margin = fro > 0.0 ? hv / (fro * v.norm()) : 0.0;
    c.null_vector = hv <= 1e-8 * fro * v.norm();
    c.near_zero = static_cast<int>((eig.values.array() <= 1e-6 * lmax).count());
    c.rank = c.near_zero == 1;
    return c;
}

CertificateCheck verify_certificate(const DualCertificate& cert, const CVector& v) {
    return verify_certificate(cert.h, v);
}

ZetaResult zeta(const CMatrix& x, const CVector& v) {
    if (x.rows() != v.size() || x.cols() != v.size()) throw std::invalid_argument("zeta: dimension mismatch");
    const double tr = x.trace().real();
    if (!(tr > 0.0)) throw std::invalid_argument("zeta: X has zero trace");
    const double vn2 = v.squaredNorm();
    if (!(vn2 > 0.0)) throw std::invalid_argument("zeta: zero voltage vector");
    ZetaResult r;
    r.beta = (v.adjoint() * x * v)(0, 0).real() / (vn2 * vn2);
    r.zeta = (x - r.beta * v * v.adjoint()).norm() / std::sqrt(static_cast<double>(v.size()) * tr);
    return r;
}

TailBound tail_bound(double t, int m, int n, double lambda, double rho) {
    if (!(t > 0.0) || !(lambda > 0.0) || !(rho > 0.0) || m <= 0 || n <= 0) {
        throw std::invalid_argument("tail bound needs t, lambda, rho, M, N positive");
    }
    TailBound b;
    b.t = t;
    b.kappa = static_cast<double>(m) / n;
    b.gamma = std::pow(t, 4) * lambda * lambda / (32.0 * b.kappa * b.kappa * rho * rho) - std::log(2.0);
    b.vacuous = b.gamma <= 0.0;
    b.bound = b.vacuous ? 1.0 : std::exp(-b.gamma * m);
    return b;
}

double tail_threshold(double gamma, int m, int n, double lambda, double rho) {
    const double kappa = static_cast<double>(m) / n;
    return std::pow((gamma + std::log(2.0)) * 32.0 * kappa * kappa * rho * rho / (lambda * lambda), 0.25);
}

double rho_min(const DualCertificate& cert, const MeasurementSet& measurements) {
    const auto mu = align_multipliers(cert, measurements);
    double r = 0.0;
    for (int j = 0; j < measurements.size(); ++j) r = std::max(r, std::abs(measurements.records[j].sigma * mu[j]));
    return r;
}

BoundReport error_bound(const DualCertificate& cert, double rho, const MeasurementSet& measurements) {
    if (!(cert.lambda > 0.0)) throw std::invalid_argument("certificate has no spectral gap (lambda <= 0)");
    const double n = measurements.n_bus;
    BoundReport r;
    r.rho = rho;
    r.lambda = cert.lambda;
    r.rho_min = rho_min(cert, measurements);
    for (const auto& rec : measurements.records) r.f_wlav += std::abs(rec.noise) / rec.sigma;
    r.zeta_max = 2.0 * std::sqrt(rho * r.f_wlav / (n * cert.lambda));
    r.omega_hat = 2.0 * std::sqrt(r.rho_min / (n * cert.lambda));
    r.rho_below_min = rho < r.rho_min;
    return r;
}

nlohmann::json to_json(const DualCertificate& cert) {
    nlohmann::json doc;
    doc["mu"] = cert.mu;
    doc["descriptors"] = nlohmann::json::array();
    for (const auto& d : cert.descriptors) doc["descriptors"].push_back({std::string(to_string(d.kind)), d.index});
    doc["lambda"] = cert.lambda;
    doc["lambda_min"] = cert.lambda_min;
    doc["lambda_max"] = cert.lambda_max;
    doc["null_residual"] = cert.null_residual;
    doc["rank_deficiency"] = cert.rank_deficiency;
    return doc;
}

nlohmann::json to_json(const BoundReport& r) {
    auto opt = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
    nlohmann::json doc{{"zeta", opt(r.zeta)},          {"zeta_max", r.zeta_max}, {"beta", opt(r.beta)},
                       {"lambda", r.lambda},           {"f_wlav", r.f_wlav},     {"rho_min", r.rho_min},
                       {"rho", r.rho},                 {"omega_hat", r.omega_hat},
                       {"rho_below_min", r.rho_below_min}};
    if (r.tail) {
        doc["tail"] = {{"t", r.tail->t},
                       {"kappa", r.tail->kappa},
                       {"gamma", r.tail->gamma},
                       {"bound", r.tail->bound},
                       {"vacuous", r.tail->vacuous}};
    }
    return doc;
}

}  // namespace conicpf
