#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conicpf/hermitian.hpp"
#include "conicpf/measurements.hpp"
#include "conicpf/netmodel.hpp"
#include "conicpf/relaxations.hpp"

namespace conicpf {

struct EigenData {
    Eigen::VectorXd values;  // ascending
    double lambda_min = 0.0;
    double lambda2 = 0.0;  // second smallest
    double lambda_max = 0.0;
};

EigenData hermitian_eigen(const HermitianSparse& h);

/// Multipliers for the measurement order "all bus voltages, then p_from on each edge".
struct DualCertificate {
    std::vector<MeasurementDescriptor> descriptors;
    std::vector<double> mu;
    HermitianSparse h;
    double lambda = 0.0;  // second-smallest eigenvalue of H
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double null_residual = 0.0;  // ||H v||
    int rank_deficiency = 0;
    std::vector<std::string> warnings;
};

/// H = M0 + sum_j mu_j M_j.
HermitianSparse dual_matrix(const HermitianSparse& m0, const std::vector<HermitianSparse>& matrices,
                            const std::vector<double>& mu);

/// Closed-form certificate on a spanning tree with p_from measured on every edge.
/// Branch entries are taken from the exact flow matrices, so taps and charging are
/// handled; the voltage multipliers absorb the diagonal of M0.
DualCertificate build_certificate(const CVector& v, const ObjectiveDesign& design, const EdgeSet& edges,
                                  const AdmittanceModel& model);

/// Multipliers aligned to an arbitrary measurement set, zero for records the certificate does not cover.
std::vector<double> align_multipliers(const DualCertificate& cert, const MeasurementSet& measurements);

struct CertificateCheck {
    bool psd = false;
    bool null_vector = false;
    bool rank = false;
    double psd_margin = 0.0;   // lambda_min / lambda_max
    double null_margin = 0.0;  // ||Hv|| / (||H||_F ||v||)
    int near_zero = 0;
    bool valid() const { return psd && null_vector && rank; }
};

/// lambda_min >= -1e-8 lambda_max, ||Hv|| <= 1e-8 ||H||_F ||v||, exactly one eigenvalue <= 1e-6 lambda_max.
CertificateCheck verify_certificate(const HermitianSparse& h, const CVector& v);
CertificateCheck verify_certificate(const DualCertificate& cert, const CVector& v);

struct ZetaResult {
    double zeta = 0.0;
    double beta = 0.0;
};

/// beta = v* X v / ||v||^4, zeta = ||X - beta v v*||_F / sqrt(N Tr X).
ZetaResult zeta(const CMatrix& x, const CVector& v);

struct TailBound {
    double t = 0.0;
    double kappa = 0.0;
    double gamma = 0.0;
    double bound = 1.0;  // exp(-gamma M), capped at 1
    bool vacuous = true;
};

/// gamma = t^4 lambda^2 / (32 kappa^2 rho^2) - ln 2 with kappa = M / N.
TailBound tail_bound(double t, int m, int n, double lambda, double rho);
/// Smallest t with gamma equal to the requested value.
double tail_threshold(double gamma, int m, int n, double lambda, double rho);

struct BoundReport {
    double rho = 0.0;
    double rho_min = 0.0;
    double f_wlav = 0.0;
    double zeta_max = 0.0;
    double lambda = 0.0;
    double omega_hat = 0.0;  // upper bound on omega from this certificate
    std::optional<double> beta;
    std::optional<double> zeta;
    std::optional<TailBound> tail;
    bool rho_below_min = false;
};

/// rho_min = max_j |sigma_j mu_j|, f_WLAV(eta) = sum |eta_j| / sigma_j,
/// zeta_max = 2 sqrt(rho f / (N lambda)), omega_hat = 2 sqrt(rho_min / (N lambda)).
BoundReport error_bound(const DualCertificate& cert, double rho, const MeasurementSet& measurements);

double rho_min(const DualCertificate& cert, const MeasurementSet& measurements);

nlohmann::json to_json(const DualCertificate& cert);
nlohmann::json to_json(const BoundReport& report);

}  // namespace conicpf
