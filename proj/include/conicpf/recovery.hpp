#pragma once

#include <string>
#include <utility>
#include <vector>

#include "conicpf/hermitian.hpp"
#include "conicpf/netmodel.hpp"

namespace conicpf {

enum class RecoveryMethod { rank1_exact, rank1_approx, direct_oracle, gauss_newton };

std::string to_string(RecoveryMethod method);

struct VoltageEstimate {
    CVector v;
    int ref_bus = 0;  // bus index
    RecoveryMethod method = RecoveryMethod::rank1_exact;
};

enum class AngleSolver { automatic, propagation, linear_program };

/// |v_k| = sqrt(X_kk); angles minimize sum |angle X_st - theta_s + theta_t| over the
/// support with theta_ref = 0. Trees are solved by propagation (rank1_exact), other
/// supports by a linear program (rank1_approx) unless a solver is forced.
VoltageEstimate rank1_recover(const HermitianSparse& x, int ref_bus, const std::vector<std::pair<int, int>>& support,
                              AngleSolver solver = AngleSolver::automatic);

struct FlowReading {
    int branch = 0;
    double p_from = 0.0;
};

/// Angle differences from measured p_from and magnitudes, propagated from the
/// reference over the spanning tree. Of the two arccos branches the one with
/// 0 < (angle v_s - angle v_t) - angle y_st < 180 degrees is kept.
VoltageEstimate direct_pf_oracle(const AdmittanceModel& model, const std::vector<double>& magnitudes,
                                 const std::vector<FlowReading>& flows, const EdgeSet& edges, int ref_bus);

/// Rotates v so that the reference bus angle is zero.
CVector rereference(const CVector& v, int ref_bus);

/// xi = ||v_hat - v|| / sqrt(N) after both are re-referenced.
double rmse(const CVector& v_hat, const CVector& v_true, int ref_bus);

/// CSV rows: bus id, |v|, angle in degrees.
std::string to_csv(const VoltageEstimate& estimate, const NetworkCase& net);

}  // namespace conicpf
