#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "conicpf/conic.hpp"
#include "conicpf/measurements.hpp"
#include "conicpf/netmodel.hpp"

namespace conicpf {

enum class M0Strategy { minus_susceptance, unit_negative, custom };

M0Strategy parse_m0_strategy(std::string_view name);

/// Objective matrix M0 with off-diagonal support equal to the edge set.
struct ObjectiveDesign {
    HermitianSparse m0;
    M0Strategy strategy = M0Strategy::minus_susceptance;
    EdgeSet edges;
    std::vector<std::string> warnings;
};

/// minus_susceptance: M0_st = -B_st on the edges. Both strategies set M0_ii to the sum of
/// |M0_ij| over the edges incident to i.
/// unit_negative: M0_st = -1.
ObjectiveDesign design_m0(const AdmittanceModel& model, const EdgeSet& edges, M0Strategy strategy);
/// Custom M0; its off-diagonal support must match the edge set.
ObjectiveDesign design_m0(const AdmittanceModel& model, const EdgeSet& edges, const HermitianSparse& custom);

/// Angle wrapped into (-180, 180].
double normalize_degrees(double angle);

struct EdgeAssumption {
    int branch = 0;
    int s = 0;
    int t = 0;
    double m0_minus_y = 0.0;   // angle M0_st - angle y_st
    double v_minus_y = 0.0;    // (angle v_s - angle v_t) - angle y_st
    double v_minus_m0 = 0.0;   // (angle v_s - angle v_t) - angle M0_st
    bool cond15 = false;
    bool cond16a = false;
    bool cond16b = false;
    bool transformer = false;  // conditions use the series admittance; flagged for review
    bool pass() const { return cond15 && cond16a && cond16b; }
};

struct AssumptionReport {
    std::vector<EdgeAssumption> edges;
    bool pass = false;
};

/// Open-interval checks carry a 1e-9 degree guard band.
AssumptionReport check_assumption1(const ObjectiveDesign& design, const AdmittanceModel& model, const CVector& v,
                                   const EdgeSet& edges);

enum class RelaxationKind { pf_sdp, pf_socp, psse_sdp, psse_socp };
enum class DataFit { wlav, wls };
enum class Regularizer { m0, nuclear, none };

/// Data-fit term and what replaces Tr(M0 X): "wlav", "wls", "nuclear" (wlav + Tr X),
/// "none" (wlav alone), or explicit "wls+nuclear" style pairs.
struct Penalty {
    DataFit fit = DataFit::wlav;
    Regularizer regularizer = Regularizer::m0;
};

RelaxationKind parse_relaxation(std::string_view name);
std::string to_string(RelaxationKind kind);
Penalty parse_penalty(std::string_view text);
std::string to_string(const Penalty& penalty);

bool is_pf(RelaxationKind kind);
bool is_socp(RelaxationKind kind);

/// PF kinds: hard equalities with objective Tr(M0 X). PSSE kinds: every equality
/// slackable with penalty rho f(nu) plus the regularizer. SOCP kinds use 2x2 cones on
/// the sparsity edges of the assembled program.
ConicProgram assemble(RelaxationKind kind, const ObjectiveDesign& design, const MeasurementSet& measurements,
                      double rho = 1.0, Penalty penalty = {});

}  // namespace conicpf
