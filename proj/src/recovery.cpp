#include "conicpf/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "conicpf/sdp.hpp"

namespace conicpf {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap(double a) {
    a = std::remainder(a, 2.0 * kPi);
    return a <= -kPi ? a + 2.0 * kPi : a;
}

struct Adjacency {
    // neighbour, edge index into the support list
    std::vector<std::vector<std::pair<int, int>>> nb;
};

Adjacency adjacency(int n, const std::vector<std::pair<int, int>>& edges) {
    Adjacency a;
    a.nb.resize(n);
    for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
        auto [s, t] = edges[e];
        if (s < 0 || t < 0 || s >= n || t >= n) throw std::invalid_argument("support edge out of range");
        a.nb[s].emplace_back(t, e);
        a.nb[t].emplace_back(s, e);
    }
    return a;
}

// BFS from the reference; theta_t = theta_s - phi(s, t). Returns the number of tree edges used.
template <class Phi>
int propagate(int n, int ref, const Adjacency& adj, Phi phi, std::vector<double>& theta) {
    theta.assign(n, 0.0);
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(ref);
    seen[ref] = 1;
    int used = 0;
    while (!q.empty()) {
        const int s = q.front();
        q.pop();
        for (auto [t, e] : adj.nb[s]) {
            if (seen[t]) continue;
            seen[t] = 1;
            theta[t] = theta[s] - phi(s, t, e);
            ++used;
            q.push(t);
        }
    }
    if (used != n - 1) throw std::invalid_argument("edge support is disconnected");
    return used;
}

}  // namespace

std::string to_string(RecoveryMethod method) {
    switch (method) {
        case RecoveryMethod::rank1_exact: return "rank1_exact";
        case RecoveryMethod::rank1_approx: return "rank1_approx";
        case RecoveryMethod::direct_oracle: return "direct_oracle";
        case RecoveryMethod::gauss_newton: return "gauss_newton";
    }
    return "?";
}

VoltageEstimate rank1_recover(const HermitianSparse& x, int ref_bus, const std::vector<std::pair<int, int>>& support,
                              AngleSolver solver) {
    const int n = x.dim();
    if (ref_bus < 0 || ref_bus >= n) throw std::invalid_argument("reference bus out of range");
    std::vector<double> mag(n);
    for (int k = 0; k < n; ++k) {
        const double d = x.at(k, k).real();
        if (d < -1e-9) throw std::invalid_argument("negative diagonal entry in X at index " + std::to_string(k));
        mag[k] = std::sqrt(std::max(d, 0.0));
    }

    const Adjacency adj = adjacency(n, support);
    std::vector<double> theta;
    propagate(n, ref_bus, adj, [&](int s, int t, int) { return std::arg(x.at(s, t)); }, theta);

    const bool tree = static_cast<int>(support.size()) == n - 1;
    const bool use_lp = solver == AngleSolver::linear_program || (solver == AngleSolver::automatic && !tree);
    VoltageEstimate est;
    est.ref_bus = ref_bus;
    est.method = use_lp ? RecoveryMethod::rank1_approx : RecoveryMethod::rank1_exact;

    if (use_lp && !support.empty()) {
        // theta_k = c_k + w_k with c_k = theta_prop_k - pi and 0 <= w_k <= 2 pi for k != ref;
        // residual r_e = r+_e - r-_e. Columns: w (n-1), w' (n-1), r+ (E), r- (E).
        const int ne = static_cast<int>(support.size());
        std::vector<int> col(n, -1);
        int nw = 0;
        for (int k = 0; k < n; ++k)
            if (k != ref_bus) col[k] = nw++;
        RealConicProgram lp;
        lp.lp_size = 2 * nw + 2 * ne;
        lp.lp_cost.assign(lp.lp_size, 0.0);
        for (int e = 0; e < 2 * ne; ++e) lp.lp_cost[2 * nw + e] = 1.0;
        auto offset = [&](int k) { return k == ref_bus ? 0.0 : theta[k] - kPi; };
        for (int e = 0; e < ne; ++e) {
            auto [s, t] = support[e];
            // unwrap the measured angle next to the propagated difference
            const double prop = theta[s] - theta[t];
            const double phi = prop + wrap(std::arg(x.at(s, t)) - prop);
            RealConstraint row;
            row.lp_entries = {{2 * nw + e, 1.0}, {2 * nw + ne + e, -1.0}};
            if (s != ref_bus) row.lp_entries.push_back({col[s], 1.0});
            if (t != ref_bus) row.lp_entries.push_back({col[t], -1.0});
            row.rhs = phi - offset(s) + offset(t);
            lp.constraints.push_back(std::move(row));
        }
        for (int k = 0; k < nw; ++k) lp.constraints.push_back({{}, {{k, 1.0}, {nw + k, 1.0}}, 2.0 * kPi});
        const auto sol = solve_real(lp, SolverOptions{1e-10, 200, ExecPolicy::serial, false});
        if (sol.status != SolveStatus::optimal) throw std::runtime_error("angle LP failed: " + sol.message);
        for (int k = 0; k < n; ++k) {
            if (k != ref_bus) theta[k] = offset(k) + sol.x_lp[col[k]];
        }
    }

    est.v.resize(n);
    for (int k = 0; k < n; ++k) est.v[k] = std::polar(mag[k], theta[k]);
    return est;
}

VoltageEstimate direct_pf_oracle(const AdmittanceModel& model, const std::vector<double>& magnitudes,
                                 const std::vector<FlowReading>& flows, const EdgeSet& edges, int ref_bus) {
    const int n = model.n_bus;
    if (static_cast<int>(magnitudes.size()) != n) throw std::invalid_argument("magnitude vector length mismatch");
    if (ref_bus < 0 || ref_bus >= n) throw std::invalid_argument("reference bus out of range");
    std::vector<std::pair<int, int>> support;
    std::vector<double> delta;  // angle v_s - angle v_t per edge, oriented from -> to
    for (int l : edges.branches) {
        const auto it = std::find_if(flows.begin(), flows.end(), [&](const FlowReading& f) { return f.branch == l; });
        if (it == flows.end()) throw std::invalid_argument("no p_from reading for branch " + std::to_string(l));
        const int s = model.from[l], t = model.to[l];
        const double vs = magnitudes[s], vt = magnitudes[t];
        // p = a |v_s|^2 - |v_s||v_t||w| cos(delta - angle w), with a and w from the flow matrix
        const double a = model.yf.coeff(l, s).real();
        const cplx w = -model.yf.coeff(l, t);
        double arg = (a * vs * vs - it->p_from) / (vs * vt * std::abs(w));
        if (std::abs(arg) > 1.0 + 1e-9) {
            throw std::invalid_argument("inconsistent data on branch " + std::to_string(l) +
                                        ": arccos argument " + std::to_string(arg));
        }
        arg = std::clamp(arg, -1.0, 1.0);
        const double ay = std::arg(model.y_series[l]);
        const double guard = 1e-9 * kPi / 180.0;
        bool found = false;
        for (double sign : {1.0, -1.0}) {
            const double d = std::arg(w) + sign * std::acos(arg);
            const double rel = wrap(d - ay);
            if (rel > guard && rel < kPi - guard) {
                delta.push_back(d);
                found = true;
                break;
            }
        }
        if (!found) throw std::invalid_argument("no angle branch satisfies the condition on branch " + std::to_string(l));
        support.emplace_back(s, t);
    }

    const Adjacency adj = adjacency(n, support);
    std::vector<double> theta;
    propagate(n, ref_bus, adj,
              [&](int s, int, int e) { return support[e].first == s ? delta[e] : -delta[e]; }, theta);
    VoltageEstimate est;
    est.ref_bus = ref_bus;
    est.method = RecoveryMethod::direct_oracle;
    est.v.resize(n);
    for (int k = 0; k < n; ++k) est.v[k] = std::polar(magnitudes[k], theta[k]);
    return est;
}

CVector rereference(const CVector& v, int ref_bus) {
    if (ref_bus < 0 || ref_bus >= v.size()) throw std::invalid_argument("reference bus out of range");
    const double a = std::arg(v[ref_bus]);
    return v * std::polar(1.0, -a);
}

double rmse(const CVector& v_hat, const CVector& v_true, int ref_bus) {
    if (v_hat.size() != v_true.size()) throw std::invalid_argument("voltage vectors differ in length");
    return (rereference(v_hat, ref_bus) - rereference(v_true, ref_bus)).norm() /
           std::sqrt(static_cast<double>(v_true.size()));
}

std::string to_csv(const VoltageEstimate& estimate, const NetworkCase& net) {
    std::ostringstream out;
    out << "bus,vm,va_deg\n";
    const CVector v = rereference(estimate.v, estimate.ref_bus);
    char buf[96];
    for (int k = 0; k < v.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%d,%.10f,%.8f\n", net.buses[k].id, std::abs(v[k]),
                      std::arg(v[k]) * 180.0 / kPi);
        out << buf;
    }
    return out.str();
}

}  // namespace conicpf
