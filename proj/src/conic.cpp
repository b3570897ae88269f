#include "conicpf/conic.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Eigenvalues>

namespace conicpf {

std::string to_string(ConeMode mode) {
    switch (mode) {
        case ConeMode::full_psd: return "full_psd";
        case ConeMode::psd_bags: return "psd_bags";
        case ConeMode::two_by_two: return "two_by_two";
    }
    return "?";
}

std::string to_string(SlackPenalty penalty) {
    switch (penalty) {
        case SlackPenalty::none: return "none";
        case SlackPenalty::wlav: return "wlav";
        case SlackPenalty::wls: return "wls";
    }
    return "?";
}

namespace {

std::uint64_t pair_key(int i, int j, int n) { return static_cast<std::uint64_t>(i) * n + j; }

void collect_support(const HermitianSparse& m, std::set<std::pair<int, int>>& out) {
    for (const auto& e : m.entries()) {
        if (e.row != e.col && e.value != cplx{}) out.emplace(e.row, e.col);
    }
}

// Bags the real program is built on, with an owner for every covered entry.
struct BagIndex {
    int n = 0;
    std::vector<std::vector<int>> bags;
    std::unordered_map<std::uint64_t, int> owner;

    explicit BagIndex(const ConicProgram& p) : n(p.dimension) {
        switch (p.cone) {
            case ConeMode::full_psd: {
                std::vector<int> all(n);
                std::iota(all.begin(), all.end(), 0);
                bags.push_back(std::move(all));
                break;
            }
            case ConeMode::psd_bags:
                bags = p.bags;
                break;
            case ConeMode::two_by_two: {
                std::vector<char> seen(n, 0);
                for (auto [s, t] : p.edges) {
                    bags.push_back({s, t});
                    seen[s] = seen[t] = 1;
                }
                for (int k = 0; k < n; ++k) {
                    if (!seen[k]) bags.push_back({k});
                }
                break;
            }
        }
        for (int b = 0; b < static_cast<int>(bags.size()); ++b) {
            const auto& bag = bags[b];
            for (std::size_t p1 = 0; p1 < bag.size(); ++p1) {
                for (std::size_t q1 = p1; q1 < bag.size(); ++q1) owner.try_emplace(pair_key(bag[p1], bag[q1], n), b);
            }
        }
    }

    int local(int bag, int v) const {
        const auto& b = bags[bag];
        return static_cast<int>(std::lower_bound(b.begin(), b.end(), v) - b.begin());
    }
    int owner_of(int i, int j) const {
        if (i > j) std::swap(i, j);
        auto it = owner.find(pair_key(i, j, n));
        return it == owner.end() ? -1 : it->second;
    }
};

// Adds (a/2) embed(E_pq + conj) of a Hermitian entry to a real block of half-size nb.
void add_embedded(std::vector<BlockEntry>& out, int block, int nb, int p, int q, cplx a) {
    if (p > q) {
        std::swap(p, q);
        a = std::conj(a);
    }
    if (p == q) {
        out.push_back({block, p, p, 0.5 * a.real()});
        out.push_back({block, p + nb, p + nb, 0.5 * a.real()});
        return;
    }
    if (a.real() != 0.0) {
        out.push_back({block, p, q, 0.5 * a.real()});
        out.push_back({block, p + nb, q + nb, 0.5 * a.real()});
    }
    if (a.imag() != 0.0) {
        out.push_back({block, q, p + nb, 0.5 * a.imag()});
        out.push_back({block, p, q + nb, -0.5 * a.imag()});
    }
}

void add_matrix(const BagIndex& index, const HermitianSparse& m, std::vector<BlockEntry>& out) {
    for (const auto& e : m.entries()) {
        if (e.value == cplx{}) continue;
        const int b = index.owner_of(e.row, e.col);
        if (b < 0) throw std::invalid_argument("matrix entry not covered by the cone structure");
        const int nb = static_cast<int>(index.bags[b].size());
        add_embedded(out, b, nb, index.local(b, e.row), index.local(b, e.col), e.value);
    }
}

}  // namespace

std::vector<std::pair<int, int>> ConicProgram::sparsity_edges() const {
    std::set<std::pair<int, int>> support;
    collect_support(objective, support);
    for (const auto& c : constraints) collect_support(c.matrix, support);
    return {support.begin(), support.end()};
}

void ConicProgram::validate() const {
    if (dimension <= 0) throw std::invalid_argument("conic program dimension must be positive");
    if (objective.dim() != dimension) throw std::invalid_argument("objective dimension mismatch");
    bool any_slack = false;
    for (const auto& c : constraints) {
        if (c.matrix.dim() != dimension) throw std::invalid_argument("constraint dimension mismatch");
        if (c.slack) {
            any_slack = true;
            if (!(c.sigma > 0.0)) throw std::invalid_argument("slack weight sigma must be positive");
        }
    }
    if (any_slack && penalty == SlackPenalty::none) {
        throw std::invalid_argument("slackable constraints need a WLAV or WLS penalty");
    }
    if (!(rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");

    std::vector<char> covered(dimension, 0);
    std::set<std::pair<int, int>> pairs;
    if (cone == ConeMode::psd_bags) {
        if (bags.empty()) throw std::invalid_argument("psd_bags mode needs at least one bag");
        for (const auto& bag : bags) {
            if (bag.empty()) throw std::invalid_argument("empty bag");
            for (std::size_t k = 0; k < bag.size(); ++k) {
                if (bag[k] < 0 || bag[k] >= dimension) throw std::invalid_argument("bag index out of range");
                if (k > 0 && bag[k] <= bag[k - 1]) throw std::invalid_argument("bags must be sorted and unique");
                covered[bag[k]] = 1;
                for (std::size_t q = k + 1; q < bag.size(); ++q) pairs.emplace(bag[k], bag[q]);
            }
        }
        if (std::find(covered.begin(), covered.end(), 0) != covered.end()) {
            throw std::invalid_argument("bags do not cover every vertex");
        }
    } else if (cone == ConeMode::two_by_two) {
        for (auto [s, t] : edges) {
            if (s < 0 || t >= dimension || s >= t) throw std::invalid_argument("cone edge out of range");
            pairs.emplace(s, t);
        }
    }
    if (cone != ConeMode::full_psd) {
        for (auto e : sparsity_edges()) {
            if (!pairs.count(e)) {
                throw std::invalid_argument("entry (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                                            ") is not covered by the cone structure");
            }
        }
    }
}

long ConicProgram::scalar_variable_count() const {
    long off = 0;
    if (cone == ConeMode::full_psd) {
        off = static_cast<long>(dimension) * (dimension - 1) / 2;
    } else if (cone == ConeMode::two_by_two) {
        off = static_cast<long>(std::set<std::pair<int, int>>(edges.begin(), edges.end()).size());
    } else {
        std::set<std::pair<int, int>> pairs;
        for (const auto& bag : bags)
            for (std::size_t k = 0; k < bag.size(); ++k)
                for (std::size_t q = k + 1; q < bag.size(); ++q) pairs.emplace(bag[k], bag[q]);
        off = static_cast<long>(pairs.size());
    }
    const long slacks = std::count_if(constraints.begin(), constraints.end(), [](const auto& c) { return c.slack; });
    return dimension + 2 * off + slacks;
}

TreeDecomposition tree_decomposition(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::set<int>> adj(n);
    for (auto [s, t] : edges) {
        if (s < 0 || t < 0 || s >= n || t >= n) throw std::invalid_argument("edge index out of range");
        if (s == t) continue;
        adj[s].insert(t);
        adj[t].insert(s);
    }
    std::set<std::pair<int, int>> queue;
    for (int v = 0; v < n; ++v) queue.emplace(static_cast<int>(adj[v].size()), v);

    std::vector<std::vector<int>> candidates;
    while (!queue.empty()) {
        const int v = queue.begin()->second;
        queue.erase(queue.begin());
        std::vector<int> nb(adj[v].begin(), adj[v].end());
        std::vector<int> clique = nb;
        clique.push_back(v);
        std::sort(clique.begin(), clique.end());
        candidates.push_back(std::move(clique));
        for (int a : nb) {
            queue.erase({static_cast<int>(adj[a].size()), a});
            adj[a].erase(v);
        }
        for (std::size_t i = 0; i < nb.size(); ++i) {
            for (std::size_t j = i + 1; j < nb.size(); ++j) {
                adj[nb[i]].insert(nb[j]);
                adj[nb[j]].insert(nb[i]);
            }
        }
        for (int a : nb) queue.emplace(static_cast<int>(adj[a].size()), a);
        adj[v].clear();
    }

    // keep maximal candidates; larger ones first so containment is checked against kept bags only
    std::vector<int> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return candidates[a].size() > candidates[b].size(); });
    TreeDecomposition td;
    std::vector<std::vector<int>> bags_of(n);
    for (int c : order) {
        const auto& cand = candidates[c];
        bool contained = false;
        for (int b : bags_of[cand.front()]) {
            if (std::includes(td.bags[b].begin(), td.bags[b].end(), cand.begin(), cand.end())) {
                contained = true;
                break;
            }
        }
        if (contained) continue;
        const int id = static_cast<int>(td.bags.size());
        for (int v : cand) bags_of[v].push_back(id);
        td.bags.push_back(cand);
    }

    // maximum-weight spanning forest on intersection sizes (Kruskal)
    std::map<std::pair<int, int>, int> weight;
    for (int v = 0; v < n; ++v) {
        const auto& list = bags_of[v];
        for (std::size_t i = 0; i < list.size(); ++i)
            for (std::size_t j = i + 1; j < list.size(); ++j)
                ++weight[{std::min(list[i], list[j]), std::max(list[i], list[j])}];
    }
    std::vector<std::pair<int, std::pair<int, int>>> ranked;
    for (const auto& [e, w] : weight) ranked.push_back({w, e});
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<int> parent(td.bags.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [w, e] : ranked) {
        const int a = root(e.first), b = root(e.second);
        if (a == b) continue;
        parent[a] = b;
        td.tree_edges.push_back(e);
    }
    return td;
}

bool vertex_coverage(const TreeDecomposition& td, int n) {
    std::vector<char> seen(n, 0);
    for (const auto& bag : td.bags)
        for (int v : bag)
            if (v >= 0 && v < n) seen[v] = 1;
    return std::find(seen.begin(), seen.end(), 0) == seen.end();
}

bool edge_coverage(const TreeDecomposition& td, const std::vector<std::pair<int, int>>& edges) {
    for (auto [s, t] : edges) {
        const bool found = std::any_of(td.bags.begin(), td.bags.end(), [&](const std::vector<int>& bag) {
            return std::binary_search(bag.begin(), bag.end(), s) && std::binary_search(bag.begin(), bag.end(), t);
        });
        if (!found) return false;
    }
    return true;
}

bool running_intersection(const TreeDecomposition& td, int n) {
    // bags containing v must induce a connected subforest: |edges| = |bags| - 1
    std::vector<int> bag_count(n, 0), edge_count(n, 0);
    for (const auto& bag : td.bags)
        for (int v : bag) ++bag_count[v];
    for (auto [a, b] : td.tree_edges) {
        std::vector<int> common;
        std::set_intersection(td.bags[a].begin(), td.bags[a].end(), td.bags[b].begin(), td.bags[b].end(),
                              std::back_inserter(common));
        for (int v : common) ++edge_count[v];
    }
    for (int v = 0; v < n; ++v) {
        if (bag_count[v] > 0 && edge_count[v] != bag_count[v] - 1) return false;
    }
    return true;
}

ConicProgram decompose(const ConicProgram& program) {
    if (program.cone != ConeMode::full_psd) throw std::invalid_argument("decompose expects a full_psd program");
    ConicProgram out = program;
    out.cone = ConeMode::psd_bags;
    out.bags = tree_decomposition(program.dimension, program.sparsity_edges()).bags;
    return out;
}

Eigen::MatrixXd embed_hermitian(const CMatrix& h) {
    const auto n = h.rows();
    Eigen::MatrixXd z(2 * n, 2 * n);
    z.topLeftCorner(n, n) = h.real();
    z.bottomRightCorner(n, n) = h.real();
    z.topRightCorner(n, n) = -h.imag();
    z.bottomLeftCorner(n, n) = h.imag();
    return z;
}

CMatrix extract_hermitian(const Eigen::MatrixXd& z) {
    const auto n = z.rows() / 2;
    CMatrix h(n, n);
    h.real() = 0.5 * (z.topLeftCorner(n, n) + z.bottomRightCorner(n, n));
    h.imag() = 0.5 * (z.bottomLeftCorner(n, n) - z.topRightCorner(n, n));
    return 0.5 * (h + h.adjoint());
}

RotatedSoc rotated_soc(double xss, double xtt, cplx xst) { return {xss, xtt, xss * xtt - std::norm(xst)}; }

RealForm to_real(const ConicProgram& program) {
    program.validate();
    const BagIndex index(program);
    RealForm rf;
    rf.bags = index.bags;
    auto& rp = rf.program;
    for (const auto& bag : index.bags) rp.block_sizes.push_back(2 * static_cast<int>(bag.size()));
    const int n_bag_blocks = static_cast<int>(rp.block_sizes.size());

    add_matrix(index, program.objective, rp.objective);

    const int m = static_cast<int>(program.constraints.size());
    rf.measurement_rows = m;
    rf.slack_index.assign(m, -1);
    std::vector<int> wls_blocks;
    for (int j = 0; j < m; ++j) {
        const auto& c = program.constraints[j];
        RealConstraint row;
        row.rhs = c.rhs;
        add_matrix(index, c.matrix, row.block_entries);
        if (c.slack && program.penalty == SlackPenalty::wlav) {
            const int k = rp.lp_size;
            rp.lp_size += 2;
            rp.lp_cost.push_back(program.rho / c.sigma);
            rp.lp_cost.push_back(program.rho / c.sigma);
            row.lp_entries = {{k, 1.0}, {k + 1, -1.0}};
            rf.slack_index[j] = k;
        } else if (c.slack && program.penalty == SlackPenalty::wls) {
            // [[t, nu],[nu, 1]] PSD <=> t >= nu^2
            const int b = static_cast<int>(rp.block_sizes.size());
            rp.block_sizes.push_back(2);
            rp.objective.push_back({b, 0, 0, program.rho / (c.sigma * c.sigma)});
            row.block_entries.push_back({b, 0, 1, 0.5});
            rf.slack_index[j] = b;
            wls_blocks.push_back(b);
        }
        rp.constraints.push_back(std::move(row));
    }

    // shared entries agree with their owner bag
    for (int b = 0; b < n_bag_blocks; ++b) {
        const auto& bag = index.bags[b];
        const int nb = static_cast<int>(bag.size());
        for (int p = 0; p < nb; ++p) {
            for (int q = p; q < nb; ++q) {
                const int o = index.owner_of(bag[p], bag[q]);
                if (o == b) continue;
                const int no = static_cast<int>(index.bags[o].size());
                const int po = index.local(o, bag[p]), qo = index.local(o, bag[q]);
                const std::vector<cplx> parts = p == q ? std::vector<cplx>{1.0} : std::vector<cplx>{1.0, {0.0, 1.0}};
                for (cplx a : parts) {
                    RealConstraint row;
                    add_embedded(row.block_entries, o, no, po, qo, a);
                    add_embedded(row.block_entries, b, nb, p, q, -a);
                    rp.constraints.push_back(std::move(row));
                    ++rf.linking_rows;
                }
            }
        }
    }
    for (int b : wls_blocks) rp.constraints.push_back({{{b, 1, 1, 1.0}}, {}, 1.0});
    if (rp.lp_size == 0) rp.lp_cost.clear();
    return rf;
}

CMatrix ConicSolution::dense() const {
    if (!full()) throw std::logic_error("solution does not hold the full matrix");
    return blocks.front();
}

ConicSolution solve(const ConicProgram& program, const SolverOptions& options) {
    const RealForm rf = to_real(program);
    const RealSolution rs = solve_real(rf.program, options);

    ConicSolution sol;
    sol.status = rs.status == SolveStatus::unbounded ? SolveStatus::infeasible : rs.status;
    sol.message = rs.status == SolveStatus::unbounded ? "dual infeasible: " + rs.message : rs.message;
    sol.objective = rs.primal_objective;
    sol.dual_objective = rs.dual_objective;
    sol.primal_residual = rs.primal_residual;
    sol.dual_residual = rs.dual_residual;
    sol.gap = rs.gap;
    sol.iterations = rs.iterations;
    sol.bags = rf.bags;
    if (rs.x_blocks.empty()) {
        sol.x = HermitianSparse(program.dimension);
        return sol;
    }

    const int n = program.dimension;
    std::vector<HermitianEntry> entries;
    sol.min_block_eigenvalue = std::numeric_limits<double>::infinity();
    std::unordered_map<std::uint64_t, char> done;
    for (std::size_t b = 0; b < rf.bags.size(); ++b) {
        const auto& bag = rf.bags[b];
        CMatrix h = extract_hermitian(rs.x_blocks[b]);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
        sol.min_block_eigenvalue = std::min(sol.min_block_eigenvalue, es.eigenvalues().minCoeff());
        for (std::size_t p = 0; p < bag.size(); ++p) {
            for (std::size_t q = p; q < bag.size(); ++q) {
                if (done.try_emplace(pair_key(bag[p], bag[q], n), 1).second) {
                    entries.push_back({bag[p], bag[q], h(p, q)});
                }
            }
        }
        sol.blocks.push_back(std::move(h));
    }
    sol.x = HermitianSparse::from_entries(n, std::move(entries));

    const int m = rf.measurement_rows;
    sol.mu.resize(m);
    sol.slack.assign(m, 0.0);
    for (int j = 0; j < m; ++j) {
        sol.mu[j] = -rs.y[j];
        const int k = rf.slack_index[j];
        if (k < 0) continue;
        sol.slack[j] = program.penalty == SlackPenalty::wlav ? rs.x_lp[k] - rs.x_lp[k + 1] : rs.x_blocks[k](0, 1);
    }
    return sol;
}

nlohmann::json to_json(const ConicProgram& program) {
    auto triplets = [](const HermitianSparse& m) {
        auto arr = nlohmann::json::array();
        for (const auto& e : m.entries()) arr.push_back({e.row, e.col, e.value.real(), e.value.imag()});
        return arr;
    };
    nlohmann::json doc;
    doc["dimension"] = program.dimension;
    doc["objective"] = triplets(program.objective);
    doc["penalty"] = to_string(program.penalty);
    doc["rho"] = program.rho;
    doc["constraints"] = nlohmann::json::array();
    for (const auto& c : program.constraints) {
        doc["constraints"].push_back({{"label", c.label},
                                      {"rhs", c.rhs},
                                      {"slack", c.slack},
                                      {"sigma", c.sigma},
                                      {"entries", triplets(c.matrix)}});
    }
    nlohmann::json cone{{"mode", to_string(program.cone)}};
    if (program.cone == ConeMode::psd_bags) cone["bags"] = program.bags;
    if (program.cone == ConeMode::two_by_two) cone["edges"] = program.edges;
    doc["cone"] = cone;
    return doc;
}

}  // namespace conicpf
