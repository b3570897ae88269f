#include "conicpf/netmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <queue>
#include <sstream>
#include <tuple>

namespace conicpf {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

[[noreturn]] void parse_fail(const std::string& msg) { throw CaseError(CaseError::Kind::parse, msg); }
[[noreturn]] void invalid(const std::string& msg) { throw CaseError(CaseError::Kind::validation, msg); }

// ---------------------------------------------------------------------------
// MATPOWER subset

struct MatrixBlock {
    std::vector<std::vector<double>> rows;
    int first_line = 0;
    std::vector<int> row_lines;
};

std::string strip_comments(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_comment = false;
    for (char c : text) {
        if (c == '\n') {
            in_comment = false;
            out.push_back(c);
        } else if (c == '%') {
            in_comment = true;
        } else if (!in_comment) {
            out.push_back(c);
        }
    }
    return out;
}

int line_of(const std::string& text, std::size_t pos) {
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

double parse_number(const std::string& token, int line, const std::string& field) {
    if (token == "Inf" || token == "inf") return HUGE_VAL;
    if (token == "-Inf" || token == "-inf") return -HUGE_VAL;
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(token, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != token.size()) {
        parse_fail("line " + std::to_string(line) + ": bad number '" + token + "' in " + field);
    }
    return value;
}

MatrixBlock parse_matrix(const std::string& text, std::size_t open, std::size_t close,
                         const std::string& name) {
    MatrixBlock block;
    block.first_line = line_of(text, open);
    std::vector<double> row;
    int line = block.first_line;
    int row_line = line;
    std::string token;
    auto flush_token = [&] {
        if (!token.empty()) {
            if (row.empty()) row_line = line;
            row.push_back(parse_number(token, line, "mpc." + name));
            token.clear();
        }
    };
    auto flush_row = [&] {
        flush_token();
        if (!row.empty()) {
            block.rows.push_back(std::move(row));
            block.row_lines.push_back(row_line);
            row.clear();
        }
    };
    for (std::size_t i = open + 1; i < close; ++i) {
        char c = text[i];
        if (c == ';' || c == '\n') {
            flush_row();
            if (c == '\n') ++line;
        } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            flush_token();
        } else {
            token.push_back(c);
        }
    }
    flush_row();
    return block;
}

void require_columns(const MatrixBlock& block, std::size_t n, const std::string& name) {
    for (std::size_t r = 0; r < block.rows.size(); ++r) {
        if (block.rows[r].size() < n) {
            parse_fail("line " + std::to_string(block.row_lines[r]) + ": mpc." + name + " row has " +
                       std::to_string(block.rows[r].size()) + " columns, need at least " + std::to_string(n));
        }
    }
}

NetworkCase parse_matpower(std::string_view raw) {
    const std::string text = strip_comments(raw);
    NetworkCase net;
    std::map<std::string, MatrixBlock> tables;
    std::optional<double> base_mva;

    std::size_t pos = 0;
    while ((pos = text.find("mpc.", pos)) != std::string::npos) {
        std::size_t name_begin = pos + 4;
        std::size_t name_end = name_begin;
        while (name_end < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[name_end])) || text[name_end] == '_')) {
            ++name_end;
        }
        const std::string name = text.substr(name_begin, name_end - name_begin);
        std::size_t eq = text.find_first_not_of(" \t", name_end);
        if (eq == std::string::npos || text[eq] != '=') {
            pos = name_end;
            continue;
        }
        std::size_t value = text.find_first_not_of(" \t\r\n", eq + 1);
        if (value == std::string::npos) {
            parse_fail("line " + std::to_string(line_of(text, eq)) + ": missing value for mpc." + name);
        }
        const bool wanted = name == "bus" || name == "branch" || name == "gen" || name == "baseMVA";
        if (text[value] == '[') {
            std::size_t close = text.find(']', value);
            if (close == std::string::npos) {
                parse_fail("line " + std::to_string(line_of(text, value)) + ": unterminated matrix mpc." + name);
            }
            if (wanted) {
                tables[name] = parse_matrix(text, value, close, name);
            } else {
                net.warnings.push_back("ignored mpc." + name);
            }
            pos = close + 1;
        } else if (text[value] == '{') {
            std::size_t close = text.find('}', value);
            if (close == std::string::npos) {
                parse_fail("line " + std::to_string(line_of(text, value)) + ": unterminated cell array mpc." + name);
            }
            net.warnings.push_back("ignored mpc." + name);
            pos = close + 1;
        } else {
            std::size_t semi = text.find_first_of(";\n", value);
            std::string token = text.substr(value, semi - value);
            while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) token.pop_back();
            if (name == "baseMVA") {
                base_mva = parse_number(token, line_of(text, value), "mpc.baseMVA");
            } else {
                net.warnings.push_back("ignored mpc." + name);
            }
            pos = semi == std::string::npos ? text.size() : semi;
        }
    }

    if (!base_mva) parse_fail("missing mpc.baseMVA");
    if (!tables.contains("bus")) parse_fail("missing mpc.bus table");
    if (!tables.contains("branch")) parse_fail("missing mpc.branch table");
    net.base_mva = *base_mva;
    if (!(net.base_mva > 0.0)) parse_fail("mpc.baseMVA must be positive");

    const auto& bus = tables["bus"];
    require_columns(bus, 9, "bus");
    for (std::size_t r = 0; r < bus.rows.size(); ++r) {
        const auto& row = bus.rows[r];
        BusRecord b;
        b.id = static_cast<int>(row[0]);
        switch (static_cast<int>(row[1])) {
            case 1: b.kind = BusKind::pq; break;
            case 2: b.kind = BusKind::pv; break;
            case 3: b.kind = BusKind::slack; break;
            default:
                parse_fail("line " + std::to_string(bus.row_lines[r]) + ": unsupported bus type " +
                           std::to_string(static_cast<int>(row[1])) + " for bus " + std::to_string(b.id));
        }
        b.load_p = row[2] / net.base_mva;
        b.load_q = row[3] / net.base_mva;
        b.shunt_g = row[4] / net.base_mva;
        b.shunt_b = row[5] / net.base_mva;
        b.vm = row[7];
        b.va = row[8] * kDeg;
        b.gen_vm = b.vm;
        net.buses.push_back(b);
    }

    std::map<int, int> index;
    for (int i = 0; i < net.bus_count(); ++i) index[net.buses[i].id] = i;

    if (tables.contains("gen")) {
        const auto& gen = tables["gen"];
        require_columns(gen, 8, "gen");
        for (std::size_t r = 0; r < gen.rows.size(); ++r) {
            const auto& row = gen.rows[r];
            if (row[7] <= 0) continue;
            auto it = index.find(static_cast<int>(row[0]));
            if (it == index.end()) {
                parse_fail("line " + std::to_string(gen.row_lines[r]) + ": generator at unknown bus " +
                           std::to_string(static_cast<int>(row[0])));
            }
            auto& b = net.buses[it->second];
            b.gen_p += row[1] / net.base_mva;
            b.gen_q += row[2] / net.base_mva;
            b.gen_vm = row[5];
            b.has_gen = true;
        }
    }

    const auto& br = tables["branch"];
    require_columns(br, 11, "branch");
    int dropped = 0;
    for (const auto& row : br.rows) {
        BranchRecord e;
        e.from = static_cast<int>(row[0]);
        e.to = static_cast<int>(row[1]);
        e.r = row[2];
        e.x = row[3];
        e.b_charging = row[4];
        e.tap = row[8] == 0.0 ? 1.0 : row[8];
        e.shift = row[9] * kDeg;
        e.in_service = row[10] > 0;
        if (!e.in_service) {
            ++dropped;
            continue;
        }
        net.branches.push_back(e);
    }
    if (dropped > 0) net.warnings.push_back("dropped " + std::to_string(dropped) + " out-of-service branches");
    return net;
}

BusKind kind_from_string(const std::string& s) {
    if (s == "slack" || s == "ref") return BusKind::slack;
    if (s == "PV" || s == "pv") return BusKind::pv;
    if (s == "PQ" || s == "pq") return BusKind::pq;
    invalid("unknown bus kind '" + s + "'");
}

std::string kind_to_string(BusKind k) {
    switch (k) {
        case BusKind::slack: return "slack";
        case BusKind::pv: return "PV";
        case BusKind::pq: return "PQ";
    }
    return "PQ";
}

}  // namespace

int NetworkCase::bus_index(int id) const {
    for (int i = 0; i < bus_count(); ++i) {
        if (buses[i].id == id) return i;
    }
    return -1;
}

int NetworkCase::slack_index() const {
    for (int i = 0; i < bus_count(); ++i) {
        if (buses[i].kind == BusKind::slack) return i;
    }
    return -1;
}

CVector NetworkCase::stored_voltages() const {
    CVector v(bus_count());
    for (int i = 0; i < bus_count(); ++i) v[i] = std::polar(buses[i].vm, buses[i].va);
    return v;
}

nlohmann::json case_to_json(const NetworkCase& net) {
    nlohmann::json doc;
    doc["base_mva"] = net.base_mva;
    doc["buses"] = nlohmann::json::array();
    for (const auto& b : net.buses) {
        doc["buses"].push_back({{"id", b.id},
                                {"kind", kind_to_string(b.kind)},
                                {"load_p", b.load_p},
                                {"load_q", b.load_q},
                                {"shunt_g", b.shunt_g},
                                {"shunt_b", b.shunt_b},
                                {"vm", b.vm},
                                {"va_deg", b.va / kDeg},
                                {"gen_p", b.gen_p},
                                {"gen_q", b.gen_q},
                                {"gen_vm", b.gen_vm},
                                {"has_gen", b.has_gen}});
    }
    doc["branches"] = nlohmann::json::array();
    for (const auto& e : net.branches) {
        doc["branches"].push_back({{"from", e.from},
                                   {"to", e.to},
                                   {"r", e.r},
                                   {"x", e.x},
                                   {"b_charging", e.b_charging},
                                   {"tap", e.tap},
                                   {"shift_deg", e.shift / kDeg},
                                   {"in_service", e.in_service}});
    }
    return doc;
}

NetworkCase case_from_json(const nlohmann::json& doc) {
    NetworkCase net;
    try {
        net.base_mva = doc.value("base_mva", 100.0);
        for (const auto& jb : doc.at("buses")) {
            BusRecord b;
            b.id = jb.at("id").get<int>();
            b.kind = kind_from_string(jb.value("kind", std::string("PQ")));
            b.load_p = jb.value("load_p", 0.0);
            b.load_q = jb.value("load_q", 0.0);
            b.shunt_g = jb.value("shunt_g", 0.0);
            b.shunt_b = jb.value("shunt_b", 0.0);
            b.vm = jb.value("vm", 1.0);
            b.va = jb.value("va_deg", 0.0) * kDeg;
            b.gen_p = jb.value("gen_p", 0.0);
            b.gen_q = jb.value("gen_q", 0.0);
            b.gen_vm = jb.value("gen_vm", b.vm);
            b.has_gen = jb.value("has_gen", false);
            net.buses.push_back(b);
        }
        int dropped = 0;
        for (const auto& je : doc.at("branches")) {
            BranchRecord e;
            e.from = je.at("from").get<int>();
            e.to = je.at("to").get<int>();
            e.r = je.value("r", 0.0);
            e.x = je.value("x", 0.0);
            e.b_charging = je.value("b_charging", 0.0);
            e.tap = je.value("tap", 1.0);
            if (e.tap == 0.0) e.tap = 1.0;
            e.shift = je.value("shift_deg", 0.0) * kDeg;
            e.in_service = je.value("in_service", true);
            if (!e.in_service) {
                ++dropped;
                continue;
            }
            net.branches.push_back(e);
        }
        if (dropped > 0) net.warnings.push_back("dropped " + std::to_string(dropped) + " out-of-service branches");
    } catch (const nlohmann::json::exception& ex) {
        parse_fail(std::string("case JSON: ") + ex.what());
    }
    return net;
}

void validate_case(const NetworkCase& net) {
    if (net.buses.empty()) invalid("case has no buses");
    std::map<int, int> index;
    for (int i = 0; i < net.bus_count(); ++i) {
        if (!index.emplace(net.buses[i].id, i).second) {
            invalid("duplicate bus id " + std::to_string(net.buses[i].id));
        }
    }
    int slack = 0;
    for (const auto& b : net.buses) slack += b.kind == BusKind::slack;
    if (slack == 0) invalid("no slack bus");
    if (slack > 1) invalid("multiple slack buses");

    for (std::size_t l = 0; l < net.branches.size(); ++l) {
        const auto& e = net.branches[l];
        if (!index.contains(e.from) || !index.contains(e.to)) {
            invalid("branch " + std::to_string(l) + " references unknown bus");
        }
        if (e.from == e.to) invalid("branch " + std::to_string(l) + " is a self loop");
        if (e.r * e.r + e.x * e.x <= 0.0) {
            invalid("branch " + std::to_string(l) + " has zero series impedance");
        }
    }

    // connectivity from the slack bus
    std::vector<std::vector<int>> adj(net.buses.size());
    for (const auto& e : net.branches) {
        adj[index[e.from]].push_back(index[e.to]);
        adj[index[e.to]].push_back(index[e.from]);
    }
    std::vector<char> seen(net.buses.size(), 0);
    std::queue<int> q;
    q.push(net.slack_index());
    seen[net.slack_index()] = 1;
    int reached = 1;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int w : adj[u]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++reached;
                q.push(w);
            }
        }
    }
    if (reached != net.bus_count()) {
        for (int i = 0; i < net.bus_count(); ++i) {
            if (!seen[i]) {
                invalid("network is disconnected: bus " + std::to_string(net.buses[i].id) + " and " +
                        std::to_string(net.bus_count() - reached - 1) + " others unreachable from the slack bus");
            }
        }
    }
}

NetworkCase parse_case(std::string_view text) {
    std::size_t first = text.find_first_not_of(" \t\r\n");
    NetworkCase net;
    if (first != std::string_view::npos && text[first] == '{') {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& ex) {
            parse_fail(std::string("case JSON: ") + ex.what());
        }
        net = case_from_json(doc);
    } else {
        net = parse_matpower(text);
    }
    validate_case(net);
    return net;
}

NetworkCase load_case(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) parse_fail("cannot open case file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

// ---------------------------------------------------------------------------
// admittance

bool AdmittanceModel::has_transformer(int branch) const {
    return std::abs(tap[branch] - cplx(1.0, 0.0)) > 1e-12;
}

bool AdmittanceModel::has_phase_shifter() const {
    return std::any_of(tap.begin(), tap.end(), [](cplx t) { return std::abs(t.imag()) > 1e-12; });
}

AdmittanceModel build_admittance(const NetworkCase& net) {
    AdmittanceModel m;
    const int n = net.bus_count();
    const int nl = net.branch_count();
    m.n_bus = n;
    std::vector<Eigen::Triplet<cplx>> ty, tf, tt;
    for (int l = 0; l < nl; ++l) {
        const auto& e = net.branches[l];
        const int f = net.bus_index(e.from);
        const int t = net.bus_index(e.to);
        const cplx ys = 1.0 / cplx(e.r, e.x);
        const cplx tap = std::polar(e.tap, e.shift);
        const cplx ytt = ys + cplx(0.0, e.b_charging / 2.0);
        const cplx yff = ytt / std::norm(tap);
        const cplx yft = -ys / std::conj(tap);
        const cplx ytf = -ys / tap;
        m.y_series.push_back(ys);
        m.tap.push_back(tap);
        m.from.push_back(f);
        m.to.push_back(t);
        tf.emplace_back(l, f, yff);
        tf.emplace_back(l, t, yft);
        tt.emplace_back(l, f, ytf);
        tt.emplace_back(l, t, ytt);
        ty.emplace_back(f, f, yff);
        ty.emplace_back(f, t, yft);
        ty.emplace_back(t, f, ytf);
        ty.emplace_back(t, t, ytt);
    }
    for (int i = 0; i < n; ++i) {
        const auto& b = net.buses[i];
        if (b.shunt_g != 0.0 || b.shunt_b != 0.0) ty.emplace_back(i, i, cplx(b.shunt_g, b.shunt_b));
    }
    m.ybus.resize(n, n);
    m.ybus.setFromTriplets(ty.begin(), ty.end());
    m.yf.resize(nl, n);
    m.yf.setFromTriplets(tf.begin(), tf.end());
    m.yt.resize(nl, n);
    m.yt.setFromTriplets(tt.begin(), tt.end());
    return m;
}

CMatrix dense_ybus_reference(const NetworkCase& net) {
    const int n = net.bus_count();
    CMatrix y = CMatrix::Zero(n, n);
    for (const auto& e : net.branches) {
        const int f = net.bus_index(e.from);
        const int t = net.bus_index(e.to);
        const cplx ys = 1.0 / cplx(e.r, e.x);
        const cplx a = std::polar(e.tap, e.shift);
        const cplx half_b(0.0, e.b_charging / 2.0);
        // pi model with an ideal transformer a:1 on the from side
        y(f, f) += (ys + half_b) / (a * std::conj(a));
        y(t, t) += ys + half_b;
        y(f, t) -= ys / std::conj(a);
        y(t, f) -= ys / a;
    }
    for (int i = 0; i < n; ++i) y(i, i) += cplx(net.buses[i].shunt_g, net.buses[i].shunt_b);
    return y;
}

CVector nodal_injections(const AdmittanceModel& model, const CVector& v) {
    CVector current = model.ybus * v;
    return v.cwiseProduct(current.conjugate());
}

// ---------------------------------------------------------------------------
// spanning subgraphs

TreeStrategy parse_tree_strategy(std::string_view name) {
    if (name == "min_weight_tree" || name == "mst" || name == "tree") return TreeStrategy::min_weight_tree;
    if (name == "full_graph" || name == "full") return TreeStrategy::full_graph;
    if (name == "explicit" || name == "explicit_list") return TreeStrategy::explicit_list;
    throw std::invalid_argument("unknown tree strategy '" + std::string(name) + "'");
}

void require_spanning(const NetworkCase& net, const EdgeSet& edges) {
    const int n = net.bus_count();
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int l : edges.branches) {
        if (l < 0 || l >= net.branch_count()) throw std::out_of_range("edge set references unknown branch");
        parent[root(net.bus_index(net.branches[l].from))] = root(net.bus_index(net.branches[l].to));
    }
    const int r0 = root(0);
    for (int i = 1; i < n; ++i) {
        if (root(i) != r0) {
            throw std::invalid_argument("edge set is not spanning: bus " + std::to_string(net.buses[i].id) +
                                        " lies in a component disconnected from bus " +
                                        std::to_string(net.buses[0].id));
        }
    }
}

bool is_acyclic(const NetworkCase& net, const EdgeSet& edges) {
    std::vector<int> parent(net.bus_count());
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int l : edges.branches) {
        int a = root(net.bus_index(net.branches[l].from));
        int b = root(net.bus_index(net.branches[l].to));
        if (a == b) return false;
        parent[a] = b;
    }
    return true;
}

EdgeSet spanning_subgraph(const NetworkCase& net, const AdmittanceModel& model, TreeStrategy strategy,
                          const std::vector<int>& explicit_branches) {
    EdgeSet out;
    switch (strategy) {
        case TreeStrategy::full_graph:
            out.branches.resize(net.branches.size());
            std::iota(out.branches.begin(), out.branches.end(), 0);
            break;
        case TreeStrategy::explicit_list:
            out.branches = explicit_branches;
            break;
        case TreeStrategy::min_weight_tree: {
            const int n = net.bus_count();
            std::vector<std::vector<int>> incident(n);
            for (int l = 0; l < net.branch_count(); ++l) {
                incident[model.from[l]].push_back(l);
                incident[model.to[l]].push_back(l);
            }
            using Key = std::tuple<double, int, int, int>;  // weight, lo id, hi id, branch
            auto key = [&](int l) {
                int a = net.branches[l].from;
                int b = net.branches[l].to;
                return Key{1.0 / std::abs(model.y_series[l]), std::min(a, b), std::max(a, b), l};
            };
            std::priority_queue<Key, std::vector<Key>, std::greater<>> heap;
            std::vector<char> in_tree(n, 0);
            auto visit = [&](int u) {
                in_tree[u] = 1;
                for (int l : incident[u]) {
                    int w = model.from[l] == u ? model.to[l] : model.from[l];
                    if (!in_tree[w]) heap.push(key(l));
                }
            };
            const int start = std::max(net.slack_index(), 0);
            visit(start);
            while (!heap.empty()) {
                auto [w, lo, hi, l] = heap.top();
                heap.pop();
                int a = model.from[l];
                int b = model.to[l];
                if (in_tree[a] && in_tree[b]) continue;
                out.branches.push_back(l);
                visit(in_tree[a] ? b : a);
            }
            std::sort(out.branches.begin(), out.branches.end());
            break;
        }
    }
    require_spanning(net, out);
    return out;
}

// ---------------------------------------------------------------------------
// power flow

PowerFlowResult solve_power_flow(const NetworkCase& net, const AdmittanceModel& model, int max_iterations,
                                 double tol) {
    const int n = net.bus_count();
    if (n > 3000) throw std::invalid_argument("power flow solve limited to 3000 buses; use a solved case");
    Eigen::VectorXd vm(n), va(n), p_spec(n), q_spec(n);
    std::vector<int> pvpq, pq;
    for (int i = 0; i < n; ++i) {
        const auto& b = net.buses[i];
        vm[i] = b.kind == BusKind::pq ? b.vm : (b.has_gen ? b.gen_vm : b.vm);
        va[i] = b.va;
        p_spec[i] = b.gen_p - b.load_p;
        q_spec[i] = b.gen_q - b.load_q;
        if (b.kind != BusKind::slack) pvpq.push_back(i);
        if (b.kind == BusKind::pq) pq.push_back(i);
    }
    const CMatrix y = CMatrix(model.ybus);
    PowerFlowResult res;
    const int np = static_cast<int>(pvpq.size());
    const int nq = static_cast<int>(pq.size());
    for (int it = 0; it <= max_iterations; ++it) {
        CVector v(n);
        for (int i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
        CVector ibus = y * v;
        CVector s = v.cwiseProduct(ibus.conjugate());
        Eigen::VectorXd f(np + nq);
        for (int k = 0; k < np; ++k) f[k] = s[pvpq[k]].real() - p_spec[pvpq[k]];
        for (int k = 0; k < nq; ++k) f[np + k] = s[pq[k]].imag() - q_spec[pq[k]];
        res.mismatch = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
        res.iterations = it;
        res.v = v;
        if (res.mismatch < tol) {
            res.converged = true;
            break;
        }
        if (it == max_iterations) break;
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        CVector vnorm = v.cwiseQuotient(vm.cast<cplx>());
        CMatrix ds_dva = CMatrix(ibus.asDiagonal()) - y * v.asDiagonal();
        ds_dva = (cplx(0, 1) * v).asDiagonal() * ds_dva.conjugate();
        CMatrix ds_dvm = v.asDiagonal() * (y * vnorm.asDiagonal()).conjugate();
        ds_dvm += CMatrix(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();
        Eigen::MatrixXd jac(np + nq, np + nq);
        for (int r = 0; r < np; ++r) {
            for (int c = 0; c < np; ++c) jac(r, c) = ds_dva(pvpq[r], pvpq[c]).real();
            for (int c = 0; c < nq; ++c) jac(r, np + c) = ds_dvm(pvpq[r], pq[c]).real();
        }
        for (int r = 0; r < nq; ++r) {
            for (int c = 0; c < np; ++c) jac(np + r, c) = ds_dva(pq[r], pvpq[c]).imag();
            for (int c = 0; c < nq; ++c) jac(np + r, np + c) = ds_dvm(pq[r], pq[c]).imag();
        }
        Eigen::VectorXd dx = -jac.partialPivLu().solve(f);
        for (int k = 0; k < np; ++k) va[pvpq[k]] += dx[k];
        for (int k = 0; k < nq; ++k) vm[pq[k]] += dx[np + k];
    }
    return res;
}

CVector operating_point(const NetworkCase& net, const AdmittanceModel& model, OperatingPointSource source) {
    bool flat = std::all_of(net.buses.begin(), net.buses.end(), [](const BusRecord& b) { return b.va == 0.0; });
    if (source == OperatingPointSource::stored || (source == OperatingPointSource::automatic && !flat)) {
        return net.stored_voltages();
    }
    auto pf = solve_power_flow(net, model);
    if (!pf.converged) {
        throw std::runtime_error("power flow did not converge (mismatch " + std::to_string(pf.mismatch) + ")");
    }
    return pf.v;
}

}  // namespace conicpf
