// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mile/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mile/errors.hpp"

namespace mile {

Graph Graph::from_edge_list(std::span<const Edge> edges, std::optional<NodeId> node_count_hint) {
    NodeId n = node_count_hint.value_or(0);
    if (n < 0) throw DimensionError("node count hint must be nonnegative");
    for (const auto& e : edges) {
        if (e.u < 0 || e.v < 0) throw DimensionError("negative node id");
        if (!(e.w > 0.0) || !std::isfinite(e.w))
            throw WeightDomainError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                    ") has nonpositive or non-finite weight");
        if (node_count_hint && (e.u >= *node_count_hint || e.v >= *node_count_hint))
            throw DimensionError("node id exceeds node count hint " + std::to_string(*node_count_hint));
        n = std::max({n, e.u + 1, e.v + 1});
    }

    struct Entry {
        NodeId row, col;
        double w;
    };
    std::vector<Entry> entries;
    entries.reserve(2 * edges.size());
    for (const auto& e : edges) {
        entries.push_back({e.u, e.v, e.w});
        if (e.u != e.v) entries.push_back({e.v, e.u, e.w});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    Graph g;
    g.offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t i = 0; i < entries.size();) {
        std::size_t j = i;
        double w = 0.0;
        for (; j < entries.size() && entries[j].row == entries[i].row && entries[j].col == entries[i].col; ++j)
            w += entries[j].w;
        g.neighbors_.push_back(entries[i].col);
        g.weights_.push_back(w);
        ++g.offsets_[entries[i].row + 1];
        i = j;
    }
    for (NodeId u = 0; u < n; ++u) g.offsets_[u + 1] += g.offsets_[u];
    g.finalize();
    return g;
}

Graph Graph::from_csr(std::vector<std::int64_t> offsets, std::vector<NodeId> neighbors,
                      std::vector<double> weights) {
    if (offsets.empty() || offsets.front() != 0 ||
        offsets.back() != static_cast<std::int64_t>(neighbors.size()) || neighbors.size() != weights.size())
        throw DimensionError("inconsistent CSR arrays");
    const auto n = static_cast<NodeId>(offsets.size() - 1);
    for (NodeId u = 0; u < n; ++u) {
        if (offsets[u] > offsets[u + 1]) throw DimensionError("row offsets must be nondecreasing");
        for (auto k = offsets[u]; k < offsets[u + 1]; ++k) {
            if (neighbors[k] < 0 || neighbors[k] >= n) throw DimensionError("neighbor id out of range");
            if (k > offsets[u] && neighbors[k] <= neighbors[k - 1])
                throw ConsistencyError("neighbor ids must be strictly increasing");
            if (!(weights[k] > 0.0) || !std::isfinite(weights[k]))
                throw WeightDomainError("nonpositive or non-finite weight");
        }
    }
    Graph g;
    g.offsets_ = std::move(offsets);
    g.neighbors_ = std::move(neighbors);
    g.weights_ = std::move(weights);
    for (NodeId u = 0; u < n; ++u)
        for (auto k = g.offsets_[u]; k < g.offsets_[u + 1]; ++k)
            if (g.weight(g.neighbors_[k], u) != g.weights_[k]) throw ConsistencyError("adjacency is not symmetric");
    g.finalize();
    return g;
}

void Graph::finalize() {
    const NodeId n = node_count();
    degree_.assign(static_cast<std::size_t>(n), 0.0);
    edge_count_ = 0;
    for (NodeId u = 0; u < n; ++u) {
        double d = 0.0;
        for (auto k = offsets_[u]; k < offsets_[u + 1]; ++k) {
            d += weights_[k];
            if (neighbors_[k] >= u) ++edge_count_;
        }
        degree_[u] = d;
    }
}

void Graph::check_node(NodeId u) const {
    if (u < 0 || u >= node_count())
        throw DimensionError("node id " + std::to_string(u) + " out of range [0, " + std::to_string(node_count()) + ")");
}

NodeId Graph::neighbor_count(NodeId u) const {
    check_node(u);
    const auto row = neighbors(u);
    const bool self = std::binary_search(row.begin(), row.end(), u);
    return static_cast<NodeId>(row.size()) - (self ? 1 : 0);
}

double Graph::weighted_degree(NodeId u) const {
    check_node(u);
    return degree_[u];
}

double Graph::weight(NodeId u, NodeId v) const {
    check_node(u);
    check_node(v);
    const auto row = neighbors(u);
    const auto it = std::lower_bound(row.begin(), row.end(), v);
    if (it == row.end() || *it != v) return 0.0;
    return weights_[offsets_[u] + (it - row.begin())];
}

bool Graph::has_edge(NodeId u, NodeId v) const { return weight(u, v) > 0.0; }

EdgeList Graph::to_edge_list() const {
    EdgeList out;
    out.reserve(static_cast<std::size_t>(edge_count_));
    for (NodeId u = 0; u < node_count(); ++u)
        for (auto k = offsets_[u]; k < offsets_[u + 1]; ++k)
            if (neighbors_[k] >= u) out.push_back({u, neighbors_[k], weights_[k]});
    return out;
}

Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t> Graph::adjacency() const {
    const NodeId n = node_count();
    Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t> a(n, n);
    std::vector<Eigen::Triplet<double, std::int64_t>> trips;
    trips.reserve(neighbors_.size());
    for (NodeId u = 0; u < n; ++u)
        for (auto k = offsets_[u]; k < offsets_[u + 1]; ++k) trips.emplace_back(u, neighbors_[k], weights_[k]);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

} // namespace

EdgeList parse_edge_list(std::istream& in) {
    EdgeList edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        std::istringstream ss{std::string(body)};
        std::string a, b, c, extra;
        ss >> a >> b;
        if (b.empty()) throw FormatError("expected `u v [w]`", lineno);
        ss >> c >> extra;
        if (!extra.empty()) throw FormatError("too many fields", lineno);
        Edge e;
        if (!parse_number(a, e.u) || !parse_number(b, e.v) || e.u < 0 || e.v < 0)
            throw FormatError("node ids must be nonnegative decimal integers", lineno);
        if (!c.empty()) {
            if (!parse_number(c, e.w)) throw FormatError("malformed weight `" + c + "`", lineno);
            if (!(e.w > 0.0) || !std::isfinite(e.w)) throw FormatError("weight must be positive", lineno);
        }
        edges.push_back(e);
    }
    return edges;
}

EdgeList read_edge_list_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    try {
        return parse_edge_list(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

Graph read_graph_file(const std::string& path, std::optional<NodeId> node_count_hint) {
    const auto edges = read_edge_list_file(path);
    return Graph::from_edge_list(edges, node_count_hint);
}

void write_edge_list(std::ostream& out, const Graph& g) {
    out << "# nodes " << g.node_count() << " edges " << g.edge_count() << '\n';
    char buf[64];
    for (const auto& e : g.to_edge_list()) {
        std::snprintf(buf, sizeof buf, "%.17g", e.w);
        out << e.u << ' ' << e.v << ' ' << buf << '\n';
    }
}

void write_graph_file(const std::string& path, const Graph& g) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    write_edge_list(out, g);
}

} // namespace mile
