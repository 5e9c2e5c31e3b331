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

#include <doctest.h>

#include <sstream>

#include "mile/errors.hpp"
#include "mile/graph.hpp"
#include "oracles.hpp"

using namespace mile;

TEST_CASE("single edge is stored in both directions") {
    const auto g = Graph::from_edge_list(EdgeList{{0, 1, 1.0}});
    CHECK(g.node_count() == 2);
    CHECK(g.weight(0, 1) == 1.0);
    CHECK(g.weight(1, 0) == 1.0);
    CHECK(g.weighted_degree(0) == 1.0);
    CHECK(g.weighted_degree(1) == 1.0);
    CHECK(g.edge_count() == 1);
}

TEST_CASE("empty edge list with a hint gives isolated nodes") {
    const auto g = Graph::from_edge_list(EdgeList{}, 3);
    CHECK(g.node_count() == 3);
    for (NodeId u = 0; u < 3; ++u) CHECK(g.weighted_degree(u) == 0.0);
}

TEST_CASE("opposite-direction duplicates are summed") {
    const EdgeList edges{{0, 1, 1.0}, {1, 0, 2.0}};
    const auto g = Graph::from_edge_list(edges);
    const auto dense = oracle::dense_from_edges(edges, 2);
    CHECK(dense[0][1] == 3.0);
    CHECK(g.weight(0, 1) == dense[0][1]);
    CHECK(g.weight(1, 0) == dense[1][0]);
}

TEST_CASE("ingestion errors") {
    CHECK_THROWS_AS(Graph::from_edge_list(EdgeList{{0, 1, 0.0}}), WeightDomainError);
    CHECK_THROWS_AS(Graph::from_edge_list(EdgeList{{0, 1, -1.0}}), WeightDomainError);
    CHECK_THROWS_AS(Graph::from_edge_list(EdgeList{{0, 3, 1.0}}, 3), DimensionError);
}

TEST_CASE("neighbor_count ignores self-loops") {
    const auto path = Graph::from_edge_list(EdgeList{{0, 1, 1}, {1, 2, 1}});
    CHECK(neighbor_count(path, 1) == 2);

    const auto loop = Graph::from_edge_list(EdgeList{{0, 0, 2.0}});
    CHECK(neighbor_count(loop, 0) == 0);

    EdgeList clique;
    for (NodeId u = 0; u < 5; ++u)
        for (NodeId v = u + 1; v < 5; ++v) clique.push_back({u, v, 1.0});
    const auto k5 = Graph::from_edge_list(clique);
    for (NodeId u = 0; u < 5; ++u) CHECK(neighbor_count(k5, u) == 4);

    CHECK_THROWS_AS(neighbor_count(path, 3), DimensionError);
    CHECK_THROWS_AS(weighted_degree(path, -1), DimensionError);
}

TEST_CASE("weighted_degree is the row sum, self-loop counted once") {
    const auto tri = Graph::from_edge_list(EdgeList{{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
    CHECK(weighted_degree(tri, 0) == 2.0);
    const auto g = Graph::from_edge_list(EdgeList{{0, 0, 2.0}, {0, 1, 1.0}, {2, 2, 1.0}}, 4);
    CHECK(weighted_degree(g, 0) == 3.0);
    CHECK(weighted_degree(g, 3) == 0.0);
}

TEST_CASE("random edge lists match the dense accumulation oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 500);
        const double p = std::min(1.0, 4.0 / n);
        auto edges = oracle::random_edges(rng, n, p, 5, true);
        // Add some reversed duplicates.
        for (std::size_t i = 0; i < edges.size(); i += 7) edges.push_back({edges[i].v, edges[i].u, 1.0});
        const auto g = Graph::from_edge_list(edges, n);
        const auto dense = oracle::dense_from_edges(edges, static_cast<std::size_t>(n));
        CHECK(oracle::dense_from_graph(g) == dense);

        // Structural invariants.
        double total = 0.0;
        for (NodeId u = 0; u < n; ++u) {
            const auto nb = g.neighbors(u);
            for (std::size_t k = 1; k < nb.size(); ++k) REQUIRE(nb[k - 1] < nb[k]);
            total += g.weighted_degree(u);
        }
        double sum_entries = 0.0;
        for (const auto& row : dense)
            for (const auto v : row) sum_entries += v;
        CHECK(total == sum_entries);

        // Round trip through the text format.
        std::stringstream ss;
        write_edge_list(ss, g);
        const auto again = Graph::from_edge_list(parse_edge_list(ss), g.node_count());
        CHECK(again == g);
    }
}

TEST_CASE("edge-list parser") {
    std::istringstream in("# comment\n0 1\n1 2 2.5\n\n  # indented comment\n2 2 1\n");
    const auto edges = parse_edge_list(in);
    REQUIRE(edges.size() == 3);
    CHECK(edges[0] == Edge{0, 1, 1.0});
    CHECK(edges[1] == Edge{1, 2, 2.5});
    CHECK(edges[2] == Edge{2, 2, 1.0});

    std::istringstream bad("0 1\n0 x\n");
    try {
        parse_edge_list(bad);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::istringstream neg("0 1 -2\n");
    CHECK_THROWS_AS(parse_edge_list(neg), FormatError);
    std::istringstream extra("0 1 2 3\n");
    CHECK_THROWS_AS(parse_edge_list(extra), FormatError);
}

TEST_CASE("from_csr rejects asymmetric input") {
    CHECK_THROWS_AS(Graph::from_csr({0, 1, 1}, {1}, {1.0}), ConsistencyError);
    const auto g = Graph::from_csr({0, 1, 2}, {1, 0}, {2.0, 2.0});
    CHECK(g.weighted_degree(0) == 2.0);
}
