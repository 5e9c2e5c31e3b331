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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mile/embedding.hpp"
#include "mile/errors.hpp"

namespace mile {

void BaseEmbedderConfig::validate() const {
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (method == BaseMethod::RandomWalkSkipGram) {
        if (walk_length < 1) throw ConfigError("walk_length must be >= 1");
        if (walks_per_node < 0) throw ConfigError("walks_per_node must be >= 0");
        if (window < 1) throw ConfigError("window must be >= 1");
        if (negatives < 0) throw ConfigError("negatives must be >= 0");
        if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
        if (epochs_sgns < 0) throw ConfigError("epochs_sgns must be >= 0");
    }
    if (method == BaseMethod::External && !external_path) throw ConfigError("external method needs a file path");
}

Embedding base_embed(const Graph& g, const BaseEmbedderConfig& cfg, BaseEmbedStats* stats) {
    cfg.validate();
    if (g.node_count() == 0) throw DimensionError("cannot embed an empty graph");
    BaseEmbedStats local;
    Embedding e;
    switch (cfg.method) {
    case BaseMethod::RandomWalkSkipGram: {
        Rng rng(cfg.seed);
        const auto walks = generate_walks(g, cfg, rng);
        local.walk_steps = static_cast<std::int64_t>(walks.tokens.size());
        e = sgns_train(walks, g.node_count(), cfg, rng, &local.training_pairs);
        break;
    }
    case BaseMethod::Spectral: {
        local.eigensolve_dim = g.node_count();
        e = spectral_embed(g, cfg.dim, cfg.seed);
        break;
    }
    case BaseMethod::External: {
        e = read_embedding_file(*cfg.external_path);
        if (e.rows() != g.node_count())
            throw FormatError(*cfg.external_path + ": embedding has " + std::to_string(e.rows()) +
                              " rows, graph has " + std::to_string(g.node_count()) + " nodes");
        if (e.cols() != cfg.dim)
            throw FormatError(*cfg.external_path + ": embedding dimension " + std::to_string(e.cols()) +
                              " differs from configured " + std::to_string(cfg.dim));
        break;
    }
    }
    if (stats) *stats = local;
    return e;
}

void write_embedding(std::ostream& out, const Embedding& e) {
    out << e.rows() << ' ' << e.cols() << '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < e.rows(); ++r) {
        out << r;
        for (Eigen::Index c = 0; c < e.cols(); ++c) {
            std::snprintf(buf, sizeof buf, " %.17g", e(r, c));
            out << buf;
        }
        out << '\n';
    }
}

Embedding parse_embedding(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    if (!next_line()) throw FormatError("empty embedding file", 1);
    long long rows = -1, dim = -1;
    {
        std::istringstream ss(line);
        std::string extra;
        if (!(ss >> rows >> dim) || (ss >> extra) || rows < 0 || dim < 1)
            throw FormatError("expected header `<rows> <dim>`", lineno);
    }
    Embedding e(rows, dim);
    for (long long r = 0; r < rows; ++r) {
        if (!next_line()) throw FormatError("expected " + std::to_string(rows) + " rows, found " + std::to_string(r), lineno + 1);
        std::istringstream ss(line);
        long long id = -1;
        if (!(ss >> id) || id != r) throw FormatError("expected node id " + std::to_string(r), lineno);
        for (long long c = 0; c < dim; ++c) {
            double v;
            if (!(ss >> v)) throw FormatError("expected " + std::to_string(dim) + " values", lineno);
            if (!std::isfinite(v)) throw FormatError("non-finite embedding value", lineno);
            e(r, c) = v;
        }
        std::string extra;
        if (ss >> extra) throw FormatError("too many values", lineno);
    }
    if (next_line()) throw FormatError("trailing content after last row", lineno);
    return e;
}

void write_embedding_file(const std::string& path, const Embedding& e) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    write_embedding(out, e);
}

Embedding read_embedding_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    try {
        return parse_embedding(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

} // namespace mile
