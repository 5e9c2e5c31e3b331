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

#include "mile/refinement.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mile {

RefinerParams init_params(int dim, int layers, double lambda, double scale, std::uint64_t seed) {
    if (dim < 1 || layers < 1) throw ConfigError("refiner needs dim >= 1 and layers >= 1");
    Rng rng(seed);
    RefinerParams p;
    p.lambda = lambda;
    p.layers.reserve(static_cast<std::size_t>(layers));
    for (int k = 0; k < layers; ++k) {
        RefinerParams::Matrix w(dim, dim);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -scale, scale);
        p.layers.push_back(std::move(w));
    }
    p.validate();
    return p;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (!(init_scale >= 0.0)) throw ConfigError("init scale must be nonnegative");
}

TrainResult train_refiner(const Embedding& input, const Embedding& target, const PropagationOperator& op,
                          RefinerParams start, const TrainConfig& cfg) {
    cfg.validate();
    TrainResult result;
    result.params = std::move(start);
    auto& params = result.params;
    result.losses.reserve(static_cast<std::size_t>(cfg.epochs) + 1);

    std::vector<RefinerParams::Matrix> m1, m2;
    for (const auto& w : params.layers) {
        m1.push_back(RefinerParams::Matrix::Zero(w.rows(), w.cols()));
        m2.push_back(RefinerParams::Matrix::Zero(w.rows(), w.cols()));
    }
    double b1_pow = 1.0, b2_pow = 1.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto lg = loss_and_gradient(input, target, op, params);
        if (!std::isfinite(lg.loss)) throw DivergenceError(epoch);
        result.losses.push_back(lg.loss);
        b1_pow *= cfg.adam_beta1;
        b2_pow *= cfg.adam_beta2;
        for (std::size_t k = 0; k < params.layers.size(); ++k) {
            const auto& g = lg.gradients[k];
            m1[k] = cfg.adam_beta1 * m1[k] + (1.0 - cfg.adam_beta1) * g;
            m2[k] = cfg.adam_beta2 * m2[k] + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
            const auto m_hat = m1[k].array() / (1.0 - b1_pow);
            const auto v_hat = m2[k].array() / (1.0 - b2_pow);
            params.layers[k].array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
    const double last = reconstruction_loss(input, target, op, params);
    if (!std::isfinite(last)) throw DivergenceError(cfg.epochs);
    result.losses.push_back(last);
    return result;
}

TrainResult train(const Embedding& e_m, const Graph& g_m, const TrainConfig& cfg, double lambda, int layers) {
    cfg.validate();
    if (e_m.rows() != g_m.node_count()) throw DimensionError("coarsest embedding rows differ from graph size");
    const auto op = build_operator(g_m, lambda);
    auto start = init_params(static_cast<int>(e_m.cols()), layers, lambda, cfg.init_scale, cfg.seed);
    return train_refiner(e_m, e_m, op, std::move(start), cfg);
}

TrainResult train_double_base(const Embedding& e_m, const Embedding& e_m1, const MatchingMatrix& matching,
                              const Graph& g_m, const TrainConfig& cfg, double lambda, int layers) {
    cfg.validate();
    if (e_m.rows() != g_m.node_count()) throw DimensionError("level-m embedding rows differ from graph size");
    if (matching.fine_count != g_m.node_count()) throw DimensionError("matching does not start at level m");
    if (e_m1.cols() != e_m.cols()) throw DimensionError("base embeddings differ in dimension");
    const auto op = build_operator(g_m, lambda);
    auto start = init_params(static_cast<int>(e_m.cols()), layers, lambda, cfg.init_scale, cfg.seed);
    return train_refiner(project(matching, e_m1), e_m, op, std::move(start), cfg);
}

std::string to_string(RefineMode::Kind kind) {
    switch (kind) {
    case RefineMode::Kind::Trained: return "trained";
    case RefineMode::Kind::Untrained: return "untrained";
    case RefineMode::Kind::ProjectionOnly: return "proj";
    case RefineMode::Kind::NeighborhoodAverage: return "avg";
    }
    return "unknown";
}

Embedding neighborhood_average(const Embedding& x, const Graph& g, int rounds, double self_loop_weight) {
    if (rounds < 1) throw ConfigError("averaging needs at least one round");
    if (!(self_loop_weight >= 0.0)) throw ConfigError("self-loop weight must be nonnegative");
    if (x.rows() != g.node_count()) throw DimensionError("embedding rows differ from graph size");
    Embedding cur = x;
    Embedding next(x.rows(), x.cols());
    for (int r = 0; r < rounds; ++r) {
        for (NodeId u = 0; u < g.node_count(); ++u) {
            const auto nbrs = g.neighbors(u);
            const auto wts = g.weights(u);
            const double total = g.weighted_degree(u) + self_loop_weight;
            if (total <= 0.0) {
                next.row(u) = cur.row(u);
                continue;
            }
            next.row(u) = self_loop_weight * cur.row(u);
            for (std::size_t k = 0; k < nbrs.size(); ++k) next.row(u) += wts[k] * cur.row(nbrs[k]);
            next.row(u) /= total;
        }
        std::swap(cur, next);
    }
    return cur;
}

Embedding refine(const Embedding& projected, const Graph& g, const RefineMode& mode, const RefinerParams* params,
                 const RefinerShape& shape) {
    if (projected.rows() != g.node_count()) throw DimensionError("projected embedding rows differ from graph size");
    switch (mode.kind) {
    case RefineMode::Kind::ProjectionOnly: return projected;
    case RefineMode::Kind::NeighborhoodAverage:
        return neighborhood_average(projected, g, mode.rounds, mode.self_loop_weight);
    case RefineMode::Kind::Trained: {
        if (!params) throw ConfigError("trained refinement needs parameters");
        return gcn_forward(projected, build_operator(g, params->lambda), *params);
    }
    case RefineMode::Kind::Untrained: {
        const auto p = init_params(static_cast<int>(projected.cols()), shape.layers, shape.lambda, shape.init_scale,
                                   mode.seed);
        return gcn_forward(projected, build_operator(g, p.lambda), p);
    }
    }
    throw ConfigError("unknown refine mode");
}

void write_params(std::ostream& out, const RefinerParams& params) {
    params.validate();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", params.lambda);
    out << params.depth() << ' ' << params.dim() << ' ' << buf << '\n';
    for (const auto& w : params.layers) {
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", w(r, c));
                out << (c ? " " : "") << buf;
            }
            out << '\n';
        }
    }
}

RefinerParams parse_params(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    if (!next_line()) throw FormatError("empty parameter file", 1);
    long long layers = 0, dim = 0;
    RefinerParams p;
    {
        std::istringstream ss(line);
        if (!(ss >> layers >> dim >> p.lambda) || layers < 1 || dim < 1)
            throw FormatError("expected header `l d lambda`", lineno);
    }
    for (long long k = 0; k < layers; ++k) {
        RefinerParams::Matrix w(dim, dim);
        for (long long r = 0; r < dim; ++r) {
            if (!next_line()) throw FormatError("parameter file ends early", lineno + 1);
            std::istringstream ss(line);
            for (long long c = 0; c < dim; ++c)
                if (!(ss >> w(r, c))) throw FormatError("expected " + std::to_string(dim) + " values", lineno);
            std::string extra;
            if (ss >> extra) throw FormatError("too many values", lineno);
        }
        p.layers.push_back(std::move(w));
    }
    try {
        p.validate();
    } catch (const Error& e) {
        throw FormatError(e.what());
    }
    return p;
}

void write_params_file(const std::string& path, const RefinerParams& params) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    write_params(out, params);
}

RefinerParams read_params_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    try {
        return parse_params(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

} // namespace mile
