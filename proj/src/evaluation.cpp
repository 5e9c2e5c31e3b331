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

#include "mile/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mile/errors.hpp"
#include "mile/rng.hpp"

namespace mile {

LabelSet::LabelSet(NodeId nodes, LabelId labels_) : node_count(nodes), label_count(labels_), labels(nodes) {}

void LabelSet::add(NodeId node, LabelId label) {
    if (node < 0 || node >= node_count) throw DimensionError("label node id out of range");
    if (label < 0 || label >= label_count) throw DimensionError("label id out of range");
    auto& row = labels[node];
    const auto it = std::lower_bound(row.begin(), row.end(), label);
    if (it == row.end() || *it != label) row.insert(it, label);
}

bool LabelSet::has(NodeId node, LabelId label) const {
    const auto& row = labels[node];
    return std::binary_search(row.begin(), row.end(), label);
}

std::vector<NodeId> LabelSet::labeled_nodes() const {
    std::vector<NodeId> out;
    for (NodeId u = 0; u < node_count; ++u)
        if (!labels[u].empty()) out.push_back(u);
    return out;
}

LabelSet LabelSet::subset(std::span<const NodeId> nodes) const {
    LabelSet out(static_cast<NodeId>(nodes.size()), label_count);
    for (std::size_t i = 0; i < nodes.size(); ++i) out.labels[i] = labels.at(nodes[i]);
    return out;
}

std::vector<Fold> kfold(NodeId n, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be >= 2");
    if (n < k) throw ConfigError("cannot split " + std::to_string(n) + " items into " + std::to_string(k) + " folds");
    std::vector<NodeId> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    shuffle(perm.begin(), perm.end(), rng);

    std::vector<Fold> folds(static_cast<std::size_t>(k));
    NodeId begin = 0;
    for (int f = 0; f < k; ++f) {
        const NodeId size = n / k + (f < n % k ? 1 : 0);
        const NodeId end = begin + size;
        for (NodeId i = 0; i < n; ++i) (i >= begin && i < end ? folds[f].test : folds[f].train).push_back(perm[i]);
        std::sort(folds[f].test.begin(), folds[f].test.end());
        std::sort(folds[f].train.begin(), folds[f].train.end());
        begin = end;
    }
    return folds;
}

double logistic_objective(const Embedding& x, const Eigen::VectorXd& targets, const Eigen::VectorXd& w, double b,
                          double reg, Eigen::VectorXd* grad_w, double* grad_b) {
    const auto n = static_cast<double>(std::max<Eigen::Index>(1, x.rows()));
    const Eigen::VectorXd z = (x * w).array() + b;
    double loss = 0.0;
    Eigen::VectorXd residual(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        // softplus(z) - y z, evaluated without overflow.
        const double zi = z[i];
        const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
        loss += softplus - targets[i] * zi;
        const double p = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
        residual[i] = p - targets[i];
    }
    loss = loss / n + 0.5 * reg / n * w.squaredNorm();
    if (grad_w) *grad_w = (x.transpose() * residual) / n + (reg / n) * w;
    if (grad_b) *grad_b = residual.sum() / n;
    return loss;
}

LogRegModel train_ovr_logreg(const Embedding& x, const LabelSet& y, const LogRegOptions& opts) {
    if (x.rows() != y.node_count) throw DimensionError("feature rows differ from label rows");
    if (opts.reg < 0.0 || opts.iters < 0) throw ConfigError("invalid logistic regression options");
    const auto d = x.cols();
    LogRegModel model;
    model.weights = Eigen::MatrixXd::Zero(d, y.label_count);
    model.bias = Eigen::VectorXd::Zero(y.label_count);

    constexpr double kArmijo = 0.5;
    for (LabelId label = 0; label < y.label_count; ++label) {
        Eigen::VectorXd t(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) t[i] = y.has(static_cast<NodeId>(i), label) ? 1.0 : 0.0;
        Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
        double b = 0.0;
        Eigen::VectorXd gw;
        double gb = 0.0;
        double step = 1.0;
        double f = logistic_objective(x, t, w, b, opts.reg, &gw, &gb);
        for (int it = 0; it < opts.iters; ++it) {
            const double gnorm2 = gw.squaredNorm() + gb * gb;
            if (gnorm2 < 1e-24) break;
            step *= 2.0;
            Eigen::VectorXd w_new;
            double b_new = 0.0;
            double f_new = 0.0;
            for (;;) {
                w_new = w - step * gw;
                b_new = b - step * gb;
                f_new = logistic_objective(x, t, w_new, b_new, opts.reg);
                if (f_new <= f - kArmijo * step * gnorm2 || step < 1e-12) break;
                step *= 0.5;
            }
            if (f_new > f) break;
            w = std::move(w_new);
            b = b_new;
            f = logistic_objective(x, t, w, b, opts.reg, &gw, &gb);
        }
        model.weights.col(label) = w;
        model.bias[label] = b;
    }
    return model;
}

Eigen::MatrixXd LogRegModel::scores(const Embedding& x) const {
    if (x.cols() != weights.rows()) throw DimensionError("feature dimension differs from the model");
    Eigen::MatrixXd s = x * weights;
    s.rowwise() += bias.transpose();
    return s;
}

LabelSet predict_multilabel(const LogRegModel& model, const Embedding& x, std::span<const int> label_counts) {
    if (static_cast<Eigen::Index>(label_counts.size()) != x.rows())
        throw DimensionError("need one label count per row");
    const auto s = model.scores(x);
    const auto labels = static_cast<LabelId>(model.bias.size());
    LabelSet pred(static_cast<NodeId>(x.rows()), labels);
    std::vector<LabelId> order(static_cast<std::size_t>(labels));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](LabelId a, LabelId b) { return s(i, a) > s(i, b); });
        const int k = std::clamp(label_counts[i], 0, static_cast<int>(labels));
        pred.labels[i].assign(order.begin(), order.begin() + k);
        std::sort(pred.labels[i].begin(), pred.labels[i].end());
    }
    return pred;
}

namespace {

struct Confusion {
    std::int64_t tp = 0, fp = 0, fn = 0;

    double f1() const {
        const auto denom = 2 * tp + fp + fn;
        return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
};

std::vector<Confusion> per_label_confusion(const LabelSet& pred, const LabelSet& truth) {
    if (pred.node_count != truth.node_count || pred.label_count != truth.label_count)
        throw DimensionError("prediction and truth label sets differ in shape");
    std::vector<Confusion> c(static_cast<std::size_t>(truth.label_count));
    for (NodeId u = 0; u < truth.node_count; ++u) {
        const auto& p = pred.labels[u];
        const auto& t = truth.labels[u];
        std::size_t i = 0, j = 0;
        while (i < p.size() || j < t.size()) {
            if (j == t.size() || (i < p.size() && p[i] < t[j])) {
                ++c[p[i++]].fp;
            } else if (i == p.size() || t[j] < p[i]) {
                ++c[t[j++]].fn;
            } else {
                ++c[p[i]].tp;
                ++i;
                ++j;
            }
        }
    }
    return c;
}

} // namespace

double micro_f1(const LabelSet& pred, const LabelSet& truth) {
    Confusion total;
    for (const auto& c : per_label_confusion(pred, truth)) {
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
    }
    return total.f1();
}

double macro_f1(const LabelSet& pred, const LabelSet& truth) {
    const auto per_label = per_label_confusion(pred, truth);
    if (per_label.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& c : per_label) sum += c.f1();
    return sum / static_cast<double>(per_label.size());
}

EvalReport evaluate_embedding(const Embedding& e, const LabelSet& labels, int folds, std::uint64_t seed,
                              const LogRegOptions& opts) {
    if (e.rows() != labels.node_count)
        throw DimensionError("embedding has " + std::to_string(e.rows()) + " rows, labels cover " +
                             std::to_string(labels.node_count) + " nodes");
    const auto labeled = labels.labeled_nodes();
    const auto splits = kfold(static_cast<NodeId>(labeled.size()), folds, seed);

    EvalReport report;
    report.seed = seed;
    auto gather = [&](const std::vector<NodeId>& positions) {
        std::vector<NodeId> nodes;
        nodes.reserve(positions.size());
        for (const auto p : positions) nodes.push_back(labeled[p]);
        return nodes;
    };
    auto rows = [&](const std::vector<NodeId>& nodes) {
        Embedding x(static_cast<Eigen::Index>(nodes.size()), e.cols());
        for (std::size_t i = 0; i < nodes.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = e.row(nodes[i]);
        return x;
    };
    for (const auto& fold : splits) {
        const auto train_nodes = gather(fold.train);
        const auto test_nodes = gather(fold.test);
        const auto model = train_ovr_logreg(rows(train_nodes), labels.subset(train_nodes), opts);
        const auto truth = labels.subset(test_nodes);
        std::vector<int> counts;
        for (const auto& l : truth.labels) counts.push_back(static_cast<int>(l.size()));
        const auto pred = predict_multilabel(model, rows(test_nodes), counts);
        report.folds.push_back({micro_f1(pred, truth), macro_f1(pred, truth)});
    }
    for (const auto& f : report.folds) {
        report.micro_f1 += f.micro_f1;
        report.macro_f1 += f.macro_f1;
    }
    report.micro_f1 /= static_cast<double>(report.folds.size());
    report.macro_f1 /= static_cast<double>(report.folds.size());
    return report;
}

nlohmann::json eval_report_to_json(const EvalReport& report) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : report.folds) folds.push_back({{"micro_f1", f.micro_f1}, {"macro_f1", f.macro_f1}});
    return {{"micro_f1", report.micro_f1}, {"macro_f1", report.macro_f1}, {"folds", folds}, {"seed", report.seed}};
}

LabeledGraph sbm_generate(int blocks, int per_block, double p_in, double p_out, std::uint64_t seed) {
    if (blocks < 1 || per_block < 1) throw ConfigError("SBM needs at least one block of one node");
    if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0))
        throw ConfigError("SBM probabilities must lie in [0, 1]");
    const NodeId n = static_cast<NodeId>(blocks) * per_block;
    Rng rng(seed);
    EdgeList edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) {
            const double p = u / per_block == v / per_block ? p_in : p_out;
            if (uniform01(rng) < p) edges.push_back({u, v, 1.0});
        }
    LabeledGraph out{Graph::from_edge_list(edges, n), LabelSet(n, blocks)};
    for (NodeId u = 0; u < n; ++u) out.labels.add(u, u / per_block);
    return out;
}

LabelSet parse_labels(std::istream& in, std::optional<NodeId> node_count) {
    std::vector<std::pair<NodeId, std::vector<LabelId>>> rows;
    std::string line;
    std::size_t lineno = 0;
    NodeId max_node = -1;
    LabelId max_label = -1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        long long node = -1;
        if (!(ss >> node) || node < 0) throw FormatError("expected `node_id label_id [label_id ...]`", lineno);
        if (node_count && node >= *node_count)
            throw FormatError("node id " + std::to_string(node) + " exceeds node count", lineno);
        std::vector<LabelId> ls;
        std::string tok;
        while (ss >> tok) {
            LabelId l = -1;
            try {
                std::size_t pos = 0;
                l = static_cast<LabelId>(std::stol(tok, &pos));
                if (pos != tok.size()) l = -1;
            } catch (const std::exception&) {
                l = -1;
            }
            if (l < 0) throw FormatError("malformed label `" + tok + "`", lineno);
            ls.push_back(l);
            max_label = std::max(max_label, l);
        }
        if (ls.empty()) throw FormatError("node without labels", lineno);
        max_node = std::max(max_node, static_cast<NodeId>(node));
        rows.emplace_back(static_cast<NodeId>(node), std::move(ls));
    }
    LabelSet out(node_count.value_or(max_node + 1), max_label + 1);
    for (const auto& [node, ls] : rows)
        for (const auto l : ls) out.add(node, l);
    return out;
}

LabelSet read_labels_file(const std::string& path, std::optional<NodeId> node_count) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    try {
        return parse_labels(in, node_count);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_labels(std::ostream& out, const LabelSet& labels) {
    for (NodeId u = 0; u < labels.node_count; ++u) {
        if (labels.labels[u].empty()) continue;
        out << u;
        for (const auto l : labels.labels[u]) out << ' ' << l;
        out << '\n';
    }
}

} // namespace mile
