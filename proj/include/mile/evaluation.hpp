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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mile/embedding.hpp"
#include "mile/graph.hpp"

namespace mile {

using LabelId = std::int32_t;

/// Per-node label sets (multi-label). Each set is sorted and duplicate-free.
struct LabelSet {
    NodeId node_count = 0;
    LabelId label_count = 0;
    std::vector<std::vector<LabelId>> labels;

    LabelSet() = default;
    LabelSet(NodeId nodes, LabelId label_count);

    void add(NodeId node, LabelId label);
    bool has(NodeId node, LabelId label) const;
    std::vector<NodeId> labeled_nodes() const;

    /// Rows `nodes` of this set, renumbered 0..nodes.size()-1.
    LabelSet subset(std::span<const NodeId> nodes) const;

    friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

struct Fold {
    std::vector<NodeId> train;
    std::vector<NodeId> test;
};

/// Seeded permutation of 0..n-1 split into k test folds; the first n % k
/// folds get one extra element.
std::vector<Fold> kfold(NodeId n, int k, std::uint64_t seed);

struct LogRegOptions {
    double reg = 1.0;
    int iters = 200;
};

/// One binary logistic regression per label. Each minimizes
///   (1/n) sum_i [softplus(z_i) - y_i z_i] + (reg / 2n) ||w||^2,  z_i = w.x_i + b
/// by full-batch gradient descent with Armijo backtracking.
struct LogRegModel {
    Eigen::MatrixXd weights; ///< dim x labels
    Eigen::VectorXd bias;    ///< labels

    /// Decision values X W + b (monotone in the predicted probability).
    Eigen::MatrixXd scores(const Embedding& x) const;
};

LogRegModel train_ovr_logreg(const Embedding& x, const LabelSet& y, const LogRegOptions& opts = {});

/// Objective and gradient of one binary problem; exposed for testing.
double logistic_objective(const Embedding& x, const Eigen::VectorXd& targets, const Eigen::VectorXd& w, double b,
                          double reg, Eigen::VectorXd* grad_w = nullptr, double* grad_b = nullptr);

/// Top-k labels per row by score, k = label_counts[row]; ties go to the lower label id.
LabelSet predict_multilabel(const LogRegModel& model, const Embedding& x, std::span<const int> label_counts);

double micro_f1(const LabelSet& pred, const LabelSet& truth);
double macro_f1(const LabelSet& pred, const LabelSet& truth);

struct FoldScore {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
};

struct EvalReport {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    std::vector<FoldScore> folds;
    std::uint64_t seed = 0;
};

/// k-fold cross-validated node classification over the labeled nodes.
EvalReport evaluate_embedding(const Embedding& e, const LabelSet& labels, int folds = 10, std::uint64_t seed = 0,
                              const LogRegOptions& opts = {});

nlohmann::json eval_report_to_json(const EvalReport& report);

struct LabeledGraph {
    Graph graph;
    LabelSet labels;
};

/// Stochastic block model; node i belongs to block i / per_block.
LabeledGraph sbm_generate(int blocks, int per_block, double p_in, double p_out, std::uint64_t seed);

/// `node_id label_id [label_id ...]` per line; `#` lines skipped.
LabelSet parse_labels(std::istream& in, std::optional<NodeId> node_count = std::nullopt);
LabelSet read_labels_file(const std::string& path, std::optional<NodeId> node_count = std::nullopt);
void write_labels(std::ostream& out, const LabelSet& labels);

} // namespace mile
