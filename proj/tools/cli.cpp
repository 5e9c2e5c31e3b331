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

#include "cli.hpp"

#include <fstream>
#include <map>
#include <ostream>

#include <CLI11.hpp>

#include "mile/coarsening.hpp"
#include "mile/embedding.hpp"
#include "mile/evaluation.hpp"
#include "mile/graph.hpp"
#include "mile/pipeline.hpp"
#include "mile/refinement.hpp"

namespace mile::cli {
namespace {

const std::map<std::string, BaseMethod> kBaseMethods{
    {"sgns", BaseMethod::RandomWalkSkipGram},
    {"deepwalk", BaseMethod::RandomWalkSkipGram},
    {"spectral", BaseMethod::Spectral},
    {"external", BaseMethod::External},
};

const std::map<std::string, RefineMode::Kind> kRefineModes{
    {"trained", RefineMode::Kind::Trained},
    {"untrained", RefineMode::Kind::Untrained},
    {"proj", RefineMode::Kind::ProjectionOnly},
    {"avg", RefineMode::Kind::NeighborhoodAverage},
};

const std::map<std::string, Matcher> kMatchers{{"hybrid", Matcher::Hybrid}, {"random", Matcher::Random}};

// Flags shared by `embed` and `run`.
struct EmbedFlags {
    std::string graph;
    std::string out;
    BaseMethod base = BaseMethod::RandomWalkSkipGram;
    std::string external;
    int dim = 128;
    int walk_length = 80;
    int walks = 10;
    int window = 10;
    int negatives = 5;
    double sgns_lr = 0.025;
    int sgns_epochs = 1;
    std::uint64_t seed = 0;
    int threads = 1;

    void attach(CLI::App& app) {
        app.add_option("--graph", graph, "edge-list file")->required();
        app.add_option("--out", out, "output embedding file")->required();
        app.add_option("--base", base, "base embedder")
            ->transform(CLI::CheckedTransformer(kBaseMethods, CLI::ignore_case));
        app.add_option("--external-emb", external, "embedding file for --base external");
        app.add_option("--dim", dim, "embedding dimension")->check(CLI::PositiveNumber);
        app.add_option("--walk-length", walk_length)->check(CLI::PositiveNumber);
        app.add_option("--walks", walks, "walks per node")->check(CLI::NonNegativeNumber);
        app.add_option("--window", window)->check(CLI::PositiveNumber);
        app.add_option("--negatives", negatives)->check(CLI::NonNegativeNumber);
        app.add_option("--sgns-lr", sgns_lr)->check(CLI::PositiveNumber);
        app.add_option("--sgns-epochs", sgns_epochs)->check(CLI::NonNegativeNumber);
        app.add_option("--seed", seed);
        app.add_option("--threads", threads, "threads for the skip-gram embedder (>1 is nondeterministic)")
            ->check(CLI::PositiveNumber);
    }

    void apply(MileConfig& cfg) const {
        cfg.dim = dim;
        cfg.seed = seed;
        cfg.base.method = base;
        if (!external.empty()) cfg.base.external_path = external;
        cfg.base.walk_length = walk_length;
        cfg.base.walks_per_node = walks;
        cfg.base.window = window;
        cfg.base.negatives = negatives;
        cfg.base.initial_lr = sgns_lr;
        cfg.base.epochs_sgns = sgns_epochs;
        cfg.base.threads = threads;
    }
};

struct RunFlags {
    EmbedFlags embed;
    std::string report;
    std::string params_out;
    int levels = 1;
    double lambda = 0.05;
    int gcn_layers = 2;
    double lr = 0.001;
    int epochs = 200;
    NodeId min_nodes = 1;
    RefineMode::Kind refine = RefineMode::Kind::Trained;
    Matcher matcher = Matcher::Hybrid;
    int avg_rounds = 2;
    double avg_self_loop = 1.0;
    bool double_base = false;
};

struct RefineFlags {
    std::string emb, graph, matching, params, out;
    RefineMode::Kind mode = RefineMode::Kind::ProjectionOnly;
    double lambda = 0.05;
    int gcn_layers = 2;
    int avg_rounds = 2;
    double avg_self_loop = 1.0;
    std::uint64_t seed = 0;
};

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << j.dump(2) << '\n';
}

int cmd_coarsen(const std::string& graph_path, int levels, NodeId min_nodes, Matcher matcher, std::uint64_t seed,
                const std::string& prefix, std::ostream& out) {
    const auto g = read_graph_file(graph_path);
    const auto chain = coarsen(g, levels, min_nodes, matcher, seed);
    for (int i = 1; i <= chain.levels(); ++i) {
        const std::string base = prefix + ".level" + std::to_string(i);
        write_graph_file(base + ".edges", chain.graphs[i]);
        std::ofstream assign(base + ".assign");
        if (!assign) throw FormatError("cannot write " + base + ".assign");
        write_assignment(assign, chain.matchings[i - 1]);
    }
    write_chain_dump(out, chain);
    return kExitOk;
}

int cmd_embed(const EmbedFlags& flags) {
    const auto g = read_graph_file(flags.graph);
    MileConfig cfg;
    flags.apply(cfg);
    write_embedding_file(flags.out, base_embed(g, effective_base_config(cfg)));
    return kExitOk;
}

int cmd_run(const RunFlags& flags, std::ostream& out) {
    const auto g = read_graph_file(flags.embed.graph);
    MileConfig cfg;
    flags.embed.apply(cfg);
    cfg.levels = flags.levels;
    cfg.lambda = flags.lambda;
    cfg.gcn_layers = flags.gcn_layers;
    cfg.train.learning_rate = flags.lr;
    cfg.train.epochs = flags.epochs;
    cfg.min_nodes = flags.min_nodes;
    cfg.matcher = flags.matcher;
    cfg.refine_mode.kind = flags.refine;
    cfg.refine_mode.rounds = flags.avg_rounds;
    cfg.refine_mode.self_loop_weight = flags.avg_self_loop;

    const std::string report_path = flags.report.empty() ? flags.embed.out + ".report.json" : flags.report;
    MileResult result;
    try {
        result = flags.double_base ? mile_embed_double_base(g, cfg) : mile_embed(g, cfg);
    } catch (const RunDivergenceError& e) {
        auto j = report_to_json(e.report(), cfg);
        j["error"] = e.what();
        write_json(report_path, j);
        throw;
    }
    write_embedding_file(flags.embed.out, result.embedding);
    write_json(report_path, report_to_json(result.report, cfg));
    if (!flags.params_out.empty()) {
        if (!result.params) throw ConfigError("--params-out needs a trained refiner and at least one level");
        write_params_file(flags.params_out, *result.params);
    }
    out << "wrote " << flags.embed.out << " (" << result.embedding.rows() << " x " << result.embedding.cols()
        << "), levels " << result.report.effective_levels << '\n';
    return kExitOk;
}

int cmd_refine(const RefineFlags& flags) {
    const auto coarse = read_embedding_file(flags.emb);
    const auto g = read_graph_file(flags.graph);
    const auto matching = read_assignment_file(flags.matching);
    if (matching.fine_count != g.node_count())
        throw DimensionError("matching covers " + std::to_string(matching.fine_count) + " nodes, graph has " +
                             std::to_string(g.node_count()));
    RefineMode mode;
    mode.kind = flags.mode;
    mode.seed = flags.seed;
    mode.rounds = flags.avg_rounds;
    mode.self_loop_weight = flags.avg_self_loop;
    std::optional<RefinerParams> params;
    if (mode.kind == RefineMode::Kind::Trained) {
        if (flags.params.empty()) throw ConfigError("--mode trained requires --params");
        params = read_params_file(flags.params);
    }
    const RefinerShape shape{flags.gcn_layers, flags.lambda, 0.1};
    const auto refined = refine(project(matching, coarse), g, mode, params ? &*params : nullptr, shape);
    write_embedding_file(flags.out, refined);
    return kExitOk;
}

int cmd_eval(const std::string& emb_path, const std::string& labels_path, int folds, std::uint64_t seed,
             const LogRegOptions& opts, const std::string& report_path, std::ostream& out) {
    const auto e = read_embedding_file(emb_path);
    const auto labels = read_labels_file(labels_path);
    if (labels.node_count > e.rows())
        throw DimensionError("labels mention node " + std::to_string(labels.node_count - 1) + " but the embedding has " +
                             std::to_string(e.rows()) + " rows");
    LabelSet padded(static_cast<NodeId>(e.rows()), labels.label_count);
    for (NodeId u = 0; u < labels.node_count; ++u) padded.labels[u] = labels.labels[u];
    if (static_cast<NodeId>(padded.labeled_nodes().size()) < folds)
        throw ConfigError("more folds than labeled nodes");
    const auto report = evaluate_embedding(e, padded, folds, seed, opts);
    const auto j = eval_report_to_json(report);
    out << j.dump(2) << '\n';
    if (!report_path.empty()) write_json(report_path, j);
    return kExitOk;
}

int cmd_sbm(int blocks, int per_block, double p_in, double p_out, std::uint64_t seed, const std::string& graph_out,
            const std::string& labels_out) {
    const auto lg = sbm_generate(blocks, per_block, p_in, p_out, seed);
    write_graph_file(graph_out, lg.graph);
    std::ofstream out(labels_out);
    if (!out) throw FormatError("cannot write " + labels_out);
    write_labels(out, lg.labels);
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-level graph embedding: coarsen, embed, refine, evaluate"};
    app.require_subcommand(1);

    // coarsen
    std::string c_graph, c_prefix;
    int c_levels = 1;
    NodeId c_min_nodes = 1;
    Matcher c_matcher = Matcher::Hybrid;
    std::uint64_t c_seed = 0;
    auto* coarsen_cmd = app.add_subcommand("coarsen", "coarsen a graph and write every level");
    coarsen_cmd->add_option("--graph", c_graph)->required();
    coarsen_cmd->add_option("--levels", c_levels)->check(CLI::NonNegativeNumber);
    coarsen_cmd->add_option("--out-prefix", c_prefix)->required();
    coarsen_cmd->add_option("--min-nodes", c_min_nodes)->check(CLI::NonNegativeNumber);
    coarsen_cmd->add_option("--matcher", c_matcher)->transform(CLI::CheckedTransformer(kMatchers, CLI::ignore_case));
    coarsen_cmd->add_option("--seed", c_seed);

    // embed
    EmbedFlags e_flags;
    auto* embed_cmd = app.add_subcommand("embed", "base-embed a graph directly");
    e_flags.attach(*embed_cmd);

    // run
    RunFlags r_flags;
    auto* run_cmd = app.add_subcommand("run", "full multi-level embedding");
    r_flags.embed.attach(*run_cmd);
    run_cmd->add_option("--report", r_flags.report, "report JSON (default <out>.report.json)");
    run_cmd->add_option("--params-out", r_flags.params_out, "write trained refiner parameters");
    run_cmd->add_option("--levels", r_flags.levels)->check(CLI::NonNegativeNumber);
    run_cmd->add_option("--lambda", r_flags.lambda)->check(CLI::Range(0.0, 1.0));
    run_cmd->add_option("--gcn-layers", r_flags.gcn_layers)->check(CLI::PositiveNumber);
    run_cmd->add_option("--lr", r_flags.lr)->check(CLI::PositiveNumber);
    run_cmd->add_option("--epochs", r_flags.epochs)->check(CLI::NonNegativeNumber);
    run_cmd->add_option("--min-nodes", r_flags.min_nodes)->check(CLI::NonNegativeNumber);
    run_cmd->add_option("--refine", r_flags.refine)->transform(CLI::CheckedTransformer(kRefineModes, CLI::ignore_case));
    run_cmd->add_option("--matcher", r_flags.matcher)->transform(CLI::CheckedTransformer(kMatchers, CLI::ignore_case));
    run_cmd->add_option("--avg-rounds", r_flags.avg_rounds)->check(CLI::PositiveNumber);
    run_cmd->add_option("--avg-self-loop", r_flags.avg_self_loop)->check(CLI::NonNegativeNumber);
    run_cmd->add_flag("--double-base", r_flags.double_base, "train on an extra level with a second base embedding");

    // refine
    RefineFlags f_flags;
    auto* refine_cmd = app.add_subcommand("refine", "project and refine one level");
    refine_cmd->add_option("--emb", f_flags.emb, "coarse embedding")->required();
    refine_cmd->add_option("--graph", f_flags.graph, "fine graph")->required();
    refine_cmd->add_option("--matching", f_flags.matching, "assignment file")->required();
    refine_cmd->add_option("--mode", f_flags.mode)->transform(CLI::CheckedTransformer(kRefineModes, CLI::ignore_case));
    refine_cmd->add_option("--params", f_flags.params, "refiner parameter file (trained mode)");
    refine_cmd->add_option("--lambda", f_flags.lambda)->check(CLI::Range(0.0, 1.0));
    refine_cmd->add_option("--gcn-layers", f_flags.gcn_layers)->check(CLI::PositiveNumber);
    refine_cmd->add_option("--avg-rounds", f_flags.avg_rounds)->check(CLI::PositiveNumber);
    refine_cmd->add_option("--avg-self-loop", f_flags.avg_self_loop)->check(CLI::NonNegativeNumber);
    refine_cmd->add_option("--seed", f_flags.seed);
    refine_cmd->add_option("--out", f_flags.out)->required();

    // eval
    std::string v_emb, v_labels, v_report;
    int v_folds = 10;
    std::uint64_t v_seed = 0;
    LogRegOptions v_opts;
    auto* eval_cmd = app.add_subcommand("eval", "cross-validated node classification");
    eval_cmd->add_option("--emb", v_emb)->required();
    eval_cmd->add_option("--labels", v_labels)->required();
    eval_cmd->add_option("--folds", v_folds)->check(CLI::Range(2, 1 << 30));
    eval_cmd->add_option("--seed", v_seed);
    eval_cmd->add_option("--reg", v_opts.reg)->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--iters", v_opts.iters)->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--report", v_report, "write the report JSON here too");

    // sbm
    int s_blocks = 5, s_per_block = 200;
    double s_p_in = 0.1, s_p_out = 0.01;
    std::uint64_t s_seed = 0;
    std::string s_graph, s_labels;
    auto* sbm_cmd = app.add_subcommand("sbm", "generate a stochastic block model graph with labels");
    sbm_cmd->add_option("--blocks", s_blocks)->check(CLI::PositiveNumber);
    sbm_cmd->add_option("--per-block", s_per_block)->check(CLI::PositiveNumber);
    sbm_cmd->add_option("--p-in", s_p_in)->check(CLI::Range(0.0, 1.0));
    sbm_cmd->add_option("--p-out", s_p_out)->check(CLI::Range(0.0, 1.0));
    sbm_cmd->add_option("--seed", s_seed);
    sbm_cmd->add_option("--graph-out", s_graph)->required();
    sbm_cmd->add_option("--labels-out", s_labels)->required();

    std::vector<std::string> argv_store{"mile"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInputError;
    }

    try {
        if (*coarsen_cmd) return cmd_coarsen(c_graph, c_levels, c_min_nodes, c_matcher, c_seed, c_prefix, out);
        if (*embed_cmd) return cmd_embed(e_flags);
        if (*run_cmd) return cmd_run(r_flags, out);
        if (*refine_cmd) return cmd_refine(f_flags);
        if (*eval_cmd) return cmd_eval(v_emb, v_labels, v_folds, v_seed, v_opts, v_report, out);
        if (*sbm_cmd) return cmd_sbm(s_blocks, s_per_block, s_p_in, s_p_out, s_seed, s_graph, s_labels);
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    return kExitInputError;
}

} // namespace mile::cli
