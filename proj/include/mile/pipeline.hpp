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
#include <optional>
#include <vector>

#include <json.hpp>

#include "mile/coarsening.hpp"
#include "mile/embedding.hpp"
#include "mile/errors.hpp"
#include "mile/graph.hpp"
#include "mile/refinement.hpp"

namespace mile {

struct MileConfig {
    int levels = 1;
    int dim = 128;
    BaseEmbedderConfig base;
    RefineMode refine_mode = RefineMode::trained();
    double lambda = 0.05;
    int gcn_layers = 2;
    TrainConfig train;
    NodeId min_nodes = kDefaultMinNodes;
    Matcher matcher = Matcher::Hybrid;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Independent seed streams derived from MileConfig::seed.
enum class Phase : std::uint64_t { Matching = 1, Base = 2, RefinerInit = 3, Untrained = 4 };

inline std::uint64_t phase_seed(std::uint64_t master, Phase phase) {
    return derive_seed(master, static_cast<std::uint64_t>(phase));
}

/// The base-embedder configuration a run with `cfg` uses (dim and seed filled in).
BaseEmbedderConfig effective_base_config(const MileConfig& cfg);

struct LevelInfo {
    NodeId nodes = 0;
    std::int64_t edges = 0;
};

struct RunReport {
    int requested_levels = 0;
    int effective_levels = 0;
    std::vector<LevelInfo> levels;
    std::optional<LevelInfo> extra_level; ///< level m+1 of a double-base run
    double coarsen_ms = 0.0;
    double base_ms = 0.0;
    double train_ms = 0.0;
    double refine_ms = 0.0;
    int base_embed_calls = 0;
    int training_invocations = 0;
    BaseEmbedStats base_stats; ///< summed over all base embeddings of the run
    std::optional<double> initial_loss;
    std::optional<double> final_loss;
    std::optional<long> peak_rss_kb;
};

struct MileResult {
    Embedding embedding;
    RunReport report;
    /// The single parameter set used for every refinement step, if trained.
    std::optional<RefinerParams> params;
};

/// Training diverged; carries the partial report.
class RunDivergenceError : public DivergenceError {
public:
    RunDivergenceError(const DivergenceError& cause, RunReport report)
        : DivergenceError(cause), report_(std::move(report)) {}

    const RunReport& report() const noexcept { return report_; }

private:
    RunReport report_;
};

/// Coarsen, embed the coarsest graph, train the refiner on a self-copy of the
/// coarsest level, then project and refine back to level 0 with one shared
/// parameter set. Untrained mode draws its weights from the Untrained phase seed.
MileResult mile_embed(const Graph& g, const MileConfig& cfg);

/// As mile_embed, but the refiner is trained to map the projection of an
/// extra level m+1 (second coarsening and base embedding) onto E_m. With zero
/// effective levels the output is the refined projection of level 1.
MileResult mile_embed_double_base(const Graph& g, const MileConfig& cfg);

/// Report JSON: levels[], timings{coarsen_ms, base_ms, train_ms, refine_ms},
/// final_loss, config echo and work counters.
nlohmann::json report_to_json(const RunReport& report, const MileConfig& cfg);

std::optional<long> peak_rss_kb();

} // namespace mile
