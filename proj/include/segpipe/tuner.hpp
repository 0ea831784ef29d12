#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "segpipe/metrics.hpp"
#include "segpipe/postprocess.hpp"
#include "segpipe/volume.hpp"

namespace segpipe {

enum class TuneObjective {
    kLesionDice, // mean over cases of the per-case channel-mean lesion-wise dice
    kLegacyDice,
    kComposite, // 0.5 * (lesion + legacy)
};

std::string to_string(TuneObjective objective);
TuneObjective tune_objective_from_string(const std::string& name);

// Candidate values per tunable parameter; an empty list keeps the base
// config's value. The search is the full Cartesian product.
struct SearchGrid {
    struct FilterGrid {
        std::vector<int64_t> size_upper;
        std::vector<int64_t> size_lower;
        std::vector<double> prob_upper;
        std::vector<double> prob_mid;
    };

    std::vector<double> t_tc, t_wt, t_et;
    FilterGrid tc, wt, et;
    std::vector<int64_t> et_to_tc_min_voxels;
    std::vector<int> connectivity;

    int64_t candidate_count() const;
};

// Fixed parameter order used for deterministic tie-breaking; ascending
// lexicographic comparison of this tuple decides between equal scores.
std::array<double, 17> config_tuple(const PostprocessConfig& config);

// Every grid combination applied over the base config, generated in canonical
// tuple order and validated.
std::vector<PostprocessConfig> enumerate_candidates(const SearchGrid& grid,
                                                    const PostprocessConfig& base);

struct TuneCase {
    std::string id;
    ChannelProbMap probs;
    LabelMap gt;
};

struct ScoredConfig {
    PostprocessConfig config;
    double score = 0.0;
};

struct TuneResult {
    TuneObjective objective = TuneObjective::kLesionDice;
    int64_t n_candidates = 0;
    int n_cases = 0;
    ScoredConfig best;
    std::vector<ScoredConfig> leaderboard; // score descending, ties by ascending tuple
};

double objective_score(const CorpusReport& report, TuneObjective objective);

// Scores every candidate on every case (postprocess, then evaluate against the
// reference labels) and ranks them. `jobs` threads split the candidates; the
// result is independent of the split.
TuneResult tune(const std::vector<TuneCase>& cases, const SearchGrid& grid,
                const PostprocessConfig& base, const MetricsConfig& metrics_cfg,
                TuneObjective objective, int jobs = 1);

} // namespace segpipe
