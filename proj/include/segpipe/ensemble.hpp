#pragma once

#include <string>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

// Per-model, per-channel ensembling weight (order TC, WT, ET).
struct ModelWeights {
    std::string name;
    double tc = 0.0;
    double wt = 0.0;
    double et = 0.0;

    double channel(int c) const { return c == kTC ? tc : (c == kWT ? wt : et); }
};

void validate_weights(const std::vector<ModelWeights>& weights);

// Weighted per-channel average: out_c = sum_n w_{n,c} * map_{n,c} / sum_n w_{n,c},
// accumulated in double. The f64 variant exposes the accumulator result before
// the final float cast.
DoubleStack ensemble_f64(const std::vector<ChannelProbMap>& maps, const std::vector<ModelWeights>& weights);
ChannelProbMap ensemble(const std::vector<ChannelProbMap>& maps, const std::vector<ModelWeights>& weights);

} // namespace segpipe
