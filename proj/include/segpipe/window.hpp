#pragma once

#include <array>
#include <memory>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

// Produces a 3-channel probability patch for a modality patch. `origin` is the
// window start in the volume currently being tiled and `flip` the active
// test-time-augmentation flip (identity outside TTA); content-based predictors
// ignore both, file-backed ones need them to look up the right region.
class Predictor {
  public:
    virtual ~Predictor() = default;
    virtual ChannelProbMap predict(const FloatStack& patch, std::array<std::int64_t, 3> origin,
                                   FlipSpec flip) = 0;
};

struct WindowGrid {
    Shape3 window;
    std::vector<std::int64_t> starts_h, starts_w, starts_d;

    std::int64_t window_count() const {
        return static_cast<std::int64_t>(starts_h.size() * starts_w.size() * starts_d.size());
    }
};

// Start offsets along one axis: multiples of the stride, the last one clipped
// so the final window ends exactly at the axis length.
std::vector<std::int64_t> window_starts(std::int64_t length, std::int64_t window, double overlap);

WindowGrid make_window_grid(Shape3 volume, Shape3 window, double overlap);

// Stitches per-window predictions with uniform importance: each voxel is the
// mean of every window prediction covering it. Accumulation is in double, so
// the result does not depend on window order.
ChannelProbMap sliding_window_predict(const FloatStack& input, Predictor& predictor, const WindowGrid& grid,
                                      FlipSpec flip = {});

// Mean over the 8 axis-flip augmentations of unflip(predict(flip(input))).
ChannelProbMap tta_predict(const FloatStack& input, Predictor& predictor, const WindowGrid& grid);

} // namespace segpipe
