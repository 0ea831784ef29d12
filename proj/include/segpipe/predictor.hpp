#pragma once

#include "segpipe/window.hpp"

namespace segpipe {

// Emits the same probability in every channel at every voxel.
class ConstantPredictor : public Predictor {
  public:
    explicit ConstantPredictor(double p);
    ChannelProbMap predict(const FloatStack& patch, std::array<std::int64_t, 3> origin, FlipSpec flip) override;

  private:
    float value_;
};

// Restriction of a fixed full-volume probability field. Flip-aware: under TTA
// it serves the field flipped the same way as the input, so the aggregate
// reproduces the field.
class FieldPredictor : public Predictor {
  public:
    explicit FieldPredictor(ChannelProbMap field);
    ChannelProbMap predict(const FloatStack& patch, std::array<std::int64_t, 3> origin, FlipSpec flip) override;

    const ChannelProbMap& field() const { return field_; }

  private:
    ChannelProbMap field_;
};

} // namespace segpipe
