#pragma once

#include "sdr/numerics.hpp"

#include <vector>

namespace sdr {

/// Spatial layout of one predictor. Flat predictors are stored in
/// height-width-channel order; a plain vector of dimension d is (h, w, 1)
/// with h * w = d.
struct Geometry {
    int height = 0;
    int width = 0;
    int channels = 0;

    int flat_size() const { return height * width * channels; }
    bool operator==(const Geometry&) const = default;
};

/// Predictors (one row per sample) with integer class labels.
struct LabeledSet {
    Matrix x;
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
};

}  // namespace sdr
