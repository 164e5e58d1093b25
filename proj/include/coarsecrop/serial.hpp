#pragma once

// Single-threaded reference kernels. The OpenMP versions in the main headers
// are tested and benchmarked against these.

#include <span>
#include <vector>

#include "coarsecrop/anchors.hpp"
#include "coarsecrop/features.hpp"
#include "coarsecrop/image.hpp"
#include "coarsecrop/objectness.hpp"
#include "coarsecrop/tensor.hpp"

namespace coarsecrop::serial {

RawScoreMap channel_sum(const FeatureMap& features);

RawScoreMap bilinear_resize(const RawScoreMap& source, int height, int width);

/// Row prefix sums followed by column prefix sums, one element at a time.
SummedAreaTable build_sat(const Plane<float>& values);

std::vector<ScoredBox> score_anchors(std::span<const ScoredBox> boxes, const SummedAreaTable& sat);

/// Greedy suppression over a pre-sorted candidate list.
std::vector<ScoredBox> suppress_sorted(std::span<const ScoredBox> sorted, double iou_threshold);

MaskIntegral build_mask_integral(const InstanceMask& mask);

/// One 3x3 / stride-2 / pad-1 convolution + ReLU with floor-halved output.
FeatureMap conv3x3_s2_relu(const FeatureMap& input, std::span<const float> weights, int out_channels);

}  // namespace coarsecrop::serial
