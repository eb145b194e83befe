#pragma once

#include <array>

namespace edd {

// Barycentric 7-point rule, exact to degree 5. Weights sum to 1 (scale by area).
struct TriangleRule {
  static constexpr int size = 7;
  std::array<std::array<double, 3>, size> bary;
  std::array<double, size> weight;
};

// 3-point Gauss on [0,1], weights sum to 1 (scale by length).
struct SegmentRule {
  static constexpr int size = 3;
  std::array<double, size> t;
  std::array<double, size> weight;
};

const TriangleRule& triangle_rule();
const SegmentRule& segment_rule();

}  // namespace edd
