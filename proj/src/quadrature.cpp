#include "edd/quadrature.hpp"

#include <cmath>

namespace edd {

const TriangleRule& triangle_rule() {
  static const TriangleRule rule = [] {
    const double s = std::sqrt(15.0);
    const double a1 = (6.0 - s) / 21.0, w1 = (155.0 - s) / 1200.0;
    const double a2 = (6.0 + s) / 21.0, w2 = (155.0 + s) / 1200.0;
    TriangleRule r{};
    r.bary[0] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    r.weight[0] = 9.0 / 40.0;
    r.bary[1] = {a1, a1, 1.0 - 2.0 * a1};
    r.bary[2] = {a1, 1.0 - 2.0 * a1, a1};
    r.bary[3] = {1.0 - 2.0 * a1, a1, a1};
    r.bary[4] = {a2, a2, 1.0 - 2.0 * a2};
    r.bary[5] = {a2, 1.0 - 2.0 * a2, a2};
    r.bary[6] = {1.0 - 2.0 * a2, a2, a2};
    for (int q = 1; q <= 3; ++q) r.weight[q] = w1;
    for (int q = 4; q <= 6; ++q) r.weight[q] = w2;
    return r;
  }();
  return rule;
}

const SegmentRule& segment_rule() {
  static const SegmentRule rule = [] {
    const double d = 0.5 * std::sqrt(0.6);
    return SegmentRule{{0.5 - d, 0.5, 0.5 + d}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
  }();
  return rule;
}

}  // namespace edd
