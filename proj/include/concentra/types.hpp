#pragma once

#include <Eigen/Dense>

#include <string>

namespace concentra {

// Trait space has dimension 1 or 2; fixed maximum sizes keep these off the heap.
using TraitPoint = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;
using TraitMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;

inline TraitPoint make_point(double x) {
  TraitPoint p(1);
  p << x;
  return p;
}

inline TraitPoint make_point(double x, double y) {
  TraitPoint p(2);
  p << x, y;
  return p;
}

std::string format_point(const TraitPoint& x);

}  // namespace concentra

namespace concentra {

// Axis-aligned computational box in trait space.
struct Box {
  TraitPoint lower;
  TraitPoint upper;

  int dimension() const { return static_cast<int>(lower.size()); }
  TraitPoint center() const { return (lower + upper) / 2.0; }
  bool contains(const TraitPoint& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
};

}  // namespace concentra
