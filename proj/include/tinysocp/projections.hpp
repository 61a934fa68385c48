#pragma once

#include "tinysocp/problem.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>

namespace tinysocp {

/// out_i = max(lower_i, min(upper_i, z_i)). In place when out aliases z.
template <typename T>
void project_box(std::span<const T> z, std::span<const T> lower, std::span<const T> upper,
                 std::span<T> out) {
  assert(z.size() == lower.size() && z.size() == upper.size() && z.size() == out.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::max(lower[i], std::min(upper[i], z[i]));
  }
}

template <typename T>
void project_box(std::span<T> z, std::span<const T> lower, std::span<const T> upper) {
  project_box<T>(std::span<const T>(z), lower, upper, z);
}

/// Euclidean projection onto {z : z_last >= ||z_head||}, in place.
///
/// ||v|| <= -a maps to 0, ||v|| <= a is left alone, otherwise the point is
/// moved to (1 + a/||v||)/2 * (v, ||v||). A zero head always lands in one of
/// the first two cases, so the division never sees ||v|| = 0.
template <typename T>
void project_soc(std::span<T> z) {
  assert(z.size() >= 2);
  const std::size_t head = z.size() - 1;
  const T a = z[head];
  T sq = T(0);
  for (std::size_t i = 0; i < head; ++i) sq += z[i] * z[i];
  const T norm = std::sqrt(sq);
  if (norm <= -a) {
    for (T& value : z) value = T(0);
  } else if (norm <= a) {
    return;
  } else {
    const T scale = T(0.5) * (T(1) + a / norm);
    for (std::size_t i = 0; i < head; ++i) z[i] = scale * z[i];
    z[head] = scale * norm;
  }
}

/// Box projection on every index (infinite bounds pass values through), then
/// cone projection on each slice. Slices never overlap finite bounds, so the
/// result is the exact projection onto the product set.
template <typename T>
void project_slacks(std::span<T> z, std::span<const T> lower, std::span<const T> upper,
                    std::span<const ConeSlice> cones) {
  if (!lower.empty()) project_box<T>(z, lower, upper);
  for (const ConeSlice& cone : cones) {
    project_soc<T>(z.subspan(static_cast<std::size_t>(cone.start),
                             static_cast<std::size_t>(cone.len)));
  }
}

}  // namespace tinysocp
