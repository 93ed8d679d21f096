#pragma once

// Virtual quantization grid. The grid divides an axis-aligned cube into
// resolution^3 voxels whose centers form the quantized-coordinate set.
// The set is never materialized: memory use is independent of the
// resolution, and a coordinate is discretized with one division per
// axis instead of a nearest-neighbor search.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cqfield/vec.hpp"

namespace cqfield {

struct GridSpec {
  double lo = -1.0;
  double hi = 1.0;
  std::int64_t resolution = 256;

  GridSpec() = default;
  GridSpec(double lo_, double hi_, std::int64_t resolution_)
      : lo(lo_), hi(hi_), resolution(resolution_) {
    validate();
  }

  void validate() const {
    if (!(hi > lo)) throw std::invalid_argument("GridSpec: hi must exceed lo");
    if (resolution < 1) throw std::invalid_argument("GridSpec: resolution must be >= 1");
    if (!((hi - lo) / double(resolution) > 0.0))
      throw std::invalid_argument("GridSpec: voxel interval underflows to zero");
  }

  double interval() const { return (hi - lo) / double(resolution); }
};

struct VoxelIndex {
  std::int64_t i = 0, j = 0, k = 0;

  bool operator==(const VoxelIndex&) const = default;

  // Lexicographic flat index in [0, R^3). 128-bit so that extreme
  // resolutions (R = 2^30 and beyond) do not overflow.
  static unsigned __int128 flat(const VoxelIndex& v, std::int64_t resolution) {
    using u128 = unsigned __int128;
    return (u128(v.k) * u128(resolution) + u128(v.j)) * u128(resolution) + u128(v.i);
  }
};

// One deduplicated run of samples along a ray: consecutive samples that
// landed in the same voxel, merged into a single render contribution.
struct RaySampleRun {
  Vec3 rep_point;      // first continuous coordinate of the run
  VoxelIndex voxel;    // voxel all merged samples share
  Vec3 discrete_point; // voxel center, exactly
  double delta = 0.0;  // merged segment length owned by this run
};

inline Vec3 voxel_center(const GridSpec& grid, const VoxelIndex& v) {
  const std::int64_t r = grid.resolution;
  if (v.i < 0 || v.i >= r || v.j < 0 || v.j >= r || v.k < 0 || v.k >= r)
    throw std::out_of_range("voxel_center: index outside [0, R-1]");
  const double ivl = grid.interval();
  return {grid.lo + (double(v.i) + 0.5) * ivl,
          grid.lo + (double(v.j) + 0.5) * ivl,
          grid.lo + (double(v.k) + 0.5) * ivl};
}

namespace detail {

inline std::int64_t quantize_axis(double x, double lo, double inv_interval,
                                  std::int64_t resolution) {
  // Total on all inputs: NaN and anything below lo clamp to 0,
  // anything at or past hi clamps to R-1. Ties on voxel faces resolve
  // to the higher index through floor semantics.
  if (!(x > lo)) return 0;
  const double t = std::floor((x - lo) * inv_interval);
  if (t >= double(resolution)) return resolution - 1;
  return std::int64_t(t);
}

} // namespace detail

struct QuantizeResult {
  VoxelIndex voxel;
  Vec3 center;
};

inline QuantizeResult quantize(const GridSpec& grid, const Vec3& q) {
  const double inv = 1.0 / grid.interval();
  VoxelIndex v{detail::quantize_axis(q.x, grid.lo, inv, grid.resolution),
               detail::quantize_axis(q.y, grid.lo, inv, grid.resolution),
               detail::quantize_axis(q.z, grid.lo, inv, grid.resolution)};
  return {v, voxel_center(grid, v)};
}

// Merges consecutive same-voxel samples along a ray into runs.
//
// Gap n -> n+1 is owned by the run containing sample n, so the run
// deltas partition the sampled polyline; the final run additionally
// receives `terminal_gap` (the caller's convention for the segment
// behind the last sample, typically the mean inter-sample gap).
inline std::vector<RaySampleRun> dedup_ray_samples(const GridSpec& grid,
                                                   std::span<const Vec3> points,
                                                   double terminal_gap) {
  if (points.empty())
    throw std::invalid_argument("dedup_ray_samples: a ray must have at least one sample");
  std::vector<RaySampleRun> runs;
  runs.reserve(points.size());

  QuantizeResult q = quantize(grid, points[0]);
  runs.push_back({points[0], q.voxel, q.center, 0.0});
  for (std::size_t n = 1; n < points.size(); ++n) {
    const double gap = norm(points[n] - points[n - 1]);
    runs.back().delta += gap; // left-endpoint rule: sample n-1 owns this gap
    q = quantize(grid, points[n]);
    if (!(q.voxel == runs.back().voxel)) {
      runs.push_back({points[n], q.voxel, q.center, 0.0});
    }
  }
  runs.back().delta += terminal_gap;
  return runs;
}

// Mean inter-sample gap; the default terminal-delta convention.
inline double mean_gap(std::span<const Vec3> points) {
  if (points.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t n = 1; n < points.size(); ++n) total += norm(points[n] - points[n - 1]);
  return total / double(points.size() - 1);
}

} // namespace cqfield
