#pragma once

// Parallel-beam line-model projector with its exact transpose and a
// pixel-driven nearest-bin backprojector that is deliberately not the
// transpose.
//
// Conventions:
//  * the image is n x n unit pixels centred on the origin; pixel (ix, iy)
//    covers [ix - n/2, ix - n/2 + 1] x [iy - n/2, iy - n/2 + 1] and has
//    index iy * n + ix (y pointing up);
//  * angles are theta_k = k pi / K, k = 0..K-1;
//  * detector bin b has offset s_b = (b - (B - 1)/2) * bin_width and its
//    ray is { x cos(theta) + y sin(theta) = s_b }, traversed along
//    (-sin(theta), cos(theta));
//  * sinogram index is k * B + b.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "adjmm/linalg.hpp"
#include "adjmm/operator.hpp"

namespace adjmm::tomo {

struct ProjectorGeometry {
  std::size_t image_size = 2;
  std::vector<double> angles;
  std::size_t detector_bins = 2;
  double bin_width = 1.0;

  static ProjectorGeometry uniform(std::size_t n, std::size_t n_angles, std::size_t bins, double bin_width = 1.0) {
    ProjectorGeometry g{n, {}, bins, bin_width};
    g.angles.resize(n_angles);
    for (std::size_t k = 0; k < n_angles; ++k)
      g.angles[k] = std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_angles);
    return g;
  }

  void validate() const {
    if (image_size < 2) throw std::invalid_argument("ProjectorGeometry: image_size must be >= 2");
    if (angles.empty()) throw std::invalid_argument("ProjectorGeometry: need at least one angle");
    if (detector_bins < 2) throw std::invalid_argument("ProjectorGeometry: detector_bins must be >= 2");
    if (!(bin_width > 0.0)) throw std::invalid_argument("ProjectorGeometry: bin_width must be > 0");
  }

  std::size_t n_pixels() const { return image_size * image_size; }
  std::size_t n_rays() const { return angles.size() * detector_bins; }
  double bin_offset(std::size_t b) const {
    return (static_cast<double>(b) - 0.5 * static_cast<double>(detector_bins - 1)) * bin_width;
  }
};

/// Sparse ray x pixel intersection lengths, one row per (angle, bin).
struct SparseProjectionWeights {
  std::size_t n_rays = 0;
  std::size_t n_pixels = 0;
  std::vector<std::size_t> row_start;  ///< size n_rays + 1
  std::vector<std::size_t> pixel;
  std::vector<double> weight;

  std::span<const std::size_t> row_pixels(std::size_t r) const {
    return {pixel.data() + row_start[r], row_start[r + 1] - row_start[r]};
  }
  std::span<const double> row_weights(std::size_t r) const {
    return {weight.data() + row_start[r], row_start[r + 1] - row_start[r]};
  }
};

namespace detail {

struct Segment {
  std::size_t pixel;
  double length;
};

/// Siddon traversal of one line through the n x n grid.
inline std::vector<Segment> trace_ray(std::size_t n, double theta, double s) {
  const double h = 0.5 * static_cast<double>(n);
  const double c = std::cos(theta), sn = std::sin(theta);
  const double ox = s * c, oy = s * sn;
  const double dx = -sn, dy = c;
  constexpr double parallel = 1e-15;

  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  auto clip = [&](double o, double d) {
    if (std::abs(d) < parallel) return o >= -h && o < h;
    double ta = (-h - o) / d, tb = (h - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    return true;
  };
  if (!clip(ox, dx) || !clip(oy, dy) || !(t1 > t0)) return {};

  std::vector<double> ts{t0, t1};
  auto crossings = [&](double o, double d) {
    if (std::abs(d) < parallel) return;
    for (std::size_t i = 0; i <= n; ++i) {
      const double t = (-h + static_cast<double>(i) - o) / d;
      if (t > t0 && t < t1) ts.push_back(t);
    }
  };
  crossings(ox, dx);
  crossings(oy, dy);
  std::sort(ts.begin(), ts.end());

  std::vector<Segment> out;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double len = ts[k + 1] - ts[k];
    if (len <= 0.0) continue;
    const double tm = 0.5 * (ts[k] + ts[k + 1]);
    const auto cell = [&](double p) {
      const double f = std::floor(p + h);
      return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n - 1)));
    };
    const std::size_t ix = cell(ox + tm * dx);
    const std::size_t iy = cell(oy + tm * dy);
    const std::size_t p = iy * n + ix;
    if (!out.empty() && out.back().pixel == p)
      out.back().length += len;
    else
      out.push_back({p, len});
  }
  return out;
}

}  // namespace detail

inline SparseProjectionWeights build_line_model(const ProjectorGeometry& geom) {
  geom.validate();
  SparseProjectionWeights w;
  w.n_rays = geom.n_rays();
  w.n_pixels = geom.n_pixels();
  w.row_start.reserve(w.n_rays + 1);
  w.row_start.push_back(0);
  for (double theta : geom.angles) {
    for (std::size_t b = 0; b < geom.detector_bins; ++b) {
      auto segs = detail::trace_ray(geom.image_size, theta, geom.bin_offset(b));
      std::sort(segs.begin(), segs.end(), [](const auto& x, const auto& y) { return x.pixel < y.pixel; });
      for (std::size_t k = 0; k < segs.size(); ++k) {
        if (!w.pixel.empty() && w.row_start.back() < w.pixel.size() && w.pixel.back() == segs[k].pixel) {
          w.weight.back() += segs[k].length;
          continue;
        }
        w.pixel.push_back(segs[k].pixel);
        w.weight.push_back(segs[k].length);
      }
      w.row_start.push_back(w.pixel.size());
    }
  }
  return w;
}

inline Vec project(const SparseProjectionWeights& w, std::span<const double> image) {
  require_length(image, w.n_pixels, "project: image");
  Vec sino(w.n_rays, 0.0);
  for (std::size_t r = 0; r < w.n_rays; ++r) {
    const auto px = w.row_pixels(r);
    const auto wt = w.row_weights(r);
    double acc = 0.0;
    for (std::size_t k = 0; k < px.size(); ++k) acc += wt[k] * image[px[k]];
    sino[r] = acc;
  }
  return sino;
}

/// Exact transpose of project.
inline Vec backproject_exact(const SparseProjectionWeights& w, std::span<const double> sino) {
  require_length(sino, w.n_rays, "backproject_exact: sinogram");
  Vec image(w.n_pixels, 0.0);
  for (std::size_t r = 0; r < w.n_rays; ++r) {
    const auto px = w.row_pixels(r);
    const auto wt = w.row_weights(r);
    for (std::size_t k = 0; k < px.size(); ++k) image[px[k]] += wt[k] * sino[r];
  }
  return image;
}

/// Pixel-driven backprojection: each pixel centre picks up the nearest detector bin, weighted by
/// pixel area / bin width. Linear, but not the transpose of project.
inline Vec backproject_mismatched(const ProjectorGeometry& geom, std::span<const double> sino) {
  geom.validate();
  require_length(sino, geom.n_rays(), "backproject_mismatched: sinogram");
  const std::size_t n = geom.image_size;
  const double h = 0.5 * static_cast<double>(n);
  const double centre_bin = 0.5 * static_cast<double>(geom.detector_bins - 1);
  const double weight = 1.0 / geom.bin_width;
  Vec image(geom.n_pixels(), 0.0);
  for (std::size_t k = 0; k < geom.angles.size(); ++k) {
    const double c = std::cos(geom.angles[k]), sn = std::sin(geom.angles[k]);
    const double* row = sino.data() + k * geom.detector_bins;
    for (std::size_t iy = 0; iy < n; ++iy) {
      const double y = static_cast<double>(iy) + 0.5 - h;
      for (std::size_t ix = 0; ix < n; ++ix) {
        const double x = static_cast<double>(ix) + 0.5 - h;
        const double pos = (x * c + y * sn) / geom.bin_width + centre_bin;
        const double b = std::round(pos);
        if (b < 0.0 || b > static_cast<double>(geom.detector_bins - 1)) continue;
        image[iy * n + ix] += weight * row[static_cast<std::size_t>(b)];
      }
    }
  }
  return image;
}

/// Immutable projector set; the oracles share the weights and can be used by concurrent runs.
class ProjectorSet {
 public:
  explicit ProjectorSet(ProjectorGeometry geom)
      : geom_(std::make_shared<const ProjectorGeometry>(std::move(geom))),
        weights_(std::make_shared<const SparseProjectionWeights>(build_line_model(*geom_))) {}

  const ProjectorGeometry& geometry() const { return *geom_; }
  const SparseProjectionWeights& weights() const { return *weights_; }

  /// R: image (n^2) -> sinogram (angles * bins).
  ForwardOracle forward() const {
    return {weights_->n_rays, weights_->n_pixels,
            [w = weights_](std::span<const double> img) { return project(*w, img); }};
  }

  AdjointOracle exact_backprojector() const {
    return {weights_->n_rays, weights_->n_pixels,
            [w = weights_](std::span<const double> sino) { return backproject_exact(*w, sino); }};
  }

  AdjointOracle mismatched_backprojector() const {
    return {weights_->n_rays, weights_->n_pixels,
            [g = geom_](std::span<const double> sino) { return backproject_mismatched(*g, sino); }};
  }

 private:
  std::shared_ptr<const ProjectorGeometry> geom_;
  std::shared_ptr<const SparseProjectionWeights> weights_;
};

}  // namespace adjmm::tomo
