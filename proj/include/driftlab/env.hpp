#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace driftlab {

/// Real function on the half torus {0 <= x1 < L1/2} x transverse torus,
/// stored row-major (x1 slowest).
using HalfField = Eigen::VectorXd;
/// Real function on the transverse torus (extents L2..Ld), row-major.
using TransverseField = Eigen::VectorXd;
/// Real function on the full torus, row-major with x1 slowest.
using TorusField = Eigen::VectorXd;

/// Periodic box Z^d / (L1 Z x ... x Ld Z) with L1 even.
///
/// Linear indices are row-major with x1 slowest, so a full-torus index reads
/// x1 * transverse_sites() + y, and the half torus occupies the first
/// half_sites() indices with the same layout.
class TorusShape {
 public:
  /// An odd requested L1 is doubled; `doubled()` records that it happened.
  explicit TorusShape(std::vector<int> dims);

  int dim() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  int extent(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
  /// L = L1 / 2, the number of x1 layers in the half torus.
  int half_length() const { return dims_[0] / 2; }
  bool doubled() const { return doubled_; }

  std::size_t sites() const { return static_cast<std::size_t>(dims_[0]) * transverse_; }
  std::size_t half_sites() const { return static_cast<std::size_t>(half_length()) * transverse_; }
  std::size_t transverse_sites() const { return transverse_; }
  std::vector<int> transverse_dims() const { return {dims_.begin() + 1, dims_.end()}; }

  /// Coordinates are reduced modulo the extents.
  std::size_t index(std::span<const int> site) const;
  std::vector<int> site(std::size_t index) const;

  /// Full-torus neighbour of `index` by `step` lattice units along `axis`.
  std::size_t neighbor(std::size_t index, int axis, int step) const;
  /// Transverse-torus neighbour; `axis` counts from 1 (the e2 direction).
  std::size_t transverse_neighbor(std::size_t y, int axis, int step) const;

  bool operator==(const TorusShape& other) const { return dims_ == other.dims_; }

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> strides_;
  std::size_t transverse_ = 1;
  bool doubled_ = false;
};

/// The transverse torus Z^{d-1} / (L2 Z x ... x Ld Z). With no axes it is a
/// single site.
class TransverseTorus {
 public:
  explicit TransverseTorus(std::vector<int> dims);
  static TransverseTorus of(const TorusShape& shape) { return TransverseTorus(shape.transverse_dims()); }

  int axes() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t sites() const { return sites_; }
  /// `axis` is 0-based among the transverse axes.
  std::size_t neighbor(std::size_t y, int axis, int step) const;
  std::vector<int> coords(std::size_t y) const;

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> strides_;
  std::size_t sites_ = 1;
};

/// Periodic drift b in the e1 direction, antisymmetric under
/// x1 -> L1 - 1 - x1 and bounded by sup|b| < 1/(2d).
///
/// Only the half-torus values are stored; the other half is read with the
/// sign flipped, so the antisymmetry holds bit-for-bit.
class DriftField {
 public:
  /// Throws ShapeError on a size mismatch and AmplitudeError when
  /// sup|half| >= 1/(2d) or a value is not finite.
  DriftField(TorusShape shape, HalfField half_values);

  static DriftField zero(const TorusShape& shape);

  const TorusShape& shape() const { return shape_; }
  const HalfField& half_values() const { return half_; }
  int dim() const { return shape_.dim(); }

  /// b at layer x1 (any integer, taken mod L1) and transverse index y.
  double at(int x1, std::size_t y) const;
  /// b at a full-torus linear index.
  double at_index(std::size_t index) const;
  TorusField full_values() const;

  double sup_norm() const;
  /// Average of b over the full torus (compensated summation).
  double torus_mean() const;

  /// Hex digest of shape and half values; identical fields share a digest.
  std::string digest() const;

 private:
  TorusShape shape_;
  HalfField half_;
};

/// Antisymmetric extension of half-torus data.
DriftField make_drift_from_half(const TorusShape& shape, const HalfField& half);

/// b -> -b.
DriftField reflect_drift(const DriftField& b);

/// Half-torus values i.i.d. uniform in [-amplitude, amplitude], extended
/// antisymmetrically. Deterministic in `seed` across platforms.
DriftField random_drift(const TorusShape& shape, double amplitude, std::uint64_t seed);

/// b(x1, y) = amplitude * sin(pi k (x1 + 1/2) / L) * cos(sum_j 2 pi m_j y_j / L_j).
DriftField mode_drift(const TorusShape& shape, int k, std::span<const int> transverse_wave,
                      double amplitude);

/// Upper bound 1/(2d) on sup|b|.
inline double drift_bound(int d) { return 1.0 / (2.0 * d); }

/// Uniform double in [0,1) from the top 53 bits of a 64-bit word.
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace driftlab
