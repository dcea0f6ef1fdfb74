#include "driftlab/env.hpp"

#include "driftlab/error.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <iomanip>

namespace driftlab {

namespace {

constexpr std::size_t kMaxSites = std::size_t{1} << 31;

std::size_t wrap(long long x, int n) {
  long long r = x % n;
  return static_cast<std::size_t>(r < 0 ? r + n : r);
}

}  // namespace

TorusShape::TorusShape(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw ShapeError("torus needs at least one dimension");
  for (int L : dims_) {
    if (L < 1) throw ShapeError("torus extents must be positive");
  }
  if (dims_[0] % 2 != 0) {
    dims_[0] *= 2;
    doubled_ = true;
  }
  strides_.assign(dims_.size(), 1);
  std::size_t total = 1;
  for (std::size_t a = dims_.size(); a-- > 0;) {
    strides_[a] = total;
    if (total > kMaxSites / static_cast<std::size_t>(dims_[a])) {
      throw ShapeError("torus has too many sites to index");
    }
    total *= static_cast<std::size_t>(dims_[a]);
  }
  transverse_ = total / static_cast<std::size_t>(dims_[0]);
}

std::size_t TorusShape::index(std::span<const int> site) const {
  if (site.size() != dims_.size()) throw ShapeError("site has wrong dimension");
  std::size_t idx = 0;
  for (std::size_t a = 0; a < dims_.size(); ++a) idx += wrap(site[a], dims_[a]) * strides_[a];
  return idx;
}

std::vector<int> TorusShape::site(std::size_t index) const {
  std::vector<int> s(dims_.size());
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    s[a] = static_cast<int>((index / strides_[a]) % static_cast<std::size_t>(dims_[a]));
  }
  return s;
}

std::size_t TorusShape::neighbor(std::size_t index, int axis, int step) const {
  const auto a = static_cast<std::size_t>(axis);
  const long long c = static_cast<long long>((index / strides_[a]) % static_cast<std::size_t>(dims_[a]));
  const std::size_t moved = wrap(c + step, dims_[a]);
  return index - static_cast<std::size_t>(c) * strides_[a] + moved * strides_[a];
}

std::size_t TorusShape::transverse_neighbor(std::size_t y, int axis, int step) const {
  // Transverse indices coincide with full indices on the x1 = 0 layer.
  return neighbor(y, axis, step);
}

TransverseTorus::TransverseTorus(std::vector<int> dims) : dims_(std::move(dims)) {
  strides_.assign(dims_.size(), 1);
  std::size_t total = 1;
  for (std::size_t a = dims_.size(); a-- > 0;) {
    if (dims_[a] < 1) throw ShapeError("transverse extents must be positive");
    strides_[a] = total;
    if (total > kMaxSites / static_cast<std::size_t>(dims_[a])) {
      throw ShapeError("transverse torus has too many sites to index");
    }
    total *= static_cast<std::size_t>(dims_[a]);
  }
  sites_ = total;
}

std::size_t TransverseTorus::neighbor(std::size_t y, int axis, int step) const {
  const auto a = static_cast<std::size_t>(axis);
  const long long c = static_cast<long long>((y / strides_[a]) % static_cast<std::size_t>(dims_[a]));
  return y - static_cast<std::size_t>(c) * strides_[a] + wrap(c + step, dims_[a]) * strides_[a];
}

std::vector<int> TransverseTorus::coords(std::size_t y) const {
  std::vector<int> c(dims_.size());
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    c[a] = static_cast<int>((y / strides_[a]) % static_cast<std::size_t>(dims_[a]));
  }
  return c;
}

DriftField::DriftField(TorusShape shape, HalfField half_values)
    : shape_(std::move(shape)), half_(std::move(half_values)) {
  if (static_cast<std::size_t>(half_.size()) != shape_.half_sites()) {
    throw ShapeError("half-torus data has " + std::to_string(half_.size()) + " values, expected " +
                     std::to_string(shape_.half_sites()));
  }
  const double bound = drift_bound(shape_.dim());
  for (Eigen::Index i = 0; i < half_.size(); ++i) {
    if (!std::isfinite(half_[i]) || std::abs(half_[i]) >= bound) {
      std::ostringstream os;
      os << "drift value " << half_[i] << " violates sup|b| < 1/(2d) = " << bound;
      throw AmplitudeError(os.str());
    }
  }
}

DriftField DriftField::zero(const TorusShape& shape) {
  return DriftField(shape, HalfField::Zero(static_cast<Eigen::Index>(shape.half_sites())));
}

double DriftField::at(int x1, std::size_t y) const {
  const int L1 = shape_.extent(0);
  const int L = shape_.half_length();
  const auto T = shape_.transverse_sites();
  const int r = static_cast<int>(wrap(x1, L1));
  if (r < L) return half_[static_cast<Eigen::Index>(static_cast<std::size_t>(r) * T + y)];
  return -half_[static_cast<Eigen::Index>(static_cast<std::size_t>(L1 - 1 - r) * T + y)];
}

double DriftField::at_index(std::size_t index) const {
  const auto T = shape_.transverse_sites();
  return at(static_cast<int>(index / T), index % T);
}

TorusField DriftField::full_values() const {
  TorusField out(static_cast<Eigen::Index>(shape_.sites()));
  for (std::size_t i = 0; i < shape_.sites(); ++i) out[static_cast<Eigen::Index>(i)] = at_index(i);
  return out;
}

double DriftField::sup_norm() const { return half_.size() == 0 ? 0.0 : half_.cwiseAbs().maxCoeff(); }

double DriftField::torus_mean() const {
  // Neumaier summation.
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < shape_.sites(); ++i) {
    const double v = at_index(i);
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(shape_.sites());
}

std::string DriftField::digest() const {
  // FNV-1a over the extents and the IEEE bit patterns of the values.
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t word) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (word >> (8 * byte)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  for (int L : shape_.dims()) mix(static_cast<std::uint64_t>(L));
  for (Eigen::Index i = 0; i < half_.size(); ++i) {
    std::uint64_t bits;
    const double v = half_[i] == 0.0 ? 0.0 : half_[i];  // fold -0 into +0
    std::memcpy(&bits, &v, sizeof bits);
    mix(bits);
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

DriftField make_drift_from_half(const TorusShape& shape, const HalfField& half) {
  return DriftField(shape, half);
}

DriftField reflect_drift(const DriftField& b) { return DriftField(b.shape(), -b.half_values()); }

DriftField random_drift(const TorusShape& shape, double amplitude, std::uint64_t seed) {
  if (!(amplitude > 0.0) || amplitude >= drift_bound(shape.dim())) {
    throw AmplitudeError("random_drift amplitude must lie in (0, 1/(2d))");
  }
  std::mt19937_64 rng(seed);
  HalfField half(static_cast<Eigen::Index>(shape.half_sites()));
  for (Eigen::Index i = 0; i < half.size(); ++i) {
    half[i] = amplitude * (2.0 * unit_interval(rng()) - 1.0);
  }
  return DriftField(shape, std::move(half));
}

DriftField mode_drift(const TorusShape& shape, int k, std::span<const int> transverse_wave,
                      double amplitude) {
  const int d = shape.dim();
  const int L = shape.half_length();
  if (k < 1 || k > L) throw ValidationError("mode index k must lie in 1..L1/2");
  if (static_cast<int>(transverse_wave.size()) != d - 1) {
    throw ShapeError("transverse_wave needs one entry per transverse axis");
  }
  const auto T = shape.transverse_sites();
  HalfField half(static_cast<Eigen::Index>(shape.half_sites()));
  for (int x1 = 0; x1 < L; ++x1) {
    const double s = std::sin(std::numbers::pi * k * (x1 + 0.5) / L);
    for (std::size_t y = 0; y < T; ++y) {
      const auto coords = shape.site(y);  // x1 = 0 layer
      double phase = 0.0;
      for (int j = 1; j < d; ++j) {
        phase += 2.0 * std::numbers::pi * transverse_wave[static_cast<std::size_t>(j - 1)] *
                 coords[static_cast<std::size_t>(j)] / shape.extent(j);
      }
      half[static_cast<Eigen::Index>(static_cast<std::size_t>(x1) * T + y)] =
          amplitude * s * std::cos(phase);
    }
  }
  return DriftField(shape, std::move(half));
}

}  // namespace driftlab
