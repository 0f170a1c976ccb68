#pragma once

#include "adaptsde/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>

namespace adaptsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The output
/// block is a pure function of (key, counter), so streams keyed by distinct
/// (seed, stream_id) pairs never overlap.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block counter, Key key) noexcept;
};

/// Reproducible stream of standard normal variates identified by
/// (seed, stream_id). Normal number i is a deterministic function of
/// (seed, stream_id, i); `counter` is the index of the next draw.
class NoiseStream {
 public:
  NoiseStream() = default;
  NoiseStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

  double next_gaussian();
  void fill_gaussian(std::span<double> out);
  void fill_gaussian(Vector& out) { fill_gaussian(std::span<double>(out.data(), out.size())); }
  Vector gaussian(int d);
  /// Uniform on (0, 1). Consumes two normal slots.
  double next_uniform();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  Philox4x32::Block block(std::uint64_t index) const noexcept;

  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t cached_pair_ = ~std::uint64_t{0};
  double cached_[2] = {0.0, 0.0};
};

/// Memoized d-dimensional Wiener path W(t), W(0) = 0.
///
/// Unrealized times are filled on demand: beyond the last knot by an
/// independent Gaussian increment, between knots u < t < v by the Brownian
/// bridge with mean W(u) + (t-u)/(v-u) (W(v)-W(u)) and per-coordinate
/// variance (t-u)(v-t)/(v-u). Each new knot consumes the next d normals of
/// the stream, so the realized path depends on the order of requests: a
/// fixed query order gives a fixed path. Realized knots never change.
class BrownianPath {
 public:
  BrownianPath(int dim, NoiseStream stream);

  int dim() const noexcept { return dim_; }
  /// W(t), realizing it if needed. t >= 0.
  const Vector& at(double t);
  /// W(t) - W(s) for 0 <= s < t. Realizes s before t when both are new.
  Vector increment(double s, double t);
  void increment(double s, double t, Vector& out);

  bool is_realized(double t) const { return knots_.count(t) != 0; }
  std::size_t knot_count() const noexcept { return knots_.size(); }
  const std::map<double, Vector>& knots() const noexcept { return knots_; }
  const NoiseStream& stream() const noexcept { return stream_; }

 private:
  int dim_;
  NoiseStream stream_;
  std::map<double, Vector> knots_;
  Vector draw_;
};

}  // namespace adaptsde
