#include "adaptsde/noise.hpp"

#include "adaptsde/errors.hpp"

#include <cmath>
#include <numbers>

namespace adaptsde {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// 53-bit uniform strictly inside (0, 1).
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
  return (static_cast<double>(bits & ((std::uint64_t{1} << 53) - 1)) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Block Philox4x32::generate(Block ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

Philox4x32::Block NoiseStream::block(std::uint64_t index) const noexcept {
  const Philox4x32::Block ctr = {static_cast<std::uint32_t>(index),
                                 static_cast<std::uint32_t>(index >> 32),
                                 static_cast<std::uint32_t>(stream_id_),
                                 static_cast<std::uint32_t>(stream_id_ >> 32)};
  const Philox4x32::Key key = {static_cast<std::uint32_t>(seed_),
                               static_cast<std::uint32_t>(seed_ >> 32)};
  return Philox4x32::generate(ctr, key);
}

double NoiseStream::next_gaussian() {
  const std::uint64_t pair = counter_ >> 1;
  if (pair != cached_pair_) {
    // Box-Muller on one Philox block: both outputs of the transform are used.
    const auto b = block(pair);
    const double u1 = to_unit(b[0], b[1]);
    const double u2 = to_unit(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_[0] = r * std::cos(theta);
    cached_[1] = r * std::sin(theta);
    cached_pair_ = pair;
  }
  return cached_[counter_++ & 1];
}

void NoiseStream::fill_gaussian(std::span<double> out) {
  for (double& v : out) v = next_gaussian();
}

Vector NoiseStream::gaussian(int d) {
  Vector out(d);
  fill_gaussian(out);
  return out;
}

double NoiseStream::next_uniform() {
  // Align to a fresh block so the uniform does not share bits with a normal.
  const std::uint64_t pair = (counter_ + 1) >> 1;
  counter_ = 2 * (pair + 1);
  const auto b = block(pair);
  return to_unit(b[0], b[1]);
}

BrownianPath::BrownianPath(int dim, NoiseStream stream)
    : dim_(dim), stream_(stream), draw_(dim) {
  if (dim < 1) throw InvalidArgument("BrownianPath: dim must be >= 1");
  knots_.emplace(0.0, Vector::Zero(dim));
}

const Vector& BrownianPath::at(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("BrownianPath: negative or non-finite time");
  auto upper = knots_.lower_bound(t);
  if (upper != knots_.end() && upper->first == t) return upper->second;
  stream_.fill_gaussian(draw_);
  auto lower = std::prev(upper);
  const double u = lower->first;
  Vector value;
  if (upper == knots_.end()) {
    value = lower->second + std::sqrt(t - u) * draw_;
  } else {
    const double v = upper->first;
    const double w = (t - u) / (v - u);
    const double sd = std::sqrt((t - u) * (v - t) / (v - u));
    value = lower->second + w * (upper->second - lower->second) + sd * draw_;
  }
  return knots_.emplace_hint(upper, t, std::move(value))->second;
}

void BrownianPath::increment(double s, double t, Vector& out) {
  if (!(s >= 0.0)) throw InvalidArgument("BrownianPath::increment: negative time");
  if (!(s < t)) throw InvalidArgument("BrownianPath::increment: requires s < t");
  const Vector& ws = at(s);  // map references stay valid across inserts
  const Vector& wt = at(t);
  out = wt - ws;
}

Vector BrownianPath::increment(double s, double t) {
  Vector out(dim_);
  increment(s, t, out);
  return out;
}

}  // namespace adaptsde
