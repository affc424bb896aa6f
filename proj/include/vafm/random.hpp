#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "vafm/errors.hpp"
#include "vafm/numeric_utils.hpp"

namespace vafm {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// pcg64 (XSL-RR 128/64) engine addressed by (seed, stream_id). The same pair
// always reproduces the same sequence; distinct stream ids select distinct
// pcg increments and therefore independent sequences, so concurrent units of
// work can each own a stream without coordination.
class RandomStream {
public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    using u128 = unsigned __int128;
    const u128 inc_hi = detail::splitmix64(stream_id);
    const u128 inc_lo = detail::splitmix64(stream_id ^ 0xda3e39cb94b95bdbULL);
    inc_ = (((inc_hi << 64) | inc_lo) << 1) | 1u;
    const u128 seed_hi = detail::splitmix64(seed);
    const u128 seed_lo = detail::splitmix64(seed ^ 0xc2b2ae3d27d4eb4fULL);
    state_ = 0;
    step();
    state_ += (seed_hi << 64) | seed_lo;
    step();
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    const unsigned __int128 old = state_;
    step();
    const std::uint64_t xored =
        static_cast<std::uint64_t>(old >> 64) ^ static_cast<std::uint64_t>(old);
    const unsigned rot = static_cast<unsigned>(old >> 122);
    return (xored >> rot) | (xored << ((64 - rot) % 64));
  }

  // Uniform on the open interval (0,1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the inverse CDF (one uniform per draw).
  double normal() { return detail::normal_quantile_impl(uniform()); }

  // Uniform integer in [0, bound), bias-free via rejection.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0)
      throw std::invalid_argument("uniform_below: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

private:
  void step() { state_ = state_ * multiplier() + inc_; }

  static constexpr unsigned __int128 multiplier() {
    return (static_cast<unsigned __int128>(2549297995355413924ULL) << 64) |
           4865540595714422341ULL;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  unsigned __int128 state_;
  unsigned __int128 inc_;
};

// Packs a purpose tag, an iteration counter and a unit index into a stream
// id. Unique by construction for tag < 256, iteration < 2^32, unit < 2^24,
// which keeps per-unit streams collision-free within a run.
constexpr std::uint64_t make_stream_id(std::uint8_t tag, std::uint64_t iteration,
                                       std::uint64_t unit) {
  return (static_cast<std::uint64_t>(tag) << 56) |
         ((iteration & 0xffffffffULL) << 24) | (unit & 0xffffffULL);
}

enum class TruncationSide { positive, negative };

namespace detail {

// Standard normal conditioned on [a, +inf). Inverse CDF in the body; for
// a > 5 the tail mass is too small for that route and Robert's
// exponential-proposal rejection is used instead.
inline double lower_truncated_std_normal(double a, RandomStream &rng) {
  if (a <= 5.0) {
    const double tail = 0.5 * std::erfc(a * M_SQRT1_2);
    return -normal_quantile_impl(rng.uniform() * tail);
  }
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(rng.uniform()) / alpha;
    const double d = z - alpha;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return z;
  }
}

}  // namespace detail

// Draw from N(mean, 1) restricted to the requested half-line. Positive-side
// draws are strictly > 0 and negative-side draws strictly < 0. Stable for
// |mean| well past 30.
inline double sample_truncated_normal(double mean, TruncationSide side,
                                      RandomStream &rng) {
  if (!std::isfinite(mean))
    throw std::invalid_argument("sample_truncated_normal: mean must be finite");
  if (side == TruncationSide::negative)
    return -sample_truncated_normal(-mean, TruncationSide::positive, rng);
  double x;
  do {
    x = mean + detail::lower_truncated_std_normal(-mean, rng);
  } while (!(x > 0.0));
  return x;
}

// Gamma(shape, rate) with mean shape/rate, Marsaglia-Tsang squeeze method.
inline double sample_gamma(double shape, double rate, RandomStream &rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::invalid_argument("sample_gamma: shape and rate must be positive");
  if (shape < 1.0) {
    const double g = sample_gamma(shape + 1.0, 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / (3.0 * std::sqrt(d));
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

// Dirichlet(alpha) via normalized gammas; entries of the result are strictly
// positive and sum to one.
inline Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd &alpha,
                                        RandomStream &rng) {
  if (alpha.size() == 0)
    throw std::invalid_argument("sample_dirichlet: empty alpha");
  Eigen::VectorXd g(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0))
      throw std::invalid_argument("sample_dirichlet: alpha entries must be positive");
    g[i] = sample_gamma(alpha[i], 1.0, rng);
  }
  return g / g.sum();
}

// N(mean, cov) by Cholesky of the covariance. A failed factorization means
// the input was not positive definite and is reported, not papered over.
inline Eigen::VectorXd sample_mvn_cov(const Eigen::VectorXd &mean,
                                      const Eigen::MatrixXd &cov,
                                      RandomStream &rng) {
  const Eigen::Index k = mean.size();
  if (cov.rows() != k || cov.cols() != k)
    throw std::invalid_argument("sample_mvn_cov: dimension mismatch");
  if (k == 0) return Eigen::VectorXd();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw numeric_error("sample_mvn_cov: covariance is not positive definite");
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < k; ++i) z[i] = rng.normal();
  return mean + llt.matrixL() * z;
}

// N(mean, prec^{-1}) without forming the inverse: prec = L L', draw
// mean + L^{-T} z.
inline Eigen::VectorXd sample_mvn_prec(const Eigen::VectorXd &mean,
                                       const Eigen::MatrixXd &prec,
                                       RandomStream &rng) {
  const Eigen::Index k = mean.size();
  if (prec.rows() != k || prec.cols() != k)
    throw std::invalid_argument("sample_mvn_prec: dimension mismatch");
  if (k == 0) return Eigen::VectorXd();
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw numeric_error("sample_mvn_prec: precision is not positive definite");
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < k; ++i) z[i] = rng.normal();
  return mean + llt.matrixU().solve(z);
}

}  // namespace vafm
