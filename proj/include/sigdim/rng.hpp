#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace sigdim {

// xoshiro256++ generator seeded through splitmix64, with hand-rolled
// sampling transforms so streams are reproducible bit-for-bit from a seed
// independently of the standard library implementation.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);

  // Standard normal via the Marsaglia polar method (pairs cached).
  double normal();

  // Marsaglia-Tsang rejection sampler; valid for every shape > 0 through
  // the u^(1/shape) boost below shape 1.
  double gamma(double shape, double scale);
  double chi_squared(double dof);

  Eigen::VectorXd normal_vector(Eigen::Index p);

private:
  std::array<std::uint64_t, 4> state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Substream derivation for (cell, replicate) grids: serial and parallel
// execution draw identical numbers.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

// Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the signs
// fixed so R has a positive diagonal (makes the draw deterministic).
Eigen::MatrixXd random_orthogonal(Eigen::Index p, Rng& rng);

}  // namespace sigdim
