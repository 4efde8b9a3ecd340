#include "bmal/random.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "bmal/errors.hpp"

namespace bmal {

namespace {
std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}
}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(seeded(seed, stream)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("empty range");
  // Rejection sampling over the largest multiple of bound.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r = engine_();
  while (r >= limit) r = engine_();
  return r % bound;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::vector<Index> Rng::sample_without_replacement(Index n, Index k) {
  if (k < 0 || k > n) throw InvalidArgument("cannot draw more distinct indices than the population size");
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index j = 0; j < k; ++j) {
    const auto r = static_cast<Index>(below(static_cast<std::uint64_t>(n - j)));
    std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(j + r)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

std::vector<Index> Rng::resample(Index n) {
  std::vector<Index> out(static_cast<std::size_t>(n));
  for (auto& i : out) i = static_cast<Index>(below(static_cast<std::uint64_t>(n)));
  return out;
}

MatrixXd gaussian_pool(Index n, Index k, Rng& rng) {
  MatrixXd z(n, k);
  for (Index i = 0; i < n; ++i) {
    z(i, 0) = 1.0;
    for (Index j = 1; j < k; ++j) z(i, j) = rng.normal();
  }
  return z;
}

}  // namespace bmal
