#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mtt
{

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Planar position in meters.
using Position = Vec2;

/// All randomness flows through explicitly passed engines of this type.
using Rng = std::mt19937_64;

class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error("config field '" + field + "': " + what), field_(std::move(field))
  {
  }

  const std::string& field() const { return field_; }

private:
  std::string field_;
};

/// Thrown for inputs outside an operation's mathematical domain.
class DomainError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Operations on a node that its mode or capabilities do not allow.
class TransitionError : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

/// Derives independent, reproducible stream seeds from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform draw in [0, 1) that does not depend on the standard library's
/// distribution implementation.
inline double uniform01(Rng& rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal draw (Box-Muller on uniform01), reproducible across
/// standard library implementations.
inline double standard_normal(Rng& rng)
{
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace mtt
