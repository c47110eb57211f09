#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dlrisk {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using IntVector = Eigen::VectorXi;

/// Every random draw in the library goes through this engine so that runs are
/// reproducible from a single 64-bit seed.
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or configuration violation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File layout does not match the expected header/columns.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or diverging optimisation.
class NumericError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, std::string_view message) {
  if (!condition) throw InvalidArgument(std::string(message));
}

/// SplitMix64 finaliser; used to derive independent seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable (platform independent) derivation of a child seed from a parent
/// seed and a label, e.g. a pipeline stage name.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix_seed(seed ^ mix_seed(h));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(seed ^ mix_seed(index + 0x51ed270b27ULL));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Labels of the binary hedge task: class 1 = hedge (A-book), class 0 = no hedge.
inline int to_class(int signed_label) { return signed_label > 0 ? 1 : 0; }
inline int to_signed(int cls) { return cls == 1 ? +1 : -1; }

/// Gathers rows of a matrix by index.
template <typename Derived>
MatrixX<typename Derived::Scalar> take_rows(const Eigen::MatrixBase<Derived>& m,
                                            const std::vector<int>& rows) {
  MatrixX<typename Derived::Scalar> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

template <typename Derived>
VectorX<typename Derived::Scalar> take(const Eigen::MatrixBase<Derived>& v, const std::vector<int>& idx) {
  VectorX<typename Derived::Scalar> out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

}  // namespace dlrisk
