#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace shapca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or argument violation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Shapes of two inputs do not agree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Derives an independent stage seed from the global seed and a stage label
// (splitmix64 over the global seed xor an FNV-1a hash of the label).
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage);

std::uint64_t splitmix64(std::uint64_t x);

namespace parallel {

// Worker count shared by every parallel loop in the library. 0 means
// std::thread::hardware_concurrency().
void set_workers(unsigned n);
unsigned workers();

// Runs body(i) for i in [0, n). Each index is visited exactly once; results
// must be written to index-addressed storage so output is independent of
// scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace parallel

}  // namespace shapca
