#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace umlr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Stable identifiers; the CLI maps these to exit codes and error JSON.
enum class ErrorCode {
  kInvalidInput,
  kDimensionMismatch,
  kDegeneratePartition,
  kSingularSystem,
  kRecalibrationSingular,
  kUndefinedSlope,
  kUnavailable,
  kNonConvergence,
  kDivisionGuard,
  kResampling,
  kArmTooSmall,
  kNoMatches,
  kUnstableBootstrap,
  kParse,
  kIo,
  kConfig,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Observed sample {X, t, y}. Validated on construction and immutable after.
class Dataset {
 public:
  Dataset(Matrix x, Eigen::VectorXi t, Vector y);

  const Matrix& x() const noexcept { return x_; }
  const Eigen::VectorXi& t() const noexcept { return t_; }
  const Vector& y() const noexcept { return y_; }
  Index n() const noexcept { return y_.size(); }
  Index p() const noexcept { return x_.cols(); }
  Index n_treated() const noexcept { return n_treated_; }
  Index n_control() const noexcept { return n() - n_treated_; }

  // Rows of one arm, in original order.
  std::vector<Index> arm_indices(int arm) const;
  // Row subset (repeats allowed, as produced by case resampling).
  Dataset subset(std::span<const Index> rows) const;
  // Throws kArmTooSmall unless each arm has at least `min_per_arm` units.
  void require_arms(Index min_per_arm) const;

 private:
  Matrix x_;
  Eigen::VectorXi t_;
  Vector y_;
  Index n_treated_ = 0;
};

// R1 = {i : y_i <= mean(y)}, R2 = complement. Sorted ascending.
struct SplitIndices {
  std::vector<Index> r1;
  std::vector<Index> r2;
};

struct CenteredOutcome {
  Vector centered;
  double mean = 0.0;
};

CenteredOutcome center_outcome(const Vector& y);

// Ties at the mean go to R1. Throws kDegeneratePartition when R2 is empty.
SplitIndices partition_by_mean(const Vector& y);

// Checks disjoint, complementary, both nonempty over {0..n-1}.
void validate_split(const SplitIndices& split, Index n);

Matrix select_rows(const Matrix& x, std::span<const Index> rows);
Vector select_rows(const Vector& v, std::span<const Index> rows);

bool all_finite(const Matrix& x);
bool all_finite(const Vector& v);

double mean(const Vector& v);
// Population variance (divisor n).
double variance(const Vector& v);
// Sample standard deviation (divisor n-1); 0 for n < 2.
double sample_sd(const Vector& v);

}  // namespace umlr
