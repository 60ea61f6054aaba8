#include "umlr/core.hpp"

#include <cmath>
#include <sstream>

namespace umlr {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "INVALID_INPUT";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kDegeneratePartition: return "DEGENERATE_PARTITION";
    case ErrorCode::kSingularSystem: return "SINGULAR_SYSTEM";
    case ErrorCode::kRecalibrationSingular: return "RECALIBRATION_SINGULAR";
    case ErrorCode::kUndefinedSlope: return "UNDEFINED_SLOPE";
    case ErrorCode::kUnavailable: return "UNAVAILABLE";
    case ErrorCode::kNonConvergence: return "NON_CONVERGENCE";
    case ErrorCode::kDivisionGuard: return "DIVISION_GUARD";
    case ErrorCode::kResampling: return "RESAMPLING";
    case ErrorCode::kArmTooSmall: return "ARM_TOO_SMALL";
    case ErrorCode::kNoMatches: return "NO_MATCHES";
    case ErrorCode::kUnstableBootstrap: return "UNSTABLE_BOOTSTRAP";
    case ErrorCode::kParse: return "PARSE_ERROR";
    case ErrorCode::kIo: return "IO_ERROR";
    case ErrorCode::kConfig: return "CONFIG_ERROR";
  }
  return "UNKNOWN";
}

Dataset::Dataset(Matrix x, Eigen::VectorXi t, Vector y)
    : x_(std::move(x)), t_(std::move(t)), y_(std::move(y)) {
  const Index n = y_.size();
  if (x_.rows() != n || t_.size() != n) {
    std::ostringstream os;
    os << "dataset dimension mismatch: X has " << x_.rows() << " rows, t has "
       << t_.size() << ", y has " << n;
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
  if (n < 2) throw Error(ErrorCode::kInvalidInput, "dataset needs n >= 2");
  if (x_.cols() < 1) throw Error(ErrorCode::kInvalidInput, "dataset needs p >= 1");
  if (!all_finite(x_) || !all_finite(y_)) {
    throw Error(ErrorCode::kInvalidInput, "dataset contains non-finite values");
  }
  for (Index i = 0; i < n; ++i) {
    if (t_[i] != 0 && t_[i] != 1) {
      std::ostringstream os;
      os << "treatment value " << t_[i] << " at row " << (i + 1) << " is not 0/1";
      throw Error(ErrorCode::kInvalidInput, os.str());
    }
    n_treated_ += t_[i];
  }
}

std::vector<Index> Dataset::arm_indices(int arm) const {
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(arm == 1 ? n_treated_ : n() - n_treated_));
  for (Index i = 0; i < n(); ++i) {
    if (t_[i] == arm) rows.push_back(i);
  }
  return rows;
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Eigen::VectorXi t(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) t[static_cast<Index>(k)] = t_[rows[k]];
  return Dataset(select_rows(x_, rows), std::move(t), select_rows(y_, rows));
}

void Dataset::require_arms(Index min_per_arm) const {
  if (n_treated_ < min_per_arm || n_control() < min_per_arm) {
    std::ostringstream os;
    os << "each arm needs at least " << min_per_arm << " units (treated "
       << n_treated_ << ", control " << n_control() << ")";
    throw Error(ErrorCode::kArmTooSmall, os.str());
  }
}

CenteredOutcome center_outcome(const Vector& y) {
  if (y.size() == 0) throw Error(ErrorCode::kInvalidInput, "center_outcome: empty vector");
  if (!all_finite(y)) throw Error(ErrorCode::kInvalidInput, "center_outcome: non-finite value");
  CenteredOutcome out;
  out.mean = mean(y);
  out.centered = y.array() - out.mean;
  return out;
}

SplitIndices partition_by_mean(const Vector& y) {
  if (y.size() == 0) throw Error(ErrorCode::kInvalidInput, "partition_by_mean: empty vector");
  if (!all_finite(y)) throw Error(ErrorCode::kInvalidInput, "partition_by_mean: non-finite value");
  const double cut = mean(y);
  SplitIndices split;
  for (Index i = 0; i < y.size(); ++i) {
    (y[i] <= cut ? split.r1 : split.r2).push_back(i);
  }
  if (split.r2.empty() || split.r1.empty()) {
    throw Error(ErrorCode::kDegeneratePartition,
                "partition_by_mean: outcome is constant, R2 is empty");
  }
  return split;
}

void validate_split(const SplitIndices& split, Index n) {
  if (split.r1.empty() || split.r2.empty()) {
    throw Error(ErrorCode::kDegeneratePartition, "split has an empty group");
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto* group : {&split.r1, &split.r2}) {
    for (Index i : *group) {
      if (i < 0 || i >= n) throw Error(ErrorCode::kInvalidInput, "split index out of range");
      if (seen[static_cast<std::size_t>(i)]++) {
        throw Error(ErrorCode::kInvalidInput, "split groups overlap");
      }
    }
  }
  if (static_cast<Index>(split.r1.size() + split.r2.size()) != n) {
    throw Error(ErrorCode::kInvalidInput, "split does not cover every unit");
  }
}

Matrix select_rows(const Matrix& x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = x.row(rows[k]);
  return out;
}

Vector select_rows(const Vector& v, std::span<const Index> rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Index>(k)] = v[rows[k]];
  return out;
}

bool all_finite(const Matrix& x) { return x.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

double mean(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.sum() / static_cast<double>(v.size());
}

double variance(const Vector& v) {
  if (v.size() == 0) return 0.0;
  const double m = mean(v);
  return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

double sample_sd(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace umlr
