#pragma once

#include "umlr/learners.hpp"

namespace umlr::gbt {

// Least-squares boosting with exact greedy depth-limited trees. Runs exactly
// params.n_trees rounds; a round whose tree cannot split adds a single leaf.
TreeEnsemble fit(const GbtParams& params, const Matrix& x, const Vector& y);

Vector predict(const TreeEnsemble& model, const Matrix& x);

}  // namespace umlr::gbt
