#pragma once

#include "intattn/matrix.hpp"

namespace intattn {

/// Error of a matrix against a reference.
///
/// cos_sim is the mean over rows of the per-row cosine similarity (a row
/// pair where both rows are zero counts as 1, one zero row as 0). rel_l1 is
/// sum|a - b| / sum|b| and rmse is over all elements. All accumulation is in
/// double precision.
struct FidelityReport {
  double cos_sim;
  double rel_l1;
  double rmse;
};

// Throws kDimensionMismatch on shape mismatch and kDomain when the reference
// is all zero.
FidelityReport compare(const RealMatrix& a, const RealMatrix& b_ref);

}  // namespace intattn
