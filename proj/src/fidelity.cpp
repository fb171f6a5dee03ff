#include "intattn/fidelity.hpp"

#include <algorithm>
#include <cmath>

namespace intattn {

FidelityReport compare(const RealMatrix& a, const RealMatrix& b_ref) {
  require_same_shape(a.rows(), a.cols(), b_ref.rows(), b_ref.cols(), "compare");

  double cos_total = 0.0;
  double abs_diff = 0.0;
  double abs_ref = 0.0;
  double sq_diff = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto x = a.row(i);
    const auto y = b_ref.row(i);
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double u = x[j];
      const double v = y[j];
      dot += u * v;
      nx += u * u;
      ny += v * v;
      abs_diff += std::fabs(u - v);
      abs_ref += std::fabs(v);
      sq_diff += (u - v) * (u - v);
    }
    if (nx == 0.0 || ny == 0.0) {
      cos_total += (nx == 0.0 && ny == 0.0) ? 1.0 : 0.0;
    } else {
      cos_total += std::clamp(dot / std::sqrt(nx * ny), -1.0, 1.0);
    }
  }
  if (abs_ref == 0.0) {
    throw Error(Errc::kDomain, "compare: reference is all zero");
  }
  return {cos_total / static_cast<double>(a.rows()), abs_diff / abs_ref,
          std::sqrt(sq_diff / static_cast<double>(a.size()))};
}

}  // namespace intattn
