// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_CKA_HPP
#define ATTNKIT_CKA_HPP

#include "attnkit/common.hpp"

namespace attnkit {

struct CkaResult {
  double value = 0.0;   // in [0, 1]
  size_t n_examples = 0;
  size_t dim_a = 0;
  size_t dim_b = 0;
};

/// Linear centered kernel alignment between two feature matrices that share
/// their example axis:
///
///   CKA = ||Yc^T Xc||_F^2 / (||Xc^T Xc||_F * ||Yc^T Yc||_F)
///
/// after column-centering X and Y. The feature-space form is the primary
/// path; the Gram-space form exists only as a test oracle. Invariant to
/// orthogonal transforms and isotropic scaling of either argument.
/// Requires n >= 3; throws NumericError when either input has zero variance.
CkaResult linear_cka(const ArrayD& x, const ArrayD& y);

/// L_a x L_b grid of linear CKA values between all layer pairs of two
/// feature collections (each entry an n x D matrix with shared n).
ArrayD cka_grid(const std::vector<ArrayD>& layers_a, const std::vector<ArrayD>& layers_b);

}  // namespace attnkit

#endif  // ATTNKIT_CKA_HPP
