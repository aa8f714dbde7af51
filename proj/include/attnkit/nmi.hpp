// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_NMI_HPP
#define ATTNKIT_NMI_HPP

#include <string>
#include <vector>

#include "attnkit/tensor.hpp"

namespace attnkit {

enum class AttentionPattern { local, hybrid, global };

std::string pattern_name(AttentionPattern p);

/// Layer-level pattern taxonomy band. NMI below the band reads as global
/// attention, inside it as hybrid, above it as local.
struct PatternThresholds {
  double hybrid_low = 0.06;
  double hybrid_high = 0.12;

  void validate() const;
};

/// Normalized mutual information of one row-stochastic attention matrix.
///
/// The matrix is read as a joint query–key probability table: queries are
/// uniform, p(q_i, k_j) = A[i, j] / N, and key marginals are column means.
/// NMI = I(Q; K) / sqrt(H(Q) * H(K)), with 0*log0 = 0 and the result clamped
/// to [0, 1]. Identity attention gives exactly 1, rows-all-equal gives 0.
/// Requires N >= 2 and rows summing to 1 within `tol`.
double nmi_head(const ArrayD& attention, double tol = 1e-6);

/// Mean of nmi_head over the heads of one layer.
double nmi_layer(const std::vector<ArrayD>& heads, double tol = 1e-6);

/// Per-layer NMI averaged over a set of images: nmi_layer is computed per
/// image, then averaged arithmetically across images.
std::vector<double> dataset_nmi(const std::vector<AttentionStack>& stacks, double tol = 1e-6);

/// Mean row entropy in nats. Identity rows give 0, uniform rows give ln N.
double attention_entropy(const ArrayD& attention, double tol = 1e-6);

/// Mean attended distance in token-grid units. Token i sits at
/// (i / grid_w, i % grid_w); the result averages A[i, j] * euclid(i, j) over
/// queries.
double attention_distance(const ArrayD& attention, size_t grid_h, size_t grid_w,
                          double tol = 1e-6);

AttentionPattern classify_pattern(double nmi, const PatternThresholds& thresholds = {});

/// Layer whose NMI is closest to the target value s (1-based index). When
/// `restrict_to_latter_half` is set, only layers floor(L/2)+1 .. L are
/// candidates. Ties break toward the deepest layer.
size_t select_target_layer(const std::vector<double>& per_layer_nmi, double s = 0.09,
                           bool restrict_to_latter_half = true);

/// Full analysis record for one model over an image set.
struct NmiReport {
  std::vector<double> per_layer_nmi;               // length L
  std::vector<std::vector<double>> per_head_nmi;   // [L][M]
  std::vector<double> per_layer_entropy;           // nats
  std::vector<double> per_layer_distance;          // token-grid units
  std::vector<AttentionPattern> pattern;           // length L
  double s = 0.09;
  std::vector<double> delta_nmi;                   // -|nmi - s|, length L
  size_t target_layer = 0;                         // 1-based

  void validate() const;
};

/// Builds the report from per-image attention stacks. Entropy and distance
/// are averaged over heads and images; the distance grid must satisfy
/// N == grid_h * grid_w.
NmiReport build_nmi_report(const std::vector<AttentionStack>& stacks, size_t grid_h,
                           size_t grid_w, double s = 0.09, bool restrict_to_latter_half = true,
                           const PatternThresholds& thresholds = {});

/// One JSON object per layer followed by a summary object; newline separated.
std::string serialize_nmi_report(const NmiReport& report);
NmiReport parse_nmi_report(const std::string& text);

}  // namespace attnkit

#endif  // ATTNKIT_NMI_HPP
