// SPDX-License-Identifier: Apache-2.0
#include "attnkit/nmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "attnkit/common.hpp"

namespace attnkit {

using nlohmann::json;

std::string pattern_name(AttentionPattern p) {
  switch (p) {
    case AttentionPattern::local: return "local";
    case AttentionPattern::hybrid: return "hybrid";
    case AttentionPattern::global: return "global";
  }
  throw NumericError("unreachable pattern");
}

void PatternThresholds::validate() const {
  if (!(0.0 < hybrid_low && hybrid_low < hybrid_high && hybrid_high < 1.0))
    throw NumericError("pattern thresholds must satisfy 0 < low < high < 1");
}

namespace {

// Rejects matrices that are not row-stochastic within tol. Renormalization is
// deliberately not offered; a bad row points at an upstream softmax bug.
void check_row_stochastic(const ArrayD& a, double tol) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw NumericError("attention matrix must be square");
  const size_t n = a.dim(0);
  for (size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
      double v = a.data[i * n + j];
      if (!std::isfinite(v) || v < -tol)
        throw NumericError("attention row " + std::to_string(i) + " has negative entries");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > tol)
      throw NumericError("attention row " + std::to_string(i) + " sums to " +
                         std::to_string(sum) + ", not 1");
  }
}

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

double nmi_head(const ArrayD& attention, double tol) {
  check_row_stochastic(attention, tol);
  const size_t n = attention.dim(0);
  if (n < 2) throw NumericError("nmi_head requires at least 2 tokens");

  std::vector<double> col_sum(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) col_sum[j] += attention.data[i * n + j];

  // I(Q;K) = sum_ij (A_ij / N) * log(N * A_ij / colsum_j)
  double mutual_info = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      double a = attention.data[i * n + j];
      if (a > 0.0) mutual_info += (a / n) * std::log(n * a / col_sum[j]);
    }

  double h_q = std::log(static_cast<double>(n));
  double h_k = 0.0;
  for (size_t j = 0; j < n; ++j) h_k -= xlogx(col_sum[j] / n);

  // All key mass on one column means every row is identical: the fully
  // collapsed case, NMI 0.
  if (h_k <= 0.0) return 0.0;

  // Clamp to [0, 1]; values within 1e-12 of an extreme collapse to it so the
  // identity and rows-all-equal cases come out exact for every N.
  double nmi = std::clamp(mutual_info / std::sqrt(h_q * h_k), 0.0, 1.0);
  if (nmi < 1e-12) return 0.0;
  if (nmi > 1.0 - 1e-12) return 1.0;
  return nmi;
}

double nmi_layer(const std::vector<ArrayD>& heads, double tol) {
  if (heads.empty()) throw NumericError("nmi_layer requires at least one head");
  double sum = 0.0;
  for (const auto& h : heads) sum += nmi_head(h, tol);
  return sum / static_cast<double>(heads.size());
}

std::vector<double> dataset_nmi(const std::vector<AttentionStack>& stacks, double tol) {
  if (stacks.empty()) throw NumericError("dataset_nmi requires at least one image");
  const size_t layers = stacks[0].layers;
  const size_t heads = stacks[0].heads;
  const size_t tokens = stacks[0].tokens;
  std::vector<double> acc(layers, 0.0);
  for (const auto& stack : stacks) {
    if (stack.layers != layers || stack.heads != heads || stack.tokens != tokens)
      throw NumericError("dataset_nmi: stacks must share (L, M, N)");
    for (size_t l = 0; l < layers; ++l) {
      std::vector<ArrayD> layer_heads;
      layer_heads.reserve(heads);
      for (size_t m = 0; m < heads; ++m) layer_heads.push_back(stack.head(l, m));
      acc[l] += nmi_layer(layer_heads, tol);
    }
  }
  for (double& v : acc) v /= static_cast<double>(stacks.size());
  return acc;
}

double attention_entropy(const ArrayD& attention, double tol) {
  check_row_stochastic(attention, tol);
  const size_t n = attention.dim(0);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double h = 0.0;
    for (size_t j = 0; j < n; ++j) h -= xlogx(attention.data[i * n + j]);
    total += h;
  }
  return total / static_cast<double>(n);
}

double attention_distance(const ArrayD& attention, size_t grid_h, size_t grid_w, double tol) {
  check_row_stochastic(attention, tol);
  const size_t n = attention.dim(0);
  if (n != grid_h * grid_w)
    throw NumericError("attention_distance: N (" + std::to_string(n) +
                       ") does not match grid " + std::to_string(grid_h) + "x" +
                       std::to_string(grid_w));
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double ri = static_cast<double>(i / grid_w);
    double ci = static_cast<double>(i % grid_w);
    for (size_t j = 0; j < n; ++j) {
      double rj = static_cast<double>(j / grid_w);
      double cj = static_cast<double>(j % grid_w);
      total += attention.data[i * n + j] * std::hypot(ri - rj, ci - cj);
    }
  }
  return total / static_cast<double>(n);
}

AttentionPattern classify_pattern(double nmi, const PatternThresholds& thresholds) {
  thresholds.validate();
  if (nmi < 0.0 || nmi > 1.0) throw NumericError("classify_pattern: nmi outside [0, 1]");
  if (nmi < thresholds.hybrid_low) return AttentionPattern::global;
  if (nmi <= thresholds.hybrid_high) return AttentionPattern::hybrid;
  return AttentionPattern::local;
}

size_t select_target_layer(const std::vector<double>& per_layer_nmi, double s,
                           bool restrict_to_latter_half) {
  const size_t layers = per_layer_nmi.size();
  if (layers < 2) throw NumericError("select_target_layer requires at least 2 layers");
  if (!(s > 0.0 && s < 1.0)) throw NumericError("select_target_layer: s must be in (0, 1)");
  size_t first = restrict_to_latter_half ? layers / 2 + 1 : 1;  // 1-based
  if (first > layers) throw NumericError("select_target_layer: empty candidate set");
  size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (size_t l = first; l <= layers; ++l) {
    if (!std::isfinite(per_layer_nmi[l - 1]))
      throw NumericError("select_target_layer: non-finite NMI at layer " + std::to_string(l));
    double score = -std::fabs(per_layer_nmi[l - 1] - s);
    if (score >= best_score) {  // >= so ties go to the deepest layer
      best_score = score;
      best = l;
    }
  }
  return best;
}

void NmiReport::validate() const {
  const size_t layers = per_layer_nmi.size();
  if (per_head_nmi.size() != layers || per_layer_entropy.size() != layers ||
      per_layer_distance.size() != layers || pattern.size() != layers ||
      delta_nmi.size() != layers)
    throw NumericError("NmiReport: inconsistent per-layer lengths");
  for (size_t l = 0; l < layers; ++l) {
    double head_mean = 0.0;
    for (double v : per_head_nmi[l]) head_mean += v;
    head_mean /= static_cast<double>(per_head_nmi[l].size());
    if (std::fabs(head_mean - per_layer_nmi[l]) > 1e-12)
      throw NumericError("NmiReport: per-layer NMI is not the head mean at layer " +
                         std::to_string(l + 1));
    if (std::fabs(delta_nmi[l] - (-std::fabs(per_layer_nmi[l] - s))) > 1e-12)
      throw NumericError("NmiReport: delta_nmi mismatch at layer " + std::to_string(l + 1));
  }
  if (target_layer < 1 || target_layer > layers)
    throw NumericError("NmiReport: target layer out of range");
}

NmiReport build_nmi_report(const std::vector<AttentionStack>& stacks, size_t grid_h,
                           size_t grid_w, double s, bool restrict_to_latter_half,
                           const PatternThresholds& thresholds) {
  if (stacks.empty()) throw NumericError("build_nmi_report requires at least one image");
  const size_t layers = stacks[0].layers;
  const size_t heads = stacks[0].heads;

  NmiReport report;
  report.s = s;
  report.per_head_nmi.assign(layers, std::vector<double>(heads, 0.0));
  report.per_layer_entropy.assign(layers, 0.0);
  report.per_layer_distance.assign(layers, 0.0);

  for (const auto& stack : stacks) {
    if (stack.layers != layers || stack.heads != heads || stack.tokens != stacks[0].tokens)
      throw NumericError("build_nmi_report: stacks must share (L, M, N)");
    for (size_t l = 0; l < layers; ++l)
      for (size_t m = 0; m < heads; ++m) {
        ArrayD a = stack.head(l, m);
        report.per_head_nmi[l][m] += nmi_head(a);
        report.per_layer_entropy[l] += attention_entropy(a);
        report.per_layer_distance[l] += attention_distance(a, grid_h, grid_w);
      }
  }
  const double n_images = static_cast<double>(stacks.size());
  report.per_layer_nmi.assign(layers, 0.0);
  for (size_t l = 0; l < layers; ++l) {
    for (size_t m = 0; m < heads; ++m) {
      report.per_head_nmi[l][m] /= n_images;
      report.per_layer_nmi[l] += report.per_head_nmi[l][m];
    }
    report.per_layer_nmi[l] /= static_cast<double>(heads);
    report.per_layer_entropy[l] /= n_images * static_cast<double>(heads);
    report.per_layer_distance[l] /= n_images * static_cast<double>(heads);
  }

  report.pattern.reserve(layers);
  report.delta_nmi.reserve(layers);
  for (size_t l = 0; l < layers; ++l) {
    report.pattern.push_back(classify_pattern(report.per_layer_nmi[l], thresholds));
    report.delta_nmi.push_back(-std::fabs(report.per_layer_nmi[l] - s));
  }
  // A single layer has nothing to select between.
  report.target_layer =
      layers == 1 ? 1 : select_target_layer(report.per_layer_nmi, s, restrict_to_latter_half);
  return report;
}

std::string serialize_nmi_report(const NmiReport& report) {
  report.validate();
  std::string out;
  for (size_t l = 0; l < report.per_layer_nmi.size(); ++l) {
    json j = {{"layer", l + 1},
              {"nmi", report.per_layer_nmi[l]},
              {"per_head_nmi", report.per_head_nmi[l]},
              {"entropy", report.per_layer_entropy[l]},
              {"distance", report.per_layer_distance[l]},
              {"pattern", pattern_name(report.pattern[l])},
              {"delta_nmi", report.delta_nmi[l]}};
    out += j.dump();
    out += '\n';
  }
  json summary = {{"s", report.s}, {"target_layer", report.target_layer}};
  out += summary.dump();
  out += '\n';
  return out;
}

NmiReport parse_nmi_report(const std::string& text) {
  NmiReport report;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  bool have_summary = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw CodecError("nmi report line " + std::to_string(line_no) + ": invalid JSON");
    if (j.contains("target_layer")) {
      report.s = j.value("s", 0.09);
      report.target_layer = j["target_layer"].get<size_t>();
      have_summary = true;
      continue;
    }
    report.per_layer_nmi.push_back(j.at("nmi").get<double>());
    report.per_head_nmi.push_back(j.at("per_head_nmi").get<std::vector<double>>());
    report.per_layer_entropy.push_back(j.at("entropy").get<double>());
    report.per_layer_distance.push_back(j.at("distance").get<double>());
    std::string p = j.at("pattern").get<std::string>();
    if (p == "local") report.pattern.push_back(AttentionPattern::local);
    else if (p == "hybrid") report.pattern.push_back(AttentionPattern::hybrid);
    else if (p == "global") report.pattern.push_back(AttentionPattern::global);
    else throw CodecError("nmi report line " + std::to_string(line_no) + ": bad pattern");
    report.delta_nmi.push_back(j.at("delta_nmi").get<double>());
  }
  if (!have_summary) throw CodecError("nmi report: missing summary line");
  report.validate();
  return report;
}

}  // namespace attnkit
