// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "attnkit/cka.hpp"
#include "attnkit/curation.hpp"
#include "attnkit/distill.hpp"
#include "attnkit/image.hpp"
#include "attnkit/nmi.hpp"

namespace py = pybind11;
using namespace attnkit;

namespace {

ArrayD matrix_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw NumericError("expected a 2-D array");
  ArrayD out = ArrayD::zeros({static_cast<size_t>(a.shape(0)), static_cast<size_t>(a.shape(1))});
  std::memcpy(out.data.data(), a.data(), sizeof(double) * out.numel());
  return out;
}

std::vector<ArrayD> heads_from_numpy(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw NumericError("expected a 3-D array [heads, N, N]");
  const size_t m = a.shape(0), n = a.shape(1);
  if (static_cast<size_t>(a.shape(2)) != n) throw NumericError("head matrices must be square");
  std::vector<ArrayD> heads;
  for (size_t h = 0; h < m; ++h) {
    ArrayD head = ArrayD::zeros({n, n});
    std::memcpy(head.data.data(), a.data() + h * n * n, sizeof(double) * n * n);
    heads.push_back(std::move(head));
  }
  return heads;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "attention-pattern metrics, distillation losses, and curation primitives";

  py::register_exception<CodecError>(m, "CodecError");
  py::register_exception<NumericError>(m, "NumericError");

  m.def(
      "nmi_head",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, double tol) {
        return nmi_head(matrix_from_numpy(a), tol);
      },
      py::arg("attention"), py::arg("tol") = 1e-6,
      "Normalized mutual information of one row-stochastic attention matrix.");

  m.def(
      "nmi_layer",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& heads,
         double tol) { return nmi_layer(heads_from_numpy(heads), tol); },
      py::arg("heads"), py::arg("tol") = 1e-6,
      "Mean NMI over the heads of one layer; input is [heads, N, N].");

  m.def(
      "attention_entropy",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, double tol) {
        return attention_entropy(matrix_from_numpy(a), tol);
      },
      py::arg("attention"), py::arg("tol") = 1e-6, "Mean row entropy in nats.");

  m.def(
      "attention_distance",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, size_t grid_h,
         size_t grid_w, double tol) {
        return attention_distance(matrix_from_numpy(a), grid_h, grid_w, tol);
      },
      py::arg("attention"), py::arg("grid_h"), py::arg("grid_w"), py::arg("tol") = 1e-6,
      "Mean attended distance in token-grid units.");

  m.def(
      "classify_pattern",
      [](double nmi, double hybrid_low, double hybrid_high) {
        return pattern_name(classify_pattern(nmi, {hybrid_low, hybrid_high}));
      },
      py::arg("nmi"), py::arg("hybrid_low") = 0.06, py::arg("hybrid_high") = 0.12,
      "'local', 'hybrid', or 'global' for a layer-level NMI value.");

  m.def("select_target_layer", &select_target_layer, py::arg("per_layer_nmi"),
        py::arg("s") = 0.09, py::arg("restrict_to_latter_half") = true,
        "1-based layer whose NMI is closest to s.");

  m.def(
      "linear_cka",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& y) {
        return linear_cka(matrix_from_numpy(x), matrix_from_numpy(y)).value;
      },
      py::arg("x"), py::arg("y"),
      "Linear centered kernel alignment between two [n, D] feature matrices.");

  m.def(
      "attention_kl_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& teacher,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& student) {
        return attention_kl_loss(heads_from_numpy(teacher), heads_from_numpy(student));
      },
      py::arg("teacher"), py::arg("student"),
      "Head-averaged, row-averaged KL(teacher || student); inputs [heads, N, N].");

  m.def(
      "feature_cosine_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& teacher,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& student) {
        return feature_cosine_loss(matrix_from_numpy(teacher), matrix_from_numpy(student));
      },
      py::arg("teacher"), py::arg("student"),
      "Token-averaged (1 - cosine) between L2-normalized feature rows.");

  m.def(
      "greedy_dedup",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& vectors,
         double threshold) {
        EmbeddingSet e;
        e.vectors = matrix_from_numpy(vectors);
        return greedy_dedup(e, threshold);
      },
      py::arg("embeddings"), py::arg("threshold"),
      "Kept row indices after the streaming greedy near-duplicate filter.");

  m.def(
      "cross_similarity",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b,
         size_t pair_cap, uint64_t seed) {
        EmbeddingSet ea, eb;
        ea.vectors = matrix_from_numpy(a);
        eb.vectors = matrix_from_numpy(b);
        CrossSimilarity r = cross_similarity(ea, eb, pair_cap, seed);
        return py::make_tuple(r.mean_cosine, r.pairs_evaluated, r.exact);
      },
      py::arg("a"), py::arg("b"), py::arg("pair_cap") = 1000000, py::arg("seed") = 1234,
      "(mean_cosine, pairs_evaluated, exact) between two embedding sets.");

  m.def(
      "to_grayscale",
      [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& rgb) {
        if (rgb.ndim() != 3 || rgb.shape(2) != 3)
          throw NumericError("expected an [H, W, 3] uint8 array");
        Image img;
        img.height = rgb.shape(0);
        img.width = rgb.shape(1);
        img.channels = 3;
        img.pixels.assign(rgb.data(), rgb.data() + rgb.size());
        Image gray = to_grayscale(img);
        py::array_t<uint8_t> out({img.height, img.width, size_t(3)});
        std::memcpy(out.mutable_data(), gray.pixels.data(), gray.pixels.size());
        return out;
      },
      py::arg("rgb"), "Luma conversion replicated into three identical channels.");
}
