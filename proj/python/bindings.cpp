// Python bindings for the main operations: quantizers, the three bitlinear
// forwards, packing kernels, metrics, the BPE tokenizer and the layer census.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bitseq/bitlinear.hpp"
#include "bitseq/bpe.hpp"
#include "bitseq/deploy.hpp"
#include "bitseq/metrics.hpp"
#include "bitseq/model.hpp"
#include "bitseq/quant.hpp"
#include "bitseq/trajtext.hpp"

namespace py = pybind11;
using namespace bitseq;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_array(const FloatArray& a) {
  std::vector<int> shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape.push_back(static_cast<int>(a.shape(i)));
  std::vector<float> data(a.data(), a.data() + a.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<float> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.vec().begin(), t.vec().end(), out.mutable_data());
  return out;
}

std::vector<Point> points_from_array(const FloatArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 2)
    throw py::value_error("trajectory must have shape (T, 2)");
  std::vector<Point> pts;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) pts.push_back({a.at(i, 0), a.at(i, 1)});
  return pts;
}

QuantMode mode_from_name(const std::string& name) {
  auto m = quant_mode_from_string(name);
  if (!m) throw py::value_error("unknown quant mode '" + name + "' (none|both|activ|weight)");
  return *m;
}

}  // namespace

PYBIND11_MODULE(_bitseq, m) {
  m.doc() = "selective ternary/int8 quantization kernels for a seq2seq trajectory predictor";

  m.def("round_clamp", [](FloatArray z, int lo, int hi) {
    return array_from_tensor(round_clamp(tensor_from_array(z), QuantRange{lo, hi}));
  }, py::arg("z"), py::arg("lo") = -128, py::arg("hi") = 127,
     "Round half away from zero, then clamp into [lo, hi].");

  m.def("absmax_scale", [](FloatArray x, float eps) {
    return absmax_scale(tensor_from_array(x), QuantRange::int8(), eps);
  }, py::arg("x"), py::arg("eps") = kQuantEps, "127 / (max|x| + eps)");

  m.def("absmean_scale", [](FloatArray w, float eps) {
    return absmean_scale(tensor_from_array(w), eps);
  }, py::arg("w"), py::arg("eps") = kQuantEps, "1 / (mean|w| + eps)");

  m.def("quantize_activations_int8", [](FloatArray x, float eps) {
    auto [codes, gamma] = quantize_activations_int8(tensor_from_array(x), eps);
    return py::make_tuple(array_from_tensor(codes), gamma);
  }, py::arg("x"), py::arg("eps") = kQuantEps, "Returns (codes in [-128, 127], gamma).");

  m.def("quantize_weights_ternary", [](FloatArray w, float eps) {
    auto [codes, beta] = quantize_weights_ternary(tensor_from_array(w), eps);
    return py::make_tuple(array_from_tensor(codes), beta);
  }, py::arg("w"), py::arg("eps") = kQuantEps, "Returns (codes in {-1, 0, 1}, beta).");

  m.def("int8_vectorwise_matmul", [](FloatArray x, FloatArray w, float alpha) {
    return array_from_tensor(
        int8_vectorwise_matmul(tensor_from_array(x), tensor_from_array(w), alpha));
  }, py::arg("x"), py::arg("w"), py::arg("alpha") = 6.0f,
     "Row/column-scaled INT8 product with outlier columns in full precision.");

  m.def("nf4_codebook", [] {
    NF4Codebook cb = nf4_build_codebook();
    return std::vector<float>(cb.levels.begin(), cb.levels.end());
  }, "16 normal-quantile levels, unit max.");

  m.def("nf4_quantize", [](FloatArray w, int block_size) {
    NF4Quantized q = nf4_quantize(tensor_from_array(w), block_size);
    return py::make_tuple(py::bytes(reinterpret_cast<const char*>(q.codes.data()), q.codes.size()),
                          q.absmax, q.block_size);
  }, py::arg("w"), py::arg("block_size") = 64);

  m.def("bitlinear_forward",
        [](FloatArray x, FloatArray w, std::optional<FloatArray> bias, const std::string& mode,
           float eps, const std::string& bias_policy) {
          auto wp = make_param("w", tensor_from_array(w));
          ParamPtr bp;
          if (bias) bp = make_param("b", tensor_from_array(*bias));
          BitLinear layer(wp, bp, mode_from_name(mode));
          layer.eps = eps;
          if (bias_policy == "post_dequant") layer.bias_policy = BiasPolicy::PostDequant;
          else if (bias_policy != "literal") throw py::value_error("bias_policy: literal|post_dequant");
          return array_from_tensor(layer.forward(nullptr, tensor_from_array(x)));
        },
        py::arg("x"), py::arg("w"), py::arg("bias") = py::none(), py::arg("mode") = "weight",
        py::arg("eps") = kQuantEps, py::arg("bias_policy") = "literal",
        "One quantized linear forward: y = dequant(quant(x-side) . quant(W)^T + b).");

  m.def("pack_ternary",
        [](FloatArray codes, const std::string& encoding, float scale) {
          const TernaryEncoding enc = encoding == "base243" ? TernaryEncoding::Base243
                                                            : TernaryEncoding::TwoBit;
          PackedTernaryMatrix p = pack_ternary(tensor_from_array(codes), enc, scale);
          return py::make_tuple(
              py::bytes(reinterpret_cast<const char*>(p.payload.data()), p.payload.size()),
              p.rows, p.cols, p.scale);
        },
        py::arg("codes"), py::arg("encoding") = "two_bit", py::arg("scale") = 1.0f);

  m.def("unpack_ternary",
        [](py::bytes payload, int rows, int cols, const std::string& encoding) {
          PackedTernaryMatrix p;
          p.rows = rows;
          p.cols = cols;
          p.encoding = encoding == "base243" ? TernaryEncoding::Base243 : TernaryEncoding::TwoBit;
          const std::string buf = payload;
          p.payload.assign(buf.begin(), buf.end());
          return array_from_tensor(unpack_ternary(p));
        },
        py::arg("payload"), py::arg("rows"), py::arg("cols"), py::arg("encoding") = "two_bit");

  m.def("packed_matvec",
        [](py::bytes payload, int rows, int cols, const std::string& encoding, float scale,
           std::vector<float> x) {
          PackedTernaryMatrix p;
          p.rows = rows;
          p.cols = cols;
          p.encoding = encoding == "base243" ? TernaryEncoding::Base243 : TernaryEncoding::TwoBit;
          p.scale = scale;
          const std::string buf = payload;
          p.payload.assign(buf.begin(), buf.end());
          return packed_matvec(p, x, nullptr);
        },
        py::arg("payload"), py::arg("rows"), py::arg("cols"), py::arg("encoding"),
        py::arg("scale"), py::arg("x"));

  m.def("min_ade", [](std::vector<FloatArray> samples, FloatArray gt) {
    PredictionSet p;
    p.gt = points_from_array(gt);
    for (const auto& s : samples) p.samples.push_back(points_from_array(s));
    return min_ade(p);
  }, py::arg("samples"), py::arg("gt"));

  m.def("min_fde", [](std::vector<FloatArray> samples, FloatArray gt) {
    PredictionSet p;
    p.gt = points_from_array(gt);
    for (const auto& s : samples) p.samples.push_back(points_from_array(s));
    return min_fde(p);
  }, py::arg("samples"), py::arg("gt"));

  m.def("count_replacement_sites",
        [](int n_encoder, int n_decoder, int d_model, int d_ff, int heads) {
          ModelConfig cfg{n_encoder, n_decoder, d_model, d_ff, heads, 8, 8, true};
          Seq2SeqModel model = Seq2SeqModel::build(cfg, QuantMode::Weight, 0);
          LayerTree tree = model.layer_tree();
          SiteCensus census = count_replacement_sites(tree);
          return py::make_tuple(census.encoder, census.decoder, census.head, census.total);
        },
        py::arg("n_encoder") = 6, py::arg("n_decoder") = 6, py::arg("d_model") = 512,
        py::arg("d_ff") = 2048, py::arg("heads") = 8,
        "Linear-site census as (encoder, decoder, head, total).");

  py::class_<BpeVocab>(m, "BpeVocab")
      .def_property_readonly("size", &BpeVocab::size)
      .def_property_readonly("n_merges", [](const BpeVocab& v) { return v.merges.size(); });

  m.def("train_bpe", &train_bpe, py::arg("corpus"), py::arg("vocab_size"));
  m.def("bpe_encode", &bpe_encode, py::arg("vocab"), py::arg("text"));
  m.def("bpe_decode", &bpe_decode, py::arg("vocab"), py::arg("ids"));

  m.def("parse_answer", [](const std::string& text, std::size_t max_pairs) -> py::object {
    auto parsed = parse_answer(text, max_pairs);
    if (auto* pts = std::get_if<std::vector<Point>>(&parsed)) {
      py::array_t<float> out({static_cast<py::ssize_t>(pts->size()), static_cast<py::ssize_t>(2)});
      for (size_t i = 0; i < pts->size(); ++i) {
        out.mutable_at(static_cast<py::ssize_t>(i), 0) = (*pts)[i].x;
        out.mutable_at(static_cast<py::ssize_t>(i), 1) = (*pts)[i].y;
      }
      return out;
    }
    const auto& f = std::get<DecodeFailure>(parsed);
    return py::make_tuple(std::string("decode_failure"), std::string(to_string(f.reason)));
  }, py::arg("text"), py::arg("max_pairs") = 256,
     "Pairs as an (N, 2) array, or ('decode_failure', reason).");
}
