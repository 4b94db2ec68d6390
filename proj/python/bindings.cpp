// Python bindings: FSS keys, sharing, and the benchmark / experiment
// programs. Program results come back as JSON text; the package wraps them
// into dicts.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "programs.hpp"

#include "ariann/fss.hpp"
#include "ariann/sharing.hpp"

namespace py = pybind11;
using namespace ariann;
namespace pg = ariann::programs;

namespace {

pg::Settings settings(std::uint64_t seed, const std::string& transport, int n_bits, int precision, int fss_bits,
                      bool bundles) {
  pg::Settings st;
  st.seed = seed;
  st.transport = parse_transport(transport);
  st.fmt = FixedFormat{n_bits, precision, fss_bits};
  st.bundles = bundles;
  return st;
}

std::string dump(const pg::Records& r) {
  pg::json a = pg::json::array();
  for (const auto& x : r) a.push_back(x);
  return a.dump();
}

// Keys with a chosen alpha; returns both parties' evaluations on xs.
template <class Key, class Gen, class Eval>
std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>> eval_pair(Gen gen, Eval eval, int n_bits,
                                                                           int out_bits, std::uint64_t alpha,
                                                                           const std::vector<std::uint64_t>& xs,
                                                                           std::uint64_t seed) {
  if (alpha > ring_mask(n_bits)) throw py::value_error("alpha does not fit in n_bits");
  Rng rng(seed);
  KeygenTape tape = draw_tape(n_bits, rng);
  tape.alpha = alpha;
  const auto kp = gen(n_bits, out_bits, tape);
  std::vector<std::uint64_t> y0, y1;
  for (std::uint64_t x : xs) {
    if (x > ring_mask(n_bits)) throw py::value_error("x does not fit in n_bits");
    y0.push_back(eval(0, kp.k0, x));
    y1.push_back(eval(1, kp.k1, x));
  }
  return {y0, y1};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Function secret sharing and private neural network protocols";

  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

  m.def("cmp_key_bytes", &cmp_key_bytes, py::arg("n_bits"), py::arg("out_bits"));
  m.def("eq_key_bytes", &eq_key_bytes, py::arg("n_bits"), py::arg("out_bits"));
  m.def(
      "eval_cmp_pair",
      [](int n_bits, int out_bits, std::uint64_t alpha, const std::vector<std::uint64_t>& xs, std::uint64_t seed) {
        return eval_pair<CmpKey>(keygen_cmp_from_tape, eval_cmp, n_bits, out_bits, alpha, xs, seed);
      },
      py::arg("n_bits"), py::arg("out_bits"), py::arg("alpha"), py::arg("xs"), py::arg("seed") = 1,
      "Both parties' shares of 1[x <= alpha] for each x.");
  m.def(
      "eval_eq_pair",
      [](int n_bits, int out_bits, std::uint64_t alpha, const std::vector<std::uint64_t>& xs, std::uint64_t seed) {
        return eval_pair<EqKey>(keygen_eq_from_tape, eval_eq, n_bits, out_bits, alpha, xs, seed);
      },
      py::arg("n_bits"), py::arg("out_bits"), py::arg("alpha"), py::arg("xs"), py::arg("seed") = 1,
      "Both parties' shares of 1[x == alpha] for each x.");

  m.def(
      "share",
      [](const std::vector<double>& values, int precision, int n_bits, std::uint64_t seed) {
        Rng rng(seed);
        const auto t = encode_fixed(values, {values.size()}, precision, n_bits);
        auto [a, b] = share(t, rng, precision);
        const auto da = a.values().data(), db = b.values().data();
        return std::make_pair(std::vector<std::uint64_t>(da.begin(), da.end()),
                              std::vector<std::uint64_t>(db.begin(), db.end()));
      },
      py::arg("values"), py::arg("precision") = 3, py::arg("n_bits") = 64, py::arg("seed") = 1);
  m.def(
      "reconstruct",
      [](const std::vector<std::uint64_t>& s0, const std::vector<std::uint64_t>& s1, int precision, int n_bits) {
        if (s0.size() != s1.size()) throw py::value_error("share lengths differ");
        std::vector<std::uint64_t> sum(s0.size());
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = (s0[i] + s1[i]) & ring_mask(n_bits);
        const Shape shape{sum.size()};
        return decode_fixed(RingTensor(shape, n_bits, std::move(sum)), precision);
      },
      py::arg("s0"), py::arg("s1"), py::arg("precision") = 3, py::arg("n_bits") = 64);

  m.def("op_names", &pg::op_names);
  m.def("expected_rounds", &pg::expected_rounds, py::arg("op"));
  m.def(
      "bench",
      [](const std::string& op, std::size_t batch, std::uint64_t seed, const std::string& transport, int n_bits,
         int precision, int fss_bits, bool bundles) {
        py::gil_scoped_release nogil;
        return pg::bench_op(op, batch, settings(seed, transport, n_bits, precision, fss_bits, bundles)).dump();
      },
      py::arg("op"), py::arg("batch"), py::arg("seed") = 1, py::arg("transport") = "local", py::arg("n_bits") = 64,
      py::arg("precision") = 3, py::arg("fss_bits") = kDefaultFssBits, py::arg("bundles") = false);
  m.def(
      "compare_exhaustive",
      [](int n_bits) {
        py::gil_scoped_release nogil;
        return pg::compare_exhaustive(n_bits).dump();
      },
      py::arg("n_bits"));
  m.def(
      "infer",
      [](const std::string& task, std::size_t samples, std::uint64_t seed) {
        py::gil_scoped_release nogil;
        return pg::infer_demo(task, samples, settings(seed, "local", 64, 3, kDefaultFssBits, false)).dump();
      },
      py::arg("task") = "moons", py::arg("samples") = 1000, py::arg("seed") = 1);
  m.def(
      "train",
      [](const std::string& task, std::optional<std::size_t> epochs, std::uint64_t seed) {
        py::gil_scoped_release nogil;
        return pg::train_demo(task, epochs, settings(seed, "local", 64, 3, kDefaultFssBits, false)).dump();
      },
      py::arg("task") = "xor", py::arg("epochs") = py::none(), py::arg("seed") = 1);
  m.def(
      "precision_sweep",
      [](const std::vector<int>& fss_bits, const std::vector<int>& precisions, std::uint64_t seed) {
        py::gil_scoped_release nogil;
        return dump(pg::precision_sweep("toy-mlp", fss_bits, precisions,
                                        settings(seed, "local", 64, 3, kDefaultFssBits, false)));
      },
      py::arg("fss_bits"), py::arg("precisions") = std::vector<int>{3}, py::arg("seed") = 1);
  m.def(
      "fl_demo",
      [](std::size_t clients, std::size_t k, std::size_t rounds, std::uint64_t seed) {
        py::gil_scoped_release nogil;
        return dump(pg::fl_demo(clients, k, rounds, settings(seed, "local", 64, 3, kDefaultFssBits, false)));
      },
      py::arg("clients") = 2, py::arg("k") = 1, py::arg("rounds") = 2, py::arg("seed") = 1);
  m.def(
      "fl_mask_sweep",
      [](std::size_t max_n) {
        py::gil_scoped_release nogil;
        return pg::fl_mask_sweep(max_n).dump();
      },
      py::arg("max_clients") = 8);
}
