#include "cli.hpp"

#include "amar/benchmark.hpp"
#include "amar/evaluation.hpp"
#include "amar/graph.hpp"
#include "amar/ingestion.hpp"
#include "amar/retrieval.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;

namespace {

py::tuple run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
        py::gil_scoped_release release;
        code = amar::cli::run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

std::vector<std::pair<std::size_t, std::size_t>> chunk_spans(std::size_t n_tokens, std::size_t window,
                                                             std::size_t overlap) {
    std::string doc;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        if (i) doc += ' ';
        doc += 't' + std::to_string(i);
    }
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (const auto& c : amar::chunk_document("doc", doc, {window, overlap})) spans.emplace_back(c.start_token, c.token_count);
    return spans;
}

std::string dataset_stats_json(const std::string& path) {
    return amar::to_json(amar::compute_stats(amar::load_dataset(path))).dump();
}

}  // namespace

PYBIND11_MODULE(_amar, m) {
    m.doc() = "A-MAR engine bindings";

    py::register_exception<amar::Error>(m, "AmarError", PyExc_RuntimeError);

    m.def("run_cli", &run_cli, py::arg("args"), "Run a CLI command line; returns (exit_code, stdout, stderr)");
    m.def("bleu_n", &amar::bleu_n, py::arg("candidate"), py::arg("references"), py::arg("n"));
    m.def("rouge_l", &amar::rouge_l, py::arg("candidate"), py::arg("reference"));
    m.def("name_similarity", &amar::name_similarity, py::arg("a"), py::arg("b"));
    m.def(
        "softmax_normalize", [](const std::vector<double>& s) { return amar::softmax_normalize(s); }, py::arg("scores"));
    m.def("fuse", &amar::fuse, py::arg("s_sem_norm"), py::arg("s_str_norm"), py::arg("lam"));
    m.def("chunk_spans", &chunk_spans, py::arg("n_tokens"), py::arg("window") = 1000, py::arg("overlap") = 100,
          "(start_token, token_count) per chunk of an n-token document");
    m.def("dataset_stats_json", &dataset_stats_json, py::arg("path"));
}
