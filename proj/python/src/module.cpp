// Python bindings. Configs and results cross the boundary as JSON text; the
// package's __init__.py converts them to and from dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "maco/error.hpp"
#include "maco/exp/experiment.hpp"
#include "maco/isa/mpais.hpp"
#include "maco/mem/memory.hpp"
#include "maco/noc/mesh.hpp"
#include "maco/stats/stats.hpp"
#include "maco/tiling/tiling.hpp"
#include "maco/xlat/translation.hpp"

namespace py = pybind11;
using maco::exp::Json;

namespace {

Json counters_json(const maco::stats::PerfCounters& c) {
  return Json{{"node", c.node},
              {"tasks", c.tasks},
              {"exceptions", c.exceptions},
              {"flops_completed", c.flops_completed},
              {"active_mmae_cycles", c.active_cycles},
              {"efficiency", c.efficiency},
              {"gflops", c.gflops},
              {"mmae_busy_cycles", c.mmae_busy_cycles},
              {"dma_stall_translation", c.dma_stall_translation},
              {"dma_stall_memory", c.dma_stall_memory},
              {"l3_hits", c.l3_hits},
              {"l3_misses", c.l3_misses},
              {"tlb_misses", c.tlb_misses},
              {"ptw_count", c.ptw_count},
              {"matlb_prewalks", c.matlb_prewalks},
              {"noc_bytes", c.noc_bytes},
              {"cpu_busy_cycles", c.cpu_busy_cycles}};
}

std::string run(const std::string& config_json) {
  const auto cfg = maco::exp::parse_config(Json::parse(config_json));
  maco::exp::RunResult r;
  {
    py::gil_scoped_release release;
    r = maco::exp::run_experiment(cfg);
  }
  Json nodes = Json::array();
  for (const auto& n : r.stats.nodes) nodes.push_back(counters_json(n));
  std::ostringstream csv;
  maco::stats::emit_csv(r.stats, r.config_json, csv);
  return Json{{"nodes", nodes},
              {"all", counters_json(r.stats.global)},
              {"wall_ns", r.stats.wall_seconds * 1e9},
              {"checked", r.checked},
              {"gemms_checked", r.gemms_checked},
              {"mismatches", r.mismatches},
              {"first_mismatch", r.first_mismatch},
              {"config", Json::parse(r.config_json)},
              {"csv", csv.str()}}
      .dump();
}

std::string sweep(const std::string& base_json, const std::string& experiment, const std::vector<std::string>& axes,
                  const std::string& out_dir, unsigned jobs) {
  Json base = Json::object();
  std::vector<maco::exp::Axis> ax;
  if (!experiment.empty()) {
    const auto& e = maco::exp::find_experiment(experiment);
    base = e.base;
    ax = e.axes;
  }
  base.merge_patch(Json::parse(base_json));
  for (const auto& a : axes) ax.push_back(maco::exp::parse_axis(a));
  std::vector<maco::exp::SweepEntry> entries;
  {
    py::gil_scoped_release release;
    entries = maco::exp::run_sweep(base, ax, out_dir, jobs);
  }
  Json out = Json::array();
  for (const auto& e : entries) {
    out.push_back({{"index", e.index}, {"overrides", e.overrides}, {"csv", e.csv}, {"status", e.status},
                   {"error", e.error}, {"efficiency", e.efficiency}});
  }
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_maco, m) {
  m.doc() = "maco-sim core";

  auto& config_error = py::register_exception<maco::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<maco::ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
  py::register_exception<maco::isa::IsaError>(m, "IsaError", PyExc_ValueError);
  py::register_exception<maco::mem::LockCapacity>(m, "LockCapacity", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const nlohmann::json::exception& e) {
      py::set_error(py::module_::import("maco._maco").attr("ConfigError"), e.what());
    }
  });
  (void)config_error;

  m.def("default_config", [] { return maco::exp::default_json().dump(); });
  m.def("validate_config", [](const std::string& j) { return maco::exp::parse_config(Json::parse(j)).effective.dump(); });
  m.def("run", &run, py::arg("config_json"));
  m.def("sweep", &sweep, py::arg("base_json"), py::arg("experiment"), py::arg("axes"), py::arg("out_dir"),
        py::arg("jobs"));
  m.def("list_experiments", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : maco::exp::canned_experiments()) out.emplace_back(e.name, e.description);
    return out;
  });

  m.def("assemble", [](const std::string& src) {
    std::vector<std::uint32_t> words;
    for (const auto& st : maco::isa::assemble(src).statements) {
      if (const auto* in = std::get_if<maco::isa::Instruction>(&st)) words.push_back(maco::isa::encode(*in));
    }
    return words;
  });
  m.def("disassemble", [](std::uint32_t word) {
    maco::isa::Program p;
    p.statements.emplace_back(maco::isa::decode(word));
    auto s = maco::isa::print(p);
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
  });

  m.def("route_xy", [](std::uint32_t src, std::uint32_t dst) {
    if (src >= maco::kMaxNodes || dst >= maco::kMaxNodes) throw maco::ConfigError("node id outside the mesh");
    std::vector<std::uint32_t> out;
    for (const auto c : maco::noc::route_xy(maco::noc::coord_of(src), maco::noc::coord_of(dst))) {
      out.push_back(maco::noc::node_of(c));
    }
    return out;
  });

  m.def(
      "predict_page_heads",
      [](std::uint64_t base, std::uint32_t element_size, std::uint64_t columns, std::uint64_t r0, std::uint64_t c0,
         std::uint64_t rows, std::uint64_t cols, std::uint32_t page_bytes) {
        return maco::xlat::predict_page_heads({base, element_size, columns, r0, c0, rows, cols, page_bytes});
      },
      py::arg("base"), py::arg("element_size"), py::arg("columns"), py::arg("r0"), py::arg("c0"), py::arg("rows"),
      py::arg("cols"), py::arg("page_bytes") = 4096);

  m.def(
      "tile_candidates",
      [](std::uint32_t tr, std::uint32_t tc, std::uint32_t k_strip, const std::string& precision) {
        const auto p = maco::parse_precision(precision);
        if (!p) throw maco::ConfigError("unknown precision '" + precision + "'");
        std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
        for (const auto& c : maco::tiling::candidates(tr, tc, k_strip, *p)) out.emplace_back(c.ttr, c.ttc);
        return out;
      },
      py::arg("tr"), py::arg("tc"), py::arg("k_strip"), py::arg("precision") = "fp64");
}
