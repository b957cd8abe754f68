#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xbar/cache_manager.hpp"
#include "xbar/compute_crossbar.hpp"
#include "xbar/cost_model.hpp"
#include "xbar/decomposer.hpp"
#include "xbar/dense_crossbar.hpp"
#include "xbar/encoding.hpp"
#include "xbar/error.hpp"
#include "xbar/model_ir.hpp"
#include "xbar/toml_lite.hpp"

namespace fs = std::filesystem;
using namespace xbar;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = ".";
  bool emit_layout = false;
  bool emit_cache_plan = false;
  bool json_errors = false;
};

std::string sidecar(const std::string& data_path) { return data_path + ".json"; }

std::string out_path(const GlobalOpts& g, const std::string& name) {
  return (fs::path(g.out_dir) / name).string();
}

CrossbarConfig crossbar_from_toml(const TomlDoc& d) {
  CrossbarConfig c;
  const std::string s = "crossbar";
  c.rows = static_cast<int>(d.integer(s, "rows", c.rows));
  c.cols = static_cast<int>(d.integer(s, "cols", c.cols));
  c.dup_factor = static_cast<int>(d.integer(s, "dup_factor", c.dup_factor));
  c.scale_factor = static_cast<int>(d.integer(s, "scale_factor", c.scale_factor));
  c.adc_bits = static_cast<int>(d.integer(s, "adc_bits", c.adc_bits));
  c.dac_bits = static_cast<int>(d.integer(s, "dac_bits", c.dac_bits));
  c.noise_fraction = d.number(s, "noise_fraction", c.noise_fraction);
  c.activation_bits = static_cast<int>(d.integer(s, "activation_bits", c.activation_bits));
  c.weight_bits = static_cast<int>(d.integer(s, "weight_bits", c.weight_bits));
  c.exp_bits = static_cast<int>(d.integer(s, "exp_bits", c.exp_bits));
  c.register_bits = static_cast<int>(d.integer(s, "register_bits", c.register_bits));
  c.registers_per_column =
      static_cast<int>(d.integer(s, "registers_per_column", c.registers_per_column));
  return c;
}

DenseConfig dense_from_toml(const TomlDoc& d) {
  DenseConfig c;
  const std::string s = "dense";
  c.rows = static_cast<int>(d.integer(s, "rows", c.rows));
  c.cols = static_cast<int64_t>(d.integer(s, "cols", c.cols));
  c.bits_per_cell = static_cast<int>(d.integer(s, "bits_per_cell", c.bits_per_cell));
  c.n_banks = static_cast<int>(d.integer(s, "n_banks", c.n_banks));
  c.read_noise = d.number(s, "read_noise", c.read_noise);
  return c;
}

struct CacheSettings {
  int c_k = 0;  // 0: one chunk per head (c_k = head width)
  int element_bits = 8;
  bool maximum = false;
};

CacheSettings cache_from_toml(const TomlDoc& d) {
  CacheSettings s;
  s.c_k = static_cast<int>(d.integer("cache", "c_k", s.c_k));
  s.element_bits = static_cast<int>(d.integer("cache", "element_bits", s.element_bits));
  std::string sizing = d.text("cache", "sizing", "typical");
  if (sizing != "typical" && sizing != "maximum")
    throw Error(errc::config, "cache.sizing must be \"typical\" or \"maximum\"");
  s.maximum = sizing == "maximum";
  return s;
}

CacheConfig cache_config_for(const LayerSpec& spec, const CacheSettings& s) {
  int ck = s.c_k > 0 ? s.c_k : (spec.has_attention ? spec.head_width : spec.hidden);
  ck = std::min(ck, spec.hidden);
  return s.maximum ? CacheConfig::maximum(spec.n_tokens, spec.hidden, ck, s.element_bits)
                   : CacheConfig::typical(spec.n_tokens, spec.hidden, ck, s.element_bits);
}

TomlDoc load_config(const GlobalOpts& g) {
  if (g.config_path.empty()) return TomlDoc::parse("", "<defaults>");
  return TomlDoc::parse_file(g.config_path);
}

int cmd_decompose(const GlobalOpts& g, const std::string& model_path,
                  const std::string& out) {
  LoadedLayer layer = load_layer(model_path, sidecar(model_path));
  LayerProgram prog = build_layer_program(layer.spec);
  std::string path = out.empty() ? out_path(g, "program.json") : out;
  atomic_write_file(path, program_to_json(prog));
  std::cout << "wrote " << path << " (" << prog.subops.size() << " sub-ops)\n";
  return 0;
}

int cmd_simulate(const GlobalOpts& g, const std::string& model_path,
                 const std::string& input_path, uint64_t seed, double noise_override,
                 int dc_override) {
  TomlDoc conf = load_config(g);
  CrossbarConfig cfg = crossbar_from_toml(conf);
  DenseConfig dense_cfg = dense_from_toml(conf);
  CacheSettings cache_set = cache_from_toml(conf);
  if (noise_override >= 0.0) cfg.noise_fraction = noise_override;
  if (dc_override > 0) cfg.dup_factor = dc_override;

  LoadedLayer layer = load_layer(model_path, sidecar(model_path));
  MatD input = load_matrix(input_path, sidecar(input_path));

  // residency checks run whether or not the plan is dumped
  CacheConfig cache_cfg = cache_config_for(layer.spec, cache_set);
  CachePlan ff_plan = plan_ff(layer.spec, cache_cfg);
  CachePlan mha_plan;
  if (layer.spec.has_attention)
    mha_plan = plan_mha(layer.spec, cache_cfg, cfg.dup_factor);

  Simulator sim(layer.spec, layer.weights, cfg, dense_cfg);
  SimResult res = sim.run(input, seed);

  std::string out_bin = out_path(g, "output.bin");
  save_matrix(out_bin, sidecar(out_bin), res.output);
  std::string trace_path = out_path(g, "trace.json");
  atomic_write_file(trace_path, trace_to_json(res.trace, cfg));
  std::cout << "wrote " << out_bin << "\n";
  std::cout << "wrote " << trace_path << " (steps=" << res.trace.steps << ")\n";

  if (g.emit_layout) {
    std::string p = out_path(g, "layout.json");
    atomic_write_file(p, sim.layout().to_json(dense_cfg));
    std::cout << "wrote " << p << "\n";
  }
  if (g.emit_cache_plan) {
    nlohmann::ordered_json j;
    if (layer.spec.has_attention)
      j["mha"] = nlohmann::ordered_json::parse(plan_to_json(mha_plan, cache_cfg));
    j["ff"] = nlohmann::ordered_json::parse(plan_to_json(ff_plan, cache_cfg));
    std::string p = out_path(g, "cache_plan.json");
    atomic_write_file(p, j.dump(2) + "\n");
    std::cout << "wrote " << p << "\n";
  }
  return 0;
}

int cmd_cost(const GlobalOpts& g, const std::vector<std::string>& trace_paths,
             const std::string& costs_path, const std::string& out,
             const std::string& csv_out, const std::string& sweep_params, int sweep_bits) {
  TomlDoc conf = load_config(g);
  DenseConfig dense_cfg = dense_from_toml(conf);
  ComponentCosts costs =
      costs_path.empty() ? ComponentCosts::defaults() : ComponentCosts::from_toml(
                                                            TomlDoc::parse_file(costs_path));

  if (!sweep_params.empty()) {
    std::vector<uint64_t> params;
    std::string tok;
    for (char ch : sweep_params + ",") {
      if (ch == ',') {
        if (!tok.empty()) params.push_back(std::stoull(tok));
        tok.clear();
      } else if (!std::isspace(static_cast<unsigned char>(ch))) {
        tok += ch;
      }
    }
    if (params.empty()) throw Error(errc::config, "--sweep needs a comma-separated list");
    CrossbarConfig cfg = crossbar_from_toml(conf);
    std::string csv = scaling_sweep_csv(params, costs, cfg, dense_cfg, sweep_bits);
    std::string p = csv_out.empty() ? out_path(g, "scaling.csv") : csv_out;
    atomic_write_file(p, csv);
    std::cout << "wrote " << p << "\n";
    return 0;
  }

  if (trace_paths.empty())
    throw Error(errc::config, "cost needs at least one --trace (or --sweep)");
  std::vector<LayerTrace> traces;
  CrossbarConfig cfg;  // echoed from the first trace
  for (size_t i = 0; i < trace_paths.size(); ++i) {
    std::ifstream in(trace_paths[i], std::ios::binary);
    if (!in) throw Error(errc::config, "cannot open trace '" + trace_paths[i] + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    traces.push_back(trace_from_json(ss.str(), i == 0 ? &cfg : nullptr));
  }

  CostReport rep = cost_from_trace(traces, cfg, dense_cfg, nullptr, costs);
  std::string p = out.empty() ? out_path(g, "cost_report.json") : out;
  atomic_write_file(p, report_to_json(rep));
  std::cout << "wrote " << p << "\n";

  if (!csv_out.empty()) {
    std::string csv = "component,area_mm2,energy_mj\n";
    char line[160];
    for (const auto& [k, v] : rep.area_breakdown_mm2) {
      double e = rep.energy_breakdown_mj.count(k) ? rep.energy_breakdown_mj.at(k) : 0.0;
      std::snprintf(line, sizeof line, "%s,%.9g,%.9g\n", k.c_str(), v, e);
      csv += line;
    }
    for (const auto& [k, v] : rep.energy_breakdown_mj)
      if (!rep.area_breakdown_mm2.count(k)) {
        std::snprintf(line, sizeof line, "%s,0,%.9g\n", k.c_str(), v);
        csv += line;
      }
    atomic_write_file(csv_out, csv);
    std::cout << "wrote " << csv_out << "\n";
  }
  return 0;
}

int cmd_sweep_base(int bits, const std::string& out) {
  if (bits < 2) throw Error(errc::config, "--bits must be >= 2");
  std::string csv = "S,base,digits,scale_cycle_product\n";
  char line[96];
  for (int s = 1; s <= 7; ++s) {
    EncodingScheme sc = EncodingScheme::for_bits(bits, s);
    std::snprintf(line, sizeof line, "%d,%d,%d,%d\n", s, sc.base, sc.n_digits,
                  scale_cycle_product(bits, s));
    csv += line;
  }
  std::cout << csv;
  if (!out.empty()) atomic_write_file(out, csv);
  return 0;
}

void report_error(const GlobalOpts& g, const Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  if (g.json_errors) {
    nlohmann::ordered_json j;
    j["error"] = {{"kind", errc_name(e.kind())},
                  {"exit", e.exit_code()},
                  {"message", e.what()}};
    std::cerr << j.dump() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOpts g;
  CLI::App app{"dual-crossbar transformer-layer simulator"};
  app.require_subcommand(1);
  app.add_option("--config", g.config_path, "TOML config file");
  app.add_option("--out-dir", g.out_dir, "directory for generated files");
  app.add_flag("--emit-layout", g.emit_layout, "dump the dense-store weight layout");
  app.add_flag("--emit-cache-plan", g.emit_cache_plan, "dump the cache residency plan");
  app.add_flag("--json-errors", g.json_errors, "emit machine-readable error detail");

  std::string model_path, input_path, out, csv_out, costs_path, sweep_params;
  std::vector<std::string> trace_paths;
  uint64_t seed = 0;
  double noise_override = -1.0;
  int dc_override = 0, bits = 8, sweep_bits = 8;

  CLI::App* dec = app.add_subcommand("decompose", "lower a layer to its sub-op program");
  dec->add_option("--model", model_path, "weight file (sidecar: <path>.json)")->required();
  dec->add_option("--out", out, "program JSON path (default <out-dir>/program.json)");

  CLI::App* sim = app.add_subcommand("simulate", "run a layer on the simulated hardware");
  sim->add_option("--model", model_path, "weight file (sidecar: <path>.json)")->required();
  sim->add_option("--input", input_path, "input matrix (sidecar: <path>.json)")->required();
  sim->add_option("--seed", seed, "RNG seed (required for reproducibility)")->required();
  sim->add_option("--noise", noise_override, "override crossbar noise fraction");
  sim->add_option("--dc", dc_override, "override duplication factor");

  CLI::App* cost = app.add_subcommand("cost", "aggregate traces into a cost report");
  cost->add_option("--trace", trace_paths, "trace JSON (repeatable)");
  cost->add_option("--costs", costs_path, "component-cost TOML");
  cost->add_option("--out", out, "report path (default <out-dir>/cost_report.json)");
  cost->add_option("--csv", csv_out, "also write a per-component CSV breakdown");
  cost->add_option("--sweep", sweep_params, "comma-separated parameter counts: area sweep");
  cost->add_option("--sweep-bits", sweep_bits, "weight bits for the sweep (default 8)");

  CLI::App* sb = app.add_subcommand("sweep-base", "digit count / scale-cycle table");
  sb->add_option("--bits", bits, "activation bit width (default 8)");
  sb->add_option("--out", out, "also write the CSV to this path");

  try {
    app.parse(argc, argv);
    fs::create_directories(g.out_dir);
    if (dec->parsed()) return cmd_decompose(g, model_path, out);
    if (sim->parsed())
      return cmd_simulate(g, model_path, input_path, seed, noise_override, dc_override);
    if (cost->parsed())
      return cmd_cost(g, trace_paths, costs_path, out, csv_out, sweep_params, sweep_bits);
    if (sb->parsed()) return cmd_sweep_base(bits, out);
    return 2;
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const Error& e) {
    report_error(g, e);
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
