#include "xbar/cost_model.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

using nlohmann::ordered_json;

namespace xbar {

double ComponentCosts::adc_area_at(int bits) const {
  int b = bits > 0 ? bits : adc_base_bits;  // ideal converters billed at base width
  return adc_area_um2 * static_cast<double>(b) / adc_base_bits;
}

double ComponentCosts::adc_pj_at(int bits) const {
  int b = bits > 0 ? bits : adc_base_bits;
  return adc_pj * static_cast<double>(b) / adc_base_bits;
}

void ComponentCosts::validate() const {
  const double fields[] = {cycle_ns,
                           dac_area_um2_per_bit,
                           dac_pj_per_bit,
                           adc_area_um2,
                           adc_pj,
                           memristor_cell_area_um2,
                           memristor_cell_read_pj,
                           resistor_cell_area_um2,
                           register_bit_area_um2,
                           register_bit_pj,
                           shift_add_area_um2,
                           shift_add_pj,
                           f_unit_area_um2,
                           f_unit_pj,
                           encoder_area_um2,
                           encoder_pj,
                           sample_hold_area_um2,
                           sample_hold_pj,
                           cache_bit_area_um2,
                           cache_pj_per_bit};
  for (double v : fields)
    if (!(v >= 0.0)) throw Error(errc::config, "component costs must be non-negative");
  if (cycle_ns <= 0.0) throw Error(errc::config, "cycle_ns must be positive");
  if (adc_base_bits < 1) throw Error(errc::config, "adc_base_bits must be >= 1");
  if (act_bandwidth_bits_per_s <= 0.0 || weight_bandwidth_bits_per_s <= 0.0)
    throw Error(errc::config, "bandwidths must be positive");
  if (adc_share_columns < 1) throw Error(errc::config, "adc_share_columns must be >= 1");
  for (const Baseline* b : {&multi_bit, &single_bit, &traditional}) {
    if (b->rows < 1 || b->cols < 1 || b->cell_bits < 1 || b->dac_bits < 1 ||
        b->adc_bits < 1 || b->dacs_per_crossbar < 0 || b->adcs_per_crossbar < 0 ||
        b->crossbars_per_chip < 1 || !(b->rest_area_um2 >= 0.0))
      throw Error(errc::config, "baseline table entries must be positive");
  }
}

ComponentCosts ComponentCosts::defaults() {
  ComponentCosts c;
  c.single_bit.cell_bits = 1;
  c.traditional.dac_bits = 8;
  c.traditional.adcs_per_crossbar = 128;
  return c;
}

namespace {

ComponentCosts::Baseline baseline_from_toml(const TomlDoc& doc, const std::string& section,
                                            const ComponentCosts::Baseline& dflt) {
  ComponentCosts::Baseline b = dflt;
  b.rows = static_cast<int>(doc.integer(section, "rows", b.rows));
  b.cols = static_cast<int>(doc.integer(section, "cols", b.cols));
  b.cell_bits = static_cast<int>(doc.integer(section, "cell_bits", b.cell_bits));
  b.dac_bits = static_cast<int>(doc.integer(section, "dac_bits", b.dac_bits));
  b.adc_bits = static_cast<int>(doc.integer(section, "adc_bits", b.adc_bits));
  b.dacs_per_crossbar =
      static_cast<int>(doc.integer(section, "dacs_per_crossbar", b.dacs_per_crossbar));
  b.adcs_per_crossbar =
      static_cast<int>(doc.integer(section, "adcs_per_crossbar", b.adcs_per_crossbar));
  b.rest_area_um2 = doc.number(section, "rest_area_um2", b.rest_area_um2);
  b.crossbars_per_chip =
      static_cast<int>(doc.integer(section, "crossbars_per_chip", b.crossbars_per_chip));
  return b;
}

}  // namespace

ComponentCosts ComponentCosts::from_toml(const TomlDoc& doc) {
  ComponentCosts c = defaults();
  c.technology = doc.text("general", "technology", c.technology);
  c.cycle_ns = doc.number("general", "cycle_ns", c.cycle_ns);

  const std::string s = "components";
  c.dac_area_um2_per_bit = doc.number(s, "dac_area_um2_per_bit", c.dac_area_um2_per_bit);
  c.dac_pj_per_bit = doc.number(s, "dac_pj_per_bit", c.dac_pj_per_bit);
  c.adc_area_um2 = doc.number(s, "adc_area_um2", c.adc_area_um2);
  c.adc_pj = doc.number(s, "adc_pj", c.adc_pj);
  c.adc_base_bits = static_cast<int>(doc.integer(s, "adc_base_bits", c.adc_base_bits));
  c.memristor_cell_area_um2 =
      doc.number(s, "memristor_cell_area_um2", c.memristor_cell_area_um2);
  c.memristor_cell_read_pj = doc.number(s, "memristor_cell_read_pj", c.memristor_cell_read_pj);
  c.resistor_cell_area_um2 = doc.number(s, "resistor_cell_area_um2", c.resistor_cell_area_um2);
  c.register_bit_area_um2 = doc.number(s, "register_bit_area_um2", c.register_bit_area_um2);
  c.register_bit_pj = doc.number(s, "register_bit_pj", c.register_bit_pj);
  c.shift_add_area_um2 = doc.number(s, "shift_add_area_um2", c.shift_add_area_um2);
  c.shift_add_pj = doc.number(s, "shift_add_pj", c.shift_add_pj);
  c.f_unit_area_um2 = doc.number(s, "f_unit_area_um2", c.f_unit_area_um2);
  c.f_unit_pj = doc.number(s, "f_unit_pj", c.f_unit_pj);
  c.encoder_area_um2 = doc.number(s, "encoder_area_um2", c.encoder_area_um2);
  c.encoder_pj = doc.number(s, "encoder_pj", c.encoder_pj);
  c.sample_hold_area_um2 = doc.number(s, "sample_hold_area_um2", c.sample_hold_area_um2);
  c.sample_hold_pj = doc.number(s, "sample_hold_pj", c.sample_hold_pj);
  c.cache_bit_area_um2 = doc.number(s, "cache_bit_area_um2", c.cache_bit_area_um2);
  c.cache_pj_per_bit = doc.number(s, "cache_pj_per_bit", c.cache_pj_per_bit);

  c.act_bandwidth_bits_per_s =
      doc.number("bandwidth", "activation_bits_per_s", c.act_bandwidth_bits_per_s);
  c.weight_bandwidth_bits_per_s =
      doc.number("bandwidth", "weight_bits_per_s", c.weight_bandwidth_bits_per_s);
  c.adc_share_columns =
      static_cast<int>(doc.integer("bandwidth", "adc_share_columns", c.adc_share_columns));

  c.multi_bit = baseline_from_toml(doc, "baseline.multi_bit", c.multi_bit);
  c.single_bit = baseline_from_toml(doc, "baseline.single_bit", c.single_bit);
  c.traditional = baseline_from_toml(doc, "baseline.traditional", c.traditional);
  c.validate();
  return c;
}

LowerBound latency_lower_bound(double alpha_a, double s_a, double b_a, double bw_a,
                               double n_w, double b_w, double bw_w) {
  if (bw_a <= 0.0 || bw_w <= 0.0) throw Error(errc::config, "bandwidths must be positive");
  LowerBound lb;
  lb.t_a = alpha_a * s_a * b_a / bw_a;
  lb.t_w = n_w * b_w / bw_w;
  lb.t_lb = std::max(lb.t_a, lb.t_w);
  return lb;
}

namespace {

double um2_to_mm2(double v) { return v / 1e6; }
double pj_to_mj(double v) { return v / 1e9; }

double sum_breakdown(const std::map<std::string, double>& m) {
  double s = 0.0;
  for (const auto& [k, v] : m) s += v;
  return s;
}

}  // namespace

const char* baseline_name(BaselineArch arch) {
  switch (arch) {
    case BaselineArch::MultiBit: return "multi_bit";
    case BaselineArch::SingleBit: return "single_bit";
    case BaselineArch::Traditional: return "traditional";
  }
  return "?";
}

CostReport cost_from_trace(const std::vector<LayerTrace>& traces, const CrossbarConfig& cfg,
                           const DenseConfig& dense_cfg, const CacheConfig* caches,
                           const ComponentCosts& costs) {
  cfg.validate();
  dense_cfg.validate();
  costs.validate();

  EnergyCounters ev;
  uint64_t steps = 0, w_bits = 0, a_bits = 0, epilogue_ops = 0, params = 0, s_a = 0;
  for (const LayerTrace& t : traces) {
    ev += t.energy;
    steps += t.steps;
    w_bits += t.weight_bits_streamed;
    a_bits += t.activation_bits_read;
    epilogue_ops += t.epilogue_ops;
    params += t.param_count;
    s_a += t.input_elements;
  }

  CostReport r;
  r.arch = "proposed";
  r.params = params;

  // --- area: one computation crossbar + dense banks + caches ---------------
  const int n_adc = std::max(1, cfg.cols / costs.adc_share_columns);
  const EncodingScheme scheme = cfg.scheme_for_bits(cfg.activation_bits);
  auto& A = r.area_breakdown_mm2;
  A["compute.resistors"] = um2_to_mm2(static_cast<double>(cfg.rows) * cfg.cols *
                                      scheme.resistors_per_activation *
                                      costs.resistor_cell_area_um2);
  A["compute.dac"] =
      um2_to_mm2(static_cast<double>(cfg.rows) * cfg.dac_bits * costs.dac_area_um2_per_bit);
  A["compute.adc"] = um2_to_mm2(n_adc * costs.adc_area_at(cfg.adc_bits));
  A["compute.sample_hold"] = um2_to_mm2(static_cast<double>(cfg.cols) *
                                        costs.sample_hold_area_um2);
  A["compute.shift_add"] = um2_to_mm2(static_cast<double>(cfg.dup_factor) *
                                      costs.shift_add_area_um2);
  A["compute.registers"] = um2_to_mm2(static_cast<double>(cfg.cols) *
                                      cfg.registers_per_column * cfg.register_bits *
                                      costs.register_bit_area_um2);
  A["compute.encoder"] = um2_to_mm2(static_cast<double>(cfg.cols) * costs.encoder_area_um2);
  A["compute.f_unit"] = um2_to_mm2(costs.f_unit_area_um2);

  const uint64_t param_bits = params * static_cast<uint64_t>(cfg.weight_bits);
  const uint64_t banks =
      param_bits == 0 ? 0 : (param_bits + dense_cfg.bank_bits() - 1) / dense_cfg.bank_bits();
  r.crossbars = banks;
  r.chips = banks > 0 ? 1 : 0;
  A["dense.cells"] = um2_to_mm2(static_cast<double>(banks) * dense_cfg.bank_cells() *
                                costs.memristor_cell_area_um2);
  A["dense.dac"] = um2_to_mm2(static_cast<double>(banks) * dense_cfg.cols *
                              costs.dac_area_um2_per_bit);  // 1-bit column selectors
  A["dense.adc"] = um2_to_mm2(static_cast<double>(banks) * dense_cfg.rows *
                              costs.adc_area_at(dense_cfg.bits_per_cell));
  if (caches != nullptr) {
    caches->validate();
    uint64_t cache_bits = 0;
    for (CacheId id : {CacheId::D1, CacheId::D2, CacheId::T1, CacheId::T2, CacheId::S})
      cache_bits += static_cast<uint64_t>(caches->size_of(id)) * caches->element_bits;
    A["caches"] = um2_to_mm2(static_cast<double>(cache_bits) * costs.cache_bit_area_um2);
  }
  r.area_mm2 = sum_breakdown(A);

  // --- energy: event counts x unit energies --------------------------------
  auto& E = r.energy_breakdown_mj;
  E["dac"] = pj_to_mj(static_cast<double>(ev.dac) * cfg.dac_bits * costs.dac_pj_per_bit);
  E["adc"] = pj_to_mj(static_cast<double>(ev.adc) * costs.adc_pj_at(cfg.adc_bits));
  E["shift_add"] = pj_to_mj(static_cast<double>(ev.shift_add) * costs.shift_add_pj);
  E["f_unit"] = pj_to_mj(static_cast<double>(ev.f_unit) * costs.f_unit_pj);
  E["encoder"] = pj_to_mj(static_cast<double>(ev.encoder) * costs.encoder_pj);
  E["sample_hold"] = pj_to_mj(static_cast<double>(ev.sample_hold) * costs.sample_hold_pj);
  E["registers"] = pj_to_mj(static_cast<double>(ev.register_bits) * costs.register_bit_pj);
  E["cache"] = pj_to_mj(static_cast<double>(ev.cache_read_bits + ev.cache_write_bits) *
                        costs.cache_pj_per_bit);
  E["dense"] = pj_to_mj(static_cast<double>(ev.dense_cell_reads) *
                        costs.memristor_cell_read_pj);
  r.energy_mj = sum_breakdown(E);

  // --- latency --------------------------------------------------------------
  const double cycle_s = costs.cycle_ns * 1e-9;
  const double adc_serial = std::max(1.0, static_cast<double>(cfg.dup_factor) / n_adc);
  r.latency_s = static_cast<double>(steps) * cycle_s * adc_serial +
                static_cast<double>(epilogue_ops) * cycle_s +
                static_cast<double>(w_bits) / costs.weight_bandwidth_bits_per_s +
                static_cast<double>(a_bits) / costs.act_bandwidth_bits_per_s;
  r.adp_mm2_s = r.area_mm2 * r.latency_s;

  const double sa_bits = static_cast<double>(s_a) * cfg.activation_bits;
  r.alpha_a = sa_bits > 0.0 ? static_cast<double>(a_bits) / sa_bits : 0.0;
  LowerBound lb = latency_lower_bound(r.alpha_a, static_cast<double>(s_a),
                                      static_cast<double>(cfg.activation_bits),
                                      costs.act_bandwidth_bits_per_s,
                                      static_cast<double>(params),
                                      static_cast<double>(cfg.weight_bits),
                                      costs.weight_bandwidth_bits_per_s);
  r.t_lb_a_s = lb.t_a;
  r.t_lb_w_s = lb.t_w;
  r.t_lb_s = lb.t_lb;
  if (w_bits < param_bits)
    throw Error(errc::accounting, "trace streams fewer weight bits than the model holds");
  if (r.latency_s + 1e-18 < r.t_lb_s)
    throw Error(errc::accounting, "reported latency undercuts the analytic lower bound");

  r.annotations["reference.area_vs_traditional"] = "39x smaller (reported reference value)";
  r.annotations["reference.energy_vs_traditional"] = "18x lower (reported reference value)";
  r.annotations["reference.adp_vs_traditional"] = "68x lower (reported reference value)";
  r.annotations["reference.gpt3_area_fraction"] = "1/51 of a conventional design (reported)";
  if (params > 0) {
    CostReport trad = baseline_cost(params, BaselineArch::Traditional, costs, cfg.weight_bits);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3gx", trad.area_mm2 / std::max(r.area_mm2, 1e-300));
    r.annotations["computed.area_ratio_vs_traditional"] = buf;
  }
  return r;
}

CostReport baseline_cost(uint64_t params, BaselineArch arch, const ComponentCosts& costs,
                         int weight_bits) {
  costs.validate();
  if (weight_bits < 1) throw Error(errc::config, "weight_bits must be >= 1");
  const ComponentCosts::Baseline& b = arch == BaselineArch::MultiBit    ? costs.multi_bit
                                      : arch == BaselineArch::SingleBit ? costs.single_bit
                                                                        : costs.traditional;
  const uint64_t cell_bits_total =
      static_cast<uint64_t>(b.rows) * b.cols * b.cell_bits;
  const uint64_t params_per_xbar = cell_bits_total / weight_bits;
  if (params_per_xbar == 0)
    throw Error(errc::config, "baseline crossbar cannot hold a single parameter");

  CostReport r;
  r.arch = baseline_name(arch);
  r.params = params;
  r.crossbars = params == 0 ? 0 : (params + params_per_xbar - 1) / params_per_xbar;
  r.chips = r.crossbars == 0
                ? 0
                : (r.crossbars + b.crossbars_per_chip - 1) / b.crossbars_per_chip;

  const double n = static_cast<double>(r.crossbars);
  auto& A = r.area_breakdown_mm2;
  A["cells"] = um2_to_mm2(n * b.rows * b.cols * costs.memristor_cell_area_um2);
  A["dac"] = um2_to_mm2(n * b.dacs_per_crossbar * b.dac_bits * costs.dac_area_um2_per_bit);
  A["adc"] = um2_to_mm2(n * b.adcs_per_crossbar * costs.adc_area_at(b.adc_bits));
  A["rest"] = um2_to_mm2(n * b.rest_area_um2);
  r.area_mm2 = sum_breakdown(A);

  // per-pass energy: every row driven once, every column converted once
  auto& E = r.energy_breakdown_mj;
  E["dac"] = pj_to_mj(n * b.dacs_per_crossbar * b.dac_bits * costs.dac_pj_per_bit);
  E["adc"] = pj_to_mj(n * b.cols * costs.adc_pj_at(b.adc_bits));
  E["cells"] = pj_to_mj(n * b.rows * b.cols * costs.memristor_cell_read_pj);
  r.energy_mj = sum_breakdown(E);
  return r;
}

CostReport proposed_area(uint64_t params, const CrossbarConfig& cfg, const DenseConfig& dense_cfg,
                         const CacheConfig* caches, const ComponentCosts& costs,
                         int weight_bits) {
  LayerTrace shell;  // no compute events: area terms plus the minimal weight pass
  shell.param_count = params;
  shell.weight_bits_streamed = params * static_cast<uint64_t>(weight_bits);
  CrossbarConfig c = cfg;
  c.weight_bits = weight_bits;
  return cost_from_trace({shell}, c, dense_cfg, caches, costs);
}

std::string report_to_json(const CostReport& r) {
  ordered_json j;
  j["arch"] = r.arch;
  j["params"] = r.params;
  j["crossbars"] = r.crossbars;
  j["chips"] = r.chips;
  j["area_mm2"] = r.area_mm2;
  ordered_json a;
  for (const auto& [k, v] : r.area_breakdown_mm2) a[k] = v;
  j["area_breakdown_mm2"] = a;
  j["energy_mj"] = r.energy_mj;
  ordered_json e;
  for (const auto& [k, v] : r.energy_breakdown_mj) e[k] = v;
  j["energy_breakdown_mj"] = e;
  j["latency_s"] = r.latency_s;
  j["adp_mm2_s"] = r.adp_mm2_s;
  j["t_lb_a_s"] = r.t_lb_a_s;
  j["t_lb_w_s"] = r.t_lb_w_s;
  j["t_lb_s"] = r.t_lb_s;
  j["alpha_a"] = r.alpha_a;
  ordered_json an;
  for (const auto& [k, v] : r.annotations) an[k] = v;
  j["annotations"] = an;
  return j.dump(2) + "\n";
}

std::string scaling_sweep_csv(const std::vector<uint64_t>& params, const ComponentCosts& costs,
                              const CrossbarConfig& cfg, const DenseConfig& dense_cfg,
                              int weight_bits) {
  std::string csv = "params,arch,crossbars,chips,area_mm2\n";
  char line[256];
  for (uint64_t p : params) {
    for (BaselineArch arch :
         {BaselineArch::MultiBit, BaselineArch::SingleBit, BaselineArch::Traditional}) {
      CostReport r = baseline_cost(p, arch, costs, weight_bits);
      std::snprintf(line, sizeof line, "%llu,%s,%llu,%llu,%.6g\n",
                    static_cast<unsigned long long>(p), r.arch.c_str(),
                    static_cast<unsigned long long>(r.crossbars),
                    static_cast<unsigned long long>(r.chips), r.area_mm2);
      csv += line;
    }
    CostReport r = proposed_area(p, cfg, dense_cfg, nullptr, costs, weight_bits);
    std::snprintf(line, sizeof line, "%llu,%s,%llu,%llu,%.6g\n",
                  static_cast<unsigned long long>(p), "proposed",
                  static_cast<unsigned long long>(r.crossbars),
                  static_cast<unsigned long long>(r.chips), r.area_mm2);
    csv += line;
  }
  return csv;
}

}  // namespace xbar
