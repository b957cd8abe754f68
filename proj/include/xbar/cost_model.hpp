#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xbar/cache_manager.hpp"
#include "xbar/compute_crossbar.hpp"
#include "xbar/dense_crossbar.hpp"
#include "xbar/toml_lite.hpp"

namespace xbar {

// Per-unit component costs. Areas in um^2, energies in pJ per event (or per
// bit where stated). Converter area/energy scales linearly with bit width
// from the listed base width, which keeps wider converters monotonically
// costlier. Defaults are an illustrative 32 nm set; real studies supply their
// own table via TOML.
struct ComponentCosts {
  std::string technology = "illustrative 32nm";
  double cycle_ns = 100.0;  // one digit step (column read + convert + fold)

  double dac_area_um2_per_bit = 21.0;
  double dac_pj_per_bit = 0.039;
  double adc_area_um2 = 1200.0;  // at adc_base_bits
  double adc_pj = 1.6;           // per conversion at adc_base_bits
  int adc_base_bits = 8;

  double memristor_cell_area_um2 = 0.01;
  double memristor_cell_read_pj = 0.05;
  double resistor_cell_area_um2 = 0.01;
  double register_bit_area_um2 = 0.5;
  double register_bit_pj = 0.001;
  double shift_add_area_um2 = 60.0;
  double shift_add_pj = 0.02;
  double f_unit_area_um2 = 500.0;
  double f_unit_pj = 0.5;
  double encoder_area_um2 = 25.0;
  double encoder_pj = 0.01;
  double sample_hold_area_um2 = 10.0;
  double sample_hold_pj = 0.01;
  double cache_bit_area_um2 = 0.25;
  double cache_pj_per_bit = 0.002;

  double act_bandwidth_bits_per_s = 8e12;      // cache side
  double weight_bandwidth_bits_per_s = 819e9;  // dense-store side
  int adc_share_columns = 128;                 // columns multiplexed per ADC

  // Conventional resident-weight crossbar, for comparison baselines.
  struct Baseline {
    int rows = 128, cols = 128;
    int cell_bits = 2;
    int dac_bits = 1;
    int adc_bits = 8;
    int dacs_per_crossbar = 128;
    int adcs_per_crossbar = 1;      // column-shared
    double rest_area_um2 = 0.0;     // per-crossbar glue beyond cells + converters
    int crossbars_per_chip = 16128;
  };
  Baseline multi_bit;
  Baseline single_bit;   // cell_bits forced to 1 in defaults()
  Baseline traditional;  // per-row high-resolution DACs, per-column ADCs

  double adc_area_at(int bits) const;
  double adc_pj_at(int bits) const;
  void validate() const;
  static ComponentCosts defaults();
  static ComponentCosts from_toml(const TomlDoc& doc);
};

struct LowerBound {
  double t_a = 0.0;   // activation-streaming bound, seconds
  double t_w = 0.0;   // weight-streaming bound, seconds
  double t_lb = 0.0;  // max of the two
};

// t_a = alpha_a * s_a * b_a / bw_a and t_w = n_w * b_w / bw_w; the reported
// bound is their max. Bandwidths must be positive.
LowerBound latency_lower_bound(double alpha_a, double s_a, double b_a, double bw_a,
                               double n_w, double b_w, double bw_w);

struct CostReport {
  std::string arch = "proposed";
  double area_mm2 = 0.0;
  std::map<std::string, double> area_breakdown_mm2;
  double energy_mj = 0.0;
  std::map<std::string, double> energy_breakdown_mj;
  double latency_s = 0.0;
  double adp_mm2_s = 0.0;
  double t_lb_a_s = 0.0, t_lb_w_s = 0.0, t_lb_s = 0.0;
  double alpha_a = 0.0;
  uint64_t params = 0;
  uint64_t crossbars = 0;  // baselines: conventional crossbars; proposed: dense banks
  uint64_t chips = 0;
  std::map<std::string, std::string> annotations;
};

std::string report_to_json(const CostReport& r);

// Aggregates simulation traces into area / energy / latency / ADP. Latency is
// steps x cycle plus streaming terms, so it dominates the analytic lower
// bound by construction; a violation means the trace is corrupt and raises an
// accounting error. `caches` adds the five-store SRAM area when provided.
CostReport cost_from_trace(const std::vector<LayerTrace>& traces, const CrossbarConfig& cfg,
                           const DenseConfig& dense_cfg, const CacheConfig* caches,
                           const ComponentCosts& costs);

enum class BaselineArch { MultiBit, SingleBit, Traditional };

const char* baseline_name(BaselineArch arch);

// Analytic resident-weight model: every parameter lives in a conventional
// crossbar cell; area and per-pass energy scale linearly with crossbar count.
CostReport baseline_cost(uint64_t params, BaselineArch arch, const ComponentCosts& costs,
                         int weight_bits = 8);

// Area of this design at a given parameter budget: dense storage banks plus
// one computation crossbar plus converters and caches.
CostReport proposed_area(uint64_t params, const CrossbarConfig& cfg, const DenseConfig& dense_cfg,
                         const CacheConfig* caches, const ComponentCosts& costs,
                         int weight_bits = 8);

// CSV: params,arch,crossbars,chips,area_mm2 for the three baselines and the
// proposed design at each parameter count.
std::string scaling_sweep_csv(const std::vector<uint64_t>& params, const ComponentCosts& costs,
                              const CrossbarConfig& cfg, const DenseConfig& dense_cfg,
                              int weight_bits = 8);

}  // namespace xbar
