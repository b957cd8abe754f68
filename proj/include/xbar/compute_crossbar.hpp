#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xbar/decomposer.hpp"
#include "xbar/dense_crossbar.hpp"
#include "xbar/encoding.hpp"
#include "xbar/model_ir.hpp"
#include "xbar/rng.hpp"

namespace xbar {

// Reconfigurable computation crossbar. Weights stream in per session and
// drive the row inputs; activations sit in registers as balanced digit codes
// and gate the branch-resistor switches, most significant digit first. Each
// digit step produces one analog column sum which is perturbed, digitized and
// folded into the running accumulator via shift-and-add.
struct CrossbarConfig {
  int rows = 128;        // simultaneously applied weights (row inputs)
  int cols = 128;        // activation columns available for duplication
  int dup_factor = 1;    // d_c: activation rows processed concurrently
  int scale_factor = 2;  // S: digits lie in [-(2^S - 1), 2^S - 1]
  int adc_bits = 8;      // 0 = ideal integer readout
  int dac_bits = 8;
  double noise_fraction = 0.05;  // per column read per digit step, 0 disables
  int activation_bits = 8;
  int weight_bits = 8;
  int exp_bits = 16;  // stored width of exponential intermediates
  // hardware-table register file accounting (bits per code slice x codes)
  int register_bits = 6;
  int registers_per_column = 64;
  // test hook: replace the digit-serial MAC with a direct integer dot product
  bool direct_mac = false;

  void validate() const;
  EncodingScheme scheme_for_bits(int bits) const {
    return EncodingScheme::for_bits(bits, scale_factor);
  }
};

// Per-session analog readout model. The ADC full scale is matched to the
// worst-case column magnitude of the loaded weights; its integer LSB step is
// ceil(full_scale / code_max). adc_bits == 0 models an ideal (wide) converter
// that only rounds to the nearest integer.
struct AdcModel {
  double noise_fraction = 0.0;
  int adc_bits = 0;
  int64_t lsb = 1;
  int64_t code_max = 0;

  static AdcModel for_weights(const CrossbarConfig& cfg, const std::vector<int32_t>& weights);
};

// One column read: multiplicative truncated-Gaussian perturbation
// (sigma = noise_fraction / 3, hard bound +/-noise_fraction), then ADC
// quantization with clamp-style saturation.
int64_t apply_noise_and_adc(double analog_sum, const AdcModel& adc, Rng& rng);

// Digit-serial multiply-accumulate of one activation vector against one
// weight column: per digit step the column sum of weight x digit is read out,
// and the accumulator advances as acc <- acc * base + readout (the base
// multiply implemented as (acc << (S+1)) - acc). Noise-free and with an ideal
// ADC this equals the exact integer dot product.
int64_t mac_digit_serial(const std::vector<int32_t>& weights,
                         const std::vector<DigitCode>& codes, const EncodingScheme& scheme,
                         const AdcModel* adc = nullptr, Rng* rng = nullptr);

// --- traces ------------------------------------------------------------------

struct EnergyCounters {
  uint64_t dac = 0;
  uint64_t adc = 0;
  uint64_t shift_add = 0;
  uint64_t f_unit = 0;
  uint64_t encoder = 0;
  uint64_t sample_hold = 0;
  uint64_t register_bits = 0;
  uint64_t cache_read_bits = 0;
  uint64_t cache_write_bits = 0;
  uint64_t dense_cell_reads = 0;

  EnergyCounters& operator+=(const EnergyCounters& o);
};

struct SessionTrace {
  int session = 0;
  int weights_loaded = 0;
  uint64_t steps = 0;
  std::vector<double> outputs;  // post-F column values
  EnergyCounters energy;
};

struct SubOpTrace {
  int subop_id = -1;
  std::string block;
  int row = 0;
  int head = -1;
  std::string dest;
  int sessions = 0;
  int n_digits = 0;
  int act_rows = 0;   // activation rows per session
  int row_batches = 1;  // ceil(input dims / crossbar rows)
  uint64_t steps = 0;
  uint64_t weight_bits_streamed = 0;
  uint64_t activation_bits_read = 0;
  EnergyCounters energy;
};

struct LayerTrace {
  std::vector<SubOpTrace> subops;
  EnergyCounters energy;
  uint64_t steps = 0;
  uint64_t weight_bits_streamed = 0;
  uint64_t activation_bits_read = 0;
  uint64_t epilogue_ops = 0;
  uint64_t param_count = 0;
  uint64_t input_elements = 0;  // S_a: elements of the layer input
  std::map<std::string, double> scales;  // calibrated quantization scales
};

std::string trace_to_json(const LayerTrace& trace, const CrossbarConfig& cfg);
// Parses what trace_to_json wrote; also recovers the config echo.
LayerTrace trace_from_json(const std::string& text, CrossbarConfig* cfg_out = nullptr);

// --- sub-op execution --------------------------------------------------------

struct QBuffers {
  std::map<std::string, QuantTensor> mats;
  std::map<std::string, std::vector<double>> regs;
  // optional element-count caps per buffer; writes beyond them raise capacity
  std::map<std::string, size_t> capacity;
};

struct RunSubOpResult {
  SubOpTrace trace;
  std::vector<SessionTrace> sessions;  // only when keep_session_outputs
};

// Executes one sub-operation on the crossbar: quantized operands, digit-serial
// MAC per activation row, post-ADC digital F, destination re-quantized with
// the calibrated scale when one is supplied (per-tensor max-abs otherwise).
RunSubOpResult run_subop(const SubOp& op, QBuffers& buf, const DenseDevice* dense,
                         const WeightLayout* layout, const LayerSpec& spec,
                         const CrossbarConfig& cfg,
                         const std::map<std::string, double>& dest_scales, uint64_t seed,
                         bool keep_session_outputs = false);

// --- whole-layer simulation ----------------------------------------------------

struct SimResult {
  MatD output;
  LayerTrace trace;
};

class Simulator {
 public:
  Simulator(const LayerSpec& spec, const WeightSet& w, const CrossbarConfig& cfg,
            const DenseConfig& dense_cfg = DenseConfig{});

  SimResult run(const MatD& input, uint64_t seed);

  const LayerProgram& program() const { return prog_; }
  const WeightLayout& layout() const { return layout_; }
  const DenseDevice& dense() const { return dense_; }
  const CrossbarConfig& config() const { return cfg_; }

 private:
  LayerSpec spec_;
  WeightSet w_;
  CrossbarConfig cfg_;
  LayerProgram prog_;
  DenseDevice dense_;
  WeightLayout layout_;
};

}  // namespace xbar
