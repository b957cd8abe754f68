#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xbar/model_ir.hpp"
#include "xbar/rng.hpp"

namespace xbar {

// High-density weight store: banks of multi-level cells arranged as
// rows x cols, written once per model and read column-at-a-time (one-bit
// column-select DACs, so exactly one column is active per read). Cell levels
// are normalized so the 4-level grid has unit spacing: full scale 3.0,
// 2-bit levels {0,1,2,3}, 1-bit levels {0,3}. Read noise is additive,
// truncated-Gaussian (sigma = amplitude/3, hard-clamped), expressed in units
// of that unit spacing; decode picks the nearest valid level, so a mode with
// level spacing `s` decodes error-free whenever the amplitude < s/2.
struct DenseConfig {
  int rows = 1024;
  int64_t cols = 65536;
  int bits_per_cell = 2;    // 1 or 2
  int n_banks = 1;          // capacity limit
  double read_noise = 0.05; // amplitude, in units of the 4-level spacing

  int64_t bank_cells() const { return static_cast<int64_t>(rows) * cols; }
  int64_t bank_bits() const { return bank_cells() * bits_per_cell; }
  double level_spacing() const { return bits_per_cell == 1 ? 3.0 : 1.0; }
  double decode_margin() const { return level_spacing() / 2.0; }
  void validate() const;
};

// One packed session column of one weight tensor: a contiguous run of cells.
struct CellRun {
  int bank = 0;
  int64_t cell_begin = 0;
  int64_t cell_count = 0;
  int64_t col_begin() const { return 0; }  // filled via layout helpers
};

struct WeightEntry {
  int weights_per_column = 0;  // elements per session column
  int sessions = 0;
  int bits = 8;
  double scale = 1.0;
  std::vector<CellRun> runs;  // one per session, adjacent in cell space
};

struct WeightLayout {
  std::map<std::string, WeightEntry> entries;
  uint64_t mapped_bits = 0;

  const WeightEntry& entry(const std::string& id) const;
  std::string to_json(const DenseConfig& cfg) const;
};

class DenseDevice {
 public:
  explicit DenseDevice(const DenseConfig& cfg = DenseConfig{});

  const DenseConfig& config() const { return cfg_; }
  int banks_used() const { return static_cast<int>(banks_.size()); }
  double utilization() const;  // mapped bits / total configured capacity
  uint64_t mapped_bits() const { return mapped_bits_; }

  // Pack every tensor (sorted by id; sessions in ascending order occupy
  // adjacent cells). Throws a capacity error when the configured bank count
  // is exceeded, a layout error on overlap bookkeeping bugs.
  WeightLayout store_weights(const std::map<std::string, QuantTensor>& weights);

  // Raw column read: decoded levels of every cell in one bank column. When
  // `rng` is non-null each cell level is perturbed by the truncated additive
  // noise of amplitude `noise_amp` before nearest-level decode.
  std::vector<int> read_column(int bank, int64_t col, Rng* rng = nullptr,
                               double noise_amp = 0.0) const;

  // Reassembled integer weights of one session column (1-based session index,
  // matching the sub-operation tables). Noise-free when rng is null.
  std::vector<int32_t> read_weight_column(const WeightLayout& layout, const std::string& id,
                                          int session, Rng* rng = nullptr) const;

  // Decode of one analog cell sample (level + noise) to the nearest valid
  // stored level for the configured cell width.
  int decode_level(double analog) const;

 private:
  int read_cell(int bank, int64_t idx, Rng* rng, double noise_amp) const;

  DenseConfig cfg_;
  std::vector<std::vector<uint8_t>> banks_;  // lazily grown, stored level per cell
  int cur_bank_ = 0;
  int64_t cur_cell_ = 0;
  uint64_t mapped_bits_ = 0;
};

// Bits and seconds needed to stream one session's weight column at
// `bits_per_second`.
struct StreamCost {
  uint64_t bits = 0;
  double seconds = 0.0;
};
StreamCost stream_weight_column(const WeightLayout& layout, const std::string& id,
                                double bits_per_second);

}  // namespace xbar
