#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xbar/matrix.hpp"

namespace xbar {

// Shape card for one transformer layer.
struct LayerSpec {
  int n_tokens = 0;    // sequence length n
  int hidden = 0;      // token dimension m
  int ff_width = 0;    // feed-forward inner width h
  int head_width = 0;  // per-head dimension d_k
  int n_heads = 1;
  bool has_attention = true;

  void validate() const;  // throws dimension errors
};

struct NormParams {
  double gamma = 1.0;
  double beta = 0.0;
  double epsilon = 1e-5;
};

// Full-precision parameter set for one layer.
struct WeightSet {
  MatD w_q, w_k, w_v, w_o;       // hidden x hidden (attention only)
  MatD w_a, w_b;                 // hidden x ff_width, ff_width x hidden
  std::vector<double> b_a, b_b;  // ff_width, hidden
  NormParams norm1;              // after attention (attention only)
  NormParams norm2;              // after feed-forward

  void validate(const LayerSpec& spec) const;
};

// Symmetric per-tensor fixed-point tensor. data = round(value / scale) with
// round-half-away-from-zero, clamped to +/-(2^(bits-1) - 1); -2^(bits-1) is
// never produced so negation stays closed.
struct QuantTensor {
  MatI data;
  double scale = 1.0;
  int bits = 8;
};

int64_t quant_max(int bits);

QuantTensor quantize(const MatD& t, int bits);
QuantTensor quantize_with_scale(const MatD& t, int bits, double scale);
MatD dequantize(const QuantTensor& q);

// Total declared parameter count (weights, biases, and the 3 norm scalars per
// norm block).
uint64_t param_count(const LayerSpec& spec);

// --- file formats -----------------------------------------------------------
//
// Weights: one binary file of concatenated row-major little-endian f32
// tensors plus a JSON sidecar:
//   {"layer": {n_tokens, hidden, ff_width, head_width, n_heads, has_attention},
//    "tensors": [{"name": ..., "shape": [...], "offset_bytes": ...}, ...]}
//
// Matrices (activations): raw little-endian f32 + {"rows": r, "cols": c}.

struct LoadedLayer {
  LayerSpec spec;
  WeightSet weights;
};

LoadedLayer load_layer(const std::string& weights_path, const std::string& meta_path);
void save_layer(const std::string& weights_path, const std::string& meta_path,
                const LayerSpec& spec, const WeightSet& w);

MatD load_matrix(const std::string& data_path, const std::string& meta_path);
void save_matrix(const std::string& data_path, const std::string& meta_path, const MatD& m);

// Write with a temp file + rename so a failed run never leaves partial output.
void atomic_write_file(const std::string& path, const std::string& contents);

}  // namespace xbar
