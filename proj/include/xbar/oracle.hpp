#pragma once

#include "xbar/model_ir.hpp"

namespace xbar {

// Full-precision reference implementations. These are the ground truth the
// hardware simulation is validated against; they use plain double arithmetic
// with row-major ascending accumulation order so results are reproducible.

// Row-wise softmax. `stabilized` subtracts the row max before exponentiating
// (mathematically identical, numerically safer); the literal mode matches the
// hardware's plain exponential.
MatD softmax_rows(const MatD& s, bool stabilized = true);

// Multi-head attention block output Z (pre-residual). `causal` masks scores
// above the diagonal before the softmax.
MatD attention_forward(const MatD& x, const WeightSet& w, const LayerSpec& spec,
                       bool causal = false, bool stabilized = true);

// Feed-forward block output Z = ReLU(X W_a + b_a) W_b + b_b (pre-residual).
MatD feedforward_forward(const MatD& x, const WeightSet& w, const LayerSpec& spec);

// Residual add + layer norm: row-wise normalize (x + z), then gamma/beta.
MatD add_norm(const MatD& x, const MatD& z, const NormParams& p);

// Whole layer: attention (optional) -> add&norm -> feed-forward -> add&norm.
MatD layer_forward(const MatD& x, const WeightSet& w, const LayerSpec& spec,
                   bool causal = false);

}  // namespace xbar
