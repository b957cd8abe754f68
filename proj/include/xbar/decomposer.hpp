#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "xbar/model_ir.hpp"

namespace xbar {

// Every block of the layer is lowered to a standardized sub-operation
//     F( X . col_t(Y) )  for sessions t in a contiguous range,
// where X is an activation matrix, col_t(Y) is either a stored weight column
// (weight-stationary) or another activation column (non-weight-stationary),
// and F is a small element-wise/columnwise fixup applied after the product.

enum class FnKind {
  None,
  ScaleByInvSqrtDk,     // divide by sqrt(head_width)
  Exp,                  // element-wise exponential
  DivideByRowScalar,    // divide row i by register[i] (payload = register id)
  AddResidualColumn,    // add column t of payload buffer
  ReLU,
  ScaleByInvM,          // divide by hidden width (mean formation)
};

struct AdditionalFn {
  FnKind kind = FnKind::None;
  std::string payload;  // buffer/register id, only for DivideByRowScalar / AddResidualColumn
};

enum class MulKind { WeightStationary, NonWeightStationary };

enum class SrcKind {
  Cache,            // columns of a cached activation tensor
  CacheTransposed,  // col_t = row t of the referenced tensor
  DenseWeight,      // column streamed from the dense weight crossbar
  Ones,             // all-ones vector
  RowOfCache,       // (lhs only) session t uses row t of the referenced tensor
};

struct Operand {
  SrcKind kind = SrcKind::Cache;
  std::string id;
  bool augment_ones = false;  // lhs only: append a ones column (bias folding)
};

struct SessionRange {
  int first = 1, last = 1;  // inclusive, 1-based like the block tables
  int count() const { return last - first + 1; }
};

enum class DestKind { Activation, Exp, Register };
enum class DestMode { Columns, Scalars };

struct SubOp {
  int id = 0;
  std::string block;  // "mha" | "ff" | "norm1" | "norm2"
  int row = 0;        // row within the block's decomposition table
  int head = -1;      // attention head, -1 when not applicable
  MulKind kind = MulKind::WeightStationary;
  Operand lhs, rhs;
  SessionRange sessions;
  AdditionalFn fn;
  std::string dest;
  DestKind dest_kind = DestKind::Activation;
  DestMode dest_mode = DestMode::Columns;
};

// Cache-level data movement: head outputs glued into one buffer.
struct ConcatStep {
  std::vector<std::string> sources;
  std::string dest;
};

// Scalar tail of the normalization block: Var = E(u^2) - E(u)^2,
// alpha = gamma / sqrt(Var + eps), out = (u - E(u)) * alpha + beta.
struct NormEpilogue {
  std::string u, mean, meansq, dest;
  int norm_block = 2;  // 1 or 2, selects the parameter triple
};

struct ProgramStep {
  enum class Kind { SubOp, Concat, Epilogue } kind = Kind::SubOp;
  int index = 0;
};

struct LayerProgram {
  LayerSpec spec;
  std::vector<SubOp> subops;
  std::vector<ConcatStep> concats;
  std::vector<NormEpilogue> epilogues;
  std::vector<ProgramStep> order;
  std::string input_id = "X";
  std::string output_id;
};

// Block lowerings. `id_base` seeds sub-op ids, `input` names the incoming
// activation buffer.
std::vector<SubOp> decompose_attention(const LayerSpec& spec, int id_base = 0,
                                       const std::string& input = "X");
std::vector<SubOp> decompose_feedforward(const LayerSpec& spec, int id_base = 0,
                                         const std::string& input = "X",
                                         const std::string& suffix = "");
std::pair<std::vector<SubOp>, NormEpilogue> decompose_layernorm(const LayerSpec& spec,
                                                                int norm_block,
                                                                const std::string& u_buf,
                                                                const std::string& dest,
                                                                int id_base = 0);

// Whole layer wired together (attention -> norm -> feed-forward -> norm).
LayerProgram build_layer_program(const LayerSpec& spec);

// Stable-field-order JSON dump of a program.
std::string program_to_json(const LayerProgram& prog);

// Weight matrices keyed by the ids the program references (per-head slices of
// the attention projections, bias-augmented feed-forward matrices).
std::map<std::string, MatD> weight_values(const LayerSpec& spec, const WeightSet& w);

// --- exact execution ---------------------------------------------------------

struct ExactBuffers {
  std::map<std::string, MatD> mats;
  std::map<std::string, std::vector<double>> regs;
};

struct ExactResult {
  MatD output;
  ExactBuffers buffers;
};

// Reference execution of a program in plain double arithmetic. This is the
// semantic meaning of the program; the hardware path must agree with it up to
// quantization and injected noise.
ExactResult execute_program_exact(const LayerProgram& prog, const MatD& input,
                                  const WeightSet& w);

// Runs an ad-hoc sub-op list over caller-provided buffers in plain double
// arithmetic. Weight-stationary operands resolve from `weights`.
void execute_subops_exact(const LayerSpec& spec, const std::vector<SubOp>& ops,
                          ExactBuffers& buf, const std::map<std::string, MatD>& weights = {});

// Attention block + residual executed with the phased cache schedule (column
// chunks of width c_k, partial products accumulated across phases). Produces
// bit-identical results to the unconstrained program; used to validate cache
// plans. Single-head layers only (the planner's granularity).
MatD execute_attention_phased(const LayerSpec& spec, const WeightSet& w, const MatD& x,
                              int c_k);

}  // namespace xbar
