#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xbar/model_ir.hpp"

namespace xbar {

// Five on-chip stores for intermediates: D1 holds the layer input, D2
// accumulates the layer output, T1/T2 stage column chunks of width c_k, and S
// accumulates the attention score matrix across phases.
enum class CacheId { D1, D2, T1, T2, S };

const char* cache_name(CacheId id);

struct CacheConfig {
  enum class Sizing { Typical, Maximum };

  int64_t d1 = 0, d2 = 0, t1 = 0, t2 = 0, s = 0;  // capacities in elements
  int element_bits = 8;
  int c_k = 0;  // columns stageable in T1/T2 per phase
  Sizing sizing = Sizing::Typical;

  // Typical row of the sizing table: D = l_s*d_k, T = l_s*c_k, S = l_s^2.
  static CacheConfig typical(int l_s, int d_k, int c_k, int element_bits = 8);
  // Maximum row: T grows to l_s*d_k so any chunk width up to d_k fits.
  static CacheConfig maximum(int l_s, int d_k, int c_k, int element_bits = 8);

  int64_t size_of(CacheId id) const;
  uint64_t byte_size(CacheId id) const;  // capacity * element_bits / 8
  void validate() const;
};

struct Residency {
  std::string tensor;
  CacheId cache = CacheId::D1;
  int64_t elements = 0;
};

// One point in the plan: a named action plus the full residency snapshot
// while it executes. Snapshots, not deltas, so capacity checking is local.
struct PlanStep {
  int phase = 0;       // 1-based; 0 marks phase-independent steps
  std::string part;    // "a" | "b" | "ff"
  std::string action;
  std::vector<Residency> resident;
};

struct CachePlan {
  int phases = 1;
  std::vector<PlanStep> steps;
};

// Static schedule for one attention block (plus residual add): part (a)
// stages Q/K column chunks through T1/T2 and accumulates scores in S, part
// (b) repurposes T1/T2 for V and R chunks while the output accumulates in
// D2. Phase count is ceil over the contraction width by chunk width; heads
// reuse the same storage sequentially.
CachePlan plan_mha(const LayerSpec& spec, const CacheConfig& cfg, int dup_factor = 1);

// Feed-forward schedule: D1 in, D2 out, hidden columns streamed one session
// at a time without staging caches.
CachePlan plan_ff(const LayerSpec& spec, const CacheConfig& cfg);

// Occupancy of each cache at one plan step (all zeros for an empty plan).
std::map<std::string, int64_t> check_residency(const CachePlan& plan, int step_index);

// Walks every step, enforcing occupancy <= capacity; returns per-cache
// high-water marks. Violations raise a capacity error naming cache and step.
std::map<std::string, int64_t> check_plan(const CachePlan& plan, const CacheConfig& cfg);

std::string plan_to_json(const CachePlan& plan, const CacheConfig& cfg);

}  // namespace xbar
