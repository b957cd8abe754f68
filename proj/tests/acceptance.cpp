// Acceptance gate: end-to-end checks of the shipped behavior, one PASS/FAIL
// line each, nonzero exit if anything fails. Run with XBARSIM_CLI pointing at
// the CLI binary.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "xbar/cache_manager.hpp"
#include "xbar/compute_crossbar.hpp"
#include "xbar/cost_model.hpp"
#include "xbar/decomposer.hpp"
#include "xbar/dense_crossbar.hpp"
#include "xbar/encoding.hpp"
#include "xbar/model_ir.hpp"
#include "xbar/oracle.hpp"

using namespace xbar;
using namespace testutil;

namespace {

struct Ctx {
  std::ostringstream detail;
  bool ok = true;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {  // keep the first failure only; it names the culprit
      ok = false;
      detail.str(what);
    }
  }

  // success-path summary; dropped once a failure owns the detail line
  void note(const std::string& what) {
    if (ok) detail << what;
  }
};

CrossbarConfig quiet_config(int rows = 16, int cols = 16, int dup = 1) {
  CrossbarConfig cfg;
  cfg.rows = rows;
  cfg.cols = cols;
  cfg.dup_factor = dup;
  cfg.adc_bits = 0;
  cfg.noise_fraction = 0.0;
  return cfg;
}

double sum_scales(const LayerTrace& tr) {
  double s = 0.0;
  for (const auto& [k, v] : tr.scales) s += v;
  return s;
}

std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// 1. The base sweep at 8-bit emits the expected digit counts and
//    scale-cycle products for every scale factor.
void check_base_sweep(Ctx& c) {
  c.require(!cli_path().empty(), "XBARSIM_CLI not set");
  if (!c.ok) return;
  CliResult r = run_cli("sweep-base --bits 8", "acc_sweep");
  c.require(r.exit_code == 0, "sweep-base exited " + std::to_string(r.exit_code));
  const std::string want =
      "S,base,digits,scale_cycle_product\n"
      "1,3,6,6\n"
      "2,7,3,6\n"
      "3,15,3,9\n"
      "4,31,2,8\n"
      "5,63,2,10\n"
      "6,127,2,12\n"
      "7,255,1,7\n";
  c.require(r.out == want, "table mismatch, got:\n" + r.out);
}

// 2. Worked example: 78 in the S=2 system is [2,-3,1], and a three-digit MAC
//    against the weight 5 walks 10 -> 55 -> 390 = 5*78.
void check_worked_encoding(Ctx& c) {
  EncodingScheme sc = EncodingScheme::for_bits(8, 2);
  DigitCode code = encode(78, sc);
  c.require(code.digits == std::vector<int>{2, -3, 1},
            "encode(78) gave a different digit code");

  const int64_t w = 5;
  std::vector<int64_t> walk;
  int64_t acc = 0;
  for (int d : code.digits) {
    acc = shift_add_base_multiply(acc, sc.scale_factor) + w * d;
    walk.push_back(acc);
  }
  c.require(walk == std::vector<int64_t>{10, 55, 390}, "accumulator walk diverged");

  int64_t mac = mac_digit_serial({static_cast<int32_t>(w)}, {code}, sc);
  c.require(mac == 390 && mac == w * 78, "digit-serial MAC != 5*78");
}

// 3. Noise-free simulation with an ideal converter matches the double-precision
//    reference within 3 accumulated quantization scale units per element,
//    across a grid of random toy layers.
void check_oracle_equivalence(Ctx& c) {
  int runs = 0;
  double worst = 0.0;
  for (int n : {1, 2, 4}) {
    for (int m : {2, 4, 8}) {
      for (int heads : {1, 2}) {
        for (uint64_t seed : {1, 2, 3}) {
          Rng rng(seed * 1000 + n * 100 + m * 10 + heads);
          LayerSpec spec = make_spec(n, m, heads);
          WeightSet w = random_weights(rng, spec, 0.5);
          MatD x = random_mat(rng, n, m);

          Simulator sim(spec, w, quiet_config());
          SimResult res = sim.run(x, seed);
          MatD want = layer_forward(x, w, spec);

          double tol = 3.0 * sum_scales(res.trace);
          double diff = max_abs_diff(res.output, want);
          worst = std::max(worst, diff / tol);
          c.require(diff <= tol, "n=" + std::to_string(n) + " m=" + std::to_string(m) +
                                     " heads=" + std::to_string(heads) + " seed=" +
                                     std::to_string(seed) + ": |sim-ref| " + num(diff) +
                                     " > " + num(tol));
          ++runs;
        }
      }
    }
  }
  c.require(runs >= 36, "grid too small");
  c.note("worst diff at " + num(worst) + " of budget");
}

// 4. The score/sum/normalize sub-op triple, run in plain arithmetic, equals a
//    directly computed softmax-weighted average of V.
void check_softmax_decomposition(Ctx& c) {
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 7;  // 2..8 tokens
    const int dk = 4;
    LayerSpec spec = make_spec(n, dk, 1);
    std::vector<SubOp> ops = decompose_attention(spec);
    std::vector<SubOp> tail(ops.begin() + 3, ops.begin() + 6);

    MatD s = random_mat(rng, n, n, -10.0, 10.0);
    MatD eye(n, n);
    for (int i = 0; i < n; ++i) eye(i, i) = 1.0;
    MatD v = random_mat(rng, n, dk, -10.0, 10.0);

    // identity K' feeds the raw scores straight into the exponent row
    ExactBuffers buf;
    buf.mats["Q.h0"] = s;
    buf.mats["Ks.h0"] = eye;
    buf.mats["V.h0"] = v;
    execute_subops_exact(spec, tail, buf);

    MatD want = matmul(softmax_rows(s, true), v);
    double diff = max_abs_diff(buf.mats.at("Y.h0"), want);
    worst = std::max(worst, diff);
    c.require(diff <= 1e-6, "trial " + std::to_string(trial) + ": diff " + num(diff));
    if (!c.ok) return;
  }
  c.note("worst |diff| " + num(worst));
}

// 5. Doubling the duplication factor exactly halves a sub-op's digit steps
//    whenever its activation row count divides evenly.
void check_duplication_law(Ctx& c) {
  int checked = 0;
  for (int n : {4, 8}) {
    for (int m : {4, 8}) {
      for (int heads : {1, 2}) {
        for (int k : {1, 2}) {
          Rng rng(n * 100 + m * 10 + heads);
          LayerSpec spec = make_spec(n, m, heads);
          WeightSet w = random_weights(rng, spec, 0.5);
          MatD x = random_mat(rng, n, m);

          SimResult lo = Simulator(spec, w, quiet_config(16, 16, k)).run(x, 9);
          SimResult hi = Simulator(spec, w, quiet_config(16, 16, 2 * k)).run(x, 9);
          c.require(lo.trace.subops.size() == hi.trace.subops.size(), "trace shape");
          for (size_t i = 0; i < lo.trace.subops.size() && c.ok; ++i) {
            const SubOpTrace& a = lo.trace.subops[i];
            const SubOpTrace& b = hi.trace.subops[i];
            if (a.act_rows % (2 * k) != 0) continue;
            c.require(a.steps == 2 * b.steps,
                      "sub-op " + std::to_string(a.subop_id) + " at d_c " +
                          std::to_string(k) + "->" + std::to_string(2 * k) + ": " +
                          std::to_string(a.steps) + " !/2= " + std::to_string(b.steps));
            ++checked;
          }
          c.require(hi.trace.steps < lo.trace.steps, "total steps did not drop");
        }
      }
    }
  }
  c.require(checked > 100, "too few divisible sub-ops exercised");
  c.note(std::to_string(checked) + " sub-op pairs halved exactly");
}

// 6. Every 8-bit value round-trips through every scale factor, and the signed
//    switch assignment of each digit sums back to the digit.
void check_roundtrip(Ctx& c) {
  int codes = 0;
  for (int s = 1; s <= 7 && c.ok; ++s) {
    EncodingScheme sc = EncodingScheme::for_bits(8, s);
    c.require(sc.n_digits == digits_required(8, s), "digit count mismatch");
    for (int v = -127; v <= 127; ++v) {
      DigitCode code = encode(v, sc);
      c.require(decode(code, sc) == v,
                "S=" + std::to_string(s) + " v=" + std::to_string(v) + " round trip");
      for (int d : code.digits)
        c.require(switch_state_value(digit_to_switch_states(d, s)) == d,
                  "switch states for digit " + std::to_string(d));
      if (!c.ok) return;
      ++codes;
    }
  }
  c.note(std::to_string(codes) + " codes verified");
}

// 7. At 5% column noise the layer output stays directionally faithful to the
//    noise-free run; the weight store reads back error-free with margin to
//    spare in both cell modes.
void check_noise_robustness(Ctx& c) {
  Rng rng(777);
  LayerSpec spec = make_spec(8, 16, 2);
  WeightSet w = random_weights(rng, spec, 0.5);
  MatD x = random_mat(rng, 8, 16);

  CrossbarConfig quiet = quiet_config(32, 16);
  quiet.adc_bits = 8;
  CrossbarConfig noisy = quiet;
  noisy.noise_fraction = 0.05;

  MatD ref = Simulator(spec, w, quiet).run(x, 1).output;
  Simulator sim(spec, w, noisy);
  double cos_sum = 0.0, cos_min = 1.0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    MatD out = sim.run(x, seed).output;
    double cs = cosine(out.d, ref.d);
    cos_sum += cs;
    cos_min = std::min(cos_min, cs);
  }
  double cos_avg = cos_sum / 100.0;
  c.require(cos_avg >= 0.99, "mean cosine similarity " + num(cos_avg));

  // storage margins: noise is hard-bounded, so 5x the nominal amplitude in
  // 2-bit mode and 18x in 1-bit mode still decode to the written level
  std::map<std::string, QuantTensor> tensors;
  tensors["w"] = quantize(random_mat(rng, 64, 8), 8);
  for (auto [bits, amp] : {std::pair<int, double>{2, 5 * 0.05}, {1, 18 * 0.05}}) {
    DenseConfig dcfg;
    dcfg.rows = 64;
    dcfg.cols = 4096;
    dcfg.bits_per_cell = bits;
    dcfg.read_noise = amp;
    DenseDevice dev(dcfg);
    WeightLayout layout = dev.store_weights(tensors);
    Rng noise_rng(42);
    uint64_t errors = 0, reads = 0;
    for (int rep = 0; rep < 20; ++rep) {
      for (int sess = 1; sess <= 8; ++sess) {
        std::vector<int32_t> got = dev.read_weight_column(layout, "w", sess, &noise_rng);
        for (int i = 0; i < 64; ++i, ++reads)
          if (got[i] != tensors["w"].data(i, sess - 1)) ++errors;
      }
    }
    c.require(errors == 0, std::to_string(bits) + "-bit mode: " +
                               std::to_string(errors) + "/" + std::to_string(reads) +
                               " readback errors at amplitude " + std::to_string(amp));
  }
  c.note("mean cosine " + num(cos_avg) + ", min " + num(cos_min));
}

// 8. The two-token staging example plans in two phases within the typical
//    sizing, and the full-size configuration lands on the intended byte
//    budgets per store.
void check_cache_plan(Ctx& c) {
  LayerSpec toy = make_spec(2, 6, 1);
  CacheConfig small = CacheConfig::typical(2, 6, 3);
  CachePlan plan = plan_mha(toy, small);
  c.require(plan.phases == 2, "expected 2 phases, got " + std::to_string(plan.phases));
  try {
    check_plan(plan, small);  // throws if any step exceeds the typical sizing
  } catch (const Error& e) {
    c.require(false, e.what());
  }

  CacheConfig big = CacheConfig::typical(256, 1024, 64, 8);
  auto kb = [&](CacheId id) { return big.byte_size(id) / 1024; };
  c.require(kb(CacheId::D1) == 256 && kb(CacheId::D2) == 256, "D stores != 256 kB");
  c.require(kb(CacheId::S) == 64, "S store != 64 kB");
  c.require(kb(CacheId::T1) == 16 && kb(CacheId::T2) == 16, "T stores != 16 kB");
}

// 9. Cost reports close over their own breakdowns, respect the analytic
//    latency lower bound, and carry the reference ratios as annotations only.
void check_cost_closure(Ctx& c) {
  Rng rng(31);
  LayerSpec spec = make_spec(4, 8, 1);
  WeightSet w = random_weights(rng, spec, 0.5);
  MatD x = random_mat(rng, 4, 8);
  CrossbarConfig cfg = quiet_config();
  SimResult res = Simulator(spec, w, cfg).run(x, 31);

  ComponentCosts costs = ComponentCosts::defaults();
  CacheConfig caches = CacheConfig::typical(4, 8, 4);
  CostReport r = cost_from_trace({res.trace}, cfg, DenseConfig{}, &caches, costs);

  double a = 0.0, e = 0.0;
  for (const auto& [k, v] : r.area_breakdown_mm2) a += v;
  for (const auto& [k, v] : r.energy_breakdown_mj) e += v;
  c.require(std::abs(r.area_mm2 - a) <= 1e-12 * a, "area breakdown does not sum");
  c.require(std::abs(r.energy_mj - e) <= 1e-12 * e, "energy breakdown does not sum");
  c.require(std::abs(r.adp_mm2_s - r.area_mm2 * r.latency_s) <=
                1e-12 * r.adp_mm2_s,
            "ADP != area x latency");
  c.require(r.latency_s >= r.t_lb_s, "latency below the lower bound");
  for (const char* key : {"reference.area_vs_traditional", "reference.energy_vs_traditional",
                          "reference.adp_vs_traditional", "reference.gpt3_area_fraction",
                          "computed.area_ratio_vs_traditional"})
    c.require(r.annotations.count(key) == 1, std::string("missing annotation ") + key);
  c.note("latency " + num(r.latency_s) + " s vs bound " + num(r.t_lb_s) + " s");
}

// 10. Two CLI simulations with the same flags and seed produce byte-identical
//     artifacts, across model shapes, seeds and duplication factors.
void check_determinism(Ctx& c) {
  c.require(!cli_path().empty(), "XBARSIM_CLI not set");
  if (!c.ok) return;
  int pairs = 0;
  for (int heads : {1, 2}) {
    std::string dir = scratch_dir("acc_det_h" + std::to_string(heads));
    Rng rng(2024);
    LayerSpec spec = make_spec(4, 8, heads);
    WeightSet w = random_weights(rng, spec, 0.5);
    MatD x = random_mat(rng, 4, 8);
    std::string model = dir + "/layer.bin", input = dir + "/input.bin";
    save_layer(model, model + ".json", spec, w);
    save_matrix(input, input + ".json", x);

    for (uint64_t seed : {7, 99}) {
      for (const std::string& extra : {std::string(), std::string(" --dc 2")}) {
        std::string tag = "h" + std::to_string(heads) + "_s" + std::to_string(seed) +
                          (extra.empty() ? "" : "_dc");
        std::string base = " simulate --model " + model + " --input " + input +
                           " --seed " + std::to_string(seed) + extra;
        std::string d1 = dir + "/" + tag + "_a", d2 = dir + "/" + tag + "_b";
        CliResult r1 = run_cli("--out-dir " + d1 + base, "acc_" + tag + "_a");
        CliResult r2 = run_cli("--out-dir " + d2 + base, "acc_" + tag + "_b");
        c.require(r1.exit_code == 0 && r2.exit_code == 0, tag + ": simulate failed");
        for (const char* f : {"/output.bin", "/output.bin.json", "/trace.json"}) {
          std::string b1 = read_file(d1 + f), b2 = read_file(d2 + f);
          c.require(!b1.empty() && b1 == b2, tag + ": " + f + " differs between runs");
        }
        ++pairs;
      }
    }
  }
  c.note(std::to_string(pairs) + " run pairs byte-identical");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<void(Ctx&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {"8-bit base sweep table", check_base_sweep},
      {"worked encoding and MAC walk", check_worked_encoding},
      {"noise-free simulation matches the reference", check_oracle_equivalence},
      {"softmax sub-op decomposition", check_softmax_decomposition},
      {"duplication halves digit steps", check_duplication_law},
      {"exhaustive encode/decode round trip", check_roundtrip},
      {"noise robustness and storage margins", check_noise_robustness},
      {"cache plan phases and store sizes", check_cache_plan},
      {"cost closure and latency bound", check_cost_closure},
      {"byte-identical deterministic runs", check_determinism},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Ctx ctx;
    auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].fn(ctx);
    } catch (const std::exception& e) {
      ctx.ok = false;
      ctx.detail.str(std::string("unexpected exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string detail = ctx.detail.str();
    std::printf("criterion %2zu: %s  %-45s (%.2f s)%s%s\n", i + 1,
                ctx.ok ? "PASS" : "FAIL", criteria[i].name, secs,
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!ctx.ok) ++failures;
  }
  if (failures > 0) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
