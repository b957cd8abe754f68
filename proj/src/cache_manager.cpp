#include "xbar/cache_manager.hpp"

#include <algorithm>

#include "json.hpp"
#include "xbar/error.hpp"

using nlohmann::ordered_json;

namespace xbar {

const char* cache_name(CacheId id) {
  switch (id) {
    case CacheId::D1: return "D1";
    case CacheId::D2: return "D2";
    case CacheId::T1: return "T1";
    case CacheId::T2: return "T2";
    case CacheId::S: return "S";
  }
  return "?";
}

static const CacheId kAllCaches[] = {CacheId::D1, CacheId::D2, CacheId::T1, CacheId::T2,
                                     CacheId::S};

CacheConfig CacheConfig::typical(int l_s, int d_k, int c_k, int element_bits) {
  if (l_s < 1 || d_k < 1) throw Error(errc::config, "cache sizing needs l_s, d_k >= 1");
  if (c_k < 1 || c_k > d_k) throw Error(errc::config, "c_k must be in [1, d_k]");
  CacheConfig cfg;
  cfg.d1 = cfg.d2 = static_cast<int64_t>(l_s) * d_k;
  cfg.t1 = cfg.t2 = static_cast<int64_t>(l_s) * c_k;
  cfg.s = static_cast<int64_t>(l_s) * l_s;
  cfg.element_bits = element_bits;
  cfg.c_k = c_k;
  cfg.sizing = Sizing::Typical;
  cfg.validate();
  return cfg;
}

CacheConfig CacheConfig::maximum(int l_s, int d_k, int c_k, int element_bits) {
  CacheConfig cfg = typical(l_s, d_k, c_k, element_bits);
  cfg.t1 = cfg.t2 = static_cast<int64_t>(l_s) * d_k;
  cfg.sizing = Sizing::Maximum;
  return cfg;
}

int64_t CacheConfig::size_of(CacheId id) const {
  switch (id) {
    case CacheId::D1: return d1;
    case CacheId::D2: return d2;
    case CacheId::T1: return t1;
    case CacheId::T2: return t2;
    case CacheId::S: return s;
  }
  return 0;
}

uint64_t CacheConfig::byte_size(CacheId id) const {
  return static_cast<uint64_t>(size_of(id)) * element_bits / 8;
}

void CacheConfig::validate() const {
  if (d1 < 1 || d2 < 1 || t1 < 1 || t2 < 1 || s < 1)
    throw Error(errc::config, "every cache needs a positive capacity");
  if (element_bits < 1 || element_bits > 64 || element_bits % 8 != 0)
    throw Error(errc::config, "element_bits must be a byte multiple in [8, 64]");
  if (c_k < 1) throw Error(errc::config, "c_k must be >= 1");
}

namespace {

Residency res(const std::string& tensor, CacheId cache, int64_t elements) {
  return Residency{tensor, cache, elements};
}

}  // namespace

CachePlan plan_mha(const LayerSpec& spec, const CacheConfig& cfg, int dup_factor) {
  spec.validate();
  cfg.validate();
  if (!spec.has_attention)
    throw Error(errc::scheduling, "attention plan requested for a feed-forward-only layer");
  if (dup_factor < 1) throw Error(errc::config, "dup_factor must be >= 1");
  if (dup_factor > cfg.c_k && cfg.sizing == CacheConfig::Sizing::Typical)
    throw Error(errc::capacity,
                "duplication factor " + std::to_string(dup_factor) + " exceeds c_k = " +
                    std::to_string(cfg.c_k) +
                    " under typical cache sizing; use the maximum sizing");

  const int64_t ls = spec.n_tokens, m = spec.hidden;
  const int hw = spec.head_width;
  const int ck = std::min(cfg.c_k, hw);
  const int phases = (hw + ck - 1) / ck;

  const Residency x_d1 = res("X", CacheId::D1, ls * m);
  const Residency es_s = res("EXP(S)", CacheId::S, ls * ls);
  const Residency zx_d2 = res("Z+X", CacheId::D2, ls * m);

  CachePlan plan;
  plan.phases = phases;
  for (int h = 0; h < spec.n_heads; ++h) {
    const std::string hp = "head " + std::to_string(h) + " ";
    // part (a): score accumulation over column chunks of Q and K
    for (int f = 1; f <= phases; ++f) {
      const int cw = std::min(ck, hw - (f - 1) * ck);
      const std::string fp = hp + "phase " + std::to_string(f) + ": ";
      std::vector<Residency> r = {x_d1, res("Q chunk", CacheId::T1, ls * cw),
                                  res("K chunk", CacheId::T2, ls * cw),
                                  res("S partial", CacheId::S, ls * ls)};
      plan.steps.push_back({f, "a", fp + "stage Q,K column chunk", r});
      plan.steps.push_back({f, "a", fp + "accumulate partial scores", r});
    }
    plan.steps.push_back({0, "a", hp + "exponentiate scores, row sums", {x_d1, es_s}});
    // part (b): T1/T2 repurposed for V and R chunks, output accumulates in D2
    for (int f = 1; f <= phases; ++f) {
      const int cw = std::min(ck, hw - (f - 1) * ck);
      const std::string fp = hp + "phase " + std::to_string(f) + ": ";
      std::vector<Residency> r = {x_d1, es_s, res("V chunk", CacheId::T1, ls * cw), zx_d2};
      plan.steps.push_back({f, "b", fp + "stage V column chunk", r});
      r.push_back(res("R chunk", CacheId::T2, ls * cw));
      plan.steps.push_back({f, "b", fp + "normalize scores against V chunk", r});
      plan.steps.push_back({f, "b", fp + "project chunk, accumulate output", r});
    }
  }
  plan.steps.push_back({0, "b", "add residual input to output", {x_d1, zx_d2}});
  check_plan(plan, cfg);
  return plan;
}

CachePlan plan_ff(const LayerSpec& spec, const CacheConfig& cfg) {
  spec.validate();
  cfg.validate();
  const int64_t ls = spec.n_tokens, m = spec.hidden;
  const Residency u_d1 = res("U", CacheId::D1, ls * m);

  CachePlan plan;
  plan.phases = 1;
  plan.steps.push_back({0, "ff", "stage block input", {u_d1}});
  // hidden activations are produced and consumed one session column at a
  // time; no staging cache is involved
  plan.steps.push_back({0, "ff", "stream hidden sessions (no staging)", {u_d1}});
  plan.steps.push_back(
      {0, "ff", "accumulate output + residual", {u_d1, res("Z+X", CacheId::D2, ls * m)}});
  check_plan(plan, cfg);
  return plan;
}

std::map<std::string, int64_t> check_residency(const CachePlan& plan, int step_index) {
  std::map<std::string, int64_t> occ;
  for (CacheId id : kAllCaches) occ[cache_name(id)] = 0;
  if (plan.steps.empty()) return occ;
  if (step_index < 0 || step_index >= static_cast<int>(plan.steps.size()))
    throw Error(errc::range, "plan step index out of range");
  for (const Residency& r : plan.steps[step_index].resident)
    occ[cache_name(r.cache)] += r.elements;
  return occ;
}

std::map<std::string, int64_t> check_plan(const CachePlan& plan, const CacheConfig& cfg) {
  cfg.validate();
  std::map<std::string, int64_t> high;
  for (CacheId id : kAllCaches) high[cache_name(id)] = 0;
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    auto occ = check_residency(plan, static_cast<int>(i));
    for (CacheId id : kAllCaches) {
      const char* nm = cache_name(id);
      if (occ[nm] > cfg.size_of(id))
        throw Error(errc::capacity, std::string("cache ") + nm + " over capacity at step " +
                                        std::to_string(i) + " (" + plan.steps[i].action +
                                        "): " + std::to_string(occ[nm]) + " > " +
                                        std::to_string(cfg.size_of(id)) + " elements");
      high[nm] = std::max(high[nm], occ[nm]);
    }
  }
  return high;
}

std::string plan_to_json(const CachePlan& plan, const CacheConfig& cfg) {
  ordered_json j;
  j["phases"] = plan.phases;
  j["element_bits"] = cfg.element_bits;
  j["c_k"] = cfg.c_k;
  j["sizing"] = cfg.sizing == CacheConfig::Sizing::Typical ? "typical" : "maximum";
  ordered_json caches;
  for (CacheId id : kAllCaches)
    caches[cache_name(id)] = {{"elements", cfg.size_of(id)}, {"bytes", cfg.byte_size(id)}};
  j["caches"] = caches;
  ordered_json high;
  for (const auto& [nm, v] : check_plan(plan, cfg)) high[nm] = v;
  j["high_water_elements"] = high;
  ordered_json steps = ordered_json::array();
  for (const PlanStep& st : plan.steps) {
    ordered_json s;
    s["phase"] = st.phase;
    s["part"] = st.part;
    s["action"] = st.action;
    ordered_json rr = ordered_json::array();
    for (const Residency& r : st.resident)
      rr.push_back({{"tensor", r.tensor}, {"cache", cache_name(r.cache)},
                    {"elements", r.elements}});
    s["resident"] = rr;
    steps.push_back(s);
  }
  j["steps"] = steps;
  return j.dump(2) + "\n";
}

}  // namespace xbar
