#include "xbar/decomposer.hpp"

#include <cmath>

#include "json.hpp"

using nlohmann::ordered_json;

namespace xbar {

namespace {

std::string hid(const std::string& base, int head) { return base + ".h" + std::to_string(head); }

}  // namespace

std::vector<SubOp> decompose_attention(const LayerSpec& spec, int id_base,
                                       const std::string& input) {
  spec.validate();
  if (!spec.has_attention)
    throw Error(errc::scheduling, "decompose_attention: layer has no attention block");
  const int n = spec.n_tokens, m = spec.hidden, dk = spec.head_width;

  std::vector<SubOp> ops;
  int id = id_base;
  for (int h = 0; h < spec.n_heads; ++h) {
    // (1) X . col_t(W_q) -> Q
    SubOp q;
    q.id = id++;
    q.block = "mha";
    q.row = 1;
    q.head = h;
    q.kind = MulKind::WeightStationary;
    q.lhs = {SrcKind::Cache, input, false};
    q.rhs = {SrcKind::DenseWeight, hid("Wq", h), false};
    q.sessions = {1, dk};
    q.dest = hid("Q", h);
    ops.push_back(q);

    // (2) X . col_t(W_k), scaled by 1/sqrt(d_k) -> K'
    SubOp k = q;
    k.id = id++;
    k.row = 2;
    k.rhs.id = hid("Wk", h);
    k.fn = {FnKind::ScaleByInvSqrtDk, ""};
    k.dest = hid("Ks", h);
    ops.push_back(k);

    // (3) X . col_t(W_v) -> V
    SubOp v = q;
    v.id = id++;
    v.row = 3;
    v.rhs.id = hid("Wv", h);
    v.dest = hid("V", h);
    ops.push_back(v);

    // (4) Q . col_t(K'^T), exponentiated -> EXP(S)
    SubOp e;
    e.id = id++;
    e.block = "mha";
    e.row = 4;
    e.head = h;
    e.kind = MulKind::NonWeightStationary;
    e.lhs = {SrcKind::Cache, hid("Q", h), false};
    e.rhs = {SrcKind::CacheTransposed, hid("Ks", h), false};
    e.sessions = {1, n};
    e.fn = {FnKind::Exp, ""};
    e.dest = hid("ES", h);
    e.dest_kind = DestKind::Exp;
    ops.push_back(e);

    // (5) EXP(S) . 1 -> row-scalar register a
    SubOp a;
    a.id = id++;
    a.block = "mha";
    a.row = 5;
    a.head = h;
    a.kind = MulKind::NonWeightStationary;
    a.lhs = {SrcKind::Cache, hid("ES", h), false};
    a.rhs = {SrcKind::Ones, "", false};
    a.sessions = {1, 1};
    a.dest = hid("a", h);
    a.dest_kind = DestKind::Register;
    ops.push_back(a);

    // (6) EXP(S) . col_t(V), divided by a_i -> Y
    SubOp y;
    y.id = id++;
    y.block = "mha";
    y.row = 6;
    y.head = h;
    y.kind = MulKind::NonWeightStationary;
    y.lhs = {SrcKind::Cache, hid("ES", h), false};
    y.rhs = {SrcKind::Cache, hid("V", h), false};
    y.sessions = {1, dk};
    y.fn = {FnKind::DivideByRowScalar, hid("a", h)};
    y.dest = hid("Y", h);
    ops.push_back(y);
  }

  // (7) Y . col_t(W_o) + residual column -> Z + X (one shared projection)
  SubOp o;
  o.id = id++;
  o.block = "mha";
  o.row = 7;
  o.head = -1;
  o.kind = MulKind::WeightStationary;
  o.lhs = {SrcKind::Cache, spec.n_heads == 1 ? hid("Y", 0) : "Y", false};
  o.rhs = {SrcKind::DenseWeight, "Wo", false};
  o.sessions = {1, m};
  o.fn = {FnKind::AddResidualColumn, input};
  o.dest = "ZX1";
  ops.push_back(o);

  return ops;
}

std::vector<SubOp> decompose_feedforward(const LayerSpec& spec, int id_base,
                                         const std::string& input, const std::string& suffix) {
  spec.validate();
  const int m = spec.hidden, h = spec.ff_width;
  std::vector<SubOp> ops;

  // (1) [X|1] . col_t([W_a; b_a]), rectified -> Y
  SubOp f1;
  f1.id = id_base;
  f1.block = "ff";
  f1.row = 1;
  f1.kind = MulKind::WeightStationary;
  f1.lhs = {SrcKind::Cache, input, true};
  f1.rhs = {SrcKind::DenseWeight, "Wa_ba", false};
  f1.sessions = {1, h};
  f1.fn = {FnKind::ReLU, ""};
  f1.dest = "FY" + suffix;
  ops.push_back(f1);

  // (2) [Y|1] . col_t([W_b; b_b]) + residual column -> Z + X
  SubOp f2;
  f2.id = id_base + 1;
  f2.block = "ff";
  f2.row = 2;
  f2.kind = MulKind::WeightStationary;
  f2.lhs = {SrcKind::Cache, f1.dest, true};
  f2.rhs = {SrcKind::DenseWeight, "Wb_bb", false};
  f2.sessions = {1, m};
  f2.fn = {FnKind::AddResidualColumn, input};
  f2.dest = "ZX2" + suffix;
  ops.push_back(f2);

  return ops;
}

std::pair<std::vector<SubOp>, NormEpilogue> decompose_layernorm(const LayerSpec& spec,
                                                                int norm_block,
                                                                const std::string& u_buf,
                                                                const std::string& dest,
                                                                int id_base) {
  spec.validate();
  if (norm_block != 1 && norm_block != 2)
    throw Error(errc::scheduling, "norm block index must be 1 or 2");
  const int n = spec.n_tokens;
  const std::string blk = "norm" + std::to_string(norm_block);

  // (1) row_t(U) . 1, scaled by 1/m -> E(u)
  SubOp s1;
  s1.id = id_base;
  s1.block = blk;
  s1.row = 1;
  s1.kind = MulKind::NonWeightStationary;
  s1.lhs = {SrcKind::RowOfCache, u_buf, false};
  s1.rhs = {SrcKind::Ones, "", false};
  s1.sessions = {1, n};
  s1.fn = {FnKind::ScaleByInvM, ""};
  s1.dest = "E1." + blk;
  s1.dest_kind = DestKind::Register;
  s1.dest_mode = DestMode::Scalars;

  // (2) row_t(U) . row_t(U)^T, scaled by 1/m -> E(u^2)
  SubOp s2 = s1;
  s2.id = id_base + 1;
  s2.row = 2;
  s2.rhs = {SrcKind::CacheTransposed, u_buf, false};
  s2.dest = "E2." + blk;

  NormEpilogue ep;
  ep.u = u_buf;
  ep.mean = s1.dest;
  ep.meansq = s2.dest;
  ep.dest = dest;
  ep.norm_block = norm_block;
  return {{s1, s2}, ep};
}

LayerProgram build_layer_program(const LayerSpec& spec) {
  spec.validate();
  LayerProgram prog;
  prog.spec = spec;
  prog.input_id = "X";

  auto push_subops = [&](std::vector<SubOp> ops) {
    for (auto& op : ops) {
      prog.order.push_back({ProgramStep::Kind::SubOp, static_cast<int>(prog.subops.size())});
      prog.subops.push_back(std::move(op));
    }
  };

  std::string cur = "X";
  if (spec.has_attention) {
    push_subops(decompose_attention(spec, 0, cur));
    if (spec.n_heads > 1) {
      // Head outputs glued before the shared projection consumes them. The
      // projection sub-op is already emitted; physically the glue happens as
      // the Y columns land, so schedule the concat just before it.
      ConcatStep c;
      for (int h = 0; h < spec.n_heads; ++h) c.sources.push_back(hid("Y", h));
      c.dest = "Y";
      // insert before the last sub-op step (the shared projection)
      ProgramStep proj = prog.order.back();
      prog.order.pop_back();
      prog.order.push_back({ProgramStep::Kind::Concat, static_cast<int>(prog.concats.size())});
      prog.concats.push_back(c);
      prog.order.push_back(proj);
    }
    auto [nops, ep] = decompose_layernorm(spec, 1, "ZX1", "U1",
                                          static_cast<int>(prog.subops.size()));
    push_subops(nops);
    prog.order.push_back({ProgramStep::Kind::Epilogue, static_cast<int>(prog.epilogues.size())});
    prog.epilogues.push_back(ep);
    cur = "U1";
  }

  push_subops(decompose_feedforward(spec, static_cast<int>(prog.subops.size()), cur));
  auto [nops, ep] = decompose_layernorm(spec, 2, "ZX2", "U2",
                                        static_cast<int>(prog.subops.size()));
  push_subops(nops);
  prog.order.push_back({ProgramStep::Kind::Epilogue, static_cast<int>(prog.epilogues.size())});
  prog.epilogues.push_back(ep);

  prog.output_id = "U2";
  return prog;
}

// --- JSON --------------------------------------------------------------------

namespace {

const char* fn_name(FnKind k) {
  switch (k) {
    case FnKind::None: return "none";
    case FnKind::ScaleByInvSqrtDk: return "scale_inv_sqrt_dk";
    case FnKind::Exp: return "exp";
    case FnKind::DivideByRowScalar: return "divide_by_row_scalar";
    case FnKind::AddResidualColumn: return "add_residual_column";
    case FnKind::ReLU: return "relu";
    case FnKind::ScaleByInvM: return "scale_inv_m";
  }
  return "?";
}

const char* src_name(SrcKind k) {
  switch (k) {
    case SrcKind::Cache: return "cache";
    case SrcKind::CacheTransposed: return "cache_transposed";
    case SrcKind::DenseWeight: return "weight";
    case SrcKind::Ones: return "ones";
    case SrcKind::RowOfCache: return "row_of_cache";
  }
  return "?";
}

ordered_json operand_json(const Operand& o) {
  ordered_json j;
  j["kind"] = src_name(o.kind);
  j["id"] = o.id;
  if (o.augment_ones) j["augment_ones"] = true;
  return j;
}

}  // namespace

std::string program_to_json(const LayerProgram& prog) {
  ordered_json j;
  j["layer"] = {{"n_tokens", prog.spec.n_tokens},
                {"hidden", prog.spec.hidden},
                {"ff_width", prog.spec.ff_width},
                {"head_width", prog.spec.head_width},
                {"n_heads", prog.spec.n_heads},
                {"has_attention", prog.spec.has_attention}};
  j["input"] = prog.input_id;
  j["output"] = prog.output_id;

  ordered_json subops = ordered_json::array();
  for (const SubOp& op : prog.subops) {
    ordered_json s;
    s["id"] = op.id;
    s["block"] = op.block;
    s["row"] = op.row;
    if (op.head >= 0) s["head"] = op.head;
    s["type"] = op.kind == MulKind::WeightStationary ? "WS" : "NW";
    s["lhs"] = operand_json(op.lhs);
    s["rhs"] = operand_json(op.rhs);
    s["sessions"] = {{"first", op.sessions.first}, {"last", op.sessions.last}};
    ordered_json fn;
    fn["kind"] = fn_name(op.fn.kind);
    if (!op.fn.payload.empty()) fn["payload"] = op.fn.payload;
    s["fn"] = fn;
    ordered_json dest;
    dest["id"] = op.dest;
    dest["kind"] = op.dest_kind == DestKind::Activation ? "activation"
                   : op.dest_kind == DestKind::Exp      ? "exp"
                                                        : "register";
    dest["mode"] = op.dest_mode == DestMode::Columns ? "columns" : "scalars";
    s["dest"] = dest;
    subops.push_back(s);
  }
  j["subops"] = subops;

  ordered_json concats = ordered_json::array();
  for (const ConcatStep& c : prog.concats)
    concats.push_back({{"sources", c.sources}, {"dest", c.dest}});
  j["concats"] = concats;

  ordered_json eps = ordered_json::array();
  for (const NormEpilogue& e : prog.epilogues)
    eps.push_back({{"u", e.u},
                   {"mean", e.mean},
                   {"meansq", e.meansq},
                   {"dest", e.dest},
                   {"norm_block", e.norm_block}});
  j["epilogues"] = eps;

  ordered_json order = ordered_json::array();
  for (const ProgramStep& st : prog.order) {
    const char* k = st.kind == ProgramStep::Kind::SubOp     ? "subop"
                    : st.kind == ProgramStep::Kind::Concat  ? "concat"
                                                            : "epilogue";
    order.push_back({{"kind", k}, {"index", st.index}});
  }
  j["order"] = order;

  return j.dump(2) + "\n";
}

// --- weight table ------------------------------------------------------------

std::map<std::string, MatD> weight_values(const LayerSpec& spec, const WeightSet& w) {
  w.validate(spec);
  const int m = spec.hidden, h = spec.ff_width, dk = spec.head_width;
  std::map<std::string, MatD> tbl;

  if (spec.has_attention) {
    for (int hd = 0; hd < spec.n_heads; ++hd) {
      tbl[hid("Wq", hd)] = col_slice(w.w_q, hd * dk, dk);
      tbl[hid("Wk", hd)] = col_slice(w.w_k, hd * dk, dk);
      tbl[hid("Wv", hd)] = col_slice(w.w_v, hd * dk, dk);
    }
    tbl["Wo"] = w.w_o;
  }

  MatD wa(m + 1, h);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < h; ++j) wa(i, j) = w.w_a(i, j);
  for (int j = 0; j < h; ++j) wa(m, j) = w.b_a[j];
  tbl["Wa_ba"] = wa;

  MatD wb(h + 1, m);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < m; ++j) wb(i, j) = w.w_b(i, j);
  for (int j = 0; j < m; ++j) wb(h, j) = w.b_b[j];
  tbl["Wb_bb"] = wb;

  return tbl;
}

// --- exact execution ---------------------------------------------------------

namespace {

struct ExactCtx {
  const LayerProgram& prog;
  const WeightSet& w;
  std::map<std::string, MatD> weights;
  ExactBuffers buf;
};

const MatD& need_mat(ExactCtx& ctx, const std::string& id) {
  auto it = ctx.buf.mats.find(id);
  if (it == ctx.buf.mats.end())
    throw Error(errc::scheduling, "operand buffer '" + id + "' not materialized");
  return it->second;
}

const std::vector<double>& need_reg(ExactCtx& ctx, const std::string& id) {
  auto it = ctx.buf.regs.find(id);
  if (it == ctx.buf.regs.end())
    throw Error(errc::scheduling, "register '" + id + "' not materialized");
  return it->second;
}

void run_subop_exact(ExactCtx& ctx, const SubOp& op) {
  const LayerSpec& spec = ctx.prog.spec;
  const int sessions = op.sessions.count();

  // Resolve the stationary part of the lhs.
  const MatD* lhs_full = nullptr;
  if (op.lhs.kind == SrcKind::Cache || op.lhs.kind == SrcKind::RowOfCache)
    lhs_full = &need_mat(ctx, op.lhs.id);
  else
    throw Error(errc::scheduling, "unsupported lhs operand kind");

  const int lhs_cols = lhs_full->cols + (op.lhs.augment_ones ? 1 : 0);
  const int out_rows = op.lhs.kind == SrcKind::RowOfCache ? 1 : lhs_full->rows;

  MatD staged;
  std::vector<double> scalars;
  if (op.dest_mode == DestMode::Columns)
    staged = MatD(out_rows, sessions);
  else
    scalars.assign(sessions, 0.0);

  for (int s = 0; s < sessions; ++s) {
    const int t = op.sessions.first + s;  // 1-based session index

    // lhs rows for this session
    int row_first = 0, row_count = out_rows;
    if (op.lhs.kind == SrcKind::RowOfCache) {
      if (t - 1 >= lhs_full->rows)
        throw Error(errc::scheduling, "session row out of range for '" + op.lhs.id + "'");
      row_first = t - 1;
      row_count = 1;
    }

    // rhs column for this session
    std::vector<double> rhs(lhs_cols, 0.0);
    switch (op.rhs.kind) {
      case SrcKind::DenseWeight: {
        auto it = ctx.weights.find(op.rhs.id);
        if (it == ctx.weights.end())
          throw Error(errc::scheduling, "weight '" + op.rhs.id + "' not found");
        const MatD& wm = it->second;
        if (wm.rows != lhs_cols)
          throw Error(errc::dimension, "weight '" + op.rhs.id + "' rows " +
                                           std::to_string(wm.rows) + " vs lhs cols " +
                                           std::to_string(lhs_cols));
        if (t - 1 >= wm.cols)
          throw Error(errc::scheduling, "session " + std::to_string(t) + " out of weight range");
        for (int i = 0; i < wm.rows; ++i) rhs[i] = wm(i, t - 1);
        break;
      }
      case SrcKind::Cache: {
        const MatD& cm = need_mat(ctx, op.rhs.id);
        if (cm.rows != lhs_cols) throw Error(errc::dimension, "rhs cache column length mismatch");
        if (t - 1 >= cm.cols) throw Error(errc::scheduling, "session out of rhs cache range");
        for (int i = 0; i < cm.rows; ++i) rhs[i] = cm(i, t - 1);
        break;
      }
      case SrcKind::CacheTransposed: {
        const MatD& cm = need_mat(ctx, op.rhs.id);
        if (cm.cols != lhs_cols) throw Error(errc::dimension, "rhs transposed row length mismatch");
        if (t - 1 >= cm.rows) throw Error(errc::scheduling, "session out of rhs row range");
        for (int j = 0; j < cm.cols; ++j) rhs[j] = cm(t - 1, j);
        break;
      }
      case SrcKind::Ones:
        for (int i = 0; i < lhs_cols; ++i) rhs[i] = 1.0;
        break;
      default:
        throw Error(errc::scheduling, "unsupported rhs operand kind");
    }

    // restricted matrix-vector product
    std::vector<double> z(row_count, 0.0);
    for (int r = 0; r < row_count; ++r) {
      double acc = 0.0;
      for (int c = 0; c < lhs_full->cols; ++c)
        acc += (*lhs_full)(row_first + r, c) * rhs[c];
      if (op.lhs.augment_ones) acc += 1.0 * rhs[lhs_full->cols];
      z[r] = acc;
    }

    // additional function
    switch (op.fn.kind) {
      case FnKind::None:
        break;
      case FnKind::ScaleByInvSqrtDk: {
        double f = 1.0 / std::sqrt(static_cast<double>(spec.head_width));
        for (double& v : z) v *= f;
        break;
      }
      case FnKind::Exp:
        for (double& v : z) v = std::exp(v);
        break;
      case FnKind::DivideByRowScalar: {
        const std::vector<double>& a = need_reg(ctx, op.fn.payload);
        if (static_cast<int>(a.size()) != row_count)
          throw Error(errc::dimension, "row-scalar register length mismatch");
        for (int r = 0; r < row_count; ++r) {
          if (!(a[r] > 0.0))
            throw Error(errc::numeric, "row scalar a[" + std::to_string(r) + "] <= 0");
          z[r] /= a[r];
        }
        break;
      }
      case FnKind::AddResidualColumn: {
        const MatD& res = need_mat(ctx, op.fn.payload);
        if (res.rows != row_count || t - 1 >= res.cols)
          throw Error(errc::dimension, "residual column mismatch");
        for (int r = 0; r < row_count; ++r) z[r] += res(r, t - 1);
        break;
      }
      case FnKind::ReLU:
        for (double& v : z) v = std::max(0.0, v);
        break;
      case FnKind::ScaleByInvM: {
        double f = 1.0 / static_cast<double>(lhs_full->cols);
        for (double& v : z) v *= f;
        break;
      }
    }

    if (op.dest_mode == DestMode::Columns) {
      for (int r = 0; r < row_count; ++r) staged(r, s) = z[r];
    } else {
      if (row_count != 1) throw Error(errc::scheduling, "scalar dest expects one row");
      scalars[s] = z[0];
    }
  }

  if (op.dest_mode == DestMode::Columns) {
    if (op.dest_kind == DestKind::Register) {
      if (staged.cols != 1)
        throw Error(errc::scheduling, "column register dest expects a single session");
      ctx.buf.regs[op.dest] = get_col(staged, 0);
    } else {
      ctx.buf.mats[op.dest] = staged;
    }
  } else {
    ctx.buf.regs[op.dest] = scalars;
  }
}

void run_epilogue_exact(ExactCtx& ctx, const NormEpilogue& ep) {
  const MatD& u = need_mat(ctx, ep.u);
  const std::vector<double>& mean = need_reg(ctx, ep.mean);
  const std::vector<double>& meansq = need_reg(ctx, ep.meansq);
  if (static_cast<int>(mean.size()) != u.rows || static_cast<int>(meansq.size()) != u.rows)
    throw Error(errc::dimension, "norm epilogue: register length mismatch");
  const NormParams& p = ep.norm_block == 1 ? ctx.w.norm1 : ctx.w.norm2;
  if (!(p.epsilon > 0)) throw Error(errc::numeric, "norm epsilon must be > 0");

  MatD out(u.rows, u.cols);
  for (int i = 0; i < u.rows; ++i) {
    double var = meansq[i] - mean[i] * mean[i];
    if (var < 0.0) var = 0.0;  // guards fp round-off; analytically var >= 0
    double alpha = p.gamma / std::sqrt(var + p.epsilon);
    for (int j = 0; j < u.cols; ++j) out(i, j) = (u(i, j) - mean[i]) * alpha + p.beta;
  }
  ctx.buf.mats[ep.dest] = out;
}

void run_concat_exact(ExactCtx& ctx, const ConcatStep& c) {
  MatD out;
  for (const std::string& src : c.sources) {
    const MatD& s = need_mat(ctx, src);
    out = out.empty() ? s : hcat(out, s);
  }
  ctx.buf.mats[c.dest] = out;
}

}  // namespace

ExactResult execute_program_exact(const LayerProgram& prog, const MatD& input,
                                  const WeightSet& w) {
  if (input.rows != prog.spec.n_tokens || input.cols != prog.spec.hidden)
    throw Error(errc::dimension, "program input must be n_tokens x hidden");
  ExactCtx ctx{prog, w, weight_values(prog.spec, w), {}};
  ctx.buf.mats[prog.input_id] = input;

  for (const ProgramStep& st : prog.order) {
    switch (st.kind) {
      case ProgramStep::Kind::SubOp: run_subop_exact(ctx, prog.subops[st.index]); break;
      case ProgramStep::Kind::Concat: run_concat_exact(ctx, prog.concats[st.index]); break;
      case ProgramStep::Kind::Epilogue: run_epilogue_exact(ctx, prog.epilogues[st.index]); break;
    }
  }

  ExactResult res;
  res.output = need_mat(ctx, prog.output_id);
  res.buffers = std::move(ctx.buf);
  return res;
}

void execute_subops_exact(const LayerSpec& spec, const std::vector<SubOp>& ops,
                          ExactBuffers& buf, const std::map<std::string, MatD>& weights) {
  static const WeightSet no_weights{};
  LayerProgram scratch;
  scratch.spec = spec;
  ExactCtx ctx{scratch, no_weights, weights, std::move(buf)};
  for (const SubOp& op : ops) run_subop_exact(ctx, op);
  buf = std::move(ctx.buf);
}

MatD execute_attention_phased(const LayerSpec& spec, const WeightSet& w, const MatD& x,
                              int c_k) {
  spec.validate();
  if (spec.n_heads != 1)
    throw Error(errc::scheduling, "phased execution models the single-head flow");
  if (c_k < 1 || c_k > spec.hidden)
    throw Error(errc::range, "c_k must be in [1, hidden]");
  const int n = spec.n_tokens, m = spec.hidden;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(spec.head_width));

  // part (a): column chunks of Q and K' live in T1/T2; the score matrix
  // accumulates rank-c_k partial products in the S cache across phases.
  MatD s_acc(n, n);
  for (int c0 = 0; c0 < m; c0 += c_k) {
    const int cw = std::min(c_k, m - c0);
    MatD qc = matmul(x, col_slice(w.w_q, c0, cw));
    MatD kc = matmul(x, col_slice(w.w_k, c0, cw));
    for (double& v : kc.d) v *= inv_sqrt_dk;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = s_acc(i, j);
        for (int p = 0; p < cw; ++p) acc += qc(i, p) * kc(j, p);
        s_acc(i, j) = acc;
      }
  }
  // final phase applies the exponential in place
  MatD es(n, n);
  for (size_t i = 0; i < es.d.size(); ++i) es.d[i] = std::exp(s_acc.d[i]);

  // row-scalar registers
  std::vector<double> a(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i] += es(i, j);
  for (int i = 0; i < n; ++i)
    if (!(a[i] > 0.0)) throw Error(errc::numeric, "row scalar <= 0");

  // part (b): V chunks in T1, R chunks in T2, Z + X accumulating in D2.
  MatD zx(n, m);
  for (int c0 = 0; c0 < m; c0 += c_k) {
    const int cw = std::min(c_k, m - c0);
    MatD vc = matmul(x, col_slice(w.w_v, c0, cw));
    MatD rc = matmul(es, vc);
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < cw; ++p) rc(i, p) /= a[i];
    // partial projection: rows [c0, c0+cw) of W_o
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        double acc = zx(i, j);
        for (int p = 0; p < cw; ++p) acc += rc(i, p) * w.w_o(c0 + p, j);
        zx(i, j) = acc;
      }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) zx(i, j) += x(i, j);
  return zx;
}

}  // namespace xbar
