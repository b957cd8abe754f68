#include "xbar/compute_crossbar.hpp"

#include <cmath>

#include "json.hpp"

using nlohmann::ordered_json;

namespace xbar {

void CrossbarConfig::validate() const {
  if (rows < 1 || cols < 1) throw Error(errc::config, "crossbar needs rows, cols >= 1");
  if (dup_factor < 1 || dup_factor > cols)
    throw Error(errc::config, "dup_factor must be in [1, cols]");
  if (scale_factor < 1 || scale_factor > 8)
    throw Error(errc::config, "scale_factor must be in [1, 8]");
  if (adc_bits != 0 && (adc_bits < 2 || adc_bits > 32))
    throw Error(errc::config, "adc_bits must be 0 (ideal) or in [2, 32]");
  if (dac_bits < 1 || dac_bits > 16) throw Error(errc::config, "dac_bits must be in [1, 16]");
  if (noise_fraction < 0.0 || noise_fraction >= 1.0)
    throw Error(errc::config, "noise_fraction must be in [0, 1)");
  if (activation_bits < 2 || activation_bits > 16)
    throw Error(errc::config, "activation_bits must be in [2, 16]");
  if (weight_bits < 2 || weight_bits > 16)
    throw Error(errc::config, "weight_bits must be in [2, 16]");
  if (exp_bits < 2 || exp_bits > 16) throw Error(errc::config, "exp_bits must be in [2, 16]");
}

AdcModel AdcModel::for_weights(const CrossbarConfig& cfg, const std::vector<int32_t>& weights) {
  AdcModel m;
  m.noise_fraction = cfg.noise_fraction;
  m.adc_bits = cfg.adc_bits;
  if (cfg.adc_bits > 0) {
    // full scale: worst-case column magnitude with these weights loaded
    int64_t bound = (int64_t(1) << cfg.scale_factor) - 1;
    int64_t full_scale = 0;
    for (int32_t w : weights) full_scale += std::llabs(w) * bound;
    m.code_max = (int64_t(1) << (cfg.adc_bits - 1)) - 1;
    m.lsb = full_scale <= m.code_max ? 1 : (full_scale + m.code_max - 1) / m.code_max;
  }
  return m;
}

int64_t apply_noise_and_adc(double analog_sum, const AdcModel& adc, Rng& rng) {
  double v = analog_sum;
  if (adc.noise_fraction > 0.0) {
    double eps = rng.normal() * (adc.noise_fraction / 3.0);
    if (eps > adc.noise_fraction) eps = adc.noise_fraction;
    if (eps < -adc.noise_fraction) eps = -adc.noise_fraction;
    v *= 1.0 + eps;
  }
  if (adc.adc_bits <= 0) return std::llround(v);
  int64_t code = std::llround(v / static_cast<double>(adc.lsb));
  if (code > adc.code_max) code = adc.code_max;    // clamp, not wrap
  if (code < -adc.code_max) code = -adc.code_max;
  return code * adc.lsb;
}

namespace {

// Shared MAC kernel; `codes` are pointers so callers can splice in synthetic
// columns (the bias-fold ones column) without copying.
int64_t mac_core(const int32_t* weights, const DigitCode* const* codes, int count,
                 const EncodingScheme& scheme, const AdcModel* adc, Rng* rng) {
  for (int i = 0; i < count; ++i)
    if (static_cast<int>(codes[i]->digits.size()) != scheme.n_digits)
      throw Error(errc::encoding, "activation code length does not match the scheme");

  int64_t acc = 0;
  for (int k = 0; k < scheme.n_digits; ++k) {
    int64_t column = 0;
    for (int i = 0; i < count; ++i)
      column += static_cast<int64_t>(weights[i]) * codes[i]->digits[k];
    int64_t readout = column;
    if (adc != nullptr && rng != nullptr)
      readout = apply_noise_and_adc(static_cast<double>(column), *adc, *rng);
    if (k == 0)
      acc = readout;
    else
      acc = shift_add_base_multiply(acc, scheme.scale_factor) + readout;
  }
  return acc;
}

}  // namespace

int64_t mac_digit_serial(const std::vector<int32_t>& weights,
                         const std::vector<DigitCode>& codes, const EncodingScheme& scheme,
                         const AdcModel* adc, Rng* rng) {
  if (weights.size() != codes.size())
    throw Error(errc::dimension, "mac: weight / activation count mismatch");
  std::vector<const DigitCode*> ptrs(codes.size());
  for (size_t i = 0; i < codes.size(); ++i) ptrs[i] = &codes[i];
  return mac_core(weights.data(), ptrs.data(), static_cast<int>(codes.size()), scheme, adc,
                  rng);
}

EnergyCounters& EnergyCounters::operator+=(const EnergyCounters& o) {
  dac += o.dac;
  adc += o.adc;
  shift_add += o.shift_add;
  f_unit += o.f_unit;
  encoder += o.encoder;
  sample_hold += o.sample_hold;
  register_bits += o.register_bits;
  cache_read_bits += o.cache_read_bits;
  cache_write_bits += o.cache_write_bits;
  dense_cell_reads += o.dense_cell_reads;
  return *this;
}

// --- run_subop ---------------------------------------------------------------

RunSubOpResult run_subop(const SubOp& op, QBuffers& buf, const DenseDevice* dense,
                         const WeightLayout* layout, const LayerSpec& spec,
                         const CrossbarConfig& cfg,
                         const std::map<std::string, double>& dest_scales, uint64_t seed,
                         bool keep_session_outputs) {
  cfg.validate();

  auto lit = buf.mats.find(op.lhs.id);
  if (lit == buf.mats.end())
    throw Error(errc::scheduling, "lhs buffer '" + op.lhs.id + "' not materialized");
  const QuantTensor& L = lit->second;

  const bool row_mode = op.lhs.kind == SrcKind::RowOfCache;
  if (!row_mode && op.lhs.kind != SrcKind::Cache)
    throw Error(errc::scheduling, "unsupported lhs operand kind");
  if (row_mode && op.dest_mode != DestMode::Scalars)
    throw Error(errc::scheduling, "row-wise lhs requires a scalar destination");
  if (!row_mode && op.dest_mode != DestMode::Columns)
    throw Error(errc::scheduling, "matrix lhs requires a column destination");

  const int lhs_dims = L.data.cols;
  const int p = lhs_dims + (op.lhs.augment_ones ? 1 : 0);
  const int sessions = op.sessions.count();
  const int act_rows = row_mode ? 1 : L.data.rows;
  const int batches = (p + cfg.rows - 1) / cfg.rows;
  const EncodingScheme scheme = cfg.scheme_for_bits(L.bits);

  // bias-fold ones column, expressed on the lhs quantization grid
  int64_t q_one = 0;
  if (op.lhs.augment_ones) {
    q_one = std::llround(1.0 / L.scale);
    if (q_one > quant_max(L.bits))
      throw Error(errc::range, "ones column not representable at scale of '" + op.lhs.id +
                                   "' (calibrate with max(|x|, 1))");
  }

  // Activation codes are a function of the stored values only, so encode once
  // and reuse across sessions; the per-session register streaming is still
  // charged below.
  std::vector<std::vector<DigitCode>> codes(L.data.rows);
  for (int r = 0; r < L.data.rows; ++r) {
    codes[r].reserve(lhs_dims);
    for (int c = 0; c < lhs_dims; ++c) codes[r].push_back(encode(L.data(r, c), scheme));
  }
  DigitCode one_code;
  if (op.lhs.augment_ones) one_code = encode(q_one, scheme);

  RunSubOpResult result;
  SubOpTrace& tr = result.trace;
  tr.subop_id = op.id;
  tr.block = op.block;
  tr.row = op.row;
  tr.head = op.head;
  tr.dest = op.dest;
  tr.sessions = sessions;
  tr.n_digits = scheme.n_digits;
  tr.act_rows = act_rows;
  tr.row_batches = batches;

  MatD staged;
  std::vector<double> scalars;
  if (op.dest_mode == DestMode::Columns)
    staged = MatD(act_rows, sessions);
  else
    scalars.assign(sessions, 0.0);

  std::vector<const DigitCode*> rowptr(p);
  std::vector<int32_t> rhs_ints;

  for (int s = 0; s < sessions; ++s) {
    const int t = op.sessions.first + s;
    Rng rng = session_rng(seed, op.id, t);
    SessionTrace st;
    st.session = t;

    // --- resolve the rhs column ------------------------------------------
    double rscale = 1.0;
    int rbits = 0;
    rhs_ints.assign(p, 1);
    switch (op.rhs.kind) {
      case SrcKind::DenseWeight: {
        if (dense == nullptr || layout == nullptr)
          throw Error(errc::scheduling, "weight-stationary sub-op without a dense device");
        const WeightEntry& e = layout->entry(op.rhs.id);
        if (e.weights_per_column != p)
          throw Error(errc::dimension, "weight '" + op.rhs.id + "' column length " +
                                           std::to_string(e.weights_per_column) +
                                           " vs lhs width " + std::to_string(p));
        rhs_ints = dense->read_weight_column(*layout, op.rhs.id, t, &rng);
        rscale = e.scale;
        rbits = e.bits;
        tr.weight_bits_streamed += static_cast<uint64_t>(p) * e.bits;
        tr.energy.dense_cell_reads +=
            static_cast<uint64_t>(p) * e.bits / dense->config().bits_per_cell;
        break;
      }
      case SrcKind::Cache: {
        auto rit = buf.mats.find(op.rhs.id);
        if (rit == buf.mats.end())
          throw Error(errc::scheduling, "rhs buffer '" + op.rhs.id + "' not materialized");
        const QuantTensor& R = rit->second;
        if (R.data.rows != p) throw Error(errc::dimension, "rhs cache column length mismatch");
        if (t - 1 >= R.data.cols) throw Error(errc::scheduling, "session out of rhs range");
        for (int i = 0; i < p; ++i) rhs_ints[i] = R.data(i, t - 1);
        rscale = R.scale;
        rbits = R.bits;
        break;
      }
      case SrcKind::CacheTransposed: {
        auto rit = buf.mats.find(op.rhs.id);
        if (rit == buf.mats.end())
          throw Error(errc::scheduling, "rhs buffer '" + op.rhs.id + "' not materialized");
        const QuantTensor& R = rit->second;
        if (R.data.cols != p) throw Error(errc::dimension, "rhs transposed row length mismatch");
        if (t - 1 >= R.data.rows) throw Error(errc::scheduling, "session out of rhs range");
        for (int j = 0; j < p; ++j) rhs_ints[j] = R.data(t - 1, j);
        rscale = R.scale;
        rbits = R.bits;
        break;
      }
      case SrcKind::Ones:
        rscale = 1.0;
        rbits = 0;  // generated, not fetched
        break;
      default:
        throw Error(errc::scheduling, "unsupported rhs operand kind");
    }
    if (rbits > 0) {
      tr.activation_bits_read += static_cast<uint64_t>(p) * rbits;
      tr.energy.cache_read_bits += static_cast<uint64_t>(p) * rbits;
    }
    tr.energy.dac += static_cast<uint64_t>(p);
    st.weights_loaded = p;

    // --- lhs rows for this session ----------------------------------------
    int row0 = 0, rows_this = act_rows;
    if (row_mode) {
      if (t - 1 >= L.data.rows)
        throw Error(errc::scheduling, "session row out of range for '" + op.lhs.id + "'");
      row0 = t - 1;
      rows_this = 1;
    }

    const AdcModel adc = AdcModel::for_weights(cfg, rhs_ints);
    std::vector<double> z_real(rows_this, 0.0);

    for (int r = 0; r < rows_this; ++r) {
      for (int c = 0; c < lhs_dims; ++c) rowptr[c] = &codes[row0 + r][c];
      if (op.lhs.augment_ones) rowptr[lhs_dims] = &one_code;

      int64_t z = 0;
      for (int b = 0; b < batches; ++b) {
        const int c0 = b * cfg.rows;
        const int cw = std::min(cfg.rows, p - c0);
        if (cfg.direct_mac) {
          int64_t acc = 0;
          for (int i = 0; i < cw; ++i)
            acc += static_cast<int64_t>(rhs_ints[c0 + i]) *
                   decode(*rowptr[c0 + i], scheme);
          z += acc;
        } else {
          z += mac_core(rhs_ints.data() + c0, rowptr.data() + c0, cw, scheme,
                        cfg.noise_fraction > 0.0 || cfg.adc_bits > 0 ? &adc : nullptr, &rng);
        }
      }
      z_real[r] = static_cast<double>(z) * L.scale * rscale;
    }

    // --- additional function ----------------------------------------------
    switch (op.fn.kind) {
      case FnKind::None:
        break;
      case FnKind::ScaleByInvSqrtDk: {
        double f = 1.0 / std::sqrt(static_cast<double>(spec.head_width));
        for (double& v : z_real) v *= f;
        break;
      }
      case FnKind::Exp:
        for (double& v : z_real) v = std::exp(v);
        break;
      case FnKind::DivideByRowScalar: {
        auto ait = buf.regs.find(op.fn.payload);
        if (ait == buf.regs.end())
          throw Error(errc::scheduling, "register '" + op.fn.payload + "' not materialized");
        const std::vector<double>& a = ait->second;
        if (static_cast<int>(a.size()) != rows_this)
          throw Error(errc::dimension, "row-scalar register length mismatch");
        for (int r = 0; r < rows_this; ++r) {
          if (!(a[r] > 0.0))
            throw Error(errc::numeric, "row scalar a[" + std::to_string(r) + "] <= 0");
          z_real[r] /= a[r];
        }
        break;
      }
      case FnKind::AddResidualColumn: {
        auto mit = buf.mats.find(op.fn.payload);
        if (mit == buf.mats.end())
          throw Error(errc::scheduling, "residual buffer '" + op.fn.payload + "' missing");
        const QuantTensor& res = mit->second;
        if (res.data.rows != rows_this || t - 1 >= res.data.cols)
          throw Error(errc::dimension, "residual column mismatch");
        for (int r = 0; r < rows_this; ++r)
          z_real[r] += static_cast<double>(res.data(r, t - 1)) * res.scale;
        tr.activation_bits_read += static_cast<uint64_t>(rows_this) * res.bits;
        tr.energy.cache_read_bits += static_cast<uint64_t>(rows_this) * res.bits;
        break;
      }
      case FnKind::ReLU:
        for (double& v : z_real) v = std::max(0.0, v);
        break;
      case FnKind::ScaleByInvM: {
        double f = 1.0 / static_cast<double>(lhs_dims);
        for (double& v : z_real) v *= f;
        break;
      }
    }

    if (op.dest_mode == DestMode::Columns) {
      for (int r = 0; r < rows_this; ++r) staged(r, s) = z_real[r];
    } else {
      scalars[s] = z_real[0];
    }

    // --- per-session accounting --------------------------------------------
    const uint64_t column_reads =
        static_cast<uint64_t>(rows_this) * scheme.n_digits * batches;
    st.steps = static_cast<uint64_t>(scheme.n_digits) *
               ((rows_this + cfg.dup_factor - 1) / cfg.dup_factor) * batches;
    st.energy.adc += column_reads;
    st.energy.sample_hold += column_reads;
    st.energy.shift_add += column_reads;
    st.energy.encoder += static_cast<uint64_t>(rows_this) * p;
    st.energy.register_bits += static_cast<uint64_t>(rows_this) * p * scheme.n_digits *
                               (cfg.scale_factor + 1);
    if (op.fn.kind != FnKind::None) st.energy.f_unit += static_cast<uint64_t>(rows_this);
    // lhs re-streamed from its cache every session
    tr.activation_bits_read += static_cast<uint64_t>(rows_this) * lhs_dims * L.bits;
    st.energy.cache_read_bits += static_cast<uint64_t>(rows_this) * lhs_dims * L.bits;

    tr.steps += st.steps;
    tr.energy += st.energy;
    if (keep_session_outputs) {
      st.outputs = op.dest_mode == DestMode::Columns ? get_col(staged, s)
                                                     : std::vector<double>{scalars[s]};
      result.sessions.push_back(std::move(st));
    }
  }

  // --- destination write ---------------------------------------------------
  auto check_capacity = [&](size_t elements) {
    auto cit = buf.capacity.find(op.dest);
    if (cit != buf.capacity.end() && elements > cit->second)
      throw Error(errc::capacity, "buffer '" + op.dest + "' needs " + std::to_string(elements) +
                                      " elements, cap is " + std::to_string(cit->second));
  };

  if (op.dest_mode == DestMode::Scalars) {
    check_capacity(scalars.size());
    buf.regs[op.dest] = scalars;
  } else if (op.dest_kind == DestKind::Register) {
    if (staged.cols != 1)
      throw Error(errc::scheduling, "column register dest expects a single session");
    check_capacity(staged.size());
    buf.regs[op.dest] = get_col(staged, 0);
  } else {
    const int bits = op.dest_kind == DestKind::Exp ? cfg.exp_bits : cfg.activation_bits;
    check_capacity(staged.size());
    auto sit = dest_scales.find(op.dest);
    QuantTensor qt = sit != dest_scales.end() ? quantize_with_scale(staged, bits, sit->second)
                                              : quantize(staged, bits);
    tr.energy.cache_write_bits += static_cast<uint64_t>(staged.size()) * bits;
    buf.mats[op.dest] = std::move(qt);
  }

  return result;
}

// --- Simulator ---------------------------------------------------------------

namespace {

std::map<std::string, QuantTensor> quantize_weight_table(const LayerSpec& spec,
                                                         const WeightSet& w,
                                                         const CrossbarConfig& cfg) {
  std::map<std::string, QuantTensor> q;
  for (const auto& [id, mat] : weight_values(spec, w)) q[id] = quantize(mat, cfg.weight_bits);

  auto put_scalar = [&](const std::string& id, double v) {
    MatD m(1, 1);
    m(0, 0) = v;
    q[id] = quantize(m, cfg.weight_bits);  // one-element tensors round-trip exactly
  };
  if (spec.has_attention) {
    put_scalar("norm1.gamma", w.norm1.gamma);
    put_scalar("norm1.beta", w.norm1.beta);
    put_scalar("norm1.epsilon", w.norm1.epsilon);
  }
  put_scalar("norm2.gamma", w.norm2.gamma);
  put_scalar("norm2.beta", w.norm2.beta);
  put_scalar("norm2.epsilon", w.norm2.epsilon);
  return q;
}

}  // namespace

Simulator::Simulator(const LayerSpec& spec, const WeightSet& w, const CrossbarConfig& cfg,
                     const DenseConfig& dense_cfg)
    : spec_(spec), w_(w), cfg_(cfg), dense_(dense_cfg) {
  spec_.validate();
  w_.validate(spec_);
  cfg_.validate();
  if (cfg_.weight_bits % 8 != 0)
    throw Error(errc::config, "dense packing requires byte-multiple weight_bits");
  prog_ = build_layer_program(spec_);
  layout_ = dense_.store_weights(quantize_weight_table(spec_, w_, cfg_));
  if (layout_.mapped_bits != param_count(spec_) * static_cast<uint64_t>(cfg_.weight_bits))
    throw Error(errc::accounting, "mapped weight bits do not match the declared parameter count");
}

SimResult Simulator::run(const MatD& input, uint64_t seed) {
  if (input.rows != spec_.n_tokens || input.cols != spec_.hidden)
    throw Error(errc::dimension, "input must be n_tokens x hidden");

  // Calibration dry run: full-precision execution fixes every buffer's
  // quantization scale, so phased/unphased and digit-serial/direct schedules
  // all quantize identically.
  ExactResult exact = execute_program_exact(prog_, input, w_);

  std::map<std::string, bool> augmented;
  for (const SubOp& op : prog_.subops)
    if (op.lhs.augment_ones) augmented[op.lhs.id] = true;

  std::map<std::string, int> buffer_bits;
  buffer_bits[prog_.input_id] = cfg_.activation_bits;
  for (const SubOp& op : prog_.subops)
    if (op.dest_kind != DestKind::Register)
      buffer_bits[op.dest] = op.dest_kind == DestKind::Exp ? cfg_.exp_bits : cfg_.activation_bits;
  for (const ConcatStep& c : prog_.concats) buffer_bits[c.dest] = cfg_.activation_bits;
  for (const NormEpilogue& e : prog_.epilogues) buffer_bits[e.dest] = cfg_.activation_bits;

  std::map<std::string, double> scales;
  for (const auto& [id, bits] : buffer_bits) {
    const MatD* m = nullptr;
    if (id == prog_.input_id)
      m = &input;
    else {
      auto it = exact.buffers.mats.find(id);
      if (it == exact.buffers.mats.end())
        throw Error(errc::scheduling, "calibration did not materialize '" + id + "'");
      m = &it->second;
    }
    double top = max_abs(*m);
    if (augmented.count(id)) top = std::max(top, 1.0);
    scales[id] = top == 0.0 ? 1.0 : top / static_cast<double>(quant_max(bits));
  }

  QBuffers buf;
  buf.mats[prog_.input_id] =
      quantize_with_scale(input, cfg_.activation_bits, scales.at(prog_.input_id));

  SimResult res;
  LayerTrace& trace = res.trace;
  trace.param_count = param_count(spec_);
  trace.input_elements = static_cast<uint64_t>(input.rows) * input.cols;
  trace.scales = scales;

  for (const ProgramStep& step : prog_.order) {
    switch (step.kind) {
      case ProgramStep::Kind::SubOp: {
        const SubOp& op = prog_.subops[step.index];
        RunSubOpResult r = run_subop(op, buf, &dense_, &layout_, spec_, cfg_, scales, seed);
        trace.steps += r.trace.steps;
        trace.weight_bits_streamed += r.trace.weight_bits_streamed;
        trace.activation_bits_read += r.trace.activation_bits_read;
        trace.energy += r.trace.energy;
        trace.subops.push_back(std::move(r.trace));
        break;
      }
      case ProgramStep::Kind::Concat: {
        const ConcatStep& c = prog_.concats[step.index];
        MatD glued;
        uint64_t read_bits = 0;
        for (const std::string& src : c.sources) {
          auto it = buf.mats.find(src);
          if (it == buf.mats.end())
            throw Error(errc::scheduling, "concat source '" + src + "' not materialized");
          read_bits += static_cast<uint64_t>(it->second.data.size()) * it->second.bits;
          MatD part = dequantize(it->second);
          glued = glued.empty() ? part : hcat(glued, part);
        }
        QuantTensor qt =
            quantize_with_scale(glued, cfg_.activation_bits, scales.at(c.dest));
        trace.energy.cache_read_bits += read_bits;
        trace.energy.cache_write_bits +=
            static_cast<uint64_t>(qt.data.size()) * cfg_.activation_bits;
        buf.mats[c.dest] = std::move(qt);
        break;
      }
      case ProgramStep::Kind::Epilogue: {
        const NormEpilogue& ep = prog_.epilogues[step.index];
        auto uit = buf.mats.find(ep.u);
        if (uit == buf.mats.end())
          throw Error(errc::scheduling, "epilogue buffer '" + ep.u + "' not materialized");
        auto mit = buf.regs.find(ep.mean);
        auto sit = buf.regs.find(ep.meansq);
        if (mit == buf.regs.end() || sit == buf.regs.end())
          throw Error(errc::scheduling, "epilogue registers not materialized");
        const NormParams& p = ep.norm_block == 1 ? w_.norm1 : w_.norm2;

        MatD u = dequantize(uit->second);
        const std::vector<double>& mean = mit->second;
        const std::vector<double>& meansq = sit->second;
        if (static_cast<int>(mean.size()) != u.rows)
          throw Error(errc::dimension, "epilogue register length mismatch");

        MatD out(u.rows, u.cols);
        for (int i = 0; i < u.rows; ++i) {
          double var = meansq[i] - mean[i] * mean[i];
          if (var < 0.0) var = 0.0;
          double alpha = p.gamma / std::sqrt(var + p.epsilon);
          for (int j = 0; j < u.cols; ++j) out(i, j) = (u(i, j) - mean[i]) * alpha + p.beta;
        }
        QuantTensor qt = quantize_with_scale(out, cfg_.activation_bits, scales.at(ep.dest));

        trace.epilogue_ops += static_cast<uint64_t>(u.rows);
        trace.energy.f_unit += static_cast<uint64_t>(u.rows);
        trace.energy.cache_read_bits +=
            static_cast<uint64_t>(uit->second.data.size()) * uit->second.bits;
        trace.energy.cache_write_bits +=
            static_cast<uint64_t>(qt.data.size()) * cfg_.activation_bits;
        // the three norm scalars stream from the dense store once per block
        trace.weight_bits_streamed += 3ull * cfg_.weight_bits;
        trace.energy.dense_cell_reads +=
            3ull * cfg_.weight_bits / dense_.config().bits_per_cell;
        buf.mats[ep.dest] = std::move(qt);
        break;
      }
    }
  }

  auto oit = buf.mats.find(prog_.output_id);
  if (oit == buf.mats.end())
    throw Error(errc::scheduling, "program did not produce '" + prog_.output_id + "'");
  res.output = dequantize(oit->second);
  return res;
}

// --- trace JSON ----------------------------------------------------------------

namespace {

ordered_json energy_json(const EnergyCounters& e) {
  ordered_json j;
  j["dac"] = e.dac;
  j["adc"] = e.adc;
  j["shift_add"] = e.shift_add;
  j["f_unit"] = e.f_unit;
  j["encoder"] = e.encoder;
  j["sample_hold"] = e.sample_hold;
  j["register_bits"] = e.register_bits;
  j["cache_read_bits"] = e.cache_read_bits;
  j["cache_write_bits"] = e.cache_write_bits;
  j["dense_cell_reads"] = e.dense_cell_reads;
  return j;
}

EnergyCounters energy_from_json(const nlohmann::json& j) {
  EnergyCounters e;
  e.dac = j.at("dac").get<uint64_t>();
  e.adc = j.at("adc").get<uint64_t>();
  e.shift_add = j.at("shift_add").get<uint64_t>();
  e.f_unit = j.at("f_unit").get<uint64_t>();
  e.encoder = j.at("encoder").get<uint64_t>();
  e.sample_hold = j.at("sample_hold").get<uint64_t>();
  e.register_bits = j.at("register_bits").get<uint64_t>();
  e.cache_read_bits = j.at("cache_read_bits").get<uint64_t>();
  e.cache_write_bits = j.at("cache_write_bits").get<uint64_t>();
  e.dense_cell_reads = j.at("dense_cell_reads").get<uint64_t>();
  return e;
}

}  // namespace

std::string trace_to_json(const LayerTrace& trace, const CrossbarConfig& cfg) {
  ordered_json j;
  j["config"] = {{"rows", cfg.rows},
                 {"cols", cfg.cols},
                 {"dup_factor", cfg.dup_factor},
                 {"scale_factor", cfg.scale_factor},
                 {"adc_bits", cfg.adc_bits},
                 {"dac_bits", cfg.dac_bits},
                 {"noise_fraction", cfg.noise_fraction},
                 {"activation_bits", cfg.activation_bits},
                 {"weight_bits", cfg.weight_bits},
                 {"exp_bits", cfg.exp_bits},
                 {"register_bits", cfg.register_bits},
                 {"registers_per_column", cfg.registers_per_column}};
  j["totals"] = {{"steps", trace.steps},
                 {"weight_bits_streamed", trace.weight_bits_streamed},
                 {"activation_bits_read", trace.activation_bits_read},
                 {"epilogue_ops", trace.epilogue_ops},
                 {"param_count", trace.param_count},
                 {"input_elements", trace.input_elements}};
  j["energy"] = energy_json(trace.energy);
  ordered_json scales;
  for (const auto& [id, s] : trace.scales) scales[id] = s;
  j["scales"] = scales;

  ordered_json subops = ordered_json::array();
  for (const SubOpTrace& t : trace.subops) {
    ordered_json s;
    s["id"] = t.subop_id;
    s["block"] = t.block;
    s["row"] = t.row;
    if (t.head >= 0) s["head"] = t.head;
    s["dest"] = t.dest;
    s["sessions"] = t.sessions;
    s["n_digits"] = t.n_digits;
    s["act_rows"] = t.act_rows;
    s["row_batches"] = t.row_batches;
    s["steps"] = t.steps;
    s["weight_bits_streamed"] = t.weight_bits_streamed;
    s["activation_bits_read"] = t.activation_bits_read;
    s["energy"] = energy_json(t.energy);
    subops.push_back(s);
  }
  j["subops"] = subops;
  return j.dump(2) + "\n";
}

LayerTrace trace_from_json(const std::string& text, CrossbarConfig* cfg_out) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(errc::schema, std::string("trace JSON: ") + e.what());
  }
  try {
    if (cfg_out != nullptr) {
      const auto& c = j.at("config");
      cfg_out->rows = c.at("rows").get<int>();
      cfg_out->cols = c.at("cols").get<int>();
      cfg_out->dup_factor = c.at("dup_factor").get<int>();
      cfg_out->scale_factor = c.at("scale_factor").get<int>();
      cfg_out->adc_bits = c.at("adc_bits").get<int>();
      cfg_out->dac_bits = c.at("dac_bits").get<int>();
      cfg_out->noise_fraction = c.at("noise_fraction").get<double>();
      cfg_out->activation_bits = c.at("activation_bits").get<int>();
      cfg_out->weight_bits = c.at("weight_bits").get<int>();
      cfg_out->exp_bits = c.at("exp_bits").get<int>();
      cfg_out->register_bits = c.at("register_bits").get<int>();
      cfg_out->registers_per_column = c.at("registers_per_column").get<int>();
    }
    LayerTrace tr;
    const auto& tot = j.at("totals");
    tr.steps = tot.at("steps").get<uint64_t>();
    tr.weight_bits_streamed = tot.at("weight_bits_streamed").get<uint64_t>();
    tr.activation_bits_read = tot.at("activation_bits_read").get<uint64_t>();
    tr.epilogue_ops = tot.at("epilogue_ops").get<uint64_t>();
    tr.param_count = tot.at("param_count").get<uint64_t>();
    tr.input_elements = tot.at("input_elements").get<uint64_t>();
    tr.energy = energy_from_json(j.at("energy"));
    for (const auto& [id, s] : j.at("scales").items())
      tr.scales[id] = s.get<double>();
    for (const auto& s : j.at("subops")) {
      SubOpTrace t;
      t.subop_id = s.at("id").get<int>();
      t.block = s.at("block").get<std::string>();
      t.row = s.at("row").get<int>();
      if (s.contains("head")) t.head = s.at("head").get<int>();
      t.dest = s.at("dest").get<std::string>();
      t.sessions = s.at("sessions").get<int>();
      t.n_digits = s.at("n_digits").get<int>();
      t.act_rows = s.at("act_rows").get<int>();
      t.row_batches = s.at("row_batches").get<int>();
      t.steps = s.at("steps").get<uint64_t>();
      t.weight_bits_streamed = s.at("weight_bits_streamed").get<uint64_t>();
      t.activation_bits_read = s.at("activation_bits_read").get<uint64_t>();
      t.energy = energy_from_json(s.at("energy"));
      tr.subops.push_back(std::move(t));
    }
    return tr;
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::schema, std::string("trace JSON: ") + e.what());
  }
}

}  // namespace xbar
