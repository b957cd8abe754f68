#include "xbar/model_ir.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace xbar {

void LayerSpec::validate() const {
  if (n_tokens < 1) throw Error(errc::dimension, "n_tokens must be >= 1");
  if (hidden < 1) throw Error(errc::dimension, "hidden must be >= 1");
  if (ff_width < 1) throw Error(errc::dimension, "ff_width must be >= 1");
  if (n_heads < 1) throw Error(errc::dimension, "n_heads must be >= 1");
  if (head_width < 1) throw Error(errc::dimension, "head_width must be >= 1");
  if (n_heads * head_width != hidden)
    throw Error(errc::dimension,
                "n_heads * head_width must equal hidden (" + std::to_string(n_heads) + " * " +
                    std::to_string(head_width) + " != " + std::to_string(hidden) + ")");
}

namespace {

void check_shape(const MatD& m, int r, int c, const char* name) {
  if (m.rows != r || m.cols != c)
    throw Error(errc::dimension, std::string(name) + ": expected " + std::to_string(r) + "x" +
                                     std::to_string(c) + ", got " + std::to_string(m.rows) +
                                     "x" + std::to_string(m.cols));
}

void check_finite(const std::vector<double>& v, const char* name) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error(errc::data, std::string(name) + ": non-finite value");
}

}  // namespace

void WeightSet::validate(const LayerSpec& spec) const {
  spec.validate();
  const int m = spec.hidden, h = spec.ff_width;
  if (spec.has_attention) {
    check_shape(w_q, m, m, "W_q");
    check_shape(w_k, m, m, "W_k");
    check_shape(w_v, m, m, "W_v");
    check_shape(w_o, m, m, "W_o");
    check_finite(w_q.d, "W_q");
    check_finite(w_k.d, "W_k");
    check_finite(w_v.d, "W_v");
    check_finite(w_o.d, "W_o");
    if (norm1.epsilon <= 0) throw Error(errc::data, "norm1 epsilon must be > 0");
  }
  check_shape(w_a, m, h, "W_a");
  check_shape(w_b, h, m, "W_b");
  if (static_cast<int>(b_a.size()) != h) throw Error(errc::dimension, "b_a: wrong length");
  if (static_cast<int>(b_b.size()) != m) throw Error(errc::dimension, "b_b: wrong length");
  check_finite(w_a.d, "W_a");
  check_finite(w_b.d, "W_b");
  check_finite(b_a, "b_a");
  check_finite(b_b, "b_b");
  if (norm2.epsilon <= 0) throw Error(errc::data, "norm2 epsilon must be > 0");
}

int64_t quant_max(int bits) { return (int64_t(1) << (bits - 1)) - 1; }

namespace {

void check_bits(int bits) {
  if (bits < 2 || bits > 16)
    throw Error(errc::range, "quantization width must be in [2,16], got " + std::to_string(bits));
}

}  // namespace

QuantTensor quantize_with_scale(const MatD& t, int bits, double scale) {
  check_bits(bits);
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw Error(errc::range, "quantization scale must be positive and finite");
  const int64_t qmax = quant_max(bits);
  QuantTensor q;
  q.bits = bits;
  q.scale = scale;
  q.data = MatI(t.rows, t.cols);
  for (size_t i = 0; i < t.d.size(); ++i) {
    double v = t.d[i];
    if (!std::isfinite(v)) throw Error(errc::data, "quantize: non-finite value");
    double r = std::round(v / scale);  // half away from zero
    if (r > static_cast<double>(qmax)) r = static_cast<double>(qmax);
    if (r < static_cast<double>(-qmax)) r = static_cast<double>(-qmax);
    q.data.d[i] = static_cast<int32_t>(r);
  }
  return q;
}

QuantTensor quantize(const MatD& t, int bits) {
  check_bits(bits);
  double m = 0.0;
  for (double v : t.d) {
    if (!std::isfinite(v)) throw Error(errc::data, "quantize: non-finite value");
    m = std::max(m, std::fabs(v));
  }
  double scale = (m == 0.0) ? 1.0 : m / static_cast<double>(quant_max(bits));
  return quantize_with_scale(t, bits, scale);
}

MatD dequantize(const QuantTensor& q) {
  MatD t(q.data.rows, q.data.cols);
  for (size_t i = 0; i < t.d.size(); ++i)
    t.d[i] = static_cast<double>(q.data.d[i]) * q.scale;
  return t;
}

uint64_t param_count(const LayerSpec& spec) {
  spec.validate();
  const uint64_t m = spec.hidden, h = spec.ff_width;
  uint64_t n = m * h + h + h * m + m + 3;  // FF weights + biases + norm scalars
  if (spec.has_attention) n += 4 * m * m + 3;
  return n;
}

// --- IO ----------------------------------------------------------------------

void atomic_write_file(const std::string& path, const std::string& contents) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(errc::data, "cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(errc::data, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(errc::data, "rename failed: " + p.string() + ": " + ec.message());
  }
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::data, "cannot open " + path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(errc::schema, path + ": " + e.what());
  }
}

std::string floats_to_bytes(const std::vector<double>& v) {
  std::string s(v.size() * 4, '\0');
  for (size_t i = 0; i < v.size(); ++i) {
    float f = static_cast<float>(v[i]);
    std::memcpy(&s[i * 4], &f, 4);
  }
  return s;
}

struct TensorRef {
  std::string name;
  std::vector<int64_t> shape;
  uint64_t offset = 0;
};

int64_t numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t s : shape) {
    if (s < 1) throw Error(errc::schema, "tensor shape entries must be >= 1");
    n *= s;
  }
  return n;
}

std::vector<double> read_tensor(const std::string& blob, const TensorRef& t) {
  int64_t n = numel(t.shape);
  uint64_t end = t.offset + static_cast<uint64_t>(n) * 4;
  if (end > blob.size())
    throw Error(errc::schema, "tensor '" + t.name + "' extends past end of weight file");
  std::vector<double> v(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    float f;
    std::memcpy(&f, blob.data() + t.offset + i * 4, 4);
    if (!std::isfinite(f))
      throw Error(errc::data, "tensor '" + t.name + "' contains a non-finite value");
    v[static_cast<size_t>(i)] = static_cast<double>(f);
  }
  return v;
}

MatD to_mat(const std::vector<double>& v, int r, int c) {
  MatD m(r, c);
  m.d = v;
  return m;
}

}  // namespace

LoadedLayer load_layer(const std::string& weights_path, const std::string& meta_path) {
  json meta = parse_json_file(meta_path);
  if (!meta.contains("layer") || !meta.contains("tensors"))
    throw Error(errc::schema, meta_path + ": missing 'layer' or 'tensors'");

  LoadedLayer out;
  try {
    const json& l = meta["layer"];
    out.spec.n_tokens = l.at("n_tokens").get<int>();
    out.spec.hidden = l.at("hidden").get<int>();
    out.spec.ff_width = l.at("ff_width").get<int>();
    out.spec.head_width = l.at("head_width").get<int>();
    out.spec.n_heads = l.at("n_heads").get<int>();
    out.spec.has_attention = l.at("has_attention").get<bool>();
  } catch (const json::exception& e) {
    throw Error(errc::schema, meta_path + ": bad 'layer' object: " + e.what());
  }
  out.spec.validate();

  std::map<std::string, TensorRef> refs;
  for (const auto& jt : meta["tensors"]) {
    TensorRef t;
    try {
      t.name = jt.at("name").get<std::string>();
      t.shape = jt.at("shape").get<std::vector<int64_t>>();
      t.offset = jt.at("offset_bytes").get<uint64_t>();
    } catch (const json::exception& e) {
      throw Error(errc::schema, meta_path + ": bad tensor entry: " + e.what());
    }
    if (refs.count(t.name)) throw Error(errc::schema, "duplicate tensor '" + t.name + "'");
    refs[t.name] = t;
  }

  std::string blob = read_file(weights_path);
  const int m = out.spec.hidden, h = out.spec.ff_width;

  auto need = [&](const std::string& name, std::vector<int64_t> shape) -> std::vector<double> {
    auto it = refs.find(name);
    if (it == refs.end()) throw Error(errc::schema, "missing tensor '" + name + "'");
    if (it->second.shape != shape) {
      std::string want, got;
      for (auto s : shape) want += std::to_string(s) + ",";
      for (auto s : it->second.shape) got += std::to_string(s) + ",";
      throw Error(errc::dimension, "tensor '" + name + "': expected shape [" + want +
                                       "], got [" + got + "]");
    }
    return read_tensor(blob, it->second);
  };

  WeightSet& w = out.weights;
  if (out.spec.has_attention) {
    w.w_q = to_mat(need("W_q", {m, m}), m, m);
    w.w_k = to_mat(need("W_k", {m, m}), m, m);
    w.w_v = to_mat(need("W_v", {m, m}), m, m);
    w.w_o = to_mat(need("W_o", {m, m}), m, m);
    w.norm1.gamma = need("norm1_gamma", {1})[0];
    w.norm1.beta = need("norm1_beta", {1})[0];
    w.norm1.epsilon = need("norm1_epsilon", {1})[0];
  }
  w.w_a = to_mat(need("W_a", {m, h}), m, h);
  w.b_a = need("b_a", {h});
  w.w_b = to_mat(need("W_b", {h, m}), h, m);
  w.b_b = need("b_b", {m});
  w.norm2.gamma = need("norm2_gamma", {1})[0];
  w.norm2.beta = need("norm2_beta", {1})[0];
  w.norm2.epsilon = need("norm2_epsilon", {1})[0];

  w.validate(out.spec);
  return out;
}

void save_layer(const std::string& weights_path, const std::string& meta_path,
                const LayerSpec& spec, const WeightSet& w) {
  w.validate(spec);
  std::string blob;
  ordered_json tensors = ordered_json::array();

  auto put = [&](const std::string& name, const std::vector<double>& v,
                 std::vector<int64_t> shape) {
    ordered_json t;
    t["name"] = name;
    t["shape"] = shape;
    t["offset_bytes"] = blob.size();
    tensors.push_back(t);
    blob += floats_to_bytes(v);
  };

  const int m = spec.hidden, h = spec.ff_width;
  if (spec.has_attention) {
    put("W_q", w.w_q.d, {m, m});
    put("W_k", w.w_k.d, {m, m});
    put("W_v", w.w_v.d, {m, m});
    put("W_o", w.w_o.d, {m, m});
  }
  put("W_a", w.w_a.d, {m, h});
  put("b_a", w.b_a, {h});
  put("W_b", w.w_b.d, {h, m});
  put("b_b", w.b_b, {m});
  if (spec.has_attention) {
    put("norm1_gamma", {w.norm1.gamma}, {1});
    put("norm1_beta", {w.norm1.beta}, {1});
    put("norm1_epsilon", {w.norm1.epsilon}, {1});
  }
  put("norm2_gamma", {w.norm2.gamma}, {1});
  put("norm2_beta", {w.norm2.beta}, {1});
  put("norm2_epsilon", {w.norm2.epsilon}, {1});

  ordered_json meta;
  meta["layer"] = {{"n_tokens", spec.n_tokens},     {"hidden", spec.hidden},
                   {"ff_width", spec.ff_width},     {"head_width", spec.head_width},
                   {"n_heads", spec.n_heads},       {"has_attention", spec.has_attention}};
  meta["tensors"] = tensors;

  atomic_write_file(weights_path, blob);
  atomic_write_file(meta_path, meta.dump(2) + "\n");
}

MatD load_matrix(const std::string& data_path, const std::string& meta_path) {
  json meta = parse_json_file(meta_path);
  int r, c;
  try {
    r = meta.at("rows").get<int>();
    c = meta.at("cols").get<int>();
  } catch (const json::exception& e) {
    throw Error(errc::schema, meta_path + ": " + e.what());
  }
  if (r < 1 || c < 1) throw Error(errc::schema, meta_path + ": rows/cols must be >= 1");
  std::string blob = read_file(data_path);
  if (blob.size() != static_cast<size_t>(r) * c * 4)
    throw Error(errc::schema, data_path + ": size " + std::to_string(blob.size()) +
                                  " does not match " + std::to_string(r) + "x" +
                                  std::to_string(c) + " f32");
  MatD m(r, c);
  for (size_t i = 0; i < m.d.size(); ++i) {
    float f;
    std::memcpy(&f, blob.data() + i * 4, 4);
    if (!std::isfinite(f)) throw Error(errc::data, data_path + ": non-finite value");
    m.d[i] = static_cast<double>(f);
  }
  return m;
}

void save_matrix(const std::string& data_path, const std::string& meta_path, const MatD& m) {
  atomic_write_file(data_path, floats_to_bytes(m.d));
  ordered_json meta;
  meta["rows"] = m.rows;
  meta["cols"] = m.cols;
  meta["dtype"] = "f32";
  atomic_write_file(meta_path, meta.dump(2) + "\n");
}

}  // namespace xbar
