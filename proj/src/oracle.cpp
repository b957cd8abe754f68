#include "xbar/oracle.hpp"

#include <cmath>
#include <limits>

namespace xbar {

MatD softmax_rows(const MatD& s, bool stabilized) {
  MatD y(s.rows, s.cols);
  for (int i = 0; i < s.rows; ++i) {
    double shift = 0.0;
    if (stabilized) {
      shift = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < s.cols; ++j) shift = std::max(shift, s(i, j));
    }
    double sum = 0.0;
    for (int j = 0; j < s.cols; ++j) {
      double e = std::exp(s(i, j) - shift);
      y(i, j) = e;
      sum += e;
    }
    if (!(sum > 0.0) || !std::isfinite(sum))
      throw Error(errc::numeric, "softmax: row sum not positive/finite");
    for (int j = 0; j < s.cols; ++j) y(i, j) /= sum;
  }
  return y;
}

MatD attention_forward(const MatD& x, const WeightSet& w, const LayerSpec& spec,
                       bool causal, bool stabilized) {
  spec.validate();
  if (!spec.has_attention)
    throw Error(errc::scheduling, "attention_forward on a layer without attention");
  if (x.rows != spec.n_tokens || x.cols != spec.hidden)
    throw Error(errc::dimension, "attention input must be n_tokens x hidden");

  const int dk = spec.head_width;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  MatD y_cat(x.rows, spec.hidden);

  for (int head = 0; head < spec.n_heads; ++head) {
    MatD wq = col_slice(w.w_q, head * dk, dk);
    MatD wk = col_slice(w.w_k, head * dk, dk);
    MatD wv = col_slice(w.w_v, head * dk, dk);
    MatD q = matmul(x, wq);
    MatD k = matmul(x, wk);
    MatD v = matmul(x, wv);

    MatD s = matmul(q, transpose(k));
    for (double& e : s.d) e *= inv_sqrt_dk;
    if (causal) {
      for (int i = 0; i < s.rows; ++i)
        for (int j = i + 1; j < s.cols; ++j)
          s(i, j) = -std::numeric_limits<double>::infinity();
    }
    MatD y = matmul(softmax_rows(s, stabilized), v);
    for (int i = 0; i < y.rows; ++i)
      for (int j = 0; j < dk; ++j) y_cat(i, head * dk + j) = y(i, j);
  }
  return matmul(y_cat, w.w_o);
}

MatD feedforward_forward(const MatD& x, const WeightSet& w, const LayerSpec& spec) {
  spec.validate();
  if (x.rows != spec.n_tokens || x.cols != spec.hidden)
    throw Error(errc::dimension, "feed-forward input must be n_tokens x hidden");
  MatD y = matmul(x, w.w_a);
  for (int i = 0; i < y.rows; ++i)
    for (int j = 0; j < y.cols; ++j) y(i, j) = std::max(0.0, y(i, j) + w.b_a[j]);
  MatD z = matmul(y, w.w_b);
  for (int i = 0; i < z.rows; ++i)
    for (int j = 0; j < z.cols; ++j) z(i, j) += w.b_b[j];
  return z;
}

MatD add_norm(const MatD& x, const MatD& z, const NormParams& p) {
  if (!x.same_shape(z)) throw Error(errc::dimension, "add_norm: shape mismatch");
  if (!(p.epsilon > 0)) throw Error(errc::numeric, "add_norm: epsilon must be > 0");
  MatD u(x.rows, x.cols);
  for (size_t i = 0; i < u.d.size(); ++i) u.d[i] = x.d[i] + z.d[i];

  const double m = static_cast<double>(x.cols);
  MatD out(x.rows, x.cols);
  for (int i = 0; i < u.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < u.cols; ++j) mean += u(i, j);
    mean /= m;
    double var = 0.0;
    for (int j = 0; j < u.cols; ++j) {
      double c = u(i, j) - mean;
      var += c * c;
    }
    var /= m;
    double alpha = p.gamma / std::sqrt(var + p.epsilon);
    for (int j = 0; j < u.cols; ++j) out(i, j) = (u(i, j) - mean) * alpha + p.beta;
  }
  return out;
}

MatD layer_forward(const MatD& x, const WeightSet& w, const LayerSpec& spec, bool causal) {
  MatD cur = x;
  if (spec.has_attention) {
    MatD z = attention_forward(cur, w, spec, causal);
    cur = add_norm(cur, z, w.norm1);
  }
  MatD z = feedforward_forward(cur, w, spec);
  return add_norm(cur, z, w.norm2);
}

}  // namespace xbar
