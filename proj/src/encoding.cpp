#include "xbar/encoding.hpp"

#include <cmath>
#include <string>

namespace xbar {

namespace {

void check_scale_factor(int s) {
  if (s < 1 || s > 15)
    throw Error(errc::range, "scale factor must be in [1,15], got " + std::to_string(s));
}

// Largest magnitude representable with d balanced digits: (base^d - 1) / 2.
int64_t balanced_range(int base, int d) {
  int64_t pw = 1;
  for (int i = 0; i < d; ++i) pw *= base;
  return (pw - 1) / 2;
}

}  // namespace

EncodingScheme EncodingScheme::for_bits(int bits, int scale_factor) {
  check_scale_factor(scale_factor);
  EncodingScheme s;
  s.scale_factor = scale_factor;
  s.base = (1 << (scale_factor + 1)) - 1;
  s.digit_bound = (1 << scale_factor) - 1;
  s.n_digits = digits_required(bits, scale_factor);
  s.resistors_per_activation = 2 * scale_factor;
  return s;
}

int digits_required(int bits, int scale_factor) {
  check_scale_factor(scale_factor);
  if (bits < 2 || bits > 32)
    throw Error(errc::range, "bit width must be in [2,32], got " + std::to_string(bits));
  const int base = (1 << (scale_factor + 1)) - 1;
  const int64_t need = (int64_t(1) << (bits - 1)) - 1;
  int d = 1;
  while (balanced_range(base, d) < need) ++d;
  return d;
}

int scale_cycle_product(int bits, int scale_factor) {
  return scale_factor * digits_required(bits, scale_factor);
}

DigitCode encode(int64_t value, const EncodingScheme& scheme) {
  const int base = scheme.base;
  const int bound = scheme.digit_bound;
  if (std::llabs(value) > balanced_range(base, scheme.n_digits))
    throw Error(errc::range, "value " + std::to_string(value) + " not representable in " +
                                 std::to_string(scheme.n_digits) + " base-" +
                                 std::to_string(base) + " balanced digits");

  // Standard balanced expansion: remainder folded into [-bound, bound], the
  // carry propagates into the next digit. Digits come out least significant
  // first and are reversed at the end.
  std::vector<int> lsb_first;
  int64_t v = value;
  for (int k = 0; k < scheme.n_digits; ++k) {
    int r = static_cast<int>(((v % base) + base) % base);
    if (r > bound) r -= base;
    lsb_first.push_back(r);
    v = (v - r) / base;
  }
  if (v != 0)
    throw Error(errc::range, "encode: residue after digit expansion");  // unreachable given the range guard

  DigitCode code;
  code.digits.assign(lsb_first.rbegin(), lsb_first.rend());
  return code;
}

int64_t decode(const DigitCode& code, const EncodingScheme& scheme) {
  if (static_cast<int>(code.digits.size()) != scheme.n_digits)
    throw Error(errc::encoding, "decode: code has " + std::to_string(code.digits.size()) +
                                    " digits, scheme wants " + std::to_string(scheme.n_digits));
  int64_t v = 0;
  for (int d : code.digits) {
    if (d < -scheme.digit_bound || d > scheme.digit_bound)
      throw Error(errc::encoding, "decode: digit " + std::to_string(d) + " out of bound");
    v = v * scheme.base + d;
  }
  return v;
}

SwitchStates digit_to_switch_states(int digit, int scale_factor) {
  check_scale_factor(scale_factor);
  const int bound = (1 << scale_factor) - 1;
  if (digit < -bound || digit > bound)
    throw Error(errc::encoding, "digit " + std::to_string(digit) + " out of bound for S=" +
                                    std::to_string(scale_factor));
  SwitchStates st;
  st.pos.assign(scale_factor, false);
  st.neg.assign(scale_factor, false);
  // |digit| in binary across the power-of-two branches; sign picks the column.
  int mag = std::abs(digit);
  for (int k = 0; k < scale_factor; ++k) {
    if (mag & (1 << k)) {
      if (digit > 0)
        st.pos[k] = true;
      else
        st.neg[k] = true;
    }
  }
  return st;
}

int switch_state_value(const SwitchStates& st) {
  if (st.pos.size() != st.neg.size())
    throw Error(errc::encoding, "switch state: column size mismatch");
  int v = 0;
  for (size_t k = 0; k < st.pos.size(); ++k) {
    if (st.pos[k] && st.neg[k])
      throw Error(errc::encoding, "switch state: branch on in both columns");
    if (st.pos[k]) v += 1 << k;
    if (st.neg[k]) v -= 1 << k;
  }
  return v;
}

}  // namespace xbar
