#pragma once

#include <cstdint>
#include <vector>

#include "xbar/error.hpp"

namespace xbar {

// Balanced numeral system with an odd base 2^(S+1) - 1. Each digit lies in
// [-(2^S - 1), 2^S - 1] and is realized on hardware by S power-of-two branch
// resistors (values 1, 2, ..., 2^(S-1)) replicated on a positive and a
// negative column, so one activation consumes 2S resistors. S is called the
// scale factor; the number of digit steps per multiply is the cycle count.
struct EncodingScheme {
  int scale_factor = 2;              // S
  int base = 7;                      // 2^(S+1) - 1
  int digit_bound = 3;               // 2^S - 1
  int n_digits = 3;                  // digit steps per value
  int resistors_per_activation = 4;  // 2S

  // Scheme able to represent every value of a signed `bits`-wide symmetric
  // range, i.e. |v| <= 2^(bits-1) - 1.
  static EncodingScheme for_bits(int bits, int scale_factor);
};

// Digit code, most significant digit first (the hardware consumes digits in
// this order so the accumulator only needs shift-and-add).
struct DigitCode {
  std::vector<int> digits;
};

// Minimal number of digits d such that (base^d - 1) / 2 covers 2^(bits-1) - 1.
int digits_required(int bits, int scale_factor);

// scale_factor * digits_required: the area-time product knob that the base
// sweep minimizes.
int scale_cycle_product(int bits, int scale_factor);

// Balanced-base expansion of `value`. Throws a range error when the value is
// not representable in scheme.n_digits digits.
DigitCode encode(int64_t value, const EncodingScheme& scheme);

// Inverse of encode. Throws an encoding error on malformed codes.
int64_t decode(const DigitCode& code, const EncodingScheme& scheme);

// Switch assignment for one digit: entry k (value 2^k) of `pos` / `neg` tells
// whether that branch resistor is connected on the positive / negative column.
struct SwitchStates {
  std::vector<bool> pos;
  std::vector<bool> neg;
};

SwitchStates digit_to_switch_states(int digit, int scale_factor);

// Signed resistor-value sum realized by a switch assignment; inverse of
// digit_to_switch_states on valid digits.
int switch_state_value(const SwitchStates& st);

// The between-step accumulator update acc * base, computed the way the
// hardware does it: (acc << (S+1)) - acc.
inline int64_t shift_add_base_multiply(int64_t acc, int scale_factor) {
  return (acc << (scale_factor + 1)) - acc;
}

}  // namespace xbar
