#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "xbar/dense_crossbar.hpp"

using namespace xbar;
using namespace testutil;

namespace {

QuantTensor tensor_8bit(Rng& rng, int rows, int cols) {
  return quantize(random_mat(rng, rows, cols), 8);
}

}  // namespace

TEST_CASE("an 8-bit weight packs into four 2-bit cells") {
  QuantTensor q;
  q.data = MatI(1, 1);
  q.data(0, 0) = -77;
  q.bits = 8;
  DenseDevice dev;
  WeightLayout layout = dev.store_weights({{"w", q}});
  const WeightEntry& e = layout.entry("w");
  REQUIRE(e.runs.size() == 1);
  CHECK(e.runs[0].cell_count == 4);
  CHECK(layout.mapped_bits == 8);
  CHECK(dev.read_weight_column(layout, "w", 1) == std::vector<int32_t>{-77});
}

TEST_CASE("stored columns read back losslessly without noise") {
  Rng rng(5);
  DenseConfig cfg;
  cfg.read_noise = 0.0;
  DenseDevice dev(cfg);
  QuantTensor q = tensor_8bit(rng, 32, 16);
  WeightLayout layout = dev.store_weights({{"w", q}});
  for (int t = 1; t <= 16; ++t) {
    std::vector<int32_t> col = dev.read_weight_column(layout, "w", t);
    REQUIRE(col.size() == 32);
    for (int r = 0; r < 32; ++r) CHECK(col[r] == q.data(r, t - 1));
  }
}

TEST_CASE("16-bit weights round-trip as well") {
  DenseConfig cfg;
  cfg.read_noise = 0.0;
  DenseDevice dev(cfg);
  QuantTensor q;
  q.data = MatI(3, 2);
  q.bits = 16;
  int32_t vals[6] = {32767, -32767, 12345, -1, 0, -30000};
  for (int i = 0; i < 6; ++i) q.data.d[i] = vals[i];
  WeightLayout layout = dev.store_weights({{"w", q}});
  CHECK(layout.entry("w").runs[0].cell_count == 24);  // 3 x 16 / 2
  for (int t = 1; t <= 2; ++t) {
    std::vector<int32_t> col = dev.read_weight_column(layout, "w", t);
    for (int r = 0; r < 3; ++r) CHECK(col[r] == q.data(r, t - 1));
  }
}

TEST_CASE("2-bit cells decode error-free when noise stays below half a level") {
  Rng data_rng(6);
  DenseConfig cfg;
  cfg.bits_per_cell = 2;
  cfg.read_noise = 0.25;  // margin is 0.5
  DenseDevice dev(cfg);
  QuantTensor q = tensor_8bit(data_rng, 64, 8);
  WeightLayout layout = dev.store_weights({{"w", q}});
  Rng noise(1234);
  for (int rep = 0; rep < 5; ++rep)
    for (int t = 1; t <= 8; ++t) {
      std::vector<int32_t> col = dev.read_weight_column(layout, "w", t, &noise);
      for (int r = 0; r < 64; ++r) CHECK(col[r] == q.data(r, t - 1));
    }
}

TEST_CASE("1-bit cells ride out much larger noise") {
  Rng data_rng(7);
  DenseConfig cfg;
  cfg.bits_per_cell = 1;
  cfg.read_noise = 0.9;  // margin is 1.5
  DenseDevice dev(cfg);
  QuantTensor q = tensor_8bit(data_rng, 64, 4);
  WeightLayout layout = dev.store_weights({{"w", q}});
  Rng noise(77);
  for (int rep = 0; rep < 18; ++rep)
    for (int t = 1; t <= 4; ++t) {
      std::vector<int32_t> col = dev.read_weight_column(layout, "w", t, &noise);
      for (int r = 0; r < 64; ++r) CHECK(col[r] == q.data(r, t - 1));
    }
}

TEST_CASE("noise past the decode margin corrupts 2-bit reads") {
  Rng data_rng(8);
  DenseConfig cfg;
  cfg.bits_per_cell = 2;
  cfg.read_noise = 0.9;  // past the 0.5 margin
  DenseDevice dev(cfg);
  QuantTensor q = tensor_8bit(data_rng, 128, 8);
  WeightLayout layout = dev.store_weights({{"w", q}});
  Rng noise(99);
  int errors = 0;
  for (int t = 1; t <= 8; ++t) {
    std::vector<int32_t> col = dev.read_weight_column(layout, "w", t, &noise);
    for (int r = 0; r < 128; ++r) errors += col[r] != q.data(r, t - 1);
  }
  CHECK(errors > 0);
}

TEST_CASE("column reads are independent of neighbouring columns") {
  DenseConfig cfg;
  cfg.rows = 8;
  cfg.cols = 64;
  cfg.read_noise = 0.0;
  DenseDevice dev(cfg);
  QuantTensor q;
  q.data = MatI(2, 3);  // 2 weights x 3 sessions, 8 cells per session
  q.bits = 8;
  int32_t vals[6] = {1, -2, 3, -4, 5, -6};
  for (int i = 0; i < 6; ++i) q.data.d[i] = vals[i];
  WeightLayout layout = dev.store_weights({{"w", q}});

  // each session occupies exactly one 8-row crossbar column here
  const WeightEntry& e = layout.entry("w");
  for (int t = 0; t < 3; ++t) {
    int64_t col = e.runs[t].cell_begin / cfg.rows;
    std::vector<int> levels = dev.read_column(e.runs[t].bank, col);
    REQUIRE(levels.size() == 8);
    // re-reading other columns first must not change this one
    dev.read_column(0, 0);
    CHECK(dev.read_column(e.runs[t].bank, col) == levels);
  }
}

TEST_CASE("a full-size encoder layer fits one standard bank") {
  LayerSpec spec;
  spec.n_tokens = 256;
  spec.hidden = 1024;
  spec.ff_width = 4096;
  spec.head_width = 64;
  spec.n_heads = 16;
  spec.validate();

  // synthetic tensors of exactly the model's footprint
  std::map<std::string, QuantTensor> w;
  auto add = [&](const std::string& id, int rows, int cols) {
    QuantTensor q;
    q.data = MatI(rows, cols);
    for (size_t i = 0; i < q.data.d.size(); ++i) q.data.d[i] = static_cast<int32_t>(i % 251) - 125;
    q.bits = 8;
    w[id] = std::move(q);
  };
  add("Wq", 1024, 1024);
  add("Wk", 1024, 1024);
  add("Wv", 1024, 1024);
  add("Wo", 1024, 1024);
  add("Wa_ba", 1025, 4096);
  add("Wb_bb", 4097, 1024);
  add("norms", 1, 6);

  uint64_t bits = 0;
  for (const auto& [id, q] : w)
    bits += static_cast<uint64_t>(q.data.rows) * q.data.cols * q.bits;
  CHECK(bits == param_count(spec) * 8);

  DenseDevice dev;  // 1024 x 65536 bank of 2-bit cells
  WeightLayout layout = dev.store_weights(w);
  CHECK(layout.mapped_bits == bits);
  CHECK(dev.banks_used() == 1);
  CHECK(dev.utilization() == doctest::Approx(static_cast<double>(bits) /
                                             (2.0 * 1024 * 65536)));

  // spot-check a readback through the packed layout
  std::vector<int32_t> col = dev.read_weight_column(layout, "Wb_bb", 7);
  REQUIRE(col.size() == 4097);
  for (int r = 0; r < 4097; ++r) CHECK(col[r] == w.at("Wb_bb").data(r, 6));
}

TEST_CASE("exceeding the configured bank count raises a capacity error") {
  DenseConfig cfg;
  cfg.rows = 8;
  cfg.cols = 8;  // 64 cells = 128 bits per bank
  cfg.n_banks = 1;
  DenseDevice dev(cfg);
  Rng rng(9);
  QuantTensor q = tensor_8bit(rng, 8, 4);  // 256 bits
  try {
    dev.store_weights({{"w", q}});
    FAIL("expected a capacity error");
  } catch (const Error& e) {
    CHECK(e.kind() == errc::capacity);
    CHECK(std::string(e.what()).find("bank") != std::string::npos);
  }
}

TEST_CASE("streaming cost counts bits at the configured bandwidth") {
  Rng rng(10);
  DenseDevice dev;
  QuantTensor q = tensor_8bit(rng, 128, 4);
  WeightLayout layout = dev.store_weights({{"w", q}});
  StreamCost c = stream_weight_column(layout, "w", 819e9);
  CHECK(c.bits == 1024);  // 128 weights x 8 bits
  CHECK(c.seconds == doctest::Approx(1024.0 / 819e9));
  StreamCost fast = stream_weight_column(layout, "w", 2 * 819e9);
  CHECK(fast.seconds == doctest::Approx(c.seconds / 2));
  CHECK_THROWS_AS(stream_weight_column(layout, "w", 0.0), Error);
}

TEST_CASE("layout JSON names every entry") {
  Rng rng(11);
  DenseDevice dev;
  WeightLayout layout = dev.store_weights({{"alpha", tensor_8bit(rng, 4, 2)},
                                           {"beta", tensor_8bit(rng, 4, 2)}});
  std::string js = layout.to_json(dev.config());
  CHECK(js.find("\"alpha\"") != std::string::npos);
  CHECK(js.find("\"beta\"") != std::string::npos);
  CHECK(js.find("mapped_bits") != std::string::npos);
}
