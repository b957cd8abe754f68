#include "xbar/dense_crossbar.hpp"

#include <cmath>

#include "json.hpp"

using nlohmann::ordered_json;

namespace xbar {

void DenseConfig::validate() const {
  if (rows < 1 || cols < 1) throw Error(errc::config, "dense crossbar needs rows, cols >= 1");
  if (bits_per_cell != 1 && bits_per_cell != 2)
    throw Error(errc::config, "bits_per_cell must be 1 or 2");
  if (n_banks < 1) throw Error(errc::config, "n_banks must be >= 1");
  if (read_noise < 0) throw Error(errc::config, "read_noise must be >= 0");
}

const WeightEntry& WeightLayout::entry(const std::string& id) const {
  auto it = entries.find(id);
  if (it == entries.end()) throw Error(errc::layout, "weight '" + id + "' not in layout");
  return it->second;
}

DenseDevice::DenseDevice(const DenseConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

double DenseDevice::utilization() const {
  return static_cast<double>(mapped_bits_) /
         static_cast<double>(cfg_.bank_bits() * cfg_.n_banks);
}

WeightLayout DenseDevice::store_weights(const std::map<std::string, QuantTensor>& weights) {
  WeightLayout layout;
  const int64_t bank_cells = cfg_.bank_cells();
  const int rows = cfg_.rows;

  auto ensure_bank = [&](int bank) -> std::vector<uint8_t>& {
    if (bank >= cfg_.n_banks)
      throw Error(errc::capacity, "model needs bank " + std::to_string(bank + 1) + " but only " +
                                      std::to_string(cfg_.n_banks) + " configured");
    while (static_cast<int>(banks_.size()) <= bank) banks_.emplace_back();
    return banks_[bank];
  };

  for (const auto& [id, q] : weights) {
    if (q.bits % cfg_.bits_per_cell != 0 || q.bits % 8 != 0)
      throw Error(errc::layout, "weight '" + id + "': " + std::to_string(q.bits) +
                                    "-bit values cannot be cell-packed");
    WeightEntry e;
    e.weights_per_column = q.data.rows;
    e.sessions = q.data.cols;
    e.bits = q.bits;
    e.scale = q.scale;

    const int64_t cells_per_session =
        static_cast<int64_t>(q.data.rows) * q.bits / cfg_.bits_per_cell;
    if (cells_per_session > bank_cells)
      throw Error(errc::capacity, "weight '" + id + "': one session column exceeds a bank");

    for (int t = 0; t < q.data.cols; ++t) {
      // Start fresh at the next crossbar column (or bank) whenever continuing
      // would spread the session over more columns than a fresh start needs.
      int64_t rem_in_col = rows - (cur_cell_ % rows);
      int64_t cols_fresh = (cells_per_session + rows - 1) / rows;
      int64_t cols_cont = cells_per_session <= rem_in_col
                              ? 1
                              : 1 + (cells_per_session - rem_in_col + rows - 1) / rows;
      if (cols_cont > cols_fresh) cur_cell_ += rem_in_col;
      if (cur_cell_ + cells_per_session > bank_cells) {
        ++cur_bank_;
        cur_cell_ = 0;
      }

      std::vector<uint8_t>& bank = ensure_bank(cur_bank_);
      if (static_cast<int64_t>(bank.size()) < cur_cell_ + cells_per_session)
        bank.resize(static_cast<size_t>(cur_cell_ + cells_per_session), 0);

      CellRun run;
      run.bank = cur_bank_;
      run.cell_begin = cur_cell_;
      run.cell_count = cells_per_session;

      // serialize this session's weights: little-endian bytes, then
      // bits_per_cell chunks from the low end of each byte
      int64_t c = cur_cell_;
      const int chunks_per_byte = 8 / cfg_.bits_per_cell;
      const int mask = (1 << cfg_.bits_per_cell) - 1;
      for (int r = 0; r < q.data.rows; ++r) {
        uint32_t u = static_cast<uint32_t>(q.data(r, t));
        for (int byte = 0; byte < q.bits / 8; ++byte) {
          uint8_t b = static_cast<uint8_t>((u >> (8 * byte)) & 0xff);
          for (int k = 0; k < chunks_per_byte; ++k) {
            int crumb = (b >> (k * cfg_.bits_per_cell)) & mask;
            // map onto the level grid: 1-bit mode uses the grid extremes
            bank[static_cast<size_t>(c++)] =
                static_cast<uint8_t>(cfg_.bits_per_cell == 1 ? crumb * 3 : crumb);
          }
        }
      }
      if (c != cur_cell_ + cells_per_session)
        throw Error(errc::layout, "cell serialization bookkeeping mismatch");
      cur_cell_ = c;

      e.runs.push_back(run);
    }

    layout.mapped_bits += static_cast<uint64_t>(q.data.rows) * q.data.cols * q.bits;
    layout.entries[id] = std::move(e);
  }

  mapped_bits_ = layout.mapped_bits;
  return layout;
}

int DenseDevice::decode_level(double analog) const {
  if (cfg_.bits_per_cell == 1) return analog < 1.5 ? 0 : 3;
  long l = std::lround(analog);
  if (l < 0) l = 0;
  if (l > 3) l = 3;
  return static_cast<int>(l);
}

int DenseDevice::read_cell(int bank, int64_t idx, Rng* rng, double noise_amp) const {
  if (bank < 0 || bank >= static_cast<int>(banks_.size()))
    throw Error(errc::layout, "read from unused bank " + std::to_string(bank));
  const std::vector<uint8_t>& b = banks_[bank];
  double level = idx < static_cast<int64_t>(b.size()) ? static_cast<double>(b[idx]) : 0.0;
  if (rng != nullptr && noise_amp > 0.0) {
    double eps = rng->normal() * (noise_amp / 3.0);
    if (eps > noise_amp) eps = noise_amp;
    if (eps < -noise_amp) eps = -noise_amp;
    level += eps;
  }
  return decode_level(level);
}

std::vector<int> DenseDevice::read_column(int bank, int64_t col, Rng* rng,
                                          double noise_amp) const {
  if (col < 0 || col >= cfg_.cols) throw Error(errc::layout, "column index out of range");
  std::vector<int> out(cfg_.rows);
  for (int r = 0; r < cfg_.rows; ++r)
    out[r] = read_cell(bank, col * cfg_.rows + r, rng, noise_amp);
  return out;
}

std::vector<int32_t> DenseDevice::read_weight_column(const WeightLayout& layout,
                                                     const std::string& id, int session,
                                                     Rng* rng) const {
  const WeightEntry& e = layout.entry(id);
  if (session < 1 || session > e.sessions)
    throw Error(errc::scheduling, "session " + std::to_string(session) + " out of range for '" +
                                      id + "'");
  const CellRun& run = e.runs[session - 1];
  const int chunks_per_byte = 8 / cfg_.bits_per_cell;
  const int spacing = cfg_.bits_per_cell == 1 ? 3 : 1;

  std::vector<int32_t> out(e.weights_per_column);
  int64_t c = run.cell_begin;
  for (int r = 0; r < e.weights_per_column; ++r) {
    uint32_t u = 0;
    for (int byte = 0; byte < e.bits / 8; ++byte) {
      uint8_t b = 0;
      for (int k = 0; k < chunks_per_byte; ++k) {
        int level = read_cell(run.bank, c++, rng, cfg_.read_noise);
        int crumb = level / spacing;
        b |= static_cast<uint8_t>(crumb << (k * cfg_.bits_per_cell));
      }
      u |= static_cast<uint32_t>(b) << (8 * byte);
    }
    // sign-extend from e.bits
    int32_t v = static_cast<int32_t>(u << (32 - e.bits)) >> (32 - e.bits);
    out[r] = v;
  }
  return out;
}

StreamCost stream_weight_column(const WeightLayout& layout, const std::string& id,
                                double bits_per_second) {
  if (!(bits_per_second > 0)) throw Error(errc::config, "stream bandwidth must be > 0");
  const WeightEntry& e = layout.entry(id);
  StreamCost c;
  c.bits = static_cast<uint64_t>(e.weights_per_column) * e.bits;
  c.seconds = static_cast<double>(c.bits) / bits_per_second;
  return c;
}

std::string WeightLayout::to_json(const DenseConfig& cfg) const {
  ordered_json j;
  j["bank_rows"] = cfg.rows;
  j["bank_cols"] = cfg.cols;
  j["bits_per_cell"] = cfg.bits_per_cell;
  j["mapped_bits"] = mapped_bits;
  ordered_json ents = ordered_json::array();
  for (const auto& [id, e] : entries) {
    ordered_json je;
    je["id"] = id;
    je["weights_per_column"] = e.weights_per_column;
    je["sessions"] = e.sessions;
    je["bits"] = e.bits;
    je["scale"] = e.scale;
    ordered_json runs = ordered_json::array();
    for (const CellRun& r : e.runs) {
      ordered_json jr;
      jr["bank"] = r.bank;
      jr["cell_begin"] = r.cell_begin;
      jr["cell_count"] = r.cell_count;
      jr["col_first"] = r.cell_begin / cfg.rows;
      jr["col_last"] = (r.cell_begin + r.cell_count - 1) / cfg.rows;
      runs.push_back(jr);
    }
    je["runs"] = runs;
    ents.push_back(je);
  }
  j["entries"] = ents;
  return j.dump(2) + "\n";
}

}  // namespace xbar
