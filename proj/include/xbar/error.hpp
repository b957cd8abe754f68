#pragma once

#include <stdexcept>
#include <string>

namespace xbar {

// Error categories. The CLI maps them to exit codes:
//   config/schema/dimension/data/encoding/scheduling/layout/accounting -> 2
//   capacity -> 3
//   numeric/range -> 4
enum class errc {
  config,
  schema,
  dimension,
  data,
  range,
  encoding,
  capacity,
  numeric,
  scheduling,
  layout,
  accounting,
};

const char* errc_name(errc k);
int errc_exit_code(errc k);

class Error : public std::runtime_error {
 public:
  Error(errc kind, const std::string& msg)
      : std::runtime_error(std::string(errc_name(kind)) + " error: " + msg),
        kind_(kind) {}
  errc kind() const { return kind_; }
  int exit_code() const { return errc_exit_code(kind_); }

 private:
  errc kind_;
};

}  // namespace xbar
