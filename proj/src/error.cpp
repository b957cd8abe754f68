#include "xbar/error.hpp"

namespace xbar {

const char* errc_name(errc k) {
  switch (k) {
    case errc::config: return "config";
    case errc::schema: return "schema";
    case errc::dimension: return "dimension";
    case errc::data: return "data";
    case errc::range: return "range";
    case errc::encoding: return "encoding";
    case errc::capacity: return "capacity";
    case errc::numeric: return "numeric";
    case errc::scheduling: return "scheduling";
    case errc::layout: return "layout";
    case errc::accounting: return "accounting";
  }
  return "unknown";
}

int errc_exit_code(errc k) {
  switch (k) {
    case errc::capacity:
      return 3;
    case errc::numeric:
    case errc::range:
      return 4;
    default:
      return 2;
  }
}

}  // namespace xbar
