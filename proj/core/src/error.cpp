#include "aqcal/error.hpp"

namespace aqcal {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kRow: return "row";
    case ErrorKind::kUnfillable: return "unfillable";
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kVersion: return "version";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace aqcal
