#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aqcal::cli {

// Runs one invocation. `args` excludes the program name. Returns the process
// exit status: 0 on success, 1 on a runtime failure, 2 on a usage error.
// Failures print one JSON line {"error": <kind>, "message": <text>} to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(const std::string& data);

}  // namespace aqcal::cli
