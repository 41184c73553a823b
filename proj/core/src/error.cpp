#include "cosim/error.hpp"

#include <utility>

namespace cosim {

DesyncError::DesyncError(uint64_t expected, uint64_t got, const std::string& context)
    : ProtocolError("desync on " + context + ": expected time_val " + std::to_string(expected) + ", got " +
                    std::to_string(got)),
      expected_(expected),
      got_(got) {}

ConfigError::ConfigError(std::string path, const std::string& detail)
    : Error(path.empty() ? detail : path + ": " + detail), path_(std::move(path)) {}

}  // namespace cosim
