#pragma once

#include <string>

#include "rlqr/net.hpp"

namespace rlqr {

// Plain-text checkpoint. Values are printed with 17 significant digits so a
// round trip reproduces every double bit for bit.
void save_network(const NetworkParams& net, const std::string& path);

// Throws ConfigError on malformed files.
NetworkParams load_network(const std::string& path);

}  // namespace rlqr
