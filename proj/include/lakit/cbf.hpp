#pragma once

#include <string>

#include "lakit/ipm.hpp"

namespace lakit {

// Conic Benchmark Format 1.0, text.  Lets external solvers cross-check the
// standard form this library hands to its own interior-point method.
std::string cbf_text(const StandardForm& sf);
void export_cbf(const std::string& path, const StandardForm& sf);

}  // namespace lakit
