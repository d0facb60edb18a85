#pragma once

#include <string>

#include "refine/types.hpp"

namespace refine {

// Pretty JSON with sorted keys where every floating-point number is written
// with exactly four decimal places. Integers and strings are unchanged.
std::string dump_report(const json& report);

}  // namespace refine
