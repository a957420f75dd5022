#pragma once

#include <string>

#include "numcore/params.hpp"

namespace spwm::numcore {

// Checkpoint file: magic "SPWM", version u32 (little endian), then one entry
// per tensor until end of file:
//   name_len u32 | name bytes | ndim u32 | dims u32[ndim] | payload f64 LE
// Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ParamSet& params);

// Strict load: every entry must match an existing parameter by name and
// shape, and every parameter must be present in the file.
void load_checkpoint(const std::string& path, ParamSet& params);

}  // namespace spwm::numcore
