#pragma once

#include <filesystem>
#include <string>

#include "disent/tensor.hpp"

namespace disent {

// {"params": {name: {"shape": [...], "data": [...]}}}, row-major.
std::string checkpoint_to_json(const ParamStore& params);
ParamStore checkpoint_from_json(const std::string& text);

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace disent
