#pragma once

#include "toepnmf/model.hpp"

#include <filesystem>
#include <string>

namespace toepnmf {

// JSON model files. Dense models store G as an N x K array of rows; sparse
// models store per-direction {indices, values} plus the sparsification
// settings and per-direction NNZE / SD.
std::string model_to_json(const FactorModel& model);
FactorModel model_from_json(const std::string& text);

void save_model(const FactorModel& model, const std::filesystem::path& path);
FactorModel load_model(const std::filesystem::path& path);

}  // namespace toepnmf
