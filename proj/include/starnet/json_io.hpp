#pragma once

#include <json.hpp>

#include "starnet/model.hpp"
#include "starnet/tensor.hpp"
#include "starnet/training.hpp"

namespace starnet {

using ojson = nlohmann::ordered_json;

ojson to_json(const model::ModelConfig& c);
model::ModelConfig model_config_from_json(const ojson& j);

ojson to_json(const training::TrainConfig& c);
training::TrainConfig train_config_from_json(const ojson& j);

// Compact single-line array of the tensor's values.
ojson values_json(const Tensor& t);
Tensor tensor_from_json(const ojson& shape, const ojson& data, const std::string& name);

}  // namespace starnet
