#pragma once

#include "memguard/fid.hpp"
#include "memguard/memorization_test.hpp"
#include "memguard/nn_distance.hpp"

#include <json.hpp>

namespace memguard {

// {ct, metric, train, test, gen, cells:[{cell_id, n_gen, n_test, U, z, weight}], dropped_cells, warnings}
nlohmann::json to_json(const CtReport& report);
// Includes "covariance_divisor": "n-1".
nlohmann::json to_json(const FidReport& report);
nlohmann::json to_json(const DistanceSummary& summary);

}  // namespace memguard
