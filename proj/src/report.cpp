#include "memguard/report.hpp"

namespace memguard {

nlohmann::json to_json(const CtReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.per_cell) {
    nlohmann::json cell = {{"cell_id", c.cell_id}, {"n_gen", c.n_gen}, {"n_test", c.n_test},
                           {"U", c.u},             {"z", c.z},         {"weight", c.weight}};
    if (c.degenerate_variance) cell["degenerate_variance"] = true;
    cells.push_back(std::move(cell));
  }
  return {{"ct", report.ct},
          {"metric", std::string(to_string(report.metric))},
          {"train", report.train_name},
          {"test", report.test_name},
          {"gen", report.gen_name},
          {"cells", std::move(cells)},
          {"dropped_cells", report.dropped_cells},
          {"warnings", report.warnings}};
}

nlohmann::json to_json(const FidReport& report) {
  return {{"fid", report.fid},          {"mean_term", report.mean_term}, {"trace_term", report.trace_term},
          {"set_a", report.set_a},      {"set_b", report.set_b},         {"covariance_divisor", "n-1"}};
}

nlohmann::json to_json(const DistanceSummary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"min", s.min}, {"max", s.max}};
}

}  // namespace memguard
