#pragma once

// Published summary values for canonical addition, kept for side-by-side
// comparison in reports. Not used by any computation.

#include <nlohmann/json.hpp>

namespace grokscale::reference {

struct GridSummary {
  const char* name;
  double f_c;
  double crossing_spread;
  bool drift_significant;
  double delta_aic;
  double u4_min_extrapolated;
  double u4_min_se;
  const char* bimodality;
  const char* crossing_verdict;
  const char* crossover_verdict;
  const char* order_verdict;
};

inline constexpr GridSummary kCoarse{"coarse",        0.390,  0.057,          false, 11.4, 0.0006, 0.1574,
                                     "not assessed",  "supported", "disfavored", "continuity-leaning"};
inline constexpr GridSummary kNearCritical{"near_critical", 0.418,      0.019,
                                           false,           16.8,       -0.67,
                                           0.11,            "absent",   "strengthened",
                                           "strongly disfavored", "unresolved"};

struct OperationSummary {
  const char* op;
  double f_c;
  double crossing_spread;
  double delta_aic;
};

inline constexpr OperationSummary kOperations[] = {
    {"add", 0.411, 0.057, 11.4},
    {"sub", 0.465, 0.064, 9.2},
    {"mul", 0.431, 0.071, 8.7},
};

inline nlohmann::json to_json(const GridSummary& g) {
  return {{"f_c", g.f_c},
          {"crossing_spread", g.crossing_spread},
          {"drift_significant", g.drift_significant},
          {"delta_aic", g.delta_aic},
          {"u4_min_extrapolated", g.u4_min_extrapolated},
          {"u4_min_se", g.u4_min_se},
          {"bimodality", g.bimodality},
          {"interpretation",
           {{"crossing", g.crossing_verdict}, {"smooth_crossover", g.crossover_verdict}, {"order", g.order_verdict}}}};
}

inline nlohmann::json all_to_json() {
  nlohmann::json ops = nlohmann::json::object();
  for (const auto& o : kOperations) {
    ops[o.op] = {{"f_c", o.f_c}, {"crossing_spread", o.crossing_spread}, {"delta_aic", o.delta_aic}};
  }
  return {{kCoarse.name, to_json(kCoarse)}, {kNearCritical.name, to_json(kNearCritical)}, {"per_operation", ops}};
}

}  // namespace grokscale::reference
