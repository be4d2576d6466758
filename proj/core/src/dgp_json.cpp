#include <json.hpp>

#include "sdid_event/dgp.hpp"
#include "sdid_event/errors.hpp"

namespace sdid {

using ordered_json = nlohmann::ordered_json;

DGPSpec dgp_spec_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw InvalidSpec(std::string("bad JSON: ") + e.what());
  }
  try {
    DGPSpec spec;
    spec.n_controls = j.at("n_controls").get<int>();
    spec.n_periods = j.at("n_periods").get<int>();
    for (const auto& c : j.at("cohorts")) {
      DGPCohort cohort;
      cohort.adoption = c.at("adoption").get<int>();
      cohort.size = c.at("size").get<int>();
      if (c.contains("delta")) cohort.delta = c.at("delta").get<std::vector<double>>();
      spec.cohorts.push_back(std::move(cohort));
    }
    spec.sd_unit = j.value("sd_unit", 0.0);
    spec.sd_time = j.value("sd_time", 0.0);
    spec.sd_noise = j.value("sd_noise", 0.0);
    if (j.contains("factor_loadings"))
      spec.factor_loadings = j.at("factor_loadings").get<std::vector<double>>();
    if (j.contains("factor_values"))
      spec.factor_values = j.at("factor_values").get<std::vector<double>>();
    spec.seed = j.value("seed", std::uint64_t{0});
    return spec;
  } catch (const InvalidSpec&) {
    throw;
  } catch (const std::exception& e) {
    throw InvalidSpec(std::string("bad field: ") + e.what());
  }
}

std::string dgp_spec_to_json(const DGPSpec& spec) {
  ordered_json j;
  j["n_controls"] = spec.n_controls;
  j["n_periods"] = spec.n_periods;
  j["cohorts"] = ordered_json::array();
  for (const DGPCohort& c : spec.cohorts)
    j["cohorts"].push_back({{"adoption", c.adoption}, {"size", c.size}, {"delta", c.delta}});
  j["sd_unit"] = spec.sd_unit;
  j["sd_time"] = spec.sd_time;
  j["sd_noise"] = spec.sd_noise;
  if (!spec.factor_loadings.empty()) {
    j["factor_loadings"] = spec.factor_loadings;
    j["factor_values"] = spec.factor_values;
  }
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

std::string true_effects_to_json(const TrueEffects& effects) {
  ordered_json j;
  j["att"] = effects.att;
  j["tau_ell"] = effects.tau_ell;
  j["cohorts"] = ordered_json::array();
  for (std::size_t k = 0; k < effects.cohort_labels.size(); ++k)
    j["cohorts"].push_back(
        {{"adoption", effects.cohort_labels[k]}, {"delta", effects.delta_by_cohort[k]}});
  return j.dump(2) + "\n";
}

}  // namespace sdid
