#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "polyscore/check.hpp"
#include "polyscore/estimators.hpp"
#include "polyscore/expfam.hpp"
#include "polyscore/fisher.hpp"
#include "polyscore/hardness.hpp"
#include "polyscore/sampler.hpp"

namespace polyscore {

using Json = nlohmann::ordered_json;

/// {"n", "d", "B", "coefficients": {"2,0,1": value, ...}} with nonzero entries only.
Json theta_to_json(const ParamVector& p);
/// Inverse of theta_to_json. "B" may be omitted (defaults to max(1, ||theta||_inf)).
/// Throws ParseError for malformed payloads and std::invalid_argument for
/// members outside the family.
ParamVector theta_from_json(const Json& j);
ParamVector read_theta_file(const std::string& path);

/// Throws IoError on failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

Json to_json(const Check& c);
Json to_json(const std::vector<Check>& checks);
Json to_json(const McmcConfig& c);
Json to_json(const Provenance& p);
/// Wall time is left out; callers report it under "timing".
Json to_json(const FitReport& r, const MonomialBasis& basis);
Json to_json(const SpectralReport& r);
Json to_json(const RootReport& r);
Json to_json(const ZGapReport& r);
Json to_json(const MeanSignReport& r);
Json to_json(const OrthantReport& r);
/// Summaries, ratios and notes; rows are left to study_csv.
Json to_json(const StudyResult& r);

/// Every library default that affects a reported number.
Json defaults_json();

}  // namespace polyscore
