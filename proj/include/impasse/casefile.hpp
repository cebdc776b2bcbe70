#pragma once

#include "impasse/netmodel.hpp"
#include "impasse/simulator.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace impasse {

struct CaseBundle {
    std::shared_ptr<const NetworkCase> network;
    std::vector<Scenario> scenarios;
    std::vector<std::string> warnings;

    const Scenario* find_scenario(const std::string& name) const;
};

/// Parses and validates a JSON case document. Unknown keys are rejected when
/// strict, otherwise collected as warnings. Errors name the JSON pointer of
/// the offending value.
CaseBundle parse_case_json(const nlohmann::json& doc, bool strict = true);
CaseBundle parse_case(const std::filesystem::path& path, bool strict = true);

/// Serializes the validated model back to the case schema (system-base
/// values, line charging already folded into bus shunts).
nlohmann::json case_to_json(const NetworkCase& c, const std::vector<Scenario>& scenarios);

}  // namespace impasse
