#pragma once

#include "impasse/casefile.hpp"

#include <string>

namespace impasse::testing {

inline std::string data_path(const std::string& file) { return std::string(IMPASSE_DATA_DIR) + "/" + file; }

inline const CaseBundle& ieee9() {
    static const CaseBundle bundle = parse_case(data_path("ieee9.json"));
    return bundle;
}

}  // namespace impasse::testing
