#pragma once

#include <json.hpp>

#include "csm/data/dataset.hpp"

namespace csm::data {

using Json = nlohmann::ordered_json;

Json toJson(const Grouping& g);
Grouping groupingFromJson(const Json& j);

Json toJson(const Dnf& dnf);
Dnf dnfFromJson(const Json& j);

Json toJson(const Fingerprint& fp);
Fingerprint fingerprintFromJson(const Json& j);

}  // namespace csm::data
