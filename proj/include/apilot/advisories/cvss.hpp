#pragma once

#include <optional>
#include <string_view>

namespace apilot::advisories {

/// Base score of a CVSS v3.0/v3.1 vector ("CVSS:3.1/AV:N/AC:L/..."), or
/// nullopt when a base metric is missing or has an unknown value.
std::optional<double> cvss3_base_score(std::string_view vector);

/// Base score of a CVSS v2 vector ("AV:N/AC:L/Au:N/C:P/I:P/A:P").
std::optional<double> cvss2_base_score(std::string_view vector);

/// Score of an OSV severity entry: a v3 or v2 vector, or a plain number in
/// [0, 10]. Anything else gives nullopt.
std::optional<double> severity_score(std::string_view type, std::string_view score);

}  // namespace apilot::advisories
