#pragma once
#include <plo/network.hpp>

#include <json.hpp>

#include <string>
#include <string_view>

namespace plo {

/// Parses a case in the MATPOWER matrix format (baseMVA, bus, gen, branch,
/// gencost) or, when the text starts with '{', in the JSON schema produced by
/// `to_json`. Out-of-service branches and generators are dropped, values are
/// converted to per-unit and the result is validated.
Network parse_case(std::string_view text);
Network read_case_file(const std::string& path);

/// MATPOWER-format text of a network (version 2, polynomial costs).
std::string write_matpower(const Network& net);

nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace plo
