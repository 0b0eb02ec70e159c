#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "esilc/ilc.hpp"

namespace esilc {

/// Scenario files are YAML. Matrices are nested row-major arrays, vectors are
/// flat arrays and polytopes are either `{box: r}`, `{box: {lower, upper}}` or
/// `{normals, offsets}`. Unknown keys are rejected.
///
/// Errors throw Parse (bad syntax or schema) or InvalidArgument (scenario
/// invariants); both messages start with `source:line:column`.
Scenario parse_scenario(std::string_view text, const std::string& source = "<scenario>");
Scenario load_scenario(const std::filesystem::path& path);

/// Emits every field exactly (shortest round-trip decimals). Boxes are written in the
/// shorthand form.
std::string serialize_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

}  // namespace esilc
