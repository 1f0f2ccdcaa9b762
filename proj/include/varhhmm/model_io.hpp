#pragma once

#include <string>

#include <json.hpp>

#include "varhhmm/model.hpp"

namespace varhhmm {

/// Versioned JSON document: {version, d, tau, rho, movements:[...], mov_trans, mov_prior}.
/// Matrices are row-major nested arrays; doubles round-trip bit-identically.
nlohmann::json spec_to_json(const HhmmSpec& spec);
HhmmSpec spec_from_json(const nlohmann::json& j);

void save_spec(const HhmmSpec& spec, const std::string& path);
HhmmSpec load_spec(const std::string& path);

/// Writes text to path atomically (temp file in the same directory + rename).
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace varhhmm
