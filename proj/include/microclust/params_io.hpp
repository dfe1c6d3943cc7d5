#pragma once

#include <map>
#include <string>
#include <string_view>

#include "microclust/models.hpp"

namespace microclust {

// Shortest decimal text that reads back to the same double.
std::string format_number(double v);
// Whole-field parse; throws std::invalid_argument naming the text.
double parse_number(std::string_view text);

// Flat `key=value` text: pairs separated by whitespace or newlines, '#'
// starts a comment running to end of line. Later keys override earlier ones.
using KeyValues = std::map<std::string, std::string, std::less<>>;
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::string &path);

// `model=nbnb a=.. q=.. r=.. p=..`, `model=perps alpha=.. lambda=..`,
// `model=dp theta=..`, `model=pyp theta=.. delta=..`,
// `model=mfm gamma=.. k_prior=geometric:6e-05`.
std::string format_params(const ModelParams &params);
ModelParams parse_params(std::string_view text);
// Builds parameters from already-split keys; unknown keys are rejected.
ModelParams params_from_key_values(const KeyValues &kv);

} // namespace microclust
