#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace forge {

using Json = nlohmann::ordered_json;

/// Round to six fractional digits; the precision every artifact is stored at.
double round_decimal(double v) noexcept;

/// Six fractional digits max, trailing zeros stripped, integral values
/// without a decimal point ("7", "0.25", "1000000").
std::string format_decimal(double v);

/// JSON number for a decimal: integral values become JSON integers so the
/// dump matches format_decimal.
Json decimal_json(double v);

std::string sha256_hex(std::string_view data);

/// Throws IoError.
std::string read_file(const std::filesystem::path& path);
/// Creates parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view content);

/// Two-space indented dump with a trailing newline.
std::string dump_json(const Json& j);

} // namespace forge
