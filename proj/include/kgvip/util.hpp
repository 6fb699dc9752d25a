// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kgvip {

std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Splits on '\n', dropping a trailing '\r' from each line. A final empty
// line (file ending in a newline) is not returned.
std::vector<std::string> split_lines(std::string_view text);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace kgvip
