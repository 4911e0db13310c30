// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace npnas {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Strict parsers: the whole string must be consumed. Throw ParseError.
double parse_double(std::string_view s, std::string_view what = "number");
long long parse_integer(std::string_view s, std::string_view what = "integer");
bool parse_bool(std::string_view s, std::string_view what = "flag");

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
/// Splits on runs of whitespace, dropping empty fields.
std::vector<std::string_view> split_whitespace(std::string_view s);

}  // namespace npnas
