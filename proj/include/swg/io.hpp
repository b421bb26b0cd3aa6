#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace swg::io {

// Writes to "<path>.tmp.<pid>" and renames over `path`, so readers never see
// a partially written file.
void write_file_atomic(const std::filesystem::path & path, std::string_view bytes);

std::string read_file(const std::filesystem::path & path);

// Shortest decimal that round-trips the double ("%.17g" trimmed).
std::string format_double(double v);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

// Strict numeric parsing; throws InvalidArgument mentioning `what`.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

// key=value lines; '#' starts a comment; blank lines ignored.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

} // namespace swg::io
