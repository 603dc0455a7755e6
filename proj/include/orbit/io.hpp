#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace orbit::io {

/// Throws Error(MissingFile) when absent, Error(IoError) on read failure.
std::string read_file(const std::filesystem::path& path);
/// Non-empty lines of a JSONL file; a missing file reads as empty when
/// `missing_ok`.
std::vector<std::string> read_lines(const std::filesystem::path& path, bool missing_ok = false);
/// Writes via a temp file and rename.
void write_file(const std::filesystem::path& path, std::string_view content);
void append_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

}  // namespace orbit::io
