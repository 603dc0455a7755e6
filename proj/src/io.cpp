#include "orbit/io.hpp"

#include <fstream>
#include <sstream>

#include "orbit/error.hpp"
#include "orbit/text.hpp"

namespace orbit::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!fs::exists(path)) fail(ErrorCode::MissingFile, path.string());
    fail(ErrorCode::IoError, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path, bool missing_ok) {
  if (missing_ok && !fs::exists(path)) return {};
  std::vector<std::string> out;
  for (auto& line : text::split_lines(read_file(path))) {
    if (!text::trim(line).empty()) out.push_back(std::move(line));
  }
  return out;
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::IoError, "short write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::IoError, "rename " + tmp.string() + ": " + ec.message());
}

void append_lines(const fs::path& path, const std::vector<std::string>& lines) {
  if (lines.empty()) return;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) fail(ErrorCode::IoError, "cannot append " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) fail(ErrorCode::IoError, "short write " + path.string());
}

}  // namespace orbit::io
