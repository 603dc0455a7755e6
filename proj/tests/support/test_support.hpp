#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "orbit/model.hpp"
#include "orbit/rng.hpp"

namespace orbit::testing {

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Arbitrary UTF-8 (ASCII, Latin-1 letters, CJK, emoji, quotes, control
/// whitespace), possibly empty.
std::string random_text(Rng& rng, std::size_t max_len);
/// Non-empty text with single spaces between words and no markup-sensitive
/// sequences, i.e. stable under whitespace collapsing and the output grammar.
std::string random_phrase(Rng& rng, std::size_t max_words);
/// Arbitrary bytes, not necessarily UTF-8.
std::string random_bytes(Rng& rng, std::size_t max_len);

Seed random_seed(Rng& rng);
/// A candidate whose cites all resolve; fields are grammar-safe phrases.
CandidatePair random_candidate(Rng& rng);
/// A record satisfying every validate_example invariant. Text fields use
/// random_text so persistence is exercised on awkward content.
TrainingExample random_valid_record(Rng& rng);

std::string read_fixture(const std::string& relative);
std::filesystem::path fixture_path(const std::string& relative);

}  // namespace orbit::testing
