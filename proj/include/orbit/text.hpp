#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace orbit::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);  // ASCII only
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

/// Runs of ASCII/Unicode-space whitespace become one ' '; result is trimmed.
std::string collapse_whitespace(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// UTF-8 helpers. Lengths are in code points.
std::size_t utf8_length(std::string_view s);
std::string utf8_truncate(std::string_view s, std::size_t max_code_points);
bool is_valid_utf8(std::string_view s);
/// Invalid sequences are replaced by U+FFFD.
/// Code points of a UTF-8 string; invalid bytes become U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

std::string sanitize_utf8(std::string_view s);
/// ISO-8859-1 / windows-1252 bytes to UTF-8 (C1 range mapped per cp1252).
std::string latin1_to_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t cp);

/// Decodes &amp; &lt; &gt; &quot; &apos; &#NN; &#xHH; plus common named
/// HTML entities. Unknown entities are kept verbatim.
std::string decode_entities(std::string_view s);
/// Escapes & < > for embedding in an XML-tagged grammar.
std::string escape_xml(std::string_view s);

/// Whitespace-delimited token count.
std::size_t whitespace_tokens(std::string_view s);

/// RFC 4180 rows: quoted fields may hold commas, doubled quotes and line
/// breaks; CRLF and LF both end a record. Blank lines are skipped. Throws
/// Error(InvalidArgument, "line N") for an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view s);
std::string csv_escape(std::string_view field);

}  // namespace orbit::text
