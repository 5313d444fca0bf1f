#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tempmerge {

// Maximal runs of non-whitespace. Used for chunking.
std::vector<std::string_view> split_words(std::string_view text);

// Lower-cased alphanumeric runs. Used for the encoder vocabulary and the
// time-expression parser, so "1990s" and "May" survive as single tokens.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view s);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

}  // namespace tempmerge
