#pragma once

// Pattern files: one pattern per line with symbols separated by spaces.
// Optional header lines `discount=<float>` and `max_gap=<int|inf>` select
// gappy counting; without them counting is contiguous. A positive discount
// with no max_gap line means gaps are unbounded.

#include <string>
#include <string_view>

#include "pathlearn/contextual.hpp"

namespace pathlearn::contextual {

PatternSet parse_patterns(std::string_view text);
std::string print_patterns(const PatternSet& ps);

/// All n-grams over `alphabet` in lexicographic order of symbol indices.
PatternSet all_ngrams(const std::vector<std::string>& alphabet, std::size_t n);

}  // namespace pathlearn::contextual
