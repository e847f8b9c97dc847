#pragma once

// Tab-separated text form for machines, one record per line:
//   automaton   transition `src dst name`           final `state`
//   transducer  transition `src dst input output`   final `state`
//   weighted    transition `src dst name [weight]`  final `state [weight]`
// The initial state is the source of the first transition line (or the
// first final line when there are no transitions). Blank lines are skipped.

#include <memory>
#include <string>
#include <string_view>

#include "pathlearn/automaton.hpp"

namespace pathlearn::automata {

std::string print(const Automaton& a);
std::string print(const Transducer& t);
std::string print(const WeightedAutomaton& w);

Automaton parse_automaton(std::string_view text);
Transducer parse_transducer(std::string_view text);
/// Labels are interned into `symbols` when given, else into a fresh table.
WeightedAutomaton parse_weighted(std::string_view text, std::shared_ptr<SymbolTable> symbols = nullptr);

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace pathlearn::automata
