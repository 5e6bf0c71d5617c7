#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace recharness::templates {

enum class Domain { Movie, Book };

Domain parse_domain(std::string_view name);
std::string_view domain_name(Domain d);

/// Nouns and verbs substituted into every fragment.
struct Vocabulary {
  std::string item;       // movie
  std::string items;      // movies
  std::string consume;    // watch
  std::string consumed;   // watched
  std::string consuming;  // watching

  static Vocabulary for_domain(Domain d);
};

using Values = std::vector<std::pair<std::string, std::string>>;

/// Raw fragment text by stable name (the file stem under assets/templates).
const std::string& fragment(std::string_view name);
std::vector<std::string> fragment_names();

/// Fragment with vocabulary and `extra` placeholders filled in.
std::string render(std::string_view name, const Vocabulary& vocab, const Values& extra = {});

/// Shortest decimal form of a number ("4", "4.5").
std::string format_number(double v);

}  // namespace recharness::templates
