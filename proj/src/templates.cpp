#include "recharness/templates.hpp"

#include <charconv>
#include <map>

#include "recharness/common.hpp"

namespace recharness::templates {

namespace detail {
const std::map<std::string, std::string>& embedded();
}

Domain parse_domain(std::string_view name) {
  if (name == "movie" || name == "movies" || name == "movielens") return Domain::Movie;
  if (name == "book" || name == "books" || name == "amazon_books") return Domain::Book;
  throw ConfigError("unknown domain: " + std::string(name));
}

std::string_view domain_name(Domain d) { return d == Domain::Movie ? "movie" : "book"; }

Vocabulary Vocabulary::for_domain(Domain d) {
  if (d == Domain::Movie) return {"movie", "movies", "watch", "watched", "watching"};
  return {"book", "books", "read", "read", "reading"};
}

const std::string& fragment(std::string_view name) {
  const auto& table = detail::embedded();
  auto it = table.find(std::string(name));
  if (it == table.end()) throw Error("unknown template fragment: " + std::string(name));
  return it->second;
}

std::vector<std::string> fragment_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : detail::embedded()) out.push_back(k);
  return out;
}

std::string render(std::string_view name, const Vocabulary& vocab, const Values& extra) {
  Values values = extra;
  values.emplace_back("item", vocab.item);
  values.emplace_back("items", vocab.items);
  values.emplace_back("consume", vocab.consume);
  values.emplace_back("consumed", vocab.consumed);
  values.emplace_back("consuming", vocab.consuming);
  return fill_placeholders(fragment(name), values);
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, ptr);
}

}  // namespace recharness::templates
