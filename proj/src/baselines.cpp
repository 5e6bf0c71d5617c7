#include "recharness/baselines.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "recharness/common.hpp"
#include "recharness/kernels.hpp"

namespace recharness::baselines {

namespace {

std::ptrdiff_t find_sorted(const std::vector<std::string>& ids, const std::string& id) {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return -1;
  return it - ids.begin();
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("checkpoint: bad number '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("checkpoint: bad integer '" + s + "'");
  }
  return v;
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos) {
    throw Error("checkpoint: entity id '" + id + "' is empty or contains whitespace");
  }
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string t;
  while (ss >> t) out.push_back(t);
  return out;
}

void sort_by_score(std::vector<std::pair<double, std::string>>& scored) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
}

}  // namespace

std::ptrdiff_t BprModel::user_index(const std::string& id) const {
  return find_sorted(user_ids, id);
}
std::ptrdiff_t BprModel::item_index(const std::string& id) const {
  return find_sorted(item_ids, id);
}
std::span<const double> BprModel::user(std::size_t u) const {
  return {user_factors.data() + u * params.dim, params.dim};
}
std::span<const double> BprModel::item(std::size_t i) const {
  return {item_factors.data() + i * params.dim, params.dim};
}
std::span<double> BprModel::user(std::size_t u) {
  return {user_factors.data() + u * params.dim, params.dim};
}
std::span<double> BprModel::item(std::size_t i) {
  return {item_factors.data() + i * params.dim, params.dim};
}

RandomModel fit_random(const std::vector<corpus::Interaction>& interactions,
                       std::uint64_t seed) {
  std::set<std::string> items;
  for (const auto& it : interactions) items.insert(it.item_id);
  return RandomModel{seed, {items.begin(), items.end()}};
}

PopModel fit_pop(const std::vector<corpus::Interaction>& interactions) {
  PopModel m;
  for (const auto& it : interactions) ++m.count[it.item_id];
  return m;
}

namespace {

BprModel init_with(const std::vector<corpus::Interaction>& interactions,
                   const BprParams& params, Rng& rng) {
  if (params.dim == 0) throw Error("fit_bpr: dim must be >= 1");
  if (!(params.learning_rate > 0)) throw Error("fit_bpr: learning rate must be > 0");
  if (!(params.reg >= 0)) throw Error("fit_bpr: reg must be >= 0");
  BprModel m;
  m.params = params;
  std::set<std::string> users;
  std::set<std::string> items;
  for (const auto& it : interactions) {
    users.insert(it.user_id);
    items.insert(it.item_id);
  }
  m.user_ids.assign(users.begin(), users.end());
  m.item_ids.assign(items.begin(), items.end());
  const double scale = 0.1 / std::sqrt(static_cast<double>(params.dim));
  m.user_factors.resize(m.user_ids.size() * params.dim);
  m.item_factors.resize(m.item_ids.size() * params.dim);
  for (auto& v : m.user_factors) v = scale * rng.normal();
  for (auto& v : m.item_factors) v = scale * rng.normal();
  return m;
}

}  // namespace

BprModel init_bpr(const std::vector<corpus::Interaction>& interactions,
                  const BprParams& params) {
  Rng rng(params.seed);
  return init_with(interactions, params, rng);
}

void bpr_sgd_step(std::span<double> pu, std::span<double> qi, std::span<double> qj,
                  double learning_rate, double reg) {
  const std::size_t d = pu.size();
  if (qi.size() != d || qj.size() != d) throw Error("bpr_sgd_step: size mismatch");
  double x = 0.0;
  for (std::size_t k = 0; k < d; ++k) x += pu[k] * (qi[k] - qj[k]);
  const double g = sigmoid(-x);
  for (std::size_t k = 0; k < d; ++k) {
    const double p = pu[k];
    const double a = qi[k];
    const double b = qj[k];
    pu[k] = p + learning_rate * (g * (a - b) - reg * p);
    qi[k] = a + learning_rate * (g * p - reg * a);
    qj[k] = b + learning_rate * (-g * p - reg * b);
  }
}

double bpr_triple_objective(std::span<const double> pu, std::span<const double> qi,
                            std::span<const double> qj, double reg) {
  double x = 0.0;
  double sq = 0.0;
  for (std::size_t k = 0; k < pu.size(); ++k) {
    x += pu[k] * qi[k] - pu[k] * qj[k];
    sq += pu[k] * pu[k] + qi[k] * qi[k] + qj[k] * qj[k];
  }
  return log_sigmoid(x) - 0.5 * reg * sq;
}

BprModel fit_bpr(const std::vector<corpus::Interaction>& interactions,
                 const BprParams& params) {
  Rng rng(params.seed);
  BprModel m = init_with(interactions, params, rng);
  if (params.epochs == 0 || m.item_ids.size() < 2) return m;

  std::vector<std::pair<std::size_t, std::size_t>> positives;
  std::vector<std::set<std::size_t>> seen(m.user_ids.size());
  for (const auto& it : interactions) {
    auto u = static_cast<std::size_t>(m.user_index(it.user_id));
    auto i = static_cast<std::size_t>(m.item_index(it.item_id));
    if (seen[u].insert(i).second) positives.emplace_back(u, i);
  }
  std::sort(positives.begin(), positives.end());
  const std::size_t n_items = m.item_ids.size();

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(positives);
    for (const auto& [u, i] : positives) {
      if (seen[u].size() >= n_items) continue;
      std::size_t j;
      do {
        j = rng.uniform_index(n_items);
      } while (seen[u].count(j));
      bpr_sgd_step(m.user(u), m.item(i), m.item(j), params.learning_rate, params.reg);
    }
  }
  return m;
}

double score(const Model& model, const std::string& user_id, const std::string& item_id) {
  if (const auto* r = std::get_if<RandomModel>(&model)) {
    const std::uint64_t h =
        mix_seed(r->seed, fnv1a64(user_id + '\x1f' + item_id));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }
  if (const auto* p = std::get_if<PopModel>(&model)) {
    auto it = p->count.find(item_id);
    return it == p->count.end() ? 0.0 : static_cast<double>(it->second);
  }
  const auto& b = std::get<BprModel>(model);
  const auto u = b.user_index(user_id);
  const auto i = b.item_index(item_id);
  if (u < 0 || i < 0) return 0.0;
  return kernels::dot(b.user(static_cast<std::size_t>(u)), b.item(static_cast<std::size_t>(i)));
}

std::vector<std::string> rank_candidates(const Model& model, const std::string& user_id,
                                         const std::vector<std::string>& candidates,
                                         std::uint64_t seed) {
  if (candidates.empty()) throw Error("rank_candidates: empty candidate set");
  if (std::holds_alternative<RandomModel>(model)) {
    std::vector<std::string> out = candidates;
    Rng rng(mix_seed(seed, fnv1a64(user_id)));
    rng.shuffle(out);
    return out;
  }
  std::vector<std::pair<double, std::string>> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) scored.emplace_back(score(model, user_id, c), c);
  sort_by_score(scored);
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (auto& [s, id] : scored) out.push_back(std::move(id));
  return out;
}

std::vector<std::string> recall_top_k(const Model& model, const std::string& user_id,
                                      std::size_t k, const std::set<std::string>& exclude,
                                      std::vector<std::string>* warnings) {
  if (k == 0) throw Error("recall_top_k: k must be >= 1");
  std::vector<std::pair<double, std::string>> scored;
  if (const auto* r = std::get_if<RandomModel>(&model)) {
    for (const auto& id : r->items) {
      if (!exclude.count(id)) scored.emplace_back(score(model, user_id, id), id);
    }
  } else if (const auto* p = std::get_if<PopModel>(&model)) {
    for (const auto& [id, c] : p->count) {
      if (!exclude.count(id)) scored.emplace_back(static_cast<double>(c), id);
    }
  } else {
    const auto& b = std::get<BprModel>(model);
    std::vector<double> all(b.item_ids.size(), 0.0);
    const auto u = b.user_index(user_id);
    if (u >= 0) {
      kernels::dot_scores(b.item_factors, b.dim(), b.user(static_cast<std::size_t>(u)), all);
    }
    for (std::size_t i = 0; i < b.item_ids.size(); ++i) {
      if (!exclude.count(b.item_ids[i])) scored.emplace_back(all[i], b.item_ids[i]);
    }
  }
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  if (take < k && warnings) {
    warnings->push_back("recall_top_k: only " + std::to_string(take) +
                        " scorable items for user " + user_id + " (k=" +
                        std::to_string(k) + ")");
  }
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(std::move(scored[i].second));
  return out;
}

std::string model_kind(const Model& model) {
  if (std::holds_alternative<RandomModel>(model)) return "random";
  if (std::holds_alternative<PopModel>(model)) return "pop";
  return "bpr";
}

std::string save_model(const Model& model) {
  std::ostringstream out;
  if (const auto* r = std::get_if<RandomModel>(&model)) {
    out << "recharness-model random seed=" << r->seed << " items=" << r->items.size() << "\n";
    for (const auto& id : r->items) {
      check_id(id);
      out << "I " << id << "\n";
    }
  } else if (const auto* p = std::get_if<PopModel>(&model)) {
    out << "recharness-model pop items=" << p->count.size() << "\n";
    for (const auto& [id, c] : p->count) {
      check_id(id);
      out << "I " << id << " " << c << "\n";
    }
  } else {
    const auto& b = std::get<BprModel>(model);
    const auto& hp = b.params;
    out << "recharness-model bpr d=" << hp.dim << " lr=" << format_double(hp.learning_rate)
        << " reg=" << format_double(hp.reg) << " epochs=" << hp.epochs << " seed=" << hp.seed
        << " users=" << b.user_ids.size() << " items=" << b.item_ids.size() << "\n";
    auto rows = [&](char tag, const std::vector<std::string>& ids, bool users) {
      for (std::size_t r = 0; r < ids.size(); ++r) {
        check_id(ids[r]);
        out << tag << ' ' << ids[r];
        for (double v : users ? b.user(r) : b.item(r)) out << ' ' << format_double(v);
        out << "\n";
      }
    };
    rows('U', b.user_ids, true);
    rows('I', b.item_ids, false);
  }
  return out.str();
}

Model load_model(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty()) throw Error("checkpoint: empty");
  auto head = tokens(lines[0]);
  if (head.size() < 2 || head[0] != "recharness-model") {
    throw Error("checkpoint: missing 'recharness-model' header");
  }
  std::map<std::string, std::string> kv;
  for (std::size_t i = 2; i < head.size(); ++i) {
    auto eq = head[i].find('=');
    if (eq == std::string::npos) throw Error("checkpoint: bad header field " + head[i]);
    kv[head[i].substr(0, eq)] = head[i].substr(eq + 1);
  }
  auto field = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw Error("checkpoint: header lacks " + k);
    return it->second;
  };
  const std::string& kind = head[1];
  if (kind == "random") {
    RandomModel r;
    r.seed = parse_u64(field("seed"));
    for (std::size_t l = 1; l < lines.size(); ++l) {
      auto t = tokens(lines[l]);
      if (t.size() != 2 || t[0] != "I") throw Error("checkpoint: bad random line " + std::to_string(l + 1));
      r.items.push_back(t[1]);
    }
    return r;
  }
  if (kind == "pop") {
    PopModel p;
    for (std::size_t l = 1; l < lines.size(); ++l) {
      auto t = tokens(lines[l]);
      if (t.size() != 3 || t[0] != "I") throw Error("checkpoint: bad pop line " + std::to_string(l + 1));
      p.count[t[1]] = parse_u64(t[2]);
    }
    return p;
  }
  if (kind == "bpr") {
    BprModel b;
    b.params.dim = parse_u64(field("d"));
    b.params.learning_rate = parse_double(field("lr"));
    b.params.reg = parse_double(field("reg"));
    b.params.epochs = parse_u64(field("epochs"));
    b.params.seed = parse_u64(field("seed"));
    if (b.params.dim == 0) throw Error("checkpoint: d must be >= 1");
    for (std::size_t l = 1; l < lines.size(); ++l) {
      auto t = tokens(lines[l]);
      if (t.size() != b.params.dim + 2 || (t[0] != "U" && t[0] != "I")) {
        throw Error("checkpoint: bad bpr line " + std::to_string(l + 1));
      }
      auto& ids = t[0] == "U" ? b.user_ids : b.item_ids;
      auto& factors = t[0] == "U" ? b.user_factors : b.item_factors;
      ids.push_back(t[1]);
      for (std::size_t k = 0; k < b.params.dim; ++k) {
        double v = parse_double(t[k + 2]);
        if (!std::isfinite(v)) throw Error("checkpoint: non-finite factor");
        factors.push_back(v);
      }
    }
    if (!std::is_sorted(b.user_ids.begin(), b.user_ids.end()) ||
        !std::is_sorted(b.item_ids.begin(), b.item_ids.end())) {
      throw Error("checkpoint: entity ids must be sorted");
    }
    return b;
  }
  throw Error("checkpoint: unknown model kind " + kind);
}

}  // namespace recharness::baselines
