#include "recharness/config.hpp"

#include <filesystem>

#include "recharness/common.hpp"

namespace recharness::config {

using ojson = nlohmann::ordered_json;

ojson default_document() {
  return ojson::parse(R"({
  "dataset": {"kind": "movielens", "ratings": "", "movies": "", "reviews": "", "meta": "",
              "descriptions": "", "k_core": 0},
  "sample": {"n_users": 200, "seed": 42, "repeats": 3, "min_history": 11, "repeat_seeds": []},
  "interest": {"form": 1, "recency_lambda": 0.1, "window": 10,
               "retrieval_memory": "personalized"},
  "candidates": {"mode": "random", "k": 20},
  "prompt": {"recency_focused": true, "role_prompt": false, "cot_step_by_step": true,
             "least_to_most": false, "icl": "none", "history_len": 10,
             "scheme": "description"},
  "llm": {"provider": "mock",
          "mock": {"kind": "echo", "seed": 0, "drop": 0, "text": ""},
          "base_url": "https://api.openai.com/v1", "model": "gpt-3.5-turbo",
          "api_key_env": "OPENAI_API_KEY", "temperature": 0.0, "max_tokens": 1024,
          "timeout_ms": 60000, "max_retries": 3, "backoff_base_ms": 1000,
          "max_parallel": 4, "cache_dir": "", "bypass_cache": false, "audit_log": ""},
  "embedder": {"provider": "hashed", "dim": 256, "base_url": "", "model": "",
               "api_key_env": "OPENAI_API_KEY"},
  "baseline": {"kind": "bpr", "dim": 64, "lr": 0.05, "reg": 0.0001, "epochs": 30, "seed": 42},
  "ctr": {"latest_n": 10000, "ratio": [8, 1, 1], "threshold": null, "history_len": 10,
          "styles": ["implicit", "explicit", "hybrid", "cot"], "eval_split": "test",
          "export_style": "implicit"},
  "bias": {"permutations": 5, "seed": 7},
  "output": {"dir": "out", "timing": false},
  "parallelism": 1
})");
}

namespace {

std::string type_of(const ojson& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

void merge(ojson& base, const ojson& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path.empty() ? "config must be a JSON object"
                                                       : path + ": expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError(field + ": unknown field");
    auto& slot = base[key];
    if (slot.is_object()) {
      merge(slot, value, field);
      continue;
    }
    if (!slot.is_null() && !value.is_null() && type_of(slot) != type_of(value)) {
      throw ConfigError(field + ": expected " + type_of(slot) + ", got " + type_of(value));
    }
    slot = value;
  }
}

template <typename T>
T get_num(const ojson& doc, const std::string& field, const ojson& v) {
  if (!v.is_number()) throw ConfigError(field + ": expected a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(field + ": expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        throw ConfigError(field + ": must be >= 0");
      }
    }
  }
  (void)doc;
  return v.get<T>();
}

struct Reader {
  const ojson& doc;

  const ojson& at(const std::string& dotted) const {
    const ojson* cur = &doc;
    for (const auto& part : split(dotted, '.')) cur = &cur->at(part);
    return *cur;
  }
  std::string str(const std::string& f) const {
    const auto& v = at(f);
    if (!v.is_string()) throw ConfigError(f + ": expected a string");
    return v.get<std::string>();
  }
  bool flag(const std::string& f) const {
    const auto& v = at(f);
    if (!v.is_boolean()) throw ConfigError(f + ": expected a boolean");
    return v.get<bool>();
  }
  std::size_t size(const std::string& f) const { return get_num<std::size_t>(doc, f, at(f)); }
  std::uint64_t u64(const std::string& f) const { return get_num<std::uint64_t>(doc, f, at(f)); }
  int integer(const std::string& f) const { return get_num<int>(doc, f, at(f)); }
  double real(const std::string& f) const { return get_num<double>(doc, f, at(f)); }
};

template <typename F>
auto wrap(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(field, 0) == 0) throw;
    throw ConfigError(field + ": " + what);
  } catch (const Error& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void apply_override(ojson& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  ojson value;
  try {
    value = ojson::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  const auto parts = split(key, '.');
  ojson* cur = &doc;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    auto& next = (*cur)[parts[i]];
    if (next.is_null()) next = ojson::object();
    if (!next.is_object()) throw ConfigError(key + ": '" + parts[i] + "' is not an object");
    cur = &next;
  }
  (*cur)[parts.back()] = std::move(value);
}

double CtrConfig::resolved_threshold(const std::string& dataset_kind) const {
  return threshold ? *threshold : corpus::default_ctr_threshold(dataset_kind);
}

std::string ExperimentConfig::hash() const {
  ojson copy = resolved;
  copy.erase("output");
  return sha256_hex(copy.dump());
}

std::vector<std::uint64_t> ExperimentConfig::repeat_seeds() const {
  if (!sample.repeat_seeds.empty()) return sample.repeat_seeds;
  std::vector<std::uint64_t> out;
  for (std::size_t r = 0; r < sample.repeats; ++r) out.push_back(mix_seed(sample.seed, r + 1));
  return out;
}

ExperimentConfig resolve(const ojson& user, const std::vector<std::string>& overrides) {
  ojson doc = default_document();
  ojson patched = user.is_null() ? ojson::object() : user;
  for (const auto& o : overrides) apply_override(patched, o);
  merge(doc, patched, "");

  const Reader r{doc};
  ExperimentConfig c;
  c.resolved = doc;

  auto& d = c.dataset;
  d.kind = r.str("dataset.kind");
  require(d.kind == "movielens" || d.kind == "amazon_books",
          "dataset.kind: expected movielens or amazon_books, got '" + d.kind + "'");
  d.ratings = r.str("dataset.ratings");
  d.movies = r.str("dataset.movies");
  d.reviews = r.str("dataset.reviews");
  d.meta = r.str("dataset.meta");
  d.descriptions = r.str("dataset.descriptions");
  d.k_core = r.size("dataset.k_core");

  auto& s = c.sample;
  s.n_users = r.size("sample.n_users");
  require(s.n_users >= 1, "sample.n_users: must be >= 1");
  s.seed = r.u64("sample.seed");
  s.repeats = r.size("sample.repeats");
  require(s.repeats >= 1, "sample.repeats: must be >= 1");
  s.min_history = r.size("sample.min_history");
  require(s.min_history >= 2, "sample.min_history: must be >= 2");
  for (std::size_t i = 0; i < r.at("sample.repeat_seeds").size(); ++i) {
    s.repeat_seeds.push_back(
        get_num<std::uint64_t>(doc, "sample.repeat_seeds", r.at("sample.repeat_seeds")[i]));
  }
  require(s.repeat_seeds.empty() || s.repeat_seeds.size() == s.repeats,
          "sample.repeat_seeds: expected " + std::to_string(s.repeats) + " seeds, got " +
              std::to_string(s.repeat_seeds.size()));

  auto& in = c.interest;
  const int form = r.integer("interest.form");
  wrap("interest.form", [&] { return interest::form_from_id(form); });
  in.form = form;
  in.recency_lambda = r.real("interest.recency_lambda");
  require(in.recency_lambda >= 0.0, "interest.recency_lambda: must be >= 0");
  in.window = r.size("interest.window");
  require(in.window >= 1, "interest.window: must be >= 1");
  const auto mem = r.str("interest.retrieval_memory");
  require(mem == "global" || mem == "personalized",
          "interest.retrieval_memory: expected global or personalized, got '" + mem + "'");
  in.retrieval_memory = mem == "global" ? interest::Scope::Global : interest::Scope::Personalized;

  c.candidates.mode = wrap("candidates.mode", [&] {
    return evaluator::parse_candidate_mode(r.str("candidates.mode"));
  });
  c.candidates.k = r.size("candidates.k");
  require(c.candidates.k >= 1, "candidates.k: must be >= 1");

  auto& p = c.prompt;
  p.recency_focused = r.flag("prompt.recency_focused");
  p.role_prompt = r.flag("prompt.role_prompt");
  p.cot_step_by_step = r.flag("prompt.cot_step_by_step");
  p.least_to_most = r.flag("prompt.least_to_most");
  p.icl = wrap("prompt.icl", [&] { return prompting::parse_icl_mode(r.str("prompt.icl")); });
  p.history_len = r.size("prompt.history_len");
  require(p.history_len >= 1, "prompt.history_len: must be >= 1");
  p.scheme =
      wrap("prompt.scheme", [&] { return candidates::parse_scheme(r.str("prompt.scheme")); });
  require(p.scheme.kind != candidates::SchemeKind::TokenLetters || c.candidates.k <= 26,
          "prompt.scheme: letter identifiers support at most 26 candidates (candidates.k = " +
              std::to_string(c.candidates.k) + ")");
  p.domain = d.kind == "amazon_books" ? templates::Domain::Book : templates::Domain::Movie;

  auto& l = c.llm;
  l.provider = r.str("llm.provider");
  require(l.provider == "mock" || l.provider == "openai",
          "llm.provider: expected mock or openai, got '" + l.provider + "'");
  l.mock_kind =
      wrap("llm.mock.kind", [&] { return llm::parse_mock_kind(r.str("llm.mock.kind")); });
  l.mock.seed = r.u64("llm.mock.seed");
  l.mock.drop = r.size("llm.mock.drop");
  l.mock.text = r.str("llm.mock.text");
  auto& e = l.endpoint;
  e.base_url = r.str("llm.base_url");
  e.model = r.str("llm.model");
  e.api_key_env = r.str("llm.api_key_env");
  e.temperature = r.real("llm.temperature");
  e.max_tokens = r.integer("llm.max_tokens");
  e.timeout = std::chrono::milliseconds(r.integer("llm.timeout_ms"));
  e.retry.max_retries = r.integer("llm.max_retries");
  require(e.retry.max_retries >= 0, "llm.max_retries: must be >= 0");
  e.retry.backoff_base = std::chrono::milliseconds(r.integer("llm.backoff_base_ms"));
  e.max_parallel = r.integer("llm.max_parallel");
  require(e.max_parallel >= 1, "llm.max_parallel: must be >= 1");
  if (!r.str("llm.cache_dir").empty()) e.cache_dir = r.str("llm.cache_dir");
  e.bypass_cache = r.flag("llm.bypass_cache");
  if (!r.str("llm.audit_log").empty()) e.audit_log = r.str("llm.audit_log");
  if (l.provider == "openai") {
    require(!e.base_url.empty(), "llm.base_url: required for provider openai");
    require(!e.model.empty(), "llm.model: required for provider openai");
  }

  auto& em = c.embedder;
  em.provider = r.str("embedder.provider");
  require(em.provider == "hashed" || em.provider == "remote",
          "embedder.provider: expected hashed or remote, got '" + em.provider + "'");
  em.dim = r.size("embedder.dim");
  require(em.provider == "remote" || em.dim >= 1, "embedder.dim: must be >= 1");
  em.base_url = r.str("embedder.base_url");
  em.model = r.str("embedder.model");
  em.api_key_env = r.str("embedder.api_key_env");
  if (em.provider == "remote") {
    require(!em.base_url.empty(), "embedder.base_url: required for provider remote");
    require(!em.model.empty(), "embedder.model: required for provider remote");
  }

  c.baseline_kind = r.str("baseline.kind");
  require(c.baseline_kind == "bpr" || c.baseline_kind == "pop" || c.baseline_kind == "random",
          "baseline.kind: expected bpr, pop or random, got '" + c.baseline_kind + "'");
  c.bpr.dim = r.size("baseline.dim");
  require(c.bpr.dim >= 1, "baseline.dim: must be >= 1");
  c.bpr.learning_rate = r.real("baseline.lr");
  c.bpr.reg = r.real("baseline.reg");
  c.bpr.epochs = r.size("baseline.epochs");
  c.bpr.seed = r.u64("baseline.seed");

  auto& t = c.ctr;
  t.latest_n = r.size("ctr.latest_n");
  require(t.latest_n >= 1, "ctr.latest_n: must be >= 1");
  const auto& ratio = r.at("ctr.ratio");
  require(ratio.is_array() && ratio.size() == 3, "ctr.ratio: expected three integers");
  for (std::size_t i = 0; i < 3; ++i) t.ratio[i] = get_num<std::size_t>(doc, "ctr.ratio", ratio[i]);
  require(t.ratio[0] + t.ratio[1] + t.ratio[2] > 0, "ctr.ratio: must not be all zero");
  if (!r.at("ctr.threshold").is_null()) t.threshold = r.real("ctr.threshold");
  t.history_len = r.size("ctr.history_len");
  require(t.history_len >= 1, "ctr.history_len: must be >= 1");
  t.styles.clear();
  for (const auto& v : r.at("ctr.styles")) {
    require(v.is_string(), "ctr.styles: expected strings");
    t.styles.push_back(
        wrap("ctr.styles", [&] { return prompting::parse_ctr_style(v.get<std::string>()); }));
  }
  require(!t.styles.empty(), "ctr.styles: at least one style is required");
  t.eval_split = r.str("ctr.eval_split");
  require(t.eval_split == "train" || t.eval_split == "valid" || t.eval_split == "test",
          "ctr.eval_split: expected train, valid or test");
  t.export_style = wrap("ctr.export_style",
                        [&] { return prompting::parse_ctr_style(r.str("ctr.export_style")); });

  c.bias.permutations = r.size("bias.permutations");
  require(c.bias.permutations >= 2, "bias.permutations: must be >= 2");
  c.bias.seed = r.u64("bias.seed");

  c.output.dir = r.str("output.dir");
  require(!c.output.dir.empty(), "output.dir: must not be empty");
  c.output.timing = r.flag("output.timing");
  c.parallelism = r.integer("parallelism");
  require(c.parallelism >= 1, "parallelism: must be >= 1");
  return c;
}

ExperimentConfig load(const std::optional<std::string>& path,
                      const std::vector<std::string>& overrides) {
  ojson user = ojson::object();
  if (path) {
    if (!std::filesystem::exists(*path)) throw ConfigError("config file not found: " + *path);
    try {
      user = ojson::parse(read_file(*path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(*path + ": invalid JSON: " + e.what());
    }
  }
  return resolve(user, overrides);
}

}  // namespace recharness::config
