#include "recharness/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <set>

#include "recharness/baselines.hpp"
#include "recharness/common.hpp"
#include "recharness/config.hpp"
#include "recharness/corpus.hpp"
#include "recharness/ctr.hpp"
#include "recharness/embedding.hpp"
#include "recharness/evaluator.hpp"
#include "recharness/interest.hpp"

namespace recharness::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

/// Exclusive per-output-directory lock, released on destruction.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw Error("output directory " + dir.string() +
                  " is locked by another invocation (remove " + path_.string() +
                  " if it is stale)");
    }
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

struct Paths {
  fs::path root;

  fs::path dir(std::string_view sub) const { return root / std::string(sub); }
  fs::path corpus_interactions() const { return dir("corpus") / "interactions.jsonl"; }
  fs::path corpus_catalog() const { return dir("corpus") / "catalog.jsonl"; }
  fs::path baseline_model() const { return dir("baseline") / "model.txt"; }
  fs::path global_memory() const { return dir("memory") / "global.jsonl"; }
  fs::path personal_memory() const { return dir("memory") / "personal.jsonl"; }
  fs::path generations() const { return dir("memory") / "generations.jsonl"; }
  fs::path manifest(std::string_view sub) const { return dir(sub) / "manifest.json"; }
};

void require_artifact(const fs::path& p, std::string_view producer) {
  if (!fs::exists(p)) {
    throw Error("missing artifact " + p.string() + "; run `recharness " + std::string(producer) +
                "` first");
  }
}

ojson read_json(const fs::path& p) { return ojson::parse(read_file(p.string())); }

void write_text(const fs::path& p, std::string_view text) { write_file(p.string(), text); }

/// Manifest shared by every subcommand. Contains no wall-clock data so that
/// identical runs produce identical bytes.
ojson base_manifest(std::string_view subcommand, const config::ExperimentConfig& cfg) {
  ojson m;
  m["subcommand"] = subcommand;
  m["config_hash"] = cfg.hash();
  m["config"] = cfg.resolved;
  m["config"].erase("output");
  return m;
}

void add_file_hashes(ojson& manifest, const fs::path& dir, const std::vector<std::string>& files) {
  ojson h = ojson::object();
  for (const auto& f : files) h[f] = sha256_hex(read_file((dir / f).string()));
  manifest["files"] = std::move(h);
}

struct Corpus {
  std::vector<corpus::Interaction> interactions;
  corpus::Catalog catalog;
  corpus::Histories histories;
  std::string hash;
};

Corpus load_corpus(const Paths& paths) {
  require_artifact(paths.corpus_interactions(), "prepare-corpus");
  require_artifact(paths.corpus_catalog(), "prepare-corpus");
  Corpus c;
  c.interactions = corpus::interactions_from_jsonl(read_file(paths.corpus_interactions().string()));
  c.catalog = corpus::catalog_from_jsonl(read_file(paths.corpus_catalog().string()));
  c.histories = corpus::build_histories(c.interactions);
  c.hash = corpus::corpus_hash(c.interactions, c.catalog);
  return c;
}

/// Hash of the fields that decide which users are sampled.
std::string sample_hash(const config::ExperimentConfig& cfg, const std::string& corpus_hash) {
  ojson j;
  j["corpus_hash"] = corpus_hash;
  j["n_users"] = cfg.sample.n_users;
  j["seed"] = cfg.sample.seed;
  j["min_history"] = cfg.sample.min_history;
  return sha256_hex(j.dump());
}

std::vector<corpus::EvalInstance> sample(const config::ExperimentConfig& cfg, const Corpus& c) {
  return corpus::sample_users(c.histories, cfg.sample.n_users, cfg.sample.seed,
                              cfg.sample.min_history);
}

/// Leave-one-out prefixes of every user; the held-out events never reach a
/// baseline or a memory.
std::vector<corpus::Interaction> training_events(const corpus::Histories& histories) {
  std::vector<corpus::Interaction> out;
  for (const auto& [user, h] : histories) {
    if (h.interactions.size() < 2) continue;
    out.insert(out.end(), h.interactions.begin(), h.interactions.end() - 1);
  }
  return out;
}

std::unique_ptr<llm::LanguageModel> make_llm(const config::ExperimentConfig& cfg) {
  if (cfg.llm.provider == "mock") return llm::make_mock(cfg.llm.mock_kind, cfg.llm.mock);
  return std::make_unique<llm::ChatClient>(cfg.llm.endpoint);
}

std::unique_ptr<llm::Embedder> make_embedder(const config::ExperimentConfig& cfg) {
  if (cfg.embedder.provider == "hashed") {
    return std::make_unique<llm::HashedBowEmbedder>(cfg.embedder.dim);
  }
  llm::RemoteEmbedderConfig rc;
  rc.base_url = cfg.embedder.base_url;
  rc.model = cfg.embedder.model;
  rc.api_key_env = cfg.embedder.api_key_env;
  rc.dim = cfg.embedder.dim;
  rc.retry = cfg.llm.endpoint.retry;
  rc.timeout = cfg.llm.endpoint.timeout;
  return std::make_unique<llm::RemoteEmbedder>(rc);
}

std::string describe_llm(const config::ExperimentConfig& cfg) {
  if (cfg.llm.provider == "mock") {
    return "mock:" + std::string(llm::mock_kind_name(cfg.llm.mock_kind));
  }
  return "openai:" + cfg.llm.endpoint.model + " @ " + cfg.llm.endpoint.base_url;
}

std::size_t form_llm_calls(interest::InterestForm form) {
  using F = interest::InterestForm;
  switch (form) {
    case F::RecentWithShortSummary:
    case F::RetrievedPersonalSummary:
    case F::RecentWithLongTermProfile:
      return 1;
    case F::RetrievedPersonalProfileQuery:
      return 2;
    default:
      return 0;
  }
}

std::vector<std::string> item_universe(const Corpus& c) {
  std::set<std::string> ids;
  for (const auto& ev : c.interactions) ids.insert(ev.item_id);
  return {ids.begin(), ids.end()};
}

// ---------------------------------------------------------------------------
// Subcommands

void prepare_corpus(const config::ExperimentConfig& cfg, const Paths& paths, std::ostream& out) {
  const auto& d = cfg.dataset;
  corpus::LoadResult loaded = d.kind == "movielens"
                                  ? corpus::load_movielens(d.ratings, d.movies)
                                  : corpus::load_amazon_books(d.reviews, d.meta);
  if (d.k_core > 0) {
    loaded.interactions = corpus::filter_k_core(loaded.interactions, d.k_core, d.k_core);
  }
  if (!d.descriptions.empty()) {
    corpus::apply_descriptions_jsonl(loaded.catalog, read_file(d.descriptions));
  }
  const auto dir = paths.dir("corpus");
  fs::create_directories(dir);
  write_text(paths.corpus_interactions(), corpus::interactions_to_jsonl(loaded.interactions));
  write_text(paths.corpus_catalog(), corpus::catalog_to_jsonl(loaded.catalog));
  write_text(dir / "warnings.txt", join(loaded.warnings, "\n") + (loaded.warnings.empty() ? "" : "\n"));

  const auto histories = corpus::build_histories(loaded.interactions);
  auto m = base_manifest("prepare-corpus", cfg);
  m["corpus_hash"] = corpus::corpus_hash(loaded.interactions, loaded.catalog);
  m["counts"] = {{"interactions", loaded.interactions.size()},
                 {"users", histories.size()},
                 {"items", item_universe({loaded.interactions, {}, {}, {}}).size()},
                 {"catalog", loaded.catalog.size()},
                 {"warnings", loaded.warnings.size()}};
  add_file_hashes(m, dir, {"interactions.jsonl", "catalog.jsonl"});
  write_text(paths.manifest("corpus"), m.dump(2) + "\n");
  out << "prepared corpus: " << loaded.interactions.size() << " interactions, "
      << histories.size() << " users, " << loaded.catalog.size() << " catalog items -> "
      << dir.string() << "\n";
}

void fit_baseline(const config::ExperimentConfig& cfg, const Paths& paths, std::ostream& out) {
  const auto c = load_corpus(paths);
  const auto train = training_events(c.histories);
  baselines::Model model;
  if (cfg.baseline_kind == "bpr") {
    model = baselines::fit_bpr(train, cfg.bpr);
  } else if (cfg.baseline_kind == "pop") {
    model = baselines::fit_pop(train);
  } else {
    model = baselines::fit_random(train, cfg.bpr.seed);
  }
  const auto dir = paths.dir("baseline");
  fs::create_directories(dir);
  write_text(paths.baseline_model(), baselines::save_model(model));
  auto m = base_manifest("fit-baseline", cfg);
  m["corpus_hash"] = c.hash;
  m["model_kind"] = baselines::model_kind(model);
  m["training_events"] = train.size();
  add_file_hashes(m, dir, {"model.txt"});
  write_text(paths.manifest("baseline"), m.dump(2) + "\n");
  out << "fitted " << baselines::model_kind(model) << " on " << train.size() << " events -> "
      << paths.baseline_model().string() << "\n";
}

void build_memory(const config::ExperimentConfig& cfg, const Paths& paths, std::ostream& out) {
  const auto c = load_corpus(paths);
  const auto instances = sample(cfg, c);
  auto embedder = make_embedder(cfg);
  auto model = make_llm(cfg);
  const auto vocab = templates::Vocabulary::for_domain(cfg.prompt.domain);

  corpus::Catalog used;
  for (const auto& id : item_universe(c)) {
    if (auto it = c.catalog.find(id); it != c.catalog.end()) used.insert(*it);
  }
  const auto global = interest::build_global_memory(used, *embedder);

  corpus::Histories prefixes;
  for (const auto& inst : instances) prefixes[inst.user_id] = {inst.user_id, inst.prefix};
  interest::GenerationCache cache;
  if (fs::exists(paths.generations())) cache.load_jsonl(read_file(paths.generations().string()));
  auto personal = interest::build_personalized_memory(prefixes, c.catalog, *model, *embedder,
                                                      vocab, cache, cfg.llm.endpoint.max_parallel);

  const auto dir = paths.dir("memory");
  fs::create_directories(dir);
  write_text(paths.global_memory(), global.to_jsonl());
  write_text(paths.personal_memory(), personal.memory.to_jsonl());
  write_text(paths.generations(), cache.to_jsonl());
  std::string skipped;
  for (const auto& s : personal.skipped) {
    skipped += ojson{{"user_id", s.user_id}, {"item_id", s.item_id}, {"reason", s.reason}}.dump();
    skipped += "\n";
  }
  write_text(dir / "skipped.jsonl", skipped);

  auto m = base_manifest("build-memory", cfg);
  m["corpus_hash"] = c.hash;
  m["sample_hash"] = sample_hash(cfg, c.hash);
  m["embedder"] = embedder->describe();
  m["llm"] = describe_llm(cfg);
  m["counts"] = {{"global_entries", global.size()},
                 {"personal_entries", personal.memory.size()},
                 {"users", instances.size()},
                 {"skipped", personal.skipped.size()},
                 {"llm_calls", personal.llm_calls}};
  add_file_hashes(m, dir, {"global.jsonl", "personal.jsonl"});
  write_text(paths.manifest("memory"), m.dump(2) + "\n");
  out << "built memory: " << global.size() << " global entries, " << personal.memory.size()
      << " personalized entries for " << instances.size() << " users ("
      << personal.skipped.size() << " skipped, " << personal.llm_calls << " LLM calls) -> "
      << dir.string() << "\n";
}

/// Everything a ranking run needs, loaded from upstream artifacts.
struct RankingSetup {
  Corpus corpus;
  std::vector<corpus::EvalInstance> instances;
  std::vector<std::string> pool;
  std::optional<baselines::Model> model;
  std::optional<interest::InterestMemory> global;
  std::optional<interest::InterestMemory> personal;
  interest::GenerationCache cache;
  std::unique_ptr<llm::Embedder> embedder;
  std::unique_ptr<llm::LanguageModel> llm;
  evaluator::RankingPipeline pipeline;
  ojson inputs = ojson::object();
};

std::unique_ptr<RankingSetup> ranking_setup(const config::ExperimentConfig& cfg,
                                            const Paths& paths) {
  auto s = std::make_unique<RankingSetup>();
  s->corpus = load_corpus(paths);
  s->inputs["corpus_hash"] = s->corpus.hash;
  s->instances = sample(cfg, s->corpus);
  s->pool = item_universe(s->corpus);
  const auto form = interest::form_from_id(cfg.interest.form);

  auto& p = s->pipeline;
  p.form = form;
  p.mode = cfg.candidates.mode;
  p.k = cfg.candidates.k;
  p.prompt = cfg.prompt;
  p.parallelism = cfg.parallelism;
  p.item_pool = &s->pool;

  if (cfg.candidates.mode == evaluator::CandidateMode::Recalled) {
    require_artifact(paths.baseline_model(), "fit-baseline");
    const auto text = read_file(paths.baseline_model().string());
    s->model = baselines::load_model(text);
    s->inputs["baseline_model_sha256"] = sha256_hex(text);
    p.model = &*s->model;
  }

  const bool needs_personal = interest::form_needs_personal_memory(form, cfg.interest.retrieval_memory);
  const bool needs_global = (form == interest::InterestForm::RetrievedItems ||
                             form == interest::InterestForm::RecentAndRetrieved) &&
                            cfg.interest.retrieval_memory == interest::Scope::Global;
  if (needs_personal || needs_global) {
    require_artifact(paths.manifest("memory"), "build-memory");
    const auto mm = read_json(paths.manifest("memory"));
    if (mm.value("sample_hash", "") != sample_hash(cfg, s->corpus.hash)) {
      throw Error("memory under " + paths.dir("memory").string() +
                  " was built for a different corpus or user sample; re-run `recharness "
                  "build-memory`");
    }
    s->inputs["memory_manifest_sha256"] = sha256_hex(read_file(paths.manifest("memory").string()));
  }
  if (needs_personal) {
    require_artifact(paths.personal_memory(), "build-memory");
    s->personal = interest::InterestMemory::from_jsonl(
        interest::Scope::Personalized, read_file(paths.personal_memory().string()));
    if (fs::exists(paths.generations())) {
      s->cache.load_jsonl(read_file(paths.generations().string()));
    }
  }
  if (needs_global) {
    require_artifact(paths.global_memory(), "build-memory");
    s->global = interest::InterestMemory::from_jsonl(interest::Scope::Global,
                                                     read_file(paths.global_memory().string()));
  }

  s->embedder = make_embedder(cfg);
  s->llm = make_llm(cfg);
  auto& ic = p.interest;
  ic.catalog = &s->corpus.catalog;
  ic.global = s->global ? &*s->global : nullptr;
  ic.personal = s->personal ? &*s->personal : nullptr;
  ic.llm = s->llm.get();
  ic.embedder = s->embedder.get();
  ic.cache = &s->cache;
  ic.vocab = templates::Vocabulary::for_domain(cfg.prompt.domain);
  ic.recency_lambda = cfg.interest.recency_lambda;
  ic.retrieval_memory = cfg.interest.retrieval_memory;
  ic.window = cfg.interest.window;
  p.llm = s->llm.get();
  evaluator::validate_pipeline(p);
  return s;
}

void eval_rank(const config::ExperimentConfig& cfg, const Paths& paths, std::ostream& out) {
  const auto s = ranking_setup(cfg, paths);
  const auto report =
      evaluator::run_ranking_eval(s->instances, s->pipeline, cfg.repeat_seeds(), cfg.hash());
  const auto dir = paths.dir("eval-rank");
  fs::create_directories(dir);
  write_text(dir / "report.json", report.to_json());
  write_text(dir / "metrics.csv", report.to_csv(cfg.output.timing));
  write_text(dir / "outputs.jsonl", report.outputs_jsonl());
  std::vector<std::string> files{"report.json", "metrics.csv", "outputs.jsonl"};
  if (cfg.output.timing) {
    write_text(dir / "timing.json", report.timing_json());
  }
  auto m = base_manifest("eval-rank", cfg);
  m["inputs"] = s->inputs;
  m["llm"] = describe_llm(cfg);
  m["users"] = s->instances.size();
  add_file_hashes(m, dir, files);
  write_text(paths.manifest("eval-rank"), m.dump(2) + "\n");
  const auto& a = report.aggregate;
  out << "eval-rank: " << s->instances.size() << " users x " << report.seeds.size()
      << " repeats; coverage " << a.coverage << ", ndcg@1 " << a.ndcg1 << ", ndcg@10 " << a.ndcg10
      << ", ndcg@20 " << a.ndcg20 << ", failures " << a.failures << " -> " << dir.string() << "\n";
}

void probe_bias(const config::ExperimentConfig& cfg, const Paths& paths, std::ostream& out) {
  const auto s = ranking_setup(cfg, paths);
  const auto result = evaluator::position_bias_probe(s->instances, s->pipeline,
                                                     cfg.bias.permutations, cfg.bias.seed);
  const auto dir = paths.dir("probe-bias");
  fs::create_directories(dir);
  write_text(dir / "bias.json", result.to_json());
  auto m = base_manifest("probe-bias", cfg);
  m["inputs"] = s->inputs;
  m["llm"] = describe_llm(cfg);
  add_file_hashes(m, dir, {"bias.json"});
  write_text(paths.manifest("probe-bias"), m.dump(2) + "\n");
  out << "probe-bias: " << result.pairs.size() << " pairs, spearman rho " << result.spearman_rho
      << " (" << result.uncovered << " uncovered, " << result.failed << " failed) -> "
      << dir.string() << "\n";
}

struct CtrSetup {
  Corpus corpus;
  corpus::CtrDataset dataset;
  ctr::CtrSplits splits;
  double threshold = 4.0;
};

CtrSetup ctr_setup(const config::ExperimentConfig& cfg, const Paths& paths) {
  CtrSetup s;
  s.corpus = load_corpus(paths);
  s.threshold = cfg.ctr.resolved_threshold(cfg.dataset.kind);
  s.dataset = corpus::ctr_split(s.corpus.interactions, s.corpus.histories, cfg.ctr.latest_n,
                                cfg.ctr.ratio, s.threshold, cfg.ctr.history_len);
  s.splits = ctr::build_ctr_samples(s.dataset);
  return s;
}

void eval_ctr(const config::ExperimentConfig& cfg, const Paths& paths, std::ostream& out) {
  const auto s = ctr_setup(cfg, paths);
  auto model = make_llm(cfg);
  ctr::CtrEvalOptions opt;
  opt.catalog = &s.corpus.catalog;
  opt.vocab = templates::Vocabulary::for_domain(cfg.prompt.domain);
  opt.threshold = s.threshold;
  opt.parallelism = cfg.parallelism;
  const auto& samples = s.splits.get(cfg.ctr.eval_split);
  std::vector<ctr::CtrReport> reports;
  for (auto style : cfg.ctr.styles) reports.push_back(ctr::run_ctr_eval(samples, *model, style, opt));
  const auto dir = paths.dir("eval-ctr");
  fs::create_directories(dir);
  write_text(dir / "report.json", ctr::ctr_reports_json(reports));
  auto m = base_manifest("eval-ctr", cfg);
  m["corpus_hash"] = s.corpus.hash;
  m["split"] = cfg.ctr.eval_split;
  m["samples"] = samples.size();
  m["threshold"] = s.threshold;
  m["skipped"] = s.dataset.skips.skipped;
  m["llm"] = describe_llm(cfg);
  add_file_hashes(m, dir, {"report.json"});
  write_text(paths.manifest("eval-ctr"), m.dump(2) + "\n");
  out << "eval-ctr: " << samples.size() << " " << cfg.ctr.eval_split << " samples";
  for (const auto& r : reports) {
    out << "; " << prompting::ctr_style_name(r.style) << " accuracy " << r.accuracy;
  }
  out << " -> " << dir.string() << "\n";
}

void export_ft(const config::ExperimentConfig& cfg, const Paths& paths, std::ostream& out) {
  const auto s = ctr_setup(cfg, paths);
  ctr::CtrEvalOptions opt;
  opt.catalog = &s.corpus.catalog;
  opt.vocab = templates::Vocabulary::for_domain(cfg.prompt.domain);
  opt.threshold = s.threshold;
  const auto dir = paths.dir("export-ft");
  fs::create_directories(dir);
  ojson m = base_manifest("export-ft", cfg);
  ojson splits = ojson::array();
  std::vector<std::string> files;
  const std::array<std::size_t, 3> counts{s.splits.train.size(), s.splits.valid.size(),
                                          s.splits.test.size()};
  for (const char* name : {"train", "valid", "test"}) {
    const auto& samples = s.splits.get(name);
    const std::string file = std::string(name) + ".jsonl";
    write_text(dir / file, ctr::export_finetune_jsonl(samples, cfg.ctr.export_style, opt));
    files.push_back(file);
    ctr::ExportManifest em;
    em.split = name;
    em.style = cfg.ctr.export_style;
    em.threshold = s.threshold;
    em.corpus_hash = s.corpus.hash;
    em.config_hash = cfg.hash();
    em.records = samples.size();
    em.window_sizes = s.dataset.window_sizes;
    em.split_counts = counts;
    em.skipped = s.dataset.skips.skipped;
    for (const auto& smp : samples) {
      if (smp.label) ++em.positives;
      const bool missing = std::any_of(smp.context.begin(), smp.context.end(),
                                       [](const corpus::Interaction& e) { return !e.rating; });
      if (missing) ++em.missing_rating_records;
    }
    splits.push_back(ojson::parse(em.to_json()));
  }
  m["splits"] = std::move(splits);
  m["skip_reasons"] = s.dataset.skips.reasons;
  add_file_hashes(m, dir, files);
  write_text(paths.manifest("export-ft"), m.dump(2) + "\n");
  out << "export-ft: " << counts[0] << "/" << counts[1] << "/" << counts[2]
      << " train/valid/test records (" << prompting::ctr_style_name(cfg.ctr.export_style)
      << " style) -> " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// Dry run

void dry_run(const std::string& sub, const config::ExperimentConfig& cfg, const Paths& paths,
             std::ostream& out) {
  out << "plan: " << sub << "\n";
  out << "config hash: " << cfg.hash() << "\n";
  const auto output_dir = sub == "prepare-corpus" ? "corpus"
                          : sub == "fit-baseline" ? "baseline"
                          : sub == "build-memory" ? "memory"
                                                  : sub.c_str();
  out << "output: " << paths.dir(output_dir).string() << "\n";
  out << "llm: " << describe_llm(cfg) << "\n";

  auto artifact = [&](const fs::path& p, const char* producer) {
    out << "input: " << p.string() << " (" << (fs::exists(p) ? "present" : "missing") << ", from "
        << producer << ")\n";
  };
  const bool have_corpus = fs::exists(paths.corpus_interactions());
  std::optional<Corpus> c;
  if (sub != "prepare-corpus") {
    artifact(paths.corpus_interactions(), "prepare-corpus");
    if (have_corpus) c = load_corpus(paths);
  }

  if (sub == "prepare-corpus") {
    const auto& d = cfg.dataset;
    for (const auto& p : d.kind == "movielens" ? std::vector<std::string>{d.ratings, d.movies}
                                               : std::vector<std::string>{d.reviews, d.meta}) {
      if (p.empty() || !fs::exists(p)) {
        throw ConfigError("dataset: input file '" + p + "' does not exist");
      }
      out << "input: " << p << "\n";
    }
    out << "estimated LLM calls: 0\n";
  } else if (sub == "fit-baseline") {
    out << "baseline: " << cfg.baseline_kind << "\n";
    out << "estimated LLM calls: 0\n";
  } else if (sub == "build-memory") {
    if (c) {
      std::size_t calls = 0;
      for (const auto& inst : sample(cfg, *c)) calls += inst.prefix.size();
      out << "estimated LLM calls: " << calls
          << " (one per history item of the sampled users, before cache hits)\n";
    } else {
      out << "estimated LLM calls: unknown until prepare-corpus has run\n";
    }
  } else if (sub == "eval-rank" || sub == "probe-bias") {
    const auto form = interest::form_from_id(cfg.interest.form);
    if (interest::form_needs_personal_memory(form, cfg.interest.retrieval_memory)) {
      artifact(paths.personal_memory(), "build-memory");
    }
    if (cfg.candidates.mode == evaluator::CandidateMode::Recalled) {
      artifact(paths.baseline_model(), "fit-baseline");
    }
    const std::size_t users = cfg.sample.n_users;
    const std::size_t per = cfg.prompt.calls_per_instance();
    const std::size_t reps = sub == "eval-rank" ? cfg.sample.repeats : cfg.bias.permutations;
    const std::size_t interest_calls = users * form_llm_calls(form);
    out << "interest form: " << cfg.interest.form << " (" << interest::form_name(form) << ")\n";
    out << "estimated LLM calls: " << users * reps * per + interest_calls << " = " << users
        << " users x " << reps << (sub == "eval-rank" ? " repeats" : " permutations") << " x "
        << per << " calls + " << interest_calls << " interest calls\n";
  } else if (sub == "eval-ctr") {
    if (c) {
      const auto threshold = cfg.ctr.resolved_threshold(cfg.dataset.kind);
      const auto ds = corpus::ctr_split(c->interactions, c->histories, cfg.ctr.latest_n,
                                        cfg.ctr.ratio, threshold, cfg.ctr.history_len);
      const auto splits = ctr::build_ctr_samples(ds);
      const auto n = splits.get(cfg.ctr.eval_split).size();
      out << "estimated LLM calls: " << n * cfg.ctr.styles.size() << " = " << n << " samples x "
          << cfg.ctr.styles.size() << " styles\n";
    } else {
      out << "estimated LLM calls: unknown until prepare-corpus has run\n";
    }
  } else if (sub == "export-ft") {
    out << "style: " << prompting::ctr_style_name(cfg.ctr.export_style) << "\n";
    out << "estimated LLM calls: 0\n";
  }
}

}  // namespace

int run(const Options& options, std::ostream& out, std::ostream& err) {
  try {
    std::vector<std::string> overrides = options.overrides;
    if (options.seed) overrides.push_back("sample.seed=" + std::to_string(*options.seed));
    if (options.out) overrides.push_back("output.dir=" + ojson(*options.out).dump());
    const auto cfg = config::load(options.config_path, overrides);
    const std::string& sub = options.subcommand;
    if (std::find(std::begin(kSubcommands), std::end(kSubcommands), sub) ==
        std::end(kSubcommands)) {
      throw ConfigError("unknown subcommand '" + sub + "'");
    }
    const Paths paths{fs::path(cfg.output.dir)};
    if (options.dry_run) {
      dry_run(sub, cfg, paths, out);
      return kExitOk;
    }
    if (sub == "prepare-corpus") {
      const auto& d = cfg.dataset;
      for (const auto& p : d.kind == "movielens" ? std::vector<std::string>{d.ratings, d.movies}
                                                 : std::vector<std::string>{d.reviews, d.meta}) {
        if (p.empty() || !fs::exists(p)) {
          throw ConfigError("dataset: input file '" + p + "' does not exist");
        }
      }
    }
    DirLock lock(paths.root);
    if (sub == "prepare-corpus") prepare_corpus(cfg, paths, out);
    else if (sub == "fit-baseline") fit_baseline(cfg, paths, out);
    else if (sub == "build-memory") build_memory(cfg, paths, out);
    else if (sub == "eval-rank") eval_rank(cfg, paths, out);
    else if (sub == "probe-bias") probe_bias(cfg, paths, out);
    else if (sub == "eval-ctr") eval_ctr(cfg, paths, out);
    else export_ft(cfg, paths, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitExperimentError;
  }
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Offline harness for evaluating LLMs as recommenders"};
  app.require_subcommand(1, 1);
  Options options;
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  bool dry = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  const std::vector<std::pair<const char*, const char*>> subs = {
      {"prepare-corpus", "Load and normalize a dataset"},
      {"fit-baseline", "Fit the Random/Pop/BPR baseline on leave-one-out prefixes"},
      {"build-memory", "Build global and personalized interest memories"},
      {"eval-rank", "Run the ranking evaluation"},
      {"probe-bias", "Measure position bias over permuted candidate lists"},
      {"eval-ctr", "Evaluate Yes/No preference prediction"},
      {"export-ft", "Export instruction-tuning JSON Lines"}};
  for (const auto& [name, help] : subs) {
    auto* sc = app.add_subcommand(name, help);
    sc->add_option("--config", config_path, "Experiment config (JSON)");
    sc->add_option("--set", overrides, "Override a config field: dotted.key=value");
    sc->add_flag("--dry-run", dry, "Validate and print the plan without running");
    sc->add_option("--seed", seed, "Override sample.seed");
    sc->add_option("--out", out_dir, "Override output.dir");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitConfigError;
  }
  options.subcommand = app.get_subcommands().front()->get_name();
  options.config_path = config_path;
  options.overrides = overrides;
  options.dry_run = dry;
  options.seed = seed;
  options.out = out_dir;
  return run(options, out, err);
}

}  // namespace recharness::cli
