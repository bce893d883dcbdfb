#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "kgeu/baselines.hpp"
#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"
#include "kgeu/evaluation.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/graphdpo.hpp"
#include "kgeu/pretrain.hpp"
#include "kgeu/splits.hpp"
#include "kgeu/synthetic.hpp"
#include "kgeu/theory.hpp"

namespace kgeu {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

inline constexpr const char* kOutputRootEnv = "KGEU_OUTPUT_ROOT";
inline constexpr const char* kDefaultOutputRoot = "kgeu_runs";
inline constexpr const char* kToolVersion = "0.1.0";

struct BaselineConfig {
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
};

struct TheoryConfig {
  std::size_t instances = 20;
  std::uint64_t seed = 0;
  std::size_t monte_carlo_draws = 1000000;
  /// Added to c1 before checking; a nonzero value must make the run fail.
  double corrupt_constant = 0.0;
  double tolerance = 1e-12;
};

struct RunConfig {
  std::string dataset;
  /// Split directory; defaults to <output>/splits.
  std::string splits;
  std::string checkpoint;
  BuildConfig build;
  PretrainConfig pretrain;
  UnlearnConfig unlearn;
  BaselineConfig baseline;
  RankingConfig eval;
  TheoryConfig theory;
  Method method = Method::graphdpo;
  std::string output;
  /// Evaluate a single step; 0 evaluates every step.
  std::size_t step = 0;
  std::string export_path;
  bool export_preferences = false;
  /// Off writes 0 for every wall-clock field so outputs are byte-reproducible.
  bool timing = true;

  fs::path output_dir() const { return output; }
  fs::path splits_dir() const { return splits.empty() ? fs::path(output) / "splits" : fs::path(splits); }
};

// Enum names accepted by the config file and flags.

inline const std::map<std::string, Method>& method_names() {
  static const std::map<std::string, Method> m{{"graphdpo", Method::graphdpo},
                                               {"retrain", Method::retrain},
                                               {"finetune", Method::finetune},
                                               {"ng", Method::neg_gradient}};
  return m;
}
inline const std::map<std::string, QuotaMode>& quota_names() {
  static const std::map<std::string, QuotaMode> m{{"constant", QuotaMode::constant},
                                                  {"candidate_relative", QuotaMode::candidate_relative}};
  return m;
}
inline const std::map<std::string, PreferredSampling>& sampling_names() {
  static const std::map<std::string, PreferredSampling> m{{"uniform", PreferredSampling::uniform},
                                                          {"out_boundary", PreferredSampling::out_boundary}};
  return m;
}
inline const std::map<std::string, ReplayForm>& replay_form_names() {
  static const std::map<std::string, ReplayForm> m{{"distance", ReplayForm::distance}, {"score", ReplayForm::score}};
  return m;
}

template <class E>
std::string enum_name(const std::map<std::string, E>& names, E value) {
  for (const auto& [k, v] : names)
    if (v == value) return k;
  return "?";
}

template <class E>
E enum_value(const std::map<std::string, E>& names, const std::string& s, const char* what) {
  auto it = names.find(s);
  if (it == names.end()) throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
  return it->second;
}

inline ojson to_json(const RunConfig& c) {
  ojson j;
  j["dataset"] = c.dataset;
  j["splits"] = c.splits_dir().string();
  j["checkpoint"] = c.checkpoint;
  j["method"] = to_string(c.method);
  j["build"] = {{"rate", c.build.rate},
                {"steps", c.build.steps},
                {"seed", c.build.seed},
                {"quota_mode", to_string(c.build.quota)}};
  j["pretrain"] = {{"dim", c.pretrain.dim},
                   {"margin", c.pretrain.margin},
                   {"learning_rate", c.pretrain.learning_rate},
                   {"epochs", c.pretrain.epochs},
                   {"batch_size", c.pretrain.batch_size},
                   {"negatives_per_positive", c.pretrain.negatives_per_positive},
                   {"seed", c.pretrain.seed}};
  const LossWeights& w = c.unlearn.weights;
  j["unlearn"] = {{"beta", w.beta},
                  {"lambda_dpo", w.dpo},
                  {"lambda_replay", w.replay},
                  {"lambda_distill", w.distill},
                  {"replay_margin", w.replay_margin},
                  {"epochs", c.unlearn.epochs},
                  {"patience", c.unlearn.patience},
                  {"learning_rate", c.unlearn.learning_rate},
                  {"batch_size", c.unlearn.batch_size},
                  {"sampling", enum_name(sampling_names(), c.unlearn.sampling)},
                  {"resample_each_epoch", c.unlearn.resample_each_epoch},
                  {"replay_form", enum_name(replay_form_names(), c.unlearn.replay_form)},
                  {"replay_cap_fraction", c.unlearn.replay_cap_fraction},
                  {"seed", c.unlearn.seed}};
  j["baseline"] = {{"epochs", c.baseline.epochs}, {"learning_rate", c.baseline.learning_rate}};
  j["eval"] = {{"filtered", c.eval.filtered}, {"threads", c.eval.threads}};
  j["theory"] = {{"instances", c.theory.instances},
                 {"seed", c.theory.seed},
                 {"monte_carlo_draws", c.theory.monte_carlo_draws},
                 {"corrupt_constant", c.theory.corrupt_constant},
                 {"tolerance", c.theory.tolerance}};
  j["output"] = c.output;
  j["step"] = c.step;
  j["export_path"] = c.export_path;
  j["export_preferences"] = c.export_preferences;
  j["timing"] = c.timing;
  return j;
}

namespace detail {

/// Reads the listed keys of `j` into fields; any other key is an error.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError("config section '" + section_ + "' must be an object");
  }

  template <class T>
  FieldReader& field(const char* key, T& out) {
    known_.push_back(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + path(key) + "': " + e.what());
    }
    return *this;
  }

  template <class E>
  FieldReader& choice(const char* key, E& out, const std::map<std::string, E>& names) {
    std::string s;
    bool present = j_.contains(key);
    field(key, s);
    if (present) out = enum_value(names, s, key);
    return *this;
  }

  FieldReader& section(const char* key, const std::function<void(FieldReader&)>& body) {
    known_.push_back(key);
    if (!j_.contains(key)) return *this;
    FieldReader sub(j_.at(key), path(key));
    body(sub);
    sub.finish();
    return *this;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
        throw ConfigError("unknown config key '" + path(key.c_str()) + "'");
      }
    }
  }

 private:
  std::string path(const char* key) const { return section_.empty() ? key : section_ + "." + key; }
  const nlohmann::json& j_;
  std::string section_;
  std::vector<std::string> known_;
};

}  // namespace detail

/// Applies a JSON config document over `c`; absent keys keep their values.
inline void apply_config(RunConfig& c, const nlohmann::json& j) {
  detail::FieldReader r(j, "");
  r.field("dataset", c.dataset)
      .field("splits", c.splits)
      .field("checkpoint", c.checkpoint)
      .choice("method", c.method, method_names())
      .field("output", c.output)
      .field("step", c.step)
      .field("export_path", c.export_path)
      .field("export_preferences", c.export_preferences)
      .field("timing", c.timing)
      .section("build", [&](detail::FieldReader& s) {
        s.field("rate", c.build.rate).field("steps", c.build.steps).field("seed", c.build.seed);
        s.choice("quota_mode", c.build.quota, quota_names());
      })
      .section("pretrain", [&](detail::FieldReader& s) {
        s.field("dim", c.pretrain.dim)
            .field("margin", c.pretrain.margin)
            .field("learning_rate", c.pretrain.learning_rate)
            .field("epochs", c.pretrain.epochs)
            .field("batch_size", c.pretrain.batch_size)
            .field("negatives_per_positive", c.pretrain.negatives_per_positive)
            .field("seed", c.pretrain.seed);
      })
      .section("unlearn", [&](detail::FieldReader& s) {
        LossWeights& w = c.unlearn.weights;
        s.field("beta", w.beta)
            .field("lambda_dpo", w.dpo)
            .field("lambda_replay", w.replay)
            .field("lambda_distill", w.distill)
            .field("replay_margin", w.replay_margin)
            .field("epochs", c.unlearn.epochs)
            .field("patience", c.unlearn.patience)
            .field("learning_rate", c.unlearn.learning_rate)
            .field("batch_size", c.unlearn.batch_size)
            .choice("sampling", c.unlearn.sampling, sampling_names())
            .field("resample_each_epoch", c.unlearn.resample_each_epoch)
            .choice("replay_form", c.unlearn.replay_form, replay_form_names())
            .field("replay_cap_fraction", c.unlearn.replay_cap_fraction)
            .field("seed", c.unlearn.seed);
      })
      .section("baseline", [&](detail::FieldReader& s) {
        s.field("epochs", c.baseline.epochs).field("learning_rate", c.baseline.learning_rate);
      })
      .section("eval", [&](detail::FieldReader& s) {
        s.field("filtered", c.eval.filtered).field("threads", c.eval.threads);
      })
      .section("theory", [&](detail::FieldReader& s) {
        s.field("instances", c.theory.instances)
            .field("seed", c.theory.seed)
            .field("monte_carlo_draws", c.theory.monte_carlo_draws)
            .field("corrupt_constant", c.theory.corrupt_constant)
            .field("tolerance", c.theory.tolerance);
      });
  r.finish();
}

inline void load_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  apply_config(c, j);
}

inline std::string default_output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? env : kDefaultOutputRoot;
}

// Persistence helpers.

inline ojson provenance(const RunConfig& c, const char* command) {
  return {{"tool", "kgeu"}, {"version", kToolVersion}, {"command", command}, {"config", to_json(c)}};
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

inline void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

inline KnowledgeGraph load_dataset(const RunConfig& c) {
  if (c.dataset.empty()) throw ConfigError("--dataset is required");
  std::ifstream in(c.dataset, std::ios::binary);
  if (!in) throw IoError(c.dataset, "cannot open dataset");
  return parse_triples(in);
}

inline EmbeddingModel load_model_for(const RunConfig& c, const KnowledgeGraph& graph) {
  if (c.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  EmbeddingModel model = load_checkpoint(c.checkpoint);
  if (model.num_entities() != graph.num_entities() || model.num_relations() != graph.num_relations()) {
    throw DomainError("checkpoint shape " + std::to_string(model.num_entities()) + "x" +
                      std::to_string(model.num_relations()) + " does not match the dataset " +
                      std::to_string(graph.num_entities()) + "x" + std::to_string(graph.num_relations()));
  }
  return model;
}

inline void save_checkpoint_with_sidecar(const fs::path& path, const EmbeddingModel& model, ojson meta) {
  save_checkpoint(path.string(), model);
  write_json(path.string() + ".json", meta);
}

inline ojson to_json(const EvalReport& r) {
  return {{"step", r.step}, {"m_f", r.m_f},           {"m_r", r.m_r},         {"m_avg", r.m_avg},
          {"m_f1", r.m_f1}, {"n_forget", r.n_forget}, {"n_remain", r.n_remain}, {"seconds", r.seconds}};
}

inline ojson to_json(const EpochLog& l, std::size_t step) {
  ojson j{{"step", step}, {"epoch", l.epoch}, {"dpo", l.dpo}, {"replay", l.replay}, {"distill", l.distill},
          {"total", l.total}};
  if (l.forget_mrr >= 0.0) j["forget_mrr"] = l.forget_mrr;
  j["seconds"] = l.seconds;
  return j;
}

/// entity-id, name, then the vector with 17 significant digits.
inline void write_embedding_tsv(std::ostream& out, const KnowledgeGraph& graph, const EmbeddingModel& model) {
  const auto old = out.precision(17);
  for (EntityId e = 0; e < model.num_entities(); ++e) {
    out << e << '\t' << graph.entity_name(e);
    for (Eigen::Index j = 0; j < model.entities().cols(); ++j) out << '\t' << model.entities()(e, j);
    out << '\n';
  }
  out.precision(old);
}

/// Entity table read back from write_embedding_tsv output.
inline Table read_embedding_tsv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, name, cell;
    if (!std::getline(fields, id, '\t') || !std::getline(fields, name, '\t')) throw ParseError(line_no, "short row");
    if (std::stoul(id) != rows.size()) throw ParseError(line_no, "entity ids out of order");
    std::vector<double> v;
    while (std::getline(fields, cell, '\t')) v.push_back(std::strtod(cell.c_str(), nullptr));
    if (!rows.empty() && v.size() != rows.front().size()) throw ParseError(line_no, "ragged row");
    rows.push_back(std::move(v));
  }
  Table t(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

// Commands. Each returns normally on success and throws kgeu::Error otherwise.

inline void cmd_build(const RunConfig& c, std::ostream& out) {
  c.build.validate();
  const KnowledgeGraph graph = load_dataset(c);
  const UnlearnTimeline timeline = build_timeline(graph, c.build);
  write_manifest(timeline, graph, c.splits_dir(), provenance(c, "build"));
  for (std::size_t i = 1; i <= timeline.size(); ++i) {
    out << "step " << i << ": forget " << timeline.step(i).forget.size() << ", remain "
        << timeline.step(i).remain.size() << '\n';
  }
  out << "wrote " << (c.splits_dir() / kManifestName).string() << '\n';
}

inline void cmd_pretrain(const RunConfig& c, std::ostream& out) {
  c.pretrain.validate();
  const KnowledgeGraph graph = load_dataset(c);
  ensure_dir(c.output_dir());
  std::ostringstream log;
  auto last = std::chrono::steady_clock::now();
  MarginTrainingOptions options;
  options.on_epoch = [&](std::size_t epoch, double loss) {
    const auto now = std::chrono::steady_clock::now();
    const double seconds = c.timing ? std::chrono::duration<double>(now - last).count() : 0.0;
    last = now;
    log << ojson{{"epoch", epoch}, {"loss", loss}, {"seconds", seconds}}.dump() << '\n';
    spdlog::debug("pretrain epoch {} loss {:.6f}", epoch, loss);
  };
  const EmbeddingModel model = pretrain(graph, c.pretrain, options);
  write_text(c.output_dir() / "pretrain_log.jsonl", log.str());
  const fs::path ckpt = c.output_dir() / "pretrained.ckpt";
  save_checkpoint_with_sidecar(ckpt, model, provenance(c, "pretrain"));
  out << "wrote " << ckpt.string() << '\n';
}

inline void cmd_unlearn(const RunConfig& c, std::ostream& out) {
  c.unlearn.validate();
  c.pretrain.validate();
  const KnowledgeGraph graph = load_dataset(c);
  const UnlearnTimeline timeline = read_manifest(graph, c.splits_dir());
  const Evaluator evaluator(graph.triples(), c.eval);
  EmbeddingModel start =
      c.method == Method::retrain && c.checkpoint.empty() ? init_model(graph, c.pretrain) : load_model_for(c, graph);

  const fs::path dir = c.output_dir();
  ensure_dir(dir);
  std::ostringstream csv, log;
  csv << kReportCsvHeader << '\n';
  ojson reports = ojson::array();
  const ojson prov = provenance(c, "unlearn");

  auto on_step = [&](const StepOutcome& o) {
    EvalReport r = o.report;
    if (!c.timing) r.seconds = 0.0;
    write_report_row(csv, r);
    reports.push_back(to_json(r));
    for (EpochLog l : o.epochs) {
      if (!c.timing) l.seconds = 0.0;
      log << to_json(l, r.step).dump() << '\n';
    }
    ojson meta = prov;
    meta["step"] = r.step;
    meta["report"] = to_json(r);
    save_checkpoint_with_sidecar(dir / ("step_" + std::to_string(r.step) + ".ckpt"), o.model, meta);
    if (c.export_preferences && !o.preferences.empty()) {
      std::ostringstream tsv;
      write_preference_tsv(tsv, graph, o.preferences);
      write_text(dir / ("step_" + std::to_string(r.step) + "_preferences.tsv"), tsv.str());
    }
    spdlog::info("step {}: m_f {:.4f} m_r {:.4f} m_avg {:.4f} m_f1 {:.4f}", r.step, r.m_f, r.m_r, r.m_avg, r.m_f1);
  };

  if (c.method == Method::graphdpo) {
    run_timeline(start, graph, timeline, c.unlearn, evaluator, on_step);
  } else {
    PretrainConfig pc = c.pretrain;
    if (c.method != Method::retrain) {
      pc.epochs = c.baseline.epochs;
      pc.learning_rate = c.baseline.learning_rate;
    }
    run_baseline_timeline(c.method, start, graph, timeline, pc, evaluator, on_step);
  }

  write_text(dir / "report.csv", csv.str());
  write_text(dir / "run_log.jsonl", log.str());
  ojson summary = prov;
  summary["reports"] = reports;
  write_json(dir / "summary.json", summary);
  out << csv.str();
}

inline void cmd_evaluate(const RunConfig& c, std::ostream& out) {
  const KnowledgeGraph graph = load_dataset(c);
  const UnlearnTimeline timeline = read_manifest(graph, c.splits_dir());
  const EmbeddingModel model = load_model_for(c, graph);
  const Evaluator evaluator(graph.triples(), c.eval);
  std::vector<std::size_t> steps;
  if (c.step == 0) {
    for (std::size_t i = 1; i <= timeline.size(); ++i) steps.push_back(i);
  } else {
    timeline.step(c.step);
    steps.push_back(c.step);
  }
  std::ostringstream csv;
  csv << kReportCsvHeader << '\n';
  ojson reports = ojson::array();
  for (std::size_t i : steps) {
    const auto start = std::chrono::steady_clock::now();
    EvalReport r = evaluate_step(model, timeline, i, evaluator);
    r.seconds = c.timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() : 0.0;
    write_report_row(csv, r);
    reports.push_back(to_json(r));
  }
  ensure_dir(c.output_dir());
  write_text(c.output_dir() / "evaluate.csv", csv.str());
  ojson summary = provenance(c, "evaluate");
  summary["reports"] = reports;
  write_json(c.output_dir() / "evaluate.json", summary);
  out << csv.str();
}

struct TheoryReport {
  ojson json;
  bool passed = true;
};

/// Seeded Theorem 1/2 instances, the |E| sweep and a Monte-Carlo check.
inline TheoryReport run_theory_checks(const TheoryConfig& t) {
  if (t.instances < 1) throw ConfigError("theory instances must be at least 1");
  TheoryReport report;
  ojson instances = ojson::array();
  for (std::size_t k = 0; k < t.instances; ++k) {
    const std::uint64_t seed = t.seed + k;
    const std::size_t n = 5 + (k * 7919) % 46;
    const std::size_t triples = std::max<std::size_t>(n, 10);
    TheoryInstance inst = theory_instance(n, 3, triples, std::min<std::size_t>(triples, 10), 4, seed);
    const TheoremCheck one = verify_theorem1(inst.model, inst.graph, inst.queries, t.corrupt_constant);
    ojson row{{"seed", seed}, {"theorem1", to_json(one)}};
    bool ok = one.residual < t.tolerance && one.bounds_hold();
    try {
      const TheoremCheck two = verify_theorem2(inst.model, inst.graph, inst.queries, t.corrupt_constant);
      row["theorem2"] = to_json(two);
      ok = ok && two.residual < t.tolerance;
    } catch (const DomainError& e) {
      row["theorem2"] = {{"skipped", e.what()}};
    }
    row["passed"] = ok;
    report.passed = report.passed && ok;
    instances.push_back(std::move(row));
  }
  report.json["instances"] = std::move(instances);

  ojson sweep = ojson::array();
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (std::size_t n : {10, 100, 1000}) {
    TheoryInstance inst = boundary_sweep_instance(n, 3, 4, t.seed);
    const TheoremCheck c = verify_theorem2(inst.model, inst.graph, inst.queries, t.corrupt_constant);
    monotone = monotone && c.affine_gap < prev;
    prev = c.affine_gap;
    sweep.push_back(to_json(c));
  }
  report.json["sweep"] = {{"boundary", 3}, {"instances", sweep}, {"monotone", monotone}};
  report.passed = report.passed && monotone;

  if (t.monte_carlo_draws > 0) {
    TheoryInstance inst = theory_instance(30, 3, 40, 10, 4, t.seed);
    const double exact = preference_expectation_exact(inst.model, inst.graph, inst.queries, PreferredSampling::out_boundary);
    const std::size_t per = std::max<std::size_t>(2, t.monte_carlo_draws / inst.queries.size());
    const MonteCarloEstimate mc = preference_expectation_sampled(inst.model, inst.graph, inst.queries,
                                                                 PreferredSampling::out_boundary, per, t.seed);
    const bool within = std::abs(mc.estimate - exact) <= 4.0 * mc.standard_error;
    report.json["monte_carlo"] = {{"exact", exact},
                                  {"estimate", mc.estimate},
                                  {"standard_error", mc.standard_error},
                                  {"draws", mc.draws},
                                  {"within_4_se", within}};
    report.passed = report.passed && within;
  }
  report.json["passed"] = report.passed;
  return report;
}

inline void cmd_verify_theory(const RunConfig& c, std::ostream& out) {
  const TheoryReport r = run_theory_checks(c.theory);
  ensure_dir(c.output_dir());
  ojson j = provenance(c, "verify-theory");
  j["report"] = r.json;
  write_json(c.output_dir() / "theory_report.json", j);
  std::size_t failed = 0;
  for (const auto& row : r.json["instances"]) {
    const auto& t1 = row["theorem1"];
    out << "instance seed " << row["seed"].get<std::uint64_t>() << " |E|=" << t1["entities"].get<std::size_t>()
        << " c1=" << t1["c1"].get<double>() << " c2=" << t1["c2"].get<double>()
        << " residual=" << t1["residual"].get<double>() << (row["passed"].get<bool>() ? " ok" : " FAILED") << '\n';
    if (!row["passed"].get<bool>()) ++failed;
  }
  out << "sweep monotone: " << (r.json["sweep"]["monotone"].get<bool>() ? "yes" : "no") << '\n';
  if (!r.passed) throw NumericError("theory checks failed (" + std::to_string(failed) + " instance(s))");
}

inline void cmd_export(const RunConfig& c, std::ostream& out) {
  const KnowledgeGraph graph = load_dataset(c);
  const EmbeddingModel model = load_model_for(c, graph);
  const fs::path path = c.export_path.empty() ? c.output_dir() / "embeddings.tsv" : fs::path(c.export_path);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ostringstream tsv;
  write_embedding_tsv(tsv, graph, model);
  write_text(path, tsv.str());
  out << "wrote " << model.num_entities() << " rows to " << path.string() << '\n';
}

// Argument parsing.

namespace detail {

inline std::optional<std::string> find_config_arg(int argc, const char* const* argv) {
  std::optional<std::string> found;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) found = argv[++i];
    else if (a.rfind("--config=", 0) == 0) found = a.substr(9);
  }
  return found;
}

template <class E>
CLI::Option* add_choice(CLI::App& app, const std::string& name, E& target, const std::map<std::string, E>& names,
                        const std::string& help) {
  return app.add_option(name, target, help)->transform(CLI::CheckedTransformer(names));
}

}  // namespace detail

/// Parses arguments, runs one subcommand and maps errors to exit codes
/// (0 success, 1 usage, 2 data, 3 numeric).
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig c;
  c.output = default_output_root();
  std::string config_path, log_level = "info";
  try {
    if (auto path = detail::find_config_arg(argc, argv)) load_config_file(c, *path);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  }

  CLI::App app{"Knowledge-graph embedding unlearning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", config_path, "JSON run configuration; flags override its values");
  app.add_option("--output,-o", c.output, "Output directory (default from $" + std::string(kOutputRootEnv) + ")");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");
  app.add_flag("--timing,!--no-timing", c.timing, "Record wall-clock seconds (off writes zeros)");

  auto dataset = [&](CLI::App* s) { s->add_option("--dataset,-d", c.dataset, "Source triple TSV (head, relation, tail)"); };
  auto splits = [&](CLI::App* s) { s->add_option("--splits", c.splits, "Split directory (default <output>/splits)"); };
  auto checkpoint = [&](CLI::App* s) { s->add_option("--checkpoint", c.checkpoint, "Input checkpoint"); };
  auto eval_opts = [&](CLI::App* s) {
    s->add_option("--threads", c.eval.threads, "Evaluation worker threads");
    s->add_flag("--filtered,!--raw", c.eval.filtered, "Filtered ranking against the source graph");
  };
  auto pretrain_opts = [&](CLI::App* s) {
    s->add_option("--dim", c.pretrain.dim, "Embedding dimension");
    s->add_option("--margin", c.pretrain.margin, "Margin-ranking margin");
    s->add_option("--lr", c.pretrain.learning_rate, "Adam learning rate");
    s->add_option("--epochs", c.pretrain.epochs, "Training epochs");
    s->add_option("--batch-size", c.pretrain.batch_size, "Positives per batch");
    s->add_option("--negatives", c.pretrain.negatives_per_positive, "Corrupted triples per positive");
    s->add_option("--seed", c.pretrain.seed, "Initialization and sampling seed");
  };

  CLI::App* build = app.add_subcommand("build", "Build forgetting/remaining splits and a manifest");
  dataset(build);
  splits(build);
  build->add_option("--rate", c.build.rate, "Forgetting rate per step");
  build->add_option("--steps", c.build.steps, "Number of time steps");
  build->add_option("--seed", c.build.seed, "Split seed");
  detail::add_choice(*build, "--quota", c.build.quota, quota_names(), "constant or candidate_relative");

  CLI::App* pre = app.add_subcommand("pretrain", "Train TransE on the source graph");
  dataset(pre);
  pretrain_opts(pre);

  CLI::App* unl = app.add_subcommand("unlearn", "Run an unlearning method over the split timeline");
  dataset(unl);
  splits(unl);
  checkpoint(unl);
  eval_opts(unl);
  pretrain_opts(unl);
  detail::add_choice(*unl, "--method", c.method, method_names(), "graphdpo, retrain, finetune or ng");
  unl->add_option("--beta", c.unlearn.weights.beta, "DPO temperature");
  unl->add_option("--lambda-dpo", c.unlearn.weights.dpo, "Preference loss weight");
  unl->add_option("--lambda-replay", c.unlearn.weights.replay, "Boundary replay weight");
  unl->add_option("--lambda-distill", c.unlearn.weights.distill, "Boundary distillation weight");
  unl->add_option("--replay-margin", c.unlearn.weights.replay_margin, "Replay hinge margin");
  unl->add_option("--unlearn-epochs", c.unlearn.epochs, "Unlearning epochs per step");
  unl->add_option("--patience", c.unlearn.patience, "Early-stop patience on forget MRR (0 disables)");
  unl->add_option("--unlearn-lr", c.unlearn.learning_rate, "Unlearning Adam learning rate");
  unl->add_option("--unlearn-batch-size", c.unlearn.batch_size, "Preference samples per batch");
  detail::add_choice(*unl, "--sampling", c.unlearn.sampling, sampling_names(), "uniform or out_boundary");
  unl->add_flag("--resample", c.unlearn.resample_each_epoch, "Redraw preferred answers every epoch");
  detail::add_choice(*unl, "--replay-form", c.unlearn.replay_form, replay_form_names(), "distance or score");
  unl->add_option("--replay-cap", c.unlearn.replay_cap_fraction, "Replay set cap as a fraction of the graph");
  unl->add_option("--unlearn-seed", c.unlearn.seed, "Unlearning seed");
  unl->add_option("--baseline-epochs", c.baseline.epochs, "Fine-Tune / NG epochs per step");
  unl->add_option("--baseline-lr", c.baseline.learning_rate, "Fine-Tune / NG learning rate");
  unl->add_flag("--export-preferences", c.export_preferences, "Write step_{i}_preferences.tsv");

  CLI::App* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint against the split timeline");
  dataset(ev);
  splits(ev);
  checkpoint(ev);
  eval_opts(ev);
  ev->add_option("--step", c.step, "Time step to evaluate (0 = all)");

  CLI::App* th = app.add_subcommand("verify-theory", "Check the objective-equivalence identities numerically");
  th->add_option("--instances", c.theory.instances, "Seeded toy instances");
  th->add_option("--seed", c.theory.seed, "First instance seed");
  th->add_option("--draws", c.theory.monte_carlo_draws, "Monte-Carlo draws (0 skips)");
  th->add_option("--corrupt-constant", c.theory.corrupt_constant, "Offset added to c1 (negative control)");
  th->add_option("--tolerance", c.theory.tolerance, "Residual tolerance");

  CLI::App* ex = app.add_subcommand("export", "Write entity embeddings as TSV");
  dataset(ex);
  checkpoint(ex);
  ex->add_option("--out", c.export_path, "Output TSV (default <output>/embeddings.tsv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (build->parsed()) cmd_build(c, out);
    else if (pre->parsed()) cmd_pretrain(c, out);
    else if (unl->parsed()) cmd_unlearn(c, out);
    else if (ev->parsed()) cmd_evaluate(c, out);
    else if (th->parsed()) cmd_verify_theory(c, out);
    else if (ex->parsed()) cmd_export(c, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::data);
  }
  return 0;
}

}  // namespace kgeu
