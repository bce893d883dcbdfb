#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgeu/error.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/random.hpp"

namespace kgeu {

enum class QuotaMode : std::uint8_t {
  /// floor(rate * |T_ori|) triples every step.
  constant,
  /// floor(rate * |C_conn|) + floor(rate * |C_unconn|), shrinking with the candidate pool.
  candidate_relative,
};

struct BuildConfig {
  double rate = 0.1;
  std::size_t steps = 4;
  std::uint64_t seed = 0;
  QuotaMode quota = QuotaMode::constant;

  void validate() const {
    if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("rate must lie in (0, 1), got " + std::to_string(rate));
    if (steps < 1) throw ConfigError("steps must be at least 1");
    if (rate * static_cast<double>(steps) > 1.0 + 1e-12) {
      throw ConfigError("rate * steps exceeds 1; cumulative forgetting would exceed the graph");
    }
  }
};

struct StepSplit {
  TripleSet forget;
  TripleSet remain;
  /// forget[0, connected_drawn) came from C_conn, the rest from C_unconn.
  std::size_t connected_drawn = 0;
  std::size_t candidates_connected = 0;
  std::size_t candidates_unconnected = 0;
};

/// Per-step forgetting and remaining sets over one source graph.
struct UnlearnTimeline {
  BuildConfig config;
  std::size_t original_size = 0;
  std::vector<StepSplit> steps;

  std::size_t size() const noexcept { return steps.size(); }

  /// 1-based access.
  const StepSplit& step(std::size_t i) const {
    if (i < 1 || i > steps.size()) throw DomainError("time step " + std::to_string(i) + " out of range");
    return steps[i - 1];
  }

  /// Union of forget(1..i), in step order.
  TripleSet accumulated_forget(std::size_t i) const {
    step(i);
    TripleSet out;
    for (std::size_t j = 0; j < i; ++j)
      for (const Triple& t : steps[j].forget) out.insert(t);
    return out;
  }
};

/// floor(rate * n), tolerant of representation error when rate * n is integral.
inline std::size_t quota_of(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
}

/// Builds forgetting/remaining splits, drawing each step's quota from the
/// candidates connected and unconnected to all earlier forget sets in
/// proportion to their sizes.
inline UnlearnTimeline build_timeline(const KnowledgeGraph& graph, const BuildConfig& config) {
  config.validate();
  const auto& all = graph.triples();
  if (all.empty()) throw DomainError("source graph has no triples");

  UnlearnTimeline timeline;
  timeline.config = config;
  timeline.original_size = all.size();

  std::vector<std::uint8_t> forgotten(all.size(), 0);
  std::vector<std::uint8_t> hist_entity(graph.num_entities(), 0);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    std::vector<std::uint32_t> conn, unconn;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (forgotten[i]) continue;
      const Triple& t = all[i];
      (hist_entity[t.head] || hist_entity[t.tail] ? conn : unconn).push_back(static_cast<std::uint32_t>(i));
    }
    const std::size_t candidates = conn.size() + unconn.size();

    std::size_t take_conn = 0, take_unconn = 0;
    if (config.quota == QuotaMode::constant) {
      const std::size_t quota = quota_of(config.rate, all.size());
      if (quota > candidates) {
        throw ConstructionError("step " + std::to_string(step) + " quota " + std::to_string(quota) +
                                " exceeds the " + std::to_string(candidates) + " remaining candidates");
      }
      take_conn = candidates == 0 ? 0
                                  : static_cast<std::size_t>((std::uint64_t{quota} * conn.size()) / candidates);
      take_unconn = quota - take_conn;
    } else {
      take_conn = quota_of(config.rate, conn.size());
      take_unconn = quota_of(config.rate, unconn.size());
    }

    Rng rng = derive_rng(config.seed, step);
    std::vector<std::uint32_t> drawn_conn = sample_without_replacement<std::uint32_t>(conn, take_conn, rng);
    std::vector<std::uint32_t> drawn_unconn = sample_without_replacement<std::uint32_t>(unconn, take_unconn, rng);
    std::sort(drawn_conn.begin(), drawn_conn.end());
    std::sort(drawn_unconn.begin(), drawn_unconn.end());

    StepSplit split;
    split.connected_drawn = drawn_conn.size();
    split.candidates_connected = conn.size();
    split.candidates_unconnected = unconn.size();
    for (auto* group : {&drawn_conn, &drawn_unconn}) {
      for (std::uint32_t i : *group) {
        forgotten[i] = 1;
        split.forget.insert(all[i]);
      }
    }
    for (const Triple& t : split.forget) hist_entity[t.head] = hist_entity[t.tail] = 1;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (!forgotten[i]) split.remain.insert(all[i]);
    timeline.steps.push_back(std::move(split));
  }
  return timeline;
}

inline const char* to_string(QuotaMode mode) {
  return mode == QuotaMode::constant ? "constant" : "candidate_relative";
}

inline QuotaMode parse_quota_mode(const std::string& s) {
  if (s == "constant") return QuotaMode::constant;
  if (s == "candidate_relative") return QuotaMode::candidate_relative;
  throw ConfigError("unknown quota mode '" + s + "'");
}

inline std::string forget_file_name(std::size_t step) { return "step_" + std::to_string(step) + "_forget.tsv"; }
inline std::string remain_file_name(std::size_t step) { return "step_" + std::to_string(step) + "_remain.tsv"; }

inline constexpr const char* kManifestName = "manifest.json";

/// Writes step_{i}_forget.tsv / step_{i}_remain.tsv and manifest.json into
/// `directory`. `provenance` is stored verbatim under "provenance".
inline void write_manifest(const UnlearnTimeline& timeline, const KnowledgeGraph& graph,
                           const std::filesystem::path& directory, const nlohmann::json& provenance = {}) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError(directory.string(), ec.message());

  auto write_set = [&](const std::filesystem::path& path, const TripleSet& set) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    write_triples(out, graph, set.view());
    if (!out) throw IoError(path.string(), "write failed");
  };

  nlohmann::ordered_json manifest;
  manifest["format"] = "kgeu-split-manifest";
  manifest["version"] = 1;
  manifest["rate"] = timeline.config.rate;
  manifest["steps"] = timeline.config.steps;
  manifest["seed"] = timeline.config.seed;
  manifest["quota_mode"] = to_string(timeline.config.quota);
  manifest["original_triples"] = timeline.original_size;
  manifest["entities"] = graph.num_entities();
  manifest["relations"] = graph.num_relations();
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (std::size_t i = 1; i <= timeline.size(); ++i) {
    const StepSplit& s = timeline.step(i);
    write_set(directory / forget_file_name(i), s.forget);
    write_set(directory / remain_file_name(i), s.remain);
    nlohmann::ordered_json row;
    row["step"] = i;
    row["forget"] = s.forget.size();
    row["remain"] = s.remain.size();
    row["connected_drawn"] = s.connected_drawn;
    row["candidates_connected"] = s.candidates_connected;
    row["candidates_unconnected"] = s.candidates_unconnected;
    row["forget_file"] = forget_file_name(i);
    row["remain_file"] = remain_file_name(i);
    table.push_back(std::move(row));
  }
  manifest["per_step"] = std::move(table);
  if (!provenance.is_null()) manifest["provenance"] = provenance;

  const auto path = directory / kManifestName;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

/// Reads a directory written by write_manifest back against its source graph.
inline UnlearnTimeline read_manifest(const KnowledgeGraph& graph, const std::filesystem::path& directory) {
  const auto path = directory / kManifestName;
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  UnlearnTimeline timeline;
  try {
    timeline.config.rate = manifest.at("rate").get<double>();
    timeline.config.steps = manifest.at("steps").get<std::size_t>();
    timeline.config.seed = manifest.at("seed").get<std::uint64_t>();
    timeline.config.quota = parse_quota_mode(manifest.at("quota_mode").get<std::string>());
    timeline.original_size = manifest.at("original_triples").get<std::size_t>();
    for (const auto& row : manifest.at("per_step")) {
      StepSplit s;
      auto read_set = [&](const std::string& name) {
        const auto p = directory / name;
        std::ifstream f(p, std::ios::binary);
        if (!f) throw IoError(p.string(), "cannot open for reading");
        return parse_triple_subset(f, graph);
      };
      s.forget = read_set(row.at("forget_file").get<std::string>());
      s.remain = read_set(row.at("remain_file").get<std::string>());
      s.connected_drawn = row.at("connected_drawn").get<std::size_t>();
      s.candidates_connected = row.at("candidates_connected").get<std::size_t>();
      s.candidates_unconnected = row.at("candidates_unconnected").get<std::size_t>();
      if (s.forget.size() != row.at("forget").get<std::size_t>() ||
          s.remain.size() != row.at("remain").get<std::size_t>()) {
        throw ParseError("split file sizes disagree with the manifest at step " +
                         std::to_string(row.at("step").get<std::size_t>()));
      }
      timeline.steps.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (timeline.original_size != graph.num_triples()) {
    throw ParseError("manifest was built from a graph with " + std::to_string(timeline.original_size) +
                     " triples, the dataset has " + std::to_string(graph.num_triples()));
  }
  return timeline;
}

}  // namespace kgeu
