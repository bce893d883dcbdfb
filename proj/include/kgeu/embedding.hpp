#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "kgeu/error.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/random.hpp"

namespace kgeu {

using Table = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Distances are clipped here before entering the sigmoid.
inline constexpr double kMaxScoredDistance = 50.0;

/// Entity and relation tables of a TransE model.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::size_t num_entities, std::size_t num_relations, std::size_t dim)
      : entities_(Table::Zero(static_cast<Eigen::Index>(num_entities), static_cast<Eigen::Index>(dim))),
        relations_(Table::Zero(static_cast<Eigen::Index>(num_relations), static_cast<Eigen::Index>(dim))) {
    if (dim == 0) throw ConfigError("embedding dimension must be positive");
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entities_.cols()); }
  std::size_t num_entities() const noexcept { return static_cast<std::size_t>(entities_.rows()); }
  std::size_t num_relations() const noexcept { return static_cast<std::size_t>(relations_.rows()); }

  Table& entities() noexcept { return entities_; }
  const Table& entities() const noexcept { return entities_; }
  Table& relations() noexcept { return relations_; }
  const Table& relations() const noexcept { return relations_; }

  auto entity(EntityId e) { return entities_.row(e); }
  auto entity(EntityId e) const { return entities_.row(e); }
  auto relation(RelationId r) { return relations_.row(r); }
  auto relation(RelationId r) const { return relations_.row(r); }

  bool all_finite() const { return entities_.allFinite() && relations_.allFinite(); }

  /// Bitwise equality of both tables.
  bool identical_to(const EmbeddingModel& other) const {
    return entities_.rows() == other.entities_.rows() && entities_.cols() == other.entities_.cols() &&
           relations_.rows() == other.relations_.rows() &&
           std::memcmp(entities_.data(), other.entities_.data(), sizeof(double) * entities_.size()) == 0 &&
           std::memcmp(relations_.data(), other.relations_.data(), sizeof(double) * relations_.size()) == 0;
  }

  void check_triple(const Triple& t) const {
    if (t.head >= num_entities() || t.tail >= num_entities() || t.relation >= num_relations()) {
      throw DomainError("triple ids outside the model tables");
    }
  }

 private:
  Table entities_;
  Table relations_;
};

/// Uniform [-6/sqrt(d), 6/sqrt(d)] entries; entity rows rescaled to unit norm.
inline EmbeddingModel init_model(std::size_t num_entities, std::size_t num_relations, std::size_t dim,
                                 std::uint64_t seed) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  EmbeddingModel model(num_entities, num_relations, dim);
  Rng rng = derive_rng(seed, 0);
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (Eigen::Index i = 0; i < model.entities().size(); ++i) model.entities().data()[i] = uniform(rng);
  for (Eigen::Index i = 0; i < model.relations().size(); ++i) model.relations().data()[i] = uniform(rng);
  for (Eigen::Index e = 0; e < model.entities().rows(); ++e) model.entities().row(e).normalize();
  return model;
}

inline void renormalize_entity(EmbeddingModel& model, EntityId e) {
  const double norm = model.entity(e).norm();
  if (norm > 0.0) model.entity(e) /= norm;
}

/// h + r - t for the given triple.
inline Vector translation_residual(const EmbeddingModel& model, const Triple& t) {
  return (model.entity(t.head) + model.relation(t.relation) - model.entity(t.tail)).transpose();
}

/// ||h + r - t||_2
inline double distance(const EmbeddingModel& model, const Triple& t) {
  model.check_triple(t);
  return (model.entity(t.head) + model.relation(t.relation) - model.entity(t.tail)).norm();
}

/// Numerically stable logistic function.
inline double sigmoid(double x) {
  const double z = std::exp(-std::abs(x));
  return x >= 0.0 ? 1.0 / (1.0 + z) : z / (1.0 + z);
}

/// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); }

inline double clipped(double d) { return std::min(d, kMaxScoredDistance); }

/// Probability-valued plausibility: sigmoid(-distance), in (0, 1).
inline double score_from_distance(double d) { return sigmoid(-clipped(d)); }

inline double score(const EmbeddingModel& model, const Triple& t) { return score_from_distance(distance(model, t)); }

// ---------------------------------------------------------------------------
// Checkpoint format: "KGEU", u32 version, u32 d, u32 |E|, u32 |R|, then both
// tables row-major as f64, everything little-endian.

inline constexpr std::array<char, 4> kCheckpointMagic = {'K', 'G', 'E', 'U'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

inline void put_f64(std::ostream& out, double value) {
  const auto v = std::bit_cast<std::uint64_t>(value);
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 8);
}

inline std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw ParseError("truncated checkpoint header");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

inline double get_f64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw ParseError("truncated checkpoint table");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return std::bit_cast<double>(v);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const EmbeddingModel& model) {
  out.write(kCheckpointMagic.data(), 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(model.dim()));
  detail::put_u32(out, static_cast<std::uint32_t>(model.num_entities()));
  detail::put_u32(out, static_cast<std::uint32_t>(model.num_relations()));
  for (Eigen::Index i = 0; i < model.entities().size(); ++i) detail::put_f64(out, model.entities().data()[i]);
  for (Eigen::Index i = 0; i < model.relations().size(); ++i) detail::put_f64(out, model.relations().data()[i]);
}

inline EmbeddingModel read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kCheckpointMagic) throw ParseError("not a KGEU checkpoint");
  const std::uint32_t version = detail::get_u32(in);
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t dim = detail::get_u32(in);
  const std::uint32_t ne = detail::get_u32(in);
  const std::uint32_t nr = detail::get_u32(in);
  if (dim == 0) throw ParseError("checkpoint has zero dimension");
  EmbeddingModel model(ne, nr, dim);
  for (Eigen::Index i = 0; i < model.entities().size(); ++i) model.entities().data()[i] = detail::get_f64(in);
  for (Eigen::Index i = 0; i < model.relations().size(); ++i) model.relations().data()[i] = detail::get_f64(in);
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after checkpoint tables");
  return model;
}

inline void save_checkpoint(const std::string& path, const EmbeddingModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  write_checkpoint(out, model);
  if (!out) throw IoError(path, "write failed");
}

inline EmbeddingModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  return read_checkpoint(in);
}

}  // namespace kgeu
