#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hml/common.hpp"

namespace hml {

/// Token to dense vector map. Every vector has length `dim()` and nonzero norm.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  /// Throws on dimension mismatch or an all-zero vector.
  void insert(const std::string& token, Vector vec);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(const std::string& token) const { return entries_.count(token) != 0; }
  const Vector& at(const std::string& token) const;
  const std::map<std::string, Vector>& entries() const noexcept { return entries_; }

 private:
  std::size_t dim_;
  std::map<std::string, Vector> entries_;
};

/// Parses a GloVe-style text file ("token v1 ... vD" per line) and returns a
/// table holding exactly `vocab`. Multi-word vocabulary entries ("parked on")
/// resolve to the unweighted mean of their word vectors.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::vector<std::string>& vocab);

/// Same as load_embeddings but reads from already-parsed raw word vectors.
EmbeddingTable resolve_vocab(const std::map<std::string, Vector>& words, std::size_t dim,
                             const std::vector<std::string>& vocab);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

}  // namespace hml
