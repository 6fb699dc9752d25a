// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kgvip {

class Gateway;

enum class Modality { text, image };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

// L2-normalized vector, or the zero vector for absent embeddings.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  // Normalizes `values`. Throws DataError on empty or non-finite input.
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  bool is_zero() const noexcept { return zero_; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
  bool zero_ = true;
};

// Inner product of two normalized vectors; 0 when either is zero. Throws
// DataError on dimension mismatch.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct ScoredKey {
  std::string key;
  double score = 0.0;

  bool operator==(const ScoredKey&) const = default;
};

// Exhaustive-scan index. Keys are unique; all vectors share one dimension.
class VectorIndex {
 public:
  VectorIndex(std::size_t dim, Modality modality) : dim_(dim), modality_(modality) {}

  std::size_t dim() const noexcept { return dim_; }
  Modality modality() const noexcept { return modality_; }
  std::size_t size() const noexcept { return keys_.size(); }
  bool empty() const noexcept { return keys_.empty(); }

  void insert(std::string key, EmbeddingVector vector);
  const EmbeddingVector* find(std::string_view key) const;
  const std::vector<std::string>& keys() const noexcept { return keys_; }
  const EmbeddingVector& at(std::size_t i) const { return vectors_.at(i); }

 private:
  std::size_t dim_;
  Modality modality_;
  std::vector<std::string> keys_;
  std::vector<EmbeddingVector> vectors_;
  std::unordered_map<std::string, std::size_t> position_;
};

// Descending score, ties by ascending key, zero vectors after every nonzero
// vector. Returns min(k, size) entries.
std::vector<ScoredKey> top_k(const VectorIndex& index, const EmbeddingVector& query, std::size_t k);

// expected_dim == 0 takes the dimension of the first record.
VectorIndex load_vectors(const std::filesystem::path& path, std::size_t expected_dim,
                         Modality modality);
void save_vectors(const VectorIndex& index, const std::filesystem::path& path);

// Image-index keys carry one vector per image as "<entity id>#<n>".
std::string image_key(std::string_view entity_id, std::size_t n);
std::string_view image_key_owner(std::string_view key);

// Gateway-backed encoder with a per-run content cache. Safe for concurrent
// callers.
class Embedder {
 public:
  explicit Embedder(Gateway& gateway) : gateway_(gateway) {}

  // Fixes the expected output dimension for a modality; responses of any
  // other dimension raise a dim-drift DataError.
  void expect_dim(Modality modality, std::size_t dim);

  // `payload` is text for Modality::text and encoded image bytes for
  // Modality::image. A non-empty `media_ref` is the identity of the image
  // for caching and request digests (crops use "<image>#crop=x1,y1,x2,y2").
  EmbeddingVector embed(Modality modality, std::string_view payload,
                        std::string_view media_ref = {});

  std::size_t cache_size() const;

 private:
  Gateway& gateway_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
  std::optional<std::size_t> text_dim_;
  std::optional<std::size_t> image_dim_;
};

}  // namespace kgvip
