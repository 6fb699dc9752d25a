// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include "kgvip/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "kgvip/error.hpp"
#include "kgvip/gateway.hpp"
#include "kgvip/util.hpp"

namespace kgvip {

using nlohmann::json;

std::string_view to_string(Modality m) { return m == Modality::text ? "text" : "image"; }

Modality modality_from_string(std::string_view s) {
  if (s == "text") return Modality::text;
  if (s == "image") return Modality::image;
  throw DataError("unknown modality '" + std::string(s) + "'");
}

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw DataError("embedding vector must have positive dimension");
  double sq = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v)) throw DataError("embedding vector contains a non-finite value");
    sq += v * v;
  }
  zero_ = sq == 0.0;
  if (!zero_) {
    const double norm = std::sqrt(sq);
    for (double& v : values_) v /= norm;
  }
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw DataError("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                    std::to_string(b.dim()));
  }
  if (a.is_zero() || b.is_zero()) return 0.0;
  const auto x = a.values();
  const auto y = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  return std::clamp(dot, -1.0, 1.0);
}

void VectorIndex::insert(std::string key, EmbeddingVector vector) {
  if (key.empty()) throw DataError("vector key must be non-empty");
  if (vector.dim() != dim_) {
    throw DataError("vector '" + key + "' has dim " + std::to_string(vector.dim()) +
                    ", index expects " + std::to_string(dim_));
  }
  if (position_.contains(key)) throw DataError("duplicate vector key '" + key + "'");
  position_.emplace(key, keys_.size());
  keys_.push_back(std::move(key));
  vectors_.push_back(std::move(vector));
}

const EmbeddingVector* VectorIndex::find(std::string_view key) const {
  auto it = position_.find(std::string(key));
  return it == position_.end() ? nullptr : &vectors_[it->second];
}

std::vector<ScoredKey> top_k(const VectorIndex& index, const EmbeddingVector& query,
                             std::size_t k) {
  if (query.dim() != index.dim()) {
    throw DataError("query dim " + std::to_string(query.dim()) + " does not match index dim " +
                    std::to_string(index.dim()));
  }
  struct Candidate {
    std::size_t pos;
    double score;
    bool zero;
  };
  std::vector<Candidate> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& v = index.at(i);
    all.push_back({i, cosine(v, query), v.is_zero()});
  }
  const auto& keys = index.keys();
  auto before = [&keys](const Candidate& a, const Candidate& b) {
    if (a.zero != b.zero) return !a.zero;
    if (a.score != b.score) return a.score > b.score;
    return keys[a.pos] < keys[b.pos];
  };
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), before);
  std::vector<ScoredKey> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({keys[all[i].pos], all[i].score});
  return out;
}

VectorIndex load_vectors(const std::filesystem::path& path, std::size_t expected_dim,
                         Modality modality) {
  const auto lines = split_lines(read_file(path));
  std::optional<VectorIndex> index;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(n + 1);
    json rec;
    try {
      rec = json::parse(lines[n]);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("key") || !rec["key"].is_string() ||
        !rec.contains("values") || !rec["values"].is_array()) {
      throw DataError(where + ": vector record needs string 'key' and array 'values'");
    }
    const auto key = rec["key"].get<std::string>();
    std::vector<double> values;
    try {
      values = rec["values"].get<std::vector<double>>();
    } catch (const json::exception&) {
      throw DataError(where + ": vector '" + key + "' has non-numeric values");
    }
    const std::size_t declared = rec.value("dim", values.size());
    if (expected_dim == 0) expected_dim = values.size();
    if (declared != values.size() || values.size() != expected_dim) {
      throw DataError(where + ": vector '" + key + "' has dim " + std::to_string(values.size()) +
                      ", expected " + std::to_string(expected_dim));
    }
    if (!index) index.emplace(expected_dim, modality);
    index->insert(key, EmbeddingVector(std::move(values)));
  }
  return index ? std::move(*index) : VectorIndex(expected_dim, modality);
}

void save_vectors(const VectorIndex& index, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto vals = index.at(i).values();
    json rec = {{"key", index.keys()[i]},
                {"dim", index.dim()},
                {"values", std::vector<double>(vals.begin(), vals.end())}};
    out += rec.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::string image_key(std::string_view entity_id, std::size_t n) {
  return std::string(entity_id) + "#" + std::to_string(n);
}

std::string_view image_key_owner(std::string_view key) {
  const auto pos = key.rfind('#');
  return pos == std::string_view::npos ? key : key.substr(0, pos);
}

void Embedder::expect_dim(Modality modality, std::size_t dim) {
  std::lock_guard lock(mutex_);
  (modality == Modality::text ? text_dim_ : image_dim_) = dim;
}

EmbeddingVector Embedder::embed(Modality modality, std::string_view payload,
                                std::string_view media_ref) {
  std::string key(to_string(modality));
  if (media_ref.empty()) {
    key += ":sha256:";
    key += sha256_hex(payload);
  } else {
    key += ":ref:";
    key += media_ref;
  }
  std::optional<std::size_t> expected;
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    expected = modality == Modality::text ? text_dim_ : image_dim_;
  }

  auto values = gateway_.embed_raw(modality, payload, media_ref);
  if (expected && values.size() != *expected) {
    throw DataError("embedding dim drift: endpoint returned " + std::to_string(values.size()) +
                    ", index expects " + std::to_string(*expected));
  }
  EmbeddingVector vec(std::move(values));

  std::lock_guard lock(mutex_);
  return cache_.emplace(std::move(key), std::move(vec)).first->second;
}

std::size_t Embedder::cache_size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

}  // namespace kgvip
