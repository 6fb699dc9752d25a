// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors
//
// Per-image scene graphs: detected objects with pixel boxes and the
// relations between them, in the JSON layout the scene-graph prompt asks
// the vision model for.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kgvip {

class Gateway;

// Resolves media references (plain paths, relative to a base directory, or
// file:// URIs) to local files.
class MediaResolver {
 public:
  MediaResolver() = default;
  explicit MediaResolver(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

  std::filesystem::path resolve(std::string_view ref) const;
  bool exists(std::string_view ref) const;
  std::string read_bytes(std::string_view ref) const;

  struct Size {
    int width = 0;
    int height = 0;
  };
  // Throws DataError if the image cannot be decoded.
  Size image_size(std::string_view ref) const;

 private:
  std::filesystem::path base_dir_;
};

enum class SceneCategory { person, object, animal, other };

std::string_view to_string(SceneCategory c);
std::optional<SceneCategory> scene_category_from_string(std::string_view s);

struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const noexcept { return x2 - x1; }
  int height() const noexcept { return y2 - y1; }
  bool operator==(const BBox&) const = default;
};

// Enforces 0 <= x1 < x2 <= width and 0 <= y1 < y2 <= height.
bool bbox_valid(const BBox& box, int width, int height);

struct SceneEntity {
  std::string entity_id;
  std::string name;
  SceneCategory category = SceneCategory::object;
  BBox bbox;
  double confidence = 1.0;

  bool operator==(const SceneEntity&) const = default;
};

struct SceneRelation {
  std::string subject_id;
  std::string object_id;
  std::string predicate;
  double confidence = 1.0;
  std::optional<std::string> evidence;

  bool operator==(const SceneRelation&) const = default;
};

struct SceneGraph {
  std::string image_ref;
  int width = 0;
  int height = 0;
  std::vector<SceneEntity> entities;
  std::vector<SceneRelation> relations;

  const SceneEntity* find(std::string_view entity_id) const;
  bool empty() const noexcept { return entities.empty(); }
  // Throws DataError on any bbox, confidence or referential violation.
  void validate() const;

  bool operator==(const SceneGraph&) const = default;
};

struct SceneParseResult {
  SceneGraph graph;
  // Relations dropped because an endpoint did not resolve.
  std::size_t dropped_relations = 0;
};

// Parses model output (code fences and surrounding prose are tolerated).
// Throws OutputParseError on malformed JSON, bad category, bbox violation,
// duplicate entity id or out-of-range confidence.
SceneParseResult parse_scene_graph(std::string_view json_text, int width, int height);

// Appendix-schema JSON (entities + relations). parse(serialize(g)) == g up
// to the image ref, which the JSON does not carry.
std::string serialize_scene_graph(const SceneGraph& graph);

// Renders the scene-graph prompt, calls the vision model and validates the
// result, retrying with the validation message appended.
SceneParseResult generate_scene_graph(const std::string& image_ref, int width, int height,
                                      Gateway& gateway);

// Crops `box` out of the image and returns it PNG-encoded. Throws
// DataError for unreadable images or boxes outside the image.
std::string crop_region(const MediaResolver& media, std::string_view image_ref, const BBox& box);

struct DecodedImageSize {
  int width = 0;
  int height = 0;
};
DecodedImageSize decoded_size(std::string_view encoded_bytes);

}  // namespace kgvip
