// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The kgvip Authors

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "kgvip/error.hpp"
#include "kgvip/scene_graph.hpp"
#include "kgvip/util.hpp"

namespace kgvip {
namespace {

cv::Mat decode(const std::string& bytes, std::string_view what) {
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<char*>(bytes.data()));
  cv::Mat img = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw DataError("cannot decode image " + std::string(what));
  return img;
}

}  // namespace

std::filesystem::path MediaResolver::resolve(std::string_view ref) const {
  if (ref.starts_with("http://") || ref.starts_with("https://")) {
    throw DataError("remote media is not supported: " + std::string(ref));
  }
  std::string_view local = ref;
  if (local.starts_with("file://")) local.remove_prefix(7);
  std::filesystem::path p(local);
  if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
  return p;
}

bool MediaResolver::exists(std::string_view ref) const {
  try {
    return std::filesystem::is_regular_file(resolve(ref));
  } catch (const DataError&) {
    return false;
  }
}

std::string MediaResolver::read_bytes(std::string_view ref) const {
  const auto path = resolve(ref);
  try {
    return read_file(path);
  } catch (const IoError&) {
    throw DataError("unreadable image '" + std::string(ref) + "'");
  }
}

MediaResolver::Size MediaResolver::image_size(std::string_view ref) const {
  const cv::Mat img = decode(read_bytes(ref), ref);
  return {img.cols, img.rows};
}

std::string crop_region(const MediaResolver& media, std::string_view image_ref, const BBox& box) {
  const cv::Mat img = decode(media.read_bytes(image_ref), image_ref);
  if (!bbox_valid(box, img.cols, img.rows)) {
    throw DataError("bbox [" + std::to_string(box.x1) + "," + std::to_string(box.y1) + "," +
                    std::to_string(box.x2) + "," + std::to_string(box.y2) + "] outside " +
                    std::to_string(img.cols) + "x" + std::to_string(img.rows) + " image " +
                    std::string(image_ref));
  }
  const cv::Mat roi = img(cv::Rect(box.x1, box.y1, box.width(), box.height()));
  std::vector<uchar> buf;
  if (!cv::imencode(".png", roi, buf, {cv::IMWRITE_PNG_COMPRESSION, 3})) {
    throw DataError("failed to encode crop of " + std::string(image_ref));
  }
  return std::string(buf.begin(), buf.end());
}

DecodedImageSize decoded_size(std::string_view encoded_bytes) {
  const cv::Mat img = decode(std::string(encoded_bytes), "payload");
  return {img.cols, img.rows};
}

}  // namespace kgvip
