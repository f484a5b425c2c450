#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "model/labels.hpp"
#include "model/network.hpp"
#include "preprocess/image.hpp"

namespace fer {

enum class ImageSource { webcam, upload };

const char* to_string(ImageSource s);
std::optional<ImageSource> parse_image_source(std::string_view s);

// One classification event for a stored image.
struct ImageRecord {
  std::string id;  // sha256 of the image bytes
  std::string captured_at;
  ImageSource source = ImageSource::upload;
  std::optional<CropBox> crop;
  ClassificationResult predictions;
  bool consent = false;
  std::optional<EmotionLabel> user_label;
  std::string model_id;
  std::string extension;  // "png" or "jpg"
};

nlohmann::ordered_json classification_json(const ClassificationResult& r);
ClassificationResult classification_from_json(const nlohmann::json& j);
nlohmann::ordered_json record_json(const ImageRecord& r);
ImageRecord record_from_json(const nlohmann::json& j);

// Layout under root:
//   blobs/<id[0:2]>/<id>.<ext>   image bytes, written once per hash
//   records.jsonl                one JSON event per line, fsynced per append
class ImageStore {
 public:
  // Creates the layout if needed and drops a partial trailing log line left
  // by a crash.
  explicit ImageStore(std::filesystem::path root);

  // The only write path. Rejects consent = false (consent_required) before
  // touching disk. Fills id, extension and captured_at when empty.
  std::string store(ImageRecord record, std::span<const std::uint8_t> bytes);

  // Every event in log order; unparsable lines are skipped.
  std::vector<ImageRecord> events() const;
  std::size_t stored_image_count() const;
  bool healthy() const;

  // Directory-per-label tar with manifest.json. The latest event that carries
  // a user label decides the label directory; unlabeled images go under
  // predicted/<top-1>/.
  std::vector<std::uint8_t> export_archive(bool labeled_only) const;

  std::filesystem::path blob_path(const std::string& id, const std::string& ext) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::filesystem::path log_path_;
  mutable std::mutex mu_;
  std::set<std::string> ids_;
};

}  // namespace fer
