#include "service/image_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "service/hash.hpp"
#include "service/tar.hpp"

namespace fer {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(ImageSource s) { return s == ImageSource::webcam ? "webcam" : "upload"; }

std::optional<ImageSource> parse_image_source(std::string_view s) {
  if (s == "webcam") return ImageSource::webcam;
  if (s == "upload") return ImageSource::upload;
  return std::nullopt;
}

ordered_json classification_json(const ClassificationResult& r) {
  ordered_json top = ordered_json::array();
  for (const auto& e : r.top)
    top.push_back({{"label", label_name(e.label)}, {"confidence", e.confidence}});
  ordered_json dist = ordered_json::object();
  for (std::size_t c = 0; c < kNumEmotions; ++c) dist[std::string(kEmotionNames[c])] = r.distribution[c];
  return {{"top", top}, {"distribution", dist}};
}

namespace {

EmotionLabel label_or_throw(const std::string& s) {
  const auto l = parse_label(s);
  if (!l) fail(ErrorCode::format, "unknown emotion label '" + s + "'");
  return *l;
}

}  // namespace

ClassificationResult classification_from_json(const json& j) {
  ClassificationResult r;
  for (const auto& e : j.at("top"))
    r.top.push_back({label_or_throw(e.at("label").get<std::string>()), e.at("confidence").get<float>()});
  const auto& d = j.at("distribution");
  for (std::size_t c = 0; c < kNumEmotions; ++c)
    r.distribution[c] = d.at(std::string(kEmotionNames[c])).get<float>();
  return r;
}

ordered_json record_json(const ImageRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["captured_at"] = r.captured_at;
  j["source"] = to_string(r.source);
  if (r.crop)
    j["crop"] = {{"x", r.crop->x}, {"y", r.crop->y}, {"w", r.crop->w}, {"h", r.crop->h}};
  else
    j["crop"] = nullptr;
  j["predictions"] = classification_json(r.predictions);
  j["consent"] = r.consent;
  if (r.user_label)
    j["user_label"] = label_name(*r.user_label);
  else
    j["user_label"] = nullptr;
  j["model_id"] = r.model_id;
  j["extension"] = r.extension;
  return j;
}

ImageRecord record_from_json(const json& j) {
  ImageRecord r;
  r.id = j.at("id").get<std::string>();
  r.captured_at = j.at("captured_at").get<std::string>();
  const auto src = parse_image_source(j.at("source").get<std::string>());
  if (!src) fail(ErrorCode::format, "bad source");
  r.source = *src;
  if (const auto& c = j.at("crop"); !c.is_null())
    r.crop = CropBox{c.at("x").get<std::int64_t>(), c.at("y").get<std::int64_t>(),
                     c.at("w").get<std::int64_t>(), c.at("h").get<std::int64_t>()};
  r.predictions = classification_from_json(j.at("predictions"));
  r.consent = j.at("consent").get<bool>();
  if (const auto& l = j.at("user_label"); !l.is_null())
    r.user_label = label_or_throw(l.get<std::string>());
  r.model_id = j.at("model_id").get<std::string>();
  r.extension = j.at("extension").get<std::string>();
  return r;
}

ImageStore::ImageStore(fs::path root) : root_(std::move(root)), log_path_(root_ / "records.jsonl") {
  std::error_code ec;
  fs::create_directories(root_ / "blobs", ec);
  if (ec) fail(ErrorCode::io, "cannot create store '" + root_.string() + "': " + ec.message());
  if (fs::exists(log_path_)) {
    // Cut a torn final line so the next append starts on a fresh line.
    const auto bytes = read_file(log_path_);
    std::size_t keep = bytes.size();
    while (keep > 0 && bytes[keep - 1] != '\n') --keep;
    if (keep != bytes.size()) {
      fs::resize_file(log_path_, keep, ec);
      if (ec) fail(ErrorCode::io, "cannot repair '" + log_path_.string() + "': " + ec.message());
    }
  }
  for (const auto& r : events()) ids_.insert(r.id);
}

fs::path ImageStore::blob_path(const std::string& id, const std::string& ext) const {
  return root_ / "blobs" / id.substr(0, 2) / (id + "." + ext);
}

std::string ImageStore::store(ImageRecord record, std::span<const std::uint8_t> bytes) {
  if (!record.consent)
    fail(ErrorCode::consent_required, "image not stored: consent was not given");
  if (record.predictions.top.size() != 3)
    fail(ErrorCode::invalid_argument, "a stored record needs exactly 3 ranked predictions");
  const ImageFormat fmt = sniff_format(bytes);
  if (fmt == ImageFormat::unknown) fail(ErrorCode::decode, "image is neither JPEG nor PNG");
  record.id = sha256_hex(bytes);
  record.extension = fmt == ImageFormat::png ? "png" : "jpg";
  if (record.captured_at.empty()) record.captured_at = utc_timestamp();

  std::string line = record_json(record).dump() + "\n";
  std::lock_guard lock(mu_);
  const fs::path blob = blob_path(record.id, record.extension);
  std::error_code ec;
  if (!fs::exists(blob, ec)) {
    fs::create_directories(blob.parent_path(), ec);
    if (ec) fail(ErrorCode::io, "cannot create '" + blob.parent_path().string() + "'");
    write_file_atomic(blob, bytes);
  }
  const int fd = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0)
    fail(ErrorCode::io, "cannot open '" + log_path_.string() + "': " + std::strerror(errno));
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(fd, line.data() + done, line.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      ::close(fd);
      fail(ErrorCode::io, "append to '" + log_path_.string() + "' failed");
    }
    done += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) fail(ErrorCode::io, "fsync of '" + log_path_.string() + "' failed");
  ids_.insert(record.id);
  return record.id;
}

std::vector<ImageRecord> ImageStore::events() const {
  std::vector<ImageRecord> out;
  std::ifstream in(log_path_);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      ImageRecord r = record_from_json(json::parse(line));
      if (r.consent && is_sha256_hex(r.id)) out.push_back(std::move(r));
    } catch (const std::exception&) {
      // torn or foreign line
    }
  }
  return out;
}

std::size_t ImageStore::stored_image_count() const {
  std::lock_guard lock(mu_);
  return ids_.size();
}

bool ImageStore::healthy() const {
  std::error_code ec;
  if (!fs::is_directory(root_ / "blobs", ec)) return false;
  if (fs::exists(log_path_, ec)) return ::access(log_path_.c_str(), R_OK | W_OK) == 0;
  return ::access(root_.c_str(), W_OK) == 0;
}

std::vector<std::uint8_t> ImageStore::export_archive(bool labeled_only) const {
  struct Collapsed {
    ImageRecord latest;
    std::optional<EmotionLabel> user_label;
    std::size_t events = 0;
  };
  std::map<std::string, Collapsed> by_id;
  for (auto& e : events()) {
    auto& c = by_id[e.id];
    if (e.user_label) c.user_label = e.user_label;
    ++c.events;
    c.latest = std::move(e);
  }

  ordered_json records = ordered_json::array();
  std::vector<TarEntry> files;
  for (const auto& [id, c] : by_id) {
    if (labeled_only && !c.user_label) continue;
    const std::string file = id + "." + c.latest.extension;
    std::string path;
    if (c.user_label)
      path = std::string(label_name(*c.user_label)) + "/" + file;
    else
      path = "predicted/" + std::string(label_name(c.latest.predictions.top.front().label)) +
             "/" + file;
    files.push_back({path, read_file(blob_path(id, c.latest.extension))});
    ordered_json j = record_json(c.latest);
    j["user_label"] = c.user_label ? json(label_name(*c.user_label)) : json(nullptr);
    j["label"] = c.user_label ? label_name(*c.user_label)
                              : label_name(c.latest.predictions.top.front().label);
    j["label_source"] = c.user_label ? "user" : "predicted";
    j["path"] = path;
    j["events"] = c.events;
    records.push_back(std::move(j));
  }
  ordered_json manifest;
  manifest["record_count"] = records.size();
  manifest["labeled_only"] = labeled_only;
  manifest["records"] = std::move(records);
  const std::string text = manifest.dump(2) + "\n";
  std::vector<TarEntry> entries;
  entries.push_back({"manifest.json", {text.begin(), text.end()}});
  for (auto& f : files) entries.push_back(std::move(f));
  return write_tar(entries);
}

}  // namespace fer
