#include "service/registry.hpp"

#include <algorithm>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "json.hpp"
#include "model/ferw.hpp"
#include "preprocess/image.hpp"
#include "service/hash.hpp"

namespace fer {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void require_service_geometry(const Model& m) {
  const std::vector<std::size_t> want{kInputSide, kInputSide, 3};
  if (m.spec().input != want)
    fail(ErrorCode::shape_mismatch, "model input must be 224x224x3 to serve camera images");
}

}  // namespace

ModelRegistry::ModelRegistry(fs::path root) : dir_(std::move(root) / "models") {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::io, "cannot create '" + dir_.string() + "': " + ec.message());
  const fs::path index = dir_ / "index.json";
  if (!fs::exists(index)) return;
  const auto bytes = read_file(index);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
    for (const auto& e : j.at("models"))
      entries_.push_back({e.at("model_id").get<std::string>(), e.at("name").get<std::string>(),
                          e.at("installed_at").get<std::string>(), false});
  } catch (const json::exception& e) {
    fail(ErrorCode::format, "'" + index.string() + "': " + e.what());
  }
  if (const auto& a = j.value("active", json(nullptr)); a.is_string()) {
    const std::string id = a.get<std::string>();
    active_ = std::make_shared<const ActiveModel>(
        ActiveModel{id, load_weights(dir_ / (id + ".ferw"))});
    for (auto& e : entries_) e.active = e.model_id == id;
  }
}

void ModelRegistry::write_index_locked() const {
  ordered_json models = ordered_json::array();
  for (const auto& e : entries_)
    models.push_back({{"model_id", e.model_id}, {"name", e.name}, {"installed_at", e.installed_at}});
  ordered_json j;
  j["models"] = std::move(models);
  j["active"] = active_ ? json(active_->id) : json(nullptr);
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(dir_ / "index.json",
                    {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

ModelRegistry::InstallResult ModelRegistry::install(std::span<const std::uint8_t> ferw,
                                                    std::string name) {
  Model model = decode_ferw(ferw);
  require_service_geometry(model);
  const std::string id = sha256_hex(ferw);
  std::lock_guard lock(mu_);
  if (std::any_of(entries_.begin(), entries_.end(),
                  [&](const ModelEntry& e) { return e.model_id == id; }))
    return {id, false};
  write_file_atomic(dir_ / (id + ".ferw"), ferw);
  entries_.push_back({id, name.empty() ? id.substr(0, 12) : std::move(name), utc_timestamp(),
                      false});
  if (!active_) {
    active_ = std::make_shared<const ActiveModel>(ActiveModel{id, std::move(model)});
    entries_.back().active = true;
  }
  write_index_locked();
  return {id, true};
}

void ModelRegistry::activate(const std::string& model_id) {
  std::lock_guard serial(activate_mu_);
  std::unique_lock lock(mu_);
  const auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const ModelEntry& e) { return e.model_id == model_id; });
  if (it == entries_.end()) fail(ErrorCode::not_found, "no installed model '" + model_id + "'");
  if (active_ && active_->id == model_id) return;
  const fs::path path = dir_ / (model_id + ".ferw");
  lock.unlock();
  // Decode outside the lock so classify requests are never blocked on disk.
  auto next = std::make_shared<const ActiveModel>(ActiveModel{model_id, load_weights(path)});
  lock.lock();
  active_ = std::move(next);
  for (auto& e : entries_) e.active = e.model_id == model_id;
  write_index_locked();
}

std::shared_ptr<const ActiveModel> ModelRegistry::active() const {
  std::lock_guard lock(mu_);
  return active_;
}

std::vector<ModelEntry> ModelRegistry::list() const {
  std::lock_guard lock(mu_);
  return entries_;
}

}  // namespace fer
