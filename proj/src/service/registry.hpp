#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "model/model.hpp"

namespace fer {

struct ModelEntry {
  std::string model_id;  // sha256 of the FERW bytes
  std::string name;
  std::string installed_at;
  bool active = false;
};

// Immutable once published; classify requests hold a reference for their
// whole duration so an activation never changes a request's model midway.
struct ActiveModel {
  std::string id;
  Model model;
};

// Installed models live in <root>/models/<id>.ferw with an index.json that
// records names, install times and the active id.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::filesystem::path root);

  struct InstallResult {
    std::string model_id;
    bool created = false;  // false when the same bytes were already installed
  };
  // Validates the bytes as FERW with a 224x224x3 input, then stores them
  // under their content hash. Does not change the active model, except that
  // the very first install becomes active so one entry is always active.
  InstallResult install(std::span<const std::uint8_t> ferw, std::string name);

  // Atomic swap; throws not_found for an unknown id.
  void activate(const std::string& model_id);

  std::shared_ptr<const ActiveModel> active() const;
  std::vector<ModelEntry> list() const;

 private:
  void write_index_locked() const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::mutex activate_mu_;  // serializes whole activations
  std::vector<ModelEntry> entries_;
  std::shared_ptr<const ActiveModel> active_;
};

}  // namespace fer
