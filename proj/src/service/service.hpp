#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "service/image_store.hpp"
#include "service/registry.hpp"

namespace fer {

struct ServiceConfig {
  std::filesystem::path store_root;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t max_upload_bytes = 10u << 20;  // classify payloads
  std::size_t max_model_bytes = 256u << 20;  // FERW uploads
  std::string allowed_origin = "*";
};

// HTTP/JSON front end over an ImageStore and a ModelRegistry that share the
// same root directory.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the listening socket and returns the bound port.
  int bind();
  // Serves until stop(); bind() must have succeeded. In-flight requests
  // finish before this returns.
  void run();
  void stop();
  // Blocks until run() is accepting connections.
  void wait_until_ready() const;

  ImageStore& store();
  ModelRegistry& registry();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fer
