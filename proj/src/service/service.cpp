#include "service/service.hpp"

#include <charconv>
#include <optional>

#include "common/error.hpp"
#include "httplib.h"
#include "json.hpp"
#include "model/network.hpp"
#include "preprocess/image.hpp"

namespace fer {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found:
      return 404;
    case ErrorCode::no_active_model:
      return 503;
    case ErrorCode::io:
    case ErrorCode::internal:
    case ErrorCode::non_finite:
      return 500;
    default:
      return 400;
  }
}

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind,
                const std::string& message) {
  send_json(res, status, {{"error", kind}, {"message", message}});
}

// What the client asked for besides the image itself.
struct ClassifyRequest {
  bool consent = false;
  ImageSource source = ImageSource::upload;
  std::optional<CropBox> crop;
  std::optional<EmotionLabel> user_label;
};

std::int64_t crop_field(const json& c, const char* key) {
  const auto& v = c.at(key);
  if (!v.is_number_integer()) fail(ErrorCode::invalid_argument, std::string("crop.") + key + " must be an integer");
  return v.get<std::int64_t>();
}

ClassifyRequest parse_metadata(const std::string& text) {
  ClassifyRequest r;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("metadata is not JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::invalid_argument, "metadata must be a JSON object");
  if (j.contains("consent") && !j["consent"].is_null()) {
    // Only a literal boolean counts; "true", 1 and friends are rejected.
    if (!j["consent"].is_boolean()) fail(ErrorCode::invalid_argument, "consent must be a boolean");
    r.consent = j["consent"].get<bool>();
  }
  if (j.contains("source") && !j["source"].is_null()) {
    const auto s = j["source"].is_string() ? parse_image_source(j["source"].get<std::string>())
                                           : std::nullopt;
    if (!s) fail(ErrorCode::invalid_argument, "source must be \"webcam\" or \"upload\"");
    r.source = *s;
  }
  if (j.contains("crop") && !j["crop"].is_null()) {
    const auto& c = j["crop"];
    if (!c.is_object()) fail(ErrorCode::invalid_argument, "crop must be an object {x, y, w, h}");
    try {
      r.crop = CropBox{crop_field(c, "x"), crop_field(c, "y"), crop_field(c, "w"), crop_field(c, "h")};
    } catch (const json::exception&) {
      fail(ErrorCode::invalid_argument, "crop must have integer x, y, w and h");
    }
  }
  if (j.contains("user_label") && !j["user_label"].is_null()) {
    const auto l = j["user_label"].is_string() ? parse_label(j["user_label"].get<std::string>())
                                               : std::nullopt;
    if (!l) fail(ErrorCode::invalid_argument, "user_label must be one of the 8 emotion names");
    r.user_label = *l;
  }
  return r;
}

std::int64_t parse_int(const std::string& s, const char* what) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    fail(ErrorCode::invalid_argument, std::string("bad ") + what + " '" + s + "'");
  return v;
}

// Raw-body form: ?consent=true&source=webcam&crop=x,y,w,h&user_label=sad
ClassifyRequest parse_query(const httplib::Request& req) {
  ClassifyRequest r;
  if (req.has_param("consent")) {
    const std::string v = req.get_param_value("consent");
    if (v != "true" && v != "false") fail(ErrorCode::invalid_argument, "consent must be true or false");
    r.consent = v == "true";
  }
  if (req.has_param("source")) {
    const auto s = parse_image_source(req.get_param_value("source"));
    if (!s) fail(ErrorCode::invalid_argument, "source must be webcam or upload");
    r.source = *s;
  }
  if (req.has_param("crop")) {
    const std::string v = req.get_param_value("crop");
    std::int64_t f[4];
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
      const std::size_t end = i < 3 ? v.find(',', start) : v.size();
      if (end == std::string::npos) fail(ErrorCode::invalid_argument, "crop must be x,y,w,h");
      f[i] = parse_int(v.substr(start, end - start), "crop");
      start = end + 1;
    }
    r.crop = CropBox{f[0], f[1], f[2], f[3]};
  }
  if (req.has_param("user_label")) {
    const auto l = parse_label(req.get_param_value("user_label"));
    if (!l) fail(ErrorCode::invalid_argument, "user_label must be one of the 8 emotion names");
    r.user_label = *l;
  }
  return r;
}

bool truthy_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return false;
  const std::string v = req.get_param_value(name);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::invalid_argument, std::string(name) + " must be true or false");
}

ordered_json entry_json(const ModelEntry& e) {
  return {{"model_id", e.model_id},
          {"name", e.name},
          {"installed_at", e.installed_at},
          {"active", e.active}};
}

std::size_t content_length(const httplib::Request& req) {
  if (!req.has_header("Content-Length")) return req.body.size();
  const std::string v = req.get_header_value("Content-Length");
  std::size_t n = 0;
  std::from_chars(v.data(), v.data() + v.size(), n);
  return n;
}

// Multipart framing and the metadata part may add a little beyond the image.
constexpr std::size_t kMultipartSlack = 64u << 10;

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  ImageStore store;
  ModelRegistry registry;
  httplib::Server server;
  int port = -1;

  explicit Impl(ServiceConfig c)
      : config(std::move(c)), store(config.store_root), registry(config.store_root) {
    routes();
  }

  void guarded(httplib::Response& res, const std::function<void()>& body) {
    try {
      body();
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  }

  void classify(const httplib::Request& req, httplib::Response& res) {
    if (content_length(req) > config.max_upload_bytes + kMultipartSlack)
      return send_error(res, 413, "payload_too_large",
                        "request exceeds the " + std::to_string(config.max_upload_bytes) +
                            " byte upload limit");
    ClassifyRequest meta;
    std::string image;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("image"))
        return send_error(res, 400, "invalid_argument", "multipart request needs an 'image' part");
      image = req.get_file_value("image").content;
      if (req.has_file("metadata")) meta = parse_metadata(req.get_file_value("metadata").content);
    } else {
      image = req.body;
      meta = parse_query(req);
    }
    if (image.size() > config.max_upload_bytes)
      return send_error(res, 413, "payload_too_large",
                        "image exceeds the " + std::to_string(config.max_upload_bytes) +
                            " byte upload limit");

    // Pin the model for the whole request so an activation cannot change it.
    const auto active = registry.active();
    if (!active) fail(ErrorCode::no_active_model, "no model is active; install one via POST /api/models");

    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(image.data()),
                                              image.size());
    const Tensor input = preprocess(bytes, meta.crop);
    ClassificationResult result = predict_topk(active->model, input);

    std::optional<std::string> record_id;
    if (meta.consent) {
      ImageRecord rec;
      rec.source = meta.source;
      rec.crop = meta.crop;
      rec.predictions = result;
      rec.consent = true;
      rec.user_label = meta.user_label;
      rec.model_id = active->id;
      record_id = store.store(std::move(rec), bytes);
    }
    ordered_json body = classification_json(result);
    body["model_id"] = active->id;
    body["stored"] = record_id.has_value();
    body["record_id"] = record_id ? json(*record_id) : json(nullptr);
    send_json(res, 200, body);
  }

  void routes() {
    server.set_payload_max_length(std::max(config.max_model_bytes, config.max_upload_bytes + kMultipartSlack));

    server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", config.allowed_origin);
      if (config.allowed_origin != "*") res.set_header("Vary", "Origin");
    });
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Max-Age", "600");
    });
    server.set_error_handler([this](const httplib::Request&, httplib::Response& res) {
      if (!res.has_header("Access-Control-Allow-Origin"))
        res.set_header("Access-Control-Allow-Origin", config.allowed_origin);
      if (!res.body.empty()) return;
      if (res.status == 413)
        send_error(res, 413, "payload_too_large", "request body exceeds the configured limit");
      else if (res.status == 404)
        send_error(res, 404, "not_found", "no such endpoint");
      else
        send_error(res, res.status, "http_error", httplib::status_message(res.status));
    });

    server.Post("/api/classify", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { classify(req, res); });
    });

    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        const auto active = registry.active();
        const bool ok = store.healthy();
        ordered_json body;
        body["status"] = ok ? "ok" : "unavailable";
        body["active_model_id"] = active ? json(active->id) : json(nullptr);
        body["stored_image_count"] = store.stored_image_count();
        send_json(res, ok ? 200 : 503, body);
      });
    });

    server.Get("/api/models", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        ordered_json models = ordered_json::array();
        std::optional<std::string> active_id;
        for (const auto& e : registry.list()) {
          models.push_back(entry_json(e));
          if (e.active) active_id = e.model_id;
        }
        send_json(res, 200,
                  {{"models", models}, {"active_model_id", active_id ? json(*active_id) : json(nullptr)}});
      });
    });

    server.Post("/api/models", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::string bytes = req.body, name = req.has_param("name") ? req.get_param_value("name") : "";
        if (req.is_multipart_form_data()) {
          if (!req.has_file("model"))
            return send_error(res, 400, "invalid_argument", "multipart request needs a 'model' part");
          const auto part = req.get_file_value("model");
          bytes = part.content;
          if (name.empty()) name = part.filename;
        }
        const auto r = registry.install(
            {reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()}, name);
        for (const auto& e : registry.list())
          if (e.model_id == r.model_id) send_json(res, r.created ? 201 : 200, entry_json(e));
      });
    });

    server.Post("/api/models/:id/activate", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        registry.activate(req.path_params.at("id"));
        send_json(res, 200, {{"active_model_id", req.path_params.at("id")}});
      });
    });

    server.Get("/api/dataset/export", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const bool labeled_only = truthy_param(req, "labeled_only");
        const auto archive = store.export_archive(labeled_only);
        res.status = 200;
        res.set_header("Content-Disposition", "attachment; filename=\"dataset.tar\"");
        res.set_content(reinterpret_cast<const char*>(archive.data()), archive.size(),
                        "application/x-tar");
      });
    });
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Service::~Service() { stop(); }

int Service::bind() {
  auto& s = impl_->server;
  const int port = impl_->config.port == 0
                       ? s.bind_to_any_port(impl_->config.host)
                       : (s.bind_to_port(impl_->config.host, impl_->config.port)
                              ? impl_->config.port
                              : -1);
  if (port < 0)
    fail(ErrorCode::io, "cannot listen on " + impl_->config.host + ":" +
                            std::to_string(impl_->config.port));
  impl_->port = port;
  return port;
}

void Service::run() {
  if (impl_->port < 0) fail(ErrorCode::invalid_argument, "run() before bind()");
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

ImageStore& Service::store() { return impl_->store; }
ModelRegistry& Service::registry() { return impl_->registry; }

}  // namespace fer
