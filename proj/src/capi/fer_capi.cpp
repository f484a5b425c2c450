#include "fer/fer.h"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "data/dataset.hpp"
#include "evaluate/metrics.hpp"
#include "evaluate/report.hpp"
#include "model/ferw.hpp"
#include "model/network.hpp"
#include "preprocess/image.hpp"
#include "service/image_store.hpp"
#include "service/service.hpp"
#include "service/tar.hpp"
#include "train/trainer.hpp"
#include "json.hpp"

struct fer_cancel {
  std::atomic<bool> flag{false};
};

struct fer_model {
  fer::Model model;
};

struct fer_server {
  std::unique_ptr<fer::Service> service;
};

namespace {

thread_local std::string g_last_error;

fer_status status_of(fer::ErrorCode code) {
  using fer::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return FER_ERR_INVALID_ARGUMENT;
    case ErrorCode::shape_mismatch: return FER_ERR_SHAPE_MISMATCH;
    case ErrorCode::io: return FER_ERR_IO;
    case ErrorCode::decode: return FER_ERR_DECODE;
    case ErrorCode::bad_magic: return FER_ERR_BAD_MAGIC;
    case ErrorCode::unsupported_version: return FER_ERR_UNSUPPORTED_VERSION;
    case ErrorCode::truncated: return FER_ERR_TRUNCATED;
    case ErrorCode::checksum_mismatch: return FER_ERR_CHECKSUM_MISMATCH;
    case ErrorCode::format: return FER_ERR_FORMAT;
    case ErrorCode::consent_required: return FER_ERR_CONSENT_REQUIRED;
    case ErrorCode::not_found: return FER_ERR_NOT_FOUND;
    case ErrorCode::no_active_model: return FER_ERR_NO_ACTIVE_MODEL;
    case ErrorCode::non_finite: return FER_ERR_NON_FINITE;
    case ErrorCode::internal: return FER_ERR_INTERNAL;
  }
  return FER_ERR_INTERNAL;
}

// Runs body, translating exceptions into a status plus the thread's message.
template <typename F>
fer_status guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return FER_OK;
  } catch (const fer::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FER_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FER_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) fer::fail(fer::ErrorCode::invalid_argument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

fer::LabeledDataset load_dataset(const char* root) {
  return fer::load_labeled_dataset(std::filesystem::path(root));
}

}  // namespace

extern "C" {

const char* fer_version(void) { return "1.0.0"; }

const char* fer_status_name(fer_status status) {
  switch (status) {
    case FER_OK: return "ok";
    case FER_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case FER_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case FER_ERR_IO: return "io";
    case FER_ERR_DECODE: return "decode";
    case FER_ERR_BAD_MAGIC: return "bad_magic";
    case FER_ERR_UNSUPPORTED_VERSION: return "unsupported_version";
    case FER_ERR_TRUNCATED: return "truncated";
    case FER_ERR_CHECKSUM_MISMATCH: return "checksum_mismatch";
    case FER_ERR_FORMAT: return "format";
    case FER_ERR_CONSENT_REQUIRED: return "consent_required";
    case FER_ERR_NOT_FOUND: return "not_found";
    case FER_ERR_NO_ACTIVE_MODEL: return "no_active_model";
    case FER_ERR_NON_FINITE: return "non_finite";
    case FER_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* fer_last_error(void) { return g_last_error.c_str(); }

void fer_string_free(char* s) { std::free(s); }

const char* fer_label_name(int index) {
  const auto label = fer::label_from_index(index);
  return label ? fer::kEmotionNames[static_cast<std::size_t>(index)].data() : nullptr;
}

fer_status fer_cancel_create(fer_cancel** out) {
  return guard([&] {
    require(out, "fer_cancel_create: out is NULL");
    *out = new fer_cancel;
  });
}

void fer_cancel_request(fer_cancel* cancel) {
  if (cancel) cancel->flag.store(true);
}

int fer_cancel_requested(const fer_cancel* cancel) { return cancel && cancel->flag.load(); }

void fer_cancel_free(fer_cancel* cancel) { delete cancel; }

fer_status fer_model_create_reference(uint64_t seed, fer_model** out) {
  return guard([&] {
    require(out, "fer_model_create_reference: out is NULL");
    *out = new fer_model{fer::build_reference_model(seed)};
  });
}

fer_status fer_model_load(const char* path, fer_model** out) {
  return guard([&] {
    require(path && out, "fer_model_load: path and out are required");
    *out = new fer_model{fer::load_weights(path)};
  });
}

fer_status fer_model_save(const fer_model* model, const char* path) {
  return guard([&] {
    require(model && path, "fer_model_save: model and path are required");
    fer::save_weights(model->model, path);
  });
}

void fer_model_free(fer_model* model) { delete model; }

fer_status fer_model_info_get(const fer_model* model, fer_model_info* out) {
  return guard([&] {
    require(model && out, "fer_model_info_get: model and out are required");
    const auto& m = model->model;
    *out = {};
    out->parameter_count = m.parameter_count();
    out->trainable_count = m.trainable_count();
    out->layer_count = m.spec().layers.size();
    out->flatten_width = m.layout().flatten_width;
    const auto& in = m.spec().input;
    if (in.size() == 3) {
      out->input_height = in[0];
      out->input_width = in[1];
      out->input_channels = in[2];
    }
  });
}

fer_status fer_model_describe(const fer_model* model, char** out) {
  return guard([&] {
    require(model && out, "fer_model_describe: model and out are required");
    *out = dup_string(model->model.describe());
  });
}

fer_status fer_model_classify(const fer_model* model, const uint8_t* bytes, size_t size,
                              const fer_crop* crop, fer_classification* out) {
  return guard([&] {
    require(model && out && (bytes || size == 0), "fer_model_classify: model, bytes and out are required");
    std::optional<fer::CropBox> box;
    if (crop) box = fer::CropBox{crop->x, crop->y, crop->w, crop->h};
    const fer::Tensor input = fer::preprocess({bytes, size}, box);
    const auto r = fer::predict_topk(model->model, input, FER_TOP_K);
    for (std::size_t k = 0; k < FER_TOP_K; ++k) {
      out->top_label[k] = fer::label_index(r.top.at(k).label);
      out->top_confidence[k] = r.top.at(k).confidence;
    }
    for (std::size_t c = 0; c < FER_NUM_EMOTIONS; ++c) out->distribution[c] = r.distribution[c];
  });
}

fer_status fer_evaluate_directory(const fer_model* model, const char* data_root,
                                  const char* display_name, fer_eval_summary* summary,
                                  char** report) {
  return guard([&] {
    require(model && data_root, "fer_evaluate_directory: model and data_root are required");
    const fer::DatasetSource source(load_dataset(data_root));
    const fer::EvalMetrics m = fer::evaluate(model->model, source);
    if (summary) *summary = {m.evaluated, m.failures.size(), m.top1, m.top3};
    if (report)
      *report = dup_string(fer::render_comparison_report(
          &m, display_name ? display_name : "Evaluated model", fer::BaselineTable::published()));
  });
}

fer_status fer_baseline_report(char** report) {
  return guard([&] {
    require(report, "fer_baseline_report: report is NULL");
    *report = dup_string(fer::render_comparison_report(nullptr, "", fer::BaselineTable::published()));
  });
}

void fer_train_options_init(fer_train_options* o) {
  if (!o) return;
  const fer::TrainConfig d;
  *o = {};
  o->epochs = d.epochs;
  o->batch_size = d.batch_size;
  o->seed = d.seed;
  o->class_weighting = d.class_weighting ? 1 : 0;
  o->learning_rate = d.adam.alpha;
  o->beta1 = d.adam.beta1;
  o->beta2 = d.adam.beta2;
  o->epsilon = d.adam.epsilon;
}

fer_status fer_train(const fer_model* initial, const char* train_root, const char* eval_root,
                     const fer_train_options* options, fer_model** best, char** history_csv,
                     int* interrupted) {
  return guard([&] {
    require(initial && train_root && eval_root && options,
            "fer_train: initial, train_root, eval_root and options are required");
    fer::TrainConfig cfg;
    cfg.epochs = options->epochs;
    cfg.batch_size = options->batch_size;
    cfg.seed = options->seed;
    cfg.class_weighting = options->class_weighting != 0;
    cfg.adam = {options->learning_rate, options->beta1, options->beta2, options->epsilon};
    if (options->checkpoint_path) cfg.checkpoint_path = options->checkpoint_path;
    if (options->on_epoch) {
      const auto cb = options->on_epoch;
      void* user = options->user;
      cfg.on_epoch = [cb, user](const fer::EpochRecord& r) {
        const fer_epoch_record c{r.epoch, r.train_loss, r.train_acc, r.eval_top1, r.eval_top3};
        return cb(&c, user) != 0;
      };
    }
    if (options->cancel) cfg.stop = &options->cancel->flag;
    cfg.validate();

    const fer::DatasetSource train_set(load_dataset(train_root));
    const fer::DatasetSource eval_set(load_dataset(eval_root));
    fer::TrainResult result = fer::train(initial->model, train_set, eval_set, cfg);
    if (interrupted) *interrupted = result.interrupted ? 1 : 0;
    if (history_csv) *history_csv = dup_string(result.history.to_csv());
    if (best) *best = new fer_model{std::move(result.best)};
  });
}

fer_status fer_store_export(const char* store_root, int labeled_only, const char* out_path,
                            size_t* record_count) {
  return guard([&] {
    require(store_root && out_path, "fer_store_export: store_root and out_path are required");
    const std::filesystem::path root(store_root);
    std::error_code ec;
    if (!std::filesystem::is_directory(root, ec))
      fer::fail(fer::ErrorCode::io, "store '" + root.string() + "' does not exist");
    const fer::ImageStore store(root);
    const auto archive = store.export_archive(labeled_only != 0);
    fer::write_file_atomic(out_path, archive);
    if (record_count) {
      const auto entries = fer::read_tar(archive);
      const auto manifest = nlohmann::json::parse(entries.at(0).data.begin(), entries.at(0).data.end());
      *record_count = manifest.at("record_count").get<std::size_t>();
    }
  });
}

void fer_server_config_init(fer_server_config* c) {
  if (!c) return;
  static const fer::ServiceConfig d;
  *c = {};
  c->host = d.host.c_str();
  c->port = d.port;
  c->max_upload_bytes = d.max_upload_bytes;
  c->max_model_bytes = d.max_model_bytes;
  c->allowed_origin = d.allowed_origin.c_str();
}

fer_status fer_server_create(const fer_server_config* c, fer_server** out) {
  return guard([&] {
    require(c && out && c->store_root, "fer_server_create: config.store_root and out are required");
    require(c->port >= 0 && c->port <= 65535, "fer_server_create: port must be in [0, 65535]");
    require(c->max_upload_bytes > 0, "fer_server_create: max_upload_bytes must be positive");
    fer::ServiceConfig cfg;
    cfg.store_root = c->store_root;
    if (c->host) cfg.host = c->host;
    cfg.port = c->port;
    cfg.max_upload_bytes = c->max_upload_bytes;
    if (c->max_model_bytes) cfg.max_model_bytes = c->max_model_bytes;
    if (c->allowed_origin) cfg.allowed_origin = c->allowed_origin;
    *out = new fer_server{std::make_unique<fer::Service>(std::move(cfg))};
  });
}

fer_status fer_server_install_model(fer_server* server, const char* ferw_path, char model_id[65]) {
  return guard([&] {
    require(server && ferw_path, "fer_server_install_model: server and path are required");
    const auto bytes = fer::read_file(ferw_path);
    auto& reg = server->service->registry();
    std::string id;
    try {
      id = reg.install(bytes, std::filesystem::path(ferw_path).filename().string()).model_id;
    } catch (const fer::Error& e) {
      throw fer::Error(e.code(), std::string(ferw_path) + ": " + e.what());
    }
    reg.activate(id);
    if (model_id) std::memcpy(model_id, id.c_str(), id.size() + 1);
  });
}

fer_status fer_server_bind(fer_server* server, int* port) {
  return guard([&] {
    require(server, "fer_server_bind: server is NULL");
    const int p = server->service->bind();
    if (port) *port = p;
  });
}

fer_status fer_server_run(fer_server* server) {
  return guard([&] {
    require(server, "fer_server_run: server is NULL");
    server->service->run();
  });
}

void fer_server_stop(fer_server* server) {
  if (server) server->service->stop();
}

void fer_server_free(fer_server* server) { delete server; }

}  // extern "C"
