// Command-line front end. Talks to the engine only through the C interface.

#include <fer/fer.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

fer_cancel* g_cancel = nullptr;

extern "C" void on_signal(int) { fer_cancel_request(g_cancel); }

struct RuntimeError {
  std::string message;
};

void check(fer_status s, const std::string& context) {
  if (s != FER_OK) throw RuntimeError{context + ": " + fer_last_error()};
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { fer_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct ModelHandle {
  fer_model* p = nullptr;
  ~ModelHandle() { fer_model_free(p); }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw RuntimeError{"cannot write '" + path.string() + "'"};
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data, eval, out, history, init;
  std::size_t epochs = 0, batch = 0;
  std::uint64_t seed = 0;
  bool no_class_weights = false;
  double lr = 0.001;
};

int epoch_logger(const fer_epoch_record* r, void* user) {
  const auto total = *static_cast<const std::size_t*>(user);
  std::printf("epoch %zu/%zu train_loss %.6f train_acc %.4f eval_top1 %.4f eval_top3 %.4f\n",
              r->epoch, total, r->train_loss, r->train_acc, r->eval_top1, r->eval_top3);
  std::fflush(stdout);
  return 1;
}

int run_train(const TrainArgs& a) {
  ModelHandle initial;
  if (a.init.empty())
    check(fer_model_create_reference(a.seed, &initial.p), "initialising model");
  else
    check(fer_model_load(a.init.c_str(), &initial.p), "--init " + a.init);

  fer_train_options o;
  fer_train_options_init(&o);
  o.epochs = a.epochs;
  o.batch_size = a.batch;
  o.seed = a.seed;
  o.class_weighting = a.no_class_weights ? 0 : 1;
  o.learning_rate = a.lr;
  o.checkpoint_path = a.out.c_str();
  std::size_t total = a.epochs;
  o.on_epoch = epoch_logger;
  o.user = &total;
  o.cancel = g_cancel;

  OwnedString csv;
  ModelHandle best;
  int interrupted = 0;
  check(fer_train(initial.p, a.data.c_str(), a.eval.c_str(), &o, &best.p, &csv.p, &interrupted),
        "train");
  const std::string rows = csv.str();
  const bool any_epoch = rows.find('\n') + 1 < rows.size();
  if (!any_epoch) throw RuntimeError{"interrupted before the first epoch finished; nothing written"};
  check(fer_model_save(best.p, a.out.c_str()), "--out " + a.out);
  const fs::path history =
      a.history.empty() ? fs::path(a.out).replace_extension(".history.csv") : fs::path(a.history);
  write_text(history, rows);
  if (interrupted) std::printf("interrupted; kept the completed epochs\n");
  std::printf("best checkpoint %s\nhistory %s\n", a.out.c_str(), history.string().c_str());
  return 0;
}

// ---- eval ----------------------------------------------------------------

int run_eval(const std::string& model_path, const std::string& data, const std::string& report_path,
             std::string name) {
  ModelHandle model;
  check(fer_model_load(model_path.c_str(), &model.p), "--model " + model_path);
  if (name.empty()) name = fs::path(model_path).stem().string();
  OwnedString report;
  fer_eval_summary summary{};
  check(fer_evaluate_directory(model.p, data.c_str(), name.c_str(), &summary, &report.p),
        "--data " + data);
  std::fputs(report.str().c_str(), stdout);
  if (!report_path.empty()) write_text(report_path, report.str());
  return 0;
}

// ---- serve ---------------------------------------------------------------

struct ServeArgs {
  std::string model, store, listen = "127.0.0.1:8080", origin = "*";
  std::size_t max_upload = 10u << 20;
};

int run_serve(const ServeArgs& a) {
  const auto colon = a.listen.rfind(':');
  if (colon == std::string::npos) throw RuntimeError{"--listen must be host:port, got '" + a.listen + "'"};
  const std::string host = a.listen.substr(0, colon);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(a.listen.substr(colon + 1), &used);
    if (used != a.listen.size() - colon - 1 || port < 0 || port > 65535) throw std::out_of_range("");
  } catch (const std::exception&) {
    throw RuntimeError{"--listen has a bad port: '" + a.listen + "'"};
  }

  fer_server_config cfg;
  fer_server_config_init(&cfg);
  cfg.store_root = a.store.c_str();
  cfg.host = host.c_str();
  cfg.port = port;
  cfg.max_upload_bytes = a.max_upload;
  cfg.allowed_origin = a.origin.c_str();
  fer_server* server = nullptr;
  check(fer_server_create(&cfg, &server), "--store " + a.store);
  struct Free {
    fer_server* s;
    ~Free() { fer_server_free(s); }
  } guard{server};

  char model_id[65] = "";
  if (!a.model.empty()) check(fer_server_install_model(server, a.model.c_str(), model_id), "--model");
  int bound = 0;
  check(fer_server_bind(server, &bound), "--listen " + a.listen);
  std::printf("serving on http://%s:%d", host.c_str(), bound);
  if (model_id[0]) std::printf(" with model %s", model_id);
  std::printf("\n");
  std::fflush(stdout);

  std::atomic<bool> finished{false};
  std::thread watcher([&] {
    while (!finished.load() && !fer_cancel_requested(g_cancel))
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    fer_server_stop(server);
  });
  const fer_status s = fer_server_run(server);
  finished = true;
  watcher.join();
  check(s, "serve");
  std::printf("stopped\n");
  return 0;
}

// ---- export-dataset ------------------------------------------------------

int run_export(const std::string& store, const std::string& out, bool labeled_only) {
  std::size_t records = 0;
  check(fer_store_export(store.c_str(), labeled_only ? 1 : 0, out.c_str(), &records),
        "export from '" + store + "' to '" + out + "'");
  std::printf("wrote %zu records to %s\n", records, out.c_str());
  return 0;
}

// ---- inspect-model -------------------------------------------------------

int run_inspect(const std::string& path) {
  ModelHandle model;
  check(fer_model_load(path.c_str(), &model.p), path);
  OwnedString text;
  check(fer_model_describe(model.p, &text.p), path);
  fer_model_info info{};
  check(fer_model_info_get(model.p, &info), path);
  std::fputs(text.str().c_str(), stdout);
  if (info.flatten_width) std::printf("flatten width %zu\n", info.flatten_width);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Facial emotion recognition: train, evaluate, serve and curate", "fer"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", std::string(fer_version()));

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on a directory-per-label dataset");
  train->add_option("--data", ta.data, "Training root with one directory per label")->required()->check(CLI::ExistingDirectory);
  train->add_option("--eval", ta.eval, "Evaluation root, scored after every epoch")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", ta.out, "Where the peak-epoch checkpoint (FERW) is written")->required();
  train->add_option("--epochs", ta.epochs, "Number of epochs")->default_val(13)->check(CLI::PositiveNumber);
  train->add_option("--batch", ta.batch, "Mini-batch size")->default_val(64)->check(CLI::PositiveNumber);
  train->add_option("--seed", ta.seed, "Seed for initialisation and shuffling")->default_val(0);
  train->add_flag("--no-class-weights", ta.no_class_weights, "Disable inverse-frequency class weights");
  train->add_option("--lr", ta.lr, "Adam learning rate")->default_val(0.001)->check(CLI::PositiveNumber);
  train->add_option("--history", ta.history, "History CSV path (default: <out> with .history.csv)");
  train->add_option("--init", ta.init, "Start from this FERW file instead of a fresh reference model")->check(CLI::ExistingFile);

  std::string eval_model, eval_data, eval_report, eval_name;
  auto* eval = app.add_subcommand("eval", "Evaluate a model and print the comparison report");
  eval->add_option("--model", eval_model, "FERW model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Directory-per-label test root")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--report", eval_report, "Also write the report to this file");
  eval->add_option("--name", eval_name, "Row name for the evaluated model (default: file stem)");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the classification HTTP service");
  serve->add_option("--model", sa.model, "FERW file to install and activate")->check(CLI::ExistingFile);
  serve->add_option("--store", sa.store, "Storage root for images and models")->required()->envname("FER_STORE_ROOT");
  serve->add_option("--listen", sa.listen, "host:port to listen on; port 0 picks a free one")->default_val("127.0.0.1:8080");
  serve->add_option("--max-upload", sa.max_upload, "Largest accepted image upload in bytes")->default_val(10u << 20)->check(CLI::PositiveNumber);
  serve->add_option("--allowed-origin", sa.origin, "CORS allowed origin")->default_val("*");

  std::string ex_store, ex_out;
  bool ex_labeled = false;
  auto* exp = app.add_subcommand("export-dataset", "Write the stored images as a directory-per-label tar");
  exp->add_option("--store", ex_store, "Storage root")->required()->envname("FER_STORE_ROOT");
  exp->add_option("--out", ex_out, "Archive path")->required();
  exp->add_flag("--labeled-only", ex_labeled, "Only images with a human label");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-model", "Print a model's layer manifest and parameter counts");
  inspect->add_option("model", inspect_path, "FERW model file")->required()->check(CLI::ExistingFile);

  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known |= sub->get_name() == argv[1];
    if (!known) {
      std::fprintf(stderr, "error: unknown subcommand '%s'\n%s", argv[1], app.help().c_str());
      return kExitUsage;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (fer_cancel_create(&g_cancel) != FER_OK) return kExitRuntime;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  int rc = 0;
  try {
    if (*train)
      rc = run_train(ta);
    else if (*eval)
      rc = run_eval(eval_model, eval_data, eval_report, eval_name);
    else if (*serve)
      rc = run_serve(sa);
    else if (*exp)
      rc = run_export(ex_store, ex_out, ex_labeled);
    else if (*inspect)
      rc = run_inspect(inspect_path);
  } catch (const RuntimeError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    rc = kExitRuntime;
  }
  std::signal(SIGINT, SIG_DFL);
  std::signal(SIGTERM, SIG_DFL);
  fer_cancel_free(g_cancel);
  return rc;
}
