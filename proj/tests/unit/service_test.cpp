#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "data/dataset.hpp"
#include "model/ferw.hpp"
#include "service/hash.hpp"
#include "service/image_store.hpp"
#include "service/registry.hpp"
#include "service/tar.hpp"
#include "support/images.hpp"
#include "support/models.hpp"
#include "support/server.hpp"
#include "support/tempdir.hpp"

namespace fer {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

std::size_t count_files(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

ClassificationResult happy_result() {
  return rank_distribution(std::vector<float>{0.0018f, 0.97f, 0.0018f, 0.010f, 0.0018f, 0.0018f,
                                              0.0018f, 0.011f});
}

ImageRecord consented(std::optional<EmotionLabel> label = std::nullopt) {
  ImageRecord r;
  r.consent = true;
  r.predictions = happy_result();
  r.model_id = "stub";
  r.user_label = label;
  return r;
}

std::array<double, kNumEmotions> peaked(EmotionLabel top) {
  std::array<double, kNumEmotions> p;
  p.fill(0.01);
  p[label_index(top)] = 0.93;
  return p;
}

std::vector<std::uint8_t> ferw_of(const Model& m) { return encode_ferw(m); }

// Extracts with the system tar binary, an implementation independent of ours.
bool system_untar(const std::vector<std::uint8_t>& archive, const fs::path& dir) {
  const fs::path file = dir / "archive.tar";
  testing::write_bytes(file, archive);
  const fs::path out = dir / "x";
  fs::create_directories(out);
  const std::string cmd = "tar -xf '" + file.string() + "' -C '" + out.string() + "' 2>/dev/null";
  return std::system(cmd.c_str()) == 0;
}

bool have_system_tar() { return std::system("tar --version >/dev/null 2>&1") == 0; }

// ---- hashing and archives --------------------------------------------------

TEST(Hash, Sha256KnownAnswers) {
  EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex(bytes_of("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_TRUE(is_sha256_hex(sha256_hex(bytes_of("x"))));
  EXPECT_FALSE(is_sha256_hex("ABC"));
}

TEST(Hash, TimestampIsUtcIso) {
  const std::string t = utc_timestamp();
  ASSERT_EQ(t.size(), 24u);
  EXPECT_EQ(t[10], 'T');
  EXPECT_EQ(t.back(), 'Z');
}

TEST(Tar, RoundTripIncludingLongNames) {
  const std::string long_name = std::string(90, 'd') + "/" + std::string(70, 'f') + ".png";
  std::vector<TarEntry> in{{"manifest.json", bytes_of("{}")},
                           {"sad/abc.png", std::vector<std::uint8_t>(1000, 7)},
                           {long_name, bytes_of("zz")},
                           {"empty", {}}};
  const auto archive = write_tar(in);
  EXPECT_EQ(archive.size() % 512, 0u);
  const auto out = read_tar(archive);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].name, in[i].name);
    EXPECT_EQ(out[i].data, in[i].data);
  }
}

TEST(Tar, CorruptHeaderDetected) {
  auto archive = write_tar({{"a.txt", bytes_of("hello")}});
  archive[3] ^= 1;
  EXPECT_THROW(read_tar(archive), Error);
}

TEST(Tar, ReadableBySystemTar) {
  if (!have_system_tar()) GTEST_SKIP() << "no tar binary";
  TempDir dir;
  const std::string long_name = std::string(90, 'd') + "/" + std::string(70, 'f') + ".bin";
  ASSERT_TRUE(system_untar(write_tar({{"happy/a.png", bytes_of("AAA")}, {long_name, bytes_of("B")}}),
                           dir.path()));
  EXPECT_EQ(read_file(dir / "x/happy/a.png"), bytes_of("AAA"));
  EXPECT_EQ(read_file(dir.path() / "x" / long_name), bytes_of("B"));
}

// ---- image store -----------------------------------------------------------

TEST(ImageStore, ConsentFalseRejectedBeforeAnyWrite) {
  TempDir dir;
  ImageStore store(dir / "s");
  const std::size_t before = count_files(dir / "s");
  ImageRecord r = consented();
  r.consent = false;
  try {
    store.store(r, testing::class_png(EmotionLabel::sad));
    FAIL() << "expected consent_required";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::consent_required);
  }
  EXPECT_EQ(count_files(dir / "s"), before);
  EXPECT_EQ(store.stored_image_count(), 0u);
  EXPECT_TRUE(store.events().empty());
}

TEST(ImageStore, ContentAddressedOneBlobTwoEvents) {
  TempDir dir;
  ImageStore store(dir / "s");
  const auto png = testing::class_png(EmotionLabel::happy);
  const std::string a = store.store(consented(), png);
  const std::string b = store.store(consented(), png);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, sha256_hex(png));
  EXPECT_EQ(count_files(dir / "s/blobs"), 1u);
  EXPECT_EQ(store.events().size(), 2u);
  EXPECT_EQ(store.stored_image_count(), 1u);
  EXPECT_EQ(read_file(store.blob_path(a, "png")), png);
}

TEST(ImageStore, DistinctImagesDistinctBlobs) {
  TempDir dir;
  ImageStore store(dir / "s");
  store.store(consented(), testing::class_png(EmotionLabel::happy));
  store.store(consented(), testing::class_png(EmotionLabel::sad));
  EXPECT_EQ(count_files(dir / "s/blobs"), 2u);
  EXPECT_EQ(store.events().size(), 2u);
}

TEST(ImageStore, JpegGetsJpgExtension) {
  TempDir dir;
  ImageStore store(dir / "s");
  const auto jpg = encode_jpeg(testing::solid_image(16, 16, {10, 20, 30}));
  const std::string id = store.store(consented(), jpg);
  EXPECT_TRUE(fs::exists(store.blob_path(id, "jpg")));
  EXPECT_EQ(store.events().front().extension, "jpg");
}

TEST(ImageStore, RejectsRecordWithoutThreePredictions) {
  TempDir dir;
  ImageStore store(dir / "s");
  ImageRecord r = consented();
  r.predictions.top.pop_back();
  EXPECT_THROW(store.store(r, testing::class_png(EmotionLabel::sad)), Error);
  EXPECT_EQ(count_files(dir / "s"), 0u);
}

TEST(ImageStore, RecordSurvivesReopenWithFields) {
  TempDir dir;
  const auto png = testing::class_png(EmotionLabel::fear);
  {
    ImageStore store(dir / "s");
    ImageRecord r = consented(EmotionLabel::contempt);
    r.source = ImageSource::webcam;
    r.crop = CropBox{1, 2, 30, 31};
    store.store(r, png);
  }
  ImageStore again(dir / "s");
  const auto ev = again.events();
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].id, sha256_hex(png));
  EXPECT_EQ(ev[0].source, ImageSource::webcam);
  ASSERT_TRUE(ev[0].crop.has_value());
  EXPECT_EQ(ev[0].crop->w, 30);
  EXPECT_EQ(ev[0].user_label, EmotionLabel::contempt);
  EXPECT_TRUE(ev[0].consent);
  EXPECT_EQ(ev[0].predictions.top.size(), 3u);
  EXPECT_EQ(ev[0].predictions.top[0].label, EmotionLabel::happy);
  EXPECT_EQ(again.stored_image_count(), 1u);
}

TEST(ImageStore, TornTrailingLineDroppedOnOpen) {
  TempDir dir;
  {
    ImageStore store(dir / "s");
    store.store(consented(), testing::class_png(EmotionLabel::happy));
  }
  {
    std::ofstream log(dir / "s/records.jsonl", std::ios::app);
    log << "{\"id\":\"dead";  // crash mid-append
  }
  ImageStore store(dir / "s");
  EXPECT_EQ(store.events().size(), 1u);
  store.store(consented(), testing::class_png(EmotionLabel::sad));
  EXPECT_EQ(store.events().size(), 2u);
}

TEST(ImageStore, ExportLayoutAndManifest) {
  TempDir dir;
  ImageStore store(dir / "s");
  const auto sad = testing::class_png(EmotionLabel::sad);
  const auto unlabeled = testing::class_png(EmotionLabel::anger);
  const std::string sad_id = store.store(consented(EmotionLabel::sad), sad);
  const std::string un_id = store.store(consented(), unlabeled);

  const auto entries = read_tar(store.export_archive(false));
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_EQ(entries[0].name, "manifest.json");
  std::set<std::string> names;
  for (const auto& e : entries) names.insert(e.name);
  EXPECT_TRUE(names.count("sad/" + sad_id + ".png"));
  EXPECT_TRUE(names.count("predicted/happy/" + un_id + ".png"));
  const json manifest = json::parse(entries[0].data.begin(), entries[0].data.end());
  EXPECT_EQ(manifest["record_count"], 2);
  EXPECT_EQ(manifest["records"].size(), 2u);

  const auto labeled = read_tar(store.export_archive(true));
  ASSERT_EQ(labeled.size(), 2u);
  EXPECT_EQ(labeled[1].name, "sad/" + sad_id + ".png");
  EXPECT_EQ(labeled[1].data, sad);
}

TEST(ImageStore, LabeledOnlyWithOnlyPredictionsIsEmptyTree) {
  TempDir dir;
  ImageStore store(dir / "s");
  store.store(consented(), testing::class_png(EmotionLabel::anger));
  const auto entries = read_tar(store.export_archive(true));
  ASSERT_EQ(entries.size(), 1u);
  const json manifest = json::parse(entries[0].data.begin(), entries[0].data.end());
  EXPECT_EQ(manifest["record_count"], 0);
}

TEST(ImageStore, EmptyStoreExportsManifestOnly) {
  TempDir dir;
  ImageStore store(dir / "s");
  const auto entries = read_tar(store.export_archive(false));
  ASSERT_EQ(entries.size(), 1u);
  const json manifest = json::parse(entries[0].data.begin(), entries[0].data.end());
  EXPECT_EQ(manifest["record_count"], 0);
  EXPECT_TRUE(manifest["records"].empty());
}

TEST(ImageStore, LatestUserLabelWins) {
  TempDir dir;
  ImageStore store(dir / "s");
  const auto png = testing::class_png(EmotionLabel::neutral);
  store.store(consented(EmotionLabel::sad), png);
  const std::string id = store.store(consented(EmotionLabel::contempt), png);
  store.store(consented(), png);  // unlabeled later event keeps the label
  const auto entries = read_tar(store.export_archive(true));
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[1].name, "contempt/" + id + ".png");
  const json manifest = json::parse(entries[0].data.begin(), entries[0].data.end());
  EXPECT_EQ(manifest["records"][0]["user_label"], "contempt");
  EXPECT_EQ(manifest["records"][0]["events"], 3);
}

// Export, unpack with the system tar, then load through the dataset loader.
TEST(ImageStore, ExportReimportPreservesCountsAndLabels) {
  if (!have_system_tar()) GTEST_SKIP() << "no tar binary";
  TempDir dir;
  ImageStore store(dir / "s");
  std::map<std::string, EmotionLabel> expected;
  std::mt19937 rng(5);
  for (int k = 0; k < 12; ++k) {
    const auto label = static_cast<EmotionLabel>(k % kNumEmotions);
    const auto png = encode_png(testing::solid_image(20 + k, 20, {static_cast<std::uint8_t>(rng()), 1, 2}));
    const std::string id = store.store(consented(label), png);
    expected[id] = label;
  }
  const auto archive = store.export_archive(true);
  ASSERT_TRUE(system_untar(archive, dir.path()));
  const auto manifest = json::parse(read_file(dir / "x/manifest.json"));
  const LabeledDataset ds = load_labeled_dataset(dir / "x");
  EXPECT_EQ(ds.size(), manifest["record_count"].get<std::size_t>());
  EXPECT_EQ(ds.size(), expected.size());
  for (const auto& s : ds.samples) {
    const std::string id = s.path.stem().string();
    ASSERT_TRUE(expected.count(id));
    EXPECT_EQ(s.label, expected[id]);
  }
}

// ---- model registry --------------------------------------------------------

TEST(ModelRegistry, InstallIsContentAddressedAndIdempotent) {
  TempDir dir;
  ModelRegistry reg(dir.path());
  const auto bytes = ferw_of(testing::uniform_model());
  const auto a = reg.install(bytes, "uniform");
  const auto b = reg.install(bytes, "again");
  EXPECT_EQ(a.model_id, sha256_hex(bytes));
  EXPECT_TRUE(a.created);
  EXPECT_FALSE(b.created);
  EXPECT_EQ(reg.list().size(), 1u);
}

TEST(ModelRegistry, LaterInstallsDoNotActivate) {
  TempDir dir;
  ModelRegistry reg(dir.path());
  EXPECT_EQ(reg.active(), nullptr);
  const auto a = reg.install(ferw_of(testing::fixed_distribution_model(peaked(EmotionLabel::sad))), "a");
  const auto b = reg.install(ferw_of(testing::uniform_model()), "b");
  ASSERT_NE(reg.active(), nullptr);
  EXPECT_EQ(reg.active()->id, a.model_id);
  std::size_t active = 0;
  for (const auto& e : reg.list()) active += e.active;
  EXPECT_EQ(active, 1u);
  reg.activate(b.model_id);
  EXPECT_EQ(reg.active()->id, b.model_id);
}

TEST(ModelRegistry, LastActivationWinsAndPersists) {
  TempDir dir;
  std::string a, b;
  {
    ModelRegistry reg(dir.path());
    a = reg.install(ferw_of(testing::fixed_distribution_model(peaked(EmotionLabel::sad))), "a").model_id;
    b = reg.install(ferw_of(testing::uniform_model()), "b").model_id;
    reg.activate(a);
    reg.activate(b);
    reg.activate(a);
    EXPECT_EQ(reg.active()->id, a);
  }
  ModelRegistry again(dir.path());
  ASSERT_NE(again.active(), nullptr);
  EXPECT_EQ(again.active()->id, a);
  EXPECT_EQ(again.list().size(), 2u);
}

TEST(ModelRegistry, UnknownIdNotFound) {
  TempDir dir;
  ModelRegistry reg(dir.path());
  try {
    reg.activate(std::string(64, 'a'));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
  }
}

TEST(ModelRegistry, RejectsInvalidAndWrongGeometry) {
  TempDir dir;
  ModelRegistry reg(dir.path());
  EXPECT_THROW(reg.install(bytes_of("not a model"), "x"), Error);
  Tensor w(Shape{4 * 4 * 3, kNumEmotions}), b(Shape{kNumEmotions});
  const Model small(testing::flat_dense_spec({4, 4, 3}), {w, b});
  EXPECT_THROW(reg.install(ferw_of(small), "small"), Error);
  EXPECT_TRUE(reg.list().empty());
}

// ---- HTTP ------------------------------------------------------------------

class Http : public ::testing::Test {
 protected:
  ServiceConfig config() {
    ServiceConfig c;
    c.store_root = dir_ / "store";
    return c;
  }
  std::string install_happy(testing::RunningService& svc) {
    return svc.service()
        .registry()
        .install(ferw_of(testing::fixed_distribution_model(testing::happy_distribution())), "happy")
        .model_id;
  }
  TempDir dir_;
};

TEST_F(Http, HealthOnFreshStart) {
  testing::RunningService svc(config());
  auto r = svc.client().Get("/api/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const json j = testing::body_json(r);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_TRUE(j["active_model_id"].is_null());
  EXPECT_EQ(j["stored_image_count"], 0);
}

TEST_F(Http, ClassifyWithoutModelIs503) {
  testing::RunningService svc(config());
  auto r = svc.client().Post("/api/classify", testing::classify_form(testing::class_png(EmotionLabel::sad)));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 503);
  EXPECT_EQ(testing::body_json(r)["error"], "no_active_model");
}

TEST_F(Http, ClassifySchemaWithoutConsent) {
  testing::RunningService svc(config());
  const std::string id = install_happy(svc);
  auto r = svc.client().Post("/api/classify", testing::classify_form(testing::class_png(EmotionLabel::sad)));
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200) << r->body;
  const json j = testing::body_json(r);
  ASSERT_EQ(j["top"].size(), 3u);
  EXPECT_EQ(j["top"][0]["label"], "happy");
  EXPECT_NEAR(j["top"][0]["confidence"].get<double>(), 0.97, 1e-6);
  EXPECT_EQ(j["top"][1]["label"], "contempt");
  EXPECT_EQ(j["top"][2]["label"], "surprise");
  ASSERT_EQ(j["distribution"].size(), kNumEmotions);
  for (auto name : kEmotionNames) EXPECT_TRUE(j["distribution"].contains(std::string(name)));
  EXPECT_EQ(j["model_id"], id);
  EXPECT_EQ(j["stored"], false);
  EXPECT_TRUE(j["record_id"].is_null());
  EXPECT_EQ(svc.service().store().stored_image_count(), 0u);
  EXPECT_EQ(count_files(dir_ / "store/blobs"), 0u);
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST_F(Http, ConsentedClassifyStoresOneContentAddressedRecord) {
  testing::RunningService svc(config());
  install_happy(svc);
  const auto png = testing::class_png(EmotionLabel::happy);
  const std::string meta = R"({"consent": true, "source": "webcam", "crop": {"x": 2, "y": 2, "w": 30, "h": 30}})";
  auto r1 = svc.client().Post("/api/classify", testing::classify_form(png, meta));
  auto r2 = svc.client().Post("/api/classify", testing::classify_form(png, meta));
  ASSERT_TRUE(r1 && r2);
  ASSERT_EQ(r1->status, 200) << r1->body;
  const json j1 = testing::body_json(r1), j2 = testing::body_json(r2);
  EXPECT_EQ(j1["stored"], true);
  EXPECT_EQ(j1["record_id"], sha256_hex(png));
  EXPECT_EQ(j1["record_id"], j2["record_id"]);
  EXPECT_EQ(count_files(dir_ / "store/blobs"), 1u);
  const auto events = svc.service().store().events();
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].source, ImageSource::webcam);
  auto h = svc.client().Get("/api/health");
  EXPECT_EQ(testing::body_json(h)["stored_image_count"], 1);
}

TEST_F(Http, RawBodyWithQueryParameters) {
  testing::RunningService svc(config());
  install_happy(svc);
  const auto png = testing::class_png(EmotionLabel::fear);
  auto r = svc.client().Post("/api/classify?consent=true&crop=0,0,20,20&user_label=fear",
                             std::string(png.begin(), png.end()), "image/png");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200) << r->body;
  EXPECT_EQ(testing::body_json(r)["stored"], true);
  EXPECT_EQ(svc.service().store().events().at(0).user_label, EmotionLabel::fear);
}

TEST_F(Http, IdenticalRequestsGiveIdenticalResponses) {
  testing::RunningService svc(config());
  svc.service().registry().install(ferw_of(testing::color_oracle_model()), "oracle");
  const auto png = testing::class_png(EmotionLabel::disgust, 64);
  const std::string meta = R"({"crop": {"x": 5, "y": 3, "w": 40, "h": 50}})";
  auto a = svc.client().Post("/api/classify", testing::classify_form(png, meta));
  auto b = svc.client().Post("/api/classify", testing::classify_form(png, meta));
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->body, b->body);
  EXPECT_EQ(testing::body_json(a)["top"][0]["label"], "disgust");
}

TEST_F(Http, UndecodableImageIs400) {
  testing::RunningService svc(config());
  install_happy(svc);
  auto r = svc.client().Post("/api/classify", testing::classify_form(bytes_of("GIF89a not supported"),
                                                                     R"({"consent": true})"));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(testing::body_json(r)["error"], "decode");
  EXPECT_EQ(svc.service().store().stored_image_count(), 0u);
}

TEST_F(Http, BadCropAndMetadataAre400) {
  testing::RunningService svc(config());
  install_happy(svc);
  const auto png = testing::class_png(EmotionLabel::sad);
  for (const std::string meta : {R"({"crop": {"x": 0, "y": 0, "w": 0, "h": 5}})",
                                 R"({"crop": {"x": 500, "y": 500, "w": 5, "h": 5}})", "not json",
                                 R"({"source": "satellite"})", R"({"user_label": "joy"})"}) {
    auto r = svc.client().Post("/api/classify", testing::classify_form(png, meta));
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400) << meta;
  }
}

TEST_F(Http, OversizeUploadIs413) {
  ServiceConfig c = config();
  c.max_upload_bytes = 4096;
  testing::RunningService svc(c);
  install_happy(svc);
  const auto big = testing::class_png(EmotionLabel::sad, 400);
  std::vector<std::uint8_t> padded = big;
  padded.resize(200 << 10, 0);  // trailing bytes after IEND
  auto r = svc.client().Post("/api/classify", testing::classify_form(padded, R"({"consent": true})"));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 413);
  auto raw = svc.client().Post("/api/classify?consent=true", std::string(padded.begin(), padded.end()),
                               "image/png");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->status, 413);
  EXPECT_EQ(svc.service().store().stored_image_count(), 0u);
}

TEST_F(Http, DefaultUploadLimitIsTenMiB) {
  EXPECT_EQ(ServiceConfig{}.max_upload_bytes, 10u * 1024 * 1024);
}

// Property: whatever the metadata says, only a literal JSON true stores.
TEST_F(Http, AdversarialConsentNeverStoresWithoutLiteralTrue) {
  testing::RunningService svc(config());
  install_happy(svc);
  const std::vector<std::string> values = {"false", "\"true\"", "1", "0", "\"yes\"", "null",
                                           "[true]", "{\"v\": true}", "\"TRUE\"", "true"};
  std::mt19937 rng(17);
  std::size_t expected_stored = 0;
  std::set<std::string> stored_ids;
  for (int trial = 0; trial < 40; ++trial) {
    const std::string& v = values[rng() % values.size()];
    const bool omit = rng() % 5 == 0;
    std::string meta = omit ? R"({"source": "upload"})" : "{\"consent\": " + v + "}";
    const auto png = encode_png(testing::solid_image(8 + trial, 9, {static_cast<std::uint8_t>(trial), 3, 4}));
    auto r = svc.client().Post("/api/classify", testing::classify_form(png, meta));
    ASSERT_TRUE(r);
    const bool literal_true = !omit && v == "true";
    if (literal_true) {
      ASSERT_EQ(r->status, 200);
      ++expected_stored;
    } else if (r->status == 200) {
      EXPECT_EQ(testing::body_json(r)["stored"], false) << meta;
    } else {
      EXPECT_EQ(r->status, 400) << meta;
    }
  }
  // Raw-body variants of the same idea.
  for (const std::string q : {"consent=TRUE", "consent=1", "consent=yes", "consent=", "consent=false"}) {
    const auto png = testing::class_png(EmotionLabel::neutral);
    auto r = svc.client().Post("/api/classify?" + q, std::string(png.begin(), png.end()), "image/png");
    ASSERT_TRUE(r);
    if (r->status == 200) EXPECT_EQ(testing::body_json(r)["stored"], false) << q;
  }
  const auto events = svc.service().store().events();
  EXPECT_EQ(events.size(), expected_stored);
  for (const auto& e : events) EXPECT_TRUE(e.consent);
  std::ifstream log(dir_ / "store/records.jsonl");
  for (std::string line; std::getline(log, line);)
    EXPECT_EQ(json::parse(line)["consent"], true);
}

TEST_F(Http, ModelUploadActivateAndList) {
  testing::RunningService svc(config());
  auto cli = svc.client();
  const auto sad_bytes = ferw_of(testing::fixed_distribution_model(peaked(EmotionLabel::sad)));
  const auto happy_bytes = ferw_of(testing::fixed_distribution_model(testing::happy_distribution()));
  auto up1 = cli.Post("/api/models?name=sad", std::string(sad_bytes.begin(), sad_bytes.end()),
                      "application/octet-stream");
  ASSERT_TRUE(up1);
  EXPECT_EQ(up1->status, 201) << up1->body;
  const std::string sad_id = testing::body_json(up1)["model_id"];
  auto again = cli.Post("/api/models", std::string(sad_bytes.begin(), sad_bytes.end()),
                        "application/octet-stream");
  EXPECT_EQ(again->status, 200);
  auto up2 = cli.Post("/api/models", httplib::MultipartFormDataItems{
                                         {"model", std::string(happy_bytes.begin(), happy_bytes.end()),
                                          "happy.ferw", "application/octet-stream"}});
  ASSERT_TRUE(up2);
  EXPECT_EQ(up2->status, 201);
  const json happy_entry = testing::body_json(up2);
  EXPECT_EQ(happy_entry["name"], "happy.ferw");
  EXPECT_EQ(happy_entry["active"], false);
  const std::string happy_id = happy_entry["model_id"];

  auto list = testing::body_json(cli.Get("/api/models"));
  EXPECT_EQ(list["models"].size(), 2u);
  EXPECT_EQ(list["active_model_id"], sad_id);

  const auto png = testing::class_png(EmotionLabel::sad);
  EXPECT_EQ(testing::body_json(cli.Post("/api/classify", testing::classify_form(png)))["model_id"], sad_id);
  auto act = cli.Post("/api/models/" + happy_id + "/activate");
  ASSERT_TRUE(act);
  EXPECT_EQ(act->status, 200);
  const json after = testing::body_json(cli.Post("/api/classify", testing::classify_form(png)));
  EXPECT_EQ(after["model_id"], happy_id);
  EXPECT_EQ(after["top"][0]["label"], "happy");

  auto missing = cli.Post("/api/models/" + std::string(64, '0') + "/activate");
  EXPECT_EQ(missing->status, 404);
  auto bad = cli.Post("/api/models", std::string(64, 'g'), "application/octet-stream");
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(testing::body_json(bad)["error"], "bad_magic");
}

// Every response must come wholly from the model it names: the sad model never
// yields a happy top-1 and vice versa.
TEST_F(Http, ConcurrentClassifyAndActivateAreConsistent) {
  testing::RunningService svc(config());
  auto& reg = svc.service().registry();
  const std::string sad = reg.install(ferw_of(testing::fixed_distribution_model(peaked(EmotionLabel::sad))), "s").model_id;
  const std::string happy = reg.install(ferw_of(testing::fixed_distribution_model(peaked(EmotionLabel::happy))), "h").model_id;
  std::atomic<bool> done{false};
  std::atomic<int> bad{0}, seen_sad{0}, seen_happy{0};
  const auto png = testing::class_png(EmotionLabel::neutral, 24);
  std::vector<std::thread> workers;
  for (int t = 0; t < 4; ++t)
    workers.emplace_back([&] {
      auto cli = svc.client();
      for (int i = 0; i < 15; ++i) {
        auto r = cli.Post("/api/classify", testing::classify_form(png));
        if (!r || r->status != 200) {
          ++bad;
          continue;
        }
        const json j = testing::body_json(r);
        const std::string id = j["model_id"], top = j["top"][0]["label"];
        if (id == sad && top == "sad")
          ++seen_sad;
        else if (id == happy && top == "happy")
          ++seen_happy;
        else
          ++bad;
      }
    });
  std::thread swapper([&] {
    auto cli = svc.client();
    for (int i = 0; !done.load(); ++i) {
      cli.Post("/api/models/" + (i % 2 ? sad : happy) + "/activate");
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  });
  for (auto& w : workers) w.join();
  done = true;
  swapper.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(seen_sad + seen_happy, 60);
}

TEST_F(Http, ExportEndpointStreamsTar) {
  testing::RunningService svc(config());
  install_happy(svc);
  const auto png = testing::class_png(EmotionLabel::sad);
  svc.client().Post("/api/classify", testing::classify_form(png, R"({"consent": true, "user_label": "sad"})"));
  auto r = svc.client().Get("/api/dataset/export?labeled_only=true");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Content-Type"), "application/x-tar");
  const auto entries = read_tar(std::vector<std::uint8_t>(r->body.begin(), r->body.end()));
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[1].name, "sad/" + sha256_hex(png) + ".png");
  auto bad = svc.client().Get("/api/dataset/export?labeled_only=maybe");
  EXPECT_EQ(bad->status, 400);
}

TEST_F(Http, CorsPreflight) {
  ServiceConfig c = config();
  c.allowed_origin = "http://localhost:5173";
  testing::RunningService svc(c);
  auto r = svc.client().Options("/api/classify");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 204);
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  EXPECT_NE(r->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(Http, HealthIs503WhenStoreRemoved) {
  testing::RunningService svc(config());
  fs::remove_all(dir_ / "store");
  auto r = svc.client().Get("/api/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 503);
  EXPECT_EQ(testing::body_json(r)["status"], "unavailable");
}

TEST_F(Http, UnknownEndpointIsJson404) {
  testing::RunningService svc(config());
  auto r = svc.client().Get("/api/nope");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(testing::body_json(r)["error"], "not_found");
}

}  // namespace
}  // namespace fer
