#include "model/ferw.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <optional>

#include "json.hpp"

#include "common/error.hpp"
#include "common/fs.hpp"
#include "model/labels.hpp"

static_assert(std::endian::native == std::endian::little,
              "FERW encoding assumes a little-endian host");

namespace fer {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint8_t kMagic[4] = {'F', 'E', 'R', 'W'};

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  template <typename U>
  void put(U v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(U));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::size_t end)
      : data_(data), end_(end) {}

  bool has(std::size_t n) const { return pos_ <= end_ && end_ - pos_ >= n; }
  std::size_t pos() const { return pos_; }

  template <typename U>
  std::optional<U> get() {
    if (!has(sizeof(U))) return std::nullopt;
    U v;
    std::memcpy(&v, data_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::optional<std::span<const std::uint8_t>> take(std::size_t n) {
    if (!has(n)) return std::nullopt;
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

json layer_json(const Model& model, std::size_t i) {
  const LayerSpec& l = model.spec().layers[i];
  json j;
  j["name"] = l.name;
  j["kind"] = std::string(layer_kind_name(l.kind));
  switch (l.kind) {
    case LayerKind::conv2d:
      j["kernel"] = l.kernel;
      j["filters"] = l.filters;
      break;
    case LayerKind::dense:
      j["units"] = l.units;
      break;
    case LayerKind::batch_norm:
      j["momentum"] = l.momentum;
      j["epsilon"] = l.epsilon;
      break;
    default:
      break;
  }
  json tensors = json::array();
  for (const ParamSlot& s : model.slots()) {
    if (s.layer != i) continue;
    tensors.push_back({{"name", s.name},
                       {"shape", std::vector<std::size_t>(s.shape.extents().begin(),
                                                          s.shape.extents().end())}});
  }
  j["tensors"] = std::move(tensors);
  return j;
}

struct ParsedManifest {
  ModelSpec spec;
  std::vector<std::pair<std::string, Shape>> declared;
};

ParsedManifest parse_manifest(std::string_view text) {
  json m;
  try {
    m = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("FERW manifest is not valid JSON: ") + e.what());
  }
  ParsedManifest out;
  try {
    const auto& labels = m.at("labels");
    if (!labels.is_array() || labels.size() != kNumEmotions)
      fail(ErrorCode::format, "FERW manifest label table must list 8 labels");
    for (std::size_t i = 0; i < kNumEmotions; ++i)
      if (labels[i].get<std::string>() != kEmotionNames[i])
        fail(ErrorCode::format,
             "FERW label table entry " + std::to_string(i) + " is '" +
                 labels[i].get<std::string>() + "', expected '" +
                 std::string(kEmotionNames[i]) + "'");
    out.spec.input = m.at("input").get<std::vector<std::size_t>>();
    for (const auto& lj : m.at("layers")) {
      LayerSpec l;
      l.name = lj.at("name").get<std::string>();
      l.kind = parse_layer_kind(lj.at("kind").get<std::string>());
      l.kernel = lj.value("kernel", std::size_t{0});
      l.filters = lj.value("filters", std::size_t{0});
      l.units = lj.value("units", std::size_t{0});
      l.momentum = lj.value("momentum", 0.9);
      l.epsilon = lj.value("epsilon", 1e-5);
      for (const auto& tj : lj.value("tensors", json::array())) {
        auto extents = tj.at("shape").get<std::vector<std::size_t>>();
        out.declared.emplace_back(tj.at("name").get<std::string>(),
                                  Shape(std::move(extents)));
      }
      out.spec.layers.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("FERW manifest is malformed: ") + e.what());
  }
  return out;
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t done = 0;
  while (done < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - done, 1u << 30);
    crc = crc32(crc, bytes.data() + done, static_cast<uInt>(n));
    done += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string ferw_manifest(const Model& model) {
  json m;
  m["format"] = "FERW";
  m["version"] = kFerwVersion;
  m["input"] = model.spec().input;
  json labels = json::array();
  for (auto name : kEmotionNames) labels.push_back(std::string(name));
  m["labels"] = std::move(labels);
  json layers = json::array();
  for (std::size_t i = 0; i < model.spec().layers.size(); ++i)
    layers.push_back(layer_json(model, i));
  m["layers"] = std::move(layers);
  return m.dump();
}

std::vector<std::uint8_t> write_ferw_container(
    std::string_view manifest, std::span<const TensorRecord> records) {
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.bytes(kMagic, 4);
  w.put<std::uint32_t>(kFerwVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(manifest.size()));
  w.bytes(manifest.data(), manifest.size());
  for (const TensorRecord& r : records) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(r.name.size()));
    w.bytes(r.name.data(), r.name.size());
    w.put<std::uint8_t>(kFerwDtypeF32);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(r.value.rank()));
    for (std::size_t e : r.value.shape().extents())
      w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
    w.bytes(r.value.data().data(), r.value.size() * sizeof(float));
  }
  w.put<std::uint32_t>(crc32_of(out));
  return out;
}

std::vector<std::uint8_t> encode_ferw(const Model& model) {
  std::vector<TensorRecord> records;
  records.reserve(model.slots().size());
  for (std::size_t i = 0; i < model.slots().size(); ++i)
    records.push_back({model.slots()[i].name, model.tensor(i)});
  return write_ferw_container(ferw_manifest(model), records);
}

Model decode_ferw(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12)
    fail(ErrorCode::truncated, "FERW stream is " + std::to_string(bytes.size()) +
                                   " bytes, shorter than the 12-byte header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorCode::bad_magic, "stream does not start with FERW magic");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kFerwVersion)
    fail(ErrorCode::unsupported_version,
         "FERW version " + std::to_string(version) + " is not supported (expected " +
             std::to_string(kFerwVersion) + ")");

  // Structural pass over the framing. Running out of bytes is reported as
  // truncation; anything else waits for the checksum verdict first.
  const std::size_t body_end = bytes.size() >= 4 ? bytes.size() - 4 : 0;
  ByteReader r(bytes, body_end);
  r.take(8);
  std::optional<Error> structural;
  std::string manifest_text;
  std::vector<TensorRecord> records;
  auto truncated = [&](const std::string& where) {
    fail(ErrorCode::truncated, "FERW stream ends inside " + where);
  };

  const auto manifest_len = r.get<std::uint32_t>();
  if (!manifest_len) truncated("the header");
  const auto manifest = r.take(*manifest_len);
  if (!manifest) truncated("the manifest");
  manifest_text.assign(manifest->begin(), manifest->end());

  while (r.has(1)) {
    const std::string where = "tensor record " + std::to_string(records.size());
    const auto name_len = r.get<std::uint16_t>();
    if (!name_len) truncated(where);
    const auto name = r.take(*name_len);
    if (!name) truncated(where);
    TensorRecord rec;
    rec.name.assign(name->begin(), name->end());
    const auto dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint8_t>();
    if (!dtype || !rank) truncated("tensor record '" + rec.name + "'");
    std::vector<std::size_t> extents;
    for (std::uint8_t a = 0; a < *rank; ++a) {
      const auto e = r.get<std::uint32_t>();
      if (!e) truncated("tensor record '" + rec.name + "'");
      extents.push_back(*e);
    }
    if (*dtype != kFerwDtypeF32) {
      structural = Error(ErrorCode::format, "tensor '" + rec.name +
                                                "' has unsupported dtype code " +
                                                std::to_string(*dtype));
      break;
    }
    std::size_t count = 1;
    bool sane = *rank >= 1 && *rank <= Shape::kMaxRank;
    for (std::size_t e : extents) {
      sane = sane && e > 0 && count <= body_end / e;
      if (sane) count *= e;
    }
    if (!sane) {
      structural = Error(ErrorCode::format,
                         "tensor '" + rec.name + "' has an invalid rank or extent");
      break;
    }
    const auto values = r.take(count * sizeof(float));
    if (!values) truncated("the values of tensor '" + rec.name + "'");
    std::vector<float> data(count);
    std::memcpy(data.data(), values->data(), values->size());
    rec.value = Tensor(Shape(std::move(extents)), std::move(data));
    records.push_back(std::move(rec));
  }
  if (bytes.size() < 16) truncated("the checksum");

  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body_end, 4);
  const std::uint32_t actual = crc32_of(bytes.first(body_end));
  if (stored != actual)
    fail(ErrorCode::checksum_mismatch,
         "FERW checksum mismatch: stored " + std::to_string(stored) +
             ", computed " + std::to_string(actual));
  if (structural) throw *structural;

  ParsedManifest parsed = parse_manifest(manifest_text);
  const ModelLayout layout = analyze(parsed.spec);

  // Manifest must declare exactly the tensors its layers imply.
  if (parsed.declared.size() != layout.slots.size())
    fail(ErrorCode::shape_mismatch,
         "FERW manifest declares " + std::to_string(parsed.declared.size()) +
             " tensors, its layers need " + std::to_string(layout.slots.size()));
  for (std::size_t i = 0; i < layout.slots.size(); ++i) {
    const auto& [name, shape] = parsed.declared[i];
    if (name != layout.slots[i].name)
      fail(ErrorCode::format, "FERW manifest tensor " + std::to_string(i) +
                                  " is '" + name + "', expected '" +
                                  layout.slots[i].name + "'");
    if (shape != layout.slots[i].shape)
      fail(ErrorCode::shape_mismatch,
           "tensor '" + name + "' is declared " + shape.str() + " but layer " +
               "hyperparameters require " + layout.slots[i].shape.str());
  }
  if (records.size() != layout.slots.size())
    fail(ErrorCode::format, "FERW stream holds " + std::to_string(records.size()) +
                                " tensor records, manifest declares " +
                                std::to_string(layout.slots.size()));
  std::vector<Tensor> tensors;
  tensors.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].name != layout.slots[i].name)
      fail(ErrorCode::format, "tensor record " + std::to_string(i) + " is '" +
                                  records[i].name + "', manifest order expects '" +
                                  layout.slots[i].name + "'");
    if (records[i].value.shape() != layout.slots[i].shape)
      fail(ErrorCode::shape_mismatch,
           "tensor '" + records[i].name + "' has shape " +
               records[i].value.shape().str() + " but the manifest declares " +
               layout.slots[i].shape.str());
    tensors.push_back(std::move(records[i].value));
  }
  return Model(std::move(parsed.spec), std::move(tensors));
}

void save_weights(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_ferw(model));
}

Model load_weights(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_ferw(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace fer
