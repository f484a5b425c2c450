#include "data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "preprocess/image.hpp"

namespace fer {

namespace fs = std::filesystem;

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

// Empty string when the header looks like an image.
std::string header_problem(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "unreadable";
  std::uint8_t head[8] = {};
  in.read(reinterpret_cast<char*>(head), sizeof head);
  if (sniff_format({head, static_cast<std::size_t>(in.gcount())}) == ImageFormat::unknown)
    return "not a JPEG or PNG file";
  return {};
}

}  // namespace

LabeledDataset load_labeled_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec))
    fail(ErrorCode::io, "dataset root '" + root.string() + "' is not a directory");
  LabeledDataset out;
  out.root = root;
  for (std::size_t li = 0; li < kNumEmotions; ++li) {
    const auto label = static_cast<EmotionLabel>(li);
    const fs::path dir = root / std::string(label_name(label));
    if (!fs::is_directory(dir, ec)) continue;
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(
             dir, fs::directory_options::skip_permission_denied, ec);
         !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
      if (it->is_regular_file(ec) && has_image_extension(it->path()))
        files.push_back(it->path());
    }
    if (ec)
      fail(ErrorCode::io, "cannot list '" + dir.string() + "': " + ec.message());
    std::sort(files.begin(), files.end());
    for (auto& f : files) {
      if (std::string why = header_problem(f); !why.empty()) {
        out.warnings.push_back(f.string() + ": " + why);
        continue;
      }
      out.samples.push_back({std::move(f), label});
      ++out.counts[li];
    }
  }
  if (out.samples.empty())
    fail(ErrorCode::invalid_argument,
         "dataset root '" + root.string() + "' contains no readable images");
  return out;
}

Tensor DatasetSource::load(std::size_t i) const {
  const auto& s = data_.samples.at(i);
  try {
    return preprocess(read_file(s.path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::decode)
      throw Error(e.code(), s.path.string() + ": " + e.what());
    throw;
  }
}

std::string DatasetSource::describe(std::size_t i) const {
  return data_.samples.at(i).path.string();
}

TensorSource::TensorSource(std::vector<Tensor> samples, std::vector<EmotionLabel> labels)
    : samples_(std::move(samples)), labels_(std::move(labels)) {
  if (samples_.size() != labels_.size())
    fail(ErrorCode::invalid_argument, "TensorSource: " + std::to_string(samples_.size()) +
                                          " samples but " +
                                          std::to_string(labels_.size()) + " labels");
}

void TensorSource::add(Tensor sample, EmotionLabel label) {
  samples_.push_back(std::move(sample));
  labels_.push_back(label);
}

std::string TensorSource::describe(std::size_t i) const {
  return "sample " + std::to_string(i);
}

Tensor stack_samples(const std::vector<Tensor>& samples) {
  if (samples.empty()) fail(ErrorCode::invalid_argument, "stack_samples: no samples");
  const Shape& s = samples.front().shape();
  if (s.rank() >= Shape::kMaxRank)
    fail(ErrorCode::shape_mismatch, "stack_samples: sample rank too high " + s.str());
  std::vector<std::size_t> dims{samples.size()};
  dims.insert(dims.end(), s.extents().begin(), s.extents().end());
  Tensor out{Shape(dims)};
  float* dst = out.data().data();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].shape() != s)
      fail(ErrorCode::shape_mismatch, "stack_samples: sample " + std::to_string(i) +
                                          " has shape " + samples[i].shape().str() +
                                          ", expected " + s.str());
    std::memcpy(dst + i * s.size(), samples[i].data().data(), s.size() * sizeof(float));
  }
  return out;
}

}  // namespace fer
