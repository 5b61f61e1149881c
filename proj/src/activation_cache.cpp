#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "partprobe/error.hpp"
#include "partprobe/simd.hpp"
#include "partprobe/tensor.hpp"

namespace partprobe {
namespace {

using nlohmann::json;

void check_id(const std::string& id) {
  if (id.empty() || id.find('/') != std::string::npos || id.find('\\') != std::string::npos ||
      id == "." || id == "..") {
    fail(ErrorKind::format, "invalid sample id '" + id + "'");
  }
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::uint8_t> encode_f32(std::span<const float> values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return bytes;
}

std::vector<float> decode_f32(std::span<const std::uint8_t> bytes) {
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t{bytes[4 * i + b]} << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

CacheManifest parse_manifest(const json& doc) {
  CacheManifest m;
  try {
    m.layer = doc.at("layer").get<std::string>();
    m.channels = doc.at("channels").get<std::size_t>();
    m.height = doc.at("height").get<std::size_t>();
    m.width = doc.at("width").get<std::size_t>();
    m.dtype = parse_dtype(doc.at("dtype").get<std::string>());
    m.samples = doc.at("samples").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("bad cache manifest: ") + e.what());
  }
  if (m.channels == 0 || m.height == 0 || m.width == 0) {
    fail(ErrorKind::format, "cache manifest has a zero extent");
  }
  for (const auto& id : m.samples) check_id(id);
  return m;
}

}  // namespace

std::filesystem::path payload_path(const std::filesystem::path& directory,
                                   const std::string& id) {
  check_id(id);
  return directory / (id + ".act");
}

ActivationCache ActivationCache::open(const std::filesystem::path& directory) {
  const auto manifest_file = directory / "manifest.json";
  std::ifstream in(manifest_file);
  if (!in) fail(ErrorKind::io, "no cache manifest at " + manifest_file.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, manifest_file.string() + ": " + e.what());
  }
  ActivationCache cache;
  cache.directory_ = directory;
  cache.manifest_ = parse_manifest(doc);
  cache.sorted_ids_ = cache.manifest_.samples;
  std::sort(cache.sorted_ids_.begin(), cache.sorted_ids_.end());
  if (std::adjacent_find(cache.sorted_ids_.begin(), cache.sorted_ids_.end()) !=
      cache.sorted_ids_.end()) {
    fail(ErrorKind::format, "cache manifest lists a sample id twice");
  }
  return cache;
}

bool ActivationCache::contains(const std::string& id) const {
  return std::binary_search(sorted_ids_.begin(), sorted_ids_.end(), id);
}

Tensor ActivationCache::read_sample(const std::string& id) const {
  if (!contains(id)) {
    fail(ErrorKind::missing_sample, "sample '" + id + "' is not in cache " + directory_.string());
  }
  const auto path = payload_path(directory_, id);
  if (!std::filesystem::exists(path)) {
    fail(ErrorKind::corrupt_cache, "payload file missing for sample '" + id + "'");
  }
  const auto bytes = read_all(path);
  const std::size_t expected = manifest_.elements_per_sample() * bytes_per_element(manifest_.dtype);
  if (bytes.size() != expected) {
    fail(ErrorKind::corrupt_cache, "payload for '" + id + "' has " + std::to_string(bytes.size()) +
                                       " bytes, expected " + std::to_string(expected));
  }
  auto values = manifest_.dtype == DType::bf16 ? decode_bf16(bytes) : decode_f32(bytes);
  return Tensor({manifest_.channels, manifest_.height, manifest_.width}, std::move(values));
}

ActivationCacheWriter::ActivationCacheWriter(std::filesystem::path directory, std::string layer,
                                             std::size_t channels, std::size_t height,
                                             std::size_t width, DType dtype)
    : directory_(std::move(directory)) {
  manifest_.layer = std::move(layer);
  manifest_.channels = channels;
  manifest_.height = height;
  manifest_.width = width;
  manifest_.dtype = dtype;
  std::filesystem::create_directories(directory_);
}

void ActivationCacheWriter::write_sample(const std::string& id, const Tensor& activation) {
  const std::vector<std::size_t> expected{manifest_.channels, manifest_.height, manifest_.width};
  if (activation.shape() != expected) {
    fail(ErrorKind::shape, "sample '" + id + "' does not match the cache shape");
  }
  if (std::find(manifest_.samples.begin(), manifest_.samples.end(), id) != manifest_.samples.end()) {
    fail(ErrorKind::usage, "sample '" + id + "' written twice");
  }
  const auto bytes = manifest_.dtype == DType::bf16 ? encode_bf16(activation.data())
                                                    : encode_f32(activation.data());
  std::ofstream out(payload_path(directory_, id), std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "failed writing payload for '" + id + "'");
  manifest_.samples.push_back(id);
}

void ActivationCacheWriter::finish() {
  json doc{{"layer", manifest_.layer},       {"channels", manifest_.channels},
           {"height", manifest_.height},     {"width", manifest_.width},
           {"dtype", to_string(manifest_.dtype)}, {"samples", manifest_.samples}};
  std::ofstream out(directory_ / "manifest.json", std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorKind::io, "failed writing cache manifest");
}

}  // namespace partprobe
