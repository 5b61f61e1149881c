#include "partprobe/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "partprobe/error.hpp"
#include "partprobe/simd.hpp"

namespace partprobe {

void ConceptModel::validate() const {
  if (channels == 0 || kh % 2 == 0 || kw % 2 == 0) {
    fail(ErrorKind::shape, "concept model needs channels > 0 and odd kernel extents");
  }
  if (kernel.size() != channels * kh * kw) {
    fail(ErrorKind::shape, "kernel holds " + std::to_string(kernel.size()) + " values, expected " +
                               std::to_string(channels * kh * kw));
  }
}

namespace {

pipeline::ActivationView<float> view_of(const Tensor& act) {
  if (act.rank() != 3) fail(ErrorKind::shape, "activation must be C x H x W");
  return {act.data(), act.extent(0), act.extent(1), act.extent(2)};
}

}  // namespace

Plane<float> logits(const ConceptModel& m, const Tensor& act) {
  m.validate();
  const auto view = view_of(act);
  Plane<float> out(view.height, view.width);
  pipeline::correlate_same<float>(view, m.kernel, m.shape(), m.bias, out.data);
  return out;
}

ProbabilityMap forward(const ConceptModel& m, const Tensor& act, std::size_t out_h,
                       std::size_t out_w) {
  const Plane<float> z = logits(m, act);
  ProbabilityMap prob = bilinear_upscale(z, out_h, out_w);
  simd::sigmoid(std::span<float>(prob.data), std::span<const float>(prob.data));
  return prob;
}

Plane<float> bilinear_upscale(const Plane<float>& map, std::size_t out_h, std::size_t out_w) {
  Plane<float> out(out_h, out_w);
  pipeline::bilinear_upscale<float>(map.data, map.height, map.width, out_h, out_w, out.data);
  return out;
}

BinaryMask binarize(const ProbabilityMap& prob) {
  BinaryMask mask(prob.height, prob.width, 0);
  for (std::size_t i = 0; i < prob.data.size(); ++i) mask.data[i] = prob.data[i] > 0.5f ? 1 : 0;
  return mask;
}

ConceptModel mean_model(std::span<const ConceptModel> models) {
  if (models.empty()) fail(ErrorKind::degenerate, "mean of zero models");
  ConceptModel mean = models.front();
  mean.validate();
  std::vector<double> kernel(mean.kernel.size(), 0.0);
  double bias = 0;
  for (const ConceptModel& m : models) {
    m.validate();
    if (m.shape().channels != mean.channels || m.kh != mean.kh || m.kw != mean.kw) {
      fail(ErrorKind::shape, "mean_model needs identically shaped kernels");
    }
    double norm_sq = 0;
    for (float v : m.kernel) norm_sq += double(v) * double(v);
    const double norm = std::sqrt(norm_sq);
    if (norm == 0) fail(ErrorKind::degenerate, "cannot normalize a zero kernel");
    for (std::size_t i = 0; i < kernel.size(); ++i) kernel[i] += m.kernel[i] / norm;
    bias += m.bias / norm;
  }
  const double n = static_cast<double>(models.size());
  for (std::size_t i = 0; i < kernel.size(); ++i) mean.kernel[i] = static_cast<float>(kernel[i] / n);
  mean.bias = static_cast<float>(bias / n);
  return mean;
}

std::size_t odd_ceiling(double value) {
  // Absorb representation noise so exact integers are not bumped upward.
  const double up = std::ceil(value - 1e-9 * std::max(1.0, std::abs(value)));
  auto n = up < 1 ? std::size_t{1} : static_cast<std::size_t>(up);
  if (n % 2 == 0) ++n;
  return n;
}

std::pair<std::size_t, std::size_t> adaptive_kernel(double mean_person_px, Concept part,
                                                    double stride) {
  if (!(stride >= 1)) fail(ErrorKind::domain, "layer stride must be >= 1");
  if (!(mean_person_px > 0)) fail(ErrorKind::domain, "mean person size must be positive");
  // Height x width relative to the person size.
  double rel_h = 0, rel_w = 0;
  switch (part) {
    case Concept::leg: rel_h = 0.3; rel_w = 0.1; break;
    case Concept::arm: rel_h = 0.2; rel_w = 0.15; break;
    case Concept::foot:
    case Concept::hand: rel_h = 0.1; rel_w = 0.1; break;
    case Concept::eye: rel_h = 0.04; rel_w = 0.04; break;
  }
  const double cells = mean_person_px / stride;
  return {odd_ceiling(rel_h * cells), odd_ceiling(rel_w * cells)};
}

std::filesystem::path save_model(const std::filesystem::path& directory, const std::string& name,
                                 const ConceptModel& model) {
  model.validate();
  std::filesystem::create_directories(directory);
  const auto weights = name + ".wts";
  {
    std::ofstream out(directory / weights, std::ios::binary | std::ios::trunc);
    for (float v : model.kernel) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                             static_cast<char>((bits >> 16) & 0xff),
                             static_cast<char>((bits >> 24) & 0xff)};
      out.write(bytes, 4);
    }
    if (!out) fail(ErrorKind::io, "failed writing " + (directory / weights).string());
  }
  const nlohmann::json doc{{"concept", model.concept_name}, {"layer", model.layer},
                           {"channels", model.channels},    {"kh", model.kh},
                           {"kw", model.kw},                {"bias", model.bias},
                           {"weights", weights}};
  const auto sidecar = directory / (name + ".json");
  std::ofstream out(sidecar, std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorKind::io, "failed writing " + sidecar.string());
  return sidecar;
}

ConceptModel load_model(const std::filesystem::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) fail(ErrorKind::io, "cannot open model " + sidecar.string());
  ConceptModel m;
  std::string weights;
  try {
    nlohmann::json doc;
    in >> doc;
    m.concept_name = doc.at("concept").get<std::string>();
    m.layer = doc.at("layer").get<std::string>();
    m.channels = doc.at("channels").get<std::size_t>();
    m.kh = doc.at("kh").get<std::size_t>();
    m.kw = doc.at("kw").get<std::size_t>();
    m.bias = doc.at("bias").get<float>();
    weights = doc.contains("weights") ? doc["weights"].get<std::string>()
                                      : sidecar.stem().string() + ".wts";
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, sidecar.string() + ": " + e.what());
  }
  std::ifstream win(sidecar.parent_path() / weights, std::ios::binary);
  if (!win) fail(ErrorKind::io, "cannot open weights " + weights);
  const std::vector<unsigned char> bytes(std::istreambuf_iterator<char>(win), {});
  if (bytes.size() != 4 * m.channels * m.kh * m.kw) {
    fail(ErrorKind::format, "weights file " + weights + " has the wrong length");
  }
  m.kernel.resize(bytes.size() / 4);
  for (std::size_t i = 0; i < m.kernel.size(); ++i) {
    const std::uint32_t bits = std::uint32_t{bytes[4 * i]} | std::uint32_t{bytes[4 * i + 1]} << 8 |
                               std::uint32_t{bytes[4 * i + 2]} << 16 |
                               std::uint32_t{bytes[4 * i + 3]} << 24;
    m.kernel[i] = std::bit_cast<float>(bits);
  }
  m.validate();
  return m;
}

}  // namespace partprobe
