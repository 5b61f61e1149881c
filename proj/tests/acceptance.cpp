// Acceptance checks, one line per criterion:
//   acceptance            run everything
//   acceptance <name>...  run the named checks only
// Exit status is nonzero when any selected check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixture.hpp"
#include "oracles.hpp"
#include "partprobe/cli.hpp"
#include "partprobe/error.hpp"
#include "partprobe/losses.hpp"
#include "partprobe/metrics.hpp"
#include "partprobe/model.hpp"
#include "partprobe/skeleton.hpp"
#include "partprobe/train.hpp"

using namespace partprobe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  SeededRng rng(1001);
  double worst = 0;
  int instance = 0;
  for (std::size_t c : {3u, 8u})
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{4, 5}, {7, 6}})
      for (std::size_t k : {1u, 3u})
        for (LossKind loss : {LossKind::dice, LossKind::bce_batch_weighted}) {
          ++instance;
          std::vector<Tensor> acts;
          std::vector<BinaryMask> masks;
          for (int b = 0; b < 2; ++b) {
            std::vector<float> v(c * h * w);
            for (auto& x : v) x = static_cast<float>(rng.normal());
            acts.emplace_back(std::vector<std::size_t>{c, h, w}, v);
            BinaryMask m(3 * h, 3 * w);
            for (auto& x : m.data) x = rng.uniform() < 0.35;
            m.data[0] = 1;
            m.data[1] = 0;
            masks.push_back(m);
          }
          std::vector<BatchItem> batch{{&acts[0], &masks[0]}, {&acts[1], &masks[1]}};
          TrainConfig cfg;
          cfg.loss = loss;
          const pipeline::KernelShape shape{c, k, k};
          std::vector<double> kernel(shape.size());
          for (auto& x : kernel) x = 0.4 * rng.normal();
          const double bias = 0.2 * rng.normal();
          const auto g = loss_and_grads_f64(shape, kernel, bias, batch, cfg);
          const double step = 1e-3;
          for (std::size_t i = 0; i <= kernel.size(); ++i) {
            auto kp = kernel, km = kernel;
            double bp = bias, bm = bias;
            if (i < kernel.size()) {
              kp[i] += step;
              km[i] -= step;
            } else {
              bp += step;
              bm -= step;
            }
            const double fd = (loss_and_grads_f64(shape, kp, bp, batch, cfg).loss -
                               loss_and_grads_f64(shape, km, bm, batch, cfg).loss) /
                              (2 * step);
            const double an = i < kernel.size() ? g.dkernel[i] : g.dbias;
            const double denom = std::max({std::fabs(an), std::fabs(fd), 1e-8});
            worst = std::max(worst, std::fabs(an - fd) / denom);
          }
        }
  // the grid above has 16 settings, top up with fresh draws
  while (instance < 20) {
    ++instance;
    const std::size_t c = 3, h = 7, w = 6, k = 3;
    std::vector<float> v(c * h * w);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    const Tensor act({c, h, w}, v);
    BinaryMask m(2 * h, 2 * w);
    for (auto& x : m.data) x = rng.uniform() < 0.5;
    m.data[0] = 1;
    m.data[1] = 0;
    const BatchItem item{&act, &m};
    TrainConfig cfg;
    cfg.loss = instance % 2 ? LossKind::dice : LossKind::bce_batch_weighted;
    const pipeline::KernelShape shape{c, k, k};
    std::vector<double> kernel(shape.size());
    for (auto& x : kernel) x = 0.4 * rng.normal();
    const auto g = loss_and_grads_f64(shape, kernel, 0.0, std::span(&item, 1), cfg);
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      auto kp = kernel, km = kernel;
      kp[i] += 1e-3;
      km[i] -= 1e-3;
      const double fd = (loss_and_grads_f64(shape, kp, 0.0, std::span(&item, 1), cfg).loss -
                         loss_and_grads_f64(shape, km, 0.0, std::span(&item, 1), cfg).loss) /
                        2e-3;
      worst = std::max(worst, std::fabs(g.dkernel[i] - fd) /
                                  std::max({std::fabs(g.dkernel[i]), std::fabs(fd), 1e-8}));
    }
  }
  const double secs = seconds_since(t0);
  out.detail = "20 instances, max relative error " + fmt("%.3g", worst) + ", " + fmt("%.2f s", secs);
  out.require(worst < 1e-4, "relative error above 1e-4");
  out.require(secs < 10, "slower than 10 s");
  return out;
}

Outcome set_iou_check() {
  Outcome out;
  SeededRng rng(1002);
  int exact = 0;
  for (int t = 0; t < 50; ++t) {
    BinaryMask g(16, 16);
    ProbabilityMap p(16, 16);
    for (auto& v : g.data) v = rng.uniform() < 0.4;
    for (auto& v : p.data) v = static_cast<float>(rng.uniform());
    const auto want = oracle::iou_count(g.data, p.data);
    const auto got = iou_counts(g, p);
    const std::vector<BinaryMask> gs{g};
    const std::vector<ProbabilityMap> ps{p};
    const double ratio = want.uni ? double(want.inter) / double(want.uni) : 0.0;
    if (static_cast<long long>(got.intersection) == want.inter &&
        static_cast<long long>(got.union_area) == want.uni && set_iou(gs, ps) == ratio) {
      ++exact;
    }
  }
  out.require(exact == 50, "count mismatch");

  // batch 1 hits 1 of a 5 pixel union (0.2), batch 2 hits 4 of 10 (0.4)
  fixture::TempDir dir("accept_iou");
  Dataset data;
  {
    ActivationCacheWriter w(dir / "cache", "toy", 1, 1, 10, DType::f32);
    std::vector<float> a0(10, -9.0f), a1(10, -9.0f);
    a0[0] = 9.0f;
    std::fill(a1.begin(), a1.begin() + 4, 9.0f);
    const std::vector<std::vector<float>> act{a0, a1};
    BinaryMask g0(1, 10), g1(1, 10, 1);
    std::fill(g0.data.begin(), g0.data.begin() + 5, 1);
    const std::vector<BinaryMask> gt{g0, g1};
    for (int i = 0; i < 2; ++i) {
      const std::string id = "b" + std::to_string(i);
      w.write_sample(id, Tensor({1, 1, 10}, act[i]));
      data.push_back({id, std::make_shared<const BinaryMask>(gt[i]), {}});
    }
    w.finish();
  }
  const auto cache = ActivationCache::open(dir / "cache");
  ConceptModel identity;
  identity.channels = 1;
  identity.kernel = {1.0f};
  const EvalReport r = evaluate(identity, data, cache, 1);
  std::vector<float> all_pred;
  std::vector<std::uint8_t> all_gt;
  for (int i = 0; i < 2; ++i) {
    const auto prob = forward(identity, cache.read_sample(data[i].id), 1, 10);
    all_pred.insert(all_pred.end(), prob.data.begin(), prob.data.end());
    all_gt.insert(all_gt.end(), data[i].mask->data.begin(), data[i].mask->data.end());
  }
  const auto c = oracle::iou_count(all_gt, all_pred);
  const double oracle_pooled = double(c.inter) / double(c.uni);
  out.require(std::fabs(r.mean - 0.3) < 1e-12, "batch mean is " + fmt("%.6g", r.mean));
  out.require(r.batch_iou.size() == 2 && std::fabs(r.batch_iou[0] - 0.2) < 1e-12 &&
                  std::fabs(r.batch_iou[1] - 0.4) < 1e-12,
              "per-batch values differ");
  out.require(std::fabs(r.pooled - oracle_pooled) < 1e-12, "pooled is " + fmt("%.6g", r.pooled));
  out.require(std::fabs(r.pooled - r.mean) > 1e-3, "pooled equals the batch mean");
  out.detail = std::to_string(exact) + "/50 exact; batches 0.2, 0.4 -> mean " + fmt("%.6g", r.mean) +
               ", pooled " + fmt("%.6g", r.pooled) + " (oracle " + fmt("%.6g", oracle_pooled) + ")" + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

Outcome dice_check() {
  Outcome out;
  SeededRng rng(1003);
  double worst_equal = 0;
  double lo = 1, hi = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(64);
    std::vector<double> p(n), bin(n);
    std::vector<std::uint8_t> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = rng.uniform() < 0.5;
      bin[i] = g[i];
      p[i] = rng.uniform();
    }
    worst_equal = std::max(worst_equal, dice_loss<double>(bin, g).loss);
    const double v = dice_loss<double>(p, g).loss;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const std::vector<double> zeros(16, 0.0);
  const std::vector<std::uint8_t> none(16, 0);
  const double smooth = dice_loss<double>(zeros, none).loss;
  out.require(worst_equal <= 1e-5, "loss(pred=gt) too large");
  out.require(lo >= 0 && hi <= 1, "loss left [0,1]");
  out.require(smooth == 0.0, "empty case not 0");
  out.detail = "max loss(pred=gt) " + fmt("%.3g", worst_equal) + ", range [" + fmt("%.4g", lo) +
               ", " + fmt("%.4g", hi) + "], empty case " + fmt("%g", smooth);
  return out;
}

Outcome recovery_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  fixture::TempDir dir("accept_recovery");
  const auto fx = fixture::make_disk_fixture(dir / "cache");
  const auto cache = ActivationCache::open(dir / "cache");
  const Dataset train_set = fx.subset(0, 48), held_out = fx.subset(48, 64);

  TrainConfig cfg;  // Adam, lr 1e-3, batch 8, 5 epochs, Dice, 1x1
  cfg.seed = 1;
  const auto result = train(train_set, cache, cfg, "disk");
  const EvalReport rep = evaluate(result.model, held_out, cache, 8);
  std::vector<float> axis(result.model.kernel.size(), 0.0f);
  axis[2] = 1.0f;
  const double cos = cosine_similarity(result.model.kernel, axis);

  // constant white: IoU = positives / pixels per batch
  ConceptModel white;
  white.channels = result.model.channels;
  white.kernel.assign(white.channels, 0.0f);
  white.bias = 40.0f;
  const EvalReport white_rep = evaluate(white, held_out, cache, 8);
  std::vector<double> fractions;
  for (std::size_t b = 48; b < 64; b += 8) {
    std::size_t pos = 0, all = 0;
    for (std::size_t i = b; i < b + 8; ++i) {
      for (auto v : fx.masks[i].data) pos += v ? 1 : 0;
      all += fx.masks[i].size();
    }
    fractions.push_back(double(pos) / double(all));
  }
  const double white_oracle = (fractions[0] + fractions[1]) / 2;
  const double secs = seconds_since(t0);

  out.require(std::fabs(white_rep.mean - white_oracle) < 1e-12, "white baseline differs from oracle");
  out.require(rep.mean >= 0.9, "held-out IoU below 0.9");
  out.require(cos >= 0.95, "kernel cosine below 0.95");
  out.require(rep.mean > white_rep.mean, "does not beat constant white");
  out.require(secs < 60, "slower than 60 s");
  out.detail = "held-out IoU " + fmt("%.4f", rep.mean) + ", cosine " + fmt("%.4f", cos) +
               ", constant white " + fmt("%.4f", white_rep.mean) + " (oracle " +
               fmt("%.4f", white_oracle) + "), final loss " + fmt("%.4f", result.epoch_loss.back()) +
               ", " + fmt("%.2f s", secs) + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// Annotation with `joints` placed; everything else absent.
PersonAnnotation person(std::initializer_list<std::pair<Joint, std::pair<double, double>>> joints) {
  PersonAnnotation a = fixture::blank_person(640, 480);
  for (const auto& [j, xy] : joints) fixture::set_point(a, j, xy.first, xy.second);
  return a;
}

// Link length that maps to `height` under a relation (inverse formula).
double inverse(double slope, double offset, double height, double h = 1.7) {
  return height * (h - offset) / (slope * h);
}

Outcome size_check() {
  Outcome out;
  const double target = 170.0;  // 1.7 m at 100 px/m
  using J = Joint;
  std::vector<std::pair<std::string, PersonAnnotation>> cases;

  {
    PersonAnnotation a = fixture::blank_person(640, 480);
    a.bbox = BoundingBox{100, 50, 45, target};
    cases.emplace_back("bbox", a);
  }
  const double upper_leg = inverse(2.77, 0.405, target);
  const double lower_leg = inverse(3.075, 0.501, target);
  const double upper_arm = inverse(3.72, 0.449, target);
  const double lower_arm = inverse(4.46, 0.569, target);
  const double torso = inverse(2.4, 0, target);
  cases.emplace_back("upper_leg", person({{J::left_hip, {300, 200}}, {J::left_knee, {300, 200 + upper_leg}}}));
  cases.emplace_back("lower_leg", person({{J::left_knee, {300, 200}}, {J::left_ankle, {300, 200 + lower_leg}}}));
  cases.emplace_back("upper_arm", person({{J::left_shoulder, {300, 100}}, {J::left_elbow, {300, 100 + upper_arm}}}));
  cases.emplace_back("lower_arm", person({{J::left_elbow, {300, 100}}, {J::left_wrist, {300, 100 + lower_arm}}}));
  cases.emplace_back("hip_to_shoulder", person({{J::left_shoulder, {300, 100}}, {J::left_hip, {300, 100 + torso}}}));
  {
    // leg split so that neither bone alone exceeds the target
    const double leg = inverse(1.485, 0.433, target);
    const double up = 0.545 * leg;
    cases.emplace_back("leg", person({{J::left_hip, {300, 200}}, {J::left_knee, {300, 200 + up}},
                                      {J::left_ankle, {300, 200 + leg}}}));
  }
  {
    const double width = target / 7.0 / 1.1;  // ear to ear
    cases.emplace_back("head_height", person({{J::left_ear, {300, 80}}, {J::right_ear, {300 + width, 80}}}));
  }
  {
    // leg + torso + shoulder-to-eye
    const double body = target / 1.1;
    const double leg = 80, up = 44, tor = 60, neck = body - leg - tor;
    cases.emplace_back("body_height",
                       person({{J::left_eye, {300, 100}}, {J::left_shoulder, {300, 100 + neck}},
                               {J::left_hip, {300, 100 + neck + tor}},
                               {J::left_knee, {300, 100 + neck + tor + up}},
                               {J::left_ankle, {300, 100 + neck + tor + leg}}}));
  }

  std::string worst_name;
  double worst = 0;
  for (const auto& [name, ann] : cases) {
    const auto est = estimate_body_height(ann);
    const double err = est.height_px ? std::fabs(*est.height_px - target) / target : 1.0;
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
    out.require(err <= 0.01, name + " off by " + fmt("%.3g", err));
  }

  // full skeleton whose largest candidate is the body composite
  const double body = target / 1.1;
  const double sy = 260;                    // shoulder line
  const double hip_y = sy + 60, knee_y = hip_y + 44, ankle_y = hip_y + 80;
  // head keypoints sit `lift` above the shoulders; solve for the lift that
  // makes the longest shoulder-to-head link equal body - leg - torso
  const double neck = body - 80 - 60;
  // shoulders at x 289/311, ears straight above, eyes at 296/304, nose at
  // 300 and 3 px below the eyes
  auto head_reach = [](double lift) {
    return std::max({lift, std::hypot(7.0, lift), std::hypot(11.0, lift - 3)});
  };
  double lo = 0, hi = 40;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (head_reach(mid) < neck ? lo : hi) = mid;
  }
  const double lift = 0.5 * (lo + hi);
  const double eye_y = sy - lift;
  auto full = [&](double left_leg_factor) {
    const double lk = hip_y + 44 * left_leg_factor, la = hip_y + 80 * left_leg_factor;
    return person({{J::left_shoulder, {289, sy}}, {J::right_shoulder, {311, sy}},
                   {J::left_elbow, {289, sy + 30}}, {J::right_elbow, {311, sy + 30}},
                   {J::left_wrist, {289, sy + 50}}, {J::right_wrist, {311, sy + 50}},
                   {J::left_hip, {289, hip_y}}, {J::right_hip, {311, hip_y}},
                   {J::left_knee, {289, lk}}, {J::right_knee, {311, knee_y}},
                   {J::left_ankle, {289, la}}, {J::right_ankle, {311, ankle_y}},
                   {J::left_ear, {289, eye_y}}, {J::right_ear, {311, eye_y}},
                   {J::left_eye, {296, eye_y}}, {J::right_eye, {304, eye_y}},
                   {J::nose, {300, eye_y + 3}}});
  };
  const PersonAnnotation whole = full(1.0);
  const auto whole_est = estimate_body_height(whole);
  out.require(whole_est.height_px && std::fabs(*whole_est.height_px - target) < 1e-9,
              "full skeleton gives " + fmt("%.6g", whole_est.height_px.value_or(-1)));

  PersonAnnotation small = whole;
  for (auto& k : small.keypoints) {
    k.x *= 0.4;
    k.y *= 0.4;
  }
  const double scaled = estimate_body_height(small).height_px.value_or(-1);
  out.require(std::fabs(scaled - 68.0) < 1e-9, "0.4x gives " + fmt("%.10g", scaled));

  const double foreshortened = estimate_body_height(full(0.5)).height_px.value_or(-1);
  out.require(foreshortened == *whole_est.height_px, "foreshortening changed the estimate");

  out.detail = std::to_string(cases.size()) + " link formulas, worst " + worst_name + " " +
               fmt("%.3g", worst) + "; full skeleton " + fmt("%.6g", whole_est.height_px.value_or(-1)) +
               " px, 0.4x " + fmt("%.10g", scaled) + " px, left leg at 50% " +
               fmt("%.6g", foreshortened) + " px" + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

Outcome binning_check() {
  Outcome out;
  const std::vector<double> rel{0.19, 0.2, 0.38, 0.71, 1.33, 2.5};
  const std::vector<SizeCategory> want{SizeCategory::out_of_range, SizeCategory::far,
                                       SizeCategory::middle, SizeCategory::close,
                                       SizeCategory::very_close, SizeCategory::out_of_range};
  std::string got;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    const SizeCategory c = category_for_relative(rel[i]);
    got += (i ? " " : "") + std::string(to_string(c));
    out.require(c == want[i], fmt("%g", rel[i]) + " misbinned");
    // same answer through the pixel path on a 400 px side
    out.require(categorize(rel[i] * 400.0, 400.0) == want[i], fmt("%g", rel[i]) + " misbinned via pixels");
  }
  double worst_ratio = 0;
  for (const auto& r : kCategoryRanges) worst_ratio = std::max(worst_ratio, r.hi / r.lo);
  out.require(worst_ratio <= 2.0, "a bin spans more than a factor of two");
  out.detail = got + "; max hi/lo " + fmt("%.4g", worst_ratio) + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

Outcome adaptive_check() {
  Outcome out;
  const auto [kh, kw] = adaptive_kernel(200, Concept::leg, 16);
  out.require(kh == 5 && kw == 3, "leg at 200 px, stride 16 gives " + std::to_string(kh) + "x" + std::to_string(kw));
  SeededRng rng(1004);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const double px = rng.uniform(1, 2000);
    const double stride = rng.uniform(1, 64);
    const Concept c = kAllConcepts[rng.below(kAllConcepts.size())];
    const auto [h, w] = adaptive_kernel(px, c, stride);
    if (h < 1 || w < 1 || h % 2 == 0 || w % 2 == 0) ++bad;
  }
  out.require(bad == 0, std::to_string(bad) + " even or empty kernels");
  out.detail = "(leg, 200 px, stride 16) -> (" + std::to_string(kh) + "," + std::to_string(kw) +
               "); 1000 random cases, " + std::to_string(bad) + " invalid" +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

Outcome bf16_check() {
  Outcome out;
  fixture::TempDir dir("accept_bf16");
  SeededRng rng(1005);
  std::vector<Tensor> tensors;
  {
    ActivationCacheWriter w(dir / "cache", "probe", 6, 9, 7, DType::bf16);
    for (int i = 0; i < 10; ++i) {
      std::vector<float> v(6 * 9 * 7);
      for (auto& x : v) x = static_cast<float>(rng.normal() * std::exp(rng.uniform(-20, 20)));
      tensors.emplace_back(std::vector<std::size_t>{6, 9, 7}, v);
      w.write_sample("s" + std::to_string(i), tensors.back());
    }
    w.finish();
  }
  const auto cache = ActivationCache::open(dir / "cache");
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    const Tensor back = cache.read_sample("s" + std::to_string(i));
    for (std::size_t k = 0; k < back.size(); ++k) {
      const double a = tensors[i].data()[k], b = back.data()[k];
      worst = std::max(worst, std::fabs(a - b) / std::fabs(a));
    }
  }
  out.require(worst <= std::ldexp(1.0, -8), "relative error above 2^-8");

  const fs::path payload = payload_path(dir / "cache", "s3");
  fs::resize_file(payload, fs::file_size(payload) - 2);
  bool rejected = false;
  try {
    cache.read_sample("s3");
  } catch (const Error& e) {
    rejected = e.kind() == ErrorKind::corrupt_cache;
  }
  out.require(rejected, "truncated payload accepted");
  out.detail = "max relative error " + fmt("%.3g", worst) + " (bound " + fmt("%.3g", std::ldexp(1.0, -8)) +
               "), truncated payload " + (rejected ? "rejected" : "accepted");
  return out;
}

Outcome determinism_check() {
  Outcome out;
  fixture::TempDir dir("accept_determinism");
  const auto fx = fixture::make_disk_fixture(dir / "cache");
  fixture::write_dataset_dir(fx, dir / "dataset", Concept::eye);
  {
    std::ofstream toml(dir / "study.toml");
    toml << "dataset = \"dataset\"\noutput = \"report\"\ntarget_side = 52\n"
            "concepts = [\"eye\"]\ncategories = [\"all\", \"far\", \"middle\", \"close\"]\n"
            "kernel_modes = [\"fixed_1x1\", \"adaptive\"]\nfolds = 3\n"
            "[train]\nseed = 5\nlearning_rate = 0.01\n"
            "[[caches]]\nnet = \"synthetic\"\nlayer = \"disk\"\npath = \"cache\"\n";
  }
  const std::string toml = (dir / "study.toml").string();
  auto run = [&](const fs::path& output) {
    std::vector<std::string> args{"partprobe", "-q", "run", "--config", toml, "--output", output.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run_main(static_cast<int>(argv.size()), argv.data());
  };
  const int first = run(dir / "a");
  const int second = run(dir / "b");
  out.require(first == 0 && second == 0, "run exited nonzero");
  std::size_t compared = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (entry.path().extension() != ".csv") continue;
    const fs::path rel = fs::relative(entry.path(), dir / "a");
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    ++compared;
    if (!fs::exists(dir / "b" / rel) || slurp(entry.path()) != slurp(dir / "b" / rel)) ++differing;
  }
  out.require(compared >= 5, "too few CSV outputs");
  out.require(differing == 0, std::to_string(differing) + " CSV files differ");
  out.detail = std::to_string(compared) + " CSV files compared, " + std::to_string(differing) +
               " differ" + (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

Outcome folds_check() {
  Outcome out;
  SeededRng rng(1006);
  int bad = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 2 + rng.below(9);
    const std::size_t n = k + rng.below(200);
    const std::uint64_t seed = rng.next();
    const auto folds = make_folds(n, k, seed);
    std::vector<int> hits(n, 0);
    std::size_t smallest = n, largest = 0;
    for (const auto& f : folds) {
      smallest = std::min(smallest, f.size());
      largest = std::max(largest, f.size());
      for (std::size_t i : f) {
        if (i < n) ++hits[i];
      }
    }
    const bool ok = folds.size() == k && largest - smallest <= 1 &&
                    std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
    if (!ok) ++bad;
  }
  out.require(bad == 0, std::to_string(bad) + " bad partitions");
  out.detail = "100 random (n, k, seed): " + std::to_string(100 - bad) + " disjoint, covering, size spread <= 1";
  return out;
}

struct Check {
  const char* name;
  const char* title;
  std::function<Outcome()> run;
};

const std::vector<Check>& checks() {
  static const std::vector<Check> all{
      {"gradient", "analytic gradients vs central differences", gradient_check},
      {"set_iou", "set IoU vs pixel counting oracle", set_iou_check},
      {"dice", "dice identities", dice_check},
      {"recovery", "synthetic recovery with the fixed recipe", recovery_check},
      {"size", "body height estimator", size_check},
      {"binning", "size category bins", binning_check},
      {"adaptive_kernel", "adaptive kernel extents", adaptive_check},
      {"bf16_cache", "bf16 cache round trip", bf16_check},
      {"determinism", "run command determinism", determinism_check},
      {"folds", "cross-validation partition", folds_check},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& name : wanted) {
    if (std::none_of(checks().begin(), checks().end(), [&](const Check& c) { return name == c.name; })) {
      std::fprintf(stderr, "unknown check '%s'\n", name.c_str());
      return 2;
    }
  }
  int failed = 0;
  for (const auto& c : checks()) {
    if (!wanted.empty() && !wanted.count(c.name)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %-16s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, c.title, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
