#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fixture.hpp"
#include "partprobe/metrics.hpp"
#include "partprobe/optimizer.hpp"
#include "partprobe/train.hpp"
#include "test_util.hpp"

using namespace partprobe;

namespace {

Tensor random_tensor(SeededRng& rng, std::size_t c, std::size_t h, std::size_t w) {
  std::vector<float> v(c * h * w);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return Tensor({c, h, w}, v);
}

BinaryMask random_mask(SeededRng& rng, std::size_t h, std::size_t w, double p = 0.3) {
  BinaryMask m(h, w);
  for (auto& v : m.data) v = rng.uniform() < p;
  return m;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_SUITE("train") {

TEST_CASE("saturated exact predictions give zero gradients") {
  // a 1x1 kernel of 200 turns +-1 activations into probabilities of exactly 1 and 0
  ConceptModel m;
  m.channels = 1;
  m.kernel = {200.0f};
  const Tensor act({1, 2, 3}, {1, -1, 1, -1, -1, 1});
  BinaryMask gt(2, 3);
  gt.data = {1, 0, 1, 0, 0, 1};
  const BatchItem item{&act, &gt};
  TrainConfig cfg;
  const auto g = loss_and_grads(m, std::span(&item, 1), cfg);
  CHECK(g.loss == doctest::Approx(0).scale(1));
  for (float v : g.dkernel) CHECK(v == 0.0f);
  CHECK(g.dbias == 0.0f);
}

TEST_CASE("1x1 activation reduces to the weighted logistic gradient") {
  SeededRng rng(51);
  for (int i = 0; i < 20; ++i) {
    const std::size_t c = 1 + rng.below(4);
    const Tensor act = random_tensor(rng, c, 1, 1);
    const BinaryMask gt = random_mask(rng, 3, 4, 0.4);
    ConceptModel m;
    m.channels = c;
    for (std::size_t k = 0; k < c; ++k) m.kernel.push_back(static_cast<float>(rng.normal()));
    m.bias = static_cast<float>(rng.normal());

    double z = m.bias;
    for (std::size_t k = 0; k < c; ++k) z += double(m.kernel[k]) * act.data()[k];
    const double p = sigmoid(z);
    double pos = 0;
    for (auto v : gt.data) pos += v;
    const double frac = pos / double(gt.size());
    const double alpha = 1 - frac, beta = frac;
    // mean over pixels of d/dz of -(alpha g log p + beta (1-g) log(1-p))
    double dz = 0;
    for (auto g : gt.data) dz += g ? -alpha * (1 - p) : beta * p;
    dz /= double(gt.size());

    TrainConfig cfg;
    cfg.loss = LossKind::bce_batch_weighted;
    const BatchItem item{&act, &gt};
    const auto g = loss_and_grads_f64(m, std::span(&item, 1), cfg);
    CHECK(g.dbias == doctest::Approx(dz).epsilon(1e-9));
    for (std::size_t k = 0; k < c; ++k) {
      CHECK(g.dkernel[k] == doctest::Approx(dz * act.data()[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("analytic gradients match central differences") {
  SeededRng rng(52);
  for (LossKind loss : {LossKind::dice, LossKind::bce_batch_weighted, LossKind::bce_global_weighted}) {
    for (std::size_t k : {1u, 3u}) {
      const std::size_t c = 5, h = 6, w = 4;
      std::vector<Tensor> acts;
      std::vector<BinaryMask> masks;
      for (int b = 0; b < 3; ++b) {
        acts.push_back(random_tensor(rng, c, h, w));
        masks.push_back(random_mask(rng, 11, 9));
      }
      std::vector<BatchItem> batch;
      for (int b = 0; b < 3; ++b) batch.push_back({&acts[b], &masks[b]});
      TrainConfig cfg;
      cfg.loss = loss;
      cfg.global_pos_frac = 0.25;
      const pipeline::KernelShape shape{c, k, k};
      std::vector<double> kernel(shape.size());
      for (auto& v : kernel) v = 0.3 * rng.normal();
      const double bias = 0.1 * rng.normal();
      const auto g = loss_and_grads_f64(shape, kernel, bias, batch, cfg);
      double worst = 0;
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
                           loss_and_grads_f64(shape, km, bm, batch, cfg).loss) / (2 * step);
        const double an = i < kernel.size() ? g.dkernel[i] : g.dbias;
        worst = std::max(worst, std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-6}));
      }
      CAPTURE(to_string(loss));
      CAPTURE(k);
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("float and double paths agree") {
  SeededRng rng(53);
  const Tensor act = random_tensor(rng, 4, 5, 5);
  const BinaryMask gt = random_mask(rng, 20, 20);
  ConceptModel m;
  m.channels = 4;
  m.kh = m.kw = 3;
  for (int i = 0; i < 36; ++i) m.kernel.push_back(static_cast<float>(0.2 * rng.normal()));
  const BatchItem item{&act, &gt};
  TrainConfig cfg;
  const auto gf = loss_and_grads(m, std::span(&item, 1), cfg);
  const auto gd = loss_and_grads_f64(m, std::span(&item, 1), cfg);
  CHECK(gf.loss == doctest::Approx(gd.loss).epsilon(1e-5));
  for (std::size_t i = 0; i < gf.dkernel.size(); ++i) {
    CHECK(gf.dkernel[i] == doctest::Approx(gd.dkernel[i]).epsilon(1e-3).scale(1e-6));
  }
}

TEST_CASE("adam closed forms") {
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  for (float g0 : {1e-3f, -0.5f, 20.0f}) {
    AdamState st(1);
    std::vector<float> p{1.0f};
    const std::vector<float> g{g0};
    adam_step(st, p, g, cfg);
    const double first = std::fabs(p[0] - 1.0);
    CHECK(first == doctest::Approx(1e-3).epsilon(1e-4));
    CHECK((p[0] - 1.0f) * g0 < 0);
    const float before = p[0];
    adam_step(st, p, g, cfg);
    CHECK(std::fabs(p[0] - before) <= first + 1e-9);
    CHECK(st.step == 2);
  }
  AdamState st(3);
  std::vector<float> p{1, 2, 3};
  const std::vector<float> zero(3, 0.0f);
  for (int i = 0; i < 5; ++i) adam_step(st, p, zero, cfg);
  CHECK(p == std::vector<float>{1, 2, 3});

  std::vector<float> q(2);
  CHECK(thrown_kind([&] { adam_step(st, q, zero, cfg); }) == ErrorKind::shape);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.max_epochs = 0;
  CHECK(thrown_kind([&] { cfg.validate(); }) == ErrorKind::usage);
  cfg = {};
  cfg.learning_rate = 0;
  CHECK(thrown_kind([&] { cfg.validate(); }) == ErrorKind::usage);
  cfg = {};
  cfg.batch_size = 0;
  CHECK(thrown_kind([&] { cfg.validate(); }) == ErrorKind::usage);
  cfg = {};
  cfg.kh = 2;
  CHECK(thrown_kind([&] { cfg.validate(); }) == ErrorKind::usage);
}

TEST_CASE("initialization range") {
  TrainConfig cfg;
  cfg.kh = 3;
  cfg.kw = 3;
  cfg.seed = 7;
  const ConceptModel m = initial_model(8, cfg);
  CHECK(m.kernel.size() == 72);
  CHECK(m.bias == 0.0f);
  const double bound = 1.0 / std::sqrt(72.0);
  for (float v : m.kernel) CHECK(std::fabs(v) <= bound);
  CHECK(initial_model(8, cfg) == m);
}

TEST_CASE("training is deterministic and reduces the loss") {
  fixture::TempDir dir("train_det");
  fixture::DiskFixtureOptions opts;
  opts.samples = 24;
  const auto fx = fixture::make_disk_fixture(dir / "cache", opts);
  const auto cache = ActivationCache::open(dir / "cache");
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 10;
  const auto a = train(fx.dataset(), cache, cfg, "eye");
  const auto b = train(fx.dataset(), cache, cfg, "eye");
  CHECK(a.model == b.model);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.epoch_loss.size() == 10);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());
  CHECK(a.model.concept_name == "eye");
  CHECK(a.model.layer == "synthetic/disk");

  cfg.seed = 4;
  CHECK_FALSE(train(fx.dataset(), cache, cfg, "eye").model == a.model);

  for (LossKind loss : {LossKind::bce_batch_weighted, LossKind::bce_global_weighted}) {
    cfg.loss = loss;
    const auto r = train(fx.dataset(), cache, cfg);
    CHECK(r.epoch_loss.back() < r.epoch_loss.front());
  }
  cfg.loss = LossKind::dice;
  cfg.optimizer = OptimizerKind::sgd;
  CHECK(std::isfinite(train(fx.dataset(), cache, cfg).epoch_loss.back()));
}

TEST_CASE("training rejects bad input") {
  fixture::TempDir dir("train_bad");
  fixture::DiskFixtureOptions opts;
  opts.samples = 4;
  const auto fx = fixture::make_disk_fixture(dir / "cache", opts);
  const auto cache = ActivationCache::open(dir / "cache");
  TrainConfig cfg;
  CHECK(thrown_kind([&] { train(Dataset{}, cache, cfg); }).has_value());

  Dataset unknown = fx.dataset();
  unknown[0].id = "nope";
  CHECK(thrown_kind([&] { train(unknown, cache, cfg); }) == ErrorKind::missing_sample);

  cfg.max_epochs = 0;
  CHECK(thrown_kind([&] { train(fx.dataset(), cache, cfg); }) == ErrorKind::usage);
}

TEST_CASE("huge learning rates surface as numeric errors") {
  fixture::TempDir dir("train_nan");
  fixture::DiskFixtureOptions opts;
  opts.samples = 8;
  const auto fx = fixture::make_disk_fixture(dir / "cache", opts);
  const auto cache = ActivationCache::open(dir / "cache");
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 1e300;
  cfg.max_epochs = 2;
  cfg.loss = LossKind::bce_batch_weighted;
  CHECK(thrown_kind([&] { train(fx.dataset(), cache, cfg); }) == ErrorKind::numeric);
}

TEST_CASE("dice on 1x1 activations reaches the brute-force optimum") {
  fixture::TempDir dir("train_1x1");
  SeededRng rng(54);
  const std::size_t n = 12, pixels = 8;
  std::vector<double> xs;
  std::vector<std::size_t> positives;
  Dataset data;
  {
    ActivationCacheWriter w(dir / "cache", "scalar", 1, 1, 1, DType::f32);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rng.uniform(-2, 2);
      const std::size_t g = 1 + static_cast<std::size_t>(std::lround((pixels - 1) * sigmoid(2 * x)));
      xs.push_back(static_cast<float>(x));
      positives.push_back(g);
      w.write_sample("s" + std::to_string(i), Tensor({1, 1, 1}, {static_cast<float>(x)}));
      BinaryMask m(1, pixels);
      for (std::size_t k = 0; k < g; ++k) m.data[k] = 1;
      LabeledSample s;
      s.id = "s" + std::to_string(i);
      s.mask = std::make_shared<const BinaryMask>(m);
      data.push_back(s);
    }
    w.finish();
  }
  // Batch dice of a constant-per-image prediction, written out directly.
  auto objective = [&](double wgt, double b) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(wgt * xs[i] + b), g = double(positives[i]);
      total += 1 - (2 * p * g + 1e-6) / (g + p * double(pixels) + 1e-6);
    }
    return total / double(n);
  };
  double best = 1e9;
  for (double wgt = -20; wgt <= 20; wgt += 0.05)
    for (double b = -20; b <= 20; b += 0.05) best = std::min(best, objective(wgt, b));

  const auto cache = ActivationCache::open(dir / "cache");
  TrainConfig cfg;
  cfg.batch_size = n;
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 1500;
  const auto r = train(data, cache, cfg);
  const double reached = objective(r.model.kernel[0], r.model.bias);
  CHECK(reached <= best + 1e-3);
}

TEST_CASE("longer training recovers the disk detector") {
  // Same fixture as the acceptance check, with a larger step and more
  // epochs than the fixed recipe.
  fixture::TempDir dir("train_long");
  const auto fx = fixture::make_disk_fixture(dir / "cache");
  const auto cache = ActivationCache::open(dir / "cache");
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.learning_rate = 5e-2;
  cfg.max_epochs = 100;
  const auto r = train(fx.subset(0, 48), cache, cfg);
  const EvalReport rep = evaluate(r.model, fx.subset(48, 64), cache, 8);
  std::vector<float> axis(8, 0.0f);
  axis[2] = 1.0f;
  CHECK(rep.mean >= 0.9);
  CHECK(cosine_similarity(r.model.kernel, axis) >= 0.95);
}

TEST_CASE("fold partition") {
  const auto f10 = make_folds(10, 5, 1);
  for (const auto& f : f10) CHECK(f.size() == 2);
  const auto f11 = make_folds(11, 5, 1);
  std::vector<std::size_t> sizes;
  for (const auto& f : f11) sizes.push_back(f.size());
  CHECK(sizes == std::vector<std::size_t>{3, 2, 2, 2, 2});
  CHECK(make_folds(11, 5, 1) == f11);
  CHECK_FALSE(make_folds(11, 5, 2) == f11);

  std::set<std::size_t> seen;
  for (const auto& f : f11) seen.insert(f.begin(), f.end());
  CHECK(seen.size() == 11);
  CHECK(*seen.rbegin() == 10);

  CHECK(thrown_kind([] { make_folds(4, 5, 0); }) == ErrorKind::usage);
  CHECK(thrown_kind([] { make_folds(10, 1, 0); }) == ErrorKind::usage);
}

TEST_CASE("cross validation is independent of scheduling") {
  fixture::TempDir dir("cv");
  fixture::DiskFixtureOptions opts;
  opts.samples = 20;
  const auto fx = fixture::make_disk_fixture(dir / "cache", opts);
  const auto cache = ActivationCache::open(dir / "cache");
  TrainConfig cfg;
  cfg.max_epochs = 2;
  const auto par = cross_validate(fx.dataset(), cache, cfg, 5, "eye", true);
  const auto ser = cross_validate(fx.dataset(), cache, cfg, 5, "eye", false);
  REQUIRE(par.folds.size() == 5);
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(par.folds[f].model == ser.folds[f].model);
    CHECK(par.folds[f].validation.mean == ser.folds[f].validation.mean);
    CHECK(par.folds[f].validation_indices.size() == 4);
  }
  CHECK(par.mean_iou == ser.mean_iou);
  CHECK(par.stddev_iou >= 0);
  CHECK(thrown_kind([&] { cross_validate(fx.subset(0, 3), cache, cfg, 5); }) == ErrorKind::usage);
}

TEST_CASE("positive fraction") {
  Dataset d;
  for (int i = 0; i < 2; ++i) {
    BinaryMask m(1, 4);
    m.data = {1, 0, 0, std::uint8_t(i)};
    LabeledSample s;
    s.id = std::to_string(i);
    s.mask = std::make_shared<const BinaryMask>(m);
    d.push_back(s);
  }
  CHECK(positive_fraction(d) == doctest::Approx(3.0 / 8.0));
}

}  // TEST_SUITE
