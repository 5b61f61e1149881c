#include "partprobe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "partprobe/error.hpp"

namespace partprobe {

IouCounts iou_counts(const BinaryMask& gt, const ProbabilityMap& pred) {
  if (gt.height != pred.height || gt.width != pred.width) {
    fail(ErrorKind::shape, "set IoU: mask and prediction sizes differ");
  }
  IouCounts c;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const bool g = gt.data[i] != 0;
    const bool p = pred.data[i] > 0.5f;
    c.intersection += (g && p) ? 1 : 0;
    c.union_area += (g || p) ? 1 : 0;
  }
  return c;
}

double set_iou(std::span<const BinaryMask> gts, std::span<const ProbabilityMap> preds) {
  if (gts.size() != preds.size()) fail(ErrorKind::shape, "set IoU: list lengths differ");
  IouCounts total;
  for (std::size_t i = 0; i < gts.size(); ++i) total += iou_counts(gts[i], preds[i]);
  return total.ratio();
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double population_stddev(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double mu = mean_of(values);
  double acc = 0;
  for (double v : values) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

EvalReport evaluate(const ConceptModel& m, const Dataset& dataset, const ActivationCache& cache,
                    std::size_t batch_size) {
  if (dataset.empty()) fail(ErrorKind::degenerate, "cannot evaluate on an empty dataset");
  if (batch_size == 0) fail(ErrorKind::usage, "batch size must be at least 1");
  if (m.channels != cache.manifest().channels) {
    fail(ErrorKind::shape, "model expects " + std::to_string(m.channels) + " channels, cache has " +
                               std::to_string(cache.manifest().channels));
  }
  EvalReport report;
  report.layer = m.layer;
  report.concept_name = m.concept_name;
  report.kernel_setting = std::to_string(m.kh) + "x" + std::to_string(m.kw);

  IouCounts pooled;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    IouCounts batch;
    for (std::size_t i = start; i < end; ++i) {
      const BinaryMask gt = dataset[i].load_mask();
      const Tensor act = cache.read_sample(dataset[i].id);
      batch += iou_counts(gt, forward(m, act, gt.height, gt.width));
    }
    report.batch_iou.push_back(batch.ratio());
    pooled += batch;
  }
  report.mean = mean_of(report.batch_iou);
  report.stddev = population_stddev(report.batch_iou);
  report.pooled = pooled.ratio();
  return report;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::incomparable, "cannot compare embeddings of length " + std::to_string(a.size()) +
                                      " and " + std::to_string(b.size()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * double(b[i]);
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  if (na == 0 || nb == 0) fail(ErrorKind::degenerate, "cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

SimilarityMatrix similarity_matrix(
    std::span<const std::pair<std::string, std::vector<ConceptModel>>> models) {
  SimilarityMatrix out;
  const ConceptModel* reference = nullptr;
  for (const auto& [name, list] : models) {
    if (list.empty()) fail(ErrorKind::degenerate, "no models for concept '" + name + "'");
    for (const ConceptModel& m : list) {
      if (!reference) reference = &m;
      if (m.channels != reference->channels || m.kh != reference->kh || m.kw != reference->kw) {
        fail(ErrorKind::incomparable, "similarity matrix needs identical kernel shapes");
      }
    }
    out.concepts.push_back(name);
  }
  const std::size_t n = models.size();
  out.values.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      const auto& la = models[a].second;
      const auto& lb = models[b].second;
      double acc = 0;
      std::size_t pairs = 0;
      for (std::size_t i = 0; i < la.size(); ++i) {
        for (std::size_t j = 0; j < lb.size(); ++j) {
          if (a == b && i == j) continue;
          acc += cosine_similarity(la[i].embedding(), lb[j].embedding());
          ++pairs;
        }
      }
      const double v = pairs ? acc / static_cast<double>(pairs) : 1.0;
      out.values[a * n + b] = v;
      out.values[b * n + a] = v;
    }
  }
  return out;
}

LeastSquaresFit least_squares_fit(std::span<const float> target,
                                  std::span<const std::vector<float>> basis) {
  if (basis.empty()) fail(ErrorKind::degenerate, "least squares needs a nonempty basis");
  const auto n = static_cast<Eigen::Index>(target.size());
  const auto k = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd A(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& col = basis[static_cast<std::size_t>(j)];
    if (static_cast<Eigen::Index>(col.size()) != n) {
      fail(ErrorKind::incomparable, "basis vector length differs from the target");
    }
    for (Eigen::Index i = 0; i < n; ++i) A(i, j) = col[static_cast<std::size_t>(i)];
  }
  if (A.isZero(0.0)) fail(ErrorKind::degenerate, "least squares basis is all zero");
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = target[static_cast<std::size_t>(i)];

  const Eigen::MatrixXd normal =
      A.transpose() * A + kRidgeDamping * Eigen::MatrixXd::Identity(k, k);
  const Eigen::VectorXd coeffs = normal.ldlt().solve(A.transpose() * t);
  const Eigen::VectorXd recon = A * coeffs;

  LeastSquaresFit fit;
  fit.coefficients.assign(coeffs.data(), coeffs.data() + k);
  const Eigen::VectorXd residual = t - recon;
  fit.residual.assign(residual.data(), residual.data() + n);
  const double tn = t.norm();
  const double rn = recon.norm();
  if (tn == 0 || rn <= 1e-12 * tn) {
    fit.degenerate = true;
    fit.fit_cosine = 0;
  } else {
    fit.fit_cosine = std::clamp(t.dot(recon) / (tn * rn), -1.0, 1.0);
  }
  return fit;
}

}  // namespace partprobe
