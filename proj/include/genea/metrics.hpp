#pragma once

// Objective motion metrics: average jerk and acceleration, speed-histogram
// Hellinger distance, global canonical correlation and Frechet gesture distance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "genea/bvh.hpp"
#include "genea/motion.hpp"

namespace genea {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation across sequences

  static MeanSd of(std::span<const double> v) {
    MeanSd out;
    if (v.empty()) return out;
    out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - out.mean) * (x - out.mean);
      out.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Joint sets

/// Joints of the upper-body tier: everything in the root's child subtrees whose
/// first joint lies above the hips in the rest pose. The root itself is excluded.
inline std::vector<std::size_t> upper_body_joints(const Skeleton& sk) {
  std::vector<bool> keep(sk.joints.size(), false);
  for (std::size_t i = 0; i < sk.joints.size(); ++i) {
    const auto& j = sk.joints[i];
    if (!j.parent) continue;
    if (*j.parent == sk.root_index) {
      keep[i] = j.offset.y() > 0.0;
    } else {
      keep[i] = keep[*j.parent];
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out.push_back(i);
  }
  return out;
}

inline PoseSequence select_joints(const PoseSequence& seq, std::span<const std::size_t> joints) {
  PoseSequence out;
  out.fps = seq.fps;
  out.positions.resize(seq.positions.rows(), static_cast<Eigen::Index>(3 * joints.size()));
  for (std::size_t k = 0; k < joints.size(); ++k) {
    if (joints[k] >= seq.joint_count()) throw MetricError("joint index out of range");
    out.joint_names.push_back(seq.joint_names[joints[k]]);
    out.positions.middleCols(static_cast<Eigen::Index>(3 * k), 3) =
        seq.positions.middleCols(static_cast<Eigen::Index>(3 * joints[k]), 3);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Average jerk / acceleration

namespace detail {

/// k-th order finite difference along rows, scaled by fps^k. The result has
/// k fewer rows than the input and is exact for polynomials of degree k.
inline FrameMatrix finite_difference(const FrameMatrix& x, int order, double fps) {
  FrameMatrix d = x;
  for (int k = 0; k < order; ++k) {
    const auto n = d.rows();
    if (n < 2) throw MetricError("sequence too short for the requested derivative");
    d = ((d.bottomRows(n - 1) - d.topRows(n - 1)) * fps).eval();
  }
  return d;
}

/// Time-averaged, joint-averaged Euclidean norm of the `order`-th derivative.
inline double average_derivative_norm(const PoseSequence& seq, int order) {
  const auto joints = static_cast<Eigen::Index>(seq.joint_count());
  if (joints == 0) throw MetricError("pose sequence has no joints");
  const FrameMatrix d = finite_difference(seq.positions, order, seq.fps);
  double total = 0.0;
  for (Eigen::Index t = 0; t < d.rows(); ++t) {
    double frame = 0.0;
    for (Eigen::Index j = 0; j < joints; ++j) frame += d.row(t).segment<3>(3 * j).norm();
    total += frame / static_cast<double>(joints);
  }
  return total / static_cast<double>(d.rows());
}

inline MeanSd average_derivative(std::span<const PoseSequence> seqs, int order) {
  if (seqs.empty()) throw MetricError("no pose sequences");
  std::vector<double> per_seq;
  per_seq.reserve(seqs.size());
  for (const auto& s : seqs) {
    if (s.frame_count() < 4) throw MetricError("pose sequence shorter than 4 frames");
    per_seq.push_back(average_derivative_norm(s, order));
  }
  return MeanSd::of(per_seq);
}

}  // namespace detail

/// cm/s^3 when positions are in cm.
inline MeanSd average_jerk(std::span<const PoseSequence> seqs) { return detail::average_derivative(seqs, 3); }

/// cm/s^2 when positions are in cm.
inline MeanSd average_acceleration(std::span<const PoseSequence> seqs) { return detail::average_derivative(seqs, 2); }

// ---------------------------------------------------------------------------
// Speed histograms

struct SpeedHistogram {
  double bin_width = 1.0;     // cm/s
  std::vector<double> bins;   // normalized, sums to 1
};

/// Pools per-frame per-joint speeds over all joints, frames and sequences.
/// The last bin also collects every speed above max_speed.
inline SpeedHistogram speed_histogram(std::span<const PoseSequence> seqs, double bin_width = 1.0,
                                      double max_speed = 500.0) {
  if (!(bin_width > 0.0) || !(max_speed > 0.0)) throw MetricError("histogram bin width and range must be positive");
  const auto n_bins = static_cast<std::size_t>(std::ceil(max_speed / bin_width - 1e-9));
  SpeedHistogram h;
  h.bin_width = bin_width;
  h.bins.assign(n_bins, 0.0);
  std::size_t total = 0;
  for (const auto& s : seqs) {
    const auto joints = static_cast<Eigen::Index>(s.joint_count());
    for (Eigen::Index t = 1; t < s.positions.rows(); ++t) {
      for (Eigen::Index j = 0; j < joints; ++j) {
        const double v = s.fps * (s.positions.row(t).segment<3>(3 * j) - s.positions.row(t - 1).segment<3>(3 * j)).norm();
        const auto bin = std::min(static_cast<std::size_t>(v / bin_width), n_bins - 1);
        h.bins[bin] += 1.0;
        ++total;
      }
    }
  }
  if (total == 0) throw MetricError("speed histogram needs at least one frame transition");
  for (auto& b : h.bins) b /= static_cast<double>(total);
  return h;
}

/// sqrt(1 - sum_i sqrt(h1_i * h2_i)), clamped to [0, 1].
inline double hellinger(const SpeedHistogram& a, const SpeedHistogram& b) {
  if (a.bins.size() != b.bins.size() || a.bin_width != b.bin_width)
    throw MetricError("histograms use different binning");
  double bc = 0.0;
  for (std::size_t i = 0; i < a.bins.size(); ++i) bc += std::sqrt(a.bins[i] * b.bins[i]);
  return std::sqrt(std::clamp(1.0 - bc, 0.0, 1.0));
}

// ---------------------------------------------------------------------------
// Canonical correlation

inline Eigen::MatrixXd centered(const Eigen::MatrixXd& x) { return x.rowwise() - x.colwise().mean(); }

/// First canonical correlation between the columns of x and y (rows are paired
/// observations). Each covariance block gets a ridge of ridge_scale * trace / dim.
inline double first_canonical_correlation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                          double ridge_scale = 1e-6) {
  if (x.rows() != y.rows()) throw MetricError("CCA inputs must have the same number of rows");
  if (x.rows() < 2) throw MetricError("CCA needs at least two observations");
  const Eigen::MatrixXd xc = centered(x);
  const Eigen::MatrixXd yc = centered(y);
  Eigen::MatrixXd cxx = xc.transpose() * xc;
  Eigen::MatrixXd cyy = yc.transpose() * yc;
  const Eigen::MatrixXd cxy = xc.transpose() * yc;
  const double tx = cxx.trace();
  const double ty = cyy.trace();
  if (!(tx > 0.0) || !(ty > 0.0)) throw MetricError("CCA input has zero variance");
  cxx.diagonal().array() += ridge_scale * tx / static_cast<double>(cxx.rows());
  cyy.diagonal().array() += ridge_scale * ty / static_cast<double>(cyy.rows());
  const Eigen::LLT<Eigen::MatrixXd> lx(cxx);
  const Eigen::LLT<Eigen::MatrixXd> ly(cyy);
  // Whitened cross-covariance: Lx^-1 Cxy Ly^-T.
  Eigen::MatrixXd m = lx.matrixL().solve(cxy);
  m = ly.matrixL().solve(m.transpose()).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

/// Stacks pairwise-aligned frames (truncated to the shorter of each pair) and
/// returns the first canonical correlation between generated and reference poses.
inline double global_cca(std::span<const PoseSequence> gen, std::span<const PoseSequence> ref,
                         double ridge_scale = 1e-6) {
  if (gen.size() != ref.size()) throw MetricError("CCA segment lists differ in length");
  if (gen.empty()) throw MetricError("CCA needs at least one segment pair");
  Eigen::Index rows = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) rows += std::min(gen[i].positions.rows(), ref[i].positions.rows());
  Eigen::MatrixXd x(rows, gen[0].positions.cols());
  Eigen::MatrixXd y(rows, ref[0].positions.cols());
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    if (gen[i].positions.cols() != x.cols() || ref[i].positions.cols() != y.cols())
      throw MetricError("CCA segments have inconsistent joint sets");
    const auto n = std::min(gen[i].positions.rows(), ref[i].positions.rows());
    x.middleRows(at, n) = gen[i].positions.topRows(n);
    y.middleRows(at, n) = ref[i].positions.topRows(n);
    at += n;
  }
  return first_canonical_correlation(x, y, ridge_scale);
}

// ---------------------------------------------------------------------------
// Feature extraction and Frechet distance

/// Maps a window of consecutive poses to a fixed-length feature vector.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::size_t window_len() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual Eigen::VectorXd extract(const Eigen::Ref<const Eigen::VectorXd>& window) const = 0;
};

/// Flattened sliding windows (one row each) with stride window_len / 2.
inline Eigen::MatrixXd pose_windows(std::span<const PoseSequence> seqs, std::size_t window_len) {
  if (window_len == 0) throw MetricError("window length must be positive");
  const std::size_t stride = std::max<std::size_t>(1, window_len / 2);
  std::size_t count = 0;
  Eigen::Index cols = -1;
  for (const auto& s : seqs) {
    if (cols < 0) cols = s.positions.cols();
    if (s.positions.cols() != cols) throw MetricError("sequences have inconsistent joint sets");
    if (s.frame_count() >= window_len) count += (s.frame_count() - window_len) / stride + 1;
  }
  if (cols < 0) cols = 0;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), cols * static_cast<Eigen::Index>(window_len));
  Eigen::Index row = 0;
  for (const auto& s : seqs) {
    if (s.frame_count() < window_len) continue;
    for (std::size_t start = 0; start + window_len <= s.frame_count(); start += stride) {
      const double* p = s.positions.row(static_cast<Eigen::Index>(start)).data();
      out.row(row++) = Eigen::Map<const Eigen::RowVectorXd>(p, out.cols());
    }
  }
  return out;
}

/// Mean-centering followed by projection onto the leading principal directions
/// of the reference windows.
class PcaFeatureExtractor final : public FeatureExtractor {
 public:
  PcaFeatureExtractor(std::size_t window_len, Eigen::VectorXd mean, Eigen::MatrixXd basis, Eigen::VectorXd variances)
      : window_len_(window_len), mean_(std::move(mean)), basis_(std::move(basis)), variances_(std::move(variances)) {}

  std::size_t window_len() const override { return window_len_; }
  std::size_t input_dim() const override { return static_cast<std::size_t>(mean_.size()); }
  std::size_t output_dim() const override { return static_cast<std::size_t>(basis_.cols()); }

  Eigen::VectorXd extract(const Eigen::Ref<const Eigen::VectorXd>& window) const override {
    if (window.size() != mean_.size()) throw MetricError("feature window has the wrong dimension");
    return basis_.transpose() * (window - mean_);
  }

  Eigen::VectorXd reconstruct(const Eigen::Ref<const Eigen::VectorXd>& feature) const {
    return mean_ + basis_ * feature;
  }

  const Eigen::MatrixXd& basis() const { return basis_; }
  /// Variance captured by each component, non-increasing.
  const Eigen::VectorXd& explained_variance() const { return variances_; }

 private:
  std::size_t window_len_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd basis_;  // input_dim x output_dim, orthonormal columns
  Eigen::VectorXd variances_;
};

inline std::shared_ptr<const PcaFeatureExtractor> fit_feature_extractor(std::span<const PoseSequence> ref,
                                                                        std::size_t window_len, std::size_t dim) {
  const Eigen::MatrixXd w = pose_windows(ref, window_len);
  const auto m = static_cast<std::size_t>(w.rows());
  const auto d = static_cast<std::size_t>(w.cols());
  if (dim == 0 || dim > d) throw MetricError("feature dimension must be in [1, window dimension]");
  if (m < dim || m < 2) throw MetricError("not enough reference windows for the requested feature dimension");

  const Eigen::VectorXd mean = w.colwise().mean().transpose();
  const Eigen::MatrixXd xc = w.rowwise() - mean.transpose();
  const double denom = static_cast<double>(m - 1);
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(dim));
  Eigen::VectorXd var(static_cast<Eigen::Index>(dim));

  constexpr std::size_t kMaxDirectCovariance = 1500;
  if (d <= m || d <= kMaxDirectCovariance) {
    const Eigen::MatrixXd cov = (xc.transpose() * xc) / denom;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    // Eigen sorts ascending.
    for (std::size_t k = 0; k < dim; ++k) {
      const auto src = static_cast<Eigen::Index>(d - 1 - k);
      basis.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(src);
      var(static_cast<Eigen::Index>(k)) = std::max(0.0, es.eigenvalues()(src));
    }
  } else {
    // Fewer windows than dimensions: work with the Gram matrix instead.
    if (dim >= m) throw MetricError("not enough reference windows for the requested feature dimension");
    const Eigen::MatrixXd gram = xc * xc.transpose();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    for (std::size_t k = 0; k < dim; ++k) {
      const auto src = static_cast<Eigen::Index>(m - 1 - k);
      const double lambda = es.eigenvalues()(src);
      if (!(lambda > 1e-12)) throw MetricError("reference windows do not span the requested feature dimension");
      basis.col(static_cast<Eigen::Index>(k)) = xc.transpose() * es.eigenvectors().col(src) / std::sqrt(lambda);
      var(static_cast<Eigen::Index>(k)) = lambda / denom;
    }
  }
  return std::make_shared<PcaFeatureExtractor>(window_len, mean, std::move(basis), std::move(var));
}

struct FeatureMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t count = 0;
};

/// Sample mean and (n - 1)-normalized covariance of the rows of `features`.
inline FeatureMoments moments_of(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw MetricError("at least two feature vectors are needed");
  FeatureMoments fm;
  fm.count = static_cast<std::size_t>(features.rows());
  fm.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd xc = features.rowwise() - fm.mean.transpose();
  fm.covariance = (xc.transpose() * xc) / static_cast<double>(features.rows() - 1);
  fm.covariance = 0.5 * (fm.covariance + fm.covariance.transpose());
  return fm;
}

inline FeatureMoments feature_moments(std::span<const PoseSequence> seqs, const FeatureExtractor& ex) {
  const Eigen::MatrixXd w = pose_windows(seqs, ex.window_len());
  if (static_cast<std::size_t>(w.cols()) != ex.input_dim() && w.rows() > 0)
    throw MetricError("pose windows do not match the extractor input dimension");
  Eigen::MatrixXd feats(w.rows(), static_cast<Eigen::Index>(ex.output_dim()));
  for (Eigen::Index i = 0; i < w.rows(); ++i) feats.row(i) = ex.extract(w.row(i).transpose()).transpose();
  return moments_of(feats);
}

namespace detail {

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ||mu_r - mu_g||^2 + tr(S_r + S_g - 2 (S_r S_g)^(1/2)). The trace of the
/// square root is taken from the eigenvalues of sqrt(S_r) S_g sqrt(S_r),
/// which share their spectrum with S_r S_g but are symmetric.
inline double frechet_distance(const FeatureMoments& r, const FeatureMoments& g) {
  if (r.mean.size() != g.mean.size()) throw MetricError("feature moments differ in dimension");
  const Eigen::MatrixXd sr = detail::psd_sqrt(r.covariance);
  const Eigen::MatrixXd inner = sr * g.covariance * sr;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (r.mean - g.mean).squaredNorm() + r.covariance.trace() + g.covariance.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d);
}

inline double fgd(std::span<const PoseSequence> gen, std::span<const PoseSequence> ref, const FeatureExtractor& ex) {
  return frechet_distance(feature_moments(ref, ex), feature_moments(gen, ex));
}

// ---------------------------------------------------------------------------
// Per-condition report

struct MetricConfig {
  double hist_bin_width = 1.0;    // cm/s
  double hist_max_speed = 500.0;  // cm/s
  double cca_ridge = 1e-6;
  std::size_t fgd_window = 34;    // frames
  std::size_t fgd_dim = 32;
};

struct MetricReport {
  std::string condition;
  MeanSd avg_jerk;
  MeanSd avg_accel;
  double global_cca = 0.0;
  double hellinger = 0.0;
  double fgd = 0.0;
  std::size_t segments = 0;
};

/// All five metrics for one condition; Hellinger distance is measured against
/// the reference speed histogram and FGD against the reference features.
inline MetricReport metric_report(const std::string& condition, std::span<const PoseSequence> gen,
                                  std::span<const PoseSequence> ref, const MetricConfig& config,
                                  const FeatureExtractor& extractor) {
  if (gen.empty() || ref.empty()) throw MetricError("condition '" + condition + "' has no segments");
  MetricReport r;
  r.condition = condition;
  r.segments = gen.size();
  r.avg_jerk = average_jerk(gen);
  r.avg_accel = average_acceleration(gen);
  r.global_cca = global_cca(gen, ref, config.cca_ridge);
  r.hellinger = hellinger(speed_histogram(gen, config.hist_bin_width, config.hist_max_speed),
                          speed_histogram(ref, config.hist_bin_width, config.hist_max_speed));
  r.fgd = fgd(gen, ref, extractor);
  return r;
}

inline MetricReport metric_report(const std::string& condition, std::span<const PoseSequence> gen,
                                  std::span<const PoseSequence> ref, const MetricConfig& config) {
  const auto ex = fit_feature_extractor(ref, config.fgd_window, config.fgd_dim);
  return metric_report(condition, gen, ref, config, *ex);
}

}  // namespace genea
