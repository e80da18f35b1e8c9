#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "omnisynth/core/rng.hpp"
#include "omnisynth/geometry/perspective.hpp"

namespace omnisynth::metrics {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels; +inf for identical images.
inline double psnr(const Image& a, const Image& b) {
  OMNISYNTH_REQUIRE(a.width == b.width && a.height == b.height, "psnr needs images of equal size");
  OMNISYNTH_REQUIRE(a.pixel_count() > 0, "psnr of empty images");
  double se = 0.0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) se += (a.rgb[i] - b.rgb[i]).cast<double>().squaredNorm();
  const double mse = se / (3.0 * static_cast<double>(a.pixel_count()));
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

inline double capped_psnr(double db) { return std::min(db, kPsnrCap); }

using Feature = Eigen::VectorXd;

/// Named deterministic image -> fixed-length feature map.
struct FeatureExtractor {
  std::string name;
  std::size_t dim = 0;
  std::function<Feature(const Image&)> extract;

  Feature operator()(const Image& img) const {
    Feature f = extract(img);
    OMNISYNTH_REQUIRE(static_cast<std::size_t>(f.size()) == dim, "extractor returned the wrong feature length");
    return f;
  }
};

/// 4 x 4 grid of mean colours (48) followed by a 16-bin histogram of
/// grey-level gradient magnitude (forward differences, zero at the far
/// border), as pixel fractions over [0, sqrt 2].
inline Feature baseline_features(const Image& img) {
  OMNISYNTH_REQUIRE(img.width >= 4 && img.height >= 4, "baseline features need at least 4 x 4 pixels");
  Feature f = Feature::Zero(64);
  for (int gy = 0; gy < 4; ++gy)
    for (int gx = 0; gx < 4; ++gx) {
      const int x0 = gx * img.width / 4, x1 = (gx + 1) * img.width / 4;
      const int y0 = gy * img.height / 4, y1 = (gy + 1) * img.height / 4;
      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) sum += img.at(x, y).cast<double>();
      f.segment<3>(3 * (4 * gy + gx)) = sum / static_cast<double>((x1 - x0) * (y1 - y0));
    }
  auto grey = [&](int x, int y) { return img.at(x, y).cast<double>().mean(); };
  const double bin = std::numbers::sqrt2 / 16.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double gx = x + 1 < img.width ? grey(x + 1, y) - grey(x, y) : 0.0;
      const double gy = y + 1 < img.height ? grey(x, y + 1) - grey(x, y) : 0.0;
      const int b = std::min(15, static_cast<int>(std::hypot(gx, gy) / bin));
      f[48 + b] += 1.0;
    }
  f.tail(16) /= static_cast<double>(img.pixel_count());
  return f;
}

inline FeatureExtractor baseline_extractor() { return {"baseline64", 64, baseline_features}; }

/// Gaussian over features with shrinkage; the Cholesky factor of the
/// regularised covariance is kept for Mahalanobis solves.
struct FeatureGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // already includes lambda I
  double lambda = 0.0;
  Eigen::LLT<Eigen::MatrixXd> factor;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }

  /// Gaussian with the given moments; `cov` must be symmetric positive definite.
  static FeatureGaussian from_moments(Eigen::VectorXd mean, Eigen::MatrixXd cov, double lambda = 0.0) {
    OMNISYNTH_REQUIRE(cov.rows() == mean.size() && cov.cols() == mean.size(), "covariance shape mismatch");
    FeatureGaussian g;
    g.mean = std::move(mean);
    g.covariance = std::move(cov);
    g.lambda = lambda;
    g.factor.compute(g.covariance);
    OMNISYNTH_REQUIRE(g.factor.info() == Eigen::Success, "covariance is not positive definite");
    return g;
  }

  double mahalanobis2(const Feature& x) const {
    OMNISYNTH_REQUIRE(x.size() == mean.size(), "feature length does not match the fitted Gaussian");
    const Eigen::VectorXd d = x - mean;
    return d.dot(factor.solve(d));
  }
};

/// Sample mean and covariance, then Sigma += lambda I with
/// lambda = 1e-3 trace(Sigma) / dim (a small floor keeps it definite).
inline FeatureGaussian fit_feature_gaussian(const std::vector<Feature>& features) {
  OMNISYNTH_REQUIRE(!features.empty(), "no features to fit");
  const auto dim = features.front().size();
  OMNISYNTH_REQUIRE(static_cast<Eigen::Index>(features.size()) > dim,
                    "need more samples than feature dimensions (" + std::to_string(features.size()) + " <= " +
                        std::to_string(dim) + ")");
  FeatureGaussian g;
  g.mean = Eigen::VectorXd::Zero(dim);
  for (const auto& f : features) {
    OMNISYNTH_REQUIRE(f.size() == dim, "features differ in length");
    g.mean += f;
  }
  g.mean /= static_cast<double>(features.size());
  Eigen::MatrixXd X(features.size(), dim);
  for (std::size_t i = 0; i < features.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = (features[i] - g.mean).transpose();
  g.covariance = (X.transpose() * X) / static_cast<double>(features.size() - 1);
  g.covariance = 0.5 * (g.covariance + g.covariance.transpose());
  g.lambda = std::max(1e-3 * g.covariance.trace() / static_cast<double>(dim), 1e-12);
  g.covariance.diagonal().array() += g.lambda;
  return FeatureGaussian::from_moments(std::move(g.mean), std::move(g.covariance), g.lambda);
}

inline FeatureGaussian fit_feature_gaussian(const std::vector<Image>& crops, const FeatureExtractor& extractor) {
  std::vector<Feature> f;
  f.reserve(crops.size());
  for (const auto& c : crops) f.push_back(extractor(c));
  return fit_feature_gaussian(f);
}

/// Mean squared Mahalanobis distance of the features.
inline double nllf(const std::vector<Feature>& features, const FeatureGaussian& g) {
  OMNISYNTH_REQUIRE(!features.empty(), "nllf needs at least one view");
  double s = 0.0;
  for (const auto& x : features) s += g.mahalanobis2(x);
  return s / static_cast<double>(features.size());
}

inline double nllf(const std::vector<Image>& views, const FeatureExtractor& extractor, const FeatureGaussian& g) {
  std::vector<Feature> f;
  f.reserve(views.size());
  for (const auto& v : views) f.push_back(extractor(v));
  return nllf(f, g);
}

/// Random viewing direction: yaw uniform over the circle, pitch uniform in
/// [-45, 45] degrees.
inline Vec3 random_view_direction(Rng& rng) {
  return geometry::yaw_pitch_direction(rng.uniform(0.0, 360.0), rng.uniform(-45.0, 45.0));
}

inline std::vector<Image> random_perspective_crops(const RgbdPanorama& pano, std::size_t count, int size, Rng& rng,
                                                   double fov_deg = 90.0) {
  std::vector<Image> crops;
  crops.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    crops.push_back(geometry::perspective_crop(pano, random_view_direction(rng), fov_deg, size, size));
  return crops;
}

struct ReportRow {
  std::string scene;
  std::string method;
  double psnr_db = 0.0;
  double nllf = 0.0;  // raw; written divided by 1000
};

inline void write_report(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "scene,method,psnr_db,nllf\n";
  os.precision(10);
  for (const auto& r : rows) os << r.scene << ',' << r.method << ',' << capped_psnr(r.psnr_db) << ',' << r.nllf / 1000.0 << '\n';
}

}  // namespace omnisynth::metrics
