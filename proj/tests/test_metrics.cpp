#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/Cholesky>

#include "omnisynth/metrics.hpp"

using namespace omnisynth;
using namespace omnisynth::metrics;

namespace {

Image random_image(int w, int h, Rng& rng) {
  Image img(w, h);
  for (auto& c : img.rgb) c = Color(rng.uniform(0.1, 0.8), rng.uniform(0.1, 0.8), rng.uniform(0.1, 0.8)).cast<float>();
  return img;
}

std::vector<Feature> gaussian_samples(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t n, Rng& rng) {
  const Eigen::MatrixXd L = cov.llt().matrixL();
  std::vector<Feature> out;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd z(mean.size());
    for (auto& v : z) v = rng.normal();
    out.push_back(mean + L * z);
  }
  return out;
}

}  // namespace

TEST(Psnr, ClosedFormsAndSymmetry) {
  Rng rng(1);
  const Image a = random_image(16, 8, rng);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_EQ(capped_psnr(psnr(a, a)), 99.0);
  Image b = a;
  for (auto& c : b.rgb) c.array() += 1.0f / 255.0f;
  EXPECT_NEAR(psnr(a, b), 20.0 * std::log10(255.0), 1e-4);
  EXPECT_NEAR(psnr(a, b), 48.13, 1e-2);
  const Image c = random_image(16, 8, rng);
  EXPECT_EQ(psnr(a, c), psnr(c, a));
  EXPECT_THROW(psnr(a, Image(8, 8)), InvalidArgument);
}

TEST(BaselineExtractor, ConstantImage) {
  const Image img(32, 16, Color(0.2f, 0.5f, 0.7f));
  const auto ex = baseline_extractor();
  const Feature f = ex(img);
  ASSERT_EQ(f.size(), 64);
  for (int k = 0; k < 16; ++k) {
    EXPECT_NEAR(f[3 * k], 0.2, 1e-6);
    EXPECT_NEAR(f[3 * k + 1], 0.5, 1e-6);
    EXPECT_NEAR(f[3 * k + 2], 0.7, 1e-6);
  }
  EXPECT_EQ(f[48], 1.0);
  EXPECT_EQ(f.tail(15).sum(), 0.0);
}

TEST(BaselineExtractor, BrightnessShift) {
  Rng rng(2);
  const Image img = random_image(32, 32, rng);
  Image brighter = img;
  for (auto& c : brighter.rgb) c.array() += 0.1f;
  const Feature a = baseline_features(img), b = baseline_features(brighter);
  EXPECT_LT((b.head(48) - a.head(48)).array().abs().matrix().maxCoeff() - 0.1, 1e-5);
  EXPECT_GT((b.head(48) - a.head(48)).minCoeff(), 0.1 - 1e-5);
  EXPECT_EQ(a.tail(16), b.tail(16));
  EXPECT_EQ(baseline_features(img), a);
}

TEST(FeatureGaussian, IdenticalSamples) {
  Feature x(3);
  x << 1.0, -2.0, 0.5;
  const auto g = fit_feature_gaussian(std::vector<Feature>(5, x));
  EXPECT_EQ(g.mean, x);
  EXPECT_TRUE(g.covariance.isApprox(g.lambda * Eigen::MatrixXd::Identity(3, 3)));
  EXPECT_THROW(fit_feature_gaussian(std::vector<Feature>(3, x)), InvalidArgument);
}

TEST(FeatureGaussian, RecoversKnownGaussian) {
  Rng rng(3);
  const int dim = 6;
  Eigen::MatrixXd A = Eigen::MatrixXd::Random(dim, dim);
  const Eigen::MatrixXd cov = A * A.transpose() + Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd mean(dim);
  mean << 1, 2, 3, -1, 0, 0.5;
  const std::size_t n = 5000;
  const auto g = fit_feature_gaussian(gaussian_samples(mean, cov, n, rng));
  for (int i = 0; i < dim; ++i) EXPECT_NEAR(g.mean[i], mean[i], 3.0 * std::sqrt(cov(i, i) / n));
  EXPECT_LE((g.covariance - g.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(g.lambda, 1e-3 * (g.covariance.trace() - dim * g.lambda) / dim, 1e-12);
}

TEST(Nllf, DirectFormula) {
  const auto g = FeatureGaussian::from_moments(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  EXPECT_EQ(nllf({Feature::Zero(3)}, g), 0.0);
  Feature x(3);
  x << 2.0, 0.0, 0.0;
  EXPECT_EQ(nllf({x}, g), 4.0);
  Feature y(3);
  y << 0.0, 1.0, 1.0;
  EXPECT_EQ(nllf({x, y}, g), 3.0);
  EXPECT_THROW(nllf(std::vector<Feature>{}, g), InvalidArgument);
}

TEST(Nllf, SamplesFromFitGiveDimension) {
  Rng rng(4);
  const int dim = 16;
  Eigen::MatrixXd A = Eigen::MatrixXd::Random(dim, dim);
  const auto g = fit_feature_gaussian(
      gaussian_samples(Eigen::VectorXd::Zero(dim), A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(dim, dim), 2000, rng));
  const double v = nllf(gaussian_samples(g.mean, g.covariance, 10000, rng), g);
  EXPECT_NEAR(v, dim, 0.05 * dim);
}

TEST(Nllf, LinearReparameterisationInvariance) {
  Rng rng(5);
  const int dim = 5;
  Eigen::MatrixXd B = Eigen::MatrixXd::Random(dim, dim);
  const auto g = FeatureGaussian::from_moments(Eigen::VectorXd::Random(dim),
                                               B * B.transpose() + Eigen::MatrixXd::Identity(dim, dim));
  Eigen::MatrixXd T = Eigen::MatrixXd::Random(dim, dim) + 3.0 * Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::VectorXd shift = Eigen::VectorXd::Random(dim);
  const auto h = FeatureGaussian::from_moments(T * g.mean + shift, T * g.covariance * T.transpose());
  std::vector<Feature> xs, ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(Eigen::VectorXd::Random(dim) * 3.0);
    ys.push_back(T * xs.back() + shift);
  }
  const double a = nllf(xs, g), b = nllf(ys, h);
  EXPECT_GE(a, 0.0);
  EXPECT_NEAR(a, b, 1e-8 * std::max(1.0, a));
}

TEST(Crops, DeterministicAndSized) {
  RgbdPanorama p(32, 16);
  Rng fill(1);
  for (auto& c : p.rgb) c = Color(fill.uniform(), fill.uniform(), fill.uniform()).cast<float>();
  Rng a(9), b(9);
  const auto ca = random_perspective_crops(p, 5, 12, a);
  const auto cb = random_perspective_crops(p, 5, 12, b);
  ASSERT_EQ(ca.size(), 5u);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    EXPECT_EQ(ca[i].width, 12);
    EXPECT_EQ(ca[i].rgb, cb[i].rgb);
  }
  for (int i = 0; i < 1000; ++i) EXPECT_LE(std::abs(random_view_direction(a).z()), std::sin(M_PI / 4) + 1e-12);
}

TEST(Report, ScalesNllfAndCapsPsnr) {
  const auto path = std::filesystem::temp_directory_path() / "omnisynth_report.csv";
  write_report(path, {{"room", "ours", std::numeric_limits<double>::infinity(), 2500.0}});
  std::ifstream is(path);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "scene,method,psnr_db,nllf");
  EXPECT_EQ(row, "room,ours,99,2.5");
  std::filesystem::remove(path);
}
