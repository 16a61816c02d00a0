#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "bosh/errors.hpp"
#include "bosh/hgp_model.hpp"

using namespace bosh;

namespace {

Point p1(double v) { return Point::Constant(1, v); }

struct Dataset {
  std::vector<Observation> obs;
  HGPParams params;
};

Dataset random_dataset(int n, int d, int realizations, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n01;
  Dataset ds;
  ds.params.lengthscales.assign(d, 0.0);
  for (double& l : ds.params.lengthscales) l = 0.15 + 0.4 * u(rng);
  ds.params.upper_variance = 0.5 + u(rng);
  ds.params.lower_variance = 0.05 + 0.5 * u(rng);
  ds.params.noise = 0.005 + 0.05 * u(rng);
  for (int i = 0; i < n; ++i) {
    Point x(d);
    for (int j = 0; j < d; ++j) x(j) = u(rng);
    ds.obs.push_back({x, RealizationId::member(static_cast<std::uint32_t>(i % realizations)), n01(rng)});
  }
  return ds;
}

oracle::DenseHgp dense_of(const Dataset& ds) {
  std::vector<oracle::AugPoint> train;
  Eigen::VectorXd y(static_cast<Eigen::Index>(ds.obs.size()));
  for (std::size_t i = 0; i < ds.obs.size(); ++i) {
    train.push_back({ds.obs[i].x, static_cast<int>(ds.obs[i].s.index())});
    y(static_cast<Eigen::Index>(i)) = ds.obs[i].y;
  }
  const Eigen::VectorXd ls = Eigen::Map<const Eigen::VectorXd>(ds.params.lengthscales.data(),
                                                               static_cast<Eigen::Index>(ds.params.dim()));
  return {train, y, ls, ds.params.upper_variance, ds.params.lower_variance, ds.params.noise};
}

int oracle_tag(RealizationId s) { return s.is_member() ? static_cast<int>(s.index()) : 1000 + static_cast<int>(s.index()); }

std::vector<Observation> simulate_hgp(int n, int realizations, const HGPParams& truth, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n01;
  std::vector<Observation> obs;
  for (int i = 0; i < n; ++i) obs.push_back({p1(u(rng)), RealizationId::member(i % realizations), 0.0});
  const Eigen::MatrixXd k = hgp_kernel_matrix(obs, truth);
  const Eigen::MatrixXd l = k.llt().matrixL();
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = n01(rng);
  const Eigen::VectorXd y = l * z;
  for (int i = 0; i < n; ++i) obs[i].y = y(i);
  return obs;
}

}  // namespace

TEST_CASE("realization ids and the evaluation pool") {
  EvaluationPool pool;
  CHECK(pool.add(42) == RealizationId::member(0));
  CHECK(pool.add(7) == RealizationId::member(1));
  CHECK(pool.size() == 2);
  CHECK(pool.handle(RealizationId::member(1)) == 7);
  CHECK(pool.contains(RealizationId::member(1)));
  CHECK_FALSE(pool.contains(RealizationId::fresh()));
  CHECK_FALSE(pool.contains(RealizationId::member(2)));
  CHECK_THROWS_AS(pool.handle(RealizationId::fresh()), ContractViolation);
  CHECK(RealizationId::fresh(0) != RealizationId::fresh(1));
  CHECK(RealizationId::fresh() != RealizationId::member(0));
  CHECK(RealizationId::member(3).to_string() == "3");
  CHECK(RealizationId::latent().to_string() == "g");
}

TEST_CASE("hgp_cov identities") {
  HGPParams p{{0.3}, 1.0, 0.25, 0.01};
  const auto s0 = RealizationId::member(0);
  const auto s1 = RealizationId::member(1);
  CHECK(hgp_cov(p1(0.4), s0, p1(0.4), s0, p) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(hgp_cov(p1(0.4), s0, p1(0.4), s1, p) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(hgp_cov(p1(0.4), s0, p1(0.4), RealizationId::latent(), p) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(hgp_cov(p1(0.4), RealizationId::latent(), p1(0.4), RealizationId::latent(), p) == 1.0);
  CHECK(hgp_cov(p1(0.4), RealizationId::fresh(0), p1(0.4), RealizationId::fresh(1), p) == 1.0);
  CHECK(hgp_cov(p1(0.4), RealizationId::fresh(0), p1(0.4), RealizationId::fresh(0), p) == 1.25);
}

TEST_CASE("single-realization data reduces to a plain GP") {
  Rng rng(2);
  Dataset ds = random_dataset(25, 2, 1, rng);
  const HGPPosterior post = fit_hgp(ds.obs, ds.params);
  std::vector<Point> xs;
  Eigen::VectorXd y(25);
  for (int i = 0; i < 25; ++i) {
    xs.push_back(ds.obs[i].x);
    y(i) = ds.obs[i].y;
  }
  const Eigen::VectorXd ls = Eigen::Map<const Eigen::VectorXd>(ds.params.lengthscales.data(), 2);
  // k_f = (lower/upper) k_g because the lengthscales are shared.
  const oracle::DenseGp gp(xs, y, ls, ds.params.upper_variance + ds.params.lower_variance, ds.params.noise);
  for (int i = 0; i < 10; ++i) {
    const Point q = Point::Random(2).cwiseAbs();
    const BivariateBelief b = post.joint_predict(q, RealizationId::member(0));
    CHECK(std::abs(b.mean_y - gp.mean(q)) < 1e-10);
    CHECK(std::abs(b.var_y - (gp.variance(q) + ds.params.noise)) < 1e-10);
  }
}

TEST_CASE("joint_predict matches the dense oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 6; ++trial) {
    const int d = 1 + trial % 2;
    const Dataset ds = random_dataset(40, d, 2 + trial % 3, rng);
    const HGPPosterior post = fit_hgp(ds.obs, ds.params);
    const oracle::DenseHgp dense = dense_of(ds);
    for (int q = 0; q < 8; ++q) {
      const Point x = (Point::Random(d).array() * 0.5 + 0.5).matrix();
      const RealizationId s = q % 4 == 3 ? RealizationId::fresh() : RealizationId::member(q % 2);
      Eigen::VectorXd mean;
      Eigen::MatrixXd cov;
      dense.joint({{x, oracle_tag(s)}, {x, oracle::kLatent}}, mean, cov);
      const BivariateBelief b = post.joint_predict(x, s);
      CHECK(std::abs(b.mean_y - mean(0)) < 1e-8);
      CHECK(std::abs(b.mean_g - mean(1)) < 1e-8);
      CHECK(std::abs(b.var_y - cov(0, 0)) < 1e-8);
      CHECK(std::abs(b.var_g - cov(1, 1)) < 1e-8);
      CHECK(std::abs(b.corr - cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1))) < 1e-8);
      // The implied 2x2 covariance is PSD.
      CHECK(b.var_y * b.var_g * (1.0 - b.corr * b.corr) >= -1e-10);
      CHECK(std::abs(b.corr) <= 1.0 - 1e-12);
      const Prediction g = post.predict_g(x);
      CHECK(g.mean == doctest::Approx(b.mean_g).epsilon(1e-12));
      CHECK(g.variance == doctest::Approx(b.var_g).epsilon(1e-12));
    }
  }
}

TEST_CASE("prior belief with no observations") {
  const HGPParams p{{0.2}, 1.3, 0.4, 0.05};
  const HGPPosterior prior({}, p);
  const BivariateBelief b = prior.joint_predict(p1(0.5), RealizationId::fresh());
  CHECK(b.mean_y == 0.0);
  CHECK(b.mean_g == 0.0);
  CHECK(b.var_g == doctest::Approx(1.3));
  CHECK(b.var_y == doctest::Approx(1.75));
  CHECK(b.corr == doctest::Approx(std::sqrt(1.3 / 1.75)).epsilon(1e-14));

  // Far from all data the posterior reverts to the same values.
  Rng rng(4);
  const Dataset ds = random_dataset(10, 1, 2, rng);
  HGPParams q = ds.params;
  q.lengthscales = {0.05};
  const HGPPosterior post = fit_hgp(ds.obs, q);
  const BivariateBelief far = post.joint_predict(p1(40.0), RealizationId::member(0));
  CHECK(std::abs(far.mean_y) < 1e-12);
  CHECK(far.corr == doctest::Approx(std::sqrt(q.upper_variance / (q.upper_variance + q.lower_variance + q.noise))));

  const BivariateBelief tight = HGPPosterior({}, HGPParams{{0.2}, 1.0, 1e-12, 1e-12}).joint_predict(p1(0.1), RealizationId::fresh());
  CHECK(tight.corr == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(prior.joint_predict(p1(0.5), RealizationId::latent()), ContractViolation);
}

TEST_CASE("vanishing lower variance makes realizations interchangeable") {
  Rng rng(5);
  Dataset ds = random_dataset(20, 1, 3, rng);
  ds.params.lower_variance = 1e-12;
  const HGPPosterior post = fit_hgp(ds.obs, ds.params);
  for (double x : {0.1, 0.5, 0.77}) {
    const BivariateBelief a = post.joint_predict(p1(x), RealizationId::member(0));
    const BivariateBelief b = post.joint_predict(p1(x), RealizationId::member(2));
    CHECK(std::abs(a.mean_y - b.mean_y) < 1e-6);
    CHECK(std::abs(a.var_y - b.var_y) < 1e-6);
  }
}

TEST_CASE("an unseen realization is never better known than a member") {
  Rng rng(6);
  const Dataset ds = random_dataset(30, 2, 3, rng);
  const HGPPosterior post = fit_hgp(ds.obs, ds.params);
  for (int q = 0; q < 20; ++q) {
    const Point x = (Point::Random(2).array() * 0.5 + 0.5).matrix();
    const double fresh = post.joint_predict(x, RealizationId::fresh()).var_y;
    for (std::uint32_t s = 0; s < 3; ++s)
      CHECK(fresh >= post.joint_predict(x, RealizationId::member(s)).var_y - 1e-8);
  }
}

TEST_CASE("relabeling realizations leaves predict_g unchanged") {
  Rng rng(7);
  const Dataset ds = random_dataset(24, 1, 3, rng);
  Dataset swapped = ds;
  const std::uint32_t perm[] = {2, 0, 1};
  for (Observation& o : swapped.obs) o.s = RealizationId::member(perm[o.s.index()]);
  const HGPPosterior a = fit_hgp(ds.obs, ds.params);
  const HGPPosterior b = fit_hgp(swapped.obs, swapped.params);
  for (double x : {0.05, 0.3, 0.6, 0.95}) {
    CHECK(std::abs(a.predict_g(p1(x)).mean - b.predict_g(p1(x)).mean) < 1e-10);
    CHECK(std::abs(a.predict_g(p1(x)).variance - b.predict_g(p1(x)).variance) < 1e-10);
  }
}

TEST_CASE("batch correlation") {
  Rng rng(8);
  const Dataset ds = random_dataset(30, 2, 3, rng);
  const HGPPosterior post = fit_hgp(ds.obs, ds.params);
  const Point x = Point::Constant(2, 0.4);

  const std::vector<EvaluationPoint> single = {{x, RealizationId::member(1)}};
  CHECK(post.batch_correlation(single)(0, 0) == doctest::Approx(1.0));

  const std::vector<EvaluationPoint> dup = {{x, RealizationId::member(1)}, {x, RealizationId::member(1)}};
  const Eigen::MatrixXd c = post.batch_correlation(dup);
  const double var_y = post.joint_predict(x, RealizationId::member(1)).var_y;
  const double latent = var_y - ds.params.noise;
  CHECK(c(0, 1) == doctest::Approx(latent / (latent + ds.params.noise)).epsilon(1e-10));
  CHECK(c(0, 1) < 1.0);
  CHECK(c.determinant() > 0.0);

  const oracle::DenseHgp dense = dense_of(ds);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<EvaluationPoint> batch;
    std::vector<oracle::AugPoint> q;
    for (int j = 0; j < 3; ++j) {
      const Point xj = (Point::Random(2).array() * 0.5 + 0.5).matrix();
      const RealizationId s = j == 2 ? RealizationId::fresh() : RealizationId::member((trial + j) % 3);
      batch.push_back({xj, s});
      q.push_back({xj, oracle_tag(s)});
    }
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    dense.joint(q, mean, cov);
    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    const Eigen::MatrixXd expected = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd got = post.batch_correlation(batch);
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((got - got.transpose()).norm() == 0.0);
    CHECK((post.batch_covariance(batch) - cov).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("hyperparameter fit: identifiability and collapsed bounds") {
  Rng rng(9);
  const HGPParams truth{{0.2}, 1.0, 0.3, 0.01};
  std::vector<Observation> one = simulate_hgp(12, 1, truth, rng);
  CHECK_THROWS_AS(fit_hgp_hyperparameters(one, HyperparameterBounds{}, 2, rng), IdentifiabilityError);

  const std::vector<Observation> two = simulate_hgp(12, 2, truth, rng);
  HyperparameterBounds b;
  b.lengthscale_lo = b.lengthscale_hi = 0.2;
  b.noise_lo = b.noise_hi = 0.01;
  // Both variances share the variance box, so only a common value can be pinned.
  b.variance_lo = b.variance_hi = 0.3;
  const HGPFit fit = fit_hgp_hyperparameters(two, b, 2, rng);
  CHECK(fit.params.lengthscales[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(fit.params.upper_variance == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(fit.params.lower_variance == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(fit.params.noise == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(fit.log_likelihood == doctest::Approx(hgp_log_marginal_likelihood(two, fit.params)));

  const std::vector<Observation> few = simulate_hgp(4, 2, truth, rng);
  CHECK_THROWS_AS(fit_hgp_hyperparameters(few, HyperparameterBounds{}, 1, rng), ContractViolation);
}

TEST_CASE("simulate-and-refit recovers the variance ratio") {
  const HGPParams truth{{0.15}, 1.0, 0.25, 0.01};
  const double true_ratio = truth.upper_variance / truth.lower_variance;
  int within = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(500 + trial);
    const std::vector<Observation> obs = simulate_hgp(300, 6, truth, rng);
    const HGPFit fit = fit_hgp_hyperparameters(obs, HyperparameterBounds{}, 2, rng);
    const double ratio = fit.params.upper_variance / fit.params.lower_variance;
    if (ratio > true_ratio / 3.0 && ratio < true_ratio * 3.0) ++within;
  }
  CHECK(within >= 14);
}
