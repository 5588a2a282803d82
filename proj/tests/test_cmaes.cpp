#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "alpsim/cmaes.hpp"

using namespace alpsim;
using namespace alpsim::cmaes;

namespace {

double sphere_neg(const Eigen::VectorXd& x) { return -x.squaredNorm(); }

double rosenbrock(const Eigen::VectorXd& x) {
  double f = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    f += 100.0 * a * a + b * b;
  }
  return f;
}

}  // namespace

TEST_CASE("init: default population size 4 + floor(3 ln n)") {
  CHECK(init(Eigen::VectorXd::Zero(10), 1.0, 0, 1).lambda == 10);
  CHECK(init(Eigen::VectorXd::Zero(1), 1.0, 0, 1).lambda == 4);
  CHECK(init(Eigen::VectorXd::Zero(5), 1.0, 0, 1).lambda == 8);
  CHECK(init(Eigen::VectorXd::Zero(3), 1.0, 6, 1).lambda == 6);
}

TEST_CASE("init: rejects invalid inputs") {
  CHECK_THROWS_AS(init(Eigen::VectorXd::Zero(3), 0.0, 0, 1),
                  std::invalid_argument);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(init(bad, 1.0, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(init(Eigen::VectorXd{}, 1.0, 0, 1), std::invalid_argument);
}

TEST_CASE("ask: identical populations for identical seeds") {
  auto a = init(Eigen::VectorXd::Ones(4), 0.7, 0, 99);
  auto b = init(Eigen::VectorXd::Ones(4), 0.7, 0, 99);
  const auto ca = ask(a);
  const auto cb = ask(b);
  REQUIRE(ca.size() == cb.size());
  for (std::size_t i = 0; i < ca.size(); ++i) CHECK(ca[i] == cb[i]);
  auto c = init(Eigen::VectorXd::Ones(4), 0.7, 0, 100);
  CHECK(ask(c)[0] != ca[0]);
}

TEST_CASE("ask: candidates collapse onto the mean as sigma goes to zero") {
  Eigen::VectorXd mean(3);
  mean << 1.0, -2.0, 0.5;
  auto s = init(mean, 1e-12, 0, 7);
  for (const auto& x : ask(s)) CHECK((x - mean).norm() < 1e-9);
}

// Statistical oracle: with C = I the sample mean of many candidates must lie
// within 3 standard errors of m, and the sample covariance within 10% of
// sigma^2 I.
TEST_CASE("ask: sample statistics match the search distribution") {
  Eigen::VectorXd mean(3);
  mean << 0.5, -1.0, 2.0;
  const double sigma = 0.8;
  auto s = init(mean, sigma, 10, 42);
  const int n_samples = 100000;
  std::vector<Eigen::VectorXd> samples;
  samples.reserve(n_samples);
  while (static_cast<int>(samples.size()) < n_samples) {
    for (auto& x : ask(s)) {
      samples.push_back(std::move(x));
      if (static_cast<int>(samples.size()) == n_samples) break;
    }
  }
  Eigen::VectorXd sample_mean = Eigen::VectorXd::Zero(3);
  for (const auto& x : samples) sample_mean += x / n_samples;
  const double se = sigma / std::sqrt(static_cast<double>(n_samples));
  for (int j = 0; j < 3; ++j)
    CHECK(std::fabs(sample_mean[j] - mean[j]) < 3.0 * se);

  Eigen::MatrixXd sample_cov = Eigen::MatrixXd::Zero(3, 3);
  for (const auto& x : samples) {
    const Eigen::VectorXd d = x - sample_mean;
    sample_cov += d * d.transpose() / (n_samples - 1);
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double expected = r == c ? sigma * sigma : 0.0;
      CHECK(std::fabs(sample_cov(r, c) - expected) < 0.1 * sigma * sigma);
    }
  }
}

TEST_CASE("tell: identical candidates leave the mean unchanged") {
  Eigen::VectorXd mean(3);
  mean << 1.0, 2.0, 3.0;
  auto s = init(mean, 0.5, 6, 5);
  std::vector<Eigen::VectorXd> candidates(6, mean);
  std::vector<double> fitnesses(6, 4.2);
  tell(s, candidates, fitnesses);
  CHECK((s.mean - mean).norm() < 1e-12);
}

TEST_CASE("tell: non-finite fitnesses are discarded, all-bad fails") {
  auto s = init(Eigen::VectorXd::Zero(2), 0.5, 6, 5);
  auto candidates = ask(s);
  std::vector<double> fitnesses(6, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(tell(s, candidates, fitnesses), std::runtime_error);
  fitnesses[2] = 1.0;
  fitnesses[4] = 3.0;
  CHECK_NOTHROW(tell(s, candidates, fitnesses));
  CHECK(s.best_f == 3.0);
  CHECK(s.best_x == candidates[4]);
}

// Convergence-trend oracle: on the negated sphere the mean norm shrinks in
// expectation across seeds.
TEST_CASE("tell: mean norm decreases on the sphere over 20 seeds") {
  double initial = 0.0, final_norm = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    auto s = init(Eigen::VectorXd::Ones(4), 0.3, 0, 1000 + seed);
    initial += s.mean.norm() / 20.0;
    for (int gen = 0; gen < 30; ++gen) {
      const auto candidates = ask(s);
      std::vector<double> fitnesses;
      for (const auto& x : candidates) fitnesses.push_back(sphere_neg(x));
      tell(s, candidates, fitnesses);
    }
    final_norm += s.mean.norm() / 20.0;
  }
  CHECK(final_norm < 0.5 * initial);
}

TEST_CASE("incumbent fitness is monotone non-decreasing") {
  auto s = init(Eigen::VectorXd::Ones(5), 0.5, 0, 31);
  double previous = -std::numeric_limits<double>::infinity();
  for (int gen = 0; gen < 50; ++gen) {
    const auto candidates = ask(s);
    std::vector<double> fitnesses;
    for (const auto& x : candidates) fitnesses.push_back(sphere_neg(x));
    tell(s, candidates, fitnesses);
    CHECK(s.best_f >= previous);
    previous = s.best_f;
  }
}

TEST_CASE("covariance stays symmetric positive definite") {
  auto s = init(Eigen::VectorXd::Ones(4), 0.5, 0, 77);
  for (int gen = 0; gen < 500; ++gen) {
    const auto candidates = ask(s);
    std::vector<double> fitnesses;
    for (const auto& x : candidates)
      fitnesses.push_back(-x.squaredNorm() + std::sin(x.sum()));
    tell(s, candidates, fitnesses);
    CHECK(s.min_eigenvalue > 0.0);
    CHECK((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fixed seed gives a bit-reproducible trajectory") {
  auto run = [](std::uint64_t seed) {
    auto s = init(Eigen::VectorXd::Ones(3), 0.5, 0, seed);
    std::vector<double> trace;
    for (int gen = 0; gen < 25; ++gen) {
      const auto candidates = ask(s);
      std::vector<double> fitnesses;
      for (const auto& x : candidates) fitnesses.push_back(sphere_neg(x));
      tell(s, candidates, fitnesses);
      trace.push_back(s.mean.sum());
      trace.push_back(s.sigma);
      trace.push_back(s.best_f);
    }
    return trace;
  };
  CHECK(run(11) == run(11));
  CHECK(run(11) != run(12));
}

TEST_CASE("adding a constant to the objective changes nothing but best_f") {
  auto run = [](double offset) {
    auto s = init(Eigen::VectorXd::Ones(3), 0.5, 0, 5);
    std::vector<Eigen::VectorXd> means;
    for (int gen = 0; gen < 20; ++gen) {
      const auto candidates = ask(s);
      std::vector<double> fitnesses;
      for (const auto& x : candidates)
        fitnesses.push_back(sphere_neg(x) + offset);
      tell(s, candidates, fitnesses);
      means.push_back(s.mean);
    }
    return means;
  };
  const auto base = run(0.0);
  const auto shifted = run(42.0);
  REQUIRE(base.size() == shifted.size());
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(base[i] == shifted[i]);
}

TEST_CASE("optimize: single-generation budget returns that generation's best") {
  auto s_probe = init(Eigen::VectorXd::Ones(3), 0.5, 0, 21);
  const auto result =
      optimize(sphere_neg, Eigen::VectorXd::Ones(3), 0.5, s_probe.lambda, 21);
  CHECK(result.evals_used == s_probe.lambda);
  CHECK(result.generations == 1);
  // Reproduce the single generation by hand.
  auto s = init(Eigen::VectorXd::Ones(3), 0.5, 0, 21);
  const auto candidates = ask(s);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& x : candidates) best = std::max(best, sphere_neg(x));
  CHECK(result.best_f == best);
}

TEST_CASE("optimize: rejects a budget below the population size") {
  CHECK_THROWS_AS(optimize(sphere_neg, Eigen::VectorXd::Ones(3), 0.5, 3, 1),
                  std::invalid_argument);
}

TEST_CASE("optimize: stagnation stop fires on a constant objective") {
  const auto result = optimize([](const Eigen::VectorXd&) { return 1.0; },
                               Eigen::VectorXd::Ones(3), 0.5, 100000, 3);
  // First generation sets the incumbent; 20 stale generations follow.
  CHECK(result.generations <= 25);
}

TEST_CASE("optimize: sphere n=10 reaches 1e-8") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto result =
        optimize(sphere_neg, Eigen::VectorXd::Ones(10), 0.5, 5000, seed);
    CHECK(-result.best_f < 1e-8);
  }
}

TEST_CASE("optimize: rosenbrock n=5 reaches 1e-6") {
  int solved = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    OptimizeOptions options;
    options.stagnation_patience = 0;
    const auto result = optimize(
        [](const Eigen::VectorXd& x) { return -rosenbrock(x); },
        Eigen::VectorXd::Zero(5), 0.5, 50000, seed, options);
    if (-result.best_f < 1e-6) ++solved;
  }
  CHECK(solved >= 2);
}
