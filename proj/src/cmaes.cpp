#include "alpsim/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace alpsim::cmaes {

namespace {

void refresh_decomposition(CmaesState& s) {
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.cov);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("covariance eigendecomposition failed");
  Eigen::VectorXd d = eig.eigenvalues();
  s.min_eigenvalue = d.minCoeff();
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = std::max(d[i], 1e-30);
  const Eigen::MatrixXd& b = eig.eigenvectors();
  s.cov_sqrt = b * d.cwiseSqrt().asDiagonal() * b.transpose();
  s.cov_inv_sqrt = b * d.cwiseSqrt().cwiseInverse().asDiagonal() * b.transpose();
}

}  // namespace

CmaesState init(const Eigen::VectorXd& mean, double sigma0, int lambda_pop,
                std::uint64_t seed) {
  const int n = static_cast<int>(mean.size());
  if (n < 1) throw std::invalid_argument("dimension must be >= 1");
  if (sigma0 <= 0.0) throw std::invalid_argument("sigma0 must be positive");
  if (!mean.allFinite()) throw std::invalid_argument("mean must be finite");

  CmaesState s;
  s.dim = n;
  s.mean = mean;
  s.sigma = sigma0;
  s.cov = Eigen::MatrixXd::Identity(n, n);
  s.path_sigma = Eigen::VectorXd::Zero(n);
  s.path_c = Eigen::VectorXd::Zero(n);
  s.lambda = lambda_pop > 0
                 ? lambda_pop
                 : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  if (s.lambda < 2) throw std::invalid_argument("population must be >= 2");
  s.mu = s.lambda / 2;

  s.weights.resize(s.mu);
  for (int i = 0; i < s.mu; ++i)
    s.weights[i] = std::log((s.lambda + 1) / 2.0) - std::log(i + 1.0);
  s.weights /= s.weights.sum();
  s.mu_eff = 1.0 / s.weights.squaredNorm();

  s.c_sigma = (s.mu_eff + 2.0) / (n + s.mu_eff + 5.0);
  s.d_sigma = 1.0 +
              2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (n + 1.0)) - 1.0) +
              s.c_sigma;
  s.c_c = (4.0 + s.mu_eff / n) / (n + 4.0 + 2.0 * s.mu_eff / n);
  s.c1 = 2.0 / ((n + 1.3) * (n + 1.3) + s.mu_eff);
  s.c_mu = std::min(1.0 - s.c1, 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) /
                                    ((n + 2.0) * (n + 2.0) + s.mu_eff));
  s.chi_n = std::sqrt(static_cast<double>(n)) *
            (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  s.rng = Rng(mix_seed(seed, 0xC3A));
  refresh_decomposition(s);
  return s;
}

std::vector<Eigen::VectorXd> ask(CmaesState& s) {
  std::vector<Eigen::VectorXd> candidates;
  candidates.reserve(s.lambda);
  for (int i = 0; i < s.lambda; ++i) {
    Eigen::VectorXd z(s.dim);
    for (int j = 0; j < s.dim; ++j) z[j] = s.rng.normal();
    candidates.push_back(s.mean + s.sigma * (s.cov_sqrt * z));
  }
  return candidates;
}

void tell(CmaesState& s, const std::vector<Eigen::VectorXd>& candidates,
          const std::vector<double>& fitnesses) {
  if (candidates.size() != static_cast<std::size_t>(s.lambda) ||
      fitnesses.size() != candidates.size())
    throw std::invalid_argument("tell expects lambda candidates and fitnesses");

  std::vector<int> order;
  for (int i = 0; i < s.lambda; ++i)
    if (std::isfinite(fitnesses[i])) order.push_back(i);
  if (order.empty())
    throw std::runtime_error("every candidate fitness is non-finite");
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return fitnesses[a] > fitnesses[b];  // maximization
  });

  if (!s.has_best || fitnesses[order.front()] > s.best_f) {
    s.has_best = true;
    s.best_f = fitnesses[order.front()];
    s.best_x = candidates[order.front()];
  }

  const int n_parents = std::min<int>(s.mu, static_cast<int>(order.size()));
  Eigen::VectorXd w = s.weights.head(n_parents);
  w /= w.sum();

  const Eigen::VectorXd mean_old = s.mean;
  Eigen::VectorXd mean_new = Eigen::VectorXd::Zero(s.dim);
  for (int i = 0; i < n_parents; ++i)
    mean_new += w[i] * candidates[order[i]];
  s.mean = mean_new;

  const Eigen::VectorXd shift = (s.mean - mean_old) / s.sigma;

  s.path_sigma = (1.0 - s.c_sigma) * s.path_sigma +
                 std::sqrt(s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff) *
                     (s.cov_inv_sqrt * shift);

  const double ps_norm = s.path_sigma.norm();
  const double expected_decay =
      std::sqrt(1.0 - std::pow(1.0 - s.c_sigma, 2.0 * (s.generation + 1)));
  const bool h_sigma =
      ps_norm / expected_decay < (1.4 + 2.0 / (s.dim + 1.0)) * s.chi_n;

  s.path_c = (1.0 - s.c_c) * s.path_c +
             (h_sigma ? std::sqrt(s.c_c * (2.0 - s.c_c) * s.mu_eff) : 0.0) * shift;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(s.dim, s.dim);
  for (int i = 0; i < n_parents; ++i) {
    const Eigen::VectorXd y = (candidates[order[i]] - mean_old) / s.sigma;
    rank_mu += w[i] * (y * y.transpose());
  }
  const double hs_correction = h_sigma ? 0.0 : s.c_c * (2.0 - s.c_c);
  s.cov = (1.0 - s.c1 - s.c_mu) * s.cov +
          s.c1 * (s.path_c * s.path_c.transpose() + hs_correction * s.cov) +
          s.c_mu * rank_mu;

  s.sigma *= std::exp((s.c_sigma / s.d_sigma) * (ps_norm / s.chi_n - 1.0));
  if (!std::isfinite(s.sigma) || s.sigma <= 0.0)
    throw std::runtime_error("step size left the valid range");

  ++s.generation;
  refresh_decomposition(s);
}

OptimizeResult optimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                        const Eigen::VectorXd& x0, double sigma0,
                        long long max_evals, std::uint64_t seed,
                        const OptimizeOptions& options) {
  CmaesState s = init(x0, sigma0, options.lambda_pop, seed);
  if (max_evals < s.lambda)
    throw std::invalid_argument("max_evals must be >= the population size");

  OptimizeResult result;
  double last_best = -std::numeric_limits<double>::infinity();
  int stale = 0;
  while (result.evals_used + s.lambda <= max_evals) {
    const auto candidates = ask(s);
    std::vector<double> fitnesses(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
      fitnesses[i] = objective(candidates[i]);
    result.evals_used += static_cast<long long>(candidates.size());
    tell(s, candidates, fitnesses);
    ++result.generations;
    if (s.best_f > last_best) {
      last_best = s.best_f;
      stale = 0;
    } else if (options.stagnation_patience > 0 &&
               ++stale >= options.stagnation_patience) {
      break;
    }
  }
  result.best_x = s.best_x;
  result.best_f = s.best_f;
  return result;
}

}  // namespace alpsim::cmaes
