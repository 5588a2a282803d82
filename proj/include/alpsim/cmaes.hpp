#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "alpsim/rng.hpp"

namespace alpsim::cmaes {

// Standard CMA-ES (rank-1 + rank-mu covariance update, cumulative step-size
// adaptation) with the canonical default constants. The public contract
// maximizes the fitness.
struct CmaesState {
  int dim = 0;
  Eigen::VectorXd mean;
  double sigma = 0.0;
  Eigen::MatrixXd cov;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_c;
  int lambda = 0;  // population size
  int mu = 0;      // parents
  Eigen::VectorXd weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0, d_sigma = 0.0, c_c = 0.0, c1 = 0.0, c_mu = 0.0;
  double chi_n = 0.0;
  long long generation = 0;
  Rng rng{0};

  // eigendecomposition caches, refreshed by tell()
  Eigen::MatrixXd cov_sqrt;
  Eigen::MatrixXd cov_inv_sqrt;
  double min_eigenvalue = 0.0;

  // incumbent
  bool has_best = false;
  Eigen::VectorXd best_x;
  double best_f = 0.0;
};

// lambda_pop = 0 selects the default 4 + floor(3 ln n).
CmaesState init(const Eigen::VectorXd& mean, double sigma0, int lambda_pop,
                std::uint64_t seed);

// Samples lambda candidates m + sigma * C^{1/2} N(0, I); advances the
// state's RNG.
std::vector<Eigen::VectorXd> ask(CmaesState& state);

// Ranked update (maximization). Candidates with non-finite fitness are
// discarded; if every candidate is discarded the update fails.
void tell(CmaesState& state, const std::vector<Eigen::VectorXd>& candidates,
          const std::vector<double>& fitnesses);

struct OptimizeResult {
  Eigen::VectorXd best_x;
  double best_f = 0.0;
  long long evals_used = 0;
  long long generations = 0;
};

struct OptimizeOptions {
  int lambda_pop = 0;           // 0 = default
  int stagnation_patience = 20; // generations without incumbent improvement
};

// Ask/tell loop until the evaluation budget or stagnation; returns the
// incumbent. The objective is maximized.
OptimizeResult optimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                        const Eigen::VectorXd& x0, double sigma0,
                        long long max_evals, std::uint64_t seed,
                        const OptimizeOptions& options = {});

}  // namespace alpsim::cmaes
