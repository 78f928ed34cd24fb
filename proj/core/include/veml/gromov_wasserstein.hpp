#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "veml/embedding_io.hpp"

namespace veml {

struct CoreSet;

inline constexpr std::size_t kGwMaxPoints = 256;

struct GwParams {
  // Entropic regularization. Zero selects the default
  // 5e-3 * (median intra-space distance)^2.
  double epsilon = 0.0;
  std::size_t max_iters = 200;
  double tolerance = 1e-7;  // Frobenius change of the coupling between iterations
  std::size_t inner_sinkhorn_iters = 2000;
};

struct GwResult {
  double distance = 0.0;   // sqrt of the objective
  double objective = 0.0;  // sum_{ijkl} (C1_ik - C2_jl)^2 T_ij T_kl of the returned coupling
  double epsilon = 0.0;    // regularization actually used
  std::size_t iterations = 0;
  bool converged = false;
  double last_delta = 0.0;
  std::vector<double> delta_history;
  std::vector<double> coupling;  // rows x cols, row-major
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::string diagnostics() const;
};

// Square symmetric matrix of Euclidean distances between rows.
std::vector<double> intra_distances(const EmbeddingMatrix& points);

// Exact GW objective of a given coupling.
double gw_objective(const std::vector<double>& c1, std::size_t n1, const std::vector<double>& c2,
                    std::size_t n2, const std::vector<double>& coupling);

// Gromov-Wasserstein between two metric spaces given as distance matrices,
// uniform weights, square loss, solved by entropic mirror descent: each outer
// step solves a log-domain Sinkhorn problem on the linearized cost. The start
// coupling matches points monotonically by eccentricity (mean distance).
// After convergence epsilon is annealed down by 4^5. The result is the
// visited coupling with the lowest exact objective, an upper bound on the
// unregularized distance.
GwResult gw_solve(const std::vector<double>& c1, std::size_t n1, const std::vector<double>& c2,
                  std::size_t n2, const GwParams& params = {});
GwResult gw_solve(const CoreSet& a, const CoreSet& b, const GwParams& params = {});

// Distance between coresets of possibly different embedding dimension.
// Throws non_convergence, with the iterate diagnostics in the message.
double gw_distance(const CoreSet& a, const CoreSet& b, const GwParams& params = {});

}  // namespace veml
