#include "veml/gromov_wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "veml/coreset.hpp"
#include "veml/error.hpp"

namespace veml {

namespace {

constexpr int kAnnealStages = 5;
constexpr int kAnnealIters = 20;

double median_offdiagonal(const std::vector<double>& c1, std::size_t n1, const std::vector<double>& c2,
                          std::size_t n2) {
  std::vector<double> all;
  all.reserve(n1 * n1 + n2 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = i + 1; j < n1; ++j) all.push_back(c1[i * n1 + j]);
  for (std::size_t i = 0; i < n2; ++i)
    for (std::size_t j = i + 1; j < n2; ++j) all.push_back(c2[i * n2 + j]);
  if (all.empty()) return 0.0;
  auto mid = all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2);
  std::nth_element(all.begin(), mid, all.end());
  return *mid;
}

// Monotone (north-west corner) coupling between the two spaces with points
// ordered by eccentricity; ties keep index order.
std::vector<double> eccentricity_coupling(const std::vector<double>& c1, std::size_t n1,
                                          const std::vector<double>& c2, std::size_t n2) {
  auto order = [](const std::vector<double>& c, std::size_t n) {
    std::vector<double> ecc(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) ecc[i] += c[i * n + k];
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ecc[a] < ecc[b]; });
    return idx;
  };
  const auto o1 = order(c1, n1);
  const auto o2 = order(c2, n2);
  std::vector<double> t(n1 * n2, 0.0);
  // Mass in units of 1/(n1*n2): row i holds n2 units, column j holds n1.
  std::size_t i = 0, j = 0;
  std::size_t row_left = n2, col_left = n1;
  const double unit = 1.0 / static_cast<double>(n1 * n2);
  while (i < n1 && j < n2) {
    const std::size_t m = std::min(row_left, col_left);
    t[o1[i] * n2 + o2[j]] += static_cast<double>(m) * unit;
    row_left -= m;
    col_left -= m;
    if (row_left == 0) {
      ++i;
      row_left = n2;
    }
    if (col_left == 0) {
      ++j;
      col_left = n1;
    }
  }
  return t;
}

// Linearized cost 2 * (constC - C1 T (2 C2)^T) of the square-loss GW.
void linearized_cost(const std::vector<double>& const_c, const std::vector<double>& c1, std::size_t n1,
                     const std::vector<double>& c2, std::size_t n2, const std::vector<double>& t,
                     std::vector<double>& tmp, std::vector<double>& out) {
  // tmp = C1 * T   (n1 x n2)
  std::fill(tmp.begin(), tmp.end(), 0.0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t k = 0; k < n1; ++k) {
      const double a = c1[i * n1 + k];
      if (a == 0.0) continue;
      const double* trow = &t[k * n2];
      double* orow = &tmp[i * n2];
      for (std::size_t j = 0; j < n2; ++j) orow[j] += a * trow[j];
    }
  // out = 2 * (constC - 2 * tmp * C2^T); C2 is symmetric.
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      double acc = 0.0;
      const double* trow = &tmp[i * n2];
      const double* crow = &c2[j * n2];
      for (std::size_t l = 0; l < n2; ++l) acc += trow[l] * crow[l];
      out[i * n2 + j] = 2.0 * (const_c[i * n2 + j] - 2.0 * acc);
    }
}

// Sinkhorn with log potentials f, g and scalings u, v on the kernel
// K = exp((f + g - C) / eps); scalings are absorbed into the potentials when
// they leave [e^-kAbsorb, e^kAbsorb]. Potentials are warm-started across
// outer steps, with epsilon scaling on a cold start. Writes the coupling
// into t.
void sinkhorn_log(const std::vector<double>& cost, std::size_t n1, std::size_t n2, double epsilon,
                  std::size_t max_iters, bool cold, std::vector<double>& f, std::vector<double>& g,
                  std::vector<double>& t) {
  constexpr double kAbsorb = 30.0;
  constexpr double kInnerTol = 1e-10;
  const double p = 1.0 / static_cast<double>(n1);
  const double q = 1.0 / static_cast<double>(n2);

  double cmax = 0.0;
  for (double c : cost) cmax = std::max(cmax, std::abs(c));
  double eps = epsilon;
  if (cold) {
    std::fill(f.begin(), f.end(), 0.0);
    std::fill(g.begin(), g.end(), 0.0);
    eps = std::max(epsilon, cmax / 8.0);
  }

  std::vector<double> kernel(n1 * n2), u(n1, 1.0), v(n2, 1.0), ktu(n2);
  auto rebuild = [&](double e) {
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t j = 0; j < n2; ++j) kernel[i * n2 + j] = std::exp((f[i] + g[j] - cost[i * n2 + j]) / e);
  };
  // Exact log-domain half steps. Used after absorption so that no row or
  // column of the kernel is all zeros.
  std::vector<double> buf(std::max(n1, n2));
  auto log_f = [&](double e) {
    for (std::size_t i = 0; i < n1; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n2; ++j) mx = std::max(mx, buf[j] = (g[j] - cost[i * n2 + j]) / e);
      double s = 0.0;
      for (std::size_t j = 0; j < n2; ++j) s += std::exp(buf[j] - mx);
      f[i] = e * (std::log(p) - mx - std::log(s));
    }
  };
  auto log_g = [&](double e) {
    for (std::size_t j = 0; j < n2; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n1; ++i) mx = std::max(mx, buf[i] = (f[i] - cost[i * n2 + j]) / e);
      double s = 0.0;
      for (std::size_t i = 0; i < n1; ++i) s += std::exp(buf[i] - mx);
      g[j] = e * (std::log(q) - mx - std::log(s));
    }
  };
  auto absorb = [&](double e) {
    for (std::size_t i = 0; i < n1; ++i) f[i] += e * std::log(u[i]);
    for (std::size_t j = 0; j < n2; ++j) g[j] += e * std::log(v[j]);
    std::fill(u.begin(), u.end(), 1.0);
    std::fill(v.begin(), v.end(), 1.0);
    log_f(e);
    log_g(e);
    rebuild(e);
  };

  while (true) {
    const bool final_stage = eps <= epsilon;
    log_f(eps);
    log_g(eps);
    rebuild(eps);
    for (std::size_t it = 0; it < max_iters; ++it) {
      for (std::size_t i = 0; i < n1; ++i) {
        double s = 0.0;
        const double* row = &kernel[i * n2];
        for (std::size_t j = 0; j < n2; ++j) s += row[j] * v[j];
        u[i] = p / s;
      }
      std::fill(ktu.begin(), ktu.end(), 0.0);
      for (std::size_t i = 0; i < n1; ++i) {
        const double* row = &kernel[i * n2];
        for (std::size_t j = 0; j < n2; ++j) ktu[j] += row[j] * u[i];
      }
      for (std::size_t j = 0; j < n2; ++j) v[j] = q / ktu[j];

      bool extreme = false;
      for (double x : u) extreme |= !(std::abs(std::log(x)) < kAbsorb);
      for (double x : v) extreme |= !(std::abs(std::log(x)) < kAbsorb);
      if (extreme) absorb(eps);

      if (it % 5 == 4 || it + 1 == max_iters) {
        // Row-marginal L1 error; columns are exact after the v update.
        double err = 0.0;
        for (std::size_t i = 0; i < n1; ++i) {
          double s = 0.0;
          const double* row = &kernel[i * n2];
          for (std::size_t j = 0; j < n2; ++j) s += row[j] * v[j];
          err += std::abs(u[i] * s - p);
        }
        if (err < (final_stage ? kInnerTol : 1e-6)) break;
      }
    }
    for (std::size_t i = 0; i < n1; ++i) f[i] += eps * std::log(u[i]);
    for (std::size_t j = 0; j < n2; ++j) g[j] += eps * std::log(v[j]);
    std::fill(u.begin(), u.end(), 1.0);
    std::fill(v.begin(), v.end(), 1.0);
    if (final_stage) break;
    eps = std::max(epsilon, eps * 0.5);
  }

  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) t[i * n2 + j] = std::exp((f[i] + g[j] - cost[i * n2 + j]) / epsilon);
}

}  // namespace

std::string GwResult::diagnostics() const {
  std::ostringstream os;
  os << "iterations=" << iterations << " converged=" << (converged ? "true" : "false")
     << " last_delta=" << last_delta << " epsilon=" << epsilon << " objective=" << objective;
  if (!delta_history.empty()) {
    os << " recent_deltas=[";
    const std::size_t from = delta_history.size() > 5 ? delta_history.size() - 5 : 0;
    for (std::size_t i = from; i < delta_history.size(); ++i) os << (i > from ? "," : "") << delta_history[i];
    os << "]";
  }
  return os.str();
}

std::vector<double> intra_distances(const EmbeddingMatrix& points) {
  const std::size_t n = points.rows;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = euclidean_distance(points.row(i), points.row(j));
    }
  return d;
}

double gw_objective(const std::vector<double>& c1, std::size_t n1, const std::vector<double>& c2,
                    std::size_t n2, const std::vector<double>& coupling) {
  double tmax = 0.0;
  for (double v : coupling) tmax = std::max(tmax, v);
  const double floor = tmax * 1e-18;
  std::vector<std::pair<std::size_t, std::size_t>> support;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      if (coupling[i * n2 + j] > floor) support.emplace_back(i, j);

  // Sparse couplings: direct sum of squares, no cancellation.
  if (support.size() * support.size() <= (std::size_t{1} << 22)) {
    double total = 0.0;
    for (const auto& [i, j] : support) {
      const double tij = coupling[i * n2 + j];
      double inner = 0.0;
      for (const auto& [k, l] : support) {
        const double diff = c1[i * n1 + k] - c2[j * n2 + l];
        inner += diff * diff * coupling[k * n2 + l];
      }
      total += tij * inner;
    }
    return total;
  }

  // Dense: expand the square with the coupling's own marginals,
  //   sum_ij T_ij (sum_k C1_ik^2 r_k + sum_l C2_jl^2 c_l - 2 (C1 T C2)_ij).
  std::vector<double> r(n1, 0.0), c(n2, 0.0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      r[i] += coupling[i * n2 + j];
      c[j] += coupling[i * n2 + j];
    }
  std::vector<double> a(n1, 0.0), b(n2, 0.0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t k = 0; k < n1; ++k) a[i] += c1[i * n1 + k] * c1[i * n1 + k] * r[k];
  for (std::size_t j = 0; j < n2; ++j)
    for (std::size_t l = 0; l < n2; ++l) b[j] += c2[j * n2 + l] * c2[j * n2 + l] * c[l];
  std::vector<double> tmp(n1 * n2, 0.0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t k = 0; k < n1; ++k) {
      const double w = c1[i * n1 + k];
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < n2; ++j) tmp[i * n2 + j] += w * coupling[k * n2 + j];
    }
  double total = 0.0;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      double cross = 0.0;
      for (std::size_t l = 0; l < n2; ++l) cross += tmp[i * n2 + l] * c2[l * n2 + j];
      total += coupling[i * n2 + j] * (a[i] + b[j] - 2.0 * cross);
    }
  return total;
}

GwResult gw_solve(const std::vector<double>& c1, std::size_t n1, const std::vector<double>& c2,
                  std::size_t n2, const GwParams& params) {
  if (n1 == 0 || n2 == 0) fail(ErrorCode::invalid_argument, "gw: empty space");
  if (n1 > kGwMaxPoints || n2 > kGwMaxPoints) fail(ErrorCode::too_large, "gw: at most 256 points per side");
  if (c1.size() != n1 * n1 || c2.size() != n2 * n2) fail(ErrorCode::dimension_mismatch, "gw: distance matrix shape");
  if (params.epsilon < 0 || params.max_iters == 0 || params.tolerance <= 0 || params.inner_sinkhorn_iters == 0) {
    fail(ErrorCode::invalid_argument, "gw: parameters must be positive");
  }
  for (double v : c1)
    if (!std::isfinite(v)) fail(ErrorCode::non_finite, "gw: non-finite distance");
  for (double v : c2)
    if (!std::isfinite(v)) fail(ErrorCode::non_finite, "gw: non-finite distance");

  GwResult res;
  res.rows = n1;
  res.cols = n2;
  if (params.epsilon > 0) {
    res.epsilon = params.epsilon;
  } else {
    const double med = median_offdiagonal(c1, n1, c2, n2);
    res.epsilon = med > 0 ? 5e-3 * med * med : 5e-3;
  }

  // constC_ij = sum_k C1_ik^2 p_k + sum_l C2_jl^2 q_l
  std::vector<double> a(n1, 0.0), b(n2, 0.0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t k = 0; k < n1; ++k) a[i] += c1[i * n1 + k] * c1[i * n1 + k] / static_cast<double>(n1);
  for (std::size_t j = 0; j < n2; ++j)
    for (std::size_t l = 0; l < n2; ++l) b[j] += c2[j * n2 + l] * c2[j * n2 + l] / static_cast<double>(n2);
  std::vector<double> const_c(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) const_c[i * n2 + j] = a[i] + b[j];

  std::vector<double> t = eccentricity_coupling(c1, n1, c2, n2);
  std::vector<double> next(n1 * n2), cost(n1 * n2), tmp(n1 * n2);
  std::vector<double> f(n1, 0.0), g(n2, 0.0);

  // Every iterate is a feasible coupling, so each one bounds the distance
  // from above; keep the lowest.
  std::vector<double> best = t;
  double best_obj = gw_objective(c1, n1, c2, n2, t);
  auto consider = [&](const std::vector<double>& cand) {
    const double obj = gw_objective(c1, n1, c2, n2, cand);
    if (obj < best_obj) {
      best_obj = obj;
      best = cand;
    }
  };

  // One mirror-descent step at the given epsilon; returns the coupling change.
  auto step = [&](double eps, bool cold) {
    linearized_cost(const_c, c1, n1, c2, n2, t, tmp, cost);
    sinkhorn_log(cost, n1, n2, eps, params.inner_sinkhorn_iters, cold, f, g, next);
    double delta = 0.0;
    for (std::size_t x = 0; x < t.size(); ++x) {
      const double d = next[x] - t[x];
      delta += d * d;
    }
    t.swap(next);
    consider(t);
    return std::sqrt(delta);
  };

  for (std::size_t it = 0; it < params.max_iters; ++it) {
    const double delta = step(res.epsilon, it == 0);
    res.iterations = it + 1;
    res.last_delta = delta;
    res.delta_history.push_back(delta);
    if (delta < params.tolerance) {
      res.converged = true;
      break;
    }
  }

  // Anneal toward the unregularized problem to sharpen the coupling.
  if (res.converged) {
    double eps = res.epsilon;
    for (int stage = 0; stage < kAnnealStages; ++stage) {
      eps *= 0.25;
      for (int it = 0; it < kAnnealIters; ++it) {
        if (step(eps, false) < params.tolerance) break;
      }
    }
  }

  res.objective = std::max(0.0, best_obj);
  res.distance = std::sqrt(res.objective);
  res.coupling = std::move(best);
  return res;
}

GwResult gw_solve(const CoreSet& a, const CoreSet& b, const GwParams& params) {
  const auto c1 = intra_distances(a.center_vectors);
  const auto c2 = intra_distances(b.center_vectors);
  return gw_solve(c1, a.center_vectors.rows, c2, b.center_vectors.rows, params);
}

double gw_distance(const CoreSet& a, const CoreSet& b, const GwParams& params) {
  const auto res = gw_solve(a, b, params);
  if (!res.converged) fail(ErrorCode::non_convergence, "gw did not converge: " + res.diagnostics());
  return res.distance;
}

}  // namespace veml
