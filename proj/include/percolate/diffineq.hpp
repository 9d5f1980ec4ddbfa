#pragma once
// Finite-volume differential inequalities. One common-random-number sweep per
// (volume, kind, beta, h) measures M, dM/dh and dM/dbeta together with their
// full covariance, so the slack of each inequality gets a delta-method error
// bar that honors the correlations between both sides.
//
//   variant 1 (bond/site):  dM/dbeta <= K (M + e^{-lh}) dM/dh
//   variant 2 (bond):       M <= h dM/dh + M^2 + beta     (M + e^{-lh}) dM/dbeta
//   variant 2 (site):       M <= h dM/dh + M^2 + (e^b - 1)(M + e^{-lh}) dM/dbeta
//
// K is the maximal vertex degree of the underlying patch.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "percolate/engine.hpp"
#include "percolate/oracle.hpp"
#include "percolate/order_param.hpp"
#include "percolate/stats.hpp"

namespace perc {

enum class IneqVariant { bond1, bond2, site1, site2 };

inline const char* variant_name(IneqVariant v) {
  switch (v) {
    case IneqVariant::bond1: return "bond1";
    case IneqVariant::bond2: return "bond2";
    case IneqVariant::site1: return "site1";
    case IneqVariant::site2: return "site2";
  }
  return "?";
}

inline Kind variant_kind(IneqVariant v) {
  return (v == IneqVariant::bond1 || v == IneqVariant::bond2) ? Kind::bond
                                                              : Kind::site;
}

inline double default_delta_beta(double beta) {
  return std::max(0.01 * beta, 0.005);
}

struct IneqMeasurement {
  Kind kind = Kind::bond;
  double beta = 0.0;
  double h = 0.0;
  double delta_beta = 0.0;
  int l = 0;
  std::uint64_t replicas = 0;
  double M = 0.0, M_se = 0.0;
  double dMdh = 0.0, dMdh_se = 0.0;
  double dMdbeta = 0.0, dMdbeta_se = 0.0;
  // Covariances of the three aggregate estimators (not per-sample).
  double cov_M_dMdh = 0.0;
  double cov_M_dMdbeta = 0.0;
  double cov_dMdh_dMdbeta = 0.0;
  double curvature = 0.0;     // estimate of d2M/dbeta2 from the 3-point stencil
  double curvature_se = 0.0;
  bool exact = false;
  bool step_ok = true;
};

// CRN sweep: each replica grows the cluster three times against the same
// uniforms at thresholds p(beta - d), p(beta), p(beta + d). Sizes are
// monotone across the thresholds, so the paired differences have tiny
// variance compared with independent resampling.
inline IneqMeasurement measure_inequality_point(const FiniteVolume& vol,
                                                Kind kind, double beta,
                                                double h,
                                                std::uint64_t replicas,
                                                SeedSpec seed,
                                                double delta_beta = 0.0) {
  if (!(beta > 0.0) || !(h > 0.0))
    throw std::invalid_argument("measure_inequality_point: beta, h > 0");
  if (delta_beta <= 0.0) delta_beta = default_delta_beta(beta);
  if (!(beta - delta_beta > 0.0))
    throw std::invalid_argument("measure_inequality_point: beta - delta_beta <= 0");
  IneqMeasurement m;
  m.kind = kind;
  m.beta = beta;
  m.h = h;
  m.delta_beta = delta_beta;
  m.l = vol.l;
  m.replicas = replicas;
  const double p_lo = p_of_beta(beta - delta_beta);
  const double p_0 = p_of_beta(beta);
  const double p_hi = p_of_beta(beta + delta_beta);
  const std::int64_t cap = default_size_cap(vol, h);
  const double R = static_cast<double>(replicas);

  struct Sums {
    double t0 = 0, t0_2 = 0;
    double u0 = 0, u0_2 = 0, t0u0 = 0;
    double d = 0, d2 = 0, dt0 = 0, du0 = 0;
    double c = 0, c2 = 0;
  };
  for (std::size_t xi = 0; xi < vol.f_local.size(); ++xi) {
    const int x = vol.f_local[xi];
    auto partials = map_chunks<Sums>(
        replicas, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
          Sums s{};
          ClusterScratch sc;
          SeedSpec sd = seed;
          for (std::uint64_t r = b; r < e; ++r) {
            sd.replica_index = seed.replica_index + xi * replicas + r;
            std::int64_t n_lo, n_0, n_hi;
            if (kind == Kind::bond) {
              n_lo = bond_cluster_size(vol, x, p_lo, sd, cap, sc);
              n_0 = bond_cluster_size(vol, x, p_0, sd, cap, sc);
              n_hi = bond_cluster_size(vol, x, p_hi, sd, cap, sc);
            } else {
              n_lo = site_cluster_size(vol, x, p_lo, sd, cap, sc);
              n_0 = site_cluster_size(vol, x, p_0, sd, cap, sc);
              n_hi = site_cluster_size(vol, x, p_hi, sd, cap, sc);
            }
            const double t_lo = std::exp(-h * static_cast<double>(n_lo));
            const double t_0 = std::exp(-h * static_cast<double>(n_0));
            const double t_hi = std::exp(-h * static_cast<double>(n_hi));
            const double u_0 = static_cast<double>(n_0) * t_0;
            const double d = (t_lo - t_hi) / (2.0 * delta_beta);
            const double c2nd =
                -(t_hi - 2.0 * t_0 + t_lo) / (delta_beta * delta_beta);
            s.t0 += t_0;
            s.t0_2 += t_0 * t_0;
            s.u0 += u_0;
            s.u0_2 += u_0 * u_0;
            s.t0u0 += t_0 * u_0;
            s.d += d;
            s.d2 += d * d;
            s.dt0 += d * t_0;
            s.du0 += d * u_0;
            s.c += c2nd;
            s.c2 += c2nd * c2nd;
          }
          return s;
        });
    Sums s{};
    for (const auto& part : partials) {
      s.t0 += part.t0;
      s.t0_2 += part.t0_2;
      s.u0 += part.u0;
      s.u0_2 += part.u0_2;
      s.t0u0 += part.t0u0;
      s.d += part.d;
      s.d2 += part.d2;
      s.dt0 += part.dt0;
      s.du0 += part.du0;
      s.c += part.c;
      s.c2 += part.c2;
    }
    const double mt = s.t0 / R, mu = s.u0 / R, md = s.d / R, mc2 = s.c / R;
    const double var_t = std::max(0.0, s.t0_2 / R - mt * mt);
    const double var_u = std::max(0.0, s.u0_2 / R - mu * mu);
    const double var_d = std::max(0.0, s.d2 / R - md * md);
    const double var_c = std::max(0.0, s.c2 / R - mc2 * mc2);
    const double cov_tu = s.t0u0 / R - mt * mu;
    const double cov_dt = s.dt0 / R - md * mt;
    const double cov_du = s.du0 / R - md * mu;
    // M_x = 1 - mean(T); dMdh_x = mean(U); dMdbeta_x = mean(D).
    m.M += 1.0 - mt;
    m.dMdh += mu;
    m.dMdbeta += md;
    m.curvature += mc2;
    m.M_se = std::sqrt(m.M_se * m.M_se + var_t / R);
    m.dMdh_se = std::sqrt(m.dMdh_se * m.dMdh_se + var_u / R);
    m.dMdbeta_se = std::sqrt(m.dMdbeta_se * m.dMdbeta_se + var_d / R);
    m.curvature_se = std::sqrt(m.curvature_se * m.curvature_se + var_c / R);
    m.cov_M_dMdh += -cov_tu / R;     // Cov(1 - mean T, mean U)
    m.cov_M_dMdbeta += -cov_dt / R;  // Cov(1 - mean T, mean D)
    m.cov_dMdh_dMdbeta += cov_du / R;
  }
  // Step diagnostic: the Richardson-style proxy |M''| d^2 / 6 for the
  // truncation term must stay below the estimator's own noise floor.
  const double bias_proxy =
      std::abs(m.curvature) * delta_beta * delta_beta / 6.0;
  m.step_ok = bias_proxy <= 3.0 * m.dMdbeta_se + 1e-12;
  return m;
}

// Exact counterpart on enumerable volumes: analytic in p through the
// polynomial coefficients, with dM/dbeta = -e^{-beta} * sum_n dP_n/dp e^{-nh}.
inline IneqMeasurement measure_inequality_point_exact(const FiniteVolume& vol,
                                                      Kind kind, double beta,
                                                      double h) {
  IneqMeasurement m;
  m.kind = kind;
  m.beta = beta;
  m.h = h;
  m.l = vol.l;
  m.exact = true;
  const double p = p_of_beta(beta);
  for (int x : vol.f_local) {
    const auto polys = exact_cluster_distribution(vol, kind, x);
    double sum_t = 0, sum_u = 0, sum_dp = 0;
    for (const auto& [n, poly] : polys) {
      const double t = std::exp(-h * static_cast<double>(n));
      sum_t += poly.prob(p) * t;
      sum_u += poly.prob(p) * static_cast<double>(n) * t;
      sum_dp += poly.dprob(p) * t;
    }
    m.M += 1.0 - sum_t;
    m.dMdh += sum_u;
    m.dMdbeta += -std::exp(-beta) * sum_dp;
  }
  return m;
}

struct DMdBetaEstimate {
  double value = 0.0;
  double std_err = 0.0;
  double delta_beta = 0.0;
  double curvature = 0.0;
  bool step_ok = true;
};

inline DMdBetaEstimate dMdbeta_estimate(const FiniteVolume& vol, Kind kind,
                                        double beta, double h,
                                        double delta_beta,
                                        std::uint64_t replicas, SeedSpec seed) {
  const auto m =
      measure_inequality_point(vol, kind, beta, h, replicas, seed, delta_beta);
  return {m.dMdbeta, m.dMdbeta_se, m.delta_beta, m.curvature, m.step_ok};
}

struct DiffIneqReport {
  IneqVariant variant = IneqVariant::bond1;
  double beta = 0.0;
  double h = 0.0;
  int l = 0;
  int K = 0;
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  double slack = 0.0, slack_se = 0.0;
  bool exact = false;
  bool step_ok = true;
  bool pass = false;
};

// `correction` is the additive escape term next to M on the right-hand side:
// e^{-lh} for nearest-neighbour volumes, f_l(beta, h) for long-range ones.
inline DiffIneqReport report_from_measurement(IneqVariant variant,
                                              const IneqMeasurement& m, int K,
                                              double correction) {
  DiffIneqReport rep;
  rep.variant = variant;
  rep.beta = m.beta;
  rep.h = m.h;
  rep.l = m.l;
  rep.K = K;
  rep.exact = m.exact;
  rep.step_ok = m.step_ok;
  const double c = correction;
  const double var_M = m.M_se * m.M_se;
  const double var_U = m.dMdh_se * m.dMdh_se;
  const double var_D = m.dMdbeta_se * m.dMdbeta_se;
  double g_M, g_U, g_D;  // gradient of slack = rhs - lhs wrt (M, dMdh, dMdbeta)
  if (variant == IneqVariant::bond1 || variant == IneqVariant::site1) {
    rep.lhs = m.dMdbeta;
    rep.lhs_se = m.dMdbeta_se;
    rep.rhs = K * (m.M + c) * m.dMdh;
    const double rM = K * m.dMdh, rU = K * (m.M + c);
    rep.rhs_se = std::sqrt(std::max(
        0.0, rM * rM * var_M + rU * rU * var_U + 2.0 * rM * rU * m.cov_M_dMdh));
    g_M = rM;
    g_U = rU;
    g_D = -1.0;
  } else {
    const double phi = (variant == IneqVariant::bond2) ? m.beta
                                                       : std::expm1(m.beta);
    rep.lhs = m.M;
    rep.lhs_se = m.M_se;
    rep.rhs = m.h * m.dMdh + m.M * m.M + phi * (m.M + c) * m.dMdbeta;
    const double rM = 2.0 * m.M + phi * m.dMdbeta;
    const double rU = m.h;
    const double rD = phi * (m.M + c);
    rep.rhs_se = std::sqrt(std::max(
        0.0, rM * rM * var_M + rU * rU * var_U + rD * rD * var_D +
                 2.0 * rM * rU * m.cov_M_dMdh + 2.0 * rM * rD * m.cov_M_dMdbeta +
                 2.0 * rU * rD * m.cov_dMdh_dMdbeta));
    g_M = rM - 1.0;
    g_U = rU;
    g_D = rD;
  }
  rep.slack = rep.rhs - rep.lhs;
  rep.slack_se = std::sqrt(std::max(
      0.0, g_M * g_M * var_M + g_U * g_U * var_U + g_D * g_D * var_D +
               2.0 * g_M * g_U * m.cov_M_dMdh + 2.0 * g_M * g_D * m.cov_M_dMdbeta +
               2.0 * g_U * g_D * m.cov_dMdh_dMdbeta));
  rep.pass = m.exact ? rep.slack >= -1e-12 : rep.slack >= -3.0 * rep.slack_se;
  return rep;
}

inline DiffIneqReport report_from_measurement(IneqVariant variant,
                                              const IneqMeasurement& m,
                                              int K) {
  return report_from_measurement(
      variant, m, K, std::exp(-m.h * static_cast<double>(m.l)));
}

inline DiffIneqReport check_inequality(IneqVariant variant,
                                       const FiniteVolume& vol, Kind kind,
                                       double beta, double h,
                                       std::uint64_t replicas, SeedSpec seed) {
  if (variant_kind(variant) != kind) {
    std::ostringstream msg;
    msg << "check_inequality: variant " << variant_name(variant)
        << " does not match kind " << kind_name(kind);
    throw std::invalid_argument(msg.str());
  }
  const int K = vol.patch->max_degree();
  if (element_count(vol, kind) <= enumeration_cap_bits) {
    return report_from_measurement(
        variant, measure_inequality_point_exact(vol, kind, beta, h), K);
  }
  return report_from_measurement(
      variant, measure_inequality_point(vol, kind, beta, h, replicas, seed), K);
}

// ---- critical asymptotics ----

struct ExponentFit {
  double beta_T_estimate = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> usable_h;
  bool constraint_satisfied = false;  // slope <= 1/2 + 3 se
};

// log M vs log h on the largest certified volume at beta ~ beta_T. Only h
// values whose M carries a relative error below 5% enter the fit.
inline ExponentFit critical_exponent_fit(std::shared_ptr<const GraphPatch> patch,
                                         Kind kind, double beta_T_estimate,
                                         const std::vector<double>& h_grid,
                                         std::uint64_t replicas, SeedSpec seed) {
  if (h_grid.size() < 5)
    throw std::invalid_argument("critical_exponent_fit: need >= 5 h values");
  for (std::size_t i = 2; i < h_grid.size(); ++i) {
    const double r1 = h_grid[i - 1] / h_grid[i - 2];
    const double r2 = h_grid[i] / h_grid[i - 1];
    if (std::abs(std::log(r2 / r1)) > 1e-6)
      throw std::invalid_argument("critical_exponent_fit: h grid must be geometric");
  }
  const FiniteVolume vol = max_volume(patch);
  std::vector<double> xs, ys, ws;
  ExponentFit fit;
  fit.beta_T_estimate = beta_T_estimate;
  const std::uint64_t stride = replicas * vol.f_local.size();
  for (std::size_t i = 0; i < h_grid.size(); ++i) {
    // Separate replica blocks per h value keep the points independent.
    SeedSpec block = seed;
    block.replica_index = seed.replica_index + i * stride;
    OrderParameterPoint pt =
        finite_volume_M(vol, kind, beta_T_estimate, h_grid[i], replicas, block);
    if (pt.M > 0.0 && pt.M_std_err / pt.M < 0.05) {
      fit.usable_h.push_back(h_grid[i]);
      xs.push_back(std::log(h_grid[i]));
      ys.push_back(std::log(pt.M));
      // Var(log M) ~ (se / M)^2; weights are the inverse.
      const double rel = pt.M_std_err / pt.M;
      ws.push_back(1.0 / (rel * rel));
    }
  }
  if (xs.size() < 3) {
    std::ostringstream msg;
    msg << "critical_exponent_fit: only " << xs.size()
        << " h values usable (need >= 3); usable:";
    for (double hh : fit.usable_h) msg << " " << hh;
    throw std::runtime_error(msg.str());
  }
  const LinFit lf = weighted_least_squares(xs, ys, ws);
  fit.slope = lf.slope;
  fit.slope_se = lf.slope_se;
  fit.intercept = lf.intercept;
  fit.r_squared = lf.r_squared;
  fit.constraint_satisfied = fit.slope <= 0.5 + 3.0 * fit.slope_se;
  return fit;
}

struct FinalPropositionRow {
  double beta = 0.0;
  double M_at_h_min = 0.0;
  double M_se = 0.0;
  double ratio = 0.0;  // M / (beta - beta_T_estimate)
  bool positive = false;
};

// Supercritical lower-bound surrogate: M(beta, h_min) / (beta - beta_T)
// tabulated for beta above the scanned threshold.
inline std::vector<FinalPropositionRow> check_final_proposition(
    std::shared_ptr<const GraphPatch> patch, Kind kind,
    const std::vector<double>& beta_grid, double beta_T_estimate, double h_min,
    std::uint64_t replicas, SeedSpec seed) {
  for (double b : beta_grid)
    if (!(b > beta_T_estimate))
      throw std::invalid_argument(
          "check_final_proposition: beta grid must sit above beta_T");
  const FiniteVolume vol = max_volume(patch);
  std::vector<FinalPropositionRow> out;
  const std::uint64_t stride = replicas * vol.f_local.size();
  for (std::size_t i = 0; i < beta_grid.size(); ++i) {
    SeedSpec block = seed;
    block.replica_index = seed.replica_index + i * stride;
    OrderParameterPoint pt =
        finite_volume_M(vol, kind, beta_grid[i], h_min, replicas, block);
    FinalPropositionRow row;
    row.beta = beta_grid[i];
    row.M_at_h_min = pt.M;
    row.M_se = pt.M_std_err;
    row.ratio = pt.M / (beta_grid[i] - beta_T_estimate);
    row.positive = pt.M > 3.0 * pt.M_std_err;
    out.push_back(row);
  }
  return out;
}

}  // namespace perc
