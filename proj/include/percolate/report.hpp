#pragma once
// CSV and JSON emission. All numbers go through the shortest round-trip
// formatter so identical results give byte-identical files on every run and
// thread count.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "percolate/analysis.hpp"
#include "percolate/diffineq.hpp"
#include "percolate/engine.hpp"
#include "percolate/longrange.hpp"
#include "percolate/order_param.hpp"

namespace perc {

using ordered_json = nlohmann::ordered_json;

inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_int(std::int64_t v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct CsvTable {
  std::string header;
  std::vector<std::string> rows;

  std::string to_string() const {
    std::string out = header;
    out.push_back('\n');
    for (const auto& r : rows) {
      out += r;
      out.push_back('\n');
    }
    return out;
  }
};

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << body;
  if (!f) throw std::runtime_error("short write: " + path);
}

inline void write_csv(const std::string& path, const CsvTable& t) {
  write_text_file(path, t.to_string());
}

inline void write_json_file(const std::string& path, const ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// {check, params, value, stderr, pass} summary rows; every command appends
// its headline numbers in this shape.
inline ordered_json summary_entry(const std::string& check,
                                  ordered_json params, double value,
                                  double std_err, bool pass) {
  ordered_json j;
  j["check"] = check;
  j["params"] = std::move(params);
  j["value"] = value;
  j["stderr"] = std_err;
  j["pass"] = pass;
  return j;
}

// ---- per-module tables ----

inline CsvTable distribution_csv(const ClusterSizeDistribution& d) {
  CsvTable t;
  if (d.mode == DistMode::empirical) {
    t.header = "n,count";
    for (const auto& [n, c] : d.mass)
      t.rows.push_back(fmt_int(n) + "," +
                       fmt_int(static_cast<std::int64_t>(c)));
  } else {
    t.header = "n,prob";
    for (const auto& [n, c] : d.mass)
      t.rows.push_back(fmt_int(n) + "," + fmt_double(c));
  }
  return t;
}

inline ordered_json distribution_sidecar(const ClusterSizeDistribution& d,
                                         const std::string& volume,
                                         std::uint64_t master_seed) {
  ordered_json j;
  j["volume"] = volume;
  j["kind"] = kind_name(d.kind);
  j["mode"] = d.mode == DistMode::empirical ? "empirical" : "exact";
  j["beta"] = d.beta;
  j["p"] = d.p;
  j["replicas"] = d.replicas;
  j["size_cap"] = d.size_cap;
  j["master_seed"] = master_seed;
  return j;
}

inline CsvTable polynomial_csv(const EventPolynomial& poly) {
  CsvTable t;
  t.header = "k,count";
  for (std::size_t k = 0; k < poly.counts.size(); ++k)
    t.rows.push_back(fmt_int(static_cast<std::int64_t>(k)) + "," +
                     fmt_double(poly.counts[k]));
  return t;
}

inline CsvTable order_param_csv(const std::vector<OrderParameterPoint>& pts) {
  CsvTable t;
  t.header = "beta,h,l,M,M_stderr,dMdh,dMdh_stderr";
  for (const auto& p : pts)
    t.rows.push_back(fmt_double(p.beta) + "," + fmt_double(p.h) + "," +
                     fmt_int(p.volume_l) + "," + fmt_double(p.M) + "," +
                     fmt_double(p.M_std_err) + "," + fmt_double(p.dMdh) + "," +
                     fmt_double(p.dMdh_std_err));
  return t;
}

inline CsvTable diffineq_csv(const std::vector<DiffIneqReport>& reps) {
  CsvTable t;
  t.header = "variant,beta,h,l,lhs,lhs_se,rhs,rhs_se,slack,pass";
  for (const auto& r : reps)
    t.rows.push_back(std::string(variant_name(r.variant)) + "," +
                     fmt_double(r.beta) + "," + fmt_double(r.h) + "," +
                     fmt_int(r.l) + "," + fmt_double(r.lhs) + "," +
                     fmt_double(r.lhs_se) + "," + fmt_double(r.rhs) + "," +
                     fmt_double(r.rhs_se) + "," + fmt_double(r.slack) + "," +
                     (r.pass ? "1" : "0"));
  return t;
}

// Worst slack per variant, the JSON side of the inequality reports.
inline ordered_json diffineq_summary(const std::vector<DiffIneqReport>& reps) {
  ordered_json out = ordered_json::array();
  for (IneqVariant v : {IneqVariant::bond1, IneqVariant::bond2,
                        IneqVariant::site1, IneqVariant::site2}) {
    const DiffIneqReport* worst = nullptr;
    for (const auto& r : reps)
      if (r.variant == v && (!worst || r.slack < worst->slack)) worst = &r;
    if (!worst) continue;
    ordered_json params;
    params["beta"] = worst->beta;
    params["h"] = worst->h;
    params["l"] = worst->l;
    out.push_back(summary_entry(std::string("diffineq/") + variant_name(v),
                                params, worst->slack, worst->slack_se,
                                worst->pass));
  }
  return out;
}

inline CsvTable scan_csv(const CriticalScanResult& res,
                         const std::string& family, Kind kind) {
  CsvTable t;
  t.header = "family,kind,p,l,mean_size,mean_size_se,reach,reach_se,divergent";
  for (const auto& c : res.cells)
    t.rows.push_back(family + "," + kind_name(kind) + "," + fmt_double(c.p) +
                     "," + fmt_int(c.l) + "," + fmt_double(c.mean_size) + "," +
                     fmt_double(c.mean_size_se) + "," + fmt_double(c.reach) +
                     "," + fmt_double(c.reach_se) + "," +
                     (c.divergent ? "1" : "0"));
  return t;
}

inline ordered_json scan_summary(const CriticalScanResult& res,
                                 const std::string& family, Kind kind) {
  ordered_json params;
  params["family"] = family;
  params["kind"] = kind_name(kind);
  params["p_T"] = res.p_T_estimate;
  params["p_T_lo"] = res.p_T_bracket.lo;
  params["p_T_hi"] = res.p_T_bracket.hi;
  params["p_H"] = res.p_H_estimate;
  params["p_H_lo"] = res.p_H_bracket.lo;
  params["p_H_hi"] = res.p_H_bracket.hi;
  return summary_entry("critical-scan/verdict-gap", params, res.verdict_gap,
                       0.0, res.verdict_gap <= 0.04);
}

inline CsvTable tail_csv(const TailCurve& c) {
  CsvTable t;
  t.header = "n,tail,count";
  for (std::size_t i = 0; i < c.n.size(); ++i)
    t.rows.push_back(fmt_double(c.n[i]) + "," + fmt_double(c.tail[i]) + "," +
                     fmt_double(c.count[i]));
  return t;
}

inline ordered_json decay_fit_summary(const DecayFit& f,
                                      ordered_json params) {
  params["intercept"] = f.intercept;
  params["r_squared"] = f.r_squared;
  params["n_min"] = f.n_min;
  params["n_max"] = f.n_max;
  params["bins_used"] = f.bins_used;
  return summary_entry("decay-fit/alpha", std::move(params), f.alpha,
                       f.alpha_se, f.alpha > 0.0);
}

inline CsvTable longrange_pairs_csv(const LongRangeVolume& lr) {
  CsvTable t;
  t.header = "u,v,J,oriented";
  for (const auto& pr : lr.pairs)
    t.rows.push_back(fmt_int(pr.u) + "," + fmt_int(pr.v) + "," +
                     fmt_double(pr.J) + "," + (pr.oriented ? "1" : "0"));
  return t;
}

// Structured text form of a long-range spec (round-trips through the CLI).
inline std::string longrange_spec_text(const LongRangeSpec& spec) {
  std::string out;
  auto kernel_line = [](const char* label, const KernelSpec& k) {
    std::string s = std::string(label) + " ";
    switch (k.family) {
      case KernelSpec::Family::zero:
        s += "zero";
        break;
      case KernelSpec::Family::exponential:
        s += "exponential rate " + fmt_double(k.rate);
        break;
      case KernelSpec::Family::power:
        s += "power exponent " + fmt_double(k.exponent);
        break;
      case KernelSpec::Family::finite_range: {
        s += "finite_range range " + fmt_int(k.range) + " weights";
        for (double w : k.weights) s += " " + fmt_double(w);
        break;
      }
    }
    return s + "\n";
  };
  out += kernel_line("unoriented", spec.unoriented);
  out += kernel_line("oriented", spec.oriented);
  out += "J0 " + fmt_double(spec.J0) + "\n";
  out += "trunc_radius " + fmt_int(spec.trunc_radius) + "\n";
  out += "omitted_weight " + fmt_double(spec.omitted_weight) + "\n";
  return out;
}

}  // namespace perc
