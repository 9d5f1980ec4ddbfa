// Command-line driver. Every subcommand writes CSV/JSON artifacts under the
// --out directory; reruns with the same seed and options reproduce every CSV
// byte for byte. Config files use INI sections named after subcommands and
// mirror the long option names.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "percolate/acceptance.hpp"
#include "percolate/analysis.hpp"
#include "percolate/diffineq.hpp"
#include "percolate/engine.hpp"
#include "percolate/graph.hpp"
#include "percolate/longrange.hpp"
#include "percolate/oracle.hpp"
#include "percolate/order_param.hpp"
#include "percolate/parallel.hpp"
#include "percolate/report.hpp"
#include "percolate/rng.hpp"

namespace {

using namespace perc;

struct GlobalOpts {
  std::uint64_t seed = 20240914;
  std::uint64_t replicas = 100000;
  std::string out = "out";
  bool quick = false;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct PatchOpts {
  std::string family = "square";
  int half_width = 8;
  int degree = 3;
  int depth = 8;
  std::string input;  // overrides family when set
};

void add_patch_flags(CLI::App* cmd, PatchOpts& po) {
  cmd->add_option("--family", po.family,
                  "square | subdivided | tree | k2 | path3 | triangle | "
                  "cycle4 | grid2x3 | subdivided-cell")
      ->capture_default_str();
  cmd->add_option("--half-width", po.half_width,
                  "patch half-width (square, subdivided)")
      ->capture_default_str();
  cmd->add_option("--degree", po.degree, "tree degree")->capture_default_str();
  cmd->add_option("--depth", po.depth, "tree depth")->capture_default_str();
  cmd->add_option("--input", po.input, "load patch from a graph text file");
}

std::shared_ptr<GraphPatch> make_patch(const PatchOpts& po) {
  if (!po.input.empty()) {
    std::ifstream f(po.input);
    if (!f) throw std::runtime_error("cannot open graph file: " + po.input);
    std::ostringstream ss;
    ss << f.rdbuf();
    return std::make_shared<GraphPatch>(from_text(ss.str()));
  }
  if (po.family == "square")
    return std::make_shared<GraphPatch>(build_square_lattice(po.half_width));
  if (po.family == "subdivided")
    return std::make_shared<GraphPatch>(
        build_subdivided_square_lattice(po.half_width));
  if (po.family == "tree")
    return std::make_shared<GraphPatch>(build_regular_tree(po.degree, po.depth));
  if (po.family == "k2") return std::make_shared<GraphPatch>(tiny::k2());
  if (po.family == "path3") return std::make_shared<GraphPatch>(tiny::path3());
  if (po.family == "triangle")
    return std::make_shared<GraphPatch>(tiny::triangle());
  if (po.family == "cycle4")
    return std::make_shared<GraphPatch>(tiny::cycle4());
  if (po.family == "grid2x3")
    return std::make_shared<GraphPatch>(tiny::grid2x3());
  if (po.family == "subdivided-cell")
    return std::make_shared<GraphPatch>(tiny::subdivided_square());
  throw CLI::ValidationError("--family", "unknown family: " + po.family);
}

Kind parse_kind(const std::string& s) {
  if (s == "bond") return Kind::bond;
  if (s == "site") return Kind::site;
  throw CLI::ValidationError("--kind", "must be bond or site");
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
  std::filesystem::create_directories(g.out);
  return g.out + "/" + name;
}

void write_summary(const GlobalOpts& g, const ordered_json& rows) {
  write_json_file(out_path(g, "summary.json"), rows);
}

// ---- graph ----

int cmd_graph(const GlobalOpts& g, const PatchOpts& po) {
  auto patch = make_patch(po);
  write_text_file(out_path(g, "graph.txt"), to_text(*patch));
  const FiniteVolume vol = max_volume(patch);
  ordered_json rows = ordered_json::array();
  ordered_json params;
  params["family"] = patch->family;
  params["vertices"] = patch->vertex_count();
  params["orbits"] = patch->orbit_count;
  params["exact_radius"] = patch->exact_radius;
  params["max_degree"] = patch->max_degree();
  params["max_volume_l"] = vol.l;
  params["max_volume_vertices"] = vol.vertex_count();
  params["max_volume_edges"] = vol.edges.size();
  rows.push_back(summary_entry("graph/build", params,
                               patch->vertex_count(), 0.0, true));
  write_summary(g, rows);
  std::cout << "graph " << patch->family << ": " << patch->vertex_count()
            << " vertices, " << patch->orbit_count << " orbits, exact radius "
            << patch->exact_radius << "\n";
  return 0;
}

// ---- sample ----

int cmd_sample(const GlobalOpts& g, const PatchOpts& po, int l,
               const std::string& kind_s, double p, double h,
               std::int64_t size_cap) {
  auto patch = make_patch(po);
  const Kind kind = parse_kind(kind_s);
  const FiniteVolume vol = l > 0 ? finite_volume(patch, l) : max_volume(patch);
  const double beta = beta_of_p(p);
  const int x = vol.f_local.front();
  if (size_cap == 0 && h > 0.0) size_cap = default_size_cap(vol, h);
  SeedSpec seed{g.seed, 0, Stream::bond_layer};
  const auto dist = cluster_size_distribution_mc(vol, kind, beta, x,
                                                 g.replicas, seed, size_cap);
  write_csv(out_path(g, "distribution.csv"), distribution_csv(dist));
  write_json_file(
      out_path(g, "distribution.json"),
      distribution_sidecar(dist, patch->family + " l=" + std::to_string(vol.l),
                           g.seed));
  ordered_json rows = ordered_json::array();
  ordered_json params;
  params["family"] = patch->family;
  params["kind"] = kind_s;
  params["p"] = p;
  params["l"] = vol.l;
  params["replicas"] = g.replicas;
  const Estimate mean = mean_cluster_size(dist);
  rows.push_back(summary_entry("sample/mean-size", params, mean.value,
                               mean.std_err, true));
  write_summary(g, rows);
  std::cout << "sampled " << g.replicas << " clusters, mean size "
            << fmt_double(mean.value) << "\n";
  return 0;
}

// ---- exact ----

int cmd_exact(const GlobalOpts& g, const PatchOpts& po, const std::string& kind_s,
              double p, bool unmodified) {
  auto patch = make_patch(po);
  const Kind kind = parse_kind(kind_s);
  const FiniteVolume vol = max_volume(patch);
  if (element_count(vol, kind) > enumeration_cap_bits)
    throw std::runtime_error("exact: volume has more than " +
                             std::to_string(enumeration_cap_bits) +
                             " dependency elements; use sample instead");
  const int x = vol.f_local.front();
  const bool modified = !unmodified;
  const auto polys = exact_cluster_distribution(vol, kind, x, modified);
  const auto dist = exact_distribution_at(polys, kind, beta_of_p(p), modified);
  write_csv(out_path(g, "exact_distribution.csv"), distribution_csv(dist));
  // event polynomial evidence for the distribution's first nontrivial event
  const auto a1 = cluster_size_at_least(vol, kind, x, 2);
  int far = x;
  for (int v = 0; v < vol.vertex_count(); ++v)
    if (vol.dist_to_domain[v] > vol.dist_to_domain[far]) far = v;
  const auto a2 = connection_event(vol, kind, x, far);
  write_csv(out_path(g, "event_polynomial.csv"),
            polynomial_csv(enumerate_event(vol, kind, a1)));
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(0.1 * i);
  const double russo = std::max(russo_check(vol, kind, a1, grid),
                                russo_check(vol, kind, a2, grid));
  const double fkg = fkg_check(vol, kind, a1, a2, grid);
  const double bk = bk_check(vol, kind, a1, a2, grid);
  ordered_json checks = ordered_json::array();
  auto check_row = [&](const std::string& name, double worst, bool pass) {
    ordered_json row;
    row["check"] = name;
    row["graph"] = patch->family;
    row["p_grid"] = grid;
    row["worst_case"] = worst;
    row["pass"] = pass;
    checks.push_back(row);
  };
  check_row("russo", russo, russo <= 1e-12);
  check_row("fkg", fkg, fkg >= -1e-12);
  check_row("bk", bk, bk >= -1e-12);
  check_row("mass", std::abs(dist.total_mass() - 1.0),
            std::abs(dist.total_mass() - 1.0) <= 1e-12);
  write_json_file(out_path(g, "checks.json"), checks);
  ordered_json rows = ordered_json::array();
  ordered_json params;
  params["family"] = patch->family;
  params["kind"] = kind_s;
  params["p"] = p;
  rows.push_back(summary_entry("exact/russo", params, russo, 0.0,
                               russo <= 1e-12));
  rows.push_back(summary_entry("exact/fkg", params, fkg, 0.0, fkg >= -1e-12));
  rows.push_back(summary_entry("exact/bk", params, bk, 0.0, bk >= -1e-12));
  write_summary(g, rows);
  std::cout << "exact checks on " << patch->family << ": russo " << russo
            << ", fkg slack " << fkg << ", bk slack " << bk << "\n";
  return 0;
}

// ---- order-param ----

int cmd_order_param(const GlobalOpts& g, const PatchOpts& po,
                    std::vector<int> ls, const std::string& kind_s, double p,
                    std::vector<double> hs) {
  auto patch = make_patch(po);
  const Kind kind = parse_kind(kind_s);
  if (ls.empty()) ls = {patch->exact_radius - 1};
  if (hs.empty()) hs = {0.5};
  const double beta = beta_of_p(p);
  CsvTable t;
  t.header = "beta,h,l,M,M_stderr,dMdh,dMdh_stderr";
  ordered_json rows = ordered_json::array();
  std::uint64_t cell = 0;
  for (double h : hs) {
    for (int l : ls) {
      const FiniteVolume vol = finite_volume(patch, l);
      SeedSpec seed{g.seed, (cell++) * g.replicas * 8, Stream::bond_layer};
      const OrderParameterPoint pt =
          finite_volume_M(vol, kind, beta, h, g.replicas, seed);
      t.rows.push_back(fmt_double(beta) + "," + fmt_double(h) + "," +
                       fmt_int(l) + "," + fmt_double(pt.M) + "," +
                       fmt_double(pt.M_std_err) + "," + fmt_double(pt.dMdh) +
                       "," + fmt_double(pt.dMdh_std_err));
      ordered_json params;
      params["family"] = patch->family;
      params["kind"] = kind_s;
      params["beta"] = beta;
      params["h"] = h;
      params["l"] = l;
      rows.push_back(
          summary_entry("order-param/M", params, pt.M, pt.M_std_err, true));
    }
  }
  write_csv(out_path(g, "order_param.csv"), t);
  write_summary(g, rows);
  std::cout << "order parameter at " << t.rows.size() << " cells written\n";
  return 0;
}

// ---- diffineq ----

int cmd_diffineq(const GlobalOpts& g, const PatchOpts& po, std::vector<int> ls,
                 const std::string& kind_s, std::vector<double> ps,
                 std::vector<double> hs) {
  auto patch = make_patch(po);
  const Kind kind = parse_kind(kind_s);
  if (ls.empty()) ls = {8};
  if (ps.empty()) ps = {0.5};
  if (hs.empty()) hs = {0.5};
  const int K = patch->max_degree();
  std::vector<DiffIneqReport> reports;
  std::uint64_t cell = 0;
  for (int l : ls) {
    const FiniteVolume vol = finite_volume(patch, l);
    for (double p : ps) {
      for (double h : hs) {
        SeedSpec seed{g.seed, (cell++) * g.replicas * 8, Stream::bond_layer};
        const IneqMeasurement m = measure_inequality_point(
            vol, kind, beta_of_p(p), h, g.replicas, seed);
        const auto variants =
            kind == Kind::bond
                ? std::vector<IneqVariant>{IneqVariant::bond1, IneqVariant::bond2}
                : std::vector<IneqVariant>{IneqVariant::site1, IneqVariant::site2};
        for (IneqVariant v : variants)
          reports.push_back(report_from_measurement(v, m, K));
      }
    }
  }
  write_csv(out_path(g, "diffineq.csv"), diffineq_csv(reports));
  write_summary(g, diffineq_summary(reports));
  int fails = 0;
  for (const auto& r : reports)
    if (!r.pass) ++fails;
  std::cout << reports.size() << " inequality cells, " << fails
            << " failing\n";
  return fails == 0 ? 0 : 1;
}

// ---- decay-fit ----

int cmd_decay_fit(const GlobalOpts& g, const PatchOpts& po, int l,
                  const std::string& kind_s, double p, const std::string& mode,
                  double n_min, double n_max) {
  auto patch = make_patch(po);
  const Kind kind = parse_kind(kind_s);
  const FiniteVolume vol = l > 0 ? finite_volume(patch, l) : max_volume(patch);
  const double beta = beta_of_p(p);
  const int x = vol.f_local.front();
  SeedSpec seed{g.seed, 0, Stream::bond_layer};
  TailCurve curve;
  if (mode == "size") {
    const auto dist =
        cluster_size_distribution_mc(vol, kind, beta, x, g.replicas, seed);
    curve = size_tail_curve(dist);
  } else if (mode == "radius") {
    curve = radius_tail_curve(vol, kind, beta, x, g.replicas, seed);
  } else {
    throw CLI::ValidationError("--mode", "must be size or radius");
  }
  write_csv(out_path(g, "tail.csv"), tail_csv(curve));
  if (n_max <= 0) n_max = mode == "radius" ? vol.l : 40;
  const DecayFit fit = fit_exponential_tail(curve, n_min, n_max);
  ordered_json params;
  params["family"] = patch->family;
  params["kind"] = kind_s;
  params["p"] = p;
  params["mode"] = mode;
  params["l"] = vol.l;
  ordered_json rows = ordered_json::array();
  rows.push_back(decay_fit_summary(fit, params));
  write_summary(g, rows);
  std::cout << mode << " tail alpha " << fmt_double(fit.alpha) << " +- "
            << fmt_double(fit.alpha_se) << " (r2 " << fmt_double(fit.r_squared)
            << ", bins " << fit.bins_used << ")\n";
  return 0;
}

// ---- critical-scan ----

int cmd_scan(const GlobalOpts& g, const PatchOpts& po, const std::string& kind_s,
             double p_min, double p_max, double p_step, std::vector<int> ls) {
  auto patch = make_patch(po);
  const Kind kind = parse_kind(kind_s);
  if (ls.empty()) ls = {4, 8, 16};
  std::vector<double> grid;
  for (double p = p_min; p <= p_max + 1e-12; p += p_step) grid.push_back(p);
  SeedSpec seed{g.seed, 0, Stream::bond_layer};
  const auto scan = scan_critical(patch, kind, grid, ls, g.replicas, seed);
  write_csv(out_path(g, "scan.csv"), scan_csv(scan, patch->family, kind));
  ordered_json rows = ordered_json::array();
  rows.push_back(scan_summary(scan, patch->family, kind));
  write_summary(g, rows);
  std::cout << "p_T in [" << fmt_double(scan.p_T_bracket.lo) << ", "
            << fmt_double(scan.p_T_bracket.hi) << "], p_H in ["
            << fmt_double(scan.p_H_bracket.lo) << ", "
            << fmt_double(scan.p_H_bracket.hi) << "], verdict gap "
            << fmt_double(scan.verdict_gap) << "\n";
  return 0;
}

// ---- longrange ----

int cmd_longrange(const GlobalOpts& g, const PatchOpts& po,
                  const std::string& kernel_s, double rate, double exponent,
                  int range, int l, double beta, double h, int k, int full_l,
                  const std::string& check) {
  auto patch = make_patch(po);
  KernelSpec kernel;
  if (kernel_s == "exponential") {
    kernel.family = KernelSpec::Family::exponential;
    kernel.rate = rate;
  } else if (kernel_s == "power") {
    kernel.family = KernelSpec::Family::power;
    kernel.exponent = exponent;
  } else if (kernel_s == "finite") {
    kernel.family = KernelSpec::Family::finite_range;
    kernel.range = range;
    kernel.weights.assign(range, 1.0);
  } else {
    throw CLI::ValidationError("--kernel", "must be exponential, power or finite");
  }
  auto spec =
      std::make_shared<LongRangeSpec>(build_longrange_spec(patch, kernel));
  const LongRangeVolume vol = build_longrange_volume(spec, l);
  write_text_file(out_path(g, "longrange_spec.txt"), longrange_spec_text(*spec));
  write_csv(out_path(g, "longrange_pairs.csv"), longrange_pairs_csv(vol));
  ordered_json rows = ordered_json::array();
  ordered_json params;
  params["family"] = patch->family;
  params["kernel"] = kernel.name();
  params["J0"] = spec->J0;
  params["trunc_radius"] = spec->trunc_radius;
  params["l"] = l;
  params["beta"] = beta;
  int exit_code = 0;
  SeedSpec seed{g.seed, 0, Stream::bond_layer};
  if (check == "spec") {
    const TruncationBound tb = truncation_bound(*spec, l);
    params["n_l"] = tb.n_l;
    params["g_l"] = tb.g(beta);
    rows.push_back(summary_entry("longrange/spec", params, spec->J0, 0.0, true));
  } else if (check == "sample") {
    const auto dist = longrange_cluster_distribution_mc(
        vol, beta, vol.base.f_local.front(), g.replicas, seed);
    write_csv(out_path(g, "distribution.csv"), distribution_csv(dist));
    const Estimate mean = mean_cluster_size(dist);
    rows.push_back(summary_entry("longrange/mean-size", params, mean.value,
                                 mean.std_err, true));
  } else if (check == "tail-bound") {
    const LongRangeVolume full = build_longrange_volume(spec, full_l);
    const auto rep = check_long_model_bound(full, vol, beta, k, g.replicas, seed);
    params["k"] = k;
    params["n_l"] = rep.n_l;
    params["g_l"] = rep.g_l;
    rows.push_back(summary_entry("longrange/tail-bound", params, rep.slack,
                                 rep.slack_se, rep.pass));
    exit_code = rep.pass ? 0 : 1;
  } else if (check == "modification") {
    int y = 0;
    for (int v = 0; v < vol.base.vertex_count(); ++v)
      if (vol.base.dist_to_domain[v] > vol.base.dist_to_domain[y]) y = v;
    const auto rep = check_long_range_modification(vol, beta, h, y, g.replicas,
                                                   seed);
    params["h"] = h;
    params["y"] = rep.y;
    params["f_l"] = rep.f_l;
    rows.push_back(summary_entry("longrange/modification", params, rep.slack,
                                 rep.std_err, rep.pass));
    exit_code = rep.pass ? 0 : 1;
  } else if (check == "inequality") {
    const auto r1 = check_longrange_inequality(IneqVariant::bond1, vol, beta, h,
                                               g.replicas, seed);
    const auto r2 = check_longrange_inequality(IneqVariant::bond2, vol, beta, h,
                                               g.replicas, seed);
    write_csv(out_path(g, "diffineq.csv"), diffineq_csv({r1, r2}));
    for (auto& row : diffineq_summary({r1, r2})) rows.push_back(row);
    exit_code = (r1.pass && r2.pass) ? 0 : 1;
  } else {
    throw CLI::ValidationError(
        "--check", "must be spec, sample, tail-bound, modification or inequality");
  }
  write_summary(g, rows);
  std::cout << "longrange " << check << " done (J0 " << fmt_double(spec->J0)
            << ", trunc radius " << spec->trunc_radius << ")\n";
  return exit_code;
}

// ---- accept ----

int cmd_accept(const GlobalOpts& g) {
  AcceptanceOptions opts;
  opts.out_dir = g.out;
  opts.master_seed = g.seed;
  opts.quick = g.quick;
  const AcceptanceReport rep = run_acceptance_suite(opts, std::cout, true);
  return rep.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"percolation laboratory: sampling, exact oracles, differential "
               "inequalities, critical scans"};
  app.require_subcommand(1);
  // --h is a real physics parameter below, so help loses its short form
  app.set_help_flag("--help", "print help and exit");
  app.set_config("--config", "", "INI config with one section per subcommand");
  app.allow_config_extras(false);  // malformed or unknown keys are an error

  GlobalOpts g;
  app.add_option("--seed", g.seed, "master seed (u64)")
      ->capture_default_str();
  app.add_option("--replicas", g.replicas, "Monte Carlo replicas")
      ->capture_default_str();
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_flag("--quick", g.quick, "reduced oracle-only acceptance profile");
  app.add_option("--threads", g.threads, "worker threads (0 = hardware)")
      ->capture_default_str();

  PatchOpts po_graph, po_sample, po_exact, po_order, po_diff, po_decay,
      po_scan, po_lr;

  auto* c_graph = app.add_subcommand("graph", "build or load a graph patch");
  add_patch_flags(c_graph, po_graph);

  auto* c_sample =
      app.add_subcommand("sample", "Monte Carlo cluster-size distribution");
  add_patch_flags(c_sample, po_sample);
  int sample_l = 0;
  std::string sample_kind = "bond";
  double sample_p = 0.5, sample_h = 0.0;
  std::int64_t sample_cap = 0;
  c_sample->add_option("--l", sample_l, "volume radius (0 = largest exact)")
      ->capture_default_str();
  c_sample->add_option("--kind", sample_kind, "bond | site")
      ->capture_default_str();
  c_sample->add_option("--p", sample_p, "open probability")
      ->capture_default_str();
  c_sample->add_option("--h", sample_h,
                       "ghost field, sets the size cap when nonzero");
  c_sample->add_option("--size-cap", sample_cap, "growth cap (0 = none)");

  auto* c_exact = app.add_subcommand(
      "exact", "exhaustive enumeration checks on a small volume");
  add_patch_flags(c_exact, po_exact);
  std::string exact_kind = "bond";
  double exact_p = 0.5;
  bool exact_unmodified = false;
  c_exact->add_option("--kind", exact_kind, "bond | site")
      ->capture_default_str();
  c_exact->add_option("--p", exact_p, "open probability")
      ->capture_default_str();
  c_exact->add_flag("--unmodified", exact_unmodified,
                    "site mode: plain cluster instead of the modified one");

  auto* c_order =
      app.add_subcommand("order-param", "finite-volume order parameter");
  add_patch_flags(c_order, po_order);
  std::vector<int> order_ls;
  std::string order_kind = "bond";
  double order_p = 0.5;
  std::vector<double> order_hs;
  c_order->add_option("--l", order_ls, "volume radii (repeatable)");
  c_order->add_option("--kind", order_kind, "bond | site")
      ->capture_default_str();
  c_order->add_option("--p", order_p, "open probability")
      ->capture_default_str();
  c_order->add_option("--h", order_hs, "ghost fields (repeatable)");

  auto* c_diff = app.add_subcommand(
      "diffineq", "measure the two differential inequalities");
  add_patch_flags(c_diff, po_diff);
  std::vector<int> diff_ls;
  std::string diff_kind = "bond";
  std::vector<double> diff_ps, diff_hs;
  c_diff->add_option("--l", diff_ls, "volume radii (repeatable)");
  c_diff->add_option("--kind", diff_kind, "bond | site")
      ->capture_default_str();
  c_diff->add_option("--p", diff_ps, "open probabilities (repeatable)");
  c_diff->add_option("--h", diff_hs, "ghost fields (repeatable)");

  auto* c_decay =
      app.add_subcommand("decay-fit", "exponential tail fit of cluster laws");
  add_patch_flags(c_decay, po_decay);
  int decay_l = 0;
  std::string decay_kind = "bond", decay_mode = "size";
  double decay_p = 0.3, decay_nmin = 5, decay_nmax = 0;
  c_decay->add_option("--l", decay_l, "volume radius (0 = largest exact)")
      ->capture_default_str();
  c_decay->add_option("--kind", decay_kind, "bond | site")
      ->capture_default_str();
  c_decay->add_option("--p", decay_p, "open probability")
      ->capture_default_str();
  c_decay->add_option("--mode", decay_mode, "size | radius")
      ->capture_default_str();
  c_decay->add_option("--n-min", decay_nmin, "fit window lower edge")
      ->capture_default_str();
  c_decay->add_option("--n-max", decay_nmax, "fit window upper edge (0 = auto)");

  auto* c_scan = app.add_subcommand(
      "critical-scan", "bracket the sharp threshold from finite volumes");
  add_patch_flags(c_scan, po_scan);
  std::string scan_kind = "bond";
  double scan_pmin = 0.30, scan_pmax = 0.70, scan_pstep = 0.04;
  std::vector<int> scan_ls;
  c_scan->add_option("--kind", scan_kind, "bond | site")
      ->capture_default_str();
  c_scan->add_option("--p-min", scan_pmin, "grid start")->capture_default_str();
  c_scan->add_option("--p-max", scan_pmax, "grid end")->capture_default_str();
  c_scan->add_option("--p-step", scan_pstep, "grid step")
      ->capture_default_str();
  c_scan->add_option("--l", scan_ls, "volume radii (repeatable, >= 3 values)");

  auto* c_lr = app.add_subcommand(
      "longrange", "long-range kernels, truncation bounds, directed volumes");
  add_patch_flags(c_lr, po_lr);
  std::string lr_kernel = "exponential", lr_check = "spec";
  double lr_rate = 3.0, lr_exponent = 4.0, lr_beta = 1.0, lr_h = 0.5;
  int lr_range = 1, lr_l = 4, lr_k = 1, lr_full_l = 0;
  c_lr->add_option("--kernel", lr_kernel, "exponential | power | finite")
      ->capture_default_str();
  c_lr->add_option("--rate", lr_rate, "exponential kernel rate")
      ->capture_default_str();
  c_lr->add_option("--exponent", lr_exponent, "power kernel exponent")
      ->capture_default_str();
  c_lr->add_option("--range", lr_range, "finite kernel range")
      ->capture_default_str();
  c_lr->add_option("--l", lr_l, "volume radius")->capture_default_str();
  c_lr->add_option("--beta", lr_beta, "inverse-temperature rate")
      ->capture_default_str();
  c_lr->add_option("--h", lr_h, "ghost field")->capture_default_str();
  c_lr->add_option("--k", lr_k, "tail threshold for the truncation bound")
      ->capture_default_str();
  c_lr->add_option("--full-l", lr_full_l,
                   "surrogate volume radius for tail-bound (0 = auto)");
  c_lr->add_option("--check", lr_check,
                   "spec | sample | tail-bound | modification | inequality")
      ->capture_default_str();

  auto* c_accept =
      app.add_subcommand("accept", "run the ten acceptance criteria");

  for (auto* sc : {c_graph, c_sample, c_exact, c_order, c_diff, c_decay,
                   c_scan, c_lr, c_accept}) {
    sc->set_help_flag("--help", "print help and exit");
    // global flags (--seed, --out, ...) may follow the subcommand name
    sc->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  if (g.threads != 0) thread_override() = g.threads;

  try {
    if (c_graph->parsed()) return cmd_graph(g, po_graph);
    if (c_sample->parsed())
      return cmd_sample(g, po_sample, sample_l, sample_kind, sample_p, sample_h,
                        sample_cap);
    if (c_exact->parsed())
      return cmd_exact(g, po_exact, exact_kind, exact_p, exact_unmodified);
    if (c_order->parsed())
      return cmd_order_param(g, po_order, order_ls, order_kind, order_p,
                             order_hs);
    if (c_diff->parsed())
      return cmd_diffineq(g, po_diff, diff_ls, diff_kind, diff_ps, diff_hs);
    if (c_decay->parsed())
      return cmd_decay_fit(g, po_decay, decay_l, decay_kind, decay_p,
                           decay_mode, decay_nmin, decay_nmax);
    if (c_scan->parsed())
      return cmd_scan(g, po_scan, scan_kind, scan_pmin, scan_pmax, scan_pstep,
                      scan_ls);
    if (c_lr->parsed()) {
      if (lr_full_l == 0) lr_full_l = 3 * std::max(1, lr_l);
      return cmd_longrange(g, po_lr, lr_kernel, lr_rate, lr_exponent, lr_range,
                           lr_l, lr_beta, lr_h, lr_k, lr_full_l, lr_check);
    }
    if (c_accept->parsed()) return cmd_accept(g);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
