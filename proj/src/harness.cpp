#include "condstable/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "condstable/acceptance.hpp"
#include "condstable/asymptotics.hpp"
#include "condstable/errors.hpp"
#include "condstable/parallel.hpp"
#include "condstable/specfun.hpp"

namespace condstable {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct NamedSubcommand {
  Subcommand sc;
  const char* name;
};

constexpr NamedSubcommand kSubcommands[] = {
    {Subcommand::VerifyH, "verify-h"},       {Subcommand::Overshoot, "overshoot"},
    {Subcommand::Martingale, "martingale"},  {Subcommand::Kernel, "kernel"},
    {Subcommand::CkCheck, "ck-check"},       {Subcommand::ExpCond, "exp-cond"},
    {Subcommand::TimeCond, "time-cond"},     {Subcommand::TailExponent, "tail-exponent"},
    {Subcommand::Profile, "profile"},        {Subcommand::Bound, "bound"},
    {Subcommand::Cancellation, "cancellation"}, {Subcommand::Drift, "drift"},
};

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> grid_or(const std::vector<double>& grid, double scalar) {
  return grid.empty() ? std::vector<double>{scalar} : grid;
}

std::vector<double> grid_or(const std::vector<double>& grid, std::vector<double> fallback) {
  return grid.empty() ? fallback : grid;
}

EventSpec make_event(const ExperimentConfig& c) {
  if (c.event == "always") return EventSpec::always();
  if (c.event == "in") return EventSpec::position_in(c.event_a, c.event_b);
  if (c.event == "inf-above") return EventSpec::inf_above(c.event_a);
  if (c.event == "sup-below") return EventSpec::sup_below(c.event_b);
  throw ConfigError("unknown event '" + c.event + "' (always, in, inf-above, sup-below)");
}

ClockMode clock_mode(const ExperimentConfig& c) {
  std::string name = c.clock;
  if (name.empty()) name = c.subcommand == Subcommand::Cancellation ? "integrated" : "sampled";
  if (name == "sampled") return ClockMode::Sampled;
  if (name == "integrated") return ClockMode::Integrated;
  throw ConfigError("unknown clock '" + c.clock + "' (sampled, integrated)");
}

/// Bin edges on the side of x0: the configured range, mirrored for x0 < -1.
Eigen::VectorXd side_edges(const ExperimentConfig& c) {
  double lo = c.bin_lo, hi = c.bin_hi;
  if (c.x0 < -1.0 && lo >= 1.0) {
    lo = -c.bin_hi;
    hi = -c.bin_lo;
  }
  return Eigen::VectorXd::LinSpaced(c.bins + 1, lo, hi);
}

ResultRecord rec(std::string quantity, double value, double stderr, std::uint64_t n) {
  ResultRecord r;
  r.quantity = std::move(quantity);
  r.value = value;
  r.stderr = stderr;
  r.n = n;
  return r;
}

ResultRecord rec(std::string quantity, const MCEstimate& e) {
  return rec(std::move(quantity), e.value, e.stderr, e.n);
}

struct PassageAcc {
  Moments exceeds, drift, unresolved;
  std::vector<double> overshoots;
  void merge(const PassageAcc& o) {
    exceeds.merge(o.exceeds);
    drift.merge(o.drift);
    unresolved.merge(o.unresolved);
    overshoots.insert(overshoots.end(), o.overshoots.begin(), o.overshoots.end());
  }
};

/// Subordinator passages over -1 from x0; unresolved drift crossings are
/// excluded from the overshoot sample and counted.
PassageAcc run_passages(const StableParams& p, double x0, const PathConfig& pc, std::uint64_t n,
                        const RngStream& rng, double threshold) {
  return run_replicates(n, PassageAcc{}, [&](std::size_t i, PassageAcc& a) {
    RngStream r = rng.child(i);
    const HittingOutcome o = first_passage_subordinator(p, x0, -1.0, pc, r);
    a.drift.add(o.drift_refined ? 1.0 : 0.0);
    a.unresolved.add(o.unresolved_drift ? 1.0 : 0.0);
    if (o.unresolved_drift) return;
    a.exceeds.add(o.overshoot > threshold ? 1.0 : 0.0);
    a.overshoots.push_back(o.overshoot);
  });
}

Diagnostics passage_diagnostics(const PassageAcc& a) {
  Diagnostics d;
  d.drift_crossing_fraction = a.drift.mean;
  d.unresolved_fraction = a.unresolved.mean;
  return d;
}

std::vector<ResultRecord> run_verify_h(const ExperimentConfig& c, const StableParams& p,
                                       const PathConfig& pc, const RngStream& rng) {
  std::vector<ResultRecord> out;
  if (p.is_subordinator()) {
    out.push_back(rec("h", h_subordinator(c.alpha, c.x0), 0.0, 0));
    if (c.x0 < -1.0) {
      const PassageAcc a = run_passages(p, c.x0, pc, c.n, rng, 2.0);
      ResultRecord r = rec("h_mc", a.exceeds.mean, a.exceeds.stderr(),
                           static_cast<std::uint64_t>(a.exceeds.count));
      r.notes = "P(overshoot > 2) over -1";
      r.diagnostics = passage_diagnostics(a);
      out.push_back(r);
    }
  } else {
    out.push_back(rec("h", h_updown(c.alpha, c.x0), 0.0, 0));
    Diagnostics d;
    ResultRecord r = rec("martingale_mc", weighted_expectation(p, c.x0, c.t, EventSpec::always(),
                                                               pc, c.n, rng, &d));
    r.t = c.t;
    r.diagnostics = d;
    out.push_back(r);
  }
  return out;
}

std::vector<ResultRecord> run_overshoot(const ExperimentConfig& c, const StableParams& p,
                                        const PathConfig& pc, const RngStream& rng) {
  if (!p.is_subordinator()) throw DomainError("overshoot requires alpha < 1");
  if (!(c.x0 < -1.0)) throw DomainError("overshoot requires x0 < -1");
  const double d = -1.0 - c.x0;
  const PassageAcc a = run_passages(p, c.x0, pc, c.n, rng, 2.0);
  const std::vector<double> zs = grid_or(c.z_grid, std::vector<double>{0.5, 1.0, 2.0, 4.0, 8.0});
  const double m = static_cast<double>(a.overshoots.size());
  std::vector<ResultRecord> out;
  for (double z : zs) {
    ResultRecord exact = rec("overshoot_tail", overshoot_tail(c.alpha, d, z), 0.0, 0);
    exact.abscissa = z;
    out.push_back(exact);
    const double k = static_cast<double>(
        std::count_if(a.overshoots.begin(), a.overshoots.end(), [&](double o) { return o > z; }));
    const double pz = m > 0 ? k / m : kNaN;
    ResultRecord mc = rec("overshoot_tail_mc", pz, m > 0 ? std::sqrt(pz * (1 - pz) / m) : kNaN,
                          static_cast<std::uint64_t>(m));
    mc.abscissa = z;
    out.push_back(mc);
  }
  const double ks =
      ks_statistic(a.overshoots, [&](double z) { return 1.0 - overshoot_tail(c.alpha, d, z); });
  out.push_back(rec("ks_statistic", ks, 0.0, static_cast<std::uint64_t>(m)));
  out.push_back(rec("ks_critical_1pct", ks_critical(0.01, a.overshoots.size()), 0.0,
                    static_cast<std::uint64_t>(m)));
  ResultRecord diag = rec("drift_crossing_fraction", a.drift.mean, a.drift.stderr(), c.n);
  diag.diagnostics = passage_diagnostics(a);
  out.push_back(diag);
  out.push_back(rec("unresolved_fraction", a.unresolved.mean, a.unresolved.stderr(), c.n));
  return out;
}

std::vector<ResultRecord> run_martingale(const ExperimentConfig& c, const StableParams& p,
                                         const PathConfig& pc, const RngStream& rng) {
  const std::vector<double> ts = grid_or(c.t_grid, c.t);
  Diagnostics d;
  const EventSpec ev = make_event(c);
  const auto est = weighted_expectation_curve(p, c.x0, ts, ev, pc, c.n, rng, &d);
  std::vector<ResultRecord> out;
  const char* name = ev.kind == EventSpec::Kind::Always ? "martingale" : "weighted_expectation";
  for (std::size_t k = 0; k < ts.size(); ++k) {
    ResultRecord r = rec(name, est[k]);
    r.t = ts[k];
    r.abscissa = ts[k];
    r.diagnostics = d;
    out.push_back(r);
  }
  return out;
}

std::vector<ResultRecord> run_kernel(const ExperimentConfig& c, const StableParams& p,
                                     const PathConfig& pc, const RngStream& rng) {
  const Eigen::VectorXd edges = side_edges(c);
  const KernelEstimate k = transition_kernel_estimate(p, c.x0, c.t, edges, pc, c.n, rng);
  std::vector<ResultRecord> out;
  for (Eigen::Index j = 0; j + 1 < edges.size(); ++j) {
    ResultRecord r = rec("kernel_mass", k.masses[j], k.stderrs[j], c.n);
    r.abscissa = 0.5 * (edges[j] + edges[j + 1]);
    r.notes = "bin=[" + fmt(edges[j]) + ";" + fmt(edges[j + 1]) + ")";
    out.push_back(r);
  }
  out.push_back(rec("total_mass", k.total_mass, std::sqrt(k.stderrs.squaredNorm()), c.n));
  out.push_back(rec("opposite_mass", k.opposite_mass, k.opposite_stderr, c.n));
  return out;
}

std::vector<ResultRecord> run_ck(const ExperimentConfig& c, const StableParams& p,
                                 const PathConfig& pc, const RngStream& rng) {
  const ChapmanKolmogorovResult r =
      chapman_kolmogorov_check(p, c.x0, c.s, c.t, side_edges(c), pc, c.n, rng);
  return {rec("ck_discrepancy", r.discrepancy, 0.0, c.n), rec("ck_mc_bound", r.mc_bound, 0.0, c.n),
          rec("ck_binning_bound", r.binning_bound, 0.0, c.n), rec("ck_bound", r.bound, 0.0, c.n),
          rec("ck_within_bound", r.discrepancy <= r.bound ? 1.0 : 0.0, 0.0, c.n)};
}

std::vector<ResultRecord> run_exp_cond(const ExperimentConfig& c, const StableParams& p,
                                       const PathConfig& pc, const RngStream& rng) {
  const std::vector<double> qs = grid_or(c.q_grid, c.q);
  const EventSpec ev = make_event(c);
  const auto est = exp_conditioning_curve(p, c.x0, c.t, qs, ev, pc, c.n, rng, clock_mode(c));
  std::vector<ResultRecord> out;
  for (std::size_t k = 0; k < qs.size(); ++k) {
    ResultRecord r = rec("exp_conditioning", est[k].estimate);
    r.q = qs[k];
    r.abscissa = qs[k];
    out.push_back(r);
    ResultRecord a = rec("acceptance", est[k].acceptance);
    a.q = qs[k];
    out.push_back(a);
  }
  out.push_back(rec("weighted_expectation", weighted_expectation(p, c.x0, c.t, ev, pc, c.n, rng)));
  return out;
}

std::vector<ResultRecord> run_time_cond(const ExperimentConfig& c, const StableParams& p,
                                        const PathConfig& pc, const RngStream& rng) {
  const std::vector<double> ss = grid_or(c.s_grid, c.s);
  const EventSpec ev = make_event(c);
  std::vector<ResultRecord> out;
  for (std::size_t k = 0; k < ss.size(); ++k) {
    const auto e = time_conditioning_estimate(p, c.x0, ss[k], c.t, ev, pc, c.n, rng.child(k));
    ResultRecord r = rec("time_conditioning", e.estimate);
    r.s = ss[k];
    r.abscissa = ss[k];
    out.push_back(r);
  }
  out.push_back(rec("weighted_expectation",
                    weighted_expectation(p, c.x0, c.t, ev, pc, c.n, rng.child(ss.size()))));
  return out;
}

std::vector<ResultRecord> run_tail(const ExperimentConfig& c, const StableParams& p,
                                   const PathConfig& pc, const RngStream& rng) {
  const std::vector<double> ss =
      grid_or(c.s_grid, std::vector<double>{1, 2, 5, 10, 20, 50, 100});
  const FitResult f = survival_tail_exponent(p, c.x0, ss, pc, c.n, rng);
  std::vector<ResultRecord> out;
  for (const GridPoint& g : f.grid) {
    ResultRecord r = rec("survival", g.estimate, g.stderr, c.n);
    r.s = g.abscissa;
    r.abscissa = g.abscissa;
    r.notes = g.used ? "" : "excluded from fit";
    out.push_back(r);
  }
  out.push_back(rec("tail_exponent", f.exponent, f.exponent_stderr, c.n));
  out.push_back(rec("r_squared", f.r_squared, 0.0, c.n));
  out.push_back(rec("target_exponent", 1.0 / c.alpha - 1.0, 0.0, 0));
  return out;
}

std::vector<ResultRecord> run_profile(const ExperimentConfig& c, const StableParams& p,
                                      const PathConfig& pc, const RngStream& rng) {
  const std::vector<double> xs = grid_or(c.x_list, std::vector<double>{-2.0, -3.0});
  const auto pts = profile_ratio_check(p, xs, c.q, pc, c.n, rng, clock_mode(c));
  std::vector<ResultRecord> out;
  for (const ProfilePoint& pt : pts) {
    ResultRecord s = rec("eq_survival", pt.survival);
    s.x0 = pt.x;
    s.q = c.q;
    out.push_back(s);
    ResultRecord r = rec("profile_ratio", pt.ratio, pt.stderr, c.n);
    r.x0 = pt.x;
    r.q = c.q;
    r.abscissa = pt.x;
    out.push_back(r);
    ResultRecord pr = rec("profile_predicted", pt.predicted, 0.0, 0);
    pr.x0 = pt.x;
    pr.q = c.q;
    out.push_back(pr);
  }
  return out;
}

std::vector<ResultRecord> run_bound(const ExperimentConfig& c, const StableParams& p,
                                    const PathConfig& pc, const RngStream& rng) {
  const std::vector<double> qs = grid_or(c.q_grid, std::vector<double>{1e-1, 1e-2, 1e-3});
  const auto pts = upper_bound_check(p, c.x0, qs, pc, c.n, rng, clock_mode(c));
  std::vector<ResultRecord> out;
  for (const BoundPoint& b : pts) {
    ResultRecord l = rec("bound_lhs", b.lhs, b.stderr, c.n);
    l.q = b.q;
    l.abscissa = b.q;
    out.push_back(l);
    ResultRecord r = rec("bound_rhs", b.rhs, 0.0, 0);
    r.q = b.q;
    out.push_back(r);
    ResultRecord h = rec("bound_holds", b.holds ? 1.0 : 0.0, 0.0, c.n);
    h.q = b.q;
    out.push_back(h);
  }
  return out;
}

std::vector<ResultRecord> run_cancellation(const ExperimentConfig& c, const StableParams& p,
                                           const PathConfig& pc, const RngStream& rng) {
  const std::vector<double> qs = grid_or(c.q_grid, std::vector<double>{1e-3, 1e-4, 1e-5});
  const CancellationResult res = cancellation_rate(p, c.x0, c.t, qs, pc, c.n, rng, clock_mode(c));
  std::vector<ResultRecord> out;
  for (std::size_t k = 0; k < qs.size(); ++k) {
    ResultRecord r = rec("stratum_mass", res.stratum[k].estimate);
    r.q = qs[k];
    r.abscissa = qs[k];
    out.push_back(r);
  }
  out.push_back(rec("cancellation_exponent", res.fit.exponent, res.fit.exponent_stderr, c.n));
  out.push_back(rec("r_squared", res.fit.r_squared, 0.0, c.n));
  out.push_back(rec("target_exponent", 2.0 / c.alpha - 1.0, 0.0, 0));
  out.push_back(rec("monotone", res.monotone ? 1.0 : 0.0, 0.0, c.n));
  return out;
}

std::vector<ResultRecord> run_drift(const ExperimentConfig& c, const StableParams& p,
                                    const PathConfig& pc, const RngStream& rng) {
  const std::vector<double> ts = grid_or(c.t_grid, std::vector<double>{1.0, 5.0, 25.0, 50.0});
  std::vector<ResultRecord> out;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    std::vector<double> ends = conditioned_endpoints(p, c.x0, ts[k], pc, c.pool, c.n, rng.child(k));
    std::sort(ends.begin(), ends.end());
    const double nn = static_cast<double>(ends.size());
    const auto at = [&](double pos) {
      const auto i = static_cast<std::size_t>(std::clamp(pos, 0.0, nn - 1.0));
      return ends[i];
    };
    const double median = at(0.5 * (nn - 1.0));
    // Distribution-free 95% interval for the median, as a standard error.
    const double half = 0.98 * std::sqrt(nn);
    const double se = (at(0.5 * nn + half) - at(0.5 * nn - half)) / (2.0 * 1.96);
    ResultRecord r = rec("median_endpoint", median, se, c.n);
    r.t = ts[k];
    r.abscissa = ts[k];
    r.notes = "pool=" + std::to_string(c.pool);
    out.push_back(r);
  }
  return out;
}

nlohmann::ordered_json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::ordered_json grid_json(const std::vector<double>& g) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (double v : g) a.push_back(num(v));
  return a;
}

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["subcommand"] = to_string(c.subcommand);
  j["alpha"] = num(c.alpha);
  j["x0"] = num(c.x0);
  j["t"] = num(c.t);
  j["s"] = num(c.s);
  j["q"] = num(c.q);
  j["ts"] = grid_json(c.t_grid);
  j["ss"] = grid_json(c.s_grid);
  j["qs"] = grid_json(c.q_grid);
  j["xs"] = grid_json(c.x_list);
  j["zs"] = grid_json(c.z_grid);
  j["n"] = c.n;
  j["dt"] = num(c.dt);
  j["eps"] = num(c.eps);
  j["refine_levels"] = c.refine_levels;
  const PathConfig pc = path_config(c);
  j["scheme"] = pc.scheme == Scheme::Skeleton ? "skeleton" : "jump-adapted";
  j["clock"] = clock_mode(c) == ClockMode::Sampled ? "sampled" : "integrated";
  j["event"] = c.event;
  j["event_a"] = num(c.event_a);
  j["event_b"] = num(c.event_b);
  j["bins"] = c.bins;
  j["bin_lo"] = num(c.bin_lo);
  j["bin_hi"] = num(c.bin_hi);
  j["pool"] = c.pool;
  j["seed"] = c.seed;
  j["format"] = c.format == OutputFormat::Csv ? "csv" : "json";
  return j;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

double pick(double own, double fallback) { return std::isnan(own) ? fallback : own; }

}  // namespace

std::string to_string(Subcommand sc) {
  for (const auto& [s, name] : kSubcommands)
    if (s == sc) return name;
  return "unknown";
}

Subcommand parse_subcommand(const std::string& name) {
  for (const auto& [s, n] : kSubcommands)
    if (name == n) return s;
  throw ConfigError("unknown subcommand '" + name + "'");
}

std::vector<std::string> subcommand_names() {
  std::vector<std::string> out;
  for (const auto& entry : kSubcommands) out.emplace_back(entry.name);
  return out;
}

void ExperimentConfig::validate() const {
  if (n == 0) throw ConfigError("n must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(eps > 0.0) || !(eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
  if (refine_levels < 0 || refine_levels > 20) throw ConfigError("refine_levels must lie in [0, 20]");
  if (!scheme.empty() && scheme != "skeleton" && scheme != "jump-adapted")
    throw ConfigError("scheme must be skeleton or jump-adapted");
  if (bins < 1) throw ConfigError("bins must be >= 1");
  if (!(bin_lo < bin_hi)) throw ConfigError("bin_lo must be < bin_hi");
  if (pool == 0) throw ConfigError("pool must be >= 1");
  make_event(*this);
  clock_mode(*this);
  if (subcommand == Subcommand::Profile && !x_list.empty() && x_list.size() < 2)
    throw ConfigError("profile needs at least two start points");
  if (subcommand == Subcommand::TimeCond) {
    for (double sv : grid_or(s_grid, s))
      if (!(sv > t)) throw ConfigError("time-cond needs every s > t");
  }
}

PathConfig path_config(const ExperimentConfig& c) {
  PathConfig pc;
  pc.dt = c.dt;
  pc.eps = c.eps;
  pc.refine_levels = c.refine_levels;
  if (c.scheme == "skeleton") {
    pc.scheme = Scheme::Skeleton;
  } else if (c.scheme == "jump-adapted") {
    pc.scheme = Scheme::JumpAdapted;
  } else {
    const bool short_horizon = c.subcommand == Subcommand::Martingale ||
                               c.subcommand == Subcommand::Kernel ||
                               c.subcommand == Subcommand::VerifyH;
    pc.scheme = short_horizon ? Scheme::Skeleton : Scheme::JumpAdapted;
  }
  return pc;
}

std::vector<ResultRecord> run(const ExperimentConfig& c) {
  c.validate();
  const StableParams p = make_params(c.alpha);
  const PathConfig pc = path_config(c);
  const RngStream rng(c.seed, 0);
  switch (c.subcommand) {
    case Subcommand::VerifyH:
      return run_verify_h(c, p, pc, rng);
    case Subcommand::Overshoot:
      return run_overshoot(c, p, pc, rng);
    case Subcommand::Martingale:
      return run_martingale(c, p, pc, rng);
    case Subcommand::Kernel:
      return run_kernel(c, p, pc, rng);
    case Subcommand::CkCheck:
      return run_ck(c, p, pc, rng);
    case Subcommand::ExpCond:
      return run_exp_cond(c, p, pc, rng);
    case Subcommand::TimeCond:
      return run_time_cond(c, p, pc, rng);
    case Subcommand::TailExponent:
      return run_tail(c, p, pc, rng);
    case Subcommand::Profile:
      return run_profile(c, p, pc, rng);
    case Subcommand::Bound:
      return run_bound(c, p, pc, rng);
    case Subcommand::Cancellation:
      return run_cancellation(c, p, pc, rng);
    case Subcommand::Drift:
      return run_drift(c, p, pc, rng);
  }
  throw ConfigError("unknown subcommand");
}

void write_csv(const ExperimentConfig& c, const std::vector<ResultRecord>& records,
               std::ostream& os) {
  const nlohmann::ordered_json cfg = config_json(c);
  for (const auto& [key, value] : cfg.items()) os << "# " << key << "=" << value.dump() << "\n";
  os << "quantity,value,stderr,n,alpha,x0,t,s,q,dt,eps,seed,notes\n";
  for (const ResultRecord& r : records) {
    std::string notes = r.notes;
    if (r.diagnostics) {
      const Diagnostics& d = *r.diagnostics;
      if (!notes.empty()) notes += "; ";
      notes += "steps_per_path=" + fmt(d.steps_per_path) +
               "; refinements_per_path=" + fmt(d.refinements_per_path) +
               "; drift_crossing_fraction=" + fmt(d.drift_crossing_fraction) +
               "; unresolved_fraction=" + fmt(d.unresolved_fraction);
    }
    os << csv_field(r.quantity) << ',' << fmt(r.value) << ',' << fmt(r.stderr) << ',' << r.n
       << ',' << fmt(c.alpha) << ',' << fmt(pick(r.x0, c.x0)) << ',' << fmt(pick(r.t, c.t))
       << ',' << fmt(pick(r.s, c.s)) << ',' << fmt(pick(r.q, c.q)) << ',' << fmt(c.dt) << ','
       << fmt(c.eps) << ',' << c.seed << ',' << csv_field(notes) << "\n";
  }
}

void write_json(const ExperimentConfig& c, const std::vector<ResultRecord>& records,
                std::ostream& os) {
  nlohmann::ordered_json doc;
  doc["schema"] = "condstable.result/1";
  doc["config"] = config_json(c);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const ResultRecord& r : records) {
    nlohmann::ordered_json j;
    j["quantity"] = r.quantity;
    j["value"] = num(r.value);
    j["stderr"] = num(r.stderr);
    j["n"] = r.n;
    j["alpha"] = num(c.alpha);
    j["x0"] = num(pick(r.x0, c.x0));
    j["t"] = num(pick(r.t, c.t));
    j["s"] = num(pick(r.s, c.s));
    j["q"] = num(pick(r.q, c.q));
    j["dt"] = num(c.dt);
    j["eps"] = num(c.eps);
    j["seed"] = c.seed;
    j["notes"] = r.notes;
    if (r.diagnostics) {
      j["diagnostics"] = {{"steps_per_path", num(r.diagnostics->steps_per_path)},
                          {"refinements_per_path", num(r.diagnostics->refinements_per_path)},
                          {"drift_crossing_fraction", num(r.diagnostics->drift_crossing_fraction)},
                          {"unresolved_fraction", num(r.diagnostics->unresolved_fraction)}};
    }
    arr.push_back(std::move(j));
  }
  doc["records"] = std::move(arr);
  os << doc.dump(2) << "\n";
}

void write_plot_data(const std::vector<ResultRecord>& records, std::ostream& os) {
  std::string current;
  for (const ResultRecord& r : records) {
    if (!std::isfinite(r.abscissa)) continue;
    if (r.quantity != current) {
      if (!current.empty()) os << "\n\n";
      current = r.quantity;
      os << "# " << current << "\n# abscissa value stderr\n";
    }
    os << fmt(r.abscissa) << ' ' << fmt(r.value) << ' ' << fmt(r.stderr) << "\n";
  }
}

void write_outputs(const ExperimentConfig& c, const std::vector<ResultRecord>& records) {
  auto emit = [&](std::ostream& os) {
    if (c.format == OutputFormat::Csv) {
      write_csv(c, records, os);
    } else {
      write_json(c, records, os);
    }
  };
  if (c.out_path.empty()) {
    emit(std::cout);
  } else {
    std::ofstream f(c.out_path, std::ios::binary);
    if (!f) throw ResourceError("cannot open output file " + c.out_path);
    emit(f);
  }
  if (!c.plot_path.empty()) {
    std::ofstream f(c.plot_path, std::ios::binary);
    if (!f) throw ResourceError("cannot open plot file " + c.plot_path);
    write_plot_data(records, f);
  }
}

IntervalReduction reduce_general_interval(double a, double b, double x) {
  if (!(a < b)) throw DomainError("interval needs a < b");
  if (x >= a && x <= b) throw DomainError("x must lie outside [a, b]");
  IntervalReduction r;
  r.scale = 0.5 * (b - a);
  r.shift = 0.5 * (a + b);
  r.x_std = (2.0 * x - (a + b)) / (b - a);
  return r;
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const DomainError&) {
    return kExitDomain;
  } catch (const DegenerateConditioning&) {
    return kExitDegenerate;
  } catch (const FitDegenerate&) {
    return kExitDegenerate;
  } catch (const ToleranceNotMet&) {
    return kExitTolerance;
  } catch (...) {
    return kExitOther;
  }
}

Invocation parse_command_line(int argc, const char* const* argv) {
  Invocation inv;
  ExperimentConfig& c = inv.config;
  CLI::App app{"Simulation and verification of one-sided stable processes conditioned to avoid [-1,1]",
               "condstable"};
  std::string subcommand;
  std::string format = "csv";
  std::string names;
  for (const std::string& s : subcommand_names()) names += (names.empty() ? "" : ", ") + s;

  app.set_config("--config", "", "Flat key=value file; flags override its values");
  app.add_option("subcommand", subcommand, "One of: " + names);
  app.add_option("--alpha", c.alpha, "Stability index in (0,1) or (1,2)")->capture_default_str();
  app.add_option("--x0", c.x0, "Start point outside [-1,1]")->capture_default_str();
  app.add_option("--t", c.t, "Observation time")->capture_default_str();
  app.add_option("--s", c.s, "Second time (ck-check, time-cond)")->capture_default_str();
  app.add_option("--q", c.q, "Clock rate")->capture_default_str();
  app.add_option("--ts", c.t_grid, "Time grid")->delimiter(',');
  app.add_option("--ss", c.s_grid, "s grid")->delimiter(',');
  app.add_option("--qs", c.q_grid, "q grid")->delimiter(',');
  app.add_option("--xs", c.x_list, "Start points (profile)")->delimiter(',');
  app.add_option("--zs", c.z_grid, "Overshoot levels")->delimiter(',');
  app.add_option("--n", c.n, "Replicates")->capture_default_str();
  app.add_option("--dt", c.dt, "Skeleton step")->capture_default_str();
  app.add_option("--eps", c.eps, "Subordinator jump cutoff")->capture_default_str();
  app.add_option("--refine-levels", c.refine_levels, "Barrier refinement halvings")
      ->capture_default_str();
  app.add_option("--scheme", c.scheme, "skeleton or jump-adapted (default per subcommand)");
  app.add_option("--clock", c.clock, "sampled or integrated (default per subcommand)");
  app.add_option("--event", c.event, "always, in, inf-above, sup-below")->capture_default_str();
  app.add_option("--event-a", c.event_a, "Event lower parameter");
  app.add_option("--event-b", c.event_b, "Event upper parameter");
  app.add_option("--bins", c.bins, "Kernel bins")->capture_default_str();
  app.add_option("--bin-lo", c.bin_lo, "Kernel range start (mirrored for x0 < -1)")
      ->capture_default_str();
  app.add_option("--bin-hi", c.bin_hi, "Kernel range end")->capture_default_str();
  app.add_option("--pool", c.pool, "Resampling pool size (drift)")->capture_default_str();
  app.add_option("--seed", c.seed, "Base seed")->capture_default_str();
  app.add_option("--out", c.out_path, "Output file (stdout when omitted)");
  app.add_option("--plot", c.plot_path, "Plot data file");
  app.add_option("--format", format, "csv or json")->capture_default_str();
  app.add_option("--workers", c.workers, "Worker threads (default from CONDSTABLE_WORKERS)");
  app.add_flag("--self-check", inv.self_check, "Run the acceptance suite at reduced n");
  app.add_option("--check-scale", inv.check_scale, "Replicate scale of --self-check")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    inv.help = app.help();
    return inv;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
  if (format == "csv") {
    c.format = OutputFormat::Csv;
  } else if (format == "json") {
    c.format = OutputFormat::Json;
  } else {
    throw ConfigError("format must be csv or json");
  }
  if (!inv.self_check) {
    if (subcommand.empty()) throw ConfigError("a subcommand is required (" + names + ")");
    c.subcommand = parse_subcommand(subcommand);
    c.validate();
  }
  if (!(inv.check_scale > 0.0)) throw ConfigError("check-scale must be > 0");
  return inv;
}

int main_entry(int argc, const char* const* argv) {
  try {
    const Invocation inv = parse_command_line(argc, argv);
    if (!inv.help.empty()) {
      std::cout << inv.help;
      return kExitOk;
    }
    if (inv.config.workers > 0) set_worker_count(inv.config.workers);
    const auto start = std::chrono::steady_clock::now();
    int code = kExitOk;
    if (inv.self_check) {
      AcceptanceOptions opt;
      opt.scale = inv.check_scale;
      for (int id = 1; id <= kCriterionCount; ++id) {
        const CriterionResult r = run_criterion(id, opt);
        std::cout << format_result(r) << std::flush;
        if (!r.pass) code = kExitTolerance;
      }
    } else {
      write_outputs(inv.config, run(inv.config));
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "wall_time_s=" << secs << "\n";
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for_current_exception();
  }
}

}  // namespace condstable
