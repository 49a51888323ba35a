#include "msl/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <json.hpp>

#include "msl/asymptotics.hpp"
#include "msl/csv.hpp"
#include "msl/error.hpp"
#include "msl/fit_nr.hpp"
#include "msl/fit_sa.hpp"
#include "msl/fpt.hpp"
#include "msl/likelihood.hpp"
#include "msl/selection.hpp"
#include "msl/simulate.hpp"

namespace msl {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

// Config object with typed access; keys never read are rejected by done().
class Section {
 public:
  Section(const json& j, std::string where) : j_(&j), where_(std::move(where)) {
    if (!j.is_object()) fail(ErrorKind::validation, where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_->contains(key); }

  template <class T>
  T req(const std::string& key) {
    if (!has(key)) fail(ErrorKind::validation, where_ + ": missing key '" + key + "'");
    return get<T>(key);
  }

  template <class T>
  T opt(const std::string& key, T def) {
    return has(key) ? get<T>(key) : def;
  }

  Section sub(const std::string& key) {
    if (!has(key)) fail(ErrorKind::validation, where_ + ": missing section '" + key + "'");
    seen_.insert(key);
    return Section(j_->at(key), where_ + "." + key);
  }

  std::optional<Section> opt_sub(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return sub(key);
  }

  void done() const {
    for (const auto& [k, v] : j_->items()) {
      if (!seen_.count(k)) fail(ErrorKind::validation, where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  template <class T>
  T get(const std::string& key) {
    seen_.insert(key);
    try {
      return j_->at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::validation, where_ + "." + key + ": wrong type");
    }
  }

  const json* j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::numerical, "SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::validation, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes files into the output directory and remembers them for the manifest.
class Bundle {
 public:
  explicit Bundle(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  fs::path path(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream out(path(name));
    out << j.dump(2) << '\n';
  }

  void finish() {
    json m = json::array();
    for (const auto& f : files_) m.push_back({{"file", f}, {"sha256", sha256_hex(slurp(dir_ / f))}});
    std::ofstream out(dir_ / "manifest.json");
    out << json{{"files", m}}.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

json vec(const std::vector<double>& v) { return json(v); }

json params_json(const ModelParams& xi) {
  const auto b = xi.poly.coefficients();
  return {{"eta", xi.eta}, {"beta", std::vector<double>(b.begin(), b.end())}, {"sigma2", xi.sigma2}};
}

ModelParams read_model(Section s) {
  const double eta = s.req<double>("eta");
  const auto beta = s.req<std::vector<double>>("beta");
  const double sigma2 = s.req<double>("sigma2");
  s.done();
  ModelParams xi{{eta, PolyCoeffs(beta)}, sigma2};
  xi.validate();
  return xi;
}

struct FitSettings {
  std::string method = "nr";
  NrOptions nr;
  SaSchedule sa;
  double box_confidence = 0.999;
};

FitSettings read_fit_settings(Section& s, const RunOptions& o, std::uint64_t seed) {
  FitSettings f;
  f.method = o.method.value_or(s.opt<std::string>("method", "nr"));
  if (f.method != "nr" && f.method != "sa") fail(ErrorKind::validation, "method must be 'nr' or 'sa'");
  if (auto nr = s.opt_sub("nr")) {
    f.nr.tol = nr->opt("tol", f.nr.tol);
    f.nr.max_iter = nr->opt("max_iter", f.nr.max_iter);
    f.nr.damping = nr->opt("damping", f.nr.damping);
    nr->done();
  }
  if (auto sa = s.opt_sub("sa")) {
    f.sa.p0 = sa->opt("p0", f.sa.p0);
    f.sa.gamma = sa->opt("gamma", f.sa.gamma);
    f.sa.chain_length = sa->opt("chain_length", f.sa.chain_length);
    f.sa.max_iter = sa->opt("max_iter", f.sa.max_iter);
    f.sa.t_final = sa->opt("t_final", f.sa.t_final);
    f.sa.replications = sa->opt("replications", f.sa.replications);
    f.sa.pilot_pairs = sa->opt("pilot_pairs", f.sa.pilot_pairs);
    f.box_confidence = sa->opt("box_confidence", f.box_confidence);
    sa->done();
  }
  f.sa.seed = seed;
  f.sa.validate();
  return f;
}

struct FitOutcome {
  ModelParams xi;
  json info;
  bool converged = true;
};

FitOutcome fit_panel(const PathPanel& panel, std::size_t p, const FitSettings& f) {
  if (f.method == "nr") {
    const auto r = fit(panel, p, f.nr);
    json trace = vec(r.trace);
    return {r.xi_hat,
            {{"method", "nr"},
             {"converged", r.converged},
             {"iterations", r.iterations},
             {"residual_norm", r.residual_norm},
             {"stop_reason", r.stop_reason},
             {"start", r.start_used},
             {"trace", trace}},
            r.converged};
  }
  const auto box = build_box(panel, p, f.box_confidence);
  const auto r = anneal(panel, p, box, f.sa);
  json reps = json::array();
  for (const auto& rep : r.per_replication) {
    reps.push_back({{"params", params_json(rep.xi)},
                    {"objective", rep.objective},
                    {"iterations", rep.iterations},
                    {"t0", rep.t0},
                    {"stop_reason", rep.stop_reason}});
  }
  json jb = json::array();
  for (std::size_t k = 0; k < box.dim(); ++k) jb.push_back({box.axis(k).lo, box.axis(k).hi});
  return {r.xi_hat, {{"method", "sa"}, {"box", jb}, {"replications", reps}}, true};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

PathPanel read_input(Section& s, const fs::path& base, const RunOptions& o) {
  const auto file = resolve(base, s.req<std::string>("input"));
  const bool scale = o.scale_max || s.opt("scale_max", false);
  return read_panel_csv(file, scale);
}

json metadata(const RunOptions& o, const std::string& cfg_text, std::uint64_t seed) {
  return {{"command", o.command}, {"config_sha256", sha256_hex(cfg_text)}, {"seed", seed}, {"version", kVersion}};
}

json ci_json(const CiReport& rep) {
  json entries = json::array();
  for (const auto& e : rep.entries) {
    json iv = json::array();
    for (std::size_t k = 0; k < rep.levels.size(); ++k) {
      iv.push_back({{"level", rep.levels[k]}, {"lower", e.intervals[k].first}, {"upper", e.intervals[k].second}});
    }
    entries.push_back({{"name", e.name}, {"estimate", e.estimate}, {"std_error", e.std_error}, {"intervals", iv}});
  }
  return {{"condition", rep.condition}, {"entries", entries}};
}

std::vector<double> read_levels(Section& s, const std::string& key, std::vector<double> def) {
  auto v = s.opt(key, def);
  for (double a : v) {
    if (!(a > 0.0 && a < 1.0)) fail(ErrorKind::validation, key + ": levels must lie in (0,1)");
  }
  return v;
}

// Fitted mean and percentiles on a grid for a panel-estimated start.
void write_fitted(Bundle& b, const std::string& name, const std::vector<double>& t, const std::vector<double>& sample,
                  const ModelParams& xi, const LognormalStart& start, const std::vector<double>& percentiles) {
  std::vector<std::string> header{"t", "sample_mean", "fitted_mean"};
  std::vector<std::vector<double>> cols{t, sample, std::vector<double>(t.size())};
  for (std::size_t j = 0; j < t.size(); ++j) cols[2][j] = process_mean(xi, start, t.front(), t[j]);
  for (double a : percentiles) {
    header.push_back("p" + format_double(a));
    std::vector<double> c(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
      c[j] = start.sigma1sq > 0.0 || t[j] > t.front() ? percentile(xi, start, t.front(), t[j], a) : std::exp(start.mu1);
    }
    cols.push_back(std::move(c));
  }
  write_columns_csv(b.path(name), header, cols);
}

void cmd_simulate(Section& cfg, const RunOptions& o, Bundle& b, json& report, std::uint64_t seed) {
  SimSpec spec{read_model(cfg.sub("model")), DegenerateStart{1.0}, {}, 1, seed};
  {
    auto init = cfg.sub("initial");
    if (init.has("x0")) {
      spec.init = DegenerateStart{init.req<double>("x0")};
    } else {
      spec.init = LognormalStart{init.req<double>("mu1"), init.req<double>("sigma1sq")};
    }
    init.done();
  }
  {
    auto grid = cfg.sub("grid");
    if (grid.has("times")) {
      spec.grid = grid.req<std::vector<double>>("times");
    } else {
      spec.grid = uniform_grid(grid.req<double>("t0"), grid.req<double>("t1"), grid.req<std::size_t>("intervals"));
    }
    grid.done();
  }
  spec.paths = cfg.req<std::size_t>("paths");
  cfg.opt<std::uint64_t>("seed", 0);
  cfg.done();
  (void)o;

  const auto panel = simulate_panel(spec);
  write_panel_csv(b.path("panel.csv"), panel);
  const auto& t = spec.grid;
  const auto m = sample_mean(panel);
  std::vector<double> theo(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) theo[j] = process_mean(spec.params, spec.init, t.front(), t[j]);
  write_columns_csv(b.path("mean.csv"), {"t", "sample_mean", "theoretical_mean"}, {t, m, theo});
  report["results"] = {{"paths", spec.paths},
                       {"points", t.size()},
                       {"params", params_json(spec.params)},
                       {"rae_sample_vs_theoretical", rae(m, theo)}};
}

json fit_report(const PathPanel& panel, const ModelParams& xi, const std::vector<double>& levels) {
  const auto vd = transform(panel);
  const double ll = fitted_loglik(vd, xi);
  const auto ic = aic_bic(xi.poly.degree(), ll, static_cast<double>(vd.n));
  json out = {{"params", params_json(xi)},
              {"loglik", ll},
              {"aic", ic.aic},
              {"bic", ic.bic},
              {"rae", rae(sample_mean(panel), fitted_mean(panel, xi))}};
  try {
    auto ci = confidence_intervals(fisher_info(vd, xi), xi, levels);
    add_function(ci, "sigma", std::sqrt(xi.sigma2),
                 numeric_gradient([](const ModelParams& x) { return std::sqrt(x.sigma2); }, xi));
    out["confidence_intervals"] = ci_json(ci);
  } catch (const Error& e) {
    out["confidence_intervals"] = {{"error", e.what()}};
  }
  const auto a = fit_initial(vd);
  json init = {{"mu1", a.mu1_hat}, {"sigma1sq", a.sigma1sq_hat}, {"degenerate", degenerate_start(vd)}};
  if (vd.d() >= 2 && a.sigma1sq_hat > 0.0) {
    json iv = json::array();
    for (double lv : levels) {
      const auto mu = mu1_interval(a.mu1_hat, a.sigma1sq_hat, vd.d(), lv);
      const auto s1 = sigma1sq_interval(a.sigma1sq_hat, vd.d(), lv);
      iv.push_back({{"level", lv}, {"mu1", {mu.first, mu.second}}, {"sigma1sq", {s1.first, s1.second}}});
    }
    init["intervals"] = iv;
  }
  out["initial_distribution"] = init;
  return out;
}

void cmd_fit(Section& cfg, const RunOptions& o, const fs::path& base, Bundle& b, json& report, std::uint64_t seed) {
  const auto panel = read_input(cfg, base, o);
  const auto p = cfg.req<std::size_t>("degree");
  const auto levels = read_levels(cfg, "levels", {0.95, 0.90, 0.75});
  const auto percentiles = read_levels(cfg, "percentiles", {0.05, 0.95});
  cfg.opt<std::uint64_t>("seed", 0);
  const auto fs_ = read_fit_settings(cfg, o, seed);
  cfg.done();

  const auto out = fit_panel(panel, p, fs_);
  json res = fit_report(panel, out.xi, levels);
  res["fit"] = out.info;
  res["partial"] = !out.converged;
  report["results"] = res;
  write_fitted(b, "fitted.csv", panel.common_grid(), sample_mean(panel), out.xi,
               estimated_start(transform(panel)), percentiles);
  if (!out.converged) report["warnings"].push_back("Newton-Raphson did not converge; estimates are the last iterate");
}

void cmd_select(Section& cfg, const RunOptions& o, const fs::path& base, Bundle& b, json& report, std::uint64_t seed) {
  const auto panel = read_input(cfg, base, o);
  const auto degrees = cfg.req<std::vector<std::size_t>>("degrees");
  const double tie = cfg.opt("bic_tie", 2.0);
  cfg.opt<std::uint64_t>("seed", 0);
  const auto fs_ = read_fit_settings(cfg, o, seed);
  cfg.done();

  auto rep = select_degree(panel, degrees, [&](const PathPanel& pn, std::size_t p) {
    auto r = fit_panel(pn, p, fs_);
    if (!r.converged) fail(ErrorKind::numerical, "fit did not converge");
    return r.xi;
  });
  rep.chosen_p = choose_degree(rep.degrees, tie);
  json rows = json::array();
  std::vector<std::string> header{"t"};
  std::vector<std::vector<double>> cols{rep.dra_times};
  for (const auto& f : rep.degrees) {
    json r = {{"p", f.p}, {"ok", f.ok}};
    if (f.ok) {
      r.update({{"params", params_json(f.xi)},
                {"loglik", f.loglik},
                {"aic", f.aic},
                {"bic", f.bic},
                {"rae", f.rae},
                {"dra_median", f.dra_median},
                {"dra_mean", f.dra_mean}});
      header.push_back("dra_p" + std::to_string(f.p));
      cols.push_back(f.dra_curve);
    } else {
      r["error"] = f.error;
    }
    rows.push_back(r);
  }
  write_columns_csv(b.path("dra.csv"), header, cols);
  report["results"] = {{"chosen_p", rep.chosen_p}, {"rule", "min BIC, ties within " + format_double(tie) + " to smaller p"},
                       {"degrees", rows}};
}

void cmd_fpt(Section& cfg, const RunOptions& o, const fs::path& base, Bundle& b, json& report, std::uint64_t seed) {
  std::optional<FptProblem> built;
  json source;
  if (cfg.has("model")) {
    auto xi = read_model(cfg.sub("model"));
    const double x0 = cfg.req<double>("x0");
    built = FptProblem{xi, x0, cfg.opt("t0", 0.0)};
    source = {{"kind", "model"}};
  } else {
    auto panel = read_input(cfg, base, o);
    const auto p = cfg.req<std::size_t>("degree");
    if (cfg.has("t_last")) panel = panel.truncated(cfg.req<double>("t_last"));
    const auto fs_ = read_fit_settings(cfg, o, seed);
    const auto out = fit_panel(panel, p, fs_);
    if (!out.converged) fail(ErrorKind::numerical, "fpt: model fit did not converge");
    built = FptProblem{out.xi, sample_mean(panel).front(), panel.t0()};
    source = {{"kind", "fit"}, {"fit", out.info}, {"params", params_json(out.xi)}, {"t_last", panel[0].times.back()}};
  }
  FptProblem& pb = *built;
  pb.boundary = cfg.req<double>("boundary");
  pb.t_max = cfg.req<double>("t_max");
  StepPolicy pol;
  if (auto st = cfg.opt_sub("steps")) {
    pol.fine_divisor = st->opt("fine_divisor", pol.fine_divisor);
    pol.coarse_factor = st->opt("coarse_factor", pol.coarse_factor);
    pol.refinement = st->opt("refinement", pol.refinement);
    st->done();
  }
  cfg.opt<std::uint64_t>("seed", 0);
  cfg.done();
  pb.validate();

  const auto curve = fptl_curve(pb);
  const auto nodes = adaptive_steps(curve, pb.t0, pb.t_max, pol);
  const auto d = solve_density(pb, nodes);
  write_columns_csv(b.path("density.csv"), {"t", "density", "cumulative"}, {d.times, d.density, d.cumulative});
  write_columns_csv(b.path("fptl.csv"), {"t", "fptl"}, {curve.times, curve.values});
  json growth = json::array();
  for (const auto& g : curve.growth) growth.push_back({g.lo, g.hi});
  const auto det = crossing_time_deterministic(pb.params, pb.x0, pb.t0, pb.boundary);
  report["results"] = {{"source", source},
                       {"x0", pb.x0},
                       {"t0", pb.t0},
                       {"boundary", pb.boundary},
                       {"t_max", pb.t_max},
                       {"nodes", nodes.size()},
                       {"fptl_growth_intervals", growth},
                       {"captured_mass", d.captured_mass},
                       {"summary",
                        {{"mean", d.summary.mean},
                         {"sd", d.summary.sd},
                         {"mode", d.summary.mode},
                         {"decile1", d.summary.decile1},
                         {"decile5", d.summary.decile5},
                         {"decile9", d.summary.decile9}}},
                       {"deterministic_crossing", det ? json(*det) : json(nullptr)},
                       {"short_horizon", d.short_horizon},
                       {"negative_density", d.negative_density}};
  if (d.short_horizon) report["warnings"].push_back("captured mass below 0.95: horizon may be too short");
  if (d.negative_density) report["warnings"].push_back("density fell below -1e-9");
}

void cmd_forecast(Section& cfg, const RunOptions& o, const fs::path& base, Bundle& b, json& report,
                  std::uint64_t seed) {
  const auto panel = read_input(cfg, base, o);
  const auto p = cfg.req<std::size_t>("degree");
  const double t_end = cfg.req<double>("t_fit_end");
  const auto percentiles = read_levels(cfg, "percentiles", {0.05, 0.95});
  cfg.opt<std::uint64_t>("seed", 0);
  const auto fs_ = read_fit_settings(cfg, o, seed);
  cfg.done();

  const auto train = panel.truncated(t_end);
  const auto out = fit_panel(train, p, fs_);
  const auto start = estimated_start(transform(train));
  const auto& t = panel.common_grid();
  const auto m = sample_mean(panel);
  write_fitted(b, "forecast.csv", t, m, out.xi, start, percentiles);
  json table = json::array();
  double worst = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (t[j] <= t_end) continue;
    const double f = process_mean(out.xi, start, t.front(), t[j]);
    const double rel = std::abs(m[j] - f) / m[j];
    worst = std::max(worst, rel);
    table.push_back({{"t", t[j]}, {"sample_mean", m[j]}, {"forecast", f}, {"relative_error", rel}});
  }
  report["results"] = {{"fit", out.info},
                       {"params", params_json(out.xi)},
                       {"t_fit_end", t_end},
                       {"holdout", table},
                       {"max_relative_error", worst},
                       {"partial", !out.converged}};
}

}  // namespace

void run(const RunOptions& o) {
  const std::string text = slurp(o.config);
  json cfg_json;
  try {
    cfg_json = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::validation, o.config.string() + ": invalid JSON: " + e.what());
  }
  Section cfg(cfg_json, "config");
  const std::uint64_t seed = o.seed.value_or(cfg.opt<std::uint64_t>("seed", 1));
  const fs::path base = o.config.has_parent_path() ? o.config.parent_path() : fs::path(".");

  Bundle bundle(o.out_dir);
  json report;
  report["metadata"] = metadata(o, text, seed);
  report["warnings"] = json::array();
  if (o.command == "simulate") {
    cmd_simulate(cfg, o, bundle, report, seed);
  } else if (o.command == "fit") {
    cmd_fit(cfg, o, base, bundle, report, seed);
  } else if (o.command == "select") {
    cmd_select(cfg, o, base, bundle, report, seed);
  } else if (o.command == "fpt") {
    cmd_fpt(cfg, o, base, bundle, report, seed);
  } else if (o.command == "forecast") {
    cmd_forecast(cfg, o, base, bundle, report, seed);
  } else {
    fail(ErrorKind::validation, "unknown command '" + o.command + "'");
  }
  bundle.write_json("report.json", report);
  bundle.finish();
}

int exit_code(const std::exception& e) {
  if (const auto* me = dynamic_cast<const Error*>(&e)) return me->kind() == ErrorKind::numerical ? 3 : 2;
  if (dynamic_cast<const json::exception*>(&e)) return 2;
  return 3;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Multisigmoidal logistic lognormal diffusion: simulation, inference and first passage"};
  RunOptions o;
  std::string config;
  std::string out = "msl_out";
  std::uint64_t seed = 0;
  std::string method;
  app.require_subcommand(1);
  for (const char* name : {"simulate", "fit", "select", "fpt", "forecast"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed (overrides the config)");
    sub->add_option("--out", out, "Output directory");
    sub->add_flag("--scale-max", o.scale_max, "Divide each input path by its maximum");
    if (std::string(name) != "simulate") {
      sub->add_option("--method", method, "Estimation method")->check(CLI::IsMember({"nr", "sa"}));
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  o.command = app.get_subcommands().front()->get_name();
  o.config = config;
  o.out_dir = out;
  const auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) o.seed = seed;
  if (!method.empty()) o.method = method;
  try {
    run(o);
  } catch (const std::exception& e) {
    std::cerr << "msl " << o.command << ": " << e.what() << '\n';
    return exit_code(e);
  }
  std::cout << "wrote " << (o.out_dir / "report.json").string() << '\n';
  return 0;
}

}  // namespace msl
