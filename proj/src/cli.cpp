#include "mtdc/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtdc/config.hpp"
#include "mtdc/errors.hpp"
#include "mtdc/output.hpp"
#include "mtdc/stability.hpp"

namespace mtdc {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string preset;
  std::string config;
  std::string controller;
  std::optional<double> tau;
  std::string tau_list = "0,0.1,0.22";
  std::optional<double> horizon;
  std::string out_dir = ".";
  bool machine_readable = false;
  bool post_step = false;
  bool search = false;
  double tau_min = 0.1;
  double tau_max = 1.0;
  bool expect_stable = false;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v + 0.0);
  return buf;
}

/// Formats `v` with 10 significant digits; machine-readable output carries 17.
std::string vec(const Eigen::VectorXd& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v(i));
  return s + ")";
}

std::string kind_name(ControllerKind k) { return k == ControllerKind::kDroop ? "droop" : "distributed"; }

std::string tau_tag(double tau) {
  std::string s = num(tau);
  for (char& c : s) {
    if (c == '.') c = 'p';
  }
  return s;
}

std::vector<double> parse_tau_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const double tau = parse_quantity(item, Dimension::kTime);
    if (!(tau >= 0.0)) throw ValidationError("delays in --tau-list must be non-negative");
    out.push_back(tau);
  }
  if (out.empty()) throw ValidationError("--tau-list is empty");
  return out;
}

ConfigDocument load_document(const Options& opt) {
  if (!opt.preset.empty() && !opt.config.empty()) {
    throw ValidationError("use either --preset or --config, not both");
  }
  if (opt.preset.empty() && opt.config.empty()) {
    throw ValidationError("no model given; pass --preset paper_4term or --config FILE");
  }
  ConfigDocument doc = opt.config.empty() ? load_preset(opt.preset) : parse_config(opt.config);
  if (!opt.controller.empty()) {
    if (opt.controller == "droop") {
      doc.controller = ControllerKind::kDroop;
    } else if (opt.controller == "distributed") {
      doc.controller = ControllerKind::kDistributed;
      if (!doc.has_comm()) throw ValidationError("the distributed controller needs comm_links in the config");
      if (!(doc.gamma > 0.0)) throw ValidationError("the distributed controller needs controller.gamma");
    } else {
      throw ValidationError("--controller must be droop or distributed");
    }
  }
  if (opt.tau) {
    if (!(*opt.tau >= 0.0)) throw ValidationError("--tau must be non-negative");
    doc.tau = *opt.tau;
  }
  doc.scenario.delay = doc.tau;
  if (opt.horizon) doc.scenario.horizon = *opt.horizon;
  doc.scenario.validate(doc.node_count());
  return doc;
}

class Session {
 public:
  Session(const Options& opt, std::ostream& out) : opt_(opt), out_(out) {}

  void emit(const Report& report, const std::string& human) {
    out_ << (opt_.machine_readable ? report.to_text() : human);
  }

  int equilibrium_cmd() {
    const ConfigDocument doc = load_document(opt_);
    const Eigen::VectorXd& inj = opt_.post_step ? doc.scenario.post_injections : doc.scenario.pre_injections;
    const ClosedLoopSystem sys = close_loop(doc.line_topology(), doc.params, doc.make_controller(), inj);
    const EquilibriumReport eq = equilibrium(sys);

    Report r;
    std::ostringstream h;
    r.add("controller", kind_name(sys.kind));
    r.add("injections", std::string(opt_.post_step ? "post_step" : "pre_step"));
    r.add_vector("I_inj", inj);
    r.add_vector("V", eq.voltages);
    r.add_vector("u", eq.currents);
    h << "Equilibrium of " << doc.name << " (" << kind_name(sys.kind) << " controller, "
      << (opt_.post_step ? "post-step" : "pre-step") << " injections)\n";
    h << "  I_inj = " << vec(inj) << " A\n";
    h << "  V     = " << vec(eq.voltages) << " V\n";
    h << "  V-Vnom= " << vec(eq.voltages.array() - doc.params.nominal_voltage) << " V\n";
    h << "  u     = " << vec(eq.currents) << " A\n";
    if (eq.references) {
      r.add_vector("Vhat", *eq.references);
      r.add("k", eq.offset);
      h << "  Vhat  = " << vec(*eq.references) << " V\n";
      h << "  k     = " << num(eq.offset) << " V  (u = k K^P 1)\n";
    }
    r.add_vector("I_tot", eq.total_currents);
    r.add("sum_u_plus_I_inj", (eq.currents + inj).sum());
    h << "  I_tot = " << vec(eq.total_currents) << " A\n";
    h << "  sum(u + I_inj) = " << num((eq.currents + inj).sum()) << " A\n";
    if (sys.kind == ControllerKind::kDistributed) {
      const BoundResult b = voltage_bound(sys, eq);
      r.add("bound_lhs", b.lhs);
      r.add("bound_rhs", b.rhs);
      r.add("bound_holds", b.holds);
      h << "  voltage bound: max|V-Vnom| = " << num(b.lhs) << " V <= " << num(b.rhs) << " V : "
        << (b.holds ? "holds" : "VIOLATED") << "\n";
    }
    emit(r, h.str());
    return 0;
  }

  int stability_cmd() {
    const ConfigDocument doc = load_document(opt_);
    const GridTopology lines = doc.line_topology();
    Report r;
    std::ostringstream h;
    r.add("controller", kind_name(doc.controller));
    h << "Stability of " << doc.name << " (" << kind_name(doc.controller) << " controller)\n";
    if (doc.controller == ControllerKind::kDroop) {
      const ClosedLoopSystem sys = close_loop(lines, doc.params, doc.make_controller(), doc.scenario.post_injections);
      const HurwitzResult hw = hurwitz_check(sys.state_matrix);
      r.add("hurwitz", hw.hurwitz);
      r.add("spectral_abscissa", hw.spectral_abscissa);
      h << "  Hurwitz: " << (hw.hurwitz ? "true" : "false") << " (spectral abscissa " << num(hw.spectral_abscissa)
        << " 1/s)\n";
      emit(r, h.str());
      return 0;
    }
    const GridTopology comm = doc.comm_topology();
    const StabilityReport s = analyze_distributed(lines, comm, doc.params, doc.gamma);
    r.add("hurwitz", s.hurwitz);
    r.add("spectral_abscissa", s.spectral_abscissa);
    r.add("condition8_value", s.condition8_value);
    r.add("condition8_holds", s.condition8_holds);
    r.add("condition9_value", s.condition9_value);
    r.add("condition9_holds", s.condition9_holds);
    h << "  condition 8 value = " << num(s.condition8_value) << " -> " << (s.condition8_holds ? "holds" : "fails") << "\n";
    h << "  condition 9 value = " << num(s.condition9_value) << " -> " << (s.condition9_holds ? "holds" : "fails") << "\n";
    h << "  Hurwitz: " << (s.hurwitz ? "true" : "false") << " (spectral abscissa " << num(s.spectral_abscissa)
      << " 1/s)\n";

    const ClosedLoopSystem sys = close_loop(lines, doc.params, doc.make_controller(), doc.scenario.post_injections);
    const EquilibriumReport eq = equilibrium(sys);
    const BoundResult b = voltage_bound(sys, eq);
    r.add("bound_lhs", b.lhs);
    r.add("bound_rhs", b.rhs);
    r.add("bound_holds", b.holds);
    h << "  voltage bound (post-step): " << num(b.lhs) << " V <= " << num(b.rhs) << " V : "
      << (b.holds ? "holds" : "VIOLATED") << "\n";
    emit(r, h.str());
    return 0;
  }

  int limits_cmd() {
    const ConfigDocument doc = load_document(opt_);
    const std::vector<double> scales{1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6};
    const Eigen::VectorXd& inj = doc.scenario.post_injections;
    const LimitTable table = droop_limits(doc.line_topology(), doc.params, inj, scales);
    const LimitTrends t = assess_limit_trends(table);
    Report r;
    std::ostringstream h;
    h << "Droop equilibria under gain scaling K^P <- s K^P (post-step injections, sum = " << num(table.injection_sum)
      << " A)\n";
    h << "  scale        max|V-Vnom|    max|u+I|       sharing err    spread\n";
    for (const LimitRow& row : table.rows) {
      const std::string p = "scale_" + num(row.scale) + "_";
      r.add(p + "max_voltage_deviation", row.max_voltage_deviation);
      r.add(p + "max_injection_mismatch", row.max_injection_mismatch);
      r.add(p + "max_sharing_error", row.max_sharing_error);
      r.add(p + "spread", row.spread);
      r.add_vector(p + "u", row.currents);
      char line[160];
      std::snprintf(line, sizeof line, "  %-12s %-14s %-14s %-14s %s\n", num(row.scale).c_str(),
                    num(row.max_voltage_deviation).c_str(), num(row.max_injection_mismatch).c_str(),
                    num(row.max_sharing_error).c_str(), num(row.spread).c_str());
      h << line;
    }
    r.add("trend_voltage_to_nominal_at_high_gain", t.voltage_converges_at_high_gain);
    r.add("trend_current_to_minus_injection_at_high_gain", t.current_converges_at_high_gain);
    r.add("trend_sharing_at_low_gain", t.sharing_converges_at_low_gain);
    r.add("trend_spread_grows_at_low_gain", t.spread_grows_at_low_gain);
    r.add("trend_mean_diverges_with_injection_sign", t.mean_diverges_with_injection_sign);
    const auto yn = [](bool b) { return b ? "yes" : "no"; };
    h << "  V -> Vnom as s grows: " << yn(t.voltage_converges_at_high_gain) << "\n";
    h << "  u -> -I_inj as s grows: " << yn(t.current_converges_at_high_gain) << "\n";
    h << "  u -> power sharing as s shrinks: " << yn(t.sharing_converges_at_low_gain) << "\n";
    h << "  spread grows as s shrinks: " << yn(t.spread_grows_at_low_gain) << "\n";
    h << "  mean voltage diverges with sign of sum(I_inj): " << yn(t.mean_diverges_with_injection_sign) << "\n";
    emit(r, h.str());
    return 0;
  }

  struct RunResult {
    double tau = 0.0;
    Trajectory trajectory;
    bool diverged = false;
    SettlingTimes settling;
  };

  RunResult run_one(const ConfigDocument& doc, double tau) const {
    ConfigDocument d = doc;
    d.tau = tau;
    d.scenario.delay = tau;
    const Controller ctrl = d.make_controller();
    const GridTopology lines = d.line_topology();
    const ClosedLoopSystem sys = close_loop(lines, d.params, ctrl, d.scenario.pre_injections);
    RunResult res;
    res.tau = tau;
    res.trajectory = integrate_dde(sys, ctrl, d.scenario);
    const ClosedLoopSystem post = close_loop(lines, d.params, ctrl, d.scenario.post_injections);
    const EquilibriumReport eq_post = equilibrium(post);
    const EquilibriumReport eq_pre = equilibrium(sys);
    res.diverged = classify_diverged(res.trajectory, eq_post.voltages, d.scenario.step_time);
    const double band = 0.01 * (eq_post.voltages - eq_pre.voltages).cwiseAbs().maxCoeff();
    res.settling = settling_times(res.trajectory, d.scenario.step_time, eq_post.voltages, band,
                                  eq_post.currents, 1.0);
    return res;
  }

  std::string describe(const RunResult& res) const {
    std::ostringstream h;
    const auto& s = res.settling;
    h << "  tau = " << num(res.tau) << " s: " << (res.diverged ? "DIVERGED" : "stable");
    h << "; settled: voltages " << (s.voltage_settled ? num(s.voltage) + " s" : std::string("not within horizon"))
      << ", currents " << (s.current_settled ? num(s.current) + " s" : std::string("not within horizon")) << "\n";
    return h.str();
  }

  void report_run(Report& r, const std::string& prefix, const RunResult& res) const {
    r.add(prefix + "tau", res.tau);
    r.add(prefix + "diverged", res.diverged);
    r.add(prefix + "voltage_settled", res.settling.voltage_settled);
    r.add(prefix + "voltage_settling_time", res.settling.voltage);
    r.add(prefix + "current_settled", res.settling.current_settled);
    r.add(prefix + "current_settling_time", res.settling.current);
    if (!res.trajectory.empty()) {
      r.add(prefix + "final_time", res.trajectory.times.back());
      r.add_vector(prefix + "final_V", res.trajectory.voltages.back());
      r.add_vector(prefix + "final_u", res.trajectory.currents.back());
    }
  }

  int simulate_cmd() {
    const ConfigDocument doc = load_document(opt_);
    fs::create_directories(opt_.out_dir);
    const RunResult res = run_one(doc, doc.tau);
    const std::string stem = doc.name + "_" + kind_name(doc.controller) + "_tau" + tau_tag(doc.tau);
    const fs::path csv = fs::path(opt_.out_dir) / (stem + ".csv");
    const fs::path plot = fs::path(opt_.out_dir) / (stem + ".gp");
    write_trajectory_csv(res.trajectory, csv);
    emit_plot_script({PlotRow{"tau = " + num(doc.tau) + " s", csv.filename(), doc.node_count()}},
                     doc.params.nominal_voltage, plot);

    const ClosedLoopSystem sys =
        close_loop(doc.line_topology(), doc.params, doc.make_controller(), doc.scenario.post_injections);
    const bool asserted_stable = opt_.expect_stable || (doc.tau == 0.0 && hurwitz_check(sys.state_matrix).hurwitz);

    Report r;
    r.add("controller", kind_name(doc.controller));
    r.add("csv", csv.string());
    r.add("plot_script", plot.string());
    report_run(r, "", res);
    std::ostringstream h;
    h << "Simulated " << doc.name << " (" << kind_name(doc.controller) << " controller), horizon "
      << num(doc.scenario.horizon) << " s\n";
    h << describe(res);
    if (!res.trajectory.empty()) {
      h << "  final V-Vnom = " << vec(res.trajectory.voltages.back().array() - doc.params.nominal_voltage) << " V\n";
      h << "  final u      = " << vec(res.trajectory.currents.back()) << " A\n";
    }
    h << "  wrote " << csv.string() << " and " << plot.string() << "\n";
    emit(r, h.str());
    return res.diverged && asserted_stable ? static_cast<int>(ExitCode::kDivergence) : 0;
  }

  int sweep_cmd() {
    const ConfigDocument doc = load_document(opt_);
    if (doc.controller != ControllerKind::kDistributed) {
      throw ValidationError("sweep-delay needs the distributed controller");
    }
    fs::create_directories(opt_.out_dir);
    const std::vector<double> taus = parse_tau_list(opt_.tau_list);
    std::vector<std::future<RunResult>> jobs;
    jobs.reserve(taus.size());
    for (double tau : taus) {
      jobs.push_back(std::async(std::launch::async, [this, &doc, tau] { return run_one(doc, tau); }));
    }
    std::vector<RunResult> results;
    for (auto& job : jobs) results.push_back(job.get());

    Report r;
    std::ostringstream h;
    h << "Delay sweep of " << doc.name << " (gamma = " << num(doc.gamma) << ")\n";
    std::vector<PlotRow> rows;
    for (std::size_t k = 0; k < results.size(); ++k) {
      const RunResult& res = results[k];
      const std::string stem = doc.name + "_distributed_tau" + tau_tag(res.tau);
      const fs::path csv = fs::path(opt_.out_dir) / (stem + ".csv");
      write_trajectory_csv(res.trajectory, csv);
      rows.push_back(PlotRow{"tau = " + num(res.tau) + " s", csv.filename(), doc.node_count()});
      report_run(r, "run" + std::to_string(k + 1) + "_", res);
      h << describe(res);
    }
    const fs::path plot = fs::path(opt_.out_dir) / (doc.name + "_delay_sweep.gp");
    emit_plot_script(rows, doc.params.nominal_voltage, plot);
    r.add("plot_script", plot.string());
    h << "  wrote " << rows.size() << " CSV files and " << plot.string() << "\n";

    if (opt_.search) {
      const auto ctrl = std::get<DistributedController>(doc.make_controller());
      const DelaySearchResult s = critical_delay_search(doc.line_topology(), doc.params, ctrl, doc.scenario,
                                                        opt_.tau_min, opt_.tau_max);
      r.add("critical_delay", s.critical_delay);
      r.add("critical_delay_stable", s.stable_delay);
      r.add("critical_delay_unstable", s.unstable_delay);
      r.add("critical_delay_simulations", static_cast<double>(s.simulations));
      h << "  critical delay tau* = " << num(s.critical_delay) << " s (stable at " << num(s.stable_delay)
        << " s, diverged at " << num(s.unstable_delay) << " s, " << s.simulations << " simulations)\n";
    }
    emit(r, h.str());
    return 0;
  }

  int preset_cmd(const std::string& name) {
    const std::string text = serialize_config(load_preset(name));
    if (opt_.out_dir != ".") {
      fs::create_directories(opt_.out_dir);
      const fs::path path = fs::path(opt_.out_dir) / (name + ".json");
      std::ofstream file(path);
      if (!(file << text)) throw IoError("cannot write " + path.string());
      out_ << "wrote " << path.string() << "\n";
    } else {
      out_ << text;
    }
    return 0;
  }

 private:
  const Options& opt_;
  std::ostream& out_;
};

void add_model_options(CLI::App* cmd, Options& opt) {
  cmd->add_option("--preset", opt.preset, "Bundled model preset (paper_4term)");
  cmd->add_option("--config", opt.config, "JSON model configuration file");
  cmd->add_option("--controller", opt.controller, "Override the controller: droop or distributed");
  cmd->add_option("--tau", opt.tau, "Communication delay in seconds");
  cmd->add_option("--horizon", opt.horizon, "Simulation horizon in seconds");
  cmd->add_flag("--machine-readable", opt.machine_readable, "Print key=value lines");
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Simulation and stability analysis of multi-terminal HVDC grids"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Integrate the step-response scenario and write CSV + plot script");
  add_model_options(simulate, opt);
  simulate->add_option("--out-dir", opt.out_dir, "Output directory");
  simulate->add_flag("--expect-stable", opt.expect_stable, "Exit 4 if the run diverges");

  auto* equilibrium_cmd = app.add_subcommand("equilibrium", "Closed-form steady state");
  add_model_options(equilibrium_cmd, opt);
  equilibrium_cmd->add_flag("--post-step", opt.post_step, "Use the post-step injections");

  auto* stability = app.add_subcommand("stability", "Sufficient conditions, Hurwitz margin and voltage bound");
  add_model_options(stability, opt);

  auto* limits = app.add_subcommand("limits", "Droop equilibria under scaled gains");
  add_model_options(limits, opt);

  auto* sweep = app.add_subcommand("sweep-delay", "Simulate a list of delays; optionally bisect the critical delay");
  add_model_options(sweep, opt);
  sweep->add_option("--tau-list", opt.tau_list, "Comma-separated delays in seconds");
  sweep->add_option("--out-dir", opt.out_dir, "Output directory");
  sweep->add_flag("--search", opt.search, "Bisect the critical delay");
  sweep->add_option("--tau-min", opt.tau_min, "Lower end of the search range (s)");
  sweep->add_option("--tau-max", opt.tau_max, "Upper end of the search range (s)");

  std::string preset_name = "paper_4term";
  auto* preset = app.add_subcommand("preset", "Print a bundled preset as canonical JSON");
  preset->add_option("name", preset_name, "Preset name");
  preset->add_option("--out-dir", opt.out_dir, "Write <name>.json into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  Session session(opt, out);
  try {
    if (*simulate) return session.simulate_cmd();
    if (*equilibrium_cmd) return session.equilibrium_cmd();
    if (*stability) return session.stability_cmd();
    if (*limits) return session.limits_cmd();
    if (*sweep) return session.sweep_cmd();
    if (*preset) return session.preset_cmd(preset_name);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kValidation);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kValidation);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kValidation);
  } catch (const SearchRangeError& e) {
    err << "error: delay search: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumerical);
  } catch (const NumericalError& e) {
    err << "error: numerical failure: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumerical);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumerical);
  }
  return static_cast<int>(ExitCode::kValidation);
}

}  // namespace mtdc
