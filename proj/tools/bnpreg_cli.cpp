// bnpreg command-line driver. Every subcommand that names a session appends
// its arguments to the session's command log, which `replay` re-executes.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bnpreg/descriptive.hpp"
#include "bnpreg/diagnostics.hpp"
#include "bnpreg/error.hpp"
#include "bnpreg/predictive.hpp"
#include "bnpreg/priors.hpp"
#include "bnpreg/service.hpp"
#include "bnpreg/session.hpp"
#include "bnpreg/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bnpreg;

namespace {

constexpr const char* kCommandLog = "commands.LOG";
constexpr int kCancelledExit = 130;

std::atomic<bool> g_cancel{false};

void on_signal(int) { g_cancel = true; }

fs::path resolve_session(const std::string& name) {
  const fs::path p(name);
  if (p.is_absolute() || name.find('/') != std::string::npos) return p;
  return session_root() / p;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  for (const auto& f : split_fields(s, ',')) out.emplace_back(trim(f));
  return out;
}

// Sets a dotted path such as "ddp.a0" in a JSON object; the value is read as
// JSON when it parses, otherwise as a string.
void set_path(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) invalid("bad_setting", "expected key=value, got " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

StickPriorSpec stick_from(const std::string& family, double alpha, double a, double b, double c) {
  StickPriorSpec s;
  s.family = stick_family_from_string(family);
  s.alpha = alpha;
  s.a = a;
  s.b = b;
  s.c = c;
  s.validate();
  return s;
}

struct Options {
  std::string session;
  std::string out;
  std::string summary_out;
  std::string file;
  std::string name;
  // transform
  std::string op;
  std::string columns;
  double number = 0.0;
  std::string text;
  // spec-model
  std::string family;
  std::string link;
  std::string mixing;
  std::string stick;
  std::optional<double> alpha;
  std::optional<double> stick_a;
  std::optional<double> stick_b;
  std::optional<double> stick_c;
  std::string model_json;
  std::vector<std::string> settings;
  std::string y;
  std::string x;
  std::string group;
  std::string weights;
  std::string censor_lb;
  std::string censor_ub;
  // run and reports
  std::uint64_t iterations = 0;
  std::optional<std::uint64_t> burn_in;
  std::optional<std::uint64_t> thin;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
  std::string trace;
  std::size_t window = 4096;
  // describe plots
  std::string plot;
  std::string column;
  std::string against;
  std::size_t points = 200;
  // predict
  std::vector<std::string> focal;
  std::string functionals = "mean";
  std::string profile = "grand_mean";
  std::string y_grid;
  double obs_weight = 1.0;
  // prior-sim
  std::size_t draws = 1000;
  std::size_t atoms = 20;
  std::size_t partition = 0;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  // replay
  std::string log;
  std::string out_dir;
};

std::string table_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::string s;
  for (std::size_t k = 0; k < header.size(); ++k) s += (k ? "," : "") + header[k];
  s += "\n";
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size(); ++k) s += (k ? "," : "") + format_double(r[k]);
    s += "\n";
  }
  return s;
}

std::string describe_plot(const DataTable& t, const Options& o) {
  if (o.column.empty()) invalid("missing_column", "--plot needs --column");
  const auto& v = t.column(o.column).values;
  const auto present = present_values(v);
  if (present.empty()) invalid("no_values", o.column + " has no observed values");
  if (o.plot == "hist") {
    std::vector<std::vector<double>> rows;
    for (const auto& b : histogram(v)) rows.push_back({b.left, b.right, static_cast<double>(b.count)});
    return table_csv({"left", "right", "count"}, rows);
  }
  if (o.points < 2) invalid("bad_points", "--points must be at least 2");
  auto grid_over = [&](const std::vector<double>& values, double pad) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    std::vector<double> g(o.points);
    for (std::size_t k = 0; k < o.points; ++k) {
      g[k] = *lo - pad + (*hi - *lo + 2 * pad) * static_cast<double>(k) /
                             static_cast<double>(o.points - 1);
    }
    return g;
  };
  if (o.plot == "kde") {
    const auto g = grid_over(present, 3.0 * silverman_bandwidth(present));
    const auto d = kde(v, g);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < g.size(); ++k) rows.push_back({g[k], d[k]});
    return table_csv({o.column, "density"}, rows);
  }
  if (o.plot == "kreg") {
    if (o.against.empty()) invalid("missing_column", "--plot kreg needs --against");
    const auto& xv = t.column(o.against).values;
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (is_missing(v[i]) || is_missing(xv[i])) continue;
      xs.push_back(xv[i]);
      ys.push_back(v[i]);
    }
    if (xs.empty()) invalid("no_values", "no complete pairs");
    const auto g = grid_over(xs, 0.0);
    const auto m = kernel_regression(xs, ys, g);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < g.size(); ++k) rows.push_back({g[k], m[k]});
    return table_csv({o.against, o.column}, rows);
  }
  invalid("unknown_plot", "unknown plot " + o.plot + " (hist, kde, kreg)");
}

std::string prior_sim(const Options& o) {
  const StickPriorSpec spec = stick_from(o.stick.empty() ? "dp" : o.stick, o.alpha.value_or(1.0),
                                         o.stick_a.value_or(0.0),
                                         o.stick_b.value_or(o.stick == "normalized_stable" ? 0.0 : 1.0),
                                         o.stick_c.value_or(1.0));
  Rng rng(o.seed.value_or(1));
  std::string s;
  if (o.partition > 0) {
    s = "draw,item,cluster\n";
    for (std::size_t d = 0; d < o.draws; ++d) {
      PartitionState p;
      switch (spec.family) {
        case StickFamily::dp: p = simulate_partition_py(0.0, spec.alpha, o.partition, rng); break;
        case StickFamily::pitman_yor:
          p = simulate_partition_py(spec.a, spec.b, o.partition, rng);
          break;
        case StickFamily::normalized_stable:
          p = simulate_partition_py(spec.a, 0.0, o.partition, rng);
          break;
        case StickFamily::nig: p = simulate_partition_nig(spec.c, o.partition, rng); break;
        default:
          invalid("unsupported_partition",
                  "partition simulation needs a dp, pitman_yor, normalized_stable or nig prior");
      }
      for (std::size_t i = 0; i < p.n(); ++i) {
        s += std::to_string(d + 1) + "," + std::to_string(i + 1) + "," +
             std::to_string(p.allocations[i] + 1) + "\n";
      }
    }
    return s;
  }
  s = "draw,j,weight\n";
  for (std::size_t d = 0; d < o.draws; ++d) {
    const auto w = draw_sticks(spec, o.atoms, rng);
    for (std::size_t j = 0; j < w.weights.size(); ++j) {
      s += std::to_string(d + 1) + "," + std::to_string(j + 1) + "," + format_double(w.weights[j]) +
           "\n";
    }
    s += std::to_string(d + 1) + ",rest," + format_double(w.truncation_mass) + "\n";
  }
  return s;
}

PredictiveQuery predictive_query(const Options& o) {
  PredictiveQuery q;
  for (const auto& f : o.focal) {
    const auto eq = f.rfind('=');
    if (eq == std::string::npos || eq == 0) {
      invalid("bad_focal", "--x expects NAME=GRID, got " + f);
    }
    q.focal.emplace_back(f.substr(0, eq), parse_grid(f.substr(eq + 1)));
  }
  q.functionals = parse_functionals(o.functionals);
  q.profile = profile_method_from_string(o.profile);
  if (!o.y_grid.empty()) q.y_grid = parse_grid(o.y_grid);
  q.obs_weight = o.obs_weight;
  q.seed = o.seed.value_or(1);
  q.burn_in = o.burn_in.value_or(0);
  q.thin = o.thin.value_or(1);
  return q;
}

// Command-log record: arguments with the session replaced by a placeholder
// and the imported file made absolute.
std::string log_record(const std::vector<std::string>& args, const Options& o) {
  json rec = json::array();
  for (std::size_t k = 0; k < args.size(); ++k) {
    const std::string& a = args[k];
    if (a == "--session" && k + 1 < args.size()) {
      rec.push_back(a);
      rec.push_back("{session}");
      ++k;
    } else if (a.rfind("--session=", 0) == 0) {
      rec.push_back("--session={session}");
    } else if (!o.file.empty() && a == o.file) {
      rec.push_back(fs::absolute(o.file).lexically_normal().string());
    } else {
      rec.push_back(a);
    }
  }
  return rec.dump() + "\n";
}

int execute(const std::vector<std::string>& args, const std::optional<std::string>& record);

int replay(const Options& o) {
  if (o.session.empty()) invalid("missing_session", "replay needs --session");
  std::istringstream in(read_file(o.log));
  std::string line;
  const std::string session = o.session;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> args;
    try {
      args = json::parse(line).get<std::vector<std::string>>();
    } catch (const json::exception&) {
      invalid("corrupt_log", "unreadable command log line: " + line);
    }
    for (std::size_t k = 0; k < args.size(); ++k) {
      if (args[k] == "{session}") args[k] = session;
      if (args[k] == "--session={session}") args[k] = "--session=" + session;
      if (!o.out_dir.empty() && (args[k] == "--out" || args[k] == "--summary-out") &&
          k + 1 < args.size()) {
        args[k + 1] = (fs::path(o.out_dir) / fs::path(args[k + 1]).filename()).string();
      }
    }
    const int code = execute(args, line + "\n");
    if (code != 0) return code;
  }
  return 0;
}

int execute(const std::vector<std::string>& args, const std::optional<std::string>& record) {
  CLI::App app{"Bayesian nonparametric regression"};
  app.require_subcommand(1);
  Options o;

  auto session_opt = [&](CLI::App* c) {
    c->add_option("--session", o.session, "session directory or name under $BNPREG_SESSION_ROOT")
        ->required();
  };
  auto out_opt = [&](CLI::App* c) { c->add_option("--out", o.out, "write to this file"); };
  auto draw_opts = [&](CLI::App* c) {
    c->add_option("--burnin", o.burn_in, "iterations to discard (default: the run's)");
    c->add_option("--thin", o.thin, "keep every k-th stored draw");
  };

  auto* imp = app.add_subcommand("import", "load a CSV file into a session");
  session_opt(imp);
  imp->add_option("file", o.file, "CSV file")->required();
  imp->add_option("--name", o.name, "dataset name");

  auto* desc = app.add_subcommand("describe", "descriptive statistics and plot tables");
  session_opt(desc);
  out_opt(desc);
  desc->add_option("--plot", o.plot, "hist, kde or kreg");
  desc->add_option("--column", o.column, "column to plot");
  desc->add_option("--against", o.against, "covariate for kreg");
  desc->add_option("--points", o.points, "grid points for kde and kreg");

  auto* tr = app.add_subcommand("transform", "apply a data transform");
  session_opt(tr);
  tr->add_option("--op", o.op, "zscore, dummy, lag, interact, vectorize, recode_missing, rename")
      ->required();
  tr->add_option("--columns", o.columns, "comma-separated input columns")->required();
  tr->add_option("--number", o.number, "reference value, lag or missing code");
  tr->add_option("--text", o.text, "id column or new name");

  auto* sm = app.add_subcommand("spec-model", "assign roles and specify the model");
  session_opt(sm);
  sm->add_option("--y", o.y, "dependent variable");
  sm->add_option("--x", o.x, "comma-separated covariates");
  sm->add_option("--group", o.group, "group id column (hlm2, ddp)");
  sm->add_option("--weights", o.weights, "observation weight column");
  sm->add_option("--censor-lb", o.censor_lb, "censoring lower bound column");
  sm->add_option("--censor-ub", o.censor_ub, "censoring upper bound column");
  sm->add_option("--family", o.family, "linear_nig, hlm2, ddp_mixture, infinite_probits");
  sm->add_option("--link", o.link, "identity or binary_probit");
  sm->add_option("--mixing", o.mixing, "intercept_only, coefficients, coefficients_and_variance");
  sm->add_option("--stick", o.stick, "dp, pitman_yor, normalized_stable, beta2, geometric, nig");
  sm->add_option("--alpha", o.alpha, "DP precision");
  sm->add_option("--stick-a", o.stick_a, "first stick parameter");
  sm->add_option("--stick-b", o.stick_b, "second stick parameter");
  sm->add_option("--stick-c", o.stick_c, "NIG parameter");
  sm->add_option("--model-json", o.model_json, "JSON file with model settings");
  sm->add_option("--set", o.settings, "hyperparameter as section.key=value, e.g. ddp.a0=2");

  auto* run = app.add_subcommand("run", "run or extend the MCMC chain");
  session_opt(run);
  run->add_option("--S", o.iterations, "iterations to run")->required();
  run->add_option("--burnin", o.burn_in, "burn-in iterations");
  run->add_option("--thin", o.thin, "store every k-th iteration (fixed by the first run)");
  run->add_option("--seed", o.seed, "random seed (fixed by the first run)");

  auto* sum = app.add_subcommand("summary", "posterior summaries");
  session_opt(sum);
  out_opt(sum);
  draw_opts(sum);
  sum->add_option("--format", o.format, "csv or text");

  auto* diag = app.add_subcommand("diagnose", "MCMC half-widths, hairiness and traces");
  session_opt(diag);
  out_opt(diag);
  draw_opts(diag);
  diag->add_option("--trace", o.trace, "parameter whose trace to print");
  diag->add_option("--window", o.window, "maximum trace points");

  auto* pred = app.add_subcommand("predict", "posterior predictive functionals");
  session_opt(pred);
  out_opt(pred);
  draw_opts(pred);
  pred->add_option("--x", o.focal, "focal covariate grid NAME=a:step:b or NAME=v1,v2");
  pred->add_option("--functional", o.functionals,
                   "pdf, cdf, mean, variance, quantile(u), survival, hazard, cumhaz, prob_y_ge_0");
  pred->add_option("--profile", o.profile,
                   "grand_mean, zero_center, partial_dependence, clustered_pd");
  pred->add_option("--y-grid", o.y_grid, "y values for density-type functionals");
  pred->add_option("--weight", o.obs_weight, "observation weight of the predicted response");
  pred->add_option("--seed", o.seed, "seed for quantile draws and clustering");

  auto* fit = app.add_subcommand("fit", "per-observation fit and D(m)");
  session_opt(fit);
  out_opt(fit);
  fit->add_option("--summary-out", o.summary_out, "write the fit summary here");

  auto* ps = app.add_subcommand("prior-sim", "simulate prior weights or partitions");
  out_opt(ps);
  ps->add_option("--stick", o.stick, "stick-breaking family");
  ps->add_option("--alpha", o.alpha, "DP precision");
  ps->add_option("--stick-a", o.stick_a, "first stick parameter");
  ps->add_option("--stick-b", o.stick_b, "second stick parameter");
  ps->add_option("--stick-c", o.stick_c, "NIG parameter");
  ps->add_option("--draws", o.draws, "number of prior draws");
  ps->add_option("--atoms", o.atoms, "sticks per draw");
  ps->add_option("--partition", o.partition, "simulate partitions of this many items instead");
  ps->add_option("--seed", o.seed, "random seed");

  auto* serve = app.add_subcommand("serve", "run the local HTTP service");
  serve->add_option("--host", o.host, "bind address");
  serve->add_option("--port", o.port, "port");

  auto* rep = app.add_subcommand("replay", "re-execute a session's command log");
  rep->add_option("log", o.log, "command log")->required();
  rep->add_option("--session", o.session, "new session directory")->required();
  rep->add_option("--out-dir", o.out_dir, "directory for --out files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  if (*ps) {
    emit(prior_sim(o), o.out);
    return 0;
  }
  if (*serve) {
    Service service(session_root());
    const int port = service.bind(o.host, o.port);
    std::cerr << "listening on " << o.host << ":" << port << "\n";
    service.listen();
    return 0;
  }
  if (*rep) return replay(o);

  const fs::path dir = resolve_session(o.session);
  std::optional<Session> session;
  if (*imp) {
    session = fs::exists(dir / kManifestFile) ? Session::open(dir) : Session::create(dir);
    const std::string name = o.name.empty() ? fs::path(o.file).stem().string() : o.name;
    session->import_csv(read_file(o.file), name);
    session->persist();
  } else {
    session = Session::open(dir);
  }
  Session& s = *session;

  if (*desc) {
    emit(o.plot.empty() ? describe_csv(s.data()) : describe_plot(s.data(), o), o.out);
  } else if (*tr) {
    TransformRecord rec{o.op, split_list(o.columns), o.number, o.text};
    s.transform(rec);
    s.persist();
  } else if (*sm) {
    json j = s.spec() ? json(*s.spec()) : json(ModelSpec{});
    if (!o.model_json.empty()) {
      try {
        j.merge_patch(json::parse(read_file(o.model_json)));
      } catch (const json::exception&) {
        invalid("bad_json", o.model_json + " is not valid JSON");
      }
    }
    if (!o.family.empty()) j["family"] = o.family;
    if (!o.link.empty()) j["link"] = o.link;
    if (!o.mixing.empty()) j["mixing"] = o.mixing;
    if (!o.stick.empty()) j["stick"]["family"] = o.stick;
    if (o.alpha) j["stick"]["alpha"] = *o.alpha;
    if (o.stick_a) j["stick"]["a"] = *o.stick_a;
    if (o.stick_b) {
      j["stick"]["b"] = *o.stick_b;
    } else if (o.stick == "normalized_stable") {
      j["stick"]["b"] = 0.0;
    }
    if (o.stick_c) j["stick"]["c"] = *o.stick_c;
    for (const auto& kv : o.settings) set_path(j, kv);
    ModelSpec spec;
    try {
      spec = j.get<ModelSpec>();
    } catch (const json::exception& e) {
      invalid("bad_model", e.what());
    }
    if (!o.y.empty()) {
      RoleAssignment roles;
      roles.dependent = o.y;
      roles.covariates = split_list(o.x);
      if (!o.group.empty()) roles.group = o.group;
      if (!o.weights.empty()) roles.weights = o.weights;
      if (!o.censor_lb.empty()) roles.censor_lb = o.censor_lb;
      if (!o.censor_ub.empty()) roles.censor_ub = o.censor_ub;
      s.configure(roles, spec);
    } else if (s.roles()) {
      s.configure(*s.roles(), spec);
    } else {
      s.set_model(spec);
    }
    s.persist();
  } else if (*run) {
    RunOptions ro;
    ro.iterations = o.iterations;
    ro.burn_in = o.burn_in;
    ro.thin = o.thin;
    ro.seed = o.seed;
    RunJob job = s.prepare_run(ro);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const RunResult res = execute_run(
        job, &g_cancel, [&](const RunJob& j, std::uint64_t done, std::uint64_t total) {
          s.commit(j);
          std::cerr << "progress " << done << "/" << total << "\n";
        });
    if (res.cancelled) {
      std::cerr << "error: cancelled: stopped after " << res.completed
                << " iterations; the session can be extended with another run\n";
      return kCancelledExit;
    }
    std::cout << "iterations " << s.chain().iteration << " draws " << s.store().n_draws() << "\n";
  } else if (*sum) {
    const auto rows = s.summary(o.burn_in, o.thin.value_or(1));
    if (o.format == "text") {
      emit(summary_text(rows), o.out);
    } else if (o.format == "csv") {
      emit(summary_csv(rows), o.out);
    } else {
      invalid("bad_format", "--format must be csv or text");
    }
  } else if (*diag) {
    if (!o.trace.empty()) {
      std::string csv = "iter,value\n";
      for (const auto& [it, v] : bnpreg::trace(s.store(), o.trace, o.window)) {
        csv += std::to_string(it) + "," + format_double(v) + "\n";
      }
      emit(csv, o.out);
    } else {
      emit(diagnostics_csv(s.summary(o.burn_in, o.thin.value_or(1))), o.out);
    }
  } else if (*pred) {
    emit(s.predict(predictive_query(o), !o.burn_in.has_value()).to_csv(), o.out);
  } else if (*fit) {
    const FitReport f = s.fit();
    emit(fit_csv(f, s.model_data().rows), o.out);
    if (!o.summary_out.empty()) write_file_atomic(o.summary_out, fit_summary_csv(f));
  }

  append_file(dir / kCommandLog, record ? *record : log_record(args, o));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return execute(args, std::nullopt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.reason() << ": " << e.what() << "\n";
    return e.kind() == ErrorKind::numerical ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 2;
  }
}
