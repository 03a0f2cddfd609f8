#include "srnreg/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "srnreg/diagnostics.hpp"
#include "srnreg/io.hpp"
#include "srnreg/model.hpp"
#include "srnreg/regularizer.hpp"
#include "srnreg/rng.hpp"
#include "srnreg/tasks.hpp"
#include "srnreg/trainer.hpp"

namespace fs = std::filesystem;

namespace srnreg::cli {

namespace {

// Flag values before conversion to library configs. Every field has a default
// so an empty config file plus no flags is a valid run.
struct Options {
  std::string task = "temporal_order";
  std::size_t T = 100;
  std::size_t hidden = 100;
  std::vector<double> sigma{0.01};
  std::string sigma_kind = "variance";
  double alpha = 3e-4;
  double mu = 0.9;
  std::size_t batch = 10;
  std::size_t epochs = 2000;
  std::size_t iters = 50;
  std::size_t h = 0;
  std::string reg = "on";
  double qmin = -1.0;
  double qmax = 1.0;
  double r0 = 0.5;
  std::string r0_mode = "relative";
  std::string q_orientation = "deep_over_top";
  std::size_t max_rejects = 200;
  std::vector<std::uint64_t> seeds{1};
  std::string out = ".";
  std::size_t train_size = 20000;
  std::size_t valid_size = 1000;
  std::size_t test_size = 10000;
  double tolerance = 0.04;
  std::size_t probes = 100;
  bool dynamics = true;
  std::string model;
  std::string data;
};

const std::vector<std::string> kTasks = {"adding", "multiplication", "temporal_order", "temporal_order3"};

void add_task_options(CLI::App* app, Options& o) {
  app->add_option("--task", o.task, "adding|multiplication|temporal_order|temporal_order3")
      ->check(CLI::IsMember(kTasks))
      ->capture_default_str();
  app->add_option("--T", o.T, "sequence length")->capture_default_str();
  app->add_option("--tolerance", o.tolerance, "regression success tolerance")->capture_default_str();
}

void add_seed_options(CLI::App* app, Options& o) {
  app->add_option("--seed,--seeds", o.seeds, "seed list (space or comma separated)")
      ->delimiter(',')
      ->expected(1, -1)
      ->capture_default_str();
  app->add_option("--out", o.out, "output directory")->capture_default_str();
}

void add_size_options(CLI::App* app, Options& o) {
  app->add_option("--train-size", o.train_size)->capture_default_str();
  app->add_option("--valid-size", o.valid_size)->capture_default_str();
  app->add_option("--test-size", o.test_size)->capture_default_str();
}

void add_net_options(CLI::App* app, Options& o, bool sigma_list) {
  app->add_option("--hidden", o.hidden, "hidden units")->capture_default_str();
  auto* s = app->add_option("--sigma", o.sigma, "init scale")->capture_default_str();
  if (sigma_list) {
    s->delimiter(',')->expected(1, -1);
  } else {
    s->expected(1);
  }
  app->add_option("--sigma-kind", o.sigma_kind, "whether sigma is the variance or the standard deviation")
      ->check(CLI::IsMember({"variance", "stddev"}))
      ->capture_default_str();
}

void add_train_options(CLI::App* app, Options& o) {
  app->add_option("--alpha", o.alpha, "learning rate")->capture_default_str();
  app->add_option("--mu", o.mu, "momentum")->capture_default_str();
  app->add_option("--batch", o.batch, "minibatch size")->capture_default_str();
  app->add_option("--epochs", o.epochs)->capture_default_str();
  app->add_option("--iters", o.iters, "applied corrections per epoch")->capture_default_str();
  app->add_option("--h", o.h, "backpropagation depth (0 = T)")->capture_default_str();
  app->add_option("--reg", o.reg, "gradient regularization on|off")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  app->add_option("--qmin", o.qmin)->capture_default_str();
  app->add_option("--qmax", o.qmax)->capture_default_str();
  app->add_option("--r0", o.r0, "dS magnitude threshold")->capture_default_str();
  app->add_option("--r0-mode", o.r0_mode, "relative (r0 * S) or absolute")
      ->check(CLI::IsMember({"relative", "absolute"}))
      ->capture_default_str();
  app->add_option("--q-orientation", o.q_orientation, "deep_over_top|top_over_deep")
      ->check(CLI::IsMember({"deep_over_top", "top_over_deep"}))
      ->capture_default_str();
  app->add_option("--max-rejects", o.max_rejects, "consecutive rejects before a fallback update that ends the epoch")
      ->capture_default_str();
  app->add_option("--dynamics", o.dynamics, "write dynamics.csv (true|false)")->capture_default_str();
}

TaskSpec task_spec(const Options& o) {
  return make_task_spec(parse_task_kind(o.task), o.T, o.tolerance);
}

TrainConfig train_config(const Options& o, std::uint64_t seed) {
  TrainConfig c;
  c.alpha = o.alpha;
  c.mu = o.mu;
  c.batch_size = o.batch;
  c.epochs = o.epochs;
  c.iters_per_epoch = o.iters;
  c.n_hid = o.hidden;
  c.h = o.h;
  c.reg_enabled = o.reg == "on";
  c.reg.q_min = o.qmin;
  c.reg.q_max = o.qmax;
  c.reg.r0 = o.r0;
  c.reg.r0_mode = parse_r0_mode(o.r0_mode);
  c.reg.orientation = parse_q_orientation(o.q_orientation);
  c.sigma = o.sigma.front();
  c.sigma_kind = parse_sigma_kind(o.sigma_kind);
  c.data_seed = seed;
  c.init_seed = derive_seed(seed, 1);
  c.order_seed = derive_seed(seed, 2);
  c.max_consecutive_rejects = o.max_rejects;
  c.sizes = {o.train_size, o.valid_size, o.test_size};
  return c;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return os.str();
}

// Never reuses an existing directory.
fs::path fresh_dir(const fs::path& base) {
  fs::path p = base;
  for (int k = 2; fs::exists(p); ++k) p = base.string() + "-" + std::to_string(k);
  fs::create_directories(p);
  return p;
}

std::string fixed(double x, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << x;
  return os.str();
}

void write_resolved_config(const Options& o, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << "# resolved settings; usable with --config\n";
  f << "task = " << o.task << "\nT = " << o.T << "\ntolerance = " << format_double(o.tolerance) << "\n";
  f << "hidden = " << o.hidden << "\nsigma = " << format_double(o.sigma.front())
    << "\nsigma-kind = " << o.sigma_kind << "\n";
  f << "alpha = " << format_double(o.alpha) << "\nmu = " << format_double(o.mu) << "\nbatch = " << o.batch
    << "\nepochs = " << o.epochs << "\niters = " << o.iters << "\nh = " << o.h << "\n";
  f << "reg = " << o.reg << "\nqmin = " << format_double(o.qmin) << "\nqmax = " << format_double(o.qmax)
    << "\nr0 = " << format_double(o.r0) << "\nr0-mode = " << o.r0_mode
    << "\nq-orientation = " << o.q_orientation << "\nmax-rejects = " << o.max_rejects << "\n";
  f << "train-size = " << o.train_size << "\nvalid-size = " << o.valid_size << "\ntest-size = " << o.test_size
    << "\n";
  f << "seeds = ";
  for (std::size_t i = 0; i < o.seeds.size(); ++i) f << (i ? "," : "") << o.seeds[i];
  f << "\n";
}

class WarningSink : public TrainObserver {
 public:
  explicit WarningSink(std::ostream& err) : err_(err) {}
  void on_warning(const std::string& w) override { err_ << "warning: " << w << "\n"; }

 private:
  std::ostream& err_;
};

int cmd_gen(const Options& o, std::ostream& out) {
  const TaskSpec spec = task_spec(o);
  const SplitSizes sizes{o.train_size, o.valid_size, o.test_size};
  fs::create_directories(o.out);
  for (std::uint64_t seed : o.seeds) {
    const Splits s = make_splits(spec, seed, sizes);
    const std::string stem = o.task + "_T" + std::to_string(o.T) + "_seed" + std::to_string(seed);
    const std::pair<const char*, const SequenceBatch*> parts[] = {
        {"train", &s.train}, {"valid", &s.valid}, {"test", &s.test}};
    for (const auto& [name, batch] : parts) {
      const fs::path p = fs::path(o.out) / (stem + "_" + name + ".dat");
      save_dataset(*batch, seed, p);
      out << p.string() << " " << batch->size() << "\n";
    }
  }
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.sigma.size() != 1) throw std::invalid_argument("sigma: train takes a single value");
  const TaskSpec spec = task_spec(o);
  for (std::uint64_t seed : o.seeds) train_config(o, seed).validate();
  if (o.h > o.T) throw std::invalid_argument("h: must be <= T (" + std::to_string(o.T) + ")");

  const fs::path sweep = fresh_dir(fs::path(o.out) / (timestamp() + "-" + o.task + "-reg" + o.reg));
  write_resolved_config(o, sweep / "config.txt");

  CsvWriter summary(sweep / "summary.csv", {"seed", "initial_valid", "best_valid", "best_epoch", "test",
                                            "corrections", "draws", "rejects", "forced"});
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  std::vector<double> tests;

  out << "sweep " << sweep.string() << "\n";
  out << std::left << std::setw(8) << "seed" << std::setw(14) << "init_valid" << std::setw(14) << "best_valid"
      << std::setw(8) << "epoch" << std::setw(10) << "test" << std::setw(10) << "draws" << std::setw(10)
      << "rejects" << "forced\n";

  for (std::uint64_t seed : o.seeds) {
    const TrainConfig cfg = train_config(o, seed);
    const fs::path dir = fresh_dir(sweep / ("seed" + std::to_string(seed)));
    MetricsRecorder metrics(dir / "metrics.csv", dir / "epochs.csv");
    std::unique_ptr<DynamicsRecorder> dyn;
    WarningSink warnings(err);
    ObserverList obs;
    obs.add(&metrics);
    obs.add(&warnings);
    if (o.dynamics) {
      dyn = std::make_unique<DynamicsRecorder>(dir / "dynamics.csv");
      obs.add(dyn.get());
    }
    const TrainResult r = train(cfg, spec, &obs);
    save_model(r.best_params, dir / "model.txt");
    save_model(r.final_params, dir / "final_model.txt");

    summary.cell(static_cast<long long>(seed)).cell(r.initial_valid_accuracy).cell(r.best_valid_accuracy);
    summary.cell(r.best_epoch).cell(r.test_accuracy).cell(r.corrections).cell(r.draws).cell(r.rejects);
    summary.cell(r.forced).end_row();
    runs.push_back({{"seed", seed},
                    {"dir", dir.filename().string()},
                    {"initial_valid", r.initial_valid_accuracy},
                    {"best_valid", r.best_valid_accuracy},
                    {"best_epoch", r.best_epoch},
                    {"test", r.test_accuracy},
                    {"corrections", r.corrections},
                    {"draws", r.draws},
                    {"rejects", r.rejects},
                    {"forced", r.forced}});
    tests.push_back(r.test_accuracy);

    out << std::left << std::setw(8) << seed << std::setw(14) << fixed(r.initial_valid_accuracy)
        << std::setw(14) << fixed(r.best_valid_accuracy) << std::setw(8) << r.best_epoch << std::setw(10)
        << fixed(r.test_accuracy) << std::setw(10) << r.draws << std::setw(10) << r.rejects << r.forced
        << "\n";
  }

  double mean = 0.0;
  for (double t : tests) mean += t / static_cast<double>(tests.size());
  const double best = *std::max_element(tests.begin(), tests.end());

  nlohmann::ordered_json j;
  j["task"] = o.task;
  j["T"] = o.T;
  j["reg"] = o.reg;
  j["seeds"] = o.seeds;
  j["test_best"] = best;
  j["test_mean"] = mean;
  j["runs"] = runs;
  std::ofstream(sweep / "summary.json") << j.dump(2) << "\n";

  out << "task " << o.task << " T=" << o.T << "  grad. reg. " << (o.reg == "on" ? "ON " : "OFF")
      << "  best " << fixed(100.0 * best, 1) << "%  mean " << fixed(100.0 * mean, 1) << "%  (n=" << tests.size()
      << ")\n";
  return kOk;
}

int cmd_scan(const Options& o, std::ostream& out) {
  const TaskSpec spec = task_spec(o);
  const std::size_t h = o.h == 0 ? o.T : o.h;
  if (o.hidden < 1) throw std::invalid_argument("hidden must be >= 1");
  if (o.probes < 1) throw std::invalid_argument("probes must be >= 1");
  for (double s : o.sigma)
    if (!(s > 0.0)) throw std::invalid_argument("sigma must be > 0");
  const SigmaKind kind = parse_sigma_kind(o.sigma_kind);
  fs::create_directories(o.out);

  for (std::uint64_t seed : o.seeds) {
    const SequenceBatch probes = generate(spec, o.probes, derive_seed(seed, 3));
    for (double sigma : o.sigma) {
      const SrnParams net = init_gaussian(spec.n_in, o.hidden, spec.n_out, sigma, derive_seed(seed, 1),
                                          spec.output, kind);
      const DepthProfile p = depth_scan(net, probes, h);
      const fs::path path =
          fs::path(o.out) / ("depth_profile_sigma" + format_double(sigma) + "_seed" + std::to_string(seed) + ".csv");
      write_depth_profile(p, path);
      const double ratio = p.delta_norm.front() > 0.0 ? p.delta_norm.back() / p.delta_norm.front() : 0.0;
      const double corr = correlation_check(p);
      out << path.string() << "  sigma=" << format_double(sigma) << " end/start=" << std::scientific
          << std::setprecision(3) << ratio << std::defaultfloat << " corr="
          << (corr == kNoCorrelation ? std::string("n/a") : fixed(corr)) << "\n";
    }
  }
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const SrnParams params = load_model(o.model);
  const LoadedDataset ds = load_dataset(o.data);
  const SequenceBatch& b = ds.batch;
  if (params.n_in() != b.spec.n_in || params.n_out() != b.spec.n_out) {
    throw DimensionError("model " + std::to_string(params.n_in()) + "->" + std::to_string(params.n_out()) +
                         " does not match dataset " + std::to_string(b.spec.n_in) + "->" +
                         std::to_string(b.spec.n_out));
  }
  if (params.output != b.spec.output) {
    throw DimensionError("model output " + to_string(params.output) + " does not match task " +
                         to_string(b.spec.kind));
  }
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const ForwardTrace tr = forward(params, b.inputs[i]);
    const LossResult lr = output_loss(tr, b.targets[i], b.spec.loss, b.spec.success_tolerance);
    loss += lr.loss;
    if (lr.correct) ++correct;
  }
  const double n = static_cast<double>(b.size());
  const double acc = b.size() ? static_cast<double>(correct) / n : 0.0;
  const double mean_loss = b.size() ? loss / n : 0.0;

  nlohmann::ordered_json j;
  j["model"] = o.model;
  j["data"] = o.data;
  j["task"] = to_string(b.spec.kind);
  j["T"] = b.spec.T;
  j["n"] = b.size();
  j["correct"] = correct;
  j["accuracy"] = acc;
  j["mean_loss"] = mean_loss;
  fs::create_directories(o.out);
  const fs::path jp = fs::path(o.out) / "eval.json";
  std::ofstream f(jp);
  if (!f) throw std::runtime_error("cannot open for writing: " + jp.string());
  f << j.dump(2) << "\n";

  out << "accuracy " << fixed(acc) << " (" << correct << "/" << b.size() << ")  mean_loss "
      << format_double(mean_loss) << "\n";
  return kOk;
}

std::string flag_name(const std::string& tok) {
  if (tok.rfind("--", 0) != 0) return {};
  const auto eq = tok.find('=');
  return tok.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
}

}  // namespace

std::vector<std::string> config_tokens(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key(trim(s.substr(0, eq)));
    std::string value(trim(s.substr(eq + 1)));
    if (key.empty()) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    tokens.push_back("--" + key);
    tokens.push_back(value);
  }
  return tokens;
}

std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::optional<std::string> config;
  std::set<std::string> given;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string name = flag_name(args[i]);
    if (name.empty()) continue;
    if (name == "config") {
      const auto eq = args[i].find('=');
      if (eq != std::string::npos) {
        config = args[i].substr(eq + 1);
      } else if (i + 1 < args.size()) {
        config = args[++i];
      }
      continue;
    }
    given.insert(name);
  }
  if (!config || args.empty()) return args;

  // "seed" and "seeds" name the same option.
  if (given.count("seed")) given.insert("seeds");
  if (given.count("seeds")) given.insert("seed");

  std::vector<std::string> merged{args.front()};
  const std::vector<std::string> file = config_tokens(*config);
  for (std::size_t i = 0; i + 1 < file.size(); i += 2) {
    if (given.count(file[i].substr(2))) continue;
    merged.push_back(file[i]);
    merged.push_back(file[i + 1]);
  }
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (flag_name(args[i]) == "config") {
      if (args[i].find('=') == std::string::npos) ++i;
      continue;
    }
    merged.push_back(args[i]);
  }
  return merged;
}

int run(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"srnreg: gradient-regularized SRN training and diagnostics"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help and exit");
  app.set_help_all_flag("--help-all");

  std::string config_unused;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_unused, "key = value settings file (flags override it)");
  };

  CLI::App* gen = app.add_subcommand("gen", "write train/valid/test dataset files");
  add_task_options(gen, o);
  add_seed_options(gen, o);
  add_size_options(gen, o);
  add_config(gen);

  CLI::App* trn = app.add_subcommand("train", "train one network per seed and summarize");
  add_task_options(trn, o);
  add_seed_options(trn, o);
  add_size_options(trn, o);
  add_net_options(trn, o, false);
  add_train_options(trn, o);
  add_config(trn);

  CLI::App* scan = app.add_subcommand("scan", "gradient norm vs depth of untrained networks");
  add_task_options(scan, o);
  add_seed_options(scan, o);
  add_net_options(scan, o, true);
  scan->add_option("--h", o.h, "depth (0 = T)")->capture_default_str();
  scan->add_option("--probes", o.probes, "probe sequences")->capture_default_str();
  add_config(scan);

  CLI::App* ev = app.add_subcommand("eval", "accuracy of a saved model on a dataset file");
  ev->add_option("--model", o.model, "model file")->required();
  ev->add_option("--data", o.data, "dataset file")->required();
  ev->add_option("--out", o.out, "directory for eval.json")->capture_default_str();
  add_config(ev);

  try {
    std::vector<std::string> args = raw;
    if (!args.empty()) args = merge_config(args);
    std::vector<const char*> argv{"srnreg"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    if (*gen) return cmd_gen(o, out);
    if (*trn) return cmd_train(o, out, err);
    if (*scan) return cmd_scan(o, out);
    if (*ev) return cmd_eval(o, out);
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const DimensionError& e) {
    err << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const std::invalid_argument& e) {
    err << "invalid setting: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const std::runtime_error& e) {
    err << "input error: " << e.what() << "\n";
    return kInput;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace srnreg::cli
