#include "dml/cli_runner.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dml/analytic.hpp"
#include "dml/io.hpp"
#include "dml/lsmc_poly.hpp"
#include "dml/rng.hpp"

namespace dml::cli {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::uint64_t n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad unsigned integer for " + key + ": '" + v + "'");
  }
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<std::size_t>(to_u64(key, item)));
  }
  if (out.empty()) throw std::invalid_argument("config: empty list for " + key);
  return out;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "market.s0") market.s0 = to_double(key, value);
  else if (key == "market.sigma") market.sigma = to_double(key, value);
  else if (key == "market.r") market.r = to_double(key, value);
  else if (key == "market.maturity") {
    market.maturity = to_double(key, value);
    instrument.maturity = market.maturity;
  } else if (key == "market.n_steps") market.n_steps = static_cast<int>(to_int(key, value));
  else if (key == "instrument.kind") instrument.kind = instruments::kind_from_name(value);
  else if (key == "instrument.strike") instrument.strike = to_double(key, value);
  else if (key == "run.method") method = value;
  else if (key == "run.paths") paths = static_cast<std::size_t>(to_u64(key, value));
  else if (key == "run.test_paths") test_paths = static_cast<std::size_t>(to_u64(key, value));
  else if (key == "run.seed") seed = to_u64(key, value);
  else if (key == "run.out") out_dir = value;
  else if (key == "train.sizes") train_sizes = to_sizes(key, value);
  else if (key == "train.seeds") n_seeds = static_cast<int>(to_int(key, value));
  else if (key == "train.degree") poly_degree = static_cast<int>(to_int(key, value));
  else if (key == "train.lambda") net_cfg.lambda = to_double(key, value);
  else if (key == "train.epochs") net_cfg.epochs = static_cast<int>(to_int(key, value));
  else if (key == "train.batch_size") net_cfg.batch_size = static_cast<int>(to_int(key, value));
  else if (key == "train.lr") net_cfg.lr.base = to_double(key, value);
  else if (key == "train.hidden_width") net_cfg.hidden_width = static_cast<int>(to_int(key, value));
  else if (key == "train.hidden_layers") net_cfg.hidden_layers = static_cast<int>(to_int(key, value));
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::echo() const {
  std::map<std::string, std::string> m;
  m["market.s0"] = io::fmt(market.s0);
  m["market.sigma"] = io::fmt(market.sigma);
  m["market.r"] = io::fmt(market.r);
  m["market.maturity"] = io::fmt(market.maturity);
  m["market.n_steps"] = std::to_string(market.n_steps);
  m["instrument.kind"] = instruments::kind_name(instrument.kind);
  m["instrument.strike"] = io::fmt(instrument.strike);
  m["run.method"] = method;
  m["run.paths"] = std::to_string(paths);
  m["run.test_paths"] = std::to_string(test_paths);
  m["run.seed"] = std::to_string(seed);
  m["run.out"] = out_dir.string();
  std::string sizes;
  for (std::size_t s : train_sizes) sizes += (sizes.empty() ? "" : ",") + std::to_string(s);
  m["train.sizes"] = sizes;
  m["train.seeds"] = std::to_string(n_seeds);
  m["train.degree"] = std::to_string(poly_degree);
  m["train.lambda"] = io::fmt(net_cfg.lambda);
  m["train.epochs"] = std::to_string(net_cfg.epochs);
  m["train.batch_size"] = std::to_string(net_cfg.batch_size);
  m["train.lr"] = io::fmt(net_cfg.lr.base);
  m["train.hidden_width"] = std::to_string(net_cfg.hidden_width);
  m["train.hidden_layers"] = std::to_string(net_cfg.hidden_layers);
  return m;
}

void RunConfig::validate() const {
  market.validate();
  instrument.validate();
  if (std::abs(instrument.maturity - market.maturity) > 1e-12)
    throw std::invalid_argument("config: instrument and market maturities differ");
  if (paths < 1 || test_paths < 1) throw std::invalid_argument("config: path counts must be positive");
  if (n_seeds < 1) throw std::invalid_argument("config: train.seeds must be positive");
}

RunConfig load_config(const fs::path& file,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (!file.empty()) {
    std::istringstream in(io::read_text(file));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                    " is not key=value: '" + line + "'");
      cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }
  for (const auto& [k, v] : overrides) cfg.apply(k, v);
  return cfg;
}

RunConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  return load_config("", pairs);
}

void RunManifest::write(const fs::path& dir) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["status"] = status;
  j["config"] = config_echo;
  j["stage_seeds"] = stage_seeds;
  j["wall_times_s"] = wall_times_s;
  auto outs = nlohmann::ordered_json::array();
  for (const auto& [name, sum] : outputs) outs.push_back({{"file", name}, {"fnv1a64", sum}});
  j["outputs"] = std::move(outs);
  io::write_text(dir / "manifest.json", j.dump(2) + "\n");
}

namespace {

int run_with_manifest(const RunConfig& cfg, const std::string& command,
                      const std::function<void(RunManifest&)>& body) {
  cfg.validate();
  RunManifest man;
  man.command = command;
  man.config_echo = cfg.echo();
  man.write(cfg.out_dir);
  Stopwatch total;
  try {
    body(man);
  } catch (const std::exception& e) {
    man.status = std::string("error: ") + e.what();
    man.wall_times_s["total"] = total.seconds();
    man.write(cfg.out_dir);
    throw;
  }
  man.status = "ok";
  man.wall_times_s["total"] = total.seconds();
  man.write(cfg.out_dir);
  return 0;
}

void emit(RunManifest& man, const fs::path& dir, const std::string& name,
          const std::string& content) {
  io::write_text(dir / name, content);
  man.outputs.emplace_back(name, io::checksum_hex(dir / name));
}

std::vector<std::size_t> all_rebalance_dates(std::size_t n_steps) {
  std::vector<std::size_t> dates(n_steps);
  for (std::size_t d = 0; d < n_steps; ++d) dates[d] = d;
  return dates;
}

std::vector<std::size_t> fitted_dates(std::size_t n_steps) {
  std::vector<std::size_t> dates;
  for (std::size_t d = 1; d < n_steps; ++d) dates.push_back(d);
  return dates;
}

// Pricing/delta curves on a spot grid around s0 at the first rebalance date,
// with the analytic quote alongside.
std::string curve_csv(const RunConfig& cfg,
                      const std::function<double(double)>& price,
                      const std::function<double(double)>& delta) {
  std::ostringstream out;
  out << "spot,model_price,model_delta,bs_price,bs_delta\n";
  const double s0 = cfg.market.s0;
  const double tau = cfg.market.maturity - cfg.market.maturity / cfg.market.n_steps;
  for (int i = 0; i <= 100; ++i) {
    const double spot = s0 * (0.6 + 0.01 * i);
    const auto bs = cfg.instrument.kind == instruments::Kind::european_call
                        ? analytic::bs_call(spot, cfg.instrument.strike, cfg.market.sigma, tau,
                                            cfg.market.r)
                        : analytic::bs_digital(spot, cfg.instrument.strike, cfg.market.sigma, tau,
                                               cfg.market.r);
    out << io::fmt(spot) << ',' << io::fmt(price(spot)) << ',' << io::fmt(delta(spot)) << ','
        << io::fmt(bs.price) << ',' << io::fmt(bs.delta) << '\n';
  }
  return out.str();
}

struct TrainedMethod {
  std::shared_ptr<lsmc::PolyModel> poly;
  std::shared_ptr<net::NetParams> net_params;
  net::TrainConfig net_cfg;
  std::vector<double> loss_history;
};

TrainedMethod train_method(const RunConfig& cfg, RunManifest& man,
                           const market::PathBatch& batch) {
  TrainedMethod out;
  const std::string label = "train." + cfg.method;
  const std::uint64_t train_seed = rng::label_seed(cfg.seed, label);
  man.stage_seeds[label] = train_seed;

  if (cfg.method == "lsmc_poly") {
    const auto ts = instruments::build_training_set(
        batch, cfg.instrument, instruments::SampleMode::per_date, fitted_dates(batch.n_steps()),
        train_seed);
    out.poly = std::make_shared<lsmc::PolyModel>(lsmc::fit_poly(ts, cfg.poly_degree));
  } else if (cfg.method == "lsmc_nn" || cfg.method == "diff_nn") {
    const auto ts = instruments::build_training_set(
        batch, cfg.instrument, instruments::SampleMode::time_feature,
        all_rebalance_dates(batch.n_steps()), train_seed);
    out.net_cfg = cfg.net_cfg;
    out.net_cfg.seed = train_seed;
    if (cfg.method == "lsmc_nn") out.net_cfg.lambda = 0.0;
    auto result = net::train(ts, out.net_cfg);
    out.net_params = std::make_shared<net::NetParams>(std::move(result.params));
    out.loss_history = std::move(result.loss_history);
  } else {
    throw std::invalid_argument("train: unknown method '" + cfg.method +
                                "' (expected lsmc_poly, lsmc_nn or diff_nn)");
  }
  return out;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg) {
  return run_with_manifest(cfg, "simulate", [&](RunManifest& man) {
    const std::uint64_t sim_seed = rng::label_seed(cfg.seed, "sim.paths");
    man.stage_seeds["sim.paths"] = sim_seed;
    Stopwatch sw;
    const auto batch = market::propagate_tangents(market::simulate(cfg.market, cfg.paths, sim_seed));
    man.wall_times_s["simulate"] = sw.seconds();
    std::ostringstream out;
    market::dump_paths_csv(batch, out);
    emit(man, cfg.out_dir, "paths.csv", out.str());
  });
}

int cmd_train(const RunConfig& cfg) {
  return run_with_manifest(cfg, "train", [&](RunManifest& man) {
    const std::string sim_label = "sim.train." + std::to_string(cfg.paths) + ".s0";
    const std::uint64_t sim_seed = rng::label_seed(cfg.seed, sim_label);
    man.stage_seeds[sim_label] = sim_seed;
    const auto batch =
        market::propagate_tangents(market::simulate(cfg.market, cfg.paths, sim_seed));

    Stopwatch sw;
    const TrainedMethod trained = train_method(cfg, man, batch);
    man.wall_times_s["train"] = sw.seconds();

    if (trained.poly) {
      emit(man, cfg.out_dir, "model_" + cfg.method + ".json", lsmc::poly_to_json(*trained.poly));
      const auto* model = trained.poly.get();
      emit(man, cfg.out_dir, "curve_" + cfg.method + ".csv",
           curve_csv(
               cfg, [model](double s) { return lsmc::poly_price(*model, 1, s); },
               [model](double s) { return lsmc::poly_delta(*model, 1, s); }));
    } else {
      emit(man, cfg.out_dir, "model_" + cfg.method + ".json",
           net::net_to_json(*trained.net_params, &trained.net_cfg));
      std::ostringstream loss_out;
      net::dump_loss_csv(trained.loss_history, loss_out);
      emit(man, cfg.out_dir, "loss_" + cfg.method + ".csv", loss_out.str());
      const auto* params = trained.net_params.get();
      const double tau = cfg.market.maturity - cfg.market.maturity / cfg.market.n_steps;
      net::Workspace ws;
      emit(man, cfg.out_dir, "curve_" + cfg.method + ".csv",
           curve_csv(
               cfg,
               [params, tau, &ws](double s) { return net::forward(*params, s, tau, ws).y; },
               [params, tau, &ws](double s) { return net::predict(*params, s, tau, ws).dy_dz; }));
    }
  });
}

int cmd_hedge(const RunConfig& cfg) {
  return run_with_manifest(cfg, "hedge", [&](RunManifest& man) {
    const std::uint64_t test_seed = rng::label_seed(cfg.seed, "sim.test");
    man.stage_seeds["sim.test"] = test_seed;

    hedge::DeltaSource source;
    if (cfg.method == "analytic") {
      source = hedge::analytic_source(cfg.instrument, cfg.market);
    } else {
      const std::string sim_label = "sim.train." + std::to_string(cfg.paths) + ".s0";
      const std::uint64_t sim_seed = rng::label_seed(cfg.seed, sim_label);
      man.stage_seeds[sim_label] = sim_seed;
      if (sim_seed == test_seed)
        throw std::runtime_error("hedge: training seed collides with test seed");
      const auto batch =
          market::propagate_tangents(market::simulate(cfg.market, cfg.paths, sim_seed));
      const TrainedMethod trained = train_method(cfg, man, batch);
      source = trained.poly ? hedge::poly_source(trained.poly, cfg.method)
                            : hedge::net_source(trained.net_params, cfg.method);
    }

    Stopwatch sw;
    const auto report = hedge::backtest(source, cfg.market, cfg.instrument, cfg.test_paths, test_seed);
    man.wall_times_s["backtest"] = sw.seconds();

    std::ostringstream pnl, hist;
    hedge::dump_pnl_csv(report, pnl);
    hedge::dump_hist_csv(report, hist);
    emit(man, cfg.out_dir, "pnl.csv", pnl.str());
    emit(man, cfg.out_dir, "hist.csv", hist.str());

    nlohmann::ordered_json j;
    j["method"] = report.method;
    j["premium"] = report.premium;
    j["rel_error"] = report.rel_error;
    j["n_test_paths"] = report.n_test_paths;
    j["seed"] = report.seed;
    emit(man, cfg.out_dir, "hedge_report.json", j.dump(2) + "\n");
  });
}

int cmd_table1(const RunConfig& cfg) {
  return run_with_manifest(cfg, "table1", [&](RunManifest& man) {
    hedge::Table1Config plan;
    plan.sizes = cfg.train_sizes;
    plan.n_seeds = cfg.n_seeds;
    plan.poly_degree = cfg.poly_degree;
    plan.net_cfg = cfg.net_cfg;
    plan.n_test_paths = cfg.test_paths;
    plan.root_seed = cfg.seed;

    Stopwatch sw;
    const auto result = hedge::run_table1(cfg.market, cfg.instrument, plan);
    man.wall_times_s["table1"] = sw.seconds();
    for (const auto& [label, s] : result.stage_seeds) man.stage_seeds[label] = s;

    nlohmann::ordered_json j;
    j["sizes"] = result.sizes;
    j["analytic"] = {{"rel_error", result.analytic}};
    auto methods = nlohmann::ordered_json::object();
    for (const auto& method : result.methods) {
      auto rows = nlohmann::ordered_json::array();
      const auto& cells = result.cells.at(method);
      for (std::size_t si = 0; si < result.sizes.size(); ++si) {
        nlohmann::ordered_json row;
        row["size"] = result.sizes[si];
        row["median"] = cells[si].median;
        row["per_seed"] = cells[si].per_seed;
        if (!cells[si].error.empty()) row["error"] = cells[si].error;
        rows.push_back(std::move(row));
      }
      methods[method] = std::move(rows);
    }
    j["methods"] = std::move(methods);
    j["test_seed"] = result.test_seed;
    emit(man, cfg.out_dir, "table1.json", j.dump(2) + "\n");

    std::ostringstream hist;
    hist << "bin_left,bin_right,count,method\n";
    for (const auto& [method, report] : result.figure_reports) {
      std::ostringstream pnl, one_hist;
      hedge::dump_pnl_csv(report, pnl);
      emit(man, cfg.out_dir, "pnl_" + method + ".csv", pnl.str());
      hedge::dump_hist_csv(report, one_hist);
      const std::string block = one_hist.str();
      hist << block.substr(block.find('\n') + 1);
    }
    emit(man, cfg.out_dir, "hist.csv", hist.str());
  });
}

}  // namespace dml::cli
