#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "resmet/metrics.hpp"
#include "resmet/model_io.hpp"
#include "resmet/report.hpp"
#include "resmet/score_test.hpp"
#include "resmet/simlab.hpp"
#include "resmet/team_strength.hpp"

namespace fs = std::filesystem;
using namespace resmet;

namespace {

int default_threads() {
  if (const char* env = std::getenv("RESMET_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

// Columns not in the fixed set become features; a column is numeric when
// every non-empty cell parses as a number.
FeatureSpec infer_feature_spec(const std::string& path, Discipline discipline) {
  csv::Table raw = csv::read_file(path);
  const bool injury = discipline == Discipline::injury_spell;
  FeatureSpec spec;
  for (std::size_t j = 0; j < raw.header.size(); ++j) {
    const std::string& name = raw.header[j];
    bool fixed = injury ? (name == "time" || name == "event" ||
                           name == "actor_id" || name == "date")
                        : detail::is_fixed_shot_column(name);
    if (fixed) continue;
    bool numeric = true;
    for (const auto& row : raw.rows) {
      const std::string& cell = row[j];
      if (cell.empty() || cell == "NA" || cell == "nan") continue;
      try {
        csv::parse_double(cell, name);
      } catch (const DataError&) {
        numeric = false;
        break;
      }
    }
    spec.columns.push_back(
        {name, numeric ? ColumnKind::numeric : ColumnKind::categorical});
  }
  return spec;
}

EventTable filter_on_target(const EventTable& t) {
  EventTable out;
  out.discipline = Discipline::shot_on_target;
  out.schema = t.schema;
  for (const auto& c : t.schema) {
    if (c.kind == ColumnKind::categorical)
      out.cat_cols[c.name] = {};
    else
      out.numeric_cols[c.name] = {};
  }
  for (std::size_t i = 0; i < t.n(); ++i) {
    if (t.on_target[i] != 1) continue;
    out.outcome.push_back(t.outcome[i]);
    out.actor_id.push_back(t.actor_id[i]);
    out.date.push_back(t.date[i]);
    out.team_for.push_back(t.team_for[i]);
    out.team_against.push_back(t.team_against[i]);
    out.on_target.push_back(1);
    for (const auto& c : t.schema) {
      if (c.kind == ColumnKind::categorical)
        out.cat_cols[c.name].push_back(t.categorical(c.name)[i]);
      else
        out.numeric_cols[c.name].push_back(t.numeric(c.name)[i]);
    }
  }
  if (out.n() == 0) throw DataError("no on-target rows in table");
  return out;
}

FittedModel train_outcome_model(const EventTable& table,
                                const std::string& family, int folds,
                                std::uint64_t seed) {
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      table.outcome.data(), static_cast<Eigen::Index>(table.n()));
  FittedModel m;
  if (family == "logistic") {
    m.encoder = Encoder::fit(table, /*drop_first_level=*/true);
    Eigen::MatrixXd z = m.encoder.transform(table);
    m.regressor = fit_logistic(z, y, {}, m.encoder.feature_names());
  } else if (family == "gbt") {
    m.encoder = Encoder::fit(table);
    Eigen::MatrixXd z = m.encoder.transform(table);
    GbtGrid grid;
    if (folds > 1) grid.cv_folds = folds;
    m.regressor = fit_gbt(z, y, grid, BoostLoss::logistic, seed);
  } else if (family == "forest") {
    m.encoder = Encoder::fit(table);
    Eigen::MatrixXd z = m.encoder.transform(table);
    m.regressor = fit_forest(z, y, ForestGrid{}, /*probability=*/true, seed);
  } else {
    throw CLI::ValidationError("--family", "unknown family: " + family);
  }
  return m;
}

void write_manifest(const fs::path& dir, RunManifest manifest) {
  fs::path p = dir / "manifest.json";
  manifest.output_paths.push_back(p.string());
  write_text_file(p.string(), manifest.to_json().dump(2) + "\n");
}

RunManifest make_manifest(const std::string& command, int argc, char** argv,
                          std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  for (int i = 1; i < argc; ++i) m.arguments.emplace_back(argv[i]);
  m.seed = seed;
  return m;
}

RegressionChoice choice_from_string(const std::string& s) {
  if (s == "oracle") return RegressionChoice::oracle;
  if (s == "constant") return RegressionChoice::constant;
  if (s == "forest") return RegressionChoice::forest_oob;
  if (s == "logistic") return RegressionChoice::logistic_fit;
  throw DataError("unknown regression choice: " + s);
}

struct Options {
  std::string events, matches, out, model_file, pvalues;
  std::string discipline = "shot";
  std::string family = "gbt";
  std::string metric = "gax";
  std::string propensity = "forest";
  std::string adjust = "none";
  std::string sided = "two-sided";
  std::string method = "holm";
  std::string asof;
  std::string outcome_choice = "oracle", propensity_choice = "oracle";
  double level = 0.95, rho0 = 0.0, alpha = 0.05;
  double beta = 0.0, beta_x = 0.0, censoring = 0.3;
  double period = 500.0;
  double home_advantage = 0.3, covariance_rate = 0.1, intercept = 0.1,
         spread = 0.2;
  int min_units = 20, min_positive = 1;
  int folds = 0, n = 2000, replications = 500, teams = 6, n_matches = 200;
  int trees = 100, forest_depth = 3;
  int threads = default_threads();
  std::uint64_t seed = 1;
  bool train = false;
};

int cmd_train_outcome(const Options& o, int argc, char** argv) {
  Discipline disc = discipline_from_string(o.discipline);
  FeatureSpec spec = infer_feature_spec(o.events, disc);
  EventTable table = parse_event_table(o.events, spec, disc);
  FittedModel model = train_outcome_model(table, o.family, o.folds, o.seed);
  save_model(o.out, model);

  nlohmann::json j = model.regressor->to_json();
  std::cout << "trained " << j["family"].get<std::string>() << " model on "
            << table.n() << " rows, " << model.encoder.dim() << " features\n";
  for (const char* key : {"learning_rate", "max_depth", "n_trees", "cv_loss",
                          "mtry", "oob_loss"})
    if (j.contains(key)) std::cout << "  " << key << ": " << j[key] << "\n";

  RunManifest manifest = make_manifest("train-outcome", argc, argv, o.seed);
  manifest.input_digests.emplace_back(o.events, file_digest(o.events));
  manifest.output_paths.push_back(o.out);
  write_text_file(o.out + ".manifest.json", manifest.to_json().dump(2) + "\n");
  return 0;
}

int cmd_evaluate(const Options& o, int argc, char** argv) {
  Discipline disc = discipline_from_string(o.discipline);
  FeatureSpec spec = infer_feature_spec(o.events, disc);
  EventTable table = parse_event_table(o.events, spec, disc);

  MetricConfig cfg;
  cfg.metric = metric_from_string(o.metric);
  cfg.propensity = propensity_from_string(o.propensity);
  cfg.interval.level = o.level;
  cfg.interval.sidedness = sidedness_from_string(o.sided);
  cfg.interval.rho0 = o.rho0;
  cfg.adjust = adjustment_from_string(o.adjust);
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.forest_grid.n_trees = o.trees;
  cfg.forest_grid.max_depths = {o.forest_depth};

  if (cfg.metric == Metric::gsax && disc == Discipline::shot)
    table = filter_on_target(table);

  std::set<std::string> cohort = filter_cohort(
      table, static_cast<std::size_t>(o.min_units),
      static_cast<std::size_t>(o.min_positive));
  if (cohort.empty()) throw DataError("cohort filter left no actors");

  EvaluationReport report;
  if (cfg.metric == Metric::iax) {
    report = evaluate_iax(table, cohort, cfg);
  } else {
    Eigen::VectorXd h_hat;
    if (!o.model_file.empty()) {
      FittedModel model = load_model(o.model_file);
      h_hat = model.predict(table);
    } else {
      FittedModel model =
          train_outcome_model(table, o.family, o.folds,
                              derive_seed(o.seed, "outcome-model"));
      h_hat = model.regressor->supports_oob()
                  ? model.regressor->oob_predictions()
                  : model.regressor->predict(model.encoder.transform(table));
    }
    report = evaluate_all(table, cohort, h_hat, cfg);
  }

  fs::create_directories(o.out);
  fs::path dir(o.out);
  write_text_file((dir / "report.json").string(),
                  report_to_json(report).dump(2) + "\n");
  csv::write_file((dir / "report.csv").string(), report_to_csv(report));
  csv::Table scatter = scatter_plot_data(report);
  csv::Table intervals = interval_plot_data(report);
  csv::write_file((dir / "scatter.csv").string(), scatter);
  csv::write_file((dir / "intervals.csv").string(), intervals);
  write_text_file((dir / "scatter.svg").string(), svg_scatter(scatter));
  write_text_file((dir / "intervals.svg").string(), svg_intervals(intervals));

  RunManifest manifest = make_manifest("evaluate", argc, argv, o.seed);
  manifest.input_digests.emplace_back(o.events, file_digest(o.events));
  if (!o.model_file.empty())
    manifest.input_digests.emplace_back(o.model_file, file_digest(o.model_file));
  for (const char* f : {"report.json", "report.csv", "scatter.csv",
                        "intervals.csv", "scatter.svg", "intervals.svg"})
    manifest.output_paths.push_back((dir / f).string());
  write_manifest(dir, std::move(manifest));

  std::cout << "evaluated " << report.actors.size() << " actors ("
            << report.failures.size() << " failures), Pearson R = "
            << report.pearson_r << "\n";
  return 0;
}

int cmd_team_strength(const Options& o, int argc, char** argv) {
  MatchTable matches = parse_match_table(o.matches);
  TeamStrengthConfig cfg;
  cfg.period_days = o.period;
  TeamStrengths s = fit_team_strengths(matches, o.asof, cfg);

  fs::create_directories(o.out);
  fs::path dir(o.out);
  write_strengths_csv((dir / "strengths.csv").string(), s);
  write_text_file((dir / "strengths.json").string(), s.to_json().dump(2) + "\n");

  RunManifest manifest = make_manifest("team-strength", argc, argv, 0);
  manifest.input_digests.emplace_back(o.matches, file_digest(o.matches));
  manifest.output_paths.push_back((dir / "strengths.csv").string());
  manifest.output_paths.push_back((dir / "strengths.json").string());
  write_manifest(dir, std::move(manifest));

  std::cout << "fitted " << s.att.size() << " teams, home advantage "
            << s.home_advantage << ", log-likelihood " << s.log_likelihood
            << "\n";
  return 0;
}

int cmd_simulate_pllm(const Options& o, int argc, char** argv) {
  PllmSimConfig cfg;
  cfg.n = o.n;
  cfg.beta = o.beta;
  cfg.seed = o.seed;
  EventTable t = pllm_to_event_table(simulate_pllm(cfg));
  write_event_table(o.out, t);
  RunManifest manifest = make_manifest("simulate pllm", argc, argv, o.seed);
  manifest.output_paths.push_back(o.out);
  write_text_file(o.out + ".manifest.json", manifest.to_json().dump(2) + "\n");
  std::cout << "wrote " << t.n() << " rows to " << o.out << "\n";
  return 0;
}

int cmd_simulate_league(const Options& o, int argc, char** argv) {
  if (o.teams < 2) throw DataError("need at least two teams");
  TeamStrengths truth;
  truth.intercept = o.intercept;
  truth.home_advantage = o.home_advantage;
  truth.covariance_rate = o.covariance_rate;
  double mid = (o.teams - 1) / 2.0;
  for (int i = 0; i < o.teams; ++i) {
    std::string name = "T" + std::to_string(i + 1);
    truth.att[name] = o.spread * (i - mid);
    truth.def[name] = o.spread * (mid - i);
  }
  MatchTable m = simulate_league(truth, o.n_matches, o.seed);
  csv::Table out;
  out.header = {"date", "home_team", "away_team", "home_goals", "away_goals"};
  for (std::size_t i = 0; i < m.n(); ++i)
    out.rows.push_back({m.date[i], m.home_team[i], m.away_team[i],
                        std::to_string(m.home_goals[i]),
                        std::to_string(m.away_goals[i])});
  csv::write_file(o.out, out);
  RunManifest manifest = make_manifest("simulate league", argc, argv, o.seed);
  manifest.output_paths.push_back(o.out);
  write_text_file(o.out + ".manifest.json", manifest.to_json().dump(2) + "\n");
  std::cout << "wrote " << m.n() << " matches to " << o.out << "\n";
  return 0;
}

int cmd_simulate_cox(const Options& o, int argc, char** argv) {
  CoxSimConfig cfg;
  cfg.n = o.n;
  cfg.x_coefficient = o.beta_x;
  cfg.censoring_rate = o.censoring;
  cfg.seed = o.seed;
  SurvivalTable s = simulate_cox(cfg);
  csv::Table out;
  out.header = {"time", "event", "actor_id"};
  for (const auto& name : s.feature_names) out.header.push_back(name);
  for (std::size_t i = 0; i < s.n(); ++i) {
    std::vector<std::string> row = {csv::format_double(s.time[i]),
                                    std::to_string(s.event[i]), s.actor_id[i]};
    for (Eigen::Index j = 0; j < s.features.cols(); ++j)
      row.push_back(csv::format_double(s.features(static_cast<Eigen::Index>(i), j)));
    out.rows.push_back(std::move(row));
  }
  csv::write_file(o.out, out);
  RunManifest manifest = make_manifest("simulate cox", argc, argv, o.seed);
  manifest.output_paths.push_back(o.out);
  write_text_file(o.out + ".manifest.json", manifest.to_json().dump(2) + "\n");
  std::cout << "wrote " << s.n() << " spells to " << o.out << "\n";
  return 0;
}

int cmd_simulate_calibrate(const Options& o, int argc, char** argv) {
  CalibrationConfig cfg;
  cfg.sim.n = o.n;
  cfg.sim.beta = o.beta;
  cfg.sim.seed = o.seed;
  cfg.outcome = choice_from_string(o.outcome_choice);
  cfg.propensity = choice_from_string(o.propensity_choice);
  cfg.replications = o.replications;
  cfg.alpha = o.alpha;
  cfg.threads = o.threads;
  cfg.forest.n_trees = o.trees;
  cfg.forest.max_depths = {o.forest_depth};
  cfg.forest.mtry = {std::max(1, cfg.sim.d_z / 2 + 1)};
  CalibrationResult r = run_calibration(cfg);

  csv::Table out;
  out.header = {"beta",       "n",           "replications", "failures",
                "outcome",    "propensity",  "alpha",        "rejection_rate",
                "one_sided_power", "mean_estimate", "sign_agreement",
                "statistic_variance"};
  out.rows.push_back(
      {csv::format_double(o.beta), std::to_string(o.n),
       std::to_string(r.replications), std::to_string(r.failures),
       to_string(cfg.outcome), to_string(cfg.propensity),
       csv::format_double(o.alpha), csv::format_double(r.rejection_rate),
       csv::format_double(r.one_sided_power),
       csv::format_double(r.mean_estimate),
       csv::format_double(r.sign_agreement),
       csv::format_double(r.statistic_variance)});
  csv::write_file(o.out, out);
  RunManifest manifest = make_manifest("simulate calibrate", argc, argv, o.seed);
  manifest.output_paths.push_back(o.out);
  write_text_file(o.out + ".manifest.json", manifest.to_json().dump(2) + "\n");
  std::cout << "rejection rate " << r.rejection_rate << " over "
            << r.replications << " replications (" << r.failures
            << " failures)\n";
  return 0;
}

int cmd_adjust(const Options& o, int argc, char** argv) {
  csv::Table in = csv::read_file(o.pvalues);
  int col = in.column("p");
  if (col < 0 && in.header.size() == 1) col = 0;
  if (col < 0) throw DataError("p-value file needs a 'p' column");
  std::vector<double> p;
  for (const auto& row : in.rows)
    p.push_back(csv::parse_double(row[static_cast<std::size_t>(col)], "p"));
  std::vector<double> adj = adjust_pvalues(p, adjustment_from_string(o.method));

  csv::Table out;
  out.header = {"p", "p_adjusted"};
  for (std::size_t i = 0; i < p.size(); ++i)
    out.rows.push_back({csv::format_double(p[i]), csv::format_double(adj[i])});
  if (o.out.empty()) {
    for (std::size_t i = 0; i < p.size(); ++i)
      std::cout << out.rows[i][0] << "," << out.rows[i][1] << "\n";
  } else {
    csv::write_file(o.out, out);
    RunManifest manifest = make_manifest("adjust", argc, argv, 0);
    manifest.input_digests.emplace_back(o.pvalues, file_digest(o.pvalues));
    manifest.output_paths.push_back(o.out);
    write_text_file(o.out + ".manifest.json",
                    manifest.to_json().dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"residualized player evaluation toolkit"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train-outcome", "fit an outcome model");
  train->add_option("--events", o.events, "event CSV")->required();
  train->add_option("--discipline", o.discipline,
                    "shot|shot-on-target|basketball-shot|pass|injury-spell");
  train->add_option("--family", o.family, "gbt|logistic|forest");
  train->add_option("--folds", o.folds, "CV folds for gbt");
  train->add_option("--seed", o.seed, "RNG seed");
  train->add_option("--out", o.out, "model file")->required();

  auto* eval = app.add_subcommand("evaluate", "per-actor metric report");
  eval->add_option("--events", o.events, "event CSV")->required();
  eval->add_option("--discipline", o.discipline, "event discipline");
  eval->add_option("--metric", o.metric, "gax|gsax|qsi|cpae|iax");
  eval->add_option("--outcome-model", o.model_file, "trained model file");
  eval->add_flag("--train", o.train, "train the outcome model in-run");
  eval->add_option("--family", o.family, "family for --train");
  eval->add_option("--folds", o.folds, "CV folds for --train gbt");
  eval->add_option("--propensity", o.propensity,
                   "forest|gbt|logistic|constant|zero");
  eval->add_option("--min-units", o.min_units, "cohort minimum units");
  eval->add_option("--min-positive", o.min_positive,
                   "cohort minimum positive outcomes");
  eval->add_option("--adjust", o.adjust, "holm|bh|by|none");
  eval->add_option("--level", o.level, "interval level");
  eval->add_option("--sided", o.sided, "two-sided|lower|upper");
  eval->add_option("--rho0", o.rho0, "non-nil threshold");
  eval->add_option("--trees", o.trees, "propensity forest size");
  eval->add_option("--forest-depth", o.forest_depth, "propensity tree depth");
  eval->add_option("--seed", o.seed, "RNG seed");
  eval->add_option("--threads", o.threads, "worker threads");
  eval->add_option("--out", o.out, "output directory")->required();

  auto* strength = app.add_subcommand("team-strength", "fit team ratings");
  strength->add_option("--matches", o.matches, "match CSV")->required();
  strength->add_option("--period", o.period, "half-life in days");
  strength->add_option("--asof", o.asof, "reference date YYYY-MM-DD");
  strength->add_option("--out", o.out, "output directory")->required();

  auto* sim = app.add_subcommand("simulate", "synthetic data and studies");
  sim->require_subcommand(1);
  auto* pllm = sim->add_subcommand("pllm", "partially linear logistic draw");
  pllm->add_option("--n", o.n, "rows");
  pllm->add_option("--beta", o.beta, "actor effect");
  pllm->add_option("--seed", o.seed, "RNG seed");
  pllm->add_option("--out", o.out, "output CSV")->required();
  auto* league = sim->add_subcommand("league", "bivariate Poisson fixtures");
  league->add_option("--teams", o.teams, "team count");
  league->add_option("--matches", o.n_matches, "match count");
  league->add_option("--spread", o.spread, "rating spread");
  league->add_option("--home-advantage", o.home_advantage, "home bonus");
  league->add_option("--covariance-rate", o.covariance_rate, "shared rate");
  league->add_option("--intercept", o.intercept, "log-rate intercept");
  league->add_option("--seed", o.seed, "RNG seed");
  league->add_option("--out", o.out, "output CSV")->required();
  auto* cox = sim->add_subcommand("cox", "proportional-hazards spells");
  cox->add_option("--n", o.n, "rows");
  cox->add_option("--beta-x", o.beta_x, "actor effect on the log rate");
  cox->add_option("--censoring", o.censoring, "marginal censoring fraction");
  cox->add_option("--seed", o.seed, "RNG seed");
  cox->add_option("--out", o.out, "output CSV")->required();
  auto* calibrate = sim->add_subcommand("calibrate", "Monte-Carlo test study");
  calibrate->add_option("--n", o.n, "rows per replication");
  calibrate->add_option("--beta", o.beta, "actor effect");
  calibrate->add_option("--replications", o.replications, "replication count");
  calibrate->add_option("--alpha", o.alpha, "test level");
  calibrate->add_option("--outcome", o.outcome_choice,
                        "oracle|constant|forest|logistic");
  calibrate->add_option("--propensity", o.propensity_choice,
                        "oracle|constant|forest|logistic");
  calibrate->add_option("--trees", o.trees, "forest size");
  calibrate->add_option("--forest-depth", o.forest_depth, "forest tree depth");
  calibrate->add_option("--seed", o.seed, "RNG seed");
  calibrate->add_option("--threads", o.threads, "worker threads");
  calibrate->add_option("--out", o.out, "output CSV")->required();

  auto* adjust = app.add_subcommand("adjust", "multiple-testing adjustment");
  adjust->add_option("--pvalues", o.pvalues, "CSV with a 'p' column")
      ->required();
  adjust->add_option("--method", o.method, "holm|bh|by|none");
  adjust->add_option("--out", o.out, "output CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train_outcome(o, argc, argv);
    if (eval->parsed()) return cmd_evaluate(o, argc, argv);
    if (strength->parsed()) return cmd_team_strength(o, argc, argv);
    if (sim->parsed()) {
      if (pllm->parsed()) return cmd_simulate_pllm(o, argc, argv);
      if (league->parsed()) return cmd_simulate_league(o, argc, argv);
      if (cox->parsed()) return cmd_simulate_cox(o, argc, argv);
      if (calibrate->parsed()) return cmd_simulate_calibrate(o, argc, argv);
    }
    if (adjust->parsed()) return cmd_adjust(o, argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
