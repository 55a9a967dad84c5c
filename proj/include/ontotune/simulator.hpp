#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontotune/checkpoint.hpp"
#include "ontotune/common.hpp"
#include "ontotune/feature_embed.hpp"
#include "ontotune/kg_store.hpp"
#include "ontotune/plan_model.hpp"
#include "ontotune/policy.hpp"
#include "ontotune/regressor.hpp"
#include "ontotune/rng.hpp"
#include "ontotune/scaler.hpp"
#include "ontotune/sql_features.hpp"
#include "ontotune/sql_parser.hpp"
#include "ontotune/trace.hpp"

namespace ontotune {

struct RunConfig {
  std::size_t batch_size = 20;
  std::size_t num_batches = 5;
  std::uint64_t seed = 42;
  bool shuffle_queries = true;
  bool baseline_only = false;
  std::string cold_start = "est_best";  // est_best | default
  std::size_t c_max = 32;
  double noise_std = 0.0;  // optional multiplicative runtime noise, off by default

  // regressor
  std::size_t epochs = 150;
  std::size_t train_batch_size = 8;
  double learning_rate = 1e-2;

  // policy
  double beta = 0.1;
  int k_top = 3;
  int n_min_initial = 0;
  int n_min_after_retrain = 1;
  double eps0 = 0.5;
  double eps_min = 0.01;
  double ban_multiplier = 3.0;
  int ban_min_samples = 3;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (num_batches < 1) throw ConfigError("num_batches must be at least 1");
    if (c_max < 1) throw ConfigError("c_max must be at least 1");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (train_batch_size < 1) throw ConfigError("train_batch_size must be at least 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be nonnegative");
    if (cold_start != "est_best" && cold_start != "default")
      throw ConfigError("cold_start must be est_best or default");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be nonnegative");
    if (!(ban_multiplier >= 1.0)) throw ConfigError("ban_multiplier must be at least 1");
    if (ban_min_samples < 1) throw ConfigError("ban_min_samples must be at least 1");
    if (n_min_initial < 0 || n_min_after_retrain < 0) throw ConfigError("n_min must be nonnegative");
    if (!(beta >= 0.0)) throw ConfigError("beta must be nonnegative");
    if (k_top < 1) throw ConfigError("k_top must be at least 1");
    if (!(eps0 >= 0.0 && eps0 <= 1.0)) throw ConfigError("eps0 must lie in [0,1]");
    if (!(eps_min >= 0.0 && eps_min <= 1.0)) throw ConfigError("eps_min must lie in [0,1]");
    if (eps_min > eps0) throw ConfigError("eps_min must not exceed eps0");
  }

  // Flat key-value config file: one `key = value` per line, # comments.
  static RunConfig from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto strip = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      if (strip(line).empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      cfg.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    auto as_u64 = [&] {
      try {
        return std::stoull(value);
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
      }
    };
    auto as_double = [&] {
      try {
        return std::stod(value);
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
      }
    };
    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw ConfigError("config key '" + key + "' expects true or false, got '" + value + "'");
    };
    if (key == "batch_size") batch_size = as_u64();
    else if (key == "num_batches") num_batches = as_u64();
    else if (key == "seed") seed = as_u64();
    else if (key == "shuffle_queries") shuffle_queries = as_bool();
    else if (key == "baseline_only") baseline_only = as_bool();
    else if (key == "cold_start") cold_start = value;
    else if (key == "c_max") c_max = as_u64();
    else if (key == "noise_std") noise_std = as_double();
    else if (key == "epochs") epochs = as_u64();
    else if (key == "train_batch_size") train_batch_size = as_u64();
    else if (key == "learning_rate") learning_rate = as_double();
    else if (key == "beta") beta = as_double();
    else if (key == "k_top") k_top = static_cast<int>(as_u64());
    else if (key == "n_min_initial") n_min_initial = static_cast<int>(as_u64());
    else if (key == "n_min_after_retrain") n_min_after_retrain = static_cast<int>(as_u64());
    else if (key == "eps0") eps0 = as_double();
    else if (key == "eps_min") eps_min = as_double();
    else if (key == "ban_multiplier") ban_multiplier = as_double();
    else if (key == "ban_min_samples") ban_min_samples = static_cast<int>(as_u64());
    else throw ConfigError("unknown config key '" + key + "'");
  }

  std::string to_text() const {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    kv("ban_min_samples", std::to_string(ban_min_samples));
    kv("ban_multiplier", format_double(ban_multiplier));
    kv("baseline_only", baseline_only ? "true" : "false");
    kv("batch_size", std::to_string(batch_size));
    kv("beta", format_double(beta));
    kv("c_max", std::to_string(c_max));
    kv("cold_start", cold_start);
    kv("epochs", std::to_string(epochs));
    kv("eps0", format_double(eps0));
    kv("eps_min", format_double(eps_min));
    kv("k_top", std::to_string(k_top));
    kv("learning_rate", format_double(learning_rate));
    kv("n_min_after_retrain", std::to_string(n_min_after_retrain));
    kv("n_min_initial", std::to_string(n_min_initial));
    kv("noise_std", format_double(noise_std));
    kv("num_batches", std::to_string(num_batches));
    kv("seed", std::to_string(seed));
    kv("shuffle_queries", shuffle_queries ? "true" : "false");
    kv("train_batch_size", std::to_string(train_batch_size));
    return out;
  }
};

struct RunReport {
  std::size_t query_count = 0;
  bool single_series = false;  // baseline-only runs have no learned series
  std::vector<double> baseline_cumulative;
  std::vector<double> learned_cumulative;
  double baseline_total = 0.0;
  double learned_total = 0.0;
  double oracle_total = 0.0;  // per-query best arm over the executed sequence
  std::vector<std::vector<double>> loss_traces;
  std::uint64_t clamp_count = 0;
  std::uint64_t exploration_count = 0;
  std::uint64_t fallback_count = 0;
  std::uint64_t ban_count = 0;
  std::vector<DecisionRecord> decisions;
  std::optional<Checkpoint> checkpoint;
};

namespace detail {

struct PreparedEntry {
  ParsedQuery pq;
  ColumnUniverse universe;
  FeatureMatrix features;  // padded to (R, c_max), built from the arm-0 plan
  std::vector<std::string> fingerprints;  // per arm
};

inline std::string exec_id_for(std::uint64_t query_index) {
  std::string n = std::to_string(query_index);
  return "e" + std::string(n.size() < 6 ? 6 - n.size() : 0, '0') + n;
}

}  // namespace detail

/// The batched online loop over a trace: cold start by the trace's
/// optimizer-estimated-best arm, then retrain-and-select between batches.
/// Populates `store` with the full provenance of the run.
inline RunReport run_online(const TraceBundle& trace, const RunConfig& cfg, KgStore& store) {
  cfg.validate();
  if (trace.entries.empty()) throw TraceError("trace has no entries");
  if (cfg.batch_size > trace.entries.size())
    throw ConfigError("batch_size exceeds the trace size");
  if (trace.entries.size() % cfg.batch_size != 0)
    throw ConfigError("batch_size must divide the trace size so batches align to whole passes");

  const int K = trace.arm_count;
  const std::size_t total_queries = cfg.batch_size * cfg.num_batches;

  // Provenance scaffolding: arms, environment, queries, plans.
  for (const auto& arm : trace.arms) store.put(arm);
  EnvironmentSnapshot env;
  env.env_id = "sim";
  env.dataset_tag = trace.name;
  env.hardware_tag = "trace-replay";
  env.settings["noise_std"] = format_double(cfg.noise_std);
  store.put(env);

  std::vector<detail::PreparedEntry> prepared;
  prepared.reserve(trace.entries.size());
  for (const auto& e : trace.entries) {
    detail::PreparedEntry p;
    p.pq = parse_sql_subset(e.sql_text);
    p.universe = build_column_universe(p.pq);

    QueryRecord q;
    q.query_id = e.query_id;
    q.sql_text = e.sql_text;
    q.template_id = e.template_id;
    q.referenced_tables = p.pq.table_list();
    q.referenced_columns = p.pq.column_list();
    store.put(q);

    PlanTree feature_plan;
    for (int a = 0; a < K; ++a) {
      PlanTree plan = ingest_plan(e.plan_docs[static_cast<std::size_t>(a)], q.referenced_columns,
                                  e.query_id + "/arm" + std::to_string(a));
      plan.query_id = e.query_id;
      p.fingerprints.push_back(plan.fingerprint);
      if (a == 0) feature_plan = plan;
      store.put(plan);
    }
    TemplateFeatures tf = extract_template_features(p.pq, &feature_plan);
    FeatureMatrix m = assemble_matrix(tf, p.pq, &feature_plan, p.universe, trace.catalog,
                                      e.template_id);
    p.features = pad_to_shape(m, cfg.c_max);
    prepared.push_back(std::move(p));
  }

  // Query sequence: whole shuffled passes over the trace, truncated to the
  // configured run length.
  Rng seq_rng(mix_seed(cfg.seed, 0x736571));
  std::vector<std::size_t> sequence;
  while (sequence.size() < total_queries) {
    std::vector<std::size_t> pass(trace.entries.size());
    std::iota(pass.begin(), pass.end(), 0);
    if (cfg.shuffle_queries) seq_rng.shuffle(pass);
    sequence.insert(sequence.end(), pass.begin(), pass.end());
  }
  sequence.resize(total_queries);

  Rng sel_rng(mix_seed(cfg.seed, 0x73656c));
  Rng noise_rng(mix_seed(cfg.seed, 0x6e6f69));

  RunReport report;
  report.query_count = total_queries;
  report.single_series = cfg.baseline_only;

  ModelShape shape;
  shape.rows = registry_rows();
  shape.cols = cfg.c_max;
  shape.arms = static_cast<std::size_t>(K);

  std::optional<LogMinMaxScaler> scaler;
  std::optional<RewardModel> model;
  ContextStats stats;
  std::vector<double> observed_runtimes;
  struct Executed {
    std::size_t entry;
    int arm;
    double runtime;
  };
  std::vector<Executed> history;

  double baseline_cum = 0.0;
  double learned_cum = 0.0;

  for (std::size_t batch = 0; batch < cfg.num_batches; ++batch) {
    std::map<std::string, std::vector<double>> batch_runtimes_by_template;

    for (std::size_t pos = 0; pos < cfg.batch_size; ++pos) {
      const std::uint64_t query_index = batch * cfg.batch_size + pos;
      const std::size_t entry_idx = sequence[query_index];
      const TraceEntry& entry = trace.entries[entry_idx];
      const detail::PreparedEntry& prep = prepared[entry_idx];

      DecisionRecord dec;
      dec.query_index = query_index;
      dec.query_id = entry.query_id;
      dec.template_id = entry.template_id;
      dec.batch_index = static_cast<int>(batch);

      if (cfg.baseline_only) {
        dec.mode = "baseline";
        dec.chosen = 0;
        dec.candidates = {0};
      } else if (batch == 0 || !model) {
        // cold start never consults the regressor
        dec.mode = "cold_start";
        dec.chosen = cfg.cold_start == "est_best" ? entry.est_best_arm : 0;
        dec.candidates = {dec.chosen};
      } else {
        dec.mode = "policy";
        PolicyConfig pcfg;
        pcfg.beta = cfg.beta;
        pcfg.k_top = std::min(cfg.k_top, K);
        pcfg.n_min = cfg.n_min_after_retrain;
        pcfg.eps0 = cfg.eps0;
        pcfg.eps_min = cfg.eps_min;
        pcfg.seed = cfg.seed;
        pcfg.validate(K);

        std::vector<double> y_tilde(static_cast<std::size_t>(K));
        std::vector<double> rewards(static_cast<std::size_t>(K));
        for (int a = 0; a < K; ++a) {
          auto [c_hat, y] = model->recover_cost(prep.features, a, *scaler);
          rewards[static_cast<std::size_t>(a)] = 1.0 - c_hat;
          y_tilde[static_cast<std::size_t>(a)] = y;
        }
        dec.y_tilde = y_tilde;
        dec.scores = score_arms(y_tilde, stats, entry.template_id, pcfg);
        bool fallback = false;
        dec.candidates = candidate_set(dec.scores, stats, entry.template_id, pcfg, &fallback);
        if (fallback) ++report.fallback_count;
        dec.epsilon = exploration_rate(stats, entry.template_id, pcfg);
        Selection sel = select_arm(dec.candidates, dec.scores, dec.epsilon, sel_rng);
        dec.chosen = sel.arm;
        dec.draw = sel.draw;
        dec.explored = sel.explored;
        dec.explore_rank = sel.explore_rank;
        dec.predicted_reward = rewards[static_cast<std::size_t>(sel.arm)];
        if (sel.explored) ++report.exploration_count;
        auto bans = stats.banned(entry.template_id);
        dec.banned.assign(bans.begin(), bans.end());
        for (int a = 0; a < K; ++a)
          dec.counts.push_back(stats.count(entry.template_id, a));
      }

      double runtime = entry.runtimes_ms[static_cast<std::size_t>(dec.chosen)];
      if (cfg.noise_std > 0.0)
        runtime = std::max(1e-6, runtime * (1.0 + cfg.noise_std * noise_rng.normal()));

      learned_cum += runtime;
      baseline_cum += entry.runtimes_ms[0];
      report.learned_cumulative.push_back(learned_cum);
      report.baseline_cumulative.push_back(baseline_cum);
      report.oracle_total += *std::min_element(entry.runtimes_ms.begin(), entry.runtimes_ms.end());

      ExecutionRecord exec;
      exec.exec_id = detail::exec_id_for(query_index);
      exec.query_id = entry.query_id;
      exec.arm_id = dec.chosen;
      exec.plan_fingerprint = prep.fingerprints[static_cast<std::size_t>(dec.chosen)];
      exec.env_id = env.env_id;
      exec.batch_index = static_cast<int>(batch);
      exec.runtime_ms = runtime;
      exec.predicted_reward = dec.predicted_reward;
      if (scaler) exec.realized_reward = complement(scaler->phi(runtime));
      store.put(exec);

      stats.record_execution(entry.template_id, dec.chosen, runtime);
      observed_runtimes.push_back(runtime);
      history.push_back({entry_idx, dec.chosen, runtime});
      batch_runtimes_by_template[entry.template_id].push_back(runtime);
      report.decisions.push_back(std::move(dec));
    }

    if (cfg.baseline_only) continue;

    // Retrain boundary: refit the scaler on everything observed, rebuild the
    // reward targets, train from scratch, refresh the context statistics.
    if (scaler) report.clamp_count += scaler->clamp_count();
    scaler = LogMinMaxScaler::fit(observed_runtimes);

    std::vector<TrainingSample> data;
    data.reserve(history.size());
    for (const auto& h : history)
      data.push_back({prepared[h.entry].features, h.arm, complement(scaler->phi(h.runtime))});

    RewardModel fresh = RewardModel::init(shape, mix_seed(cfg.seed, 1000 + batch));
    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.batch_size = cfg.train_batch_size;
    opts.learning_rate = cfg.learning_rate;
    opts.seed = mix_seed(cfg.seed, 2000 + batch);
    auto trained = train_model(fresh, data, opts);
    model = std::move(trained.model);
    report.loss_traces.push_back(std::move(trained.loss_trace));

    std::map<std::string, std::vector<double>> scaled;
    for (const auto& [tau, runtimes] : batch_runtimes_by_template) {
      auto& v = scaled[tau];
      for (double r : runtimes) v.push_back(scaler->phi(r));
    }
    stats.finish_batch(scaled, cfg.ban_multiplier, cfg.ban_min_samples);
  }

  report.baseline_total = baseline_cum;
  report.learned_total = learned_cum;
  report.ban_count = stats.total_banned();
  if (scaler) {
    report.clamp_count += scaler->clamp_count();
    if (model) {
      Checkpoint cp;
      cp.model = *model;
      cp.scaler = *scaler;
      cp.run_seed = cfg.seed;
      report.checkpoint = cp;
    }
  }
  return report;
}

/// Curve table: one row per executed query, cumulative simulated time per
/// series, tab-separated. Byte-deterministic for a given report.
inline std::string report_table(const RunReport& report) {
  std::string out;
  if (report.single_series) {
    out += "query_index\tbaseline_cum_ms\n";
    for (std::size_t i = 0; i < report.baseline_cumulative.size(); ++i)
      out += std::to_string(i + 1) + "\t" + format_double(report.baseline_cumulative[i]) + "\n";
  } else {
    out += "query_index\tbaseline_cum_ms\tlearned_cum_ms\n";
    for (std::size_t i = 0; i < report.learned_cumulative.size(); ++i)
      out += std::to_string(i + 1) + "\t" + format_double(report.baseline_cumulative[i]) + "\t" +
             format_double(report.learned_cumulative[i]) + "\n";
  }
  return out;
}

inline nlohmann::json report_summary(const RunReport& report, const RunConfig& cfg) {
  nlohmann::json doc;
  doc["queries"] = report.query_count;
  doc["batches"] = cfg.num_batches;
  doc["batch_size"] = cfg.batch_size;
  doc["seed"] = cfg.seed;
  doc["baseline_total_ms"] = report.baseline_total;
  if (!report.single_series) {
    doc["learned_total_ms"] = report.learned_total;
    doc["oracle_total_ms"] = report.oracle_total;
    doc["regret_ms"] = report.learned_total - report.oracle_total;
  }
  doc["counters"] = {{"clamped_scalings", report.clamp_count},
                     {"explorations", report.exploration_count},
                     {"candidate_fallbacks", report.fallback_count},
                     {"banned_arms", report.ban_count}};
  return doc;
}

/// Rebuilds the curve series from execution records alone (timestamp order),
/// which must reproduce the run's table byte-for-byte.
inline RunReport series_from_stores(const KgStore& learned, const KgStore* baseline) {
  RunReport report;
  report.single_series = baseline == nullptr;
  double cum = 0.0;
  for (const auto& x : learned.executions()) {
    cum += x.runtime_ms;
    report.learned_cumulative.push_back(cum);
  }
  report.learned_total = cum;
  report.query_count = report.learned_cumulative.size();
  if (baseline) {
    double bcum = 0.0;
    for (const auto& x : baseline->executions()) {
      if (x.arm_id != 0)
        throw ValidationError("baseline store contains a non-default arm execution");
      bcum += x.runtime_ms;
      report.baseline_cumulative.push_back(bcum);
    }
    report.baseline_total = bcum;
    if (report.baseline_cumulative.size() != report.learned_cumulative.size())
      throw ValidationError("stores record different query counts");
  } else {
    report.baseline_cumulative = report.learned_cumulative;
    report.baseline_total = report.learned_total;
  }
  return report;
}

}  // namespace ontotune
