#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontotune/common.hpp"
#include "ontotune/rng.hpp"

namespace ontotune {

struct PolicyConfig {
  double beta = 0.1;      // optimism bonus weight
  int k_top = 3;          // candidate pool size before filtering
  int n_min = 0;          // minimum per-(context, arm) sample count
  double eps0 = 0.5;      // exploration base rate
  double eps_min = 0.01;  // exploration floor
  std::uint64_t seed = 0;

  void validate(int arm_count) const {
    if (beta < 0.0) throw ConfigError("beta must be nonnegative");
    if (k_top < 1) throw ConfigError("k_top must be at least 1");
    if (k_top > arm_count) throw ConfigError("k_top exceeds the arm count");
    if (n_min < 0) throw ConfigError("n_min must be nonnegative");
    if (!(eps0 >= 0.0 && eps0 <= 1.0)) throw ConfigError("eps0 must lie in [0,1]");
    if (!(eps_min >= 0.0 && eps_min <= 1.0)) throw ConfigError("eps_min must lie in [0,1]");
    if (eps_min > eps0) throw ConfigError("eps_min must not exceed eps0");
  }
};

/// Per-context selection state: sample counts n, context frequency N, the
/// banned arm set B, and the normalized cost estimate estC of the last
/// completed batch.
class ContextStats {
public:
  struct ArmStats {
    long n = 0;
    double runtime_sum = 0.0;

    double mean_runtime() const { return n > 0 ? runtime_sum / static_cast<double>(n) : 0.0; }
  };

  long count(const std::string& tau, int arm) const {
    auto t = templates_.find(tau);
    if (t == templates_.end()) return 0;
    auto a = t->second.arms.find(arm);
    return a == t->second.arms.end() ? 0 : a->second.n;
  }

  long frequency(const std::string& tau) const {
    auto t = templates_.find(tau);
    return t == templates_.end() ? 0 : t->second.total;
  }

  std::set<int> banned(const std::string& tau) const {
    auto t = templates_.find(tau);
    return t == templates_.end() ? std::set<int>{} : t->second.banned;
  }

  double est_batch_cost(const std::string& tau) const {
    auto t = templates_.find(tau);
    return t == templates_.end() ? 0.0 : t->second.est_cost;
  }

  void record_execution(const std::string& tau, int arm, double runtime_ms) {
    auto& t = templates_[tau];
    t.total += 1;
    auto& a = t.arms[arm];
    a.n += 1;
    a.runtime_sum += runtime_ms;
  }

  /// Applies the end-of-batch updates: estC becomes the mean scaled cost of
  /// each context's queries in the batch (0 for contexts absent from it), and
  /// an arm joins the permanent ban set once it has >= min_samples runs with
  /// a mean runtime worse than multiplier times the best sampled arm's mean.
  void finish_batch(const std::map<std::string, std::vector<double>>& scaled_costs,
                    double ban_multiplier, int ban_min_samples) {
    for (auto& [tau, t] : templates_) {
      auto it = scaled_costs.find(tau);
      if (it == scaled_costs.end() || it->second.empty()) {
        t.est_cost = 0.0;
      } else {
        double sum = 0.0;
        for (double c : it->second) sum += c;
        t.est_cost = sum / static_cast<double>(it->second.size());
      }
      double best_mean = std::numeric_limits<double>::infinity();
      for (const auto& [arm, a] : t.arms)
        if (a.n >= ban_min_samples) best_mean = std::min(best_mean, a.mean_runtime());
      if (std::isfinite(best_mean)) {
        for (const auto& [arm, a] : t.arms)
          if (a.n >= ban_min_samples && a.mean_runtime() > ban_multiplier * best_mean)
            t.banned.insert(arm);
      }
    }
  }

  std::size_t total_banned() const {
    std::size_t count = 0;
    for (const auto& [tau, t] : templates_) count += t.banned.size();
    return count;
  }

private:
  struct TemplateStats {
    long total = 0;
    std::map<int, ArmStats> arms;
    std::set<int> banned;
    double est_cost = 0.0;
  };
  std::map<std::string, TemplateStats> templates_;
};

// s_a = y_tilde_a - beta / sqrt(max(1, n_a)); under-sampled arms get a bonus.
inline std::vector<double> score_arms(const std::vector<double>& y_tilde, const ContextStats& stats,
                                      const std::string& tau, const PolicyConfig& cfg) {
  std::vector<double> scores(y_tilde.size());
  for (std::size_t a = 0; a < y_tilde.size(); ++a) {
    double n = static_cast<double>(std::max<long>(1, stats.count(tau, static_cast<int>(a))));
    scores[a] = y_tilde[a] - cfg.beta / std::sqrt(n);
  }
  return scores;
}

/// Top-k_top arms by lowest score, minus the banned set, minus arms below the
/// minimum sample count. An emptied set falls back to arm 0 (the defaults);
/// `used_fallback` reports when that happened.
inline std::vector<int> candidate_set(const std::vector<double>& scores, const ContextStats& stats,
                                      const std::string& tau, const PolicyConfig& cfg,
                                      bool* used_fallback = nullptr) {
  if (used_fallback) *used_fallback = false;
  std::vector<int> order(scores.size());
  for (std::size_t a = 0; a < scores.size(); ++a) order[a] = static_cast<int>(a);
  std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    if (scores[static_cast<std::size_t>(lhs)] != scores[static_cast<std::size_t>(rhs)])
      return scores[static_cast<std::size_t>(lhs)] < scores[static_cast<std::size_t>(rhs)];
    return lhs < rhs;
  });
  const std::set<int> banned = stats.banned(tau);
  std::vector<int> out;
  for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(cfg.k_top); ++i) {
    int arm = order[i];
    if (banned.count(arm)) continue;
    if (stats.count(tau, arm) < cfg.n_min) continue;
    out.push_back(arm);
  }
  if (out.empty()) {
    out.push_back(0);
    if (used_fallback) *used_fallback = true;
  }
  std::sort(out.begin(), out.end());
  return out;
}

// eps = max(eps_min, eps0 / sqrt(N)) / (1 + estC), clamped to [0,1].
inline double exploration_rate(const ContextStats& stats, const std::string& tau,
                               const PolicyConfig& cfg) {
  double n = static_cast<double>(std::max<long>(1, stats.frequency(tau)));
  double eps = std::max(cfg.eps_min, cfg.eps0 / std::sqrt(n)) / (1.0 + stats.est_batch_cost(tau));
  return std::clamp(eps, 0.0, 1.0);
}

struct Selection {
  int arm = 0;
  bool explored = false;
  double draw = 0.0;
  std::uint64_t explore_rank = 0;  // index into the sorted candidate list
};

/// With probability 1-eps the lowest-score candidate wins (ties go to the
/// lowest arm id); otherwise one candidate is drawn uniformly.
inline Selection select_arm(const std::vector<int>& candidates, const std::vector<double>& scores,
                            double eps, Rng& rng) {
  if (candidates.empty()) throw ValidationError("select_arm: empty candidate set");
  Selection sel;
  sel.draw = rng.uniform01();
  if (sel.draw < eps) {
    sel.explored = true;
    sel.explore_rank = rng.below(candidates.size());
    sel.arm = candidates[sel.explore_rank];
    return sel;
  }
  sel.arm = candidates.front();
  for (int arm : candidates) {
    if (scores[static_cast<std::size_t>(arm)] < scores[static_cast<std::size_t>(sel.arm)])
      sel.arm = arm;
  }
  return sel;
}

/// One line of the decision log; carries enough to replay the choice.
struct DecisionRecord {
  std::uint64_t query_index = 0;
  std::string query_id;
  std::string template_id;
  int batch_index = 0;
  std::string mode;  // cold_start | policy | baseline
  std::vector<int> candidates;
  std::vector<double> scores;   // per arm, all K (empty outside policy mode)
  std::vector<double> y_tilde;  // per arm runtime estimates
  std::vector<long> counts;     // n per arm at decision time
  std::vector<int> banned;
  double epsilon = 0.0;
  double draw = 0.0;
  bool explored = false;
  std::uint64_t explore_rank = 0;
  int chosen = 0;
  std::optional<double> predicted_reward;

  nlohmann::json to_json() const {
    nlohmann::json doc;
    doc["query_index"] = query_index;
    doc["query_id"] = query_id;
    doc["template_id"] = template_id;
    doc["batch_index"] = batch_index;
    doc["mode"] = mode;
    doc["candidates"] = candidates;
    doc["scores"] = scores;
    doc["y_tilde"] = y_tilde;
    doc["counts"] = counts;
    doc["banned"] = banned;
    doc["epsilon"] = epsilon;
    doc["draw"] = draw;
    doc["explored"] = explored;
    doc["explore_rank"] = explore_rank;
    doc["chosen"] = chosen;
    if (predicted_reward) doc["predicted_reward"] = *predicted_reward;
    return doc;
  }

  static DecisionRecord from_json(const nlohmann::json& doc) {
    DecisionRecord d;
    d.query_index = doc.at("query_index").get<std::uint64_t>();
    d.query_id = doc.at("query_id").get<std::string>();
    d.template_id = doc.at("template_id").get<std::string>();
    d.batch_index = doc.at("batch_index").get<int>();
    d.mode = doc.at("mode").get<std::string>();
    d.candidates = doc.at("candidates").get<std::vector<int>>();
    d.scores = doc.at("scores").get<std::vector<double>>();
    d.y_tilde = doc.at("y_tilde").get<std::vector<double>>();
    d.counts = doc.at("counts").get<std::vector<long>>();
    d.banned = doc.at("banned").get<std::vector<int>>();
    d.epsilon = doc.at("epsilon").get<double>();
    d.draw = doc.at("draw").get<double>();
    d.explored = doc.at("explored").get<bool>();
    d.explore_rank = doc.at("explore_rank").get<std::uint64_t>();
    d.chosen = doc.at("chosen").get<int>();
    if (doc.contains("predicted_reward")) d.predicted_reward = doc["predicted_reward"].get<double>();
    return d;
  }

  /// Recomputes the choice from the logged fields; a decision log replays to
  /// the same arms or it is corrupt.
  int replay() const {
    if (mode != "policy") return chosen;
    if (draw < epsilon) return candidates.at(explore_rank);
    int best = candidates.front();
    for (int arm : candidates)
      if (scores.at(static_cast<std::size_t>(arm)) < scores.at(static_cast<std::size_t>(best)))
        best = arm;
    return best;
  }
};

}  // namespace ontotune
