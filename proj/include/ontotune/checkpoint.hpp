#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ontotune/common.hpp"
#include "ontotune/feature_embed.hpp"
#include "ontotune/regressor.hpp"
#include "ontotune/scaler.hpp"

namespace ontotune {

/// Self-describing model checkpoint. Doubles are written in shortest
/// round-trip form, so reloading reproduces predictions bit-exactly.
struct Checkpoint {
  RewardModel model;
  LogMinMaxScaler scaler{0.0, 1.0};
  int registry_version = kRegistryVersion;
  std::uint64_t run_seed = 0;

  nlohmann::json to_json() const {
    nlohmann::json doc;
    doc["format"] = "ontotune-checkpoint-v1";
    doc["model"] = model.to_json();
    doc["scaler"] = {{"l_min", scaler.l_min()}, {"l_max", scaler.l_max()}};
    doc["registry_version"] = registry_version;
    doc["run_seed"] = run_seed;
    return doc;
  }

  static Checkpoint from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "ontotune-checkpoint-v1")
      throw ValidationError("not an ontotune checkpoint");
    Checkpoint cp;
    cp.model = RewardModel::from_json(doc.at("model"));
    cp.scaler = LogMinMaxScaler(doc.at("scaler").at("l_min").get<double>(),
                                doc.at("scaler").at("l_max").get<double>());
    cp.registry_version = doc.at("registry_version").get<int>();
    if (cp.registry_version != kRegistryVersion)
      throw ValidationError("checkpoint registry version " + std::to_string(cp.registry_version) +
                            " does not match " + std::to_string(kRegistryVersion));
    cp.run_seed = doc.at("run_seed").get<std::uint64_t>();
    return cp;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << to_json().dump(2) << '\n';
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ValidationError("checkpoint is not valid JSON: " + path.string());
    return from_json(doc);
  }
};

}  // namespace ontotune
