#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deeppink/csv.hpp"
#include "deeppink/filter.hpp"
#include "deeppink/knockoffs.hpp"
#include "deeppink/net.hpp"
#include "deeppink/simgen.hpp"
#include "deeppink/version.hpp"

// JSON document assembly. Field names are stable; every report written by the
// CLI embeds a run manifest. An infinite selection threshold serializes as
// null.

namespace deeppink {

using nlohmann::json;

inline json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i];
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json make_manifest(const std::string& command, json config,
                          std::vector<std::string> input_paths,
                          std::vector<std::string> output_paths,
                          std::uint64_t seed) {
  return json{{"command", command},
              {"config", std::move(config)},
              {"input_paths", std::move(input_paths)},
              {"output_paths", std::move(output_paths)},
              {"seed", seed},
              {"tool_version", kVersion},
              {"timestamp", utc_timestamp()}};
}

inline json threshold_to_json(double t) {
  if (std::isinf(t)) return nullptr;
  return t;
}

inline json to_json(const ExchangeabilityDiagnostic& diag) {
  return json{{"dev_xx", diag.dev_xx},
              {"dev_knockoff", diag.dev_kk},
              {"dev_cross", diag.dev_xk},
              {"tolerance", diag.tolerance},
              {"pass", diag.pass}};
}

inline json selection_to_json(const SelectionReport& report,
                              const std::vector<std::string>& column_names,
                              const Eigen::VectorXd& w) {
  json selected_names = json::array();
  for (int j : report.selected) {
    selected_names.push_back(column_names[static_cast<std::size_t>(j)]);
  }
  return json{{"q", report.q},
              {"rule", to_string(report.rule)},
              {"threshold", threshold_to_json(report.threshold)},
              {"selected", report.selected},
              {"selected_names", std::move(selected_names)},
              {"W", vector_to_json(w)}};
}

inline json train_config_to_json(const TrainConfig& cfg, Eigen::Index n, Eigen::Index p) {
  return json{{"learning_rate", cfg.learning_rate},
              {"batch_size", cfg.batch_size},
              {"epochs", cfg.epochs},
              {"l1_lambda", cfg.resolved_lambda(n, p)},
              {"l1_multiplier", cfg.l1_multiplier},
              {"runs", cfg.runs},
              {"seed", cfg.seed},
              {"adam_beta1", cfg.adam_beta1},
              {"adam_beta2", cfg.adam_beta2},
              {"adam_eps", cfg.adam_eps}};
}

inline json sim_config_to_json(const SimConfig& cfg) {
  return json{{"n", cfg.n},
              {"p", cfg.p},
              {"s_sparsity", cfg.s_sparsity},
              {"amplitude", cfg.amplitude},
              {"rho", cfg.rho},
              {"sigma_noise", cfg.sigma_noise},
              {"model", to_string(cfg.model)},
              {"q", cfg.q},
              {"rule", to_string(cfg.rule)},
              {"baseline", to_string(cfg.baseline)},
              {"repetitions", cfg.repetitions},
              {"seed", cfg.seed},
              {"aggregation", to_string(cfg.aggregation)},
              {"covariance", "known"},
              {"train", train_config_to_json(cfg.train, cfg.n, cfg.p)}};
}

inline json to_json(const ExperimentReport& report) {
  json reps = json::array();
  for (const auto& rr : report.repetitions) {
    reps.push_back(json{{"rep", rr.rep},
                        {"seed", rr.seed},
                        {"fdp", rr.fdp},
                        {"power", rr.power},
                        {"power_defined", rr.power_defined},
                        {"n_selected", rr.n_selected},
                        {"threshold", threshold_to_json(rr.threshold)},
                        {"selected", rr.selected}});
  }
  return json{{"config", sim_config_to_json(report.config)},
              {"resolved_l1_lambda", report.resolved_l1_lambda},
              {"repetitions", std::move(reps)},
              {"aggregates", json{{"empirical_fdr", report.empirical_fdr},
                                  {"mean_power", report.mean_power},
                                  {"median_n_selected", report.median_n_selected}}}};
}

// Flat companion to the JSON report: one row per repetition.
inline void write_experiment_csv(const std::string& path, const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "rep,fdp,power,n_selected,threshold\n";
  for (const auto& rr : report.repetitions) {
    out << rr.rep << ',' << format_value(rr.fdp) << ',' << format_value(rr.power) << ','
        << rr.n_selected << ','
        << (std::isinf(rr.threshold) ? "inf" : format_value(rr.threshold)) << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

// Trained-network dump for audit and offline re-extraction of statistics.
inline json network_to_json(const PinkNetwork& net) {
  return json{{"kind", "deeppink"},
              {"p", net.p()},
              {"z", vector_to_json(net.z())},
              {"z_tilde", vector_to_json(net.z_tilde())},
              {"w0", vector_to_json(net.w0())},
              {"w1", matrix_to_json(net.w1())},
              {"w2", matrix_to_json(net.w2())},
              {"w3", vector_to_json(net.w3())},
              {"b1", vector_to_json(net.b1())},
              {"b2", vector_to_json(net.b2())},
              {"b3", net.b3()}};
}

inline PinkNetwork network_from_json(const json& doc) {
  const int p = doc.at("p");
  PinkNetwork net(p);
  net.z() = vector_from_json(doc.at("z"));
  net.z_tilde() = vector_from_json(doc.at("z_tilde"));
  net.w0() = vector_from_json(doc.at("w0"));
  net.w1() = matrix_from_json(doc.at("w1"));
  net.w2() = matrix_from_json(doc.at("w2"));
  net.w3() = vector_from_json(doc.at("w3"));
  net.b1() = vector_from_json(doc.at("b1"));
  net.b2() = vector_from_json(doc.at("b2"));
  net.b3() = doc.at("b3");
  return net;
}

inline void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  json doc;
  in >> doc;
  return doc;
}

}  // namespace deeppink
