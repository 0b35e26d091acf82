#pragma once

// End-to-end scoring pipeline and JSON report assembly shared by the CLI and
// the acceptance suite: optional hard-example sampling, PCA, SVD, grouping,
// task scores.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "disco/box_features.hpp"
#include "disco/classification.hpp"
#include "disco/error.hpp"
#include "disco/feature_matrix.hpp"
#include "disco/hard_sampling.hpp"
#include "disco/io.hpp"
#include "disco/pca.hpp"
#include "disco/rank_eval.hpp"
#include "disco/regression.hpp"
#include "disco/spectral.hpp"

namespace disco {

using nlohmann::json;

enum class Task { Classification, Detection };

inline std::string to_string(Task t) { return t == Task::Classification ? "cls" : "det"; }

inline Task parse_task(const std::string& s) {
  if (s == "cls" || s == "classification") return Task::Classification;
  if (s == "det" || s == "detection") return Task::Detection;
  throw Error(ErrorCode::InvalidInput, "unknown task '" + s + "' (expected cls or det)");
}

struct RunConfig {
  std::size_t groups = 8;
  Task task = Task::Classification;
  Index pca_dim = 128;  // 0 disables PCA, including centering
  std::optional<double> sample_ratio;
  double rcond = 0.0;   // <= 0 selects r * eps
  std::optional<std::uint64_t> seed;
  Index pooled_side = 2;
  bool exact_gaussian = false;
  unsigned jobs = 0;    // 0 = hardware concurrency

  NccOptions ncc() const {
    NccOptions o;
    o.include_log_det = exact_gaussian;
    return o;
  }
};

inline json config_json(const RunConfig& c) {
  json j;
  j["groups"] = c.groups;
  j["task"] = to_string(c.task);
  j["pca_dim"] = c.pca_dim;
  j["sample_ratio"] = c.sample_ratio ? json(*c.sample_ratio) : json(nullptr);
  j["rcond"] = c.rcond;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["pooled_side"] = c.pooled_side;
  j["exact_gaussian"] = c.exact_gaussian;
  return j;
}

inline json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

/// Error raised by a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "stage '" + stage + "': " + cause.message()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

template <typename F>
auto run_stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

struct ScoreOutcome {
  json report;
  double cls = 0.0;
  std::optional<double> reg;
};

namespace detail {

inline FeatureMatrix reduce(const FeatureMatrix& features, const RunConfig& config, json& notes,
                            json& samples) {
  if (config.pca_dim <= 0) {
    samples["dim_scored"] = features.dim();
    return features;
  }
  PcaResult pca = run_stage("pca", [&] { return pca_fit_transform(features, config.pca_dim); });
  if (!pca.note.empty()) notes.push_back(pca.note);
  samples["dim_scored"] = pca.transformed.dim();
  return std::move(pca.transformed);
}

inline json classification_section(const SpectralGrouping& grouping, std::span<const int> labels,
                                   const RunConfig& config, json& report) {
  const ClassificationScoreReport cls =
      run_stage("ncc", [&] { return disco_cls(grouping, labels, config.ncc()); });
  report["per_group"]["S_ratio"] = to_json(cls.per_group_ratio);
  report["per_group"]["S_ncc"] = to_json(cls.per_group_ncc);
  report["final"]["S_cls"] = cls.final;

  const auto& d = grouping.decomposition;
  const std::size_t k = default_topk(grouping.group_count());
  const double entire = run_stage("ablation", [&] {
    return ncc_confidence(d.left * d.singulars.asDiagonal(), labels, config.ncc());
  });
  report["ablation"] = {{"S_ncc_sum", cls.per_group_ncc.sum()},
                        {"S_ncc_entire", entire},
                        {"S_topk", topk_ratio(grouping, k)},
                        {"k", k}};
  return cls.final;
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

inline ScoreOutcome score_classification(const FeatureMatrix& features, std::span<const int> labels,
                                         const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  json report;
  json notes = json::array();
  json samples = {{"input", features.n_samples()}, {"dim_input", features.dim()}};
  report["task"] = "cls";
  report["config"] = config_json(config);

  const FeatureMatrix* current = &features;
  std::vector<int> kept_labels(labels.begin(), labels.end());
  std::optional<FeatureMatrix> sampled;
  if (config.sample_ratio) {
    const HardExampleSelection sel = run_stage("sample", [&] {
      return select_hard_examples(features, labels, *config.sample_ratio);
    });
    sampled.emplace(features.rows(sel.indices));
    kept_labels.clear();
    for (Index i : sel.indices) kept_labels.push_back(labels[static_cast<std::size_t>(i)]);
    current = &*sampled;
  }
  samples["used"] = current->n_samples();

  const FeatureMatrix reduced = detail::reduce(*current, config, notes, samples);
  const SpectralGrouping grouping = run_stage("svd", [&] {
    return make_grouping(svd(reduced), config.groups);
  });
  ScoreOutcome out;
  out.cls = detail::classification_section(grouping, kept_labels, config, report);
  report["samples"] = samples;
  report["notes"] = notes;
  report["timing"] = {{"wall_seconds", detail::elapsed_seconds(start)}};
  out.report = std::move(report);
  return out;
}

inline ScoreOutcome score_detection(const std::vector<SpatialMap>& maps,
                                    const io::DetectionLabels& labels, const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  detail::require(!config.sample_ratio, ErrorCode::InvalidInput,
                  "hard-example sampling applies to classification features only");
  json report;
  json notes = json::array();
  report["task"] = "det";
  report["config"] = config_json(config);

  BoxFeatures boxes = run_stage("box_features", [&] {
    return build_box_features(maps, labels.images, config.pooled_side);
  });
  for (const auto& w : boxes.warnings) notes.push_back(w);
  json samples = {{"input", boxes.features.n_samples()},
                  {"used", boxes.features.n_samples()},
                  {"dim_input", boxes.features.dim()},
                  {"images", maps.size()}};

  const FeatureMatrix reduced = detail::reduce(boxes.features, config, notes, samples);
  const SpectralGrouping grouping = run_stage("svd", [&] {
    return make_grouping(svd(reduced), config.groups);
  });
  ScoreOutcome out;
  out.cls = detail::classification_section(grouping, boxes.targets.box_classes, config, report);
  const RegressionScoreReport reg =
      run_stage("regression", [&] { return disco_reg(grouping, boxes.targets.boxes, config.rcond); });
  report["per_group"]["S_lr"] = to_json(reg.per_group_lr);
  report["final"]["S_reg"] = reg.final;
  out.reg = reg.final;
  report["samples"] = samples;
  report["notes"] = notes;
  report["timing"] = {{"wall_seconds", detail::elapsed_seconds(start)}};
  out.report = std::move(report);
  return out;
}

inline ScoreOutcome score_files(const std::filesystem::path& features_path,
                                const std::filesystem::path& labels_path, const RunConfig& config) {
  const io::LabelFile labels = run_stage("load_labels", [&] { return io::load_labels(labels_path); });
  if (config.task == Task::Classification) {
    const auto* cls = std::get_if<io::ClassificationLabels>(&labels);
    detail::require(cls != nullptr, ErrorCode::InvalidInput,
                    "task is cls but " + labels_path.string() + " holds detection labels");
    const FeatureMatrix features =
        run_stage("load_features", [&] { return io::load_features(features_path); });
    return score_classification(features, cls->labels, config);
  }
  const auto* det = std::get_if<io::DetectionLabels>(&labels);
  detail::require(det != nullptr, ErrorCode::InvalidInput,
                  "task is det but " + labels_path.string() + " holds classification labels");
  const auto maps = run_stage("load_features", [&] { return io::load_spatial_maps(features_path); });
  return score_detection(maps, *det, config);
}

// ---- hub ranking ----------------------------------------------------------

struct HubEntryResult {
  std::string model_id;
  std::optional<ScoreOutcome> outcome;
  std::string stage;
  std::string error;
};

/// Scores every manifest entry (concurrently when jobs > 1) and returns the
/// ranking report. Failed models are listed and excluded; at least two must
/// succeed.
inline json rank_hub(const std::vector<io::ManifestEntry>& entries, const RunConfig& config) {
  detail::require(entries.size() >= 2, ErrorCode::InsufficientModels,
                  "hub manifest must list at least two models");
  std::vector<HubEntryResult> results(entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      HubEntryResult& r = results[i];
      r.model_id = entries[i].model_id;
      try {
        r.outcome = score_files(entries[i].features, entries[i].labels, config);
      } catch (const StageError& e) {
        r.stage = e.stage();
        r.error = e.what();
      } catch (const std::exception& e) {
        r.stage = "unknown";
        r.error = e.what();
      }
    }
  };
  unsigned jobs = config.jobs ? config.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(entries.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  json failures = json::array();
  HubScoreTable table;
  std::vector<double> cls;
  std::vector<double> reg;
  for (const auto& r : results) {
    if (!r.outcome) {
      failures.push_back({{"model_id", r.model_id}, {"stage", r.stage}, {"error", r.error}});
      continue;
    }
    table.model_ids.push_back(r.model_id);
    cls.push_back(r.outcome->cls);
    if (r.outcome->reg) reg.push_back(*r.outcome->reg);
  }
  if (table.model_ids.size() < 2) {
    std::string detail_msg;
    for (const auto& f : failures) detail_msg += "\n  " + f["model_id"].get<std::string>() + ": " +
                                                 f["error"].get<std::string>();
    throw Error(ErrorCode::InsufficientModels,
                "fewer than two models scored successfully" + detail_msg);
  }
  table.cls_scores = Eigen::Map<const Eigen::VectorXd>(cls.data(), static_cast<Index>(cls.size()));
  std::vector<double> key = cls;
  const bool detection = config.task == Task::Detection;
  if (detection) {
    table.reg_scores = Eigen::Map<const Eigen::VectorXd>(reg.data(), static_cast<Index>(reg.size()));
    table = combine_detection(std::move(table));
    key.assign(table.combined.data(), table.combined.data() + table.combined.size());
  }

  BenchmarkRecord order_rec{table.model_ids, key, key};
  const auto order = score_order(order_rec);
  json models = json::array();
  json ranking = json::array();
  json ties = json::array();
  std::size_t rank = 1;
  for (std::size_t pos = 0; pos < order.size();) {
    std::size_t end = pos + 1;
    while (end < order.size() && key[order[end]] == key[order[pos]]) ++end;
    if (end - pos > 1) {
      json group = json::array();
      for (std::size_t t = pos; t < end; ++t) group.push_back(table.model_ids[order[t]]);
      ties.push_back(group);
    }
    for (std::size_t t = pos; t < end; ++t) {
      const std::size_t i = order[t];
      json m = {{"model_id", table.model_ids[i]}, {"rank", rank}, {"S_cls", cls[i]}};
      if (detection) {
        m["S_reg"] = reg[i];
        m["S_obj"] = table.combined(static_cast<Index>(i));
      }
      models.push_back(m);
      ranking.push_back(table.model_ids[i]);
    }
    rank += end - pos;
    pos = end;
  }
  return {{"task", to_string(config.task)},
          {"config", config_json(config)},
          {"score_key", detection ? "S_obj" : "S_cls"},
          {"models", models},
          {"ranking", ranking},
          {"ties", ties},
          {"failures", failures}};
}

// ---- evaluation, analysis, sampling reports -----------------------------

inline json eval_report(const BenchmarkRecord& record, double tolerance) {
  json out = {{"models", record.size()},
              {"tau", kendall_tau(record)},
              {"tau_w", weighted_kendall_tau(record)},
              {"tau_w_tie_adjusted", tie_adjusted_tau(record, tolerance)},
              {"tie_tolerance", tolerance}};
  for (std::size_t k = 1; k <= 3; ++k) {
    const std::string key = "top" + std::to_string(k);
    out[key] = k <= record.size() ? json(top_k_hit(record, k)) : json(nullptr);
  }
  return out;
}

inline json analyze_report(const SpectralChangeProfile& profile) {
  return {{"groups", profile.per_group_frobenius_change.size()},
          {"C_F", to_json(profile.per_group_frobenius_change)},
          {"S_ratio_before", to_json(profile.per_group_ratio_before)},
          {"S_ratio_after", to_json(profile.per_group_ratio_after)}};
}

inline std::string analyze_csv(const SpectralChangeProfile& profile) {
  std::ostringstream out;
  out.precision(17);
  out << "group,C_F,S_ratio_before,S_ratio_after\n";
  for (Index g = 0; g < profile.per_group_frobenius_change.size(); ++g) {
    out << (g + 1) << ',' << profile.per_group_frobenius_change(g) << ','
        << profile.per_group_ratio_before(g) << ',' << profile.per_group_ratio_after(g) << '\n';
  }
  return out.str();
}

inline json sample_report(const HardExampleSelection& sel, double ratio) {
  return {{"ratio", ratio},
          {"n_selected", sel.indices.size()},
          {"indices", sel.indices},
          {"per_class_counts", sel.per_class_counts}};
}

}  // namespace disco
