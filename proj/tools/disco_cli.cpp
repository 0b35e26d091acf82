// Command-line front end: score, rank, eval, analyze, sample, synth.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "disco.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::size_t groups = 8;
  std::string task = "cls";
  long pca_dim = 128;
  std::optional<double> sample_ratio;
  double rcond = 0.0;
  std::optional<std::uint64_t> seed;
  long pooled_side = 2;
  bool exact_gaussian = false;
  unsigned jobs = 0;
  std::string out;

  disco::RunConfig config() const {
    disco::RunConfig c;
    c.groups = groups;
    c.task = disco::parse_task(task);
    c.pca_dim = pca_dim;
    c.sample_ratio = sample_ratio;
    c.rcond = rcond;
    c.seed = seed;
    c.pooled_side = pooled_side;
    c.exact_gaussian = exact_gaussian;
    c.jobs = jobs;
    return c;
  }
};

void add_scoring_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--groups", f.groups, "number of spectral groups G")->check(CLI::PositiveNumber);
  cmd->add_option("--task", f.task, "cls or det")->check(CLI::IsMember({"cls", "det"}));
  cmd->add_option("--pca-dim", f.pca_dim, "PCA target dimension (0 disables PCA)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--sample-ratio", f.sample_ratio, "hard-example sampling ratio in (0,1]")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--rcond", f.rcond, "pseudo-inverse cutoff relative to sigma_1 (default r*eps)");
  cmd->add_option("--seed", f.seed, "seed echoed in the report");
  cmd->add_option("--pooled-side", f.pooled_side, "pooled grid side for box features")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--exact-gaussian", f.exact_gaussian,
                "include the -1/2 log det term in NCC class scores");
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
  } else {
    disco::io::write_atomically(out, text);
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int run_synth(std::uint64_t seed, const fs::path& dir, long samples) {
  fs::create_directories(dir);
  disco::synthetic::TaskShape shape;
  shape.samples = samples;
  const auto hub = disco::synthetic::make_hub(seed, shape);
  json manifest = json::array();
  json truth = json::array();
  disco::io::write_atomically(dir / "labels.json",
                              dump(disco::io::labels_to_json(disco::io::ClassificationLabels{hub.labels})));
  for (const auto& model : hub.models) {
    const std::string file = model.spec.model_id + ".fmx";
    disco::io::save_features(disco::FeatureMatrix(model.train.features), dir / file);
    manifest.push_back({{"model_id", model.spec.model_id}, {"features", file}, {"labels", "labels.json"}});
    truth.push_back({{"model_id", model.spec.model_id},
                     {"performance",
                      100.0 * disco::synthetic::nearest_centroid_accuracy(model.train, model.held_out)}});
  }
  disco::io::write_atomically(dir / "manifest.json", dump(manifest));
  disco::io::write_atomically(dir / "ground_truth.json", dump(truth));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral-component transferability scoring for pre-trained model hubs"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string features_path;
  std::string labels_path;

  auto* score = app.add_subcommand("score", "score one model's features");
  add_scoring_flags(score, flags);
  score->add_option("features", features_path, "FMX1 feature file")->required()->check(CLI::ExistingFile);
  score->add_option("labels", labels_path, "label JSON")->required()->check(CLI::ExistingFile);
  score->add_option("--out", flags.out, "report path (default stdout)");

  std::string manifest_path;
  auto* rank = app.add_subcommand("rank", "score and rank every model in a hub manifest");
  add_scoring_flags(rank, flags);
  rank->add_option("manifest", manifest_path, "hub manifest JSON")->required()->check(CLI::ExistingFile);
  rank->add_option("--jobs", flags.jobs, "models scored concurrently (0 = all cores)");
  rank->add_option("--out", flags.out, "report path (default stdout)");

  std::string benchmark_path;
  double tolerance = 0.1;
  auto* eval = app.add_subcommand("eval", "rank correlation of scores against ground truth");
  eval->add_option("benchmark", benchmark_path, "benchmark JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--tolerance", tolerance, "performance gap treated as a tie (units of P)")
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--out", flags.out, "report path (default stdout)");

  std::string before_path;
  std::string after_path;
  auto* analyze = app.add_subcommand("analyze", "per-group spectral change between two feature sets");
  analyze->add_option("before", before_path, "FMX1 features before")->required()->check(CLI::ExistingFile);
  analyze->add_option("after", after_path, "FMX1 features after")->required()->check(CLI::ExistingFile);
  analyze->add_option("--groups", flags.groups, "number of spectral groups G")->check(CLI::PositiveNumber);
  analyze->add_option("--out", flags.out, "JSON path; a .csv table is written beside it");

  double ratio = 0.0;
  auto* sample = app.add_subcommand("sample", "select hard examples");
  sample->add_option("features", features_path, "FMX1 feature file")->required()->check(CLI::ExistingFile);
  sample->add_option("labels", labels_path, "classification label JSON")->required()->check(CLI::ExistingFile);
  sample->add_option("--ratio", ratio, "fraction kept per class, in (0,1]")->required()
      ->check(CLI::Range(0.0, 1.0));
  sample->add_option("--out", flags.out, "output path (default stdout)");

  std::uint64_t synth_seed = 0;
  std::string synth_dir;
  long synth_samples = 600;
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic 8-model demo hub");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--samples", synth_samples, "samples per model")->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (score->parsed()) {
      const auto outcome = disco::score_files(features_path, labels_path, flags.config());
      emit(dump(outcome.report), flags.out);
    } else if (rank->parsed()) {
      const auto entries = disco::io::load_manifest(manifest_path);
      emit(dump(disco::rank_hub(entries, flags.config())), flags.out);
    } else if (eval->parsed()) {
      const auto record = disco::io::load_benchmark(benchmark_path);
      emit(dump(disco::eval_report(record, tolerance)), flags.out);
    } else if (analyze->parsed()) {
      const auto before = disco::io::load_features(before_path);
      const auto after = disco::io::load_features(after_path);
      const auto profile = disco::spectral_change_profile(before, after, flags.groups);
      if (flags.out.empty()) {
        std::cout << dump(disco::analyze_report(profile));
      } else {
        fs::path csv = flags.out;
        csv.replace_extension(".csv");
        disco::io::write_atomically(csv, disco::analyze_csv(profile));
        disco::io::write_atomically(flags.out, dump(disco::analyze_report(profile)));
      }
    } else if (sample->parsed()) {
      const auto labels = disco::io::load_labels(labels_path);
      const auto* cls = std::get_if<disco::io::ClassificationLabels>(&labels);
      if (cls == nullptr) {
        throw disco::Error(disco::ErrorCode::InvalidInput,
                           "hard-example sampling needs classification labels");
      }
      const auto features = disco::io::load_features(features_path);
      const auto sel = disco::select_hard_examples(features, cls->labels, ratio);
      emit(dump(disco::sample_report(sel, ratio)), flags.out);
    } else if (synth->parsed()) {
      return run_synth(synth_seed, synth_dir, synth_samples);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
