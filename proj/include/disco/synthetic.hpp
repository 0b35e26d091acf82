#pragma once

// Seeded synthetic feature generators for demos and tests. Each synthetic
// "model" embeds Gaussian class clusters in a few latent directions, adds
// isotropic noise everywhere, and hides the latent axes behind a random
// rotation.

#include <Eigen/Dense>
#include <Eigen/QR>
#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "disco/feature_matrix.hpp"

namespace disco::synthetic {

struct TaskShape {
  Index samples = 600;
  Index dim = 64;
  int classes = 6;
};

struct ModelSpec {
  std::string model_id;
  double separation = 1.0;    // scale of class centroids in the signal directions
  Index signal_dims = 5;
  double noise_scale = 1.0;   // std of isotropic noise
  Index distractor_dims = 0;  // high-variance label-free directions
  double distractor_scale = 0.0;
};

struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

inline Eigen::MatrixXd random_orthogonal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Balanced labels 0..C-1, shuffled.
inline std::vector<int> balanced_labels(Index n, int classes, std::uint64_t seed) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % classes);
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

/// Fixed centroids and rotation for one synthetic model; draws any number of
/// samples from it.
class ModelGenerator {
 public:
  ModelGenerator(const TaskShape& shape, ModelSpec spec, std::uint64_t seed)
      : shape_(shape), spec_(std::move(spec)) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    centroids_.resize(shape_.classes, spec_.signal_dims);
    for (Index c = 0; c < centroids_.rows(); ++c) {
      for (Index j = 0; j < centroids_.cols(); ++j) centroids_(c, j) = normal(rng);
    }
    rotation_ = random_orthogonal(shape_.dim, rng);
  }

  Dataset sample(const std::vector<int>& labels, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const auto n = static_cast<Index>(labels.size());
    Eigen::MatrixXd latent(n, shape_.dim);
    for (Index i = 0; i < n; ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      for (Index j = 0; j < shape_.dim; ++j) {
        double v = normal(rng);
        if (j < spec_.signal_dims) {
          v += spec_.separation * centroids_(y, j);
        } else if (j < spec_.signal_dims + spec_.distractor_dims) {
          v *= spec_.distractor_scale;
        } else {
          v *= spec_.noise_scale;
        }
        latent(i, j) = v;
      }
    }
    return {latent * rotation_.transpose(), labels};
  }

  const ModelSpec& spec() const noexcept { return spec_; }

 private:
  TaskShape shape_;
  ModelSpec spec_;
  Eigen::MatrixXd centroids_;
  Eigen::MatrixXd rotation_;
};

/// Eight-model hub with increasing class separation; model "m0" is the
/// weakest and "m7" the strongest. Some models carry label-free
/// high-variance directions that compete with the class signal for the top
/// of the spectrum.
inline std::vector<ModelSpec> default_hub_specs() {
  std::vector<ModelSpec> specs;
  const double separations[] = {0.45, 0.6, 0.75, 0.9, 1.05, 1.25, 1.45, 1.7};
  const Index distractors[] = {4, 0, 3, 0, 2, 0, 1, 0};
  for (int m = 0; m < 8; ++m) {
    ModelSpec s;
    s.model_id = "m" + std::to_string(m);
    s.separation = separations[m];
    s.signal_dims = 5;
    s.noise_scale = 0.6;
    s.distractor_dims = distractors[m];
    s.distractor_scale = 1.5;
    specs.push_back(s);
  }
  return specs;
}

struct HubModel {
  ModelSpec spec;
  Dataset train;
  Dataset held_out;
};

struct Hub {
  TaskShape shape;
  std::vector<int> labels;
  std::vector<HubModel> models;
};

inline Hub make_hub(std::uint64_t seed, const TaskShape& shape = {},
                    std::vector<ModelSpec> specs = default_hub_specs(),
                    Index held_out_samples = 600) {
  Hub hub;
  hub.shape = shape;
  hub.labels = balanced_labels(shape.samples, shape.classes, seed);
  const auto held_labels = balanced_labels(held_out_samples, shape.classes, seed ^ 0x5bd1e995ULL);
  for (std::size_t m = 0; m < specs.size(); ++m) {
    const std::uint64_t base = seed * 1000003ULL + 17ULL * (m + 1);
    ModelGenerator gen(shape, specs[m], base);
    HubModel model{specs[m], gen.sample(hub.labels, base + 1), gen.sample(held_labels, base + 2)};
    hub.models.push_back(std::move(model));
  }
  return hub;
}

/// Held-out accuracy of a Euclidean nearest-centroid classifier fitted on
/// `train`. Used as the synthetic ground-truth "fine-tuning" performance.
inline double nearest_centroid_accuracy(const Dataset& train, const Dataset& test) {
  const int classes = *std::max_element(train.labels.begin(), train.labels.end()) + 1;
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(classes, train.features.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(classes);
  for (Index i = 0; i < train.features.rows(); ++i) {
    centroids.row(train.labels[static_cast<std::size_t>(i)]) += train.features.row(i);
    counts(train.labels[static_cast<std::size_t>(i)]) += 1.0;
  }
  for (int c = 0; c < classes; ++c) centroids.row(c) /= std::max(1.0, counts(c));
  Index correct = 0;
  for (Index i = 0; i < test.features.rows(); ++i) {
    Index best = 0;
    (centroids.rowwise() - test.features.row(i)).rowwise().squaredNorm().minCoeff(&best);
    if (static_cast<int>(best) == test.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.features.rows());
}

}  // namespace disco::synthetic
