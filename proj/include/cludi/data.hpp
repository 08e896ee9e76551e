#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cludi {

// N×n feature matrix (one item per row) with optional labels.
struct FeatureDataset {
  Eigen::MatrixXd features;
  std::optional<std::vector<int>> labels;
  std::string name;

  Eigen::Index size() const noexcept { return features.rows(); }
  Eigen::Index dim() const noexcept { return features.cols(); }

  // N >= 1, n >= 1, finite values, label count matches N.
  void validate() const;
};

struct MixtureSpec {
  int clusters = 5;        // K
  int dim = 32;            // n
  int per_cluster = 200;   // N_per
  double center_radius = 8.0;
  double noise_std = 1.0;
  std::uint64_t seed = 7;
};

// K centers uniform on the radius-r sphere, isotropic Gaussian samples
// around each, labels = component index. Rows are grouped by component.
FeatureDataset generate_mixture(const MixtureSpec& spec);

inline constexpr std::uint16_t kCldfVersion = 1;

enum class CldfDtype : std::uint8_t { f64 = 0, f32 = 1 };

// CLDF binary format; layout in docs/formats.md.
void write_cldf(const FeatureDataset& dataset, const std::filesystem::path& path,
                CldfDtype dtype = CldfDtype::f64);
FeatureDataset read_cldf(const std::filesystem::path& path);

// Comma-separated, no quoting, optional single header line. With has_labels
// the last column is an integer label.
FeatureDataset read_csv_features(const std::filesystem::path& path, bool has_labels);
void write_csv_features(const FeatureDataset& dataset, const std::filesystem::path& path);

// Per-coordinate standardization to mean 0, std 1. Constant columns are
// only centered.
void standardize(FeatureDataset& dataset);

// Dispatches on extension: .csv -> read_csv_features, otherwise CLDF.
FeatureDataset load_dataset(const std::filesystem::path& path, bool csv_has_labels = false);

}  // namespace cludi
