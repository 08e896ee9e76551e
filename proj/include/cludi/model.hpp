#pragma once

#include <filesystem>

#include "cludi/config.hpp"
#include "cludi/denoiser.hpp"
#include "cludi/diffusion.hpp"
#include "cludi/heads.hpp"

namespace cludi {

// Trained (or freshly initialized) CLUDI model. Teacher and student share
// these parameters.
struct Model {
  TrainConfig config;
  NoiseSchedule schedule;
  NoiseScale scale;
  DenoiserParams denoiser;
  HeadParams heads;

  // Fresh model for features of width feature_dim, seeded from config.seed.
  static Model init(const TrainConfig& config, int feature_dim);

  int embed_dim() const noexcept { return denoiser.shape.embed_dim; }
  int feature_dim() const noexcept { return denoiser.shape.feature_dim; }
  int clusters() const noexcept { return static_cast<int>(heads.clusters()); }
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Binary checkpoint, magic "CLDM"; layout in docs/formats.md.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace cludi
