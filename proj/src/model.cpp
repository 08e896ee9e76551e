#include "cludi/model.hpp"

#include "cludi/binary_io.hpp"
#include "cludi/error.hpp"

namespace cludi {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'D', 'M'};

void put_matrix(io::Writer& w, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.put<double>(m(r, c));
  }
}

Eigen::MatrixXd get_matrix(io::Reader& r, Eigen::Index rows, Eigen::Index cols, const char* what) {
  r.require(static_cast<std::size_t>(rows * cols) * sizeof(double), what);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.get<double>(what);
  }
  return m;
}

}  // namespace

Model Model::init(const TrainConfig& config, int feature_dim) {
  config.validate();
  DenoiserShape shape;
  shape.embed_dim = config.embed_dim;
  shape.feature_dim = feature_dim;
  shape.time_dim = config.time_dim;
  shape.hidden = config.hidden;
  shape.hidden_layers = config.hidden_layers;
  shape.steps = config.steps;
  return Model{
      config,
      NoiseSchedule::sqrt_schedule(config.steps, config.schedule_offset, config.eps_floor),
      NoiseScale(config.f2),
      init_denoiser(shape, config.seed),
      init_heads(config.clusters, config.embed_dim, config.tau, config.tau_col, config.seed),
  };
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  io::Writer w;
  w.put_bytes(std::string_view(kMagic, 4));
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint16_t>(0);

  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.schedule.steps()));
  w.put<double>(model.schedule.offset());
  w.put<double>(model.schedule.eps_floor());
  w.put<double>(model.scale.variance());

  const auto& s = model.denoiser.shape;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.embed_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.feature_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.time_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.hidden));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.hidden_layers));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.activation));
  for (std::size_t l = 0; l < model.denoiser.layers(); ++l) {
    put_matrix(w, model.denoiser.weights[l]);
    put_matrix(w, model.denoiser.biases[l]);
  }

  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.heads.clusters()));
  w.put<double>(model.heads.tau);
  w.put<double>(model.heads.tau_col);
  put_matrix(w, model.heads.logits);
  put_matrix(w, model.heads.embed);

  const std::string config = nlohmann::json(model.config).dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.put_bytes(config);

  io::write_file(path.string(), w.bytes());
}

Model load_checkpoint(const std::filesystem::path& path) {
  io::Reader r(io::read_file(path.string()));
  if (r.get_bytes(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not a CLDM checkpoint (bad magic)", 0);
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  r.get<std::uint16_t>("reserved");

  const auto steps = static_cast<int>(r.get<std::uint32_t>("schedule steps"));
  const double offset = r.get<double>("schedule offset");
  const double eps_floor = r.get<double>("schedule floor");
  const double f2 = r.get<double>("noise scale");

  DenoiserShape shape;
  shape.embed_dim = static_cast<int>(r.get<std::uint32_t>("embed dim"));
  shape.feature_dim = static_cast<int>(r.get<std::uint32_t>("feature dim"));
  shape.time_dim = static_cast<int>(r.get<std::uint32_t>("time dim"));
  shape.hidden = static_cast<int>(r.get<std::uint32_t>("hidden width"));
  shape.hidden_layers = static_cast<int>(r.get<std::uint32_t>("hidden layers"));
  const auto activation_offset = static_cast<std::int64_t>(r.offset());
  const auto activation = r.get<std::uint8_t>("activation");
  if (activation != static_cast<std::uint8_t>(Activation::gelu)) {
    throw FormatError("unknown activation tag " + std::to_string(activation), activation_offset);
  }
  shape.steps = steps;
  shape.validate();

  DenoiserParams denoiser = zero_denoiser(shape);
  for (std::size_t l = 0; l < denoiser.layers(); ++l) {
    auto& W = denoiser.weights[l];
    W = get_matrix(r, W.rows(), W.cols(), "denoiser weights");
    denoiser.biases[l] = get_matrix(r, denoiser.biases[l].size(), 1, "denoiser biases");
  }

  HeadParams heads;
  const auto clusters = static_cast<Eigen::Index>(r.get<std::uint32_t>("cluster count"));
  heads.tau = r.get<double>("tau");
  heads.tau_col = r.get<double>("tau_col");
  heads.logits = get_matrix(r, clusters, shape.embed_dim, "logit matrix");
  heads.embed = get_matrix(r, shape.embed_dim, clusters, "embedding matrix");

  const auto config_len = r.get<std::uint32_t>("config length");
  const auto config_offset = static_cast<std::int64_t>(r.offset());
  const std::string config_text = r.get_bytes(config_len, "config");
  TrainConfig config;
  try {
    config = nlohmann::json::parse(config_text).get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad embedded config: ") + e.what(), config_offset);
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after checkpoint", static_cast<std::int64_t>(r.offset()));
  }

  denoiser.validate();
  heads.validate();
  return Model{config, NoiseSchedule::sqrt_schedule(steps, offset, eps_floor), NoiseScale(f2),
               std::move(denoiser), std::move(heads)};
}

}  // namespace cludi
