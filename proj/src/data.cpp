#include "cludi/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cludi/binary_io.hpp"
#include "cludi/error.hpp"
#include "cludi/rng.hpp"

namespace cludi {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'D', 'F'};

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_int(const std::string& cell, int& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

void FeatureDataset::validate() const {
  if (features.rows() < 1 || features.cols() < 1) {
    throw InvalidArgument("dataset '" + name + "' is empty");
  }
  if (!features.allFinite()) throw InvalidArgument("dataset '" + name + "' has non-finite values");
  if (labels && static_cast<Eigen::Index>(labels->size()) != features.rows()) {
    throw InvalidArgument("dataset '" + name + "': label count does not match row count");
  }
  if (labels) {
    for (int l : *labels) {
      if (l < 0) throw InvalidArgument("dataset '" + name + "': negative label");
    }
  }
}

FeatureDataset generate_mixture(const MixtureSpec& spec) {
  if (spec.clusters < 1 || spec.dim < 1 || spec.per_cluster < 1) {
    throw InvalidArgument("mixture: K, dim and per-cluster count must be positive");
  }
  if (!(spec.center_radius > 0.0) || !(spec.noise_std >= 0.0)) {
    throw InvalidArgument("mixture: radius must be positive and noise std non-negative");
  }
  RandomStream rng(spec.seed);
  Eigen::MatrixXd centers(spec.clusters, spec.dim);
  for (int k = 0; k < spec.clusters; ++k) {
    Eigen::VectorXd dir = rng.normal_vector(spec.dim);
    centers.row(k) = spec.center_radius * dir.transpose() / dir.norm();
  }
  FeatureDataset ds;
  ds.name = "mixture";
  const Eigen::Index N = static_cast<Eigen::Index>(spec.clusters) * spec.per_cluster;
  ds.features.resize(N, spec.dim);
  ds.labels.emplace();
  ds.labels->reserve(static_cast<std::size_t>(N));
  Eigen::Index row = 0;
  for (int k = 0; k < spec.clusters; ++k) {
    for (int i = 0; i < spec.per_cluster; ++i, ++row) {
      ds.features.row(row) = centers.row(k);
      if (spec.noise_std > 0.0) {
        ds.features.row(row) += spec.noise_std * rng.normal_vector(spec.dim).transpose();
      }
      ds.labels->push_back(k);
    }
  }
  return ds;
}

void write_cldf(const FeatureDataset& dataset, const std::filesystem::path& path,
                CldfDtype dtype) {
  dataset.validate();
  io::Writer w;
  w.put_bytes(std::string_view(kMagic, 4));
  w.put<std::uint16_t>(kCldfVersion);
  w.put<std::uint16_t>(dataset.labels ? 1 : 0);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(dataset.size()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(dataset.dim()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(dtype));
  for (Eigen::Index r = 0; r < dataset.size(); ++r) {
    for (Eigen::Index c = 0; c < dataset.dim(); ++c) {
      if (dtype == CldfDtype::f64) {
        w.put<double>(dataset.features(r, c));
      } else {
        w.put<float>(static_cast<float>(dataset.features(r, c)));
      }
    }
  }
  if (dataset.labels) {
    for (int l : *dataset.labels) w.put<std::uint32_t>(static_cast<std::uint32_t>(l));
  }
  io::write_file(path.string(), w.bytes());
}

FeatureDataset read_cldf(const std::filesystem::path& path) {
  io::Reader r(io::read_file(path.string()));
  if (r.get_bytes(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not a CLDF file (bad magic)", 0);
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCldfVersion) {
    throw FormatError("unsupported CLDF version " + std::to_string(version), 4);
  }
  const auto flags = r.get<std::uint16_t>("flags");
  if (flags & ~std::uint16_t{1}) throw FormatError("unknown CLDF flag bits", 6);
  const auto rows = r.get<std::uint64_t>("row count");
  const auto cols = r.get<std::uint64_t>("column count");
  const auto dtype_offset = static_cast<std::int64_t>(r.offset());
  const auto dtype = r.get<std::uint8_t>("dtype");
  if (dtype > 1) throw FormatError("unknown CLDF dtype " + std::to_string(dtype), dtype_offset);
  if (rows == 0 || cols == 0) throw FormatError("CLDF declares an empty matrix", 8);

  const std::size_t width = dtype == 0 ? sizeof(double) : sizeof(float);
  // Overflow-safe size check before allocating.
  if (cols > std::numeric_limits<std::size_t>::max() / width / rows) {
    throw FormatError("CLDF dimensions overflow", 8);
  }
  r.require(rows * cols * width, "feature block");
  if (flags & 1) {
    r.require(rows * cols * width + rows * sizeof(std::uint32_t), "label block");
  }

  FeatureDataset ds;
  ds.name = path.stem().string();
  ds.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      ds.features(i, j) =
          dtype == 0 ? r.get<double>("feature block") : r.get<float>("feature block");
    }
  }
  if (flags & 1) {
    ds.labels.emplace(rows);
    for (auto& l : *ds.labels) {
      const auto raw = r.get<std::uint32_t>("label block");
      if (raw > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        throw FormatError("label out of range", static_cast<std::int64_t>(r.offset()) - 4);
      }
      l = static_cast<int>(raw);
    }
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after CLDF payload", static_cast<std::int64_t>(r.offset()));
  }
  if (!ds.features.allFinite()) throw FormatError("CLDF feature block has non-finite values");
  return ds;
}

FeatureDataset read_csv_features(const std::filesystem::path& path, bool has_labels) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const bool may_be_header = first_line;
    first_line = false;
    const auto cells = split_commas(line);
    std::vector<double> values;
    values.reserve(cells.size());
    const std::size_t n_features = has_labels ? cells.size() - 1 : cells.size();
    bool numeric = true;
    std::size_t bad_col = 0;
    for (std::size_t c = 0; c < n_features; ++c) {
      double v;
      if (!parse_double(cells[c], v)) {
        numeric = false;
        bad_col = c;
        break;
      }
      values.push_back(v);
    }
    int label = 0;
    if (numeric && has_labels && !parse_int(cells.back(), label)) {
      numeric = false;
      bad_col = cells.size() - 1;
    }
    if (!numeric) {
      if (may_be_header) continue;
      throw FormatError("CSV parse error: non-numeric cell at row " + std::to_string(line_no) +
                        ", column " + std::to_string(bad_col + 1));
    }
    if (rows.empty()) {
      width = values.size();
      if (width == 0) throw FormatError("CSV row " + std::to_string(line_no) + " has no features");
    } else if (values.size() != width) {
      throw FormatError("CSV parse error: ragged row " + std::to_string(line_no) + " has " +
                        std::to_string(values.size()) + " feature columns, expected " +
                        std::to_string(width));
    }
    rows.push_back(std::move(values));
    if (has_labels) labels.push_back(label);
  }
  if (rows.empty()) throw FormatError("CSV file '" + path.string() + "' has no data rows");

  FeatureDataset ds;
  ds.name = path.stem().string();
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  if (has_labels) ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

void write_csv_features(const FeatureDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  for (Eigen::Index c = 0; c < dataset.dim(); ++c) out << (c ? "," : "") << 'f' << c;
  if (dataset.labels) out << ",label";
  out << '\n';
  for (Eigen::Index r = 0; r < dataset.size(); ++r) {
    for (Eigen::Index c = 0; c < dataset.dim(); ++c) {
      out << (c ? "," : "") << dataset.features(r, c);
    }
    if (dataset.labels) out << ',' << (*dataset.labels)[static_cast<std::size_t>(r)];
    out << '\n';
  }
}

void standardize(FeatureDataset& dataset) {
  const double n = static_cast<double>(dataset.size());
  for (Eigen::Index c = 0; c < dataset.dim(); ++c) {
    auto col = dataset.features.col(c);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd > 0.0) col /= sd;
  }
}

FeatureDataset load_dataset(const std::filesystem::path& path, bool csv_has_labels) {
  if (path.extension() == ".csv") return read_csv_features(path, csv_has_labels);
  return read_cldf(path);
}

}  // namespace cludi
