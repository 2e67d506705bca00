#include "cyin/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "cyin/binary_io.hpp"
#include "cyin/errors.hpp"
#include "cyin/rng.hpp"

namespace cyin {

namespace io {

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path);
}

}  // namespace io

namespace {

constexpr char kMagic[] = "CYIN";
constexpr std::uint16_t kFormatVersion = 1;
constexpr double kLabelBound = 3.0;

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

std::string to_string(Task task) {
  return task == Task::Regression ? "regression" : "classification";
}

Task parse_task(const std::string& text) {
  if (text == "regression") return Task::Regression;
  if (text == "classification") return Task::Classification;
  throw ValidationError("unknown task '" + text + "' (expected regression|classification)");
}

void DatasetSpec::validate() const {
  if (num_modalities < 2) throw ValidationError("num_modalities must be >= 2");
  if (seq_len < 1) throw ValidationError("seq_len must be >= 1");
  if (static_cast<int>(feat_dims.size()) != num_modalities)
    throw ValidationError("feat_dims must list one channel count per modality");
  for (int c : feat_dims)
    if (c < 1) throw ValidationError("every feat_dims entry must be >= 1");
  if (latent_dim < 1) throw ValidationError("latent_dim must be >= 1");
  if (task == Task::Classification && num_classes < 2)
    throw ValidationError("num_classes must be >= 2 for classification");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
    throw ValidationError("noise_scale must be finite and >= 0");
  if (distractor_dim < 0) throw ValidationError("distractor_dim must be >= 0");
  if (num_samples < 1) throw ValidationError("num_samples must be >= 1");
}

std::string DatasetSpec::to_metadata() const {
  std::ostringstream os;
  os << "num_modalities=" << num_modalities << "\n";
  os << "seq_len=" << seq_len << "\n";
  os << "feat_dims=";
  for (std::size_t i = 0; i < feat_dims.size(); ++i) os << (i ? "," : "") << feat_dims[i];
  os << "\n";
  os << "latent_dim=" << latent_dim << "\n";
  os << "task=" << to_string(task) << "\n";
  os << "num_classes=" << num_classes << "\n";
  os << "noise_scale=" << format_double(noise_scale) << "\n";
  os << "distractor_dim=" << distractor_dim << "\n";
  os << "num_samples=" << num_samples << "\n";
  os << "seed=" << seed << "\n";
  return os.str();
}

DatasetSpec DatasetSpec::from_metadata(const std::string& text) {
  DatasetSpec spec;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("metadata line without '=': " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "num_modalities") spec.num_modalities = std::stoi(value);
      else if (key == "seq_len") spec.seq_len = std::stoi(value);
      else if (key == "feat_dims") spec.feat_dims = parse_int_list(value);
      else if (key == "latent_dim") spec.latent_dim = std::stoi(value);
      else if (key == "task") spec.task = parse_task(value);
      else if (key == "num_classes") spec.num_classes = std::stoi(value);
      else if (key == "noise_scale") spec.noise_scale = std::stod(value);
      else if (key == "distractor_dim") spec.distractor_dim = std::stoi(value);
      else if (key == "num_samples") spec.num_samples = std::stoull(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else throw ParseError("unknown metadata key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ParseError("bad metadata value for '" + key + "': " + value);
    }
  }
  return spec;
}

GeneratorParams make_generator_params(const DatasetSpec& spec) {
  spec.validate();
  Rng rng = Rng::substream(spec.seed, "generator");
  GeneratorParams p;
  p.noise_scale = spec.noise_scale;
  const int d = spec.latent_dim;
  // Factor k is loaded with weight 1/(1+k) in every modality, so the leading
  // factor dominates each modality and the modalities share their main axis.
  for (int u = 0; u < spec.num_modalities; ++u) {
    Matrix a = rng.normal_matrix(spec.feat_dims[u], d);
    for (int k = 0; k < d; ++k) a.col(k) /= static_cast<double>(1 + k);
    p.loadings.push_back(std::move(a));
  }
  for (int u = 0; u < spec.num_modalities; ++u) {
    Matrix dl(spec.feat_dims[u], spec.distractor_dim);
    if (spec.distractor_dim > 0) {
      dl = rng.normal_matrix(spec.feat_dims[u], spec.distractor_dim) *
           (0.5 / std::sqrt(static_cast<double>(spec.distractor_dim)));
    }
    p.distractor_loadings.push_back(std::move(dl));
  }
  Vector w = rng.normal_matrix(d, 1).col(0);
  p.label_weights = w * (1.5 / w.norm());
  if (spec.task == Task::Classification) p.class_map = rng.normal_matrix(spec.num_classes, d);
  return p;
}

std::vector<MultimodalSample> generate_dataset(const DatasetSpec& spec) {
  const GeneratorParams params = make_generator_params(spec);
  Rng rng = Rng::substream(spec.seed, "samples");
  const int d = spec.latent_dim;
  std::vector<MultimodalSample> out;
  out.reserve(spec.num_samples);
  for (std::size_t n = 0; n < spec.num_samples; ++n) {
    MultimodalSample s;
    s.sample_id = n;
    Vector z = rng.normal_matrix(d, 1).col(0);
    for (int u = 0; u < spec.num_modalities; ++u) {
      const Matrix& a = params.loadings[u];
      const Matrix& dl = params.distractor_loadings[u];
      Matrix tokens(spec.seq_len, spec.feat_dims[u]);
      const Vector shared = a * z;
      for (int i = 0; i < spec.seq_len; ++i) {
        Vector noise = rng.normal_matrix(spec.feat_dims[u], 1).col(0) * spec.noise_scale;
        Vector row = shared + noise;
        if (spec.distractor_dim > 0) row += dl * rng.normal_matrix(spec.distractor_dim, 1).col(0);
        tokens.row(i) = row.transpose();
      }
      // stored as f32 on disk; keep memory and file identical
      s.modalities.push_back(tokens.cast<float>().cast<double>());
    }
    if (spec.task == Task::Regression) {
      s.label = std::clamp(params.label_weights.dot(z), -kLabelBound, kLabelBound);
    } else {
      Vector scores = params.class_map * z;
      Eigen::Index best = 0;
      scores.maxCoeff(&best);
      s.label = static_cast<double>(best);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Dataset generate(const DatasetSpec& spec) { return Dataset{spec, generate_dataset(spec)}; }

double clamped_gaussian_mean(double mean, double var, double lo, double hi) {
  if (var <= 1e-300) return std::clamp(mean, lo, hi);
  const double s = std::sqrt(var);
  const double a = (lo - mean) / s;
  const double b = (hi - mean) / s;
  auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); };
  auto pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  return lo * cdf(a) + hi * (1.0 - cdf(b)) + mean * (cdf(b) - cdf(a)) + s * (pdf(a) - pdf(b));
}

RegressionOracle::RegressionOracle(DatasetSpec spec, GeneratorParams params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  if (spec_.task != Task::Regression)
    throw TaskMismatchError("bayes oracle supports the regression task only");
}

const RegressionOracle::Gain& RegressionOracle::gain_for(const std::vector<bool>& observed) {
  if (auto it = cache_.find(observed); it != cache_.end()) return it->second;
  const int d = spec_.latent_dim;
  const int L = spec_.seq_len;
  Eigen::Index obs_dim = 0;
  for (int u = 0; u < spec_.num_modalities; ++u)
    if (observed[u]) obs_dim += static_cast<Eigen::Index>(L) * spec_.feat_dims[u];

  Gain g;
  if (obs_dim == 0) {
    g.gain = Matrix::Zero(d, 0);
    g.covariance = Matrix::Identity(d, d);
    return cache_.emplace(observed, std::move(g)).first->second;
  }
  Matrix h(obs_dim, d);
  Matrix r = Matrix::Zero(obs_dim, obs_dim);
  const double s2 = params_.noise_scale * params_.noise_scale;
  Eigen::Index at = 0;
  for (int u = 0; u < spec_.num_modalities; ++u) {
    if (!observed[u]) continue;
    const int c = spec_.feat_dims[u];
    Matrix block = s2 * Matrix::Identity(c, c);
    if (spec_.distractor_dim > 0)
      block += params_.distractor_loadings[u] * params_.distractor_loadings[u].transpose();
    for (int i = 0; i < L; ++i) {
      h.middleRows(at, c) = params_.loadings[u];
      r.block(at, at, c, c) = block;
      at += c;
    }
  }
  // Joint-Gaussian conditioning through the pseudo-inverse, which stays
  // valid when the observation covariance is singular (noiseless data).
  const Matrix cov_x = h * h.transpose() + r;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(cov_x);
  cod.setThreshold(1e-11);
  const Matrix pinv = cod.pseudoInverse();
  g.gain = h.transpose() * pinv;
  g.covariance = Matrix::Identity(d, d) - g.gain * h;
  return cache_.emplace(observed, std::move(g)).first->second;
}

std::pair<double, double> RegressionOracle::projection_posterior(const MultimodalSample& sample,
                                                                 std::span<const bool> observed) {
  std::vector<bool> obs(static_cast<std::size_t>(spec_.num_modalities), true);
  if (!observed.empty()) {
    if (observed.size() != obs.size())
      throw DimensionError("observed flags must list every modality");
    obs.assign(observed.begin(), observed.end());
  }
  const Gain& g = gain_for(obs);
  Vector x(g.gain.cols());
  Eigen::Index at = 0;
  for (int u = 0; u < spec_.num_modalities; ++u) {
    if (!obs[u]) continue;
    const Matrix& tokens = sample.modalities[u];
    for (int i = 0; i < spec_.seq_len; ++i) {
      x.segment(at, tokens.cols()) = tokens.row(i).transpose();
      at += tokens.cols();
    }
  }
  const Vector& w = params_.label_weights;
  const double mean = g.gain.cols() ? w.dot(g.gain * x) : 0.0;
  const double var = std::max(0.0, w.dot(g.covariance * w));
  return {mean, var};
}

double RegressionOracle::predict(const MultimodalSample& sample, std::span<const bool> observed) {
  auto [mean, var] = projection_posterior(sample, observed);
  return clamped_gaussian_mean(mean, var, -kLabelBound, kLabelBound);
}

double bayes_oracle_regression(const MultimodalSample& sample, const DatasetSpec& spec,
                               const GeneratorParams& params, std::span<const bool> observed) {
  RegressionOracle oracle(spec, params);
  return oracle.predict(sample, observed);
}

std::filesystem::path metadata_path(const std::filesystem::path& dataset_path) {
  return dataset_path.string() + ".meta";
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  const DatasetSpec& spec = data.spec;
  spec.validate();
  if (data.samples.size() != spec.num_samples)
    throw DimensionError("sample count " + std::to_string(data.samples.size()) +
                         " differs from spec num_samples " + std::to_string(spec.num_samples));
  io::ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.uint<std::uint16_t>(kFormatVersion);
  w.uint<std::uint16_t>(static_cast<std::uint16_t>(spec.num_modalities));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(spec.seq_len));
  for (int c : spec.feat_dims) w.uint<std::uint32_t>(static_cast<std::uint32_t>(c));
  w.uint<std::uint64_t>(spec.num_samples);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(spec.task));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(spec.num_classes));
  for (const auto& s : data.samples) {
    if (static_cast<int>(s.modalities.size()) != spec.num_modalities)
      throw DimensionError("sample " + std::to_string(s.sample_id) + " has " +
                           std::to_string(s.modalities.size()) + " modalities, expected " +
                           std::to_string(spec.num_modalities));
    if (spec.task == Task::Regression) {
      w.f64(s.label);
    } else {
      if (s.class_label() < 0 || s.class_label() >= spec.num_classes)
        throw ValidationError("class label out of range in sample " + std::to_string(s.sample_id));
      w.uint<std::uint32_t>(static_cast<std::uint32_t>(s.class_label()));
    }
    for (int u = 0; u < spec.num_modalities; ++u) {
      const Matrix& m = s.modalities[u];
      if (m.rows() != spec.seq_len || m.cols() != spec.feat_dims[u])
        throw DimensionError("sample " + std::to_string(s.sample_id) + " modality " +
                             std::to_string(u) + " shape mismatch: expected " +
                             std::to_string(spec.seq_len) + "x" + std::to_string(spec.feat_dims[u]) +
                             ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(i, j)));
    }
  }
  io::write_file(path.string(), w.data());
}

void write_dataset_with_metadata(const Dataset& data, const std::filesystem::path& path) {
  write_dataset(data, path);
  std::ofstream meta(metadata_path(path));
  if (!meta) throw Error("cannot write metadata sidecar for " + path.string());
  meta << data.spec.to_metadata();
}

Dataset read_dataset(const std::filesystem::path& path) {
  const std::vector<char> bytes = io::read_file(path.string());
  io::ByteReader r(bytes.data(), bytes.size(), "dataset " + path.string());
  const std::string magic = r.bytes(4, "magic");
  if (magic != std::string_view(kMagic, 4))
    throw ParseError("dataset " + path.string() + ": bad magic bytes (expected \"CYIN\")");
  const auto version = r.uint<std::uint16_t>("format version");
  if (version != kFormatVersion)
    throw ParseError("dataset " + path.string() + ": unsupported format version " +
                     std::to_string(version));

  Dataset data;
  DatasetSpec& spec = data.spec;
  spec.num_modalities = r.uint<std::uint16_t>("modality count");
  spec.seq_len = static_cast<int>(r.uint<std::uint32_t>("sequence length"));
  spec.feat_dims.clear();
  for (int u = 0; u < spec.num_modalities; ++u)
    spec.feat_dims.push_back(static_cast<int>(r.uint<std::uint32_t>("channel count")));
  spec.num_samples = r.uint<std::uint64_t>("sample count");
  const auto task = r.uint<std::uint8_t>("task");
  if (task > 1) throw ParseError("dataset " + path.string() + ": unknown task code " + std::to_string(task));
  spec.task = static_cast<Task>(task);
  spec.num_classes = static_cast<int>(r.uint<std::uint32_t>("class count"));
  if (spec.num_modalities < 2 || spec.seq_len < 1 ||
      std::any_of(spec.feat_dims.begin(), spec.feat_dims.end(), [](int c) { return c < 1; }))
    throw ParseError("dataset " + path.string() + ": invalid tensor shape in header");

  std::size_t per_sample = spec.task == Task::Regression ? 8 : 4;
  for (int c : spec.feat_dims) per_sample += 4ull * static_cast<std::size_t>(spec.seq_len) * c;
  const std::size_t expected = r.offset() + per_sample * spec.num_samples;
  if (bytes.size() < expected)
    throw ParseError("dataset " + path.string() + ": truncated: expected " +
                     std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw ParseError("dataset " + path.string() + ": " + std::to_string(bytes.size() - expected) +
                     " trailing bytes after the last sample");

  data.samples.reserve(spec.num_samples);
  for (std::size_t n = 0; n < spec.num_samples; ++n) {
    MultimodalSample s;
    s.sample_id = n;
    if (spec.task == Task::Regression) {
      s.label = r.f64("label");
    } else {
      const auto cls = r.uint<std::uint32_t>("label");
      if (static_cast<int>(cls) >= spec.num_classes)
        throw ParseError("dataset " + path.string() + ": class label " + std::to_string(cls) +
                         " out of range in sample " + std::to_string(n));
      s.label = static_cast<double>(cls);
    }
    for (int u = 0; u < spec.num_modalities; ++u) {
      Matrix m(spec.seq_len, spec.feat_dims[u]);
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f32("tensor");
      s.modalities.push_back(std::move(m));
    }
    data.samples.push_back(std::move(s));
  }

  const auto meta = metadata_path(path);
  if (std::filesystem::exists(meta)) {
    std::ifstream in(meta);
    std::stringstream ss;
    ss << in.rdbuf();
    const DatasetSpec side = DatasetSpec::from_metadata(ss.str());
    if (side.num_modalities != spec.num_modalities || side.seq_len != spec.seq_len ||
        side.feat_dims != spec.feat_dims || side.task != spec.task ||
        side.num_samples != spec.num_samples || side.num_classes != spec.num_classes)
      throw ParseError("metadata sidecar " + meta.string() + " disagrees with the binary header");
    spec.latent_dim = side.latent_dim;
    spec.noise_scale = side.noise_scale;
    spec.distractor_dim = side.distractor_dim;
    spec.seed = side.seed;
  }
  return data;
}

Dataset subset(const Dataset& data, std::size_t begin, std::size_t end) {
  if (begin > end || end > data.samples.size()) throw DimensionError("subset range out of bounds");
  Dataset out;
  out.spec = data.spec;
  out.samples.assign(data.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     data.samples.begin() + static_cast<std::ptrdiff_t>(end));
  out.spec.num_samples = out.samples.size();
  return out;
}

}  // namespace cyin
