#include "disent/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "disent/csv.hpp"
#include "disent/errors.hpp"

namespace disent {

namespace {

// Separate deterministic streams for "world" (mixing matrices) and draws.
std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

std::vector<double> normal_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = unit(rng);
  return v;
}

}  // namespace

Tensor Dataset::features(std::span<const std::size_t> indices) const {
  Tensor out({indices.size(), feature_dim});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& x = samples.at(indices[r]).features_x;
    std::copy(x.begin(), x.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * feature_dim));
  }
  return out;
}

Tensor Dataset::features() const {
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), 0);
  return features(all);
}

std::vector<int> Dataset::labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(samples.at(i).class_y);
  return out;
}

Tensor Dataset::attributes(std::span<const std::size_t> indices) const {
  Tensor out({indices.size(), num_attrs});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    for (std::size_t c = 0; c < num_attrs; ++c) {
      out.at(r, c) = samples.at(indices[r]).attrs_s[c];
    }
  }
  return out;
}

Dataset gen_factor_dataset(const FactorSpec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.num_classes == 0 || spec.feature_dim == 0) {
    throw std::invalid_argument("factor spec needs K >= 1 and D >= 1");
  }
  if (n < spec.num_classes) {
    throw std::invalid_argument("need at least K=" + std::to_string(spec.num_classes) +
                                " samples, got " + std::to_string(n));
  }
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
  if (spec.dependency_rho < 0.0 || spec.dependency_rho > 1.0) {
    throw std::invalid_argument("dependency_rho must lie in [0,1]");
  }

  const std::size_t D = spec.feature_dim, K = spec.num_classes, N = spec.num_attrs,
                    L = spec.latent_dim;
  auto world = stream(seed, 1);
  // Column-major storage: column j of a mixing matrix is contiguous.
  const auto class_mix = normal_vector(D * K, world);
  const auto attr_mix = normal_vector(D * N, world);
  const auto latent_mix = normal_vector(D * L, world);

  auto rng = stream(seed, 2);
  std::vector<int> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = static_cast<int>(i % K);
  std::shuffle(ys.begin(), ys.end(), rng);

  std::uniform_real_distribution<double> unit_uniform(0.0, 1.0);
  std::normal_distribution<double> unit_normal(0.0, 1.0);

  Dataset ds;
  ds.num_classes = K;
  ds.num_attrs = N;
  ds.feature_dim = D;
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.subject_id = static_cast<int>(i);
    s.class_y = ys[i];
    s.attrs_s.resize(N);
    for (std::size_t b = 0; b < N; ++b) {
      const double copy_draw = unit_uniform(rng);
      const double coin = unit_uniform(rng);
      const int from_y = (s.class_y >> b) & 1;
      s.attrs_s[b] = copy_draw < spec.dependency_rho ? from_y : (coin < 0.5 ? 1 : 0);
    }
    s.latent_true.resize(L);
    for (auto& v : s.latent_true) v = unit_normal(rng);

    s.features_x.assign(D, 0.0);
    for (std::size_t d = 0; d < D; ++d) {
      double x = spec.class_scale * class_mix[static_cast<std::size_t>(s.class_y) * D + d];
      for (std::size_t b = 0; b < N; ++b) x += spec.attr_scale * attr_mix[b * D + d] * s.attrs_s[b];
      for (std::size_t k = 0; k < L; ++k) x += spec.latent_scale * latent_mix[k * D + d] * s.latent_true[k];
      s.features_x[d] = x;
    }
    for (auto& x : s.features_x) x += spec.noise_sigma * unit_normal(rng);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset gen_identity_expression_dataset(const IdentityExpressionSpec& spec, std::uint64_t seed) {
  if (spec.num_subjects < 2) throw std::invalid_argument("need at least 2 subjects");
  if (spec.num_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (spec.repetitions == 0 || spec.feature_dim == 0 || spec.subject_rank == 0) {
    throw std::invalid_argument("repetitions, feature_dim and subject_rank must be positive");
  }
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");

  const std::size_t D = spec.feature_dim, R = spec.subject_rank;
  auto world = stream(seed, 3);
  const auto basis = normal_vector(D * R, world);  // column-major D x R
  std::vector<std::vector<double>> class_offsets;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    auto v = normal_vector(D, world);
    for (auto& x : v) x *= spec.class_scale;
    class_offsets.push_back(std::move(v));
  }
  std::vector<std::vector<double>> subject_codes;
  std::vector<std::vector<double>> subject_offsets;
  const double subject_gain = spec.subject_scale / std::sqrt(static_cast<double>(R));
  for (std::size_t j = 0; j < spec.num_subjects; ++j) {
    auto z = normal_vector(R, world);
    std::vector<double> offset(D, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t d = 0; d < D; ++d) offset[d] += subject_gain * basis[r * D + d] * z[r];
    }
    subject_codes.push_back(std::move(z));
    subject_offsets.push_back(std::move(offset));
  }

  auto rng = stream(seed, 4);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.num_attrs = 0;
  ds.feature_dim = D;
  for (std::size_t j = 0; j < spec.num_subjects; ++j) {
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
      for (std::size_t r = 0; r < spec.repetitions; ++r) {
        Sample s;
        s.subject_id = static_cast<int>(j);
        s.class_y = static_cast<int>(k);
        s.latent_true = subject_codes[j];
        s.features_x.resize(D);
        for (std::size_t d = 0; d < D; ++d) {
          s.features_x[d] = subject_offsets[j][d] + class_offsets[k][d] +
                            spec.noise_sigma * unit_normal(rng);
        }
        ds.samples.push_back(std::move(s));
      }
    }
  }
  return ds;
}

std::vector<std::vector<std::size_t>> subject_independent_split(const Dataset& dataset,
                                                                std::size_t fold_count,
                                                                std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    by_subject[dataset.samples[i].subject_id].push_back(i);
  }
  if (fold_count == 0) throw std::invalid_argument("fold_count must be positive");
  if (fold_count > by_subject.size()) {
    throw std::invalid_argument(std::to_string(fold_count) + " folds requested but only " +
                                std::to_string(by_subject.size()) + " subjects");
  }
  std::vector<int> subjects;
  for (const auto& [id, _] : by_subject) subjects.push_back(id);
  auto rng = stream(seed, 5);
  std::shuffle(subjects.begin(), subjects.end(), rng);

  std::vector<std::vector<std::size_t>> folds(fold_count);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    auto& fold = folds[i % fold_count];
    const auto& members = by_subject[subjects[i]];
    fold.insert(fold.end(), members.begin(), members.end());
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::ostringstream os;
  os << "subject_id,y";
  for (std::size_t b = 0; b < dataset.num_attrs; ++b) os << ",s" << b;
  for (std::size_t d = 0; d < dataset.feature_dim; ++d) os << ",x" << d;
  os << '\n';
  for (const auto& s : dataset.samples) {
    os << s.subject_id << ',' << s.class_y;
    for (int bit : s.attrs_s) os << ',' << bit;
    for (double x : s.features_x) os << ',' << format_double(x);
    os << '\n';
  }
  return os.str();
}

void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  out << dataset_to_csv(dataset);
  if (!out) throw IoError("failed writing dataset " + path.string());
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "subject_id" || header[1] != "y") {
    throw IoError("dataset CSV header must start with subject_id,y");
  }
  Dataset ds;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto& name = header[c];
    if (!name.empty() && name[0] == 's' && ds.feature_dim == 0) {
      ++ds.num_attrs;
    } else if (!name.empty() && name[0] == 'x') {
      ++ds.feature_dim;
    } else {
      throw IoError("unexpected dataset CSV column '" + name + "'");
    }
  }
  const std::size_t width = 2 + ds.num_attrs + ds.feature_dim;
  std::size_t line_no = 1;
  int max_class = -1;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != width) {
        throw IoError("dataset CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(width) + " fields, got " + std::to_string(fields.size()));
      }
      Sample s;
      s.subject_id = std::stoi(fields[0]);
      s.class_y = std::stoi(fields[1]);
      if (s.class_y < 0) throw IoError("dataset CSV line " + std::to_string(line_no) + ": negative y");
      for (std::size_t b = 0; b < ds.num_attrs; ++b) {
        const int bit = std::stoi(fields[2 + b]);
        if (bit != 0 && bit != 1) {
          throw IoError("dataset CSV line " + std::to_string(line_no) + ": attribute not 0/1");
        }
        s.attrs_s.push_back(bit);
      }
      for (std::size_t d = 0; d < ds.feature_dim; ++d) {
        s.features_x.push_back(std::stod(fields[2 + ds.num_attrs + d]));
      }
      max_class = std::max(max_class, s.class_y);
      ds.samples.push_back(std::move(s));
    }
  } catch (const std::logic_error& e) {  // stoi/stod failures
    throw IoError("dataset CSV line " + std::to_string(line_no) + ": " + e.what());
  }
  ds.num_classes = static_cast<std::size_t>(max_class + 1);
  return ds;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv(buf.str());
}

double empirical_mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ContractViolation("mutual information needs equal-length nonempty samples");
  }
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0 / n;
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [key, p] : joint) mi += p * std::log(p / (pa[key.first] * pb[key.second]));
  return std::max(0.0, mi);
}

}  // namespace disent
