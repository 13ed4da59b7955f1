#include "disent/probe.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "disent/csv.hpp"
#include "disent/errors.hpp"

namespace disent {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat to_eigen(const Tensor& t) {
  Mat m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t.at(r, c);
  }
  return m;
}

Mat standardized(const LogisticProbe& p, const Tensor& features) {
  if (features.cols() != p.mean.size()) {
    throw ContractViolation("probe: feature width " + std::to_string(features.cols()) +
                            " does not match " + std::to_string(p.mean.size()));
  }
  Mat x = to_eigen(features);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    x.col(c) = (x.col(c).array() - p.mean[c]) * p.inv_std[c];
  }
  return x;
}

Mat softmax_rows(const Mat& logits) {
  Mat p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double top = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - top).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

Tensor from_eigen(const Mat& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.at(r, c) = m(r, c);
  }
  return t;
}

Tensor take_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  Tensor out({rows.size(), t.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < t.cols(); ++c) out.at(i, c) = t.at(rows[i], c);
  }
  return out;
}

void check_split(const ProbeSplit& split, std::size_t n) {
  std::set<std::size_t> train(split.train.begin(), split.train.end());
  for (auto i : split.test) {
    if (train.count(i)) throw ContractViolation("probe split: sample " + std::to_string(i) + " in both train and test");
  }
  for (auto i : split.train) {
    if (i >= n) throw ContractViolation("probe split: index out of range");
  }
  for (auto i : split.test) {
    if (i >= n) throw ContractViolation("probe split: index out of range");
  }
  if (split.train.empty() || split.test.empty()) throw ContractViolation("probe split: empty side");
}

}  // namespace

std::vector<int> LogisticProbe::predict(const Tensor& features) const {
  const Mat x = standardized(*this, features);
  const Mat logits = (x * to_eigen(W)).rowwise() + to_eigen(b).row(0);
  std::vector<int> out(x.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    logits.row(r).maxCoeff(&best);
    out[r] = static_cast<int>(best);
  }
  return out;
}

double LogisticProbe::accuracy(const Tensor& features, const std::vector<int>& labels) const {
  if (labels.size() != features.rows()) throw ContractViolation("probe: label count mismatch");
  const auto pred = predict(features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

LogisticProbe train_logistic_probe(const Tensor& features, const std::vector<int>& labels,
                                   double l2_weight, std::size_t iters) {
  const std::size_t n = features.rows(), D = features.cols();
  if (labels.size() != n || n == 0) throw std::invalid_argument("probe: need one label per row");
  if (l2_weight < 0.0) throw std::invalid_argument("probe: l2_weight must be >= 0");
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw std::invalid_argument("probe: need at least 2 classes present");
  if (*distinct.begin() < 0) throw std::invalid_argument("probe: labels must be non-negative");
  const auto K = static_cast<std::size_t>(*distinct.rbegin()) + 1;

  LogisticProbe p;
  p.num_classes = K;
  p.mean.assign(D, 0.0);
  p.inv_std.assign(D, 0.0);
  Mat raw = to_eigen(features);
  for (std::size_t c = 0; c < D; ++c) {
    p.mean[c] = raw.col(c).mean();
    const double var = (raw.col(c).array() - p.mean[c]).square().mean();
    p.inv_std[c] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
  }
  const Mat x = standardized(p, features);

  Mat onehot = Mat::Zero(n, K);
  for (std::size_t i = 0; i < n; ++i) onehot(i, labels[i]) = 1.0;

  // Smoothness of the mean cross-entropy in (W, b): half the top eigenvalue
  // of the augmented second-moment matrix.
  Mat aug(n, D + 1);
  aug.leftCols(D) = x;
  aug.col(D).setOnes();
  const Mat gram = aug.transpose() * aug / static_cast<double>(n);
  const double top = Eigen::SelfAdjointEigenSolver<Mat>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double step = 1.0 / (0.5 * top + l2_weight);

  Mat W = Mat::Zero(D, K);
  Eigen::RowVectorXd bias = Eigen::RowVectorXd::Zero(K);
  for (p.iterations = 0; p.iterations < iters; ++p.iterations) {
    const Mat probs = softmax_rows((x * W).rowwise() + bias);
    const Mat g = (probs - onehot) / static_cast<double>(n);
    const Mat gW = x.transpose() * g + l2_weight * W;
    const Eigen::RowVectorXd gb = g.colwise().sum();
    p.final_grad_norm = std::sqrt(gW.squaredNorm() + gb.squaredNorm());
    if (p.final_grad_norm <= 1e-6) break;
    W -= step * gW;
    bias -= step * gb;
  }
  p.W = from_eigen(W);
  p.b = from_eigen(Mat(bias));
  return p;
}

std::string ProbeReport::to_json() const {
  nlohmann::ordered_json j;
  j["acc_y_given_d"] = acc_y_given_d;
  j["acc_s_given_d"] = acc_s_given_d;
  j["acc_y_given_l"] = acc_y_given_l;
  j["acc_s_given_l"] = acc_s_given_l;
  j["chance_y"] = chance_y;
  j["chance_s"] = chance_s;
  j["chance_s_bits"] = chance_s_bits;
  j["acc_s_given_d_bits"] = acc_s_given_d_bits;
  j["acc_s_given_l_bits"] = acc_s_given_l_bits;
  return j.dump(2);
}

ProbeReport probe_codes(const Tensor& d, const Tensor& l, const Dataset& dataset,
                        const ProbeSplit& split, const ProbeConfig& config) {
  check_split(split, dataset.size());
  if (d.rows() != dataset.size() || l.rows() != dataset.size()) {
    throw ContractViolation("probe_codes: code rows do not match the dataset");
  }
  const Tensor d_train = take_rows(d, split.train), d_test = take_rows(d, split.test);
  const Tensor l_train = take_rows(l, split.train), l_test = take_rows(l, split.test);
  const auto y_train = dataset.labels(split.train), y_test = dataset.labels(split.test);

  const auto score = [&](const Tensor& tr, const std::vector<int>& ytr, const Tensor& te,
                         const std::vector<int>& yte) {
    return train_logistic_probe(tr, ytr, config.l2_weight, config.iters).accuracy(te, yte);
  };

  ProbeReport r;
  r.chance_y = 1.0 / static_cast<double>(dataset.num_classes);
  r.acc_y_given_d = score(d_train, y_train, d_test, y_test);
  r.acc_y_given_l = score(l_train, y_train, l_test, y_test);
  const Tensor s_train = dataset.attributes(split.train), s_test = dataset.attributes(split.test);
  for (std::size_t bit = 0; bit < dataset.num_attrs; ++bit) {
    std::vector<int> btr(split.train.size()), bte(split.test.size());
    for (std::size_t i = 0; i < btr.size(); ++i) btr[i] = static_cast<int>(s_train.at(i, bit));
    double ones = 0.0;
    for (std::size_t i = 0; i < bte.size(); ++i) {
      bte[i] = static_cast<int>(s_test.at(i, bit));
      ones += bte[i];
    }
    const double frac = ones / static_cast<double>(bte.size());
    r.chance_s_bits.push_back(std::max(frac, 1.0 - frac));
    r.acc_s_given_d_bits.push_back(score(d_train, btr, d_test, bte));
    r.acc_s_given_l_bits.push_back(score(l_train, btr, l_test, bte));
  }
  const auto avg = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  r.chance_s = avg(r.chance_s_bits);
  r.acc_s_given_d = avg(r.acc_s_given_d_bits);
  r.acc_s_given_l = avg(r.acc_s_given_l_bits);
  return r;
}

ProbeReport probe_accuracy_matrix(const FLFModel& model, const Dataset& dataset,
                                  const ProbeSplit& split, const ProbeConfig& config) {
  const auto codes = encode_decompose(model, dataset.features());
  return probe_codes(codes.d, codes.l, dataset, split, config);
}

void dump_embeddings(const FLFModel& model, const Dataset& dataset,
                     const std::filesystem::path& path) {
  const auto codes = encode_decompose(model, dataset.features());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "subject_id,y";
  for (std::size_t i = 0; i < dataset.num_attrs; ++i) out << ",s" << i;
  for (std::size_t i = 0; i < codes.d.cols(); ++i) out << ",d" << i;
  for (std::size_t i = 0; i < codes.l.cols(); ++i) out << ",l" << i;
  out << '\n';
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const auto& s = dataset.samples[r];
    out << s.subject_id << ',' << s.class_y;
    for (int bit : s.attrs_s) out << ',' << bit;
    for (std::size_t c = 0; c < codes.d.cols(); ++c) out << ',' << format_double(codes.d.at(r, c));
    for (std::size_t c = 0; c < codes.l.cols(); ++c) out << ',' << format_double(codes.l.at(r, c));
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace disent
