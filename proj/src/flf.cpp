#include "disent/flf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "disent/csv.hpp"
#include "disent/errors.hpp"

namespace disent {

namespace {

constexpr std::array<const char*, 6> kPrefixes = {"Dis.", "C_l.", "C_d.", "E_d.", "E_l.", "Dec."};

const char* prefix_of(FLFComponent c) { return kPrefixes[static_cast<std::size_t>(c)]; }

// Freezes every component not listed in `trainable`.
void freeze_except(Graph& graph, std::initializer_list<FLFComponent> trainable) {
  for (std::size_t i = 0; i < kPrefixes.size(); ++i) {
    const auto c = static_cast<FLFComponent>(i);
    if (std::find(trainable.begin(), trainable.end(), c) == trainable.end()) {
      graph.freeze_prefix(kPrefixes[i]);
    }
  }
}

GradientMap select(const GradientMap& grads, FLFComponent c) {
  GradientMap out;
  const std::string prefix = prefix_of(c);
  for (const auto& [name, g] : grads) {
    if (name.starts_with(prefix)) out.emplace(name, g);
  }
  return out;
}

Var cd_term(Graph& graph, const FLFModel& m, Var d, const std::vector<int>& y) {
  return softmax_cross_entropy(m.c_d().forward(graph, m.params(), d), y);
}

Var dis_term(Graph& graph, const FLFModel& m, Var d, Var s) {
  return binary_cross_entropy(m.dis().forward(graph, m.params(), d), s);
}

Var cl_term(Graph& graph, const FLFModel& m, Var l, const std::vector<int>& y) {
  return softmax_cross_entropy(m.c_l().forward(graph, m.params(), l), y);
}

Var rec_term(Graph& graph, const FLFModel& m, Var x, Var d, Var s, Var l) {
  return squared_error(m.decode(graph, d, s, l), x);
}

void check_batch(const FLFModel& m, const FLFBatch& b) {
  const auto& cfg = m.config();
  if (b.x.cols() != cfg.input_dim || b.s.cols() != cfg.num_attrs || b.x.rows() != b.s.rows() ||
      b.y.size() != b.x.rows()) {
    throw ContractViolation("FLF batch shape mismatch: x " + b.x.shape_string() + ", s " +
                            b.s.shape_string() + ", " + std::to_string(b.y.size()) + " labels");
  }
}

template <typename F>
double run_component(FLFComponent c, F&& body) {
  try {
    const double value = body();
    if (!std::isfinite(value)) throw NumericError("loss is " + std::to_string(value));
    return value;
  } catch (const NumericError& e) {
    throw TrainingError("divergence in " + to_string(c) + ": " + e.what());
  }
}

}  // namespace

double alpha_schedule(std::int64_t iter, const TrainSchedule& schedule) {
  if (schedule.ramp_iters <= 0) throw std::invalid_argument("ramp_iters must be positive");
  if (iter < 0) throw std::invalid_argument("iter must be non-negative");
  if (iter >= schedule.ramp_iters) return schedule.alpha_max;
  return schedule.alpha_max * static_cast<double>(iter) / static_cast<double>(schedule.ramp_iters);
}

std::string to_string(FLFComponent component) {
  switch (component) {
    case FLFComponent::kDis: return "Dis";
    case FLFComponent::kCl: return "C_l";
    case FLFComponent::kCd: return "C_d";
    case FLFComponent::kEd: return "E_d";
    case FLFComponent::kEl: return "E_l";
    case FLFComponent::kDec: return "Dec";
  }
  return "unknown";
}

FLFModel::FLFModel(FLFConfig config, std::uint64_t seed) : config_(config) {
  const auto& c = config_;
  if (c.input_dim == 0 || c.num_classes < 2 || c.dim_d == 0 || c.dim_l == 0 || c.hidden == 0) {
    throw std::invalid_argument("FLF dimensions must be positive and K >= 2");
  }
  if (c.num_attrs == 0) throw std::invalid_argument("FLF needs at least one attribute");
  alpha_schedule(0, c.schedule);  // validates ramp_iters
  e_d_ = Mlp("E_d", {c.input_dim, c.hidden, c.hidden, c.dim_d}, c.slope);
  e_l_ = Mlp("E_l", {c.input_dim, c.hidden, c.hidden, c.dim_l}, c.slope);
  dec_ = Mlp("Dec", {c.dim_d + c.num_attrs + c.dim_l, c.hidden, c.hidden, c.input_dim}, c.slope);
  dis_ = Mlp("Dis", {c.dim_d, c.hidden, c.hidden, c.num_attrs}, c.slope);
  c_d_ = Mlp("C_d", {c.dim_d, c.hidden, c.hidden, c.num_classes}, c.slope);
  c_l_ = Mlp("C_l", {c.dim_l, c.hidden, c.hidden, c.num_classes}, c.slope);
  std::mt19937_64 rng(seed);
  for (const Mlp* net : {&e_d_, &e_l_, &dec_, &dis_, &c_d_, &c_l_}) net->init(params_, rng);
}

Var FLFModel::decode(Graph& graph, Var d, Var s, Var l) const {
  return dec_.forward(graph, params_, concat(concat(d, s, 1), l, 1));
}

Decomposition encode_decompose(const FLFModel& model, const Tensor& x) {
  Graph graph;
  Var in = graph.constant(x);
  return {model.e_d().forward(graph, model.params(), in).value(),
          model.e_l().forward(graph, model.params(), in).value()};
}

FLFBatch make_flf_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  return {dataset.features(indices), dataset.attributes(indices), dataset.labels(indices)};
}

Var loss_cd(Graph& graph, const FLFModel& model, Var x, const std::vector<int>& y) {
  return cd_term(graph, model, model.e_d().forward(graph, model.params(), x), y);
}

Var loss_dis(Graph& graph, const FLFModel& model, Var x, Var s) {
  return dis_term(graph, model, model.e_d().forward(graph, model.params(), x), s);
}

Var loss_cl(Graph& graph, const FLFModel& model, Var x, const std::vector<int>& y) {
  return cl_term(graph, model, model.e_l().forward(graph, model.params(), x), y);
}

Var loss_rec(Graph& graph, const FLFModel& model, Var x, Var s) {
  Var d = model.e_d().forward(graph, model.params(), x);
  Var l = model.e_l().forward(graph, model.params(), x);
  return rec_term(graph, model, x, d, s, l);
}

double loss_cd(const FLFModel& model, const FLFBatch& batch) {
  check_batch(model, batch);
  Graph g;
  return loss_cd(g, model, g.constant(batch.x), batch.y).item();
}

double loss_dis(const FLFModel& model, const FLFBatch& batch) {
  check_batch(model, batch);
  Graph g;
  return loss_dis(g, model, g.constant(batch.x), g.constant(batch.s)).item();
}

double loss_cl(const FLFModel& model, const FLFBatch& batch) {
  check_batch(model, batch);
  Graph g;
  return loss_cl(g, model, g.constant(batch.x), batch.y).item();
}

double loss_rec(const FLFModel& model, const FLFBatch& batch) {
  check_batch(model, batch);
  Graph g;
  return loss_rec(g, model, g.constant(batch.x), g.constant(batch.s)).item();
}

FLFOptimizers::FLFOptimizers(const AdamConfig& config)
    : dis(config), c_l(config), c_d(config), e_d(config), e_l(config), dec(config) {}

FLFStepMetrics flf_train_step(FLFModel& model, FLFOptimizers& opt, const FLFBatch& batch,
                              std::int64_t iter) {
  check_batch(model, batch);
  const auto& sched = model.config().schedule;
  FLFStepMetrics m;
  m.iter = iter;
  m.alpha_adv = alpha_schedule(iter, sched);
  ParamStore& params = model.params();

  // Critics see the current codes as constants.
  Decomposition codes;

  m.loss_dis = run_component(FLFComponent::kDis, [&] {
    codes = encode_decompose(model, batch.x);
    Graph g;
    freeze_except(g, {FLFComponent::kDis});
    Var loss = dis_term(g, model, g.constant(codes.d), g.constant(batch.s));
    opt.dis.step(params, g.backward(loss));
    return loss.item();
  });

  m.loss_cl = run_component(FLFComponent::kCl, [&] {
    Graph g;
    freeze_except(g, {FLFComponent::kCl});
    Var loss = cl_term(g, model, g.constant(codes.l), batch.y);
    opt.c_l.step(params, g.backward(loss));
    return loss.item();
  });

  m.loss_cd = run_component(FLFComponent::kCd, [&] {
    Graph g;
    freeze_except(g, {FLFComponent::kCd});
    Var loss = cd_term(g, model, g.constant(codes.d), batch.y);
    opt.c_d.step(params, g.backward(loss));
    return loss.item();
  });

  m.objective_ed = run_component(FLFComponent::kEd, [&] {
    Graph g;
    if (model.config().detach_cd) {
      freeze_except(g, {FLFComponent::kEd});
    } else {
      freeze_except(g, {FLFComponent::kEd, FLFComponent::kCd});
    }
    Var x = g.constant(batch.x);
    Var s = g.constant(batch.s);
    Var d = model.e_d().forward(g, params, x);
    Var objective = cd_term(g, model, d, batch.y) - m.alpha_adv * dis_term(g, model, d, s) +
                    sched.beta * rec_term(g, model, x, d, s, g.constant(codes.l));
    const auto grads = g.backward(objective);
    opt.e_d.step(params, select(grads, FLFComponent::kEd));
    if (!model.config().detach_cd) opt.c_d.step(params, select(grads, FLFComponent::kCd));
    return objective.item();
  });

  codes.d = encode_decompose(model, batch.x).d;
  m.objective_el = run_component(FLFComponent::kEl, [&] {
    Graph g;
    freeze_except(g, {FLFComponent::kEl});
    Var x = g.constant(batch.x);
    Var s = g.constant(batch.s);
    Var l = model.e_l().forward(g, params, x);
    Var objective = -cl_term(g, model, l, batch.y) +
                    sched.lambda * rec_term(g, model, x, g.constant(codes.d), s, l);
    opt.e_l.step(params, g.backward(objective));
    return objective.item();
  });

  codes.l = encode_decompose(model, batch.x).l;
  m.loss_rec = run_component(FLFComponent::kDec, [&] {
    Graph g;
    freeze_except(g, {FLFComponent::kDec});
    Var loss = rec_term(g, model, g.constant(batch.x), g.constant(codes.d), g.constant(batch.s),
                        g.constant(codes.l));
    opt.dec.step(params, g.backward(loss));
    return loss.item();
  });
  return m;
}

FLFTrainer::FLFTrainer(const Dataset& train, FLFConfig config, FLFRunConfig run,
                       std::uint64_t seed)
    : train_(train),
      run_(run),
      model_(config, seed),
      optimizers_(config.adam),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  if (run_.batch_size == 0 || run_.batch_size > train_.size()) {
    throw std::invalid_argument("batch_size must be in [1, dataset size]");
  }
  if (run_.iters < 0 || run_.log_every <= 0) {
    throw std::invalid_argument("iters must be >= 0 and log_every > 0");
  }
  order_.resize(train_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::shuffle(order_.begin(), order_.end(), rng_);
}

FLFStepMetrics FLFTrainer::step() {
  std::vector<std::size_t> idx;
  idx.reserve(run_.batch_size);
  while (idx.size() < run_.batch_size) {
    if (pos_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    idx.push_back(order_[pos_++]);
  }
  return flf_train_step(model_, optimizers_, make_flf_batch(train_, idx), iter_++);
}

std::vector<FLFStepMetrics> FLFTrainer::run() {
  std::vector<FLFStepMetrics> rows;
  while (iter_ < run_.iters) {
    auto m = step();
    if (m.iter % run_.log_every == 0 || iter_ == run_.iters) rows.push_back(m);
  }
  return rows;
}

void write_flf_metrics_csv(const std::filesystem::path& path,
                           const std::vector<FLFStepMetrics>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iter,loss_cd,loss_dis,loss_cl,loss_rec,alpha_adv\n";
  for (const auto& r : rows) {
    out << r.iter << ',' << format_double(r.loss_cd) << ',' << format_double(r.loss_dis) << ','
        << format_double(r.loss_cl) << ',' << format_double(r.loss_rec) << ','
        << format_double(r.alpha_adv) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace disent
