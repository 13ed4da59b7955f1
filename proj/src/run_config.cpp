#include "disent/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "disent/errors.hpp"

namespace disent {

using nlohmann::ordered_json;

namespace {

// Line of the first `"key"` after the first `"section"`, or 0.
std::size_t line_of(const std::string& text, const std::string& section, const std::string& key) {
  std::size_t from = 0;
  if (!section.empty()) {
    from = text.find('"' + section + '"');
    if (from == std::string::npos) return 0;
  }
  const auto at = key.empty() ? from : text.find('"' + key + '"', from);
  if (at == std::string::npos) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n'));
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

const char* type_word(const ordered_json& v) {
  if (v.is_boolean()) return "a boolean";
  if (v.is_number_unsigned()) return "a non-negative integer";
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_array()) return "an array";
  return "an object";
}

bool compatible(const ordered_json& def, const ordered_json& given) {
  if (def.is_boolean()) return given.is_boolean();
  if (def.is_number_unsigned()) return given.is_number_unsigned();
  if (def.is_number()) return given.is_number();
  if (def.is_string()) return given.is_string();
  if (def.is_array()) return given.is_array();
  return given.is_object();
}

template <typename T>
T get(const ordered_json& cfg, const char* section, const char* key) {
  return cfg.at(section).at(key).get<T>();
}

}  // namespace

ordered_json default_run_config() {
  ordered_json c;
  c["seed"] = 1u;
  c["data"] = {
      {"kind", "factor"},       {"n", 4000u},          {"num_classes", 5u},
      {"num_attrs", 2u},        {"latent_dim", 4u},    {"feature_dim", 16u},
      {"noise_sigma", 0.1},     {"dependency_rho", 0.0}, {"class_scale", 1.0},
      {"attr_scale", 1.0},      {"latent_scale", 1.0}, {"test_fraction", 0.25},
  };
  c["identity"] = {
      {"num_subjects", 20u}, {"num_classes", 4u},    {"feature_dim", 16u},
      {"noise_sigma", 0.3},  {"repetitions", 10u},   {"subject_scale", 6.0},
      {"class_scale", 1.0},  {"subject_rank", 3u},   {"folds", 4u},
      {"test_fold", 0u},
  };
  c["metric"] = {
      {"loss", "tuple_clusters"}, {"T", 1.0},            {"tau", 0.5},
      {"trainable_T", false},     {"rank_a", 4u},        {"rank_b", 4u},
      {"X", 12u},                 {"N", 6u},             {"M", 6u},
      {"mining", true},           {"center_over_all", false}, {"hidden", 32u},
      {"embedding_dim", 8u},      {"two_branch", false}, {"d_input", 16u},
      {"d_output", 16u},          {"w_softmax", 1.0},    {"w_metric", 1.0},
      {"lr", 0.01},               {"momentum", 0.9},     {"weight_decay", 0.01},
      {"iters", 1000u},           {"log_every", 50u},
  };
  c["flf"] = {
      {"dim_d", 8u},         {"dim_l", 4u},        {"hidden", 16u},
      {"alpha_max", 0.5},    {"ramp_iters", 5000u}, {"beta", 0.1},
      {"lambda", 0.5},       {"lr", 0.001},        {"adam_beta1", 0.9},
      {"adam_beta2", 0.999}, {"iters", 20000u},    {"batch_size", 32u},
      {"detach_cd", false},  {"log_every", 50u},
  };
  c["probe"] = {{"l2_weight", 1e-3}, {"iters", 3000u}, {"checkpoint", ""}};
  c["equilibrium"] = {
      {"scenario", "independent"}, {"nd", 2u}, {"alphas", {0.1, 0.5, 0.9, 10.0}},
      {"budget", 1000000u},        {"nx", 0u}, {"ns", 0u}, {"ny", 0u}, {"table", ordered_json::array()},
  };
  c["costs"] = {{"X", 12u}, {"N", 6u}, {"M", 6u}};
  c["gradcheck"] = {{"points", 10u}, {"tolerance", 1e-5}};
  return c;
}

ordered_json resolve_run_config(const std::string& text) {
  ordered_json given;
  try {
    given = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  if (!given.is_object()) throw ConfigError(1, "top level must be an object");

  ordered_json resolved = default_run_config();
  for (const auto& [section, value] : given.items()) {
    if (!resolved.contains(section)) {
      throw ConfigError(line_of(text, "", section), "unknown key '" + section + "'");
    }
    auto& target = resolved[section];
    if (!target.is_object()) {
      if (!compatible(target, value)) {
        throw ConfigError(line_of(text, "", section),
                          "'" + section + "' must be " + type_word(target));
      }
      target = value;
      continue;
    }
    if (!value.is_object()) {
      throw ConfigError(line_of(text, "", section), "section '" + section + "' must be an object");
    }
    for (const auto& [key, v] : value.items()) {
      if (!target.contains(key)) {
        throw ConfigError(line_of(text, section, key), "unknown key '" + section + "." + key + "'");
      }
      if (!compatible(target[key], v)) {
        throw ConfigError(line_of(text, section, key),
                          "'" + section + "." + key + "' must be " + type_word(target[key]));
      }
      target[key] = v;
    }
  }
  const auto kind = resolved["data"]["kind"].get<std::string>();
  if (kind != "factor" && kind != "identity") {
    throw ConfigError(line_of(text, "data", "kind"), "data.kind must be \"factor\" or \"identity\"");
  }
  if (!parse_metric_loss(resolved["metric"]["loss"].get<std::string>())) {
    throw ConfigError(line_of(text, "metric", "loss"),
                      "metric.loss must be one of triplet, n_plus_one, ccl, tuple_clusters, "
                      "adaptive_tuple_clusters");
  }
  const double frac = resolved["data"]["test_fraction"].get<double>();
  if (!(frac > 0.0 && frac < 1.0)) {
    throw ConfigError(line_of(text, "data", "test_fraction"), "data.test_fraction must lie in (0,1)");
  }
  for (auto [section, key] : {std::pair{"flf", "ramp_iters"}, {"flf", "log_every"}, {"flf", "batch_size"},
                              {"metric", "log_every"}, {"metric", "X"}, {"metric", "N"}, {"metric", "M"}}) {
    if (resolved[section][key].get<std::uint64_t>() == 0) {
      throw ConfigError(line_of(text, section, key), std::string(section) + "." + key + " must be positive");
    }
  }
  return resolved;
}

ordered_json load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return resolve_run_config(buf.str());
}

std::uint64_t config_seed(const ordered_json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }

FactorSpec factor_spec(const ordered_json& cfg) {
  FactorSpec s;
  s.num_classes = get<std::size_t>(cfg, "data", "num_classes");
  s.num_attrs = get<std::size_t>(cfg, "data", "num_attrs");
  s.latent_dim = get<std::size_t>(cfg, "data", "latent_dim");
  s.feature_dim = get<std::size_t>(cfg, "data", "feature_dim");
  s.noise_sigma = get<double>(cfg, "data", "noise_sigma");
  s.dependency_rho = get<double>(cfg, "data", "dependency_rho");
  s.class_scale = get<double>(cfg, "data", "class_scale");
  s.attr_scale = get<double>(cfg, "data", "attr_scale");
  s.latent_scale = get<double>(cfg, "data", "latent_scale");
  return s;
}

std::size_t factor_sample_count(const ordered_json& cfg) { return get<std::size_t>(cfg, "data", "n"); }

std::size_t factor_train_count(const ordered_json& cfg) {
  const auto n = factor_sample_count(cfg);
  const auto test = static_cast<std::size_t>(static_cast<double>(n) * get<double>(cfg, "data", "test_fraction"));
  return n - test;
}

IdentityExpressionSpec identity_spec(const ordered_json& cfg) {
  IdentityExpressionSpec s;
  s.num_subjects = get<std::size_t>(cfg, "identity", "num_subjects");
  s.num_classes = get<std::size_t>(cfg, "identity", "num_classes");
  s.feature_dim = get<std::size_t>(cfg, "identity", "feature_dim");
  s.noise_sigma = get<double>(cfg, "identity", "noise_sigma");
  s.repetitions = get<std::size_t>(cfg, "identity", "repetitions");
  s.subject_scale = get<double>(cfg, "identity", "subject_scale");
  s.class_scale = get<double>(cfg, "identity", "class_scale");
  s.subject_rank = get<std::size_t>(cfg, "identity", "subject_rank");
  return s;
}

MetricTrainConfig metric_config(const ordered_json& cfg) {
  MetricTrainConfig m;
  m.loss = *parse_metric_loss(get<std::string>(cfg, "metric", "loss"));
  m.threshold = {get<double>(cfg, "metric", "T"), get<double>(cfg, "metric", "tau")};
  m.trainable_T = get<bool>(cfg, "metric", "trainable_T");
  m.rank_a = get<std::size_t>(cfg, "metric", "rank_a");
  m.rank_b = get<std::size_t>(cfg, "metric", "rank_b");
  m.X = get<std::size_t>(cfg, "metric", "X");
  m.N = get<std::size_t>(cfg, "metric", "N");
  m.M = get<std::size_t>(cfg, "metric", "M");
  m.mining_enabled = get<bool>(cfg, "metric", "mining");
  m.center_over_all = get<bool>(cfg, "metric", "center_over_all");
  m.hidden = get<std::size_t>(cfg, "metric", "hidden");
  m.embedding_dim = get<std::size_t>(cfg, "metric", "embedding_dim");
  m.two_branch = get<bool>(cfg, "metric", "two_branch");
  m.d_input = get<std::size_t>(cfg, "metric", "d_input");
  m.d_output = get<std::size_t>(cfg, "metric", "d_output");
  m.joint = {get<double>(cfg, "metric", "w_softmax"), get<double>(cfg, "metric", "w_metric")};
  m.sgd = {get<double>(cfg, "metric", "lr"), get<double>(cfg, "metric", "momentum"),
           get<double>(cfg, "metric", "weight_decay")};
  m.seed = config_seed(cfg);
  return m;
}

FLFConfig flf_config(const ordered_json& cfg, std::size_t input_dim, std::size_t num_classes,
                     std::size_t num_attrs) {
  FLFConfig f;
  f.input_dim = input_dim;
  f.num_classes = num_classes;
  f.num_attrs = num_attrs;
  f.dim_d = get<std::size_t>(cfg, "flf", "dim_d");
  f.dim_l = get<std::size_t>(cfg, "flf", "dim_l");
  f.hidden = get<std::size_t>(cfg, "flf", "hidden");
  f.schedule.alpha_max = get<double>(cfg, "flf", "alpha_max");
  f.schedule.ramp_iters = get<std::int64_t>(cfg, "flf", "ramp_iters");
  f.schedule.beta = get<double>(cfg, "flf", "beta");
  f.schedule.lambda = get<double>(cfg, "flf", "lambda");
  f.adam.lr = get<double>(cfg, "flf", "lr");
  f.adam.beta1 = get<double>(cfg, "flf", "adam_beta1");
  f.adam.beta2 = get<double>(cfg, "flf", "adam_beta2");
  f.detach_cd = get<bool>(cfg, "flf", "detach_cd");
  return f;
}

FLFRunConfig flf_run_config(const ordered_json& cfg) {
  FLFRunConfig r;
  r.iters = get<std::int64_t>(cfg, "flf", "iters");
  r.batch_size = get<std::size_t>(cfg, "flf", "batch_size");
  r.log_every = get<std::int64_t>(cfg, "flf", "log_every");
  return r;
}

ProbeConfig probe_config(const ordered_json& cfg) {
  return {get<double>(cfg, "probe", "l2_weight"), get<std::size_t>(cfg, "probe", "iters")};
}

}  // namespace disent
