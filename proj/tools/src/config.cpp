// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string_view>

#include "ttr/error.hpp"
#include "ttr/formats.hpp"
#include "ttr/synthetic.hpp"

namespace ttr::cli {

using nlohmann::json;

namespace {

std::string_view to_string(DataSource s) {
  switch (s) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::idx: return "idx";
    case DataSource::cifar: return "cifar";
  }
  return "unknown";
}

std::string_view to_string(ParamFilter f) {
  return f == ParamFilter::all ? "all" : "norm_affine_only";
}

// Reads the keys of one JSON object and rejects any key it was not asked for.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(label() + " must be an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) out = as_count(key, *v);
  }
  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) out = as_real(key, *v);
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int>();
    }
  }
  template <class E, class Parse>
  void read_enum(const std::string& key, E& out, Parse parse) {
    if (const json* v = find(key)) out = parse_name(key, *v, parse);
  }
  template <class E, class Parse>
  void read_enum_list(const std::string& key, std::vector<E>& out, Parse parse) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of names");
      out.clear();
      for (const auto& item : *v) out.push_back(parse_name(key, item, parse));
    }
  }
  void read_counts(const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of non-negative integers");
      out.clear();
      for (const auto& item : *v) out.push_back(as_count(key, item));
    }
  }
  void read_ints(const std::string& key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of integers");
      out.clear();
      for (const auto& item : *v) {
        if (!item.is_number_integer()) fail(key, "an array of integers");
        out.push_back(item.get<int>());
      }
    }
  }
  // A number, or the string "inf".
  void read_prior(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_string() && v->get<std::string>() == "inf") {
        out = kInfinitePrior;
      } else {
        out = as_real(key, *v);
      }
    }
  }
  Section child(const std::string& key) {
    static const json empty = json::object();
    const json* v = find(key);
    return Section(v ? *v : empty, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "config" : "config key '" + path_ + "'"; }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  [[noreturn]] void fail(const std::string& key, const std::string& expected) const {
    throw ConfigError("config key '" + qualified(key) + "' must be " + expected);
  }
  std::uint64_t as_count(const std::string& key, const json& v) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(key, "a non-negative integer");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  double as_real(const std::string& key, const json& v) const {
    if (!v.is_number()) fail(key, "a number");
    return v.get<double>();
  }
  template <class Parse>
  auto parse_name(const std::string& key, const json& v, Parse parse) const {
    if (!v.is_string()) fail(key, "a name string");
    const auto name = v.get<std::string>();
    const auto parsed = parse(name);
    if (!parsed) throw ConfigError("config key '" + qualified(key) + "': unknown value '" + name + "'");
    return *parsed;
  }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

std::optional<DataSource> parse_source(std::string_view s) {
  if (s == "synthetic") return DataSource::synthetic;
  if (s == "idx") return DataSource::idx;
  if (s == "cifar") return DataSource::cifar;
  return std::nullopt;
}

std::optional<ParamFilter> parse_filter(std::string_view s) {
  if (s == "all") return ParamFilter::all;
  if (s == "norm_affine_only") return ParamFilter::norm_affine_only;
  return std::nullopt;
}

void read_rule(Section& s, UpdateRule& rule, const char* kind_key) {
  s.read_enum(kind_key, rule.kind, parse_update_kind);
  s.read("momentum", rule.momentum);
  s.read("beta1", rule.beta1);
  s.read("beta2", rule.beta2);
  s.read("epsilon", rule.epsilon);
  s.read("weight_decay", rule.weight_decay);
}

json rule_json(const UpdateRule& rule) {
  return {{"momentum", rule.momentum}, {"beta1", rule.beta1}, {"beta2", rule.beta2},
          {"epsilon", rule.epsilon},   {"weight_decay", rule.weight_decay}};
}

json prior_json(double n) { return std::isinf(n) ? json("inf") : json(n); }

}  // namespace

std::filesystem::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? std::filesystem::path(output_dir) / "model.ckpt"
                            : std::filesystem::path(checkpoint);
}

void RunConfig::validate() const {
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (model.arch != "conv_small" && model.arch != "mlp_bn") {
    throw ConfigError("model.arch must be conv_small or mlp_bn, got '" + model.arch + "'");
  }
  if (model.arch == "conv_small" && model.widths.size() != 3) {
    throw ConfigError("model.widths needs three entries for conv_small");
  }
  if (model.widths.empty()) throw ConfigError("model.widths must not be empty");
  for (std::size_t w : model.widths) {
    if (w == 0) throw ConfigError("model.widths entries must be >= 1");
  }
  if (train.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr must be > 0");
  for (int s : corruptions.severities) {
    if (s < 1 || s > 5) {
      throw ConfigError("corruptions.severities: severity " + std::to_string(s) + " outside 1..5");
    }
  }
  if (strategies.empty()) throw ConfigError("strategies must not be empty");
  if (sweep_B.empty()) throw ConfigError("sweep.B_values must not be empty");
  for (std::size_t b : sweep_B) {
    if (b == 0) throw ConfigError("sweep.B_values entries must be >= 1");
  }
  adapt.validate();
  for (Strategy s : strategies) {
    AdaptationConfig a = adapt;
    a.strategy = s;
    a.validate();
  }
  if (data.source == DataSource::idx && (data.test_images.empty() || data.test_labels.empty())) {
    throw ConfigError("data.source idx needs data.test_images and data.test_labels");
  }
  if (data.source == DataSource::cifar && data.test_file.empty()) {
    throw ConfigError("data.source cifar needs data.test_file");
  }
}

RunConfig default_config() { return RunConfig{}; }

RunConfig apply_json(RunConfig c, const json& doc) {
  Section root(doc, "");
  root.read("seed", c.seed);
  root.read("parallelism", c.parallelism);
  root.read("output_dir", c.output_dir);
  root.read("checkpoint", c.checkpoint);
  root.read_enum_list("strategies", c.strategies, parse_strategy);
  root.read_enum("reference_strategy", c.reference_strategy, parse_strategy);

  Section data = root.child("data");
  data.read_enum("source", c.data.source, parse_source);
  data.read("num_classes", c.data.num_classes);
  data.read("image_size", c.data.image_size);
  data.read("channels", c.data.channels);
  data.read("train_per_class", c.data.train_per_class);
  data.read("test_per_class", c.data.test_per_class);
  data.read("train_seed", c.data.train_seed);
  data.read("test_seed", c.data.test_seed);
  data.read("illumination", c.data.illumination);
  data.read("sensor_noise", c.data.sensor_noise);
  data.read("train_images", c.data.train_images);
  data.read("train_labels", c.data.train_labels);
  data.read("test_images", c.data.test_images);
  data.read("test_labels", c.data.test_labels);
  data.read("train_file", c.data.train_file);
  data.read("test_file", c.data.test_file);
  data.read("max_test_points", c.data.max_test_points);
  data.finish();

  Section model = root.child("model");
  model.read("arch", c.model.arch);
  model.read_counts("widths", c.model.widths);
  model.read("init_seed", c.model.init_seed);
  model.finish();

  Section train = root.child("train");
  train.read("epochs", c.train.epochs);
  train.read("batch_size", c.train.batch_size);
  train.read("lr", c.train.lr);
  read_rule(train, c.train.rule, "update_rule");
  train.read("augment", c.train.augment);
  train.read("pad", c.train.pad);
  train.read("cosine_schedule", c.train.cosine_schedule);
  train.finish();

  Section corr = root.child("corruptions");
  corr.read_enum_list("kinds", c.corruptions.kinds, parse_corruption_kind);
  corr.read_ints("severities", c.corruptions.severities);
  corr.read("seed", c.corruptions.seed);
  corr.read("include_clean", c.corruptions.include_clean);
  corr.finish();

  Section adapt = root.child("adapt");
  adapt.read("B", c.adapt.batch_size);
  adapt.read("lr", c.adapt.lr);
  adapt.read("steps", c.adapt.steps);
  read_rule(adapt, c.adapt.rule, "update_rule");
  adapt.read_prior("prior_strength", c.adapt.prior_strength);
  if (const json* t = adapt.find("threshold_fraction")) {
    if (t->is_null()) {
      c.adapt.threshold_fraction.reset();
    } else if (t->is_number()) {
      c.adapt.threshold_fraction = t->get<double>();
    } else {
      throw ConfigError("config key 'adapt.threshold_fraction' must be a number or null");
    }
  }
  adapt.read_enum("param_filter", c.adapt.param_filter, parse_filter);
  adapt.read_enum("bn_stats_source", c.adapt.bn_stats_source, parse_bn_stats_source);
  adapt.read("episodic", c.adapt.episodic);
  adapt.read("tent_batch_size", c.adapt.tent_batch_size);
  adapt.read_prior("tent_prior_strength", c.adapt.tent_prior_strength);
  adapt.read_enum("tent_param_filter", c.adapt.tent_param_filter, parse_filter);
  adapt.finish();

  Section aug = root.child("augment");
  aug.read_enum("kind", c.adapt.policy.kind, parse_policy_kind);
  aug.read_enum_list("ops", c.adapt.policy.ops, parse_aug_op);
  aug.read("chains", c.adapt.policy.chains);
  aug.read("max_depth", c.adapt.policy.max_depth);
  aug.read("alpha", c.adapt.policy.alpha);
  aug.read("severity", c.adapt.policy.severity);
  aug.finish();

  Section sweep = root.child("sweep");
  sweep.read_enum("strategy", c.sweep_strategy, parse_strategy);
  sweep.read_counts("B_values", c.sweep_B);
  sweep.finish();

  root.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  RunConfig c = apply_json(default_config(), doc);
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  auto names = [](const auto& items) {
    json out = json::array();
    for (const auto& v : items) out.push_back(std::string(ttr::to_string(v)));
    return out;
  };
  json train = rule_json(c.train.rule);
  train.update({{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"lr", c.train.lr},
                {"update_rule", std::string(ttr::to_string(c.train.rule.kind))},
                {"augment", c.train.augment},
                {"pad", c.train.pad},
                {"cosine_schedule", c.train.cosine_schedule}});
  json adapt = rule_json(c.adapt.rule);
  adapt.update({{"B", c.adapt.batch_size},
                {"lr", c.adapt.lr},
                {"steps", c.adapt.steps},
                {"update_rule", std::string(ttr::to_string(c.adapt.rule.kind))},
                {"prior_strength", prior_json(c.adapt.prior_strength)},
                {"threshold_fraction",
                 c.adapt.threshold_fraction ? json(*c.adapt.threshold_fraction) : json(nullptr)},
                {"param_filter", std::string(to_string(c.adapt.param_filter))},
                {"bn_stats_source", std::string(ttr::to_string(c.adapt.bn_stats_source))},
                {"episodic", c.adapt.episodic},
                {"tent_batch_size", c.adapt.tent_batch_size},
                {"tent_prior_strength", prior_json(c.adapt.tent_prior_strength)},
                {"tent_param_filter", std::string(to_string(c.adapt.tent_param_filter))}});
  return {
      {"seed", c.seed},
      {"parallelism", c.parallelism},
      {"output_dir", c.output_dir},
      {"checkpoint", c.checkpoint},
      {"strategies", names(c.strategies)},
      {"reference_strategy", std::string(ttr::to_string(c.reference_strategy))},
      {"data",
       {{"source", std::string(to_string(c.data.source))},
        {"num_classes", c.data.num_classes},
        {"image_size", c.data.image_size},
        {"channels", c.data.channels},
        {"train_per_class", c.data.train_per_class},
        {"test_per_class", c.data.test_per_class},
        {"train_seed", c.data.train_seed},
        {"test_seed", c.data.test_seed},
        {"illumination", c.data.illumination},
        {"sensor_noise", c.data.sensor_noise},
        {"train_images", c.data.train_images},
        {"train_labels", c.data.train_labels},
        {"test_images", c.data.test_images},
        {"test_labels", c.data.test_labels},
        {"train_file", c.data.train_file},
        {"test_file", c.data.test_file},
        {"max_test_points", c.data.max_test_points}}},
      {"model", {{"arch", c.model.arch}, {"widths", c.model.widths}, {"init_seed", c.model.init_seed}}},
      {"train", train},
      {"corruptions",
       {{"kinds", names(c.corruptions.kinds)},
        {"severities", c.corruptions.severities},
        {"seed", c.corruptions.seed},
        {"include_clean", c.corruptions.include_clean}}},
      {"adapt", adapt},
      {"augment",
       {{"kind", std::string(ttr::to_string(c.adapt.policy.kind))},
        {"ops", names(c.adapt.policy.ops)},
        {"chains", c.adapt.policy.chains},
        {"max_depth", c.adapt.policy.max_depth},
        {"alpha", c.adapt.policy.alpha},
        {"severity", c.adapt.policy.severity}}},
      {"sweep", {{"strategy", std::string(ttr::to_string(c.sweep_strategy))}, {"B_values", c.sweep_B}}},
  };
}

void write_sidecar(const RunConfig& config, const std::filesystem::path& file) {
  auto path = file;
  path += ".config.json";
  std::ofstream out(path);
  out << to_json(config).dump(2) << "\n";
  if (!out) throw Error("cannot write " + path.string());
}

namespace {

Dataset synthetic_split(const RunConfig& c, bool train) {
  SyntheticSpec spec;
  spec.num_classes = c.data.num_classes;
  spec.per_class = train ? c.data.train_per_class : c.data.test_per_class;
  spec.image_size = c.data.image_size;
  spec.channels = c.data.channels;
  spec.seed = train ? c.data.train_seed : c.data.test_seed;
  spec.illumination = c.data.illumination;
  spec.sensor_noise = c.data.sensor_noise;
  Dataset d = generate_synthetic(spec, train ? SplitKind::train : SplitKind::test_clean);
  d.name = "synthetic";
  return d;
}

Dataset load_split(const RunConfig& c, bool train) {
  switch (c.data.source) {
    case DataSource::synthetic: return synthetic_split(c, train);
    case DataSource::idx: {
      const auto& images = train ? c.data.train_images : c.data.test_images;
      const auto& labels = train ? c.data.train_labels : c.data.test_labels;
      if (images.empty() || labels.empty()) throw ConfigError("data: idx paths missing for this split");
      return load_idx(images, labels, c.data.num_classes);
    }
    case DataSource::cifar: {
      const auto& file = train ? c.data.train_file : c.data.test_file;
      if (file.empty()) throw ConfigError("data: cifar file missing for this split");
      return load_cifar_binary(file, c.data.num_classes, c.data.channels, c.data.image_size);
    }
  }
  throw ConfigError("data: unknown source");
}

}  // namespace

Dataset build_train_split(const RunConfig& config) {
  Dataset d = load_split(config, true);
  d.split.kind = SplitKind::train;
  return d;
}

Dataset build_test_split(const RunConfig& config) {
  Dataset d = load_split(config, false);
  if (config.data.max_test_points > 0 && d.size() > config.data.max_test_points) {
    const std::string name = d.name;
    d = d.slice(0, config.data.max_test_points);
    d.name = name;
  }
  return d;
}

Model<float> build_model(const RunConfig& config, const Shape& input_shape) {
  if (config.model.arch == "mlp_bn") {
    return make_mlp_bn(input_shape, config.data.num_classes, config.model.widths, config.model.init_seed);
  }
  return make_conv_small(input_shape, config.data.num_classes, config.model.widths, config.model.init_seed);
}

}  // namespace ttr::cli
