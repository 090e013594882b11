// Copyright 2026 The HRA Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hra_lab/harness.hpp"

#include <cstdlib>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "hra_lab/adapters.hpp"
#include "hra_lab/errors.hpp"
#include "hra_lab/hra.hpp"

namespace hra_lab {

namespace {

// Typed, path-aware access to one JSON object; rejects unknown keys.
class Section {
 public:
  Section(const json& root, std::string path) : path_(std::move(path)) {
    if (root.is_null()) {
      obj_ = json::object();
    } else if (!root.is_object()) {
      throw ConfigError("config key '" + path_ + "' must be an object");
    } else {
      obj_ = root;
    }
  }

  bool has(const std::string& key) const {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing required key '" + name(key) + "'");
    return obj_.at(key);
  }

  Section sub(const std::string& key) const {
    seen_.insert(key);
    return Section(obj_.contains(key) ? obj_.at(key) : json(), name(key));
  }

  std::size_t size(const std::string& key, std::optional<std::size_t> fallback) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      raw(key);
    }
    const json& v = obj_.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw ConfigError("config key '" + name(key) + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
      throw ConfigError("config key '" + name(key) + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError("config key '" + name(key) + "' must be a number");
    return v.get<double>();
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError("config key '" + name(key) + "' must be true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, std::optional<std::string> fallback) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      raw(key);
    }
    const json& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError("config key '" + name(key) + "' must be a string");
    return v.get<std::string>();
  }

  template <typename Parse>
  auto choice(const std::string& key, const std::string& fallback, Parse parse) const {
    const std::string s = text(key, fallback);
    try {
      return parse(s);
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + name(key) + "': " + e.what());
    }
  }

  template <typename T>
  std::vector<T> list(const std::string& key) const {
    if (!has(key)) return {};
    try {
      return obj_.at(key).get<std::vector<T>>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + name(key) + "' has the wrong element type");
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + name(key) + "'");
    }
  }

 private:
  json obj_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

TaskSetConfig parse_tasks(const Section& s, const BackboneDims& bb) {
  TaskSetConfig t;
  t.count = s.size("count", std::nullopt);
  t.seed = s.seed("seed", 0);
  t.first_index = s.size("first_index", 0);
  t.rule = s.choice("rule", "linear", parse_rule_family);
  t.min_labels = s.size("min_labels", t.min_labels);
  t.max_labels = s.size("max_labels", t.max_labels);
  t.max_gap = s.size("max_gap", t.max_gap);
  t.noise = s.number("noise", t.noise);
  t.train_size = s.size("train_size", t.train_size);
  t.valid_size = s.size("valid_size", t.valid_size);
  t.test_size = s.size("test_size", t.test_size);
  t.input_dim = bb.input_dim;
  t.vocab = bb.vocab;
  s.reject_unknown();
  try {
    validate(t);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("tasks: ") + e.what());
  }
  return t;
}

}  // namespace

std::string ExperimentConfig::hash() const { return sha256_hex(document.dump()); }

ExperimentConfig parse_config(const json& doc, bool require_training) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const Section root(doc, "");
  ExperimentConfig cfg;
  cfg.document = doc;

  {
    const Section s = root.sub("backbone");
    cfg.backbone.layers = s.size("layers", std::nullopt);
    cfg.backbone.model_dim = s.size("model_dim", std::nullopt);
    cfg.backbone.ffn_dim = s.size("ffn_dim", 2 * cfg.backbone.model_dim);
    cfg.backbone.input_dim = s.size("input_dim", cfg.backbone.input_dim);
    cfg.backbone.vocab = s.size("vocab", cfg.backbone.vocab);
    cfg.backbone.seed = s.seed("seed", 0);
    s.reject_unknown();
    validate(cfg.backbone);
  }
  {
    const Section s = root.sub("adapter");
    AdapterSpec& a = cfg.adapter;
    a.method = s.choice("method", "", parse_method);
    if (!s.has("method")) s.raw("method");
    a.variant = s.choice("variant", "indrnn", parse_variant);
    a.head = s.choice("head", "linear", parse_head_kind);
    a.recurrent_dim = s.size("recurrent_dim", a.recurrent_dim);
    a.head_hidden = s.size("head_hidden", a.head_hidden);
    a.bottleneck = s.size("bottleneck", a.bottleneck);
    a.placement = s.choice("placement", "sequential", parse_placement);
    a.rank = s.size("rank", a.rank);
    if (s.has("lora_alpha")) a.lora_alpha = s.number("lora_alpha", 0.0);
    a.layer_mask = s.list<bool>("layer_mask");
    a.disable_recurrence = s.flag("disable_recurrence", false);
    a.unshare_weights = s.flag("unshare_weights", false);
    a.zero_init_head = s.flag("zero_init_head", false);
    cfg.adapter_seed = s.seed("seed", 0);
    s.reject_unknown();
    validate(cfg.adapter, cfg.backbone);
  }
  cfg.tasks = parse_tasks(root.sub("tasks"), cfg.backbone);
  {
    const Section s = root.sub("training");
    TrainConfig& t = cfg.training;
    t.steps = s.size("steps", require_training ? std::nullopt : std::optional<std::size_t>(0));
    const std::string mode = s.text("mode", "multi_task");
    if (mode == "multi_task") {
      cfg.mode = TrainMode::kMultiTask;
    } else if (mode == "online") {
      cfg.mode = TrainMode::kOnline;
    } else {
      throw ConfigError("config key 'training.mode' must be 'multi_task' or 'online'");
    }
    t.batch_size = s.size("batch_size", t.batch_size);
    if (t.batch_size < 1) throw ConfigError("config key 'training.batch_size' must be >= 1");
    t.seed = s.seed("seed", 0);
    t.active_tasks = s.list<std::size_t>("active_tasks");
    for (std::size_t slot : t.active_tasks) {
      if (slot >= cfg.tasks.count) {
        throw ConfigError("config key 'training.active_tasks' names task " +
                          std::to_string(slot) + " but tasks.count is " +
                          std::to_string(cfg.tasks.count));
      }
    }
    const Section o = s.sub("optimizer");
    t.optimizer.kind = o.choice("kind", "adam", parse_optimizer);
    t.optimizer.lr = o.number("lr", t.optimizer.lr);
    t.optimizer.beta1 = o.number("beta1", t.optimizer.beta1);
    t.optimizer.beta2 = o.number("beta2", t.optimizer.beta2);
    t.optimizer.eps = o.number("eps", t.optimizer.eps);
    o.reject_unknown();
    s.reject_unknown();
  }
  {
    const Section s = root.sub("online");
    const Section p = s.sub("pretrain_tasks");
    cfg.pretrain_tasks = cfg.tasks;
    cfg.pretrain_tasks.count = p.size("count", cfg.tasks.count);
    cfg.pretrain_tasks.first_index = p.size("first_index", 1000);
    p.reject_unknown();
    cfg.pretrain_steps = s.size("pretrain_steps", cfg.training.steps);
    cfg.compare_joint = s.flag("compare_joint", false);
    s.reject_unknown();
    if (cfg.mode == TrainMode::kOnline) {
      if (cfg.adapter.method != Method::kHra) {
        throw ConfigError("config key 'training.mode': online adaptation requires adapter.method = hra");
      }
      const std::size_t a0 = cfg.pretrain_tasks.first_index, a1 = a0 + cfg.pretrain_tasks.count;
      const std::size_t b0 = cfg.tasks.first_index, b1 = b0 + cfg.tasks.count;
      if (a0 < b1 && b0 < a1) {
        throw ConfigError("config key 'online.pretrain_tasks.first_index': pretraining tasks overlap the new tasks");
      }
    }
  }
  {
    const Section s = root.sub("growth");
    cfg.growth_methods = s.list<std::string>("methods");
    if (cfg.growth_methods.empty()) {
      cfg.growth_methods = {"hra-linear", "hra-ffn", "residual", "lora", "bitfit"};
    }
    cfg.growth_max_tasks = s.size("max_tasks", 128);
    if (cfg.growth_max_tasks < 1) throw ConfigError("config key 'growth.max_tasks' must be >= 1");
    for (const auto& m : cfg.growth_methods) {
      try {
        validate(spec_for_label(m, cfg.adapter), cfg.backbone);
      } catch (const ConfigError& e) {
        throw ConfigError("config key 'growth.methods': " + std::string(e.what()));
      }
    }
    s.reject_unknown();
  }
  cfg.output_dir = root.text("output_dir", "runs/" + cfg.hash().substr(0, 12));
  root.reject_unknown();
  return cfg;
}

json apply_overrides(json doc, const std::vector<std::string>& sets) {
  if (doc.is_null()) doc = json::object();
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    const std::string key = kv.substr(0, eq);
    const std::string text = kv.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("--set key '" + key + "' has an empty component");
      if (!node->is_object()) throw ConfigError("--set key '" + key + "' descends into a non-object");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      if (node->is_null()) *node = json::object();
      start = dot + 1;
    }
  }
  return doc;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv("HRA_LAB_OUT");
  return std::filesystem::path(root && *root ? root : ".") / dir;
}

AdapterSpec spec_for_label(const std::string& label, const AdapterSpec& base) {
  AdapterSpec s = base;
  s.disable_recurrence = false;
  s.unshare_weights = false;
  if (label == "hra-linear") {
    s.method = Method::kHra;
    s.head = HeadKind::kLinear;
  } else if (label == "hra-ffn") {
    s.method = Method::kHra;
    s.head = HeadKind::kFfn;
  } else if (label == "hra") {
    s.method = Method::kHra;
  } else {
    s.method = parse_method(label);
  }
  return s;
}

namespace {

std::string method_label(const AdapterSpec& s) {
  if (s.method != Method::kHra) return to_string(s.method);
  return "hra-" + to_string(s.head);
}

}  // namespace

std::vector<GrowthRow> growth_curve(const ExperimentConfig& cfg) {
  std::vector<GrowthRow> rows;
  for (const std::string& label : cfg.growth_methods) {
    const AdapterSpec spec = spec_for_label(label, cfg.adapter);
    for (std::size_t n = 1; n <= cfg.growth_max_tasks; ++n) {
      const ParamCount c = adapter_param_count(spec, cfg.backbone, n);
      rows.push_back({label, n, c.total, static_cast<double>(c.total) / static_cast<double>(n)});
    }
  }
  return rows;
}

std::string growth_curve_csv(const std::vector<GrowthRow>& rows, const std::string& comment) {
  std::ostringstream os;
  os << "# " << kGrowthCurveSchema << ' ' << comment << '\n';
  os << "method,N,total_params,per_task_avg\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.tasks << ',' << r.total_params << ',' << format_double(r.per_task_avg)
       << '\n';
  }
  return os.str();
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg) {
  if (cfg.adapter.method != Method::kHra) throw ConfigError("ablate requires adapter.method = hra");
  const FrozenBackbone bb(cfg.backbone);
  const auto tasks = make_synthetic_tasks(cfg.tasks);
  struct Cell {
    const char* row;
    bool disable;
    bool unshare;
  };
  const Cell cells[] = {{"base", false, false},
                        {"no_recurrence", true, false},
                        {"no_recurrence_unshared", true, true}};
  std::vector<AblationRow> rows;
  for (ControllerVariant v :
       {ControllerVariant::kIndRnn, ControllerVariant::kVanillaRnn, ControllerVariant::kLightGru}) {
    for (const Cell& cell : cells) {
      AdapterSpec spec = cfg.adapter;
      spec.variant = v;
      spec.disable_recurrence = cell.disable;
      spec.unshare_weights = cell.unshare;
      auto adapter = make_adapter(spec, bb, tasks.size(), cfg.adapter_seed);
      TrainReport report = train_multi_task(bb, *adapter, tasks, cfg.training);
      rows.push_back({cell.row, v, cell.disable, cell.unshare,
                      adapter_param_count(spec, cfg.backbone, tasks.size()), std::move(report)});
    }
  }
  return rows;
}

namespace {

std::string artifact_comment(const ExperimentConfig& cfg, std::uint64_t seed) {
  return "config_hash=" + cfg.hash() + " seed=" + std::to_string(seed);
}

json count_json(const ParamCount& c) {
  return json{{"shared", c.shared}, {"per_task", c.per_task}, {"total", c.total}};
}

json config_artifact(const ExperimentConfig& cfg) {
  return json{{"config_hash", cfg.hash()}, {"config", cfg.document}};
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
  const FrozenBackbone bb(cfg.backbone);
  const std::string bb_hash = bb.weights_sha256();
  const auto tasks = make_synthetic_tasks(cfg.tasks);
  auto adapter = make_adapter(cfg.adapter, bb, cfg.mode == TrainMode::kOnline
                                                   ? cfg.pretrain_tasks.count
                                                   : tasks.size(),
                              cfg.adapter_seed);
  TrainReport report;
  if (cfg.mode == TrainMode::kMultiTask) {
    report = train_multi_task(bb, *adapter, tasks, cfg.training);
  } else {
    OnlineConfig oc;
    oc.pretrain = cfg.training;
    oc.pretrain.steps = cfg.pretrain_steps;
    oc.pretrain.active_tasks.clear();
    oc.adapt = cfg.training;
    const auto pretrain = make_synthetic_tasks(cfg.pretrain_tasks);
    report = online_adapt(bb, static_cast<HraAdapter&>(*adapter), pretrain, tasks, oc);
    if (cfg.compare_joint) {
      auto joint = make_adapter(cfg.adapter, bb, tasks.size(), cfg.adapter_seed);
      const TrainReport jr = train_multi_task(bb, *joint, tasks, cfg.training);
      report.extra["joint_final_train_loss"] = jr.final_train_loss;
      report.extra["frozen_to_joint_ratio"] = report.final_train_loss / jr.final_train_loss;
    }
  }
  if (bb.weights_sha256() != bb_hash) throw Error("backbone weights changed during training");

  const ParamCount count = adapter_param_count(cfg.adapter, cfg.backbone, adapter->num_tasks());
  report.extra["config_hash"] = cfg.hash();
  report.extra["param_count"] = count_json(count);

  const auto dir = resolve_output_dir(cfg);
  json bb_ckpt = bb.checkpoint();
  bb_ckpt["meta"]["config_hash"] = cfg.hash();
  json ad_ckpt = adapter->checkpoint();
  ad_ckpt["meta"]["config_hash"] = cfg.hash();
  ad_ckpt["meta"]["seed"] = cfg.adapter_seed;
  write_json_file(dir / "config.json", config_artifact(cfg));
  write_json_file(dir / "backbone.json", bb_ckpt);
  write_json_file(dir / "adapter.json", ad_ckpt);
  write_json_file(dir / "report.json", report.to_json());
  write_text_file(dir / "losses.csv",
                  report.loss_csv(std::string(kLossCsvSchema) + " " +
                                  artifact_comment(cfg, cfg.training.seed)));
  write_json_file(dir / "timing.json", report.timing_json());

  out << "method          " << method_label(cfg.adapter) << "\n"
      << "steps           " << report.steps << "\n"
      << "initial loss    " << fixed(report.initial_train_loss) << "\n"
      << "final loss      " << fixed(report.final_train_loss) << "\n"
      << "valid loss      " << fixed(report.final_valid_loss) << "\n"
      << "label err rate  " << fixed(report.label_error_rate, 4) << "\n"
      << "params          " << count.total << " (shared " << count.shared << ", per task "
      << count.per_task << ")\n"
      << "output          " << dir.string() << "\n";
  if (report.extra.contains("frozen_to_joint_ratio")) {
    out << "frozen/joint    " << fixed(report.extra["frozen_to_joint_ratio"].get<double>(), 4)
        << "\n";
  }
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg, std::ostream& out) {
  const auto dir = resolve_output_dir(cfg);
  const auto tasks = make_synthetic_tasks(cfg.tasks);
  std::optional<FrozenBackbone> bb;
  std::unique_ptr<Adapter> adapter;
  try {
    bb.emplace(FrozenBackbone::from_checkpoint(read_json_file(dir / "backbone.json")));
    adapter = make_adapter(cfg.adapter, *bb, tasks.size(), cfg.adapter_seed);
    adapter->load(parse_checkpoint(read_json_file(dir / "adapter.json")).first);
  } catch (const ConfigError& e) {
    throw Error("cannot load a trained run from '" + dir.string() + "': " + e.what());
  }

  json per_task = json::array();
  double loss_sum = 0.0, ler_sum = 0.0;
  out << "task  test_loss  label_err_rate\n";
  for (std::size_t n = 0; n < tasks.size(); ++n) {
    const EvalResult r = evaluate(*bb, *adapter, TaskId{n}, tasks[n].test);
    per_task.push_back({{"task", n}, {"test_loss", r.loss}, {"label_error_rate", r.label_error_rate}});
    loss_sum += r.loss;
    ler_sum += r.label_error_rate;
    out << std::setw(4) << n << "  " << fixed(r.loss) << "  " << fixed(r.label_error_rate, 4) << "\n";
  }
  const double k = static_cast<double>(tasks.size());
  json doc = {{"format", "hra-lab-eval-v1"},
              {"config_hash", cfg.hash()},
              {"seed", cfg.training.seed},
              {"per_task", per_task},
              {"mean_test_loss", loss_sum / k},
              {"mean_label_error_rate", ler_sum / k}};
  write_json_file(dir / "eval.json", doc);
  out << "mean  " << fixed(loss_sum / k) << "  " << fixed(ler_sum / k, 4) << "\n";
  return 0;
}

int cmd_count_params(const ExperimentConfig& cfg, std::ostream& out) {
  const FrozenBackbone bb(cfg.backbone);
  const std::size_t n = cfg.tasks.count;
  const ParamCount c = adapter_param_count(cfg.adapter, cfg.backbone, n);
  const std::size_t enumerated = make_adapter(cfg.adapter, bb, n, cfg.adapter_seed)->element_count();
  if (enumerated != c.total) {
    throw Error("closed-form count " + std::to_string(c.total) +
                " disagrees with enumerated elements " + std::to_string(enumerated));
  }
  out << std::left << std::setw(12) << "method" << std::right << std::setw(6) << "N"
      << std::setw(12) << "shared" << std::setw(12) << "per_task" << std::setw(12) << "total"
      << "\n"
      << std::left << std::setw(12) << method_label(cfg.adapter) << std::right << std::setw(6) << n
      << std::setw(12) << c.shared << std::setw(12) << c.per_task << std::setw(12) << c.total
      << "\n";
  std::ostringstream csv;
  csv << "# " << kCountParamsSchema << ' ' << artifact_comment(cfg, cfg.adapter_seed) << '\n'
      << "method,N,shared,per_task,total,enumerated\n"
      << method_label(cfg.adapter) << ',' << n << ',' << c.shared << ',' << c.per_task << ','
      << c.total << ',' << enumerated << '\n';
  write_text_file(resolve_output_dir(cfg) / "count_params.csv", csv.str());
  return 0;
}

std::string growth_svg(const std::vector<GrowthRow>& rows, const std::string& comment) {
  double max_avg = 1.0;
  std::size_t max_n = 1;
  for (const auto& r : rows) {
    max_avg = std::max(max_avg, r.per_task_avg);
    max_n = std::max(max_n, r.tasks);
  }
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                            "#ff7f0e", "#8c564b"};
  const double w = 640, h = 400, pad = 50;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
     << "<!-- " << comment << " -->\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\">adapter parameters per task vs. "
        "number of tasks</text>\n"
     << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\""
     << h - pad << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
     << "\" stroke=\"black\"/>\n";
  std::string current;
  std::size_t series = 0;
  auto x_of = [&](std::size_t n) {
    return pad + (w - 2 * pad) * (max_n == 1 ? 0.0 : double(n - 1) / double(max_n - 1));
  };
  auto y_of = [&](double v) { return h - pad - (h - 2 * pad) * v / max_avg; };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].method != current) {
      if (!current.empty()) os << "\"/>\n";
      current = rows[i].method;
      const char* color = kColors[series % 6];
      os << "<text x=\"" << w - pad - 90 << "\" y=\"" << pad + 16 * series << "\" font-size=\"12\" fill=\""
         << color << "\">" << current << "</text>\n"
         << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
      ++series;
    }
    os << fixed(x_of(rows[i].tasks), 2) << ',' << fixed(y_of(rows[i].per_task_avg), 2) << ' ';
  }
  if (!current.empty()) os << "\"/>\n";
  os << "</svg>\n";
  return os.str();
}

int cmd_growth_curve(const ExperimentConfig& cfg, std::ostream& out) {
  const auto rows = growth_curve(cfg);
  const std::string csv = growth_curve_csv(rows, artifact_comment(cfg, cfg.adapter_seed));
  const auto dir = resolve_output_dir(cfg);
  write_text_file(dir / "growth_curve.csv", csv);
  write_text_file(dir / "growth_curve.svg", growth_svg(rows, artifact_comment(cfg, cfg.adapter_seed)));
  out << csv;
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, std::ostream& out) {
  const auto rows = run_ablation(cfg);
  std::ostringstream csv;
  csv << "# " << kAblationSchema << ' ' << artifact_comment(cfg, cfg.training.seed) << '\n'
      << "row,variant,disable_recurrence,unshare_weights,shared,per_task,total,"
         "initial_train_loss,final_train_loss,final_valid_loss,label_error_rate\n";
  for (const auto& r : rows) {
    csv << r.row << ',' << to_string(r.variant) << ',' << r.disable_recurrence << ','
        << r.unshare_weights << ',' << r.count.shared << ',' << r.count.per_task << ','
        << r.count.total << ',' << format_double(r.report.initial_train_loss) << ','
        << format_double(r.report.final_train_loss) << ','
        << format_double(r.report.final_valid_loss) << ','
        << format_double(r.report.label_error_rate) << '\n';
  }

  std::ostringstream md;
  md << "<!-- " << artifact_comment(cfg, cfg.training.seed) << " -->\n\n";
  md << "HRA ablation (" << to_string(cfg.adapter.head) << " head, IndRNN controller)\n\n"
     << "| Model variant | # Params | Final train loss | Valid loss | Label err rate |\n"
     << "|---|---|---|---|---|\n";
  const char* labels[] = {"HRA", "  - recurrent state", "    - weight sharing"};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& r = rows[i];
    md << "| " << labels[i] << " | " << r.count.total << " | " << fixed(r.report.final_train_loss)
       << " | " << fixed(r.report.final_valid_loss) << " | "
       << fixed(r.report.label_error_rate, 4) << " |\n";
  }
  md << "\nRecurrent controller ablation\n\n"
     << "| Controller variant | # Params | Final train loss | Valid loss | Label err rate |\n"
     << "|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    if (r.row != std::string("base")) continue;
    md << "| " << to_string(r.variant) << " | " << r.count.total << " | "
       << fixed(r.report.final_train_loss) << " | " << fixed(r.report.final_valid_loss) << " | "
       << fixed(r.report.label_error_rate, 4) << " |\n";
  }
  const auto dir = resolve_output_dir(cfg);
  write_text_file(dir / "ablation.csv", csv.str());
  write_text_file(dir / "ablation.md", md.str());
  out << md.str();
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hra-lab: hierarchical recurrent adapters on a frozen toy backbone"};
  app.name("hra-lab");
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  struct Command {
    const char* name;
    const char* help;
    bool trains;
    int (*run)(const ExperimentConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"train", "Train an adapter and write checkpoints, report and loss CSV", true, cmd_train},
      {"eval", "Evaluate a trained run on the test splits", true, cmd_eval},
      {"count-params", "Print shared / per-task / total adapter parameters", false, cmd_count_params},
      {"growth-curve", "Emit adapter size against number of tasks", false, cmd_growth_curve},
      {"ablate", "Run the recurrence / weight-sharing / controller ablation matrix", true, cmd_ablate},
  };
  std::vector<CLI::App*> subs;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "Experiment config (JSON)");
    sub->add_option("--set", sets, "Override a config key: key=value")->take_all();
    subs.push_back(sub);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "hra-lab: " << e.what() << "\n";
    return 2;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      json doc = config_path.empty() ? json::object() : read_json_file(config_path);
      doc = apply_overrides(std::move(doc), sets);
      const ExperimentConfig cfg = parse_config(doc, commands[i].trains);
      return commands[i].run(cfg, out);
    } catch (const ConfigError& e) {
      err << "hra-lab: config error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      err << "hra-lab: error: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}

}  // namespace hra_lab
