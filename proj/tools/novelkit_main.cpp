// novelkit: discover novel categories in embedding datasets given labelled
// examples of disjoint known classes.
//
// Subcommands: synth, discover, cluster, estimate-k, eval. Every run writes
// a manifest with input/output digests so results can be audited and
// reproduced. Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "novelkit/classcount.hpp"
#include "novelkit/common.hpp"
#include "novelkit/dataio.hpp"
#include "novelkit/evaluate.hpp"
#include "novelkit/kmeans.hpp"
#include "novelkit/model.hpp"
#include "novelkit/train.hpp"

using nlohmann::json;
using namespace novelkit;

namespace {

struct GlobalArgs {
  std::uint64_t seed = 0;
  int threads = 1;
};

struct Manifest {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::array();
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void add_input(const std::string& name, const std::string& path) {
    inputs[name] = {{"path", path}, {"fnv1a64", file_digest_hex(path)}};
  }
  void add_output(const std::string& path) {
    outputs.push_back({{"path", path}, {"fnv1a64", file_digest_hex(path)}});
  }
  void write(const std::string& path) {
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - started).count();
    json m = {{"command", command}, {"config", config},     {"seed", seed},
              {"inputs", inputs},   {"outputs", outputs},
              {"wall_clock_seconds", secs}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << m.dump(2) << "\n";
  }
};

json json_or_null(std::optional<double> v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

void write_metrics(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  for (const auto& e : log) {
    json line = {{"epoch", e.epoch},          {"ce", e.mean.ce},
                 {"bce", e.mean.bce},         {"mse", e.mean.mse},
                 {"omega", e.omega},          {"total", e.mean.total},
                 {"acc_unlabelled", json_or_null(e.acc_unlabelled)}};
    if (!e.pseudo_histogram.empty()) line["pseudo_histogram"] = e.pseudo_histogram;
    out << line.dump() << "\n";
  }
}

struct TrainFlags {
  long long cu = 5;
  long long hidden_dim = 64;
  bool identity_trunk = false;
  TrainSchedule sched;
  std::string labeler = "rank";
  std::vector<std::string> decay = {"170:0.1"};
  bool no_bce = false;
  bool no_mse = false;
  bool soft_k_given = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--cu", f.cu, "number of novel categories")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--hidden-dim", f.hidden_dim, "trunk width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_flag("--identity-trunk", f.identity_trunk,
                "pass-through trunk (requires hidden-dim == data dim)");
  cmd->add_option("--epochs", f.sched.epochs)->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--batch-size", f.sched.batch_size)
      ->check(CLI::Range(2ll, 1000000ll))
      ->capture_default_str();
  cmd->add_option("--lr", f.sched.lr)->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--decay", f.decay,
                  "learning-rate decay steps, epoch:factor")
      ->capture_default_str();
  cmd->add_option("--momentum", f.sched.momentum)
      ->check(CLI::Range(0.0, 0.999))
      ->capture_default_str();
  cmd->add_option("--labeler", f.labeler,
                  "pairwise pseudo-label method")
      ->check(CLI::IsMember({"rank", "soft-rank", "cosine", "mutual-nn", "kmeans"}))
      ->capture_default_str();
  auto* kopt = cmd->add_option("--topk", f.sched.labeler.k, "top-k size for rank labelers")
      ->check(CLI::PositiveNumber);
  cmd->callback([kopt, &f]() { f.soft_k_given = kopt->count() > 0; });
  cmd->add_option("--cosine-tau", f.sched.labeler.cosine_tau)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--labeler-kmeans-k", f.sched.labeler.batch_kmeans_k)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--lambda", f.sched.consistency.lambda,
                  "consistency ramp peak")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--ramp-length", f.sched.consistency.length)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--inc-lambda", f.sched.incremental_ce.lambda,
                  "incremental pseudo-label CE peak")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--inc-ramp-length", f.sched.incremental_ce.length)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--noise-std", f.sched.aug.noise_std)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--dropout-p", f.sched.aug.dropout_p)
      ->check(CLI::Range(0.0, 0.999))
      ->capture_default_str();
  cmd->add_flag("--no-bce", f.no_bce, "drop the pairwise BCE term");
  cmd->add_flag("--no-mse", f.no_mse, "drop the consistency term");
}

TrainSchedule resolve_schedule(const TrainFlags& f, const GlobalArgs& g) {
  TrainSchedule s = f.sched;
  s.labeler.method = labeler_from_string(f.labeler);
  if (s.labeler.method == LabelerMethod::soft_rank && !f.soft_k_given)
    s.labeler.k = 15;  // validated default for the soft variant
  s.bce_enabled = !f.no_bce;
  s.mse_enabled = !f.no_mse;
  s.seed = g.seed;
  s.threads = g.threads;
  s.lr_decay.clear();
  for (const std::string& step : f.decay) {
    auto pos = step.find(':');
    if (pos == std::string::npos)
      throw CLI::ValidationError("--decay", "expected epoch:factor");
    s.lr_decay.push_back({std::stoll(step.substr(0, pos)),
                          std::stod(step.substr(pos + 1))});
  }
  return s;
}

json schedule_json(const TrainSchedule& s, const TrainFlags& f) {
  json decay = json::array();
  for (const auto& d : s.lr_decay) decay.push_back({{"epoch", d.epoch}, {"factor", d.factor}});
  return {{"epochs", s.epochs},
          {"batch_size", s.batch_size},
          {"lr", s.lr},
          {"lr_decay", decay},
          {"momentum", s.momentum},
          {"labeler", to_string(s.labeler.method)},
          {"k", s.labeler.k},
          {"cosine_tau", s.labeler.cosine_tau},
          {"labeler_kmeans_k", s.labeler.batch_kmeans_k},
          {"lambda", s.consistency.lambda},
          {"ramp_length", s.consistency.length},
          {"inc_lambda", s.incremental_ce.lambda},
          {"inc_ramp_length", s.incremental_ce.length},
          {"noise_std", s.aug.noise_std},
          {"dropout_p", s.aug.dropout_p},
          {"bce_enabled", s.bce_enabled},
          {"mse_enabled", s.mse_enabled},
          {"cu", f.cu},
          {"hidden_dim", f.hidden_dim},
          {"identity_trunk", f.identity_trunk}};
}

std::optional<double> acc_if_labelled(const std::vector<long long>& pred,
                                      const EmbeddingDataset& ds) {
  if (!ds.any_label()) return std::nullopt;
  return clustering_acc(pred, ds.labels);
}

// ---------------------------------------------------------------- synth ----

int cmd_synth(const GlobalArgs& g, const SynthSpec& spec_in,
              const std::string& format_name, const std::string& out) {
  SynthSpec spec = spec_in;
  spec.seed = g.seed;
  FileFormat fmt = format_name == "csv" ? FileFormat::csv : FileFormat::bin;
  std::string ext = format_name == "csv" ? ".csv" : ".nvk";

  Manifest man;
  man.command = "synth";
  man.seed = g.seed;
  man.config = {{"cl", spec.class_count_labelled},
                {"cu", spec.class_count_unlabelled},
                {"ppc", spec.points_per_class},
                {"dim", spec.dim},
                {"cluster_std", spec.cluster_std},
                {"separation", spec.separation},
                {"box_scale", spec.box_scale},
                {"format", format_name}};

  SynthResult r = synth_mixture(spec);
  for (auto& [name, ds] : {std::pair<std::string, EmbeddingDataset*>{"labelled", &r.labelled},
                           {"unlabelled", &r.unlabelled},
                           {"test", &r.test}}) {
    std::string path = out + "." + name + ext;
    save_dataset(*ds, path, fmt);
    man.add_output(path);
  }
  man.write(out + ".manifest.json");
  std::cout << "wrote " << out << ".{labelled,unlabelled,test}" << ext << "\n";
  return 0;
}

// ------------------------------------------------------------- discover ----

int cmd_discover(const GlobalArgs& g, const TrainFlags& f,
                 const std::string& labelled_path,
                 const std::string& unlabelled_path,
                 const std::string& test_path, const std::string& mode,
                 const std::string& out) {
  TrainSchedule sched = resolve_schedule(f, g);

  Manifest man;
  man.command = "discover";
  man.seed = g.seed;
  man.config = schedule_json(sched, f);
  man.config["mode"] = mode;
  man.add_input("labelled", labelled_path);
  man.add_input("unlabelled", unlabelled_path);
  if (!test_path.empty()) man.add_input("test", test_path);

  EmbeddingDataset labelled = load_dataset(labelled_path, format_from_path(labelled_path));
  EmbeddingDataset unlabelled = load_dataset(unlabelled_path, format_from_path(unlabelled_path));
  long long c_l = labelled.class_count_labelled;
  if (c_l < 1)
    throw std::runtime_error("labelled dataset " + labelled_path + " has no labels");

  long long d_h = f.identity_trunk ? static_cast<long long>(labelled.dim())
                                   : f.hidden_dim;
  DualHeadModel model = init_model(static_cast<long long>(labelled.dim()), d_h,
                                   c_l, f.cu, g.seed, f.identity_trunk);
  TrainResult result;
  if (mode == "incremental") {
    model = extend_incremental(model, Rng::mix(g.seed, 1));
    result = train_incremental(labelled, unlabelled, std::move(model), sched);
  } else {
    result = train_joint(labelled, unlabelled, std::move(model), sched);
  }

  json report;
  report["mode"] = mode;
  report["acc"] = json_or_null(acc_if_labelled(result.assignments, unlabelled));

  std::vector<long long> novel_map;
  if (unlabelled.any_label()) novel_map = fit_novel_class_map(result.model, unlabelled);
  if (mode == "incremental" && !test_path.empty() && !novel_map.empty()) {
    EmbeddingDataset test = load_dataset(test_path, format_from_path(test_path));
    OldNewAll ona = old_new_all_accuracy(result.model, test, c_l, novel_map);
    report["old"] = ona.old_acc;
    report["new"] = ona.new_acc;
    report["all"] = ona.all_acc;
  }

  std::string ckpt = out + ".ckpt";
  save_model(result.model, ckpt, novel_map.empty() ? nullptr : &novel_map);
  std::string metrics = out + ".metrics.jsonl";
  write_metrics(result.log, metrics);
  std::string report_path = out + ".report.json";
  {
    std::ofstream ro(report_path);
    ro << report.dump(2) << "\n";
  }
  man.add_output(ckpt);
  man.add_output(metrics);
  man.add_output(report_path);
  man.write(out + ".manifest.json");
  std::cout << report.dump(2) << "\n";
  return 0;
}

// -------------------------------------------------------------- cluster ----

int cmd_cluster(const GlobalArgs& g, const TrainFlags& f,
                const std::string& data_path, const std::string& algo,
                long long k, const std::string& out) {
  Manifest man;
  man.command = "cluster";
  man.seed = g.seed;
  man.add_input("data", data_path);

  EmbeddingDataset data = load_dataset(data_path, format_from_path(data_path));
  std::vector<long long> assignments;
  json report;
  report["algo"] = algo;
  report["k"] = k;

  if (algo == "kmeans") {
    man.config = {{"algo", algo}, {"k", k}};
    ClusterOutcome res = lloyd(data.features, k, g.seed);
    assignments = res.assignments;
    report["inertia"] = res.inertia;
    report["iterations"] = res.iterations;
  } else {
    TrainFlags fa = f;
    fa.cu = k;
    TrainSchedule sched = resolve_schedule(fa, g);
    man.config = schedule_json(sched, fa);
    man.config["algo"] = algo;
    long long d_h = fa.identity_trunk ? static_cast<long long>(data.dim())
                                      : fa.hidden_dim;
    // head_l is unused in clustering mode; keep the smallest legal shape
    DualHeadModel model = init_model(static_cast<long long>(data.dim()), d_h, 1,
                                     k, g.seed, fa.identity_trunk);
    TrainResult result = train_clustering(data, std::move(model), sched);
    assignments = result.assignments;
    std::string metrics = out + ".metrics.jsonl";
    write_metrics(result.log, metrics);
    man.add_output(metrics);
  }

  report["acc"] = json_or_null(acc_if_labelled(assignments, data));
  bool multi = false;
  for (long long a : assignments)
    if (a != assignments[0]) { multi = true; break; }
  report["silhouette"] =
      multi ? json(silhouette(data.features, assignments, g.threads)) : json(nullptr);

  std::string assign_path = out + ".assign.txt";
  save_label_file(assignments, assign_path);
  std::string report_path = out + ".report.json";
  {
    std::ofstream ro(report_path);
    ro << report.dump(2) << "\n";
  }
  man.add_output(assign_path);
  man.add_output(report_path);
  man.write(out + ".manifest.json");
  std::cout << report.dump(2) << "\n";
  return 0;
}

// ----------------------------------------------------------- estimate-k ----

int cmd_estimate_k(const GlobalArgs& g, const std::string& labelled_path,
                   const std::string& unlabelled_path, long long probe_classes,
                   double anchor_ratio, const EstimationConfig& cfg_in,
                   const std::string& out) {
  EstimationConfig cfg = cfg_in;
  cfg.seed = g.seed;
  cfg.threads = g.threads;

  Manifest man;
  man.command = "estimate-k";
  man.seed = g.seed;
  man.config = {{"probe_classes", probe_classes}, {"anchor_ratio", anchor_ratio},
                {"cu_max", cfg.cu_max},           {"tau", cfg.tau_outlier},
                {"restarts", cfg.restarts}};
  man.add_input("labelled", labelled_path);
  man.add_input("unlabelled", unlabelled_path);

  EmbeddingDataset labelled = load_dataset(labelled_path, format_from_path(labelled_path));
  EmbeddingDataset unlabelled = load_dataset(unlabelled_path, format_from_path(unlabelled_path));
  ProbeSplit split = split_probe(labelled, probe_classes, anchor_ratio, g.seed);
  EstimationResult res =
      estimate_class_count(labelled, split, unlabelled.without_labels(), cfg);

  std::string sweep_path = out + ".sweep.jsonl";
  {
    std::ofstream so(sweep_path);
    for (const auto& rec : res.sweep) {
      json line = {{"candidate", rec.candidate},
                   {"acc_validation_probe", rec.acc_validation_probe},
                   {"cvi_unlabelled", number_or_null(rec.cvi_unlabelled)}};
      so << line.dump() << "\n";
    }
  }
  json report = {{"estimate", res.estimate},
                 {"acc_argmax", res.acc_argmax},
                 {"cvi_argmax", res.cvi_argmax},
                 {"averaged", res.averaged},
                 {"truncated", res.truncated},
                 {"anchor_classes", split.anchor_probe},
                 {"validation_classes", split.validation_probe}};
  std::string report_path = out + ".report.json";
  {
    std::ofstream ro(report_path);
    ro << report.dump(2) << "\n";
  }
  man.add_output(sweep_path);
  man.add_output(report_path);
  man.write(out + ".manifest.json");
  std::cout << report.dump(2) << "\n";
  return 0;
}

// ----------------------------------------------------------------- eval ----

int cmd_eval(const GlobalArgs& g, const std::string& pred_path,
             const std::string& gt_path, const std::string& data_path,
             const std::string& ckpt_path, const std::string& test_path,
             bool rematch, const std::string& out) {
  Manifest man;
  man.command = "eval";
  man.seed = g.seed;
  man.config = {{"rematch_on_test", rematch}};

  json report = {{"acc", nullptr},          {"silhouette", nullptr},
                 {"confusion_matrix", nullptr}, {"old", nullptr},
                 {"new", nullptr},          {"all", nullptr}};

  if (!ckpt_path.empty()) {
    if (test_path.empty())
      throw CLI::ValidationError("eval", "--extended-checkpoint requires --test");
    man.add_input("checkpoint", ckpt_path);
    man.add_input("test", test_path);
    std::vector<long long> novel_map;
    DualHeadModel model = load_model(ckpt_path, &novel_map);
    if (!model.extended)
      throw std::runtime_error("eval: checkpoint is not an extended model");
    EmbeddingDataset test = load_dataset(test_path, format_from_path(test_path));
    if (rematch) novel_map = fit_novel_class_map(model, test);
    if (novel_map.empty())
      throw std::runtime_error("eval: checkpoint carries no novel-class map");
    OldNewAll ona = old_new_all_accuracy(model, test, model.class_count_labelled,
                                         novel_map);
    report["old"] = ona.old_acc;
    report["new"] = ona.new_acc;
    report["all"] = ona.all_acc;
    report["acc"] = ona.all_acc;
  } else {
    if (pred_path.empty() || gt_path.empty())
      throw CLI::ValidationError(
          "eval", "need --pred and --gt (or --extended-checkpoint)");
    man.add_input("pred", pred_path);
    man.add_input("gt", gt_path);
    std::vector<long long> pred = load_label_file(pred_path);
    std::vector<long long> gt = load_label_file(gt_path);
    if (pred.size() != gt.size())
      throw std::runtime_error("eval: prediction and label files differ in length (" +
                               std::to_string(pred.size()) + " vs " +
                               std::to_string(gt.size()) + ")");
    report["acc"] = clustering_acc(pred, gt);
    ContingencyTable t = confusion_matrix(gt, pred);
    report["confusion_matrix"] = {{"gt_ids", t.gt_ids},
                                  {"pred_ids", t.pred_ids},
                                  {"counts", t.counts}};
    if (!data_path.empty()) {
      man.add_input("data", data_path);
      EmbeddingDataset data = load_dataset(data_path, format_from_path(data_path));
      if (data.size() != pred.size())
        throw std::runtime_error("eval: --data row count does not match --pred");
      bool multi = false;
      for (long long a : pred)
        if (a != pred[0]) { multi = true; break; }
      if (multi) report["silhouette"] = silhouette(data.features, pred, g.threads);
    }
  }

  std::cout << report.dump(2) << "\n";
  if (!out.empty()) {
    std::string report_path = out + ".report.json";
    std::ofstream ro(report_path);
    ro << report.dump(2) << "\n";
    man.add_output(report_path);
    man.write(out + ".manifest.json");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"novel category discovery on embedding datasets"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_config("--config", "", "key = value configuration file");

  GlobalArgs g;
  app.add_option("--seed", g.seed, "random seed")
      ->envname("NOVELTY_SEED")
      ->capture_default_str();
  app.add_option("--threads", g.threads, "worker thread cap")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic mixture");
  SynthSpec spec;
  std::string synth_format = "bin";
  std::string synth_out;
  synth->add_option("--cl", spec.class_count_labelled, "labelled class count")
      ->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--cu", spec.class_count_unlabelled, "novel class count")
      ->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--ppc", spec.points_per_class, "points per class")
      ->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--dim", spec.dim, "embedding dimension")
      ->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--std", spec.cluster_std, "cluster standard deviation")
      ->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--separation", spec.separation,
                    "minimum mean distance in cluster-std units")
      ->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--box-scale", spec.box_scale,
                    "hypercube side in separation units")
      ->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--format", synth_format)->check(CLI::IsMember({"csv", "bin"}))
      ->capture_default_str();
  synth->add_option("--out", synth_out, "output path prefix")->required();

  // discover
  auto* discover = app.add_subcommand("discover", "joint or incremental training");
  TrainFlags dflags;
  std::string d_labelled, d_unlabelled, d_test, d_mode = "joint", d_out;
  discover->add_option("--labelled", d_labelled)->required();
  discover->add_option("--unlabelled", d_unlabelled)->required();
  discover->add_option("--test", d_test, "held-out split for old/new/all");
  discover->add_option("--mode", d_mode)->check(CLI::IsMember({"joint", "incremental"}))
      ->capture_default_str();
  discover->add_option("--out", d_out, "output path prefix")->required();
  add_train_flags(discover, dflags);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "unsupervised clustering");
  TrainFlags cflags;
  std::string c_data, c_algo = "autonovel", c_out;
  long long c_k = 5;
  cluster->add_option("--data", c_data)->required();
  cluster->add_option("--algo", c_algo)->check(CLI::IsMember({"autonovel", "kmeans"}))
      ->capture_default_str();
  cluster->add_option("--k", c_k, "cluster count")->check(CLI::PositiveNumber)
      ->capture_default_str();
  cluster->add_option("--out", c_out, "output path prefix")->required();
  add_train_flags(cluster, cflags);

  // estimate-k
  auto* estimate = app.add_subcommand("estimate-k", "estimate the novel class count");
  std::string e_labelled, e_unlabelled, e_out;
  long long e_probe_classes = 0;
  double e_anchor_ratio = 0.8;
  EstimationConfig ecfg;
  estimate->add_option("--labelled", e_labelled)->required();
  estimate->add_option("--unlabelled", e_unlabelled)->required();
  estimate->add_option("--probe-classes", e_probe_classes,
                       "number of labelled classes used as probes")
      ->required()->check(CLI::PositiveNumber);
  estimate->add_option("--anchor-ratio", e_anchor_ratio)
      ->check(CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)))
      ->capture_default_str();
  estimate->add_option("--cu-max", ecfg.cu_max)->check(CLI::PositiveNumber)
      ->capture_default_str();
  estimate->add_option("--tau", ecfg.tau_outlier)
      ->check(CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)))
      ->capture_default_str();
  estimate->add_option("--restarts", ecfg.restarts)->check(CLI::PositiveNumber)
      ->capture_default_str();
  estimate->add_option("--out", e_out, "output path prefix")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "score predictions");
  std::string v_pred, v_gt, v_data, v_ckpt, v_test, v_out;
  bool v_rematch = false;
  eval->add_option("--pred", v_pred, "cluster id file, one per row");
  eval->add_option("--gt", v_gt, "ground-truth label file");
  eval->add_option("--data", v_data, "dataset for the Silhouette value");
  eval->add_option("--extended-checkpoint", v_ckpt,
                   "extended model checkpoint for old/new/all");
  eval->add_option("--test", v_test, "labelled test dataset");
  eval->add_flag("--rematch-on-test", v_rematch,
                 "recompute the novel-class matching on the test set");
  eval->add_option("--out", v_out, "optional output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(g, spec, synth_format, synth_out);
    if (discover->parsed())
      return cmd_discover(g, dflags, d_labelled, d_unlabelled, d_test, d_mode, d_out);
    if (cluster->parsed())
      return cmd_cluster(g, cflags, c_data, c_algo, c_k, c_out);
    if (estimate->parsed())
      return cmd_estimate_k(g, e_labelled, e_unlabelled, e_probe_classes,
                            e_anchor_ratio, ecfg, e_out);
    if (eval->parsed())
      return cmd_eval(g, v_pred, v_gt, v_data, v_ckpt, v_test, v_rematch, v_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
