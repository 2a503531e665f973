#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include "novelkit/classcount.hpp"
#include "novelkit/dataio.hpp"
#include "novelkit/evaluate.hpp"
#include "novelkit/kmeans.hpp"
#include "novelkit/losses.hpp"
#include "novelkit/model.hpp"
#include "novelkit/pseudolabel.hpp"
#include "novelkit/train.hpp"

namespace py = pybind11;
using namespace novelkit;

namespace {

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

Matrix from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  Matrix m(static_cast<std::size_t>(arr.shape(0)), static_cast<std::size_t>(arr.shape(1)));
  std::copy(arr.data(), arr.data() + m.size(), m.data.begin());
  return m;
}

py::dict report_dict(const LossReport& r) {
  py::dict d;
  d["ce"] = r.ce;
  d["bce"] = r.bce;
  d["mse"] = r.mse;
  d["omega"] = r.omega;
  d["total"] = r.total;
  return d;
}

py::list log_list(const std::vector<EpochLog>& log) {
  py::list out;
  for (const auto& e : log) {
    py::dict d = report_dict(e.mean);
    d["epoch"] = e.epoch;
    d["omega"] = e.omega;
    if (e.acc_unlabelled)
      d["acc_unlabelled"] = *e.acc_unlabelled;
    else
      d["acc_unlabelled"] = py::none();
    if (!e.pseudo_histogram.empty()) d["pseudo_histogram"] = e.pseudo_histogram;
    out.append(d);
  }
  return out;
}

LabelerConfig labeler_config(const std::string& method, int k, double cosine_tau,
                             int kmeans_k) {
  LabelerConfig cfg;
  cfg.method = labeler_from_string(method);
  cfg.k = k;
  cfg.cosine_tau = cosine_tau;
  cfg.batch_kmeans_k = kmeans_k;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "novel category discovery on embedding data: ranking-statistics "
            "pseudo-labels, dual-head training, constrained k-means and "
            "class-count estimation";

  py::class_<EmbeddingDataset>(m, "EmbeddingDataset")
      .def(py::init([](py::array_t<double, py::array::c_style | py::array::forcecast> feat,
                       std::optional<std::vector<long long>> labels) {
             EmbeddingDataset ds;
             ds.features = from_numpy(feat);
             if (labels) {
               ds.labels = std::move(*labels);
               ds.has_labels = true;
             } else {
               ds.labels.assign(ds.features.rows, -1);
               ds.has_labels = false;
             }
             long long maxl = -1;
             for (long long y : ds.labels) maxl = std::max(maxl, y);
             ds.class_count_labelled = maxl + 1;
             ds.validate();
             return ds;
           }),
           py::arg("features"), py::arg("labels") = py::none())
      .def_property_readonly("features",
                             [](const EmbeddingDataset& ds) { return to_numpy(ds.features); })
      .def_property_readonly("labels",
                             [](const EmbeddingDataset& ds) { return ds.labels; })
      .def_readwrite("class_count_labelled", &EmbeddingDataset::class_count_labelled)
      .def("__len__", &EmbeddingDataset::size)
      .def_property_readonly("dim", &EmbeddingDataset::dim)
      .def("without_labels", &EmbeddingDataset::without_labels);

  m.def("load_dataset", [](const std::string& path) {
    return load_dataset(path, format_from_path(path));
  }, py::arg("path"));
  m.def("save_dataset", [](const EmbeddingDataset& ds, const std::string& path) {
    save_dataset(ds, path, format_from_path(path));
  }, py::arg("dataset"), py::arg("path"));

  py::class_<ProbeSplit>(m, "ProbeSplit")
      .def_readonly("train_classes", &ProbeSplit::train_classes)
      .def_readonly("anchor_probe", &ProbeSplit::anchor_probe)
      .def_readonly("validation_probe", &ProbeSplit::validation_probe);

  m.def("synth_mixture",
        [](long long cl, long long cu, long long ppc, long long dim,
           double cluster_std, double separation, double box_scale,
           std::uint64_t seed) {
          SynthSpec spec{cl, cu, ppc, dim, cluster_std, separation, box_scale, seed};
          SynthResult r = synth_mixture(spec);
          return py::make_tuple(r.labelled, r.unlabelled, r.test);
        },
        py::arg("cl") = 5, py::arg("cu") = 5, py::arg("points_per_class") = 200,
        py::arg("dim") = 16, py::arg("cluster_std") = 1.0,
        py::arg("separation") = 8.0, py::arg("box_scale") = 3.0,
        py::arg("seed") = 0);

  m.def("split_probe", &split_probe, py::arg("labelled"),
        py::arg("probe_class_count"), py::arg("anchor_ratio") = 0.8,
        py::arg("seed") = 0);

  // pseudo-labels
  m.def("topk_set", [](py::array_t<double, py::array::c_style | py::array::forcecast> z, int k) {
    std::vector<double> v(z.data(), z.data() + z.size());
    return topk_set(v, k);
  }, py::arg("z"), py::arg("k"));
  m.def("rank_stats_labels", [](py::array_t<double, py::array::c_style | py::array::forcecast> b, int k) {
    return to_numpy(rank_stats_labels(from_numpy(b), k).values);
  }, py::arg("batch"), py::arg("k") = 5);
  m.def("soft_rank_labels", [](py::array_t<double, py::array::c_style | py::array::forcecast> b, int k) {
    return to_numpy(soft_rank_labels(from_numpy(b), k).values);
  }, py::arg("batch"), py::arg("k") = 15);
  m.def("cosine_labels", [](py::array_t<double, py::array::c_style | py::array::forcecast> b, double tau) {
    return to_numpy(cosine_labels(from_numpy(b), tau).values);
  }, py::arg("batch"), py::arg("tau") = 0.85);
  m.def("mutual_nn_labels", [](py::array_t<double, py::array::c_style | py::array::forcecast> b) {
    return to_numpy(mutual_nn_labels(from_numpy(b)).values);
  }, py::arg("batch"));
  m.def("kmeans_batch_labels", [](py::array_t<double, py::array::c_style | py::array::forcecast> b,
                                  long long k, std::uint64_t seed) {
    return to_numpy(kmeans_batch_labels(from_numpy(b), k, seed).values);
  }, py::arg("batch"), py::arg("k"), py::arg("seed") = 0);

  // model
  py::class_<DualHeadModel>(m, "DualHeadModel")
      .def_readonly("d_in", &DualHeadModel::d_in)
      .def_readonly("d_h", &DualHeadModel::d_h)
      .def_readonly("class_count_labelled", &DualHeadModel::class_count_labelled)
      .def_readonly("class_count_unlabelled", &DualHeadModel::class_count_unlabelled)
      .def_readonly("extended", &DualHeadModel::extended)
      .def_readonly("identity_trunk", &DualHeadModel::identity_trunk)
      .def_property_readonly("trunk_w",
                             [](const DualHeadModel& m_) { return to_numpy(m_.trunk_w); })
      .def_property_readonly("head_l_w",
                             [](const DualHeadModel& m_) { return to_numpy(m_.head_l_w); })
      .def_property_readonly("head_u_w",
                             [](const DualHeadModel& m_) { return to_numpy(m_.head_u_w); });

  m.def("init_model", &init_model, py::arg("d_in"), py::arg("d_h"),
        py::arg("c_l"), py::arg("c_u"), py::arg("seed") = 0,
        py::arg("identity_trunk") = false);
  m.def("forward", [](const DualHeadModel& model,
                      py::array_t<double, py::array::c_style | py::array::forcecast> x) {
    std::vector<double> v(x.data(), x.data() + x.size());
    ForwardResult r = forward(model, v);
    py::dict d;
    d["z"] = r.z;
    d["p_l"] = r.p_l;
    d["p_u"] = r.p_u;
    return d;
  }, py::arg("model"), py::arg("x"));
  m.def("extend_incremental", &extend_incremental, py::arg("model"),
        py::arg("seed") = 0);
  m.def("save_model", [](const DualHeadModel& model, const std::string& path) {
    save_model(model, path);
  }, py::arg("model"), py::arg("path"));
  m.def("load_model", [](const std::string& path) { return load_model(path); },
        py::arg("path"));

  // losses
  m.def("rampup", [](double r, double lam, double length) {
    return rampup(r, RampSchedule{lam, length});
  }, py::arg("r"), py::arg("lam") = 5.0, py::arg("length") = 50.0);
  m.def("ce_loss", [](py::array_t<double, py::array::c_style | py::array::forcecast> p,
                      std::vector<long long> y) {
    CeResult r = ce_loss(from_numpy(p), y);
    return py::make_tuple(r.value, to_numpy(r.dlogits));
  }, py::arg("p"), py::arg("y"));
  m.def("bce_loss", [](py::array_t<double, py::array::c_style | py::array::forcecast> p,
                       py::array_t<double, py::array::c_style | py::array::forcecast> s) {
    PseudoLabelMatrix pl;
    pl.values = from_numpy(s);
    BceResult r = bce_loss(from_numpy(p), pl);
    return py::make_tuple(r.value, to_numpy(r.dprob));
  }, py::arg("p"), py::arg("s"));
  m.def("mse_consistency", [](py::array_t<double, py::array::c_style | py::array::forcecast> p,
                              py::array_t<double, py::array::c_style | py::array::forcecast> q) {
    MseResult r = mse_consistency(from_numpy(p), from_numpy(q));
    return py::make_tuple(r.value, to_numpy(r.dp), to_numpy(r.dp_hat));
  }, py::arg("p"), py::arg("p_hat"));

  // training
  py::class_<TrainSchedule>(m, "TrainSchedule")
      .def(py::init([](long long epochs, long long batch_size, double lr,
                       std::vector<std::pair<long long, double>> decay,
                       double momentum, const std::string& labeler, int k,
                       double cosine_tau, int labeler_kmeans_k, double lam,
                       double ramp_length, double inc_lambda,
                       double inc_ramp_length, double noise_std,
                       double dropout_p, std::uint64_t seed, bool bce, bool mse,
                       int threads) {
             TrainSchedule s;
             s.epochs = epochs;
             s.batch_size = batch_size;
             s.lr = lr;
             s.lr_decay.clear();
             for (auto& [e, f] : decay) s.lr_decay.push_back({e, f});
             s.momentum = momentum;
             s.labeler = labeler_config(labeler, k, cosine_tau, labeler_kmeans_k);
             s.consistency = {lam, ramp_length};
             s.incremental_ce = {inc_lambda, inc_ramp_length};
             s.aug.noise_std = noise_std;
             s.aug.dropout_p = dropout_p;
             s.seed = seed;
             s.bce_enabled = bce;
             s.mse_enabled = mse;
             s.threads = threads;
             s.validate();
             return s;
           }),
           py::arg("epochs") = 200, py::arg("batch_size") = 128,
           py::arg("lr") = 0.1,
           py::arg("decay") = std::vector<std::pair<long long, double>>{{170, 0.1}},
           py::arg("momentum") = 0.9, py::arg("labeler") = "rank",
           py::arg("k") = 5, py::arg("cosine_tau") = 0.85,
           py::arg("labeler_kmeans_k") = 5, py::arg("lam") = 5.0,
           py::arg("ramp_length") = 50.0, py::arg("inc_lambda") = 0.05,
           py::arg("inc_ramp_length") = 50.0, py::arg("noise_std") = 0.1,
           py::arg("dropout_p") = 0.1, py::arg("seed") = 0,
           py::arg("bce") = true, py::arg("mse") = true, py::arg("threads") = 1)
      .def_readwrite("epochs", &TrainSchedule::epochs)
      .def_readwrite("seed", &TrainSchedule::seed);

  auto train_out = [](TrainResult&& r) {
    py::dict d;
    d["model"] = std::move(r.model);
    d["log"] = log_list(r.log);
    d["assignments"] = r.assignments;
    return d;
  };
  m.def("train_joint", [train_out](const EmbeddingDataset& lab, const EmbeddingDataset& unlab,
                                   const DualHeadModel& model, const TrainSchedule& s) {
    return train_out(train_joint(lab, unlab, model, s));
  }, py::arg("labelled"), py::arg("unlabelled"), py::arg("model"), py::arg("schedule"));
  m.def("train_incremental", [train_out](const EmbeddingDataset& lab, const EmbeddingDataset& unlab,
                                         const DualHeadModel& model, const TrainSchedule& s) {
    return train_out(train_incremental(lab, unlab, model, s));
  }, py::arg("labelled"), py::arg("unlabelled"), py::arg("model"), py::arg("schedule"));
  m.def("train_clustering", [train_out](const EmbeddingDataset& unlab,
                                        const DualHeadModel& model, const TrainSchedule& s) {
    return train_out(train_clustering(unlab, model, s));
  }, py::arg("unlabelled"), py::arg("model"), py::arg("schedule"));

  // k-means
  py::class_<ClusterOutcome>(m, "ClusterOutcome")
      .def_readonly("assignments", &ClusterOutcome::assignments)
      .def_readonly("inertia", &ClusterOutcome::inertia)
      .def_readonly("iterations", &ClusterOutcome::iterations)
      .def_readonly("inertia_trace", &ClusterOutcome::inertia_trace)
      .def_property_readonly("centroids",
                             [](const ClusterOutcome& c) { return to_numpy(c.centroids); });

  m.def("kmeanspp_init", [](py::array_t<double, py::array::c_style | py::array::forcecast> pts,
                            long long k, std::uint64_t seed) {
    return to_numpy(kmeanspp_init(from_numpy(pts), k, seed));
  }, py::arg("points"), py::arg("k"), py::arg("seed") = 0);
  m.def("lloyd", [](py::array_t<double, py::array::c_style | py::array::forcecast> pts,
                    long long k, std::uint64_t seed) {
    return lloyd(from_numpy(pts), k, seed);
  }, py::arg("points"), py::arg("k"), py::arg("seed") = 0);
  m.def("constrained_lloyd",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> pts,
           std::vector<long long> forced, long long k, std::uint64_t seed,
           std::optional<py::array_t<double, py::array::c_style | py::array::forcecast>> init) {
          Matrix init_m;
          const Matrix* init_p = nullptr;
          if (init) {
            init_m = from_numpy(*init);
            init_p = &init_m;
          }
          return constrained_lloyd(from_numpy(pts), forced, k, seed, init_p);
        },
        py::arg("points"), py::arg("forced"), py::arg("k"), py::arg("seed") = 0,
        py::arg("init_centroids") = py::none());

  // evaluation
  m.def("hungarian", [](py::array_t<double, py::array::c_style | py::array::forcecast> cost) {
    Assignment a = hungarian(from_numpy(cost));
    return py::make_tuple(a.pairs, a.cost);
  }, py::arg("cost"));
  m.def("clustering_acc", [](std::vector<long long> pred, std::vector<long long> gt) {
    return clustering_acc(pred, gt);
  }, py::arg("pred"), py::arg("gt"));
  m.def("silhouette", [](py::array_t<double, py::array::c_style | py::array::forcecast> pts,
                         std::vector<long long> assign, int threads) {
    return silhouette(from_numpy(pts), assign, threads);
  }, py::arg("points"), py::arg("assignments"), py::arg("threads") = 1);
  m.def("fit_novel_class_map", &fit_novel_class_map, py::arg("model"),
        py::arg("train_unlabelled"));
  m.def("old_new_all_accuracy",
        [](const DualHeadModel& model, const EmbeddingDataset& test, long long c_l,
           std::vector<long long> novel_map) {
          OldNewAll r = old_new_all_accuracy(model, test, c_l, novel_map);
          py::dict d;
          d["old"] = r.old_acc;
          d["new"] = r.new_acc;
          d["all"] = r.all_acc;
          return d;
        },
        py::arg("model"), py::arg("test"), py::arg("c_l"), py::arg("novel_class_map"));

  // class-count estimation
  m.def("estimate_class_count",
        [](const EmbeddingDataset& labelled, const ProbeSplit& split,
           const EmbeddingDataset& unlabelled, long long cu_max, double tau,
           long long restarts, std::uint64_t seed, int threads) {
          EstimationConfig cfg{cu_max, tau, restarts, seed, threads};
          EstimationResult r = estimate_class_count(labelled, split, unlabelled, cfg);
          py::list sweep;
          for (const auto& rec : r.sweep) {
            py::dict d;
            d["candidate"] = rec.candidate;
            d["acc_validation_probe"] = rec.acc_validation_probe;
            d["cvi_unlabelled"] = rec.cvi_unlabelled;
            sweep.append(d);
          }
          py::dict d;
          d["estimate"] = r.estimate;
          d["acc_argmax"] = r.acc_argmax;
          d["cvi_argmax"] = r.cvi_argmax;
          d["averaged"] = r.averaged;
          d["truncated"] = r.truncated;
          d["sweep"] = sweep;
          return d;
        },
        py::arg("labelled"), py::arg("split"), py::arg("unlabelled"),
        py::arg("cu_max") = 100, py::arg("tau") = 0.01, py::arg("restarts") = 5,
        py::arg("seed") = 0, py::arg("threads") = 1);
}
