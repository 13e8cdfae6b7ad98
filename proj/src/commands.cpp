#include "pdball/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pdball/parallel.hpp"
#include "pdball/tape.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdball {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

template <class T>
T get_or(const json& j, const char* key, T dflt, std::vector<std::string>& errs,
         const std::string& scope) {
  if (!j.contains(key)) return dflt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    errs.push_back(scope + "." + key + ": wrong type");
    return dflt;
  }
}

json to_json(const RunConfig& cfg) {
  json deltas = cfg.stability.deltas;
  json filts = json::array();
  for (const FiltrationConfig& f : cfg.filtrations)
    filts.push_back(json{{"type", f.type},
                         {"max_dim", f.max_dim},
                         {"max_scale", f.max_scale},
                         {"directions", f.directions},
                         {"threshold", f.threshold}});
  return json{
      {"seed", cfg.seed},
      {"out", cfg.out},
      {"cache", cfg.cache_dir},
      {"dataset",
       {{"kind", cfg.dataset.kind},
        {"synth", cfg.dataset.synth},
        {"n_per_class", cfg.dataset.n_per_class},
        {"path", cfg.dataset.path},
        {"images", cfg.dataset.images},
        {"labels", cfg.dataset.labels},
        {"limit", cfg.dataset.limit},
        {"test_images", cfg.dataset.test_images},
        {"test_labels", cfg.dataset.test_labels},
        {"test_limit", cfg.dataset.test_limit},
        {"test_fraction", cfg.dataset.test_fraction},
        {"classes", cfg.dataset.classes}}},
      {"filtrations", std::move(filts)},
      {"representation",
       {{"variant", to_string(cfg.spec.variant)},
        {"m", cfg.spec.m},
        {"K", cfg.spec.K},
        {"n_hom_dims", cfg.spec.n_hom_dims},
        {"essential_policy", to_string(cfg.spec.essential_policy)}}},
      {"train",
       {{"lr", cfg.train.lr},
        {"beta1", cfg.train.beta1},
        {"beta2", cfg.train.beta2},
        {"batch", cfg.train.batch},
        {"epochs", cfg.train.epochs},
        {"lr_halve_every", cfg.train.lr_halve_every},
        {"dropout", cfg.train.dropout},
        {"folds", cfg.train.folds}}},
      {"baseline", {{"bins", cfg.baseline_bins}}},
      {"stability",
       {{"n_diagrams", cfg.stability.n_diagrams},
        {"points", cfg.stability.points},
        {"deltas", std::move(deltas)}}}};
}

void echo_config(const RunConfig& cfg) {
  std::ofstream os = open_out((fs::path(cfg.out) / "resolved_config.json").string());
  os << to_json(cfg).dump(2) << '\n';
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(origin + ": invalid JSON: " + e.what());
  }
  std::vector<std::string> errs;
  RunConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0, errs, "");
  cfg.out = get_or<std::string>(j, "out", "out", errs, "");
  cfg.cache_dir = get_or<std::string>(j, "cache", "", errs, "");
  if (cfg.out.empty()) errs.push_back("out: must be non-empty");

  const json jd = j.value("dataset", json::object());
  DatasetConfig& d = cfg.dataset;
  d.kind = get_or<std::string>(jd, "kind", d.kind, errs, "dataset");
  d.synth = get_or<std::string>(jd, "synth", d.synth, errs, "dataset");
  d.n_per_class = get_or<int>(jd, "n_per_class", d.n_per_class, errs, "dataset");
  d.path = get_or<std::string>(jd, "path", "", errs, "dataset");
  d.images = get_or<std::string>(jd, "images", "", errs, "dataset");
  d.labels = get_or<std::string>(jd, "labels", "", errs, "dataset");
  d.limit = get_or<long long>(jd, "limit", -1, errs, "dataset");
  d.test_images = get_or<std::string>(jd, "test_images", "", errs, "dataset");
  d.test_labels = get_or<std::string>(jd, "test_labels", "", errs, "dataset");
  d.test_limit = get_or<long long>(jd, "test_limit", -1, errs, "dataset");
  d.test_fraction = get_or<double>(jd, "test_fraction", 0.0, errs, "dataset");
  d.classes = get_or<std::vector<int>>(jd, "classes", {}, errs, "dataset");

  const bool graphs = d.kind == "synth-graphs" || d.kind == "graph-dir";
  const bool images = d.kind == "idx" || d.kind == "synth-digits";
  if (!graphs && !images) errs.push_back("dataset.kind: unknown kind '" + d.kind + "'");
  if (d.kind == "synth-graphs") {
    try {
      synth_kind_from_string(d.synth);
    } catch (const std::exception& e) {
      errs.push_back(std::string("dataset.synth: ") + e.what());
    }
  }
  if ((d.kind == "synth-graphs" || d.kind == "synth-digits") && d.n_per_class < 1)
    errs.push_back("dataset.n_per_class: must be >= 1");
  if (d.kind == "graph-dir" && d.path.empty()) errs.push_back("dataset.path: required for graph-dir");
  if (d.kind == "idx" && (d.images.empty() || d.labels.empty()))
    errs.push_back("dataset.images/labels: required for idx");
  if (d.test_images.empty() != d.test_labels.empty())
    errs.push_back("dataset.test_images/test_labels: must be given together");
  if (!(d.test_fraction >= 0.0 && d.test_fraction <= 0.9))
    errs.push_back("dataset.test_fraction: must be in [0, 0.9]");
  if (!d.test_images.empty() && d.kind != "idx")
    errs.push_back("dataset.test_images: only valid for idx datasets");
  if (!d.classes.empty() && d.kind != "idx")
    errs.push_back("dataset.classes: only valid for idx datasets");
  if (!d.classes.empty() &&
      std::set<int>(d.classes.begin(), d.classes.end()).size() != d.classes.size())
    errs.push_back("dataset.classes: duplicate labels");

  if (j.contains("filtrations")) {
    cfg.filtrations.clear();
    if (!j.at("filtrations").is_array() || j.at("filtrations").empty()) {
      errs.push_back("filtrations: must be a non-empty array");
    } else {
      int idx = 0;
      for (const json& jf : j.at("filtrations")) {
        const std::string scope = "filtrations[" + std::to_string(idx++) + "]";
        FiltrationConfig f;
        f.type = get_or<std::string>(jf, "type", f.type, errs, scope);
        f.max_dim = get_or<int>(jf, "max_dim", f.max_dim, errs, scope);
        f.max_scale = get_or<double>(jf, "max_scale", f.max_scale, errs, scope);
        f.directions = get_or<int>(jf, "directions", f.directions, errs, scope);
        f.threshold = get_or<double>(jf, "threshold", f.threshold, errs, scope);
        try {
          validate(f, graphs);
        } catch (const std::exception& e) {
          errs.push_back(scope + ": " + e.what());
        }
        cfg.filtrations.push_back(std::move(f));
      }
    }
  } else if (images) {
    cfg.filtrations = {FiltrationConfig{"cubical", 2, -1.0, 1, 0.5}};
  }

  const json jr = j.value("representation", json::object());
  try {
    cfg.spec.variant = variant_from_string(get_or<std::string>(jr, "variant", "poinc", errs, "representation"));
  } catch (const std::exception& e) {
    errs.push_back(std::string("representation.variant: ") + e.what());
  }
  cfg.spec.m = get_or<int>(jr, "m", cfg.spec.m, errs, "representation");
  cfg.spec.K = get_or<int>(jr, "K", cfg.spec.K, errs, "representation");
  cfg.spec.n_hom_dims = get_or<int>(jr, "n_hom_dims", cfg.spec.n_hom_dims, errs, "representation");
  try {
    cfg.spec.essential_policy = essential_policy_from_string(
        get_or<std::string>(jr, "essential_policy", "max-scale", errs, "representation"));
  } catch (const std::exception& e) {
    errs.push_back(std::string("representation.essential_policy: ") + e.what());
  }
  if (cfg.spec.m < 2) errs.push_back("representation.m: must be >= 2");
  if (cfg.spec.K < 1) errs.push_back("representation.K: must be >= 1");
  if (cfg.spec.n_hom_dims < 1 || cfg.spec.n_hom_dims > 3)
    errs.push_back("representation.n_hom_dims: must be in [1,3]");
  if (cfg.spec.essential_policy == EssentialPolicy::separate_base && cfg.spec.K < 2)
    errs.push_back("representation.K: separate-base policy needs K >= 2");

  const json jt = j.value("train", json::object());
  cfg.train.lr = get_or<double>(jt, "lr", cfg.train.lr, errs, "train");
  cfg.train.beta1 = get_or<double>(jt, "beta1", cfg.train.beta1, errs, "train");
  cfg.train.beta2 = get_or<double>(jt, "beta2", cfg.train.beta2, errs, "train");
  cfg.train.batch = get_or<int>(jt, "batch", cfg.train.batch, errs, "train");
  cfg.train.epochs = get_or<int>(jt, "epochs", cfg.train.epochs, errs, "train");
  cfg.train.lr_halve_every = get_or<int>(jt, "lr_halve_every", cfg.train.lr_halve_every, errs, "train");
  cfg.train.dropout = get_or<double>(jt, "dropout", cfg.train.dropout, errs, "train");
  cfg.train.folds = get_or<int>(jt, "folds", cfg.train.folds, errs, "train");
  try {
    validate(cfg.train);
  } catch (const std::exception& e) {
    errs.push_back(std::string("train: ") + e.what());
  }

  cfg.baseline_bins = get_or<int>(j.value("baseline", json::object()), "bins", 10, errs, "baseline");
  if (cfg.baseline_bins < 1) errs.push_back("baseline.bins: must be >= 1");

  const json js = j.value("stability", json::object());
  cfg.stability.n_diagrams = get_or<int>(js, "n_diagrams", cfg.stability.n_diagrams, errs, "stability");
  cfg.stability.points = get_or<int>(js, "points", cfg.stability.points, errs, "stability");
  cfg.stability.deltas = get_or<std::vector<double>>(js, "deltas", cfg.stability.deltas, errs, "stability");
  if (cfg.stability.n_diagrams < 1) errs.push_back("stability.n_diagrams: must be >= 1");
  if (cfg.stability.points < 1) errs.push_back("stability.points: must be >= 1");
  if (cfg.stability.deltas.empty()) errs.push_back("stability.deltas: must be non-empty");
  for (double dlt : cfg.stability.deltas)
    if (!(dlt > 0.0) || !std::isfinite(dlt)) {
      errs.push_back("stability.deltas: entries must be positive and finite");
      break;
    }
  std::sort(cfg.stability.deltas.rbegin(), cfg.stability.deltas.rend());

  if (!errs.empty()) {
    std::string msg = origin + ": invalid config:";
    for (const std::string& e : errs) msg += "\n  - " + e;
    throw std::runtime_error(msg);
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return run_config_from_json_text(ss.str(), path);
}

namespace {

GraphDataset take(const GraphDataset& ds, const std::vector<int>& idx) {
  GraphDataset out;
  out.n_classes = ds.n_classes;
  for (int i : idx) {
    out.graphs.push_back(ds.graphs[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

ImageDataset take(const ImageDataset& ds, const std::vector<int>& idx) {
  ImageDataset out;
  out.n_classes = ds.n_classes;
  for (int i : idx) {
    out.images.push_back(ds.images[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

// Per-class round-robin holdout: deterministic given the rng.
void stratified_split(const std::vector<int>& labels, double frac, std::mt19937_64& rng,
                      std::vector<int>& train_idx, std::vector<int>& test_idx) {
  const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  for (auto& grp : by_class) {
    std::shuffle(grp.begin(), grp.end(), rng);
    const int k = static_cast<int>(std::lround(frac * grp.size()));
    for (std::size_t i = 0; i < grp.size(); ++i)
      (static_cast<int>(i) < k ? test_idx : train_idx).push_back(grp[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  if (test_idx.empty()) throw std::runtime_error("test_fraction leaves an empty test split");
  if (train_idx.empty()) throw std::runtime_error("test_fraction leaves an empty train split");
}

void filter_classes(ImageDataset& ds, const std::vector<int>& classes, long long limit) {
  if (classes.empty()) return;
  ImageDataset out;
  out.n_classes = static_cast<int>(classes.size());
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto it = std::find(classes.begin(), classes.end(), ds.labels[i]);
    if (it == classes.end()) continue;
    if (limit >= 0 && static_cast<long long>(out.images.size()) >= limit) break;
    out.images.push_back(std::move(ds.images[i]));
    out.labels.push_back(static_cast<int>(it - classes.begin()));
  }
  if (out.images.empty()) throw std::runtime_error("class filter removed every sample");
  ds = std::move(out);
}

std::string dataset_hash(const RunConfig& cfg, const char* part) {
  std::ostringstream ss;
  const DatasetConfig& d = cfg.dataset;
  ss << d.kind << ';' << d.synth << ';' << d.n_per_class << ';' << d.path << ';' << d.images << ';'
     << d.labels << ';' << d.limit << ';' << d.test_images << ';' << d.test_labels << ';'
     << d.test_limit << ';' << d.test_fraction << ';' << cfg.seed << ';' << part << ';';
  for (int c : d.classes) ss << c << ',';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(ss.str()));
  return buf;
}

}  // namespace

Prepared prepare_diagrams(const RunConfig& cfg) {
  const DatasetConfig& d = cfg.dataset;
  const bool graphs = d.kind == "synth-graphs" || d.kind == "graph-dir";

  auto compute_part = [&cfg](const auto& raw, const char* tag) -> DiagramDataset {
    if (cfg.cache_dir.empty()) return compute_diagrams(raw, cfg.filtrations);
    const std::string hash = filtration_config_hash(cfg.filtrations) + "-" + dataset_hash(cfg, tag);
    const std::string dir = (fs::path(cfg.cache_dir) / tag).string();
    if (auto cached = read_diagram_cache(dir, hash)) return *cached;
    DiagramDataset dd = compute_diagrams(raw, cfg.filtrations);
    write_diagram_cache(dir, dd, hash);
    return dd;
  };

  Prepared out;
  std::mt19937_64 split_rng(cfg.seed ^ 0x5deece66dULL);
  if (graphs) {
    GraphDataset g = d.kind == "synth-graphs"
                         ? synth_graphs(synth_kind_from_string(d.synth), d.n_per_class, cfg.seed)
                         : load_graph_dataset(d.path);
    if (d.test_fraction > 0.0) {
      std::vector<int> tr, te;
      stratified_split(g.labels, d.test_fraction, split_rng, tr, te);
      out.train = compute_part(take(g, tr), "train");
      out.test = compute_part(take(g, te), "test");
    } else {
      out.train = compute_part(g, "train");
    }
    return out;
  }

  ImageDataset im = d.kind == "idx" ? load_idx_images(d.images, d.labels,
                                                      d.classes.empty() ? d.limit : -1)
                                    : synth_digits(d.n_per_class, cfg.seed);
  filter_classes(im, d.classes, d.limit);
  if (d.kind == "idx" && !d.test_images.empty()) {
    ImageDataset imt =
        load_idx_images(d.test_images, d.test_labels, d.classes.empty() ? d.test_limit : -1);
    filter_classes(imt, d.classes, d.test_limit);
    out.train = compute_part(im, "train");
    out.test = compute_part(imt, "test");
  } else if (d.test_fraction > 0.0) {
    std::vector<int> tr, te;
    stratified_split(im.labels, d.test_fraction, split_rng, tr, te);
    out.train = compute_part(take(im, tr), "train");
    out.test = compute_part(take(im, te), "test");
  } else {
    out.train = compute_part(im, "train");
  }
  return out;
}

namespace {

void write_summary_csv(const std::string& path, const DiagramDataset& ds) {
  std::ofstream os = open_out(path);
  os << "sample,slot,label,dim,finite_points,essential_points,total_persistence\n";
  for (std::size_t i = 0; i < ds.diagrams.size(); ++i)
    for (std::size_t s = 0; s < ds.diagrams[i].size(); ++s)
      for (int dim = 0; dim <= 2; ++dim) {
        long long fin = 0, ess = 0;
        double tp = 0.0;
        for (const DiagramPoint& pt : ds.diagrams[i][s].points) {
          if (pt.dim != dim) continue;
          if (pt.essential()) {
            ess += pt.mult;
          } else {
            fin += pt.mult;
            tp += pt.mult * (pt.death - pt.birth);
          }
        }
        if (fin == 0 && ess == 0 && dim > 0) continue;
        os << i << ',' << ds.stats[s].name << ',' << ds.labels[i] << ',' << dim << ',' << fin
           << ',' << ess << ',' << fmt(tp) << '\n';
      }
}

void dump_phi_csv(const std::string& path, const DiagramDataset& ds, const ModelSpec& spec,
                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<ReprParams> repr = repr_params_for(ds, spec, rng);
  std::ofstream os = open_out(path);
  os << "sample,slot,dim,birth,death";
  for (int c = 0; c < spec.m; ++c) os << ",phi_" << c;
  os << '\n';
  const std::size_t n = std::min<std::size_t>(ds.diagrams.size(), 8);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < ds.diagrams[i].size(); ++s) {
      const ReprParams& p = repr[s];
      for (const DiagramPoint& pt : ds.diagrams[i][s].points) {
        if (pt.dim >= p.n_hom_dims) continue;
        const double death = pt.essential() ? p.max_scale : pt.death;
        const Vec v = rho<double>(pt.birth, death, p.rho_cfg);
        const Vec img = phi<double, double>(v, p.phi_at(pt.dim, 0).theta);
        os << i << ',' << ds.stats[s].name << ',' << pt.dim << ',' << fmt(pt.birth) << ','
           << fmt(death);
        for (double c : img) os << ',' << fmt(c);
        os << '\n';
      }
    }
}

}  // namespace

int cmd_diagrams(const RunConfig& cfg, const CliOptions& opt) {
  Prepared p = prepare_diagrams(cfg);
  ensure_dir(cfg.out);
  echo_config(cfg);
  const std::string hash = filtration_config_hash(cfg.filtrations);
  write_diagram_cache((fs::path(cfg.out) / "diagrams").string(), p.train, hash);
  write_summary_csv((fs::path(cfg.out) / "summary.csv").string(), p.train);
  if (p.test) {
    write_diagram_cache((fs::path(cfg.out) / "diagrams_test").string(), *p.test, hash);
    write_summary_csv((fs::path(cfg.out) / "summary_test.csv").string(), *p.test);
  }
  if (!opt.dump_phi.empty()) dump_phi_csv(opt.dump_phi, p.train, cfg.spec, cfg.seed);
  std::cout << "diagrams: " << p.train.diagrams.size() << " samples, " << p.train.stats.size()
            << " filtration slots, " << p.train.n_classes << " classes -> " << cfg.out << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, const CliOptions&) {
  Prepared p = prepare_diagrams(cfg);
  ensure_dir(cfg.out);
  echo_config(cfg);
  std::ofstream log = open_out((fs::path(cfg.out) / "log.csv").string());
  log << "fold,epoch,train_loss,val_acc,lr\n";
  std::ofstream metrics = open_out((fs::path(cfg.out) / "metrics.csv").string());
  if (p.test) {
    SingleRunResult r = train_single(p.train, *p.test, cfg.spec, cfg.train);
    for (const EpochLog& e : r.log)
      log << e.fold << ',' << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.val_acc) << ','
          << fmt(e.lr) << '\n';
    metrics << "variant,n_train,n_test,test_acc\n"
            << to_string(cfg.spec.variant) << ',' << p.train.diagrams.size() << ','
            << p.test->diagrams.size() << ',' << fmt(r.test_acc) << '\n';
    std::ofstream ck = open_out((fs::path(cfg.out) / "checkpoint.json").string());
    save_checkpoint(ck, r.model);
    std::cout << "train: test accuracy " << fmt(r.test_acc) << " -> " << cfg.out << '\n';
  } else {
    CvResult r = train_cv(p.train, cfg.spec, cfg.train);
    for (const EpochLog& e : r.log)
      log << e.fold << ',' << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.val_acc) << ','
          << fmt(e.lr) << '\n';
    metrics << "variant,folds,mean_acc,std_acc\n"
            << to_string(cfg.spec.variant) << ',' << r.folds.size() << ',' << fmt(r.mean_acc)
            << ',' << fmt(r.std_acc) << '\n';
    std::ofstream folds = open_out((fs::path(cfg.out) / "folds.csv").string());
    folds << "fold,best_epoch,best_val_acc\n";
    for (const FoldResult& f : r.folds)
      folds << f.fold << ',' << f.best_epoch << ',' << fmt(f.best_val_acc) << '\n';
    std::cout << "train: cv accuracy " << fmt(r.mean_acc) << " +/- " << fmt(r.std_acc) << " -> "
              << cfg.out << '\n';
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const CliOptions& opt) {
  if (opt.checkpoint.empty()) throw std::invalid_argument("eval needs --checkpoint");
  std::ifstream is(opt.checkpoint);
  if (!is) throw std::runtime_error("cannot open checkpoint " + opt.checkpoint);
  const Model model = load_checkpoint(is);
  Prepared p = prepare_diagrams(cfg);
  const DiagramDataset& ds = p.test ? *p.test : p.train;
  if (model.repr.size() != ds.stats.size())
    throw std::runtime_error("checkpoint expects " + std::to_string(model.repr.size()) +
                             " filtration slots, dataset has " + std::to_string(ds.stats.size()));
  const int n = static_cast<int>(ds.diagrams.size());
  std::vector<int> pred(n, -1);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      const Vec f = sample_features(model, ds.diagrams[i]);
      const Vec probs = head_forward_eval(model, f, 1);
      pred[i] = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  ensure_dir(cfg.out);
  echo_config(cfg);
  std::ofstream os = open_out((fs::path(cfg.out) / "eval.csv").string());
  os << "scope,n,accuracy\n";
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += pred[i] == ds.labels[i];
  os << "all," << n << ',' << fmt(double(hits) / n) << '\n';
  for (int c = 0; c < ds.n_classes; ++c) {
    int nc = 0, hc = 0;
    for (int i = 0; i < n; ++i)
      if (ds.labels[i] == c) {
        ++nc;
        hc += pred[i] == c;
      }
    os << "class-" << c << ',' << nc << ',' << fmt(nc ? double(hc) / nc : 0.0) << '\n';
  }
  std::cout << "eval: accuracy " << fmt(double(hits) / n) << " on " << n << " samples\n";
  return 0;
}

namespace {

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
}

constexpr double kGradTol = 1e-3;
constexpr double kFdStep = 1e-5;

double central(const std::function<double(double)>& f, double x) {
  return (f(x + kFdStep) - f(x - kFdStep)) / (2.0 * kFdStep);
}

PersistenceDiagram random_diagram(std::mt19937_64& rng, int n_dims, int pts) {
  std::uniform_real_distribution<double> ub(0.02, 0.8), up(0.05, 1.0);
  PersistenceDiagram d;
  d.max_filtration = 2.0;
  for (int dim = 0; dim < n_dims; ++dim) {
    for (int k = 0; k < pts; ++k) {
      const double b = ub(rng);
      d.points.push_back({dim, b, b + up(rng), 1});
    }
    d.points.push_back({dim, ub(rng), kInf, 1});
  }
  normalize(d);
  return d;
}

struct GradChecker {
  std::vector<GradCheckRow>& rows;
  bool corrupt;

  void add(const std::string& group, int param, double analytic, double numeric) {
    if (corrupt && rows.size() % 5 == 0) analytic += 0.01 * (1.0 + std::abs(analytic));
    const double e = rel_err(analytic, numeric);
    rows.push_back({group, param, analytic, numeric, e, e <= kGradTol});
  }
};

}  // namespace

std::vector<GradCheckRow> run_gradcheck(std::uint64_t seed, bool corrupt) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckRow> rows;
  GradChecker ck{rows, corrupt};
  auto u = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  // ρ: Jacobian w.r.t. (birth, death).
  for (int rep = 0; rep < 15; ++rep) {
    const RhoConfig rc = lattice_rho_config(4, u(0.5, 1.5), u(0.05, 0.2), u(0.5, 2.0));
    const double b = u(0.1, 0.9), dth = b + u(0.1, 1.5);
    const Jacobian J = jac_rho_point(b, dth, rc);
    for (int i = 0; i < rc.dim(); ++i) {
      ck.add("rho", i * 2, J.at(i, 0),
             central([&](double x) { return rho<double>(x, dth, rc)[i]; }, b));
      ck.add("rho", i * 2 + 1, J.at(i, 1),
             central([&](double x) { return rho<double>(b, x, rc)[i]; }, dth));
    }
  }

  // φ: Jacobians w.r.t. the input point and w.r.t. θ, away from the acos
  // saturation (resample if any clamp fires).
  const int m = 3;
  for (int rep = 0; rep < 15; ++rep) {
    Vec x(m), th(m);
    for (int tries = 0;; ++tries) {
      for (double& c : x) c = u(-0.8, 0.8);
      for (double& c : th) c = u(-0.5, 0.5);
      reset_clamp_events();
      phi<double, double>(x, th);
      if (clamp_events() == 0 || tries > 50) break;
    }
    const auto [Jx, Jt] = jac_phi(x, th);
    for (int i = 0; i < m; ++i)
      for (int jc = 0; jc < m; ++jc) {
        ck.add("phi-x", i * m + jc, Jx.at(i, jc), central(
                                                      [&](double v) {
                                                        Vec xx = x;
                                                        xx[jc] = v;
                                                        return phi<double, double>(xx, th)[i];
                                                      },
                                                      x[jc]));
        ck.add("phi-theta", i * m + jc, Jt.at(i, jc), central(
                                                          [&](double v) {
                                                            Vec tt = th;
                                                            tt[jc] = v;
                                                            return phi<double, double>(x, tt)[i];
                                                          },
                                                          th[jc]));
      }
  }

  // Ball primitives.
  auto rand_ball = [&](double max_norm) {
    Vec p(m);
    for (double& c : p) c = u(-1.0, 1.0);
    double nn = std::sqrt(std::inner_product(p.begin(), p.end(), p.begin(), 0.0));
    const double target = u(0.1, max_norm);
    for (double& c : p) c *= target / std::max(nn, 1e-12);
    return p;
  };
  for (int rep = 0; rep < 10; ++rep) {
    const Vec x = rand_ball(0.7), y = rand_ball(0.7);
    const auto [Jx, Jy] = jac_mobius_add(x, y);
    for (int i = 0; i < m; ++i)
      for (int jc = 0; jc < m; ++jc) {
        ck.add("mobius", i * m + jc, Jx.at(i, jc), central(
                                                       [&](double v) {
                                                         Vec xx = x;
                                                         xx[jc] = v;
                                                         return mobius_add<double>(xx, y)[i];
                                                       },
                                                       x[jc]));
        ck.add("mobius", m * m + i * m + jc, Jy.at(i, jc), central(
                                                               [&](double v) {
                                                                 Vec yy = y;
                                                                 yy[jc] = v;
                                                                 return mobius_add<double>(x, yy)[i];
                                                               },
                                                               y[jc]));
      }
  }
  for (int rep = 0; rep < 10; ++rep) {
    const Vec x = rand_ball(0.6);
    Vec v(m);
    for (double& c : v) c = u(-0.5, 0.5);
    const auto [Jx, Jv] = jac_exp_map(x, v);
    for (int i = 0; i < m; ++i)
      for (int jc = 0; jc < m; ++jc) {
        ck.add("exp", i * m + jc, Jx.at(i, jc), central(
                                                    [&](double t) {
                                                      Vec xx = x;
                                                      xx[jc] = t;
                                                      return exp_map<double>(xx, v)[i];
                                                    },
                                                    x[jc]));
        ck.add("exp", m * m + i * m + jc, Jv.at(i, jc), central(
                                                            [&](double t) {
                                                              Vec vv = v;
                                                              vv[jc] = t;
                                                              return exp_map<double>(x, vv)[i];
                                                            },
                                                            v[jc]));
      }
  }
  for (int rep = 0; rep < 10; ++rep) {
    const Vec x = rand_ball(0.6), y = rand_ball(0.6);
    const auto [Jx, Jy] = jac_log_map(x, y);
    for (int i = 0; i < m; ++i)
      for (int jc = 0; jc < m; ++jc) {
        ck.add("log", i * m + jc, Jx.at(i, jc), central(
                                                    [&](double t) {
                                                      Vec xx = x;
                                                      xx[jc] = t;
                                                      return log_map<double>(xx, y)[i];
                                                    },
                                                    x[jc]));
        ck.add("log", m * m + i * m + jc, Jy.at(i, jc), central(
                                                            [&](double t) {
                                                              Vec yy = y;
                                                              yy[jc] = t;
                                                              return log_map<double>(x, yy)[i];
                                                            },
                                                            y[jc]));
      }
  }
  for (int rep = 0; rep < 10; ++rep) {
    Vec y = rand_ball(0.8);
    // keep off the chart's axis degeneracies
    for (double& c : y)
      if (std::abs(c) < 0.05) c = c < 0 ? -0.05 : 0.05;
    const Jacobian J = jac_chart(y);
    for (int i = 0; i < m; ++i)
      for (int jc = 0; jc < m; ++jc)
        ck.add("chart", i * m + jc, J.at(i, jc), central(
                                                     [&](double t) {
                                                       Vec yy = y;
                                                       yy[jc] = t;
                                                       return chart<double>(yy)[i];
                                                     },
                                                     y[jc]));
  }
  for (int rep = 0; rep < 10; ++rep) {
    const Vec x = rand_ball(0.7), y = rand_ball(0.7);
    const auto [gx, gy] = grad_ball_distance(x, y);
    for (int jc = 0; jc < m; ++jc) {
      ck.add("distance", jc, gx[jc], central(
                                         [&](double t) {
                                           Vec xx = x;
                                           xx[jc] = t;
                                           return ball_distance<double>(xx, y);
                                         },
                                         x[jc]));
      ck.add("distance", m + jc, gy[jc], central(
                                             [&](double t) {
                                               Vec yy = y;
                                               yy[jc] = t;
                                               return ball_distance<double>(x, yy);
                                             },
                                             y[jc]));
    }
  }

  // Φ end-to-end per variant: ⟨u, features(θ)⟩ against represent_grad.
  for (const Variant variant : {Variant::poinc, Variant::hybrid, Variant::eucl}) {
    for (int rep = 0; rep < 7; ++rep) {
      const PersistenceDiagram d = random_diagram(rng, 2, 4);
      const RhoConfig rc = lattice_rho_config(m, 0.8, 0.05, 1.0);
      ReprParams p = make_repr_params(variant, m, 2, 2, EssentialPolicy::max_scale, rc, 2.0, rng);
      Vec up(p.feature_dim());
      for (double& c : up) c = u(-1.0, 1.0);
      const std::vector<Vec> g = represent_grad(d, p, up);
      auto loss_at = [&]() {
        const ReprOutput r = represent(d, p);
        return std::inner_product(r.features.begin(), r.features.end(), up.begin(), 0.0);
      };
      const std::string group = "repr-" + to_string(variant);
      int idx = 0;
      for (std::size_t ph = 0; ph < p.phis.size(); ++ph)
        for (int t = 0; t < m; ++t, ++idx) {
          double& slot = p.phis[ph].theta[t];
          const double numeric = central(
              [&](double v) {
                const double keep = slot;
                slot = v;
                const double L = loss_at();
                slot = keep;
                return L;
              },
              slot);
          ck.add(group, idx, g[ph][t], numeric);
        }
    }
  }

  // Classifier head with frozen batch-norm statistics: parameter gradients
  // and the input gradient that feeds the representations.
  for (int rep = 0; rep < 5; ++rep) {
    const int D = 8, n = 6, C = 3;
    Model model = make_fixed_model(D, C, 0.0, rng);
    for (double& v : model.bn.run_mean) v = u(-0.2, 0.2);
    for (double& v : model.bn.run_var) v = u(0.5, 2.0);
    Vec X(static_cast<std::size_t>(n) * D);
    for (double& v : X) v = u(-1.0, 1.0);
    std::vector<int> y(n);
    for (int& c : y) c = std::uniform_int_distribution<int>(0, C - 1)(rng);
    HeadGrads hg;
    head_forward_backward(model, X, y, n, true, {}, hg);
    const std::vector<double*> params = trainable_params(model);
    Vec analytic;
    for (const Vec* g : {&hg.gamma, &hg.beta, &hg.W1, &hg.b1, &hg.W2, &hg.b2, &hg.W3, &hg.b3})
      analytic.insert(analytic.end(), g->begin(), g->end());
    std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
    for (int k = 0; k < 12; ++k) {
      const std::size_t i = pick(rng);
      const double numeric = central(
          [&](double v) {
            const double keep = *params[i];
            *params[i] = v;
            const double L = head_loss(model, X, y, n, true, {});
            *params[i] = keep;
            return L;
          },
          *params[i]);
      ck.add("head", static_cast<int>(i), analytic[i], numeric);
    }
    std::uniform_int_distribution<std::size_t> pickx(0, X.size() - 1);
    for (int k = 0; k < 6; ++k) {
      const std::size_t i = pickx(rng);
      const double numeric = central(
          [&](double v) {
            const double keep = X[i];
            X[i] = v;
            const double L = head_loss(model, X, y, n, true, {});
            X[i] = keep;
            return L;
          },
          X[i]);
      ck.add("head-input", static_cast<int>(i), hg.dX[i], numeric);
    }
  }

  // Full model: loss as a function of θ through features and the frozen head.
  for (int rep = 0; rep < 3; ++rep) {
    const int n = 5;
    std::vector<std::vector<PersistenceDiagram>> samples;
    std::vector<int> y;
    DiagramDataset ds;
    ds.n_classes = 2;
    for (int i = 0; i < n; ++i) {
      ds.diagrams.push_back({random_diagram(rng, 2, 3)});
      ds.labels.push_back(i % 2);
    }
    ds.stats.push_back({"vr", 2.0, 0.05, 1.0, 0.8});
    ModelSpec spec;
    spec.m = m;
    spec.K = 2;
    Model model = make_model(repr_params_for(ds, spec, rng), 2, 0.0, rng);
    for (double& v : model.bn.run_mean) v = u(-0.1, 0.1);
    for (double& v : model.bn.run_var) v = u(0.5, 2.0);
    auto features = [&]() {
      Vec X;
      for (int i = 0; i < n; ++i) {
        const Vec f = sample_features(model, ds.diagrams[i]);
        X.insert(X.end(), f.begin(), f.end());
      }
      return X;
    };
    Vec X = features();
    HeadGrads hg;
    head_forward_backward(model, X, ds.labels, n, true, {}, hg);
    Vec analytic(static_cast<std::size_t>(model.repr[0].phis.size()) * m, 0.0);
    const int D = model.feature_dim();
    for (int i = 0; i < n; ++i) {
      const Vec up(hg.dX.begin() + static_cast<std::size_t>(i) * D,
                   hg.dX.begin() + static_cast<std::size_t>(i + 1) * D);
      const std::vector<Vec> g = represent_grad(ds.diagrams[i][0], model.repr[0], up);
      std::size_t off = 0;
      for (const Vec& gp : g)
        for (double v : gp) analytic[off++] += v;
    }
    int idx = 0;
    for (std::size_t ph = 0; ph < model.repr[0].phis.size(); ++ph)
      for (int t = 0; t < m; ++t, ++idx) {
        double& slot = model.repr[0].phis[ph].theta[t];
        const double numeric = central(
            [&](double v) {
              const double keep = slot;
              slot = v;
              const double L = head_loss(model, features(), ds.labels, n, true, {});
              slot = keep;
              return L;
            },
            slot);
        ck.add("model", idx, analytic[idx], numeric);
      }
  }

  return rows;
}

int cmd_gradcheck(const RunConfig& cfg, const CliOptions& opt) {
  const std::vector<GradCheckRow> rows = run_gradcheck(cfg.seed, opt.corrupt);
  ensure_dir(cfg.out);
  std::ofstream os = open_out((fs::path(cfg.out) / "gradcheck.csv").string());
  os << "group,param,analytic,numeric,rel_err,pass\n";
  std::map<std::string, double> worst;
  std::map<std::string, int> worst_param;
  bool ok = true;
  for (const GradCheckRow& r : rows) {
    os << r.group << ',' << r.param << ',' << fmt(r.analytic) << ',' << fmt(r.numeric) << ','
       << fmt(r.rel_err) << ',' << (r.pass ? 1 : 0) << '\n';
    if (r.rel_err >= worst[r.group]) {
      worst[r.group] = r.rel_err;
      worst_param[r.group] = r.param;
    }
    ok = ok && r.pass;
  }
  for (const auto& [group, err] : worst)
    std::cout << "gradcheck: " << group << " max rel err " << fmt(err) << " (param "
              << worst_param[group] << ")" << (err <= kGradTol ? "" : "  FAIL") << '\n';
  std::cout << (ok ? "gradcheck: all groups pass\n" : "gradcheck: FAILED\n");
  return ok ? 0 : 2;
}

StabilityRunReport run_stability(const RunConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> deltas = cfg.stability.deltas;  // already sorted descending
  StabilityRunReport rep;

  const RhoConfig rc = lattice_rho_config(cfg.spec.m, 0.8, 0.05, 1.0);
  ReprParams params = make_repr_params(cfg.spec.variant, cfg.spec.m, cfg.spec.K,
                                       cfg.spec.n_hom_dims, cfg.spec.essential_policy, rc, 2.0,
                                       rng);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  for (int b = 0; b < cfg.stability.n_diagrams; ++b) {
    const PersistenceDiagram base = random_diagram(rng, cfg.spec.n_hom_dims, cfg.stability.points);
    // One perturbation direction per base diagram, scaled by δ — the
    // calibration at the largest δ must predict the smaller ones, which only
    // makes sense along a fixed ray.
    std::vector<std::array<double, 2>> dir(base.points.size());
    for (auto& g : dir) g = {unit(rng), unit(rng)};
    std::vector<PersistenceDiagram> perturbed;
    for (double delta : deltas) {
      PersistenceDiagram d = base;
      for (std::size_t k = 0; k < d.points.size(); ++k) {
        d.points[k].birth += delta * dir[k][0];
        if (!d.points[k].essential()) d.points[k].death += delta * dir[k][1];
      }
      normalize(d);
      perturbed.push_back(std::move(d));
    }
    const StabilityReport audit = stability_audit(base, perturbed, params);
    std::vector<double> dist(deltas.size(), 0.0);  // per-δ, max over dims
    for (const StabilityRow& row : audit.rows) {
      dist[row.pair] = std::max(dist[row.pair], row.d_ball);
      rep.rows.push_back({b * static_cast<int>(deltas.size()) + row.pair, row.dim,
                          deltas[row.pair], row.w1, row.d_ball, row.ratio});
      rep.max_ratio = std::max(rep.max_ratio, row.ratio);
    }
    const double c = dist[0] / deltas[0];
    for (std::size_t di = 1; di < deltas.size(); ++di) {
      const bool ok = dist[0] <= 1e-12 ? dist[di] <= 1e-12
                                       : dist[di] <= 2.0 * c * deltas[di] + 1e-12;
      if (!ok) ++rep.violations;
    }

    // Diagonal insertions must leave Φ untouched, coordinate for coordinate.
    PersistenceDiagram diag = base;
    for (int dim = 0; dim < cfg.spec.n_hom_dims; ++dim) {
      const double t = 0.1 + 0.2 * dim;
      diag.points.push_back({dim, t, t, 1});
    }
    const ReprOutput ra = represent(base, params);
    const ReprOutput rb = represent(diag, params);
    if (ra.features != rb.features || ra.slots != rb.slots) rep.diagonal_invariant = false;
  }
  return rep;
}

int cmd_stability(const RunConfig& cfg, const CliOptions&) {
  const StabilityRunReport rep = run_stability(cfg);
  ensure_dir(cfg.out);
  echo_config(cfg);
  std::ofstream os = open_out((fs::path(cfg.out) / "stability.csv").string());
  os << "pair_id,dim,p,wasserstein,d_ball,ratio\n";
  for (const StabilityRunRow& r : rep.rows)
    os << r.pair << ',' << r.dim << ",1," << fmt(r.w1) << ',' << fmt(r.d_ball) << ','
       << fmt(r.ratio) << '\n';
  std::cout << "stability: max ratio " << fmt(rep.max_ratio) << ", " << rep.violations
            << " linear-regime violations, diagonal invariance "
            << (rep.diagonal_invariant ? "exact" : "BROKEN") << '\n';
  return rep.violations == 0 && rep.diagonal_invariant ? 0 : 2;
}

int cmd_baseline(const RunConfig& cfg, const CliOptions&) {
  Prepared p = prepare_diagrams(cfg);
  const DiagramDataset& ds = p.train;
  ensure_dir(cfg.out);
  echo_config(cfg);
  std::ofstream os = open_out((fs::path(cfg.out) / "baseline.csv").string());
  os << "features,bins,folds,mean_acc,std_acc\n";
  for (const bool with_essential : {true, false}) {
    Vec X;
    int D = 0;
    for (std::size_t i = 0; i < ds.diagrams.size(); ++i) {
      Vec row;
      for (std::size_t s = 0; s < ds.diagrams[i].size(); ++s) {
        const double scale = ds.stats[s].max_value > 0.0 ? ds.stats[s].max_value : 1.0;
        const Vec h = baseline_histogram(ds.diagrams[i][s], cfg.baseline_bins, with_essential,
                                         scale, cfg.spec.n_hom_dims);
        row.insert(row.end(), h.begin(), h.end());
      }
      if (i == 0) D = static_cast<int>(row.size());
      X.insert(X.end(), row.begin(), row.end());
    }
    const CvResult r = train_cv_fixed(X, D, ds.labels, ds.n_classes, cfg.train);
    const std::string name = with_essential ? "hist-with-essential" : "hist-no-essential";
    os << name << ',' << cfg.baseline_bins << ',' << r.folds.size() << ',' << fmt(r.mean_acc)
       << ',' << fmt(r.std_acc) << '\n';
    std::cout << "baseline: " << name << " accuracy " << fmt(r.mean_acc) << " +/- "
              << fmt(r.std_acc) << '\n';
  }
  return 0;
}

int run_command(const CliOptions& opt) {
  try {
    RunConfig cfg;
    if (!opt.config_path.empty()) {
      cfg = parse_run_config(opt.config_path);
    } else if (opt.command != "gradcheck" && opt.command != "stability") {
      throw std::invalid_argument(opt.command + " needs --config");
    }
    if (opt.seed_set) cfg.seed = opt.seed;
    if (!opt.out.empty()) cfg.out = opt.out;
    if (opt.jobs > 0) set_max_jobs(opt.jobs);
    cfg.train.seed = cfg.seed;

    if (opt.command == "diagrams") return cmd_diagrams(cfg, opt);
    if (opt.command == "train") return cmd_train(cfg, opt);
    if (opt.command == "eval") return cmd_eval(cfg, opt);
    if (opt.command == "gradcheck") return cmd_gradcheck(cfg, opt);
    if (opt.command == "stability") return cmd_stability(cfg, opt);
    if (opt.command == "baseline") return cmd_baseline(cfg, opt);
    throw std::invalid_argument("unknown command " + opt.command);
  } catch (const tape_nan_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pdball
