// Command-line surface for the weight-feature alignment toolkit: synthetic
// dataset generation, rotation-invariance sweeps, Procrustes/registration
// checks, toy-network training and evaluation. Every command is
// deterministic given its full flag set, and every report is a single JSON
// object carrying the resolved configuration and seeds.
//
// Exit codes: 0 ok, 2 usage, 3 I/O, 4 check failed.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wfa/wfa.hpp"

using nlohmann::json;

namespace {

constexpr const char* kTool = "wfa_cli";

json report_envelope(const std::string& command, json config, json results) {
  json j;
  j["command"] = command;
  j["config"] = std::move(config);
  j["results"] = std::move(results);
  j["tool"] = kTool;
  j["version"] = wfa::kVersion;
  return j;
}

// JSON to --out (human summary to stdout), or JSON to stdout when no --out.
void emit_report(const json& report, const std::string& out_path, const std::string& human) {
  const std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    wfa::detail::write_file(out_path, text);
    std::cout << human;
  }
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

wfa::RotationMode parse_mode(const std::string& s) {
  if (s == "none") return wfa::RotationMode::none;
  if (s == "z" || s == "z_only") return wfa::RotationMode::z_only;
  if (s == "arbitrary" || s == "ar") return wfa::RotationMode::arbitrary;
  throw wfa::Error("--mode must be one of none, z, arbitrary");
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::size_t classes = 5;
  std::size_t per_class = 20;
  std::size_t points = 256;
  double noise = 0.02;
  double train_frac = 0.8;
  bool normals = false;
  std::uint64_t seed = 1;
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  namespace fs = std::filesystem;
  wfa::ShapeSpec tpl;
  tpl.n_points = a.points;
  tpl.noise_sigma = a.noise;
  tpl.with_normals = a.normals;
  const wfa::DatasetSplit split =
      wfa::make_dataset(a.per_class, tpl, a.train_frac, wfa::Seed{a.seed}, a.classes);

  fs::create_directories(a.out);

  json files = json::array();
  std::size_t written = 0;
  const auto dump_split = [&](const wfa::LabeledDataset& ds) {
    std::vector<std::size_t> counter(ds.class_names.size(), 0);
    for (const wfa::LabeledCloud& s : ds.samples) {
      const std::string& cname = ds.class_names[static_cast<std::size_t>(s.label)];
      char idx[16];
      std::snprintf(idx, sizeof(idx), "%03zu", counter[static_cast<std::size_t>(s.label)]++);
      const std::string name = ds.split + "_" + cname + "_" + idx + ".ply";
      wfa::write_ply((fs::path(a.out) / name).string(), s.cloud);
      json f;
      f["class"] = cname;
      f["label"] = s.label;
      f["path"] = name;
      f["seed"] = s.seed.value;
      f["split"] = ds.split;
      files.push_back(std::move(f));
      ++written;
    }
  };
  dump_split(split.train);
  dump_split(split.test);

  json config;
  config["classes"] = a.classes;
  config["per_class"] = a.per_class;
  config["points"] = a.points;
  config["noise"] = a.noise;
  config["normals"] = a.normals;
  config["train_frac"] = a.train_frac;
  config["seed"] = a.seed;
  config["out"] = a.out;

  json results;
  results["class_names"] = split.train.class_names;
  results["files"] = std::move(files);
  results["train_count"] = split.train.samples.size();
  results["test_count"] = split.test.samples.size();

  const json report = report_envelope("gen-data", config, results);
  const std::string manifest = (fs::path(a.out) / "manifest.json").string();
  wfa::detail::write_file(manifest, report.dump(2) + "\n");
  std::cout << "wrote " << written << " clouds + manifest to " << a.out << "\n";
  return 0;
}

// ------------------------------------------------------- invariance-report

struct InvarianceArgs {
  std::string input;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  std::uint64_t weight_seed = 2;
  std::size_t queries = 32;
  std::size_t neighbors = 16;
  double radius = 0.35;
  std::size_t width = 32;
  double sign_tol = 1e-6;
  double gap_tol = 1e-3;
  double translation = 2.0;
  std::string order = "123";
  std::string out;
};

int run_invariance(const InvarianceArgs& a) {
  const wfa::PointCloud cloud = wfa::read_cloud(a.input);
  wfa::validate_cloud(cloud);
  if (cloud.size() < a.queries)
    throw wfa::Error("--queries exceeds the input cloud size");

  wfa::WfaConfig wcfg;
  wcfg.sign_tol = a.sign_tol;
  wcfg.gap_tol = a.gap_tol;
  wcfg.order = wfa::AxisOrder::from_string(a.order);

  const std::vector<std::size_t> queries = wfa::farthest_point_sample(cloud, a.queries, 0);

  std::vector<double> pooled;  // per-(trial, clean query) deviations
  std::size_t degenerate = 0, ambiguous = 0, mismatched = 0, clean_evals = 0;
  json trials = json::array();

  for (std::size_t t = 0; t < a.trials; ++t) {
    const wfa::LayerWeights weights =
        wfa::random_layer_weights(wfa::derive_seed(wfa::Seed{a.weight_seed}, t), a.width);
    const wfa::WeightFrame wf = wfa::weight_frame(weights, wcfg.sign_tol, wcfg.rank_tol);

    wfa::Rng rng(wfa::derive_seed(wfa::Seed{a.seed}, t));
    const wfa::Rotation3 rot = wfa::uniform_rotation(rng);
    const wfa::Vec3 tvec{rng.uniform(-a.translation, a.translation),
                         rng.uniform(-a.translation, a.translation),
                         rng.uniform(-a.translation, a.translation)};
    const wfa::PointCloud moved = wfa::apply_rigid(cloud, rot, tvec);

    double trial_aligned = 0.0, trial_feature = 0.0;
    std::size_t trial_clean = 0, trial_degenerate = 0, trial_ambiguous = 0, trial_mismatch = 0;

    for (std::size_t q : queries) {
      const wfa::NeighborSet ns = wfa::radius_neighbors(cloud, q, a.radius, a.neighbors);
      const wfa::NeighborSet ns2 = wfa::radius_neighbors(moved, q, a.radius, a.neighbors);
      if (ns.indices != ns2.indices) {
        ++trial_mismatch;
        continue;
      }
      const wfa::AlignedNeighborhood an1 = wfa::align_neighborhood(cloud, ns, wf, wcfg);
      const wfa::AlignedNeighborhood an2 = wfa::align_neighborhood(moved, ns2, wf, wcfg);
      if (an1.frame.degenerate || an2.frame.degenerate) {
        ++trial_degenerate;
        continue;
      }
      if (an1.frame.any_ambiguous() || an2.frame.any_ambiguous()) {
        ++trial_ambiguous;
        continue;
      }
      double dev_a = 0.0;
      for (std::size_t j = 0; j < an1.aligned.size(); ++j)
        dev_a = std::fmax(dev_a, wfa::max_abs(an1.aligned[j] - an2.aligned[j]));
      const double dev_f = wfa::max_abs_diff(wfa::wfa_feature_layer(an1, weights),
                                             wfa::wfa_feature_layer(an2, weights));
      trial_aligned = std::fmax(trial_aligned, dev_a);
      trial_feature = std::fmax(trial_feature, dev_f);
      pooled.push_back(std::fmax(dev_a, dev_f));
      ++trial_clean;
    }

    degenerate += trial_degenerate;
    ambiguous += trial_ambiguous;
    mismatched += trial_mismatch;
    clean_evals += trial_clean;

    json tr;
    tr["aligned_dev"] = trial_aligned;
    tr["feature_dev"] = trial_feature;
    tr["clean_queries"] = trial_clean;
    tr["degenerate"] = trial_degenerate;
    tr["ambiguous"] = trial_ambiguous;
    tr["mismatched"] = trial_mismatch;
    trials.push_back(std::move(tr));
  }

  json config;
  config["input"] = a.input;
  config["trials"] = a.trials;
  config["seed"] = a.seed;
  config["weight_seed"] = a.weight_seed;
  config["queries"] = a.queries;
  config["neighbors"] = a.neighbors;
  config["radius"] = a.radius;
  config["width"] = a.width;
  config["sign_tol"] = a.sign_tol;
  config["gap_tol"] = a.gap_tol;
  config["translation"] = a.translation;
  config["order"] = a.order;

  json results;
  results["clean_query_evals"] = clean_evals;
  results["degenerate_count"] = degenerate;
  results["ambiguous_count"] = ambiguous;
  results["neighbor_mismatch_count"] = mismatched;
  results["max_deviation"] = pooled.empty() ? json() : json(*std::max_element(pooled.begin(), pooled.end()));
  results["median_deviation"] = pooled.empty() ? json() : json(median_of(pooled));
  results["trials"] = std::move(trials);

  const json report = report_envelope("invariance-report", config, results);
  std::string human = "invariance: " + std::to_string(clean_evals) + " clean query evals, max dev ";
  human += pooled.empty() ? "n/a" : json(results["max_deviation"]).dump();
  human += ", degenerate " + std::to_string(degenerate) + ", ambiguous " + std::to_string(ambiguous) + "\n";
  emit_report(report, a.out, human);
  return 0;
}

// -------------------------------------------------------- procrustes-check

struct ProcrustesArgs {
  std::size_t instances = 100;
  int samples = 100000;
  std::size_t points = 12;
  std::uint64_t seed = 1;
  std::size_t reg_instances = 20;
  int reg_samples = 2000;
  std::size_t reg_neighbors = 16;
  std::string out;
};

std::vector<wfa::Vec3> centered_random_points(wfa::Rng& rng, std::size_t n) {
  std::vector<wfa::Vec3> pts;
  pts.reserve(n);
  wfa::Vec3 mean{};
  for (std::size_t i = 0; i < n; ++i) {
    const wfa::Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    pts.push_back(p);
    mean += p;
  }
  mean = mean / static_cast<double>(n);
  for (wfa::Vec3& p : pts) p -= mean;
  return pts;
}

int run_procrustes_check(const ProcrustesArgs& a) {
  // fixed-correspondence optimality: closed-form cost never above the best
  // sampled rotation (plus fp slack)
  std::size_t violations = 0;
  double max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.instances; ++i) {
    wfa::Rng rng(wfa::derive_seed(wfa::Seed{a.seed}, 0xA000 + i));
    const std::vector<wfa::Vec3> source = centered_random_points(rng, a.points);
    const std::vector<wfa::Vec3> target = centered_random_points(rng, a.points);
    const wfa::AlignmentResult kab = wfa::kabsch(source, target);
    const wfa::AlignmentResult bf = wfa::brute_force_best_rotation(
        source, target, a.samples, wfa::derive_seed(wfa::Seed{a.seed}, 0xB000 + i));
    double scale2 = 0.0;
    for (std::size_t k = 0; k < a.points; ++k)
      scale2 += wfa::squared_norm(source[k]) + wfa::squared_norm(target[k]);
    scale2 /= static_cast<double>(a.points);
    const double excess = kab.cost - bf.cost;
    max_excess = std::fmax(max_excess, excess);
    if (excess > 1e-10 * scale2) ++violations;
  }

  // registration claim on random instances: gap reported, not asserted
  std::vector<double> gaps;
  std::size_t reg_degenerate = 0;
  for (std::size_t i = 0; i < a.reg_instances; ++i) {
    wfa::Rng rng(wfa::derive_seed(wfa::Seed{a.seed}, 0xC000 + i));
    wfa::PointCloud cloud;
    cloud.points = centered_random_points(rng, std::max<std::size_t>(a.reg_neighbors, 8));
    const wfa::NeighborSet ns = wfa::knn(cloud, 0, a.reg_neighbors);
    const wfa::LayerWeights weights = wfa::random_layer_weights(
        wfa::derive_seed(wfa::Seed{a.seed}, 0xD000 + i), 16);
    wfa::RegistrationCheckConfig cfg;
    cfg.num_samples = a.reg_samples;
    cfg.seed = wfa::derive_seed(wfa::Seed{a.seed}, 0xE000 + i);
    const wfa::RegistrationCheckReport rep =
        wfa::verify_registration_optimality(cloud, ns, weights, cfg);
    gaps.push_back(rep.gap);
    if (rep.degenerate) ++reg_degenerate;
  }

  // constructed instances: weights are a rotated copy of the centered
  // neighborhood with the barycenter offset matched to the sign rules, so
  // the alignment is exact registration and the gap collapses
  double constructed_gap_max = 0.0;
  double constructed_obj_max = 0.0;
  std::size_t constructed_count = 0;
  for (std::size_t i = 0; i < a.reg_instances; ++i) {
    wfa::Rng rng(wfa::derive_seed(wfa::Seed{a.seed}, 0xF000 + i));
    wfa::PointCloud cloud;
    wfa::NeighborSet ns;
    wfa::LocalFrame lf;
    bool found = false;
    for (int attempt = 0; attempt < 100 && !found; ++attempt) {
      cloud.points = centered_random_points(rng, a.reg_neighbors);
      ns = wfa::knn(cloud, 0, a.reg_neighbors);
      lf = wfa::local_frame(cloud, ns);
      if (lf.degenerate) continue;
      const wfa::Vec3 ref = cloud.points[0] - lf.barycenter;
      const double refn = wfa::norm(ref);
      bool margins_ok = refn > 1e-6;
      for (int k = 0; k < 3 && margins_ok; ++k)
        if (std::fabs(wfa::dot(lf.v.m.col(k), ref)) < 1e-3 * refn) margins_ok = false;
      found = margins_ok;
    }
    if (!found) continue;
    ++constructed_count;

    const wfa::Rotation3 q = i == 0 ? wfa::Rotation3{} : wfa::uniform_rotation(rng);
    const wfa::Vec3 ref = cloud.points[0] - lf.barycenter;
    const wfa::Vec3 offset = -(q.m * ref);
    wfa::LayerWeights weights;
    for (std::size_t j : ns.indices)
      weights.w.push_back(q.m * (cloud.points[j] - lf.barycenter) + offset);
    weights.bias.assign(weights.w.size(), 0.0);

    wfa::RegistrationCheckConfig cfg;
    cfg.num_samples = a.reg_samples;
    cfg.seed = wfa::derive_seed(wfa::Seed{a.seed}, 0x1F000 + i);
    const wfa::RegistrationCheckReport rep =
        wfa::verify_registration_optimality(cloud, ns, weights, cfg);
    constructed_gap_max = std::fmax(constructed_gap_max, rep.gap);
    constructed_obj_max = std::fmax(constructed_obj_max, rep.objective_wfa);
  }

  json config;
  config["instances"] = a.instances;
  config["samples"] = a.samples;
  config["points"] = a.points;
  config["seed"] = a.seed;
  config["reg_instances"] = a.reg_instances;
  config["reg_samples"] = a.reg_samples;
  config["reg_neighbors"] = a.reg_neighbors;

  json results;
  results["procrustes_optimality"] = violations == 0 ? "pass" : "fail";
  results["violations"] = violations;
  results["max_excess"] = max_excess;
  json reg;
  reg["instances"] = gaps.size();
  reg["degenerate"] = reg_degenerate;
  reg["gap_min"] = gaps.empty() ? json() : json(*std::min_element(gaps.begin(), gaps.end()));
  reg["gap_median"] = gaps.empty() ? json() : json(median_of(gaps));
  reg["gap_max"] = gaps.empty() ? json() : json(*std::max_element(gaps.begin(), gaps.end()));
  reg["constructed_instances"] = constructed_count;
  reg["constructed_gap_max"] = constructed_gap_max;
  reg["constructed_objective_max"] = constructed_obj_max;
  reg["constructed_pass"] = constructed_count > 0 && constructed_gap_max <= 1e-9;
  results["registration_check"] = std::move(reg);

  const json report = report_envelope("procrustes-check", config, results);
  std::string human = "procrustes optimality: ";
  human += violations == 0 ? "pass" : "FAIL";
  human += " (" + std::to_string(a.instances) + " instances); constructed gap max " +
           json(constructed_gap_max).dump() + "\n";
  emit_report(report, a.out, human);
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::size_t epochs = 30;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::uint64_t seed = 7;
  std::uint64_t data_seed = 99;
  std::size_t per_class = 20;
  std::size_t points = 256;
  double noise = 0.02;
  double train_frac = 0.8;
  std::size_t classes = 5;
  std::size_t queries = 32;
  std::size_t neighbors = 16;
  double radius = 0.35;
  std::vector<std::size_t> hidden = {64, 128};
  std::string order = "123";
  bool no_wfa = false;
  std::string ckpt;
  std::string out;
};

json train_config_json(const TrainArgs& a) {
  json config;
  config["epochs"] = a.epochs;
  config["lr"] = a.lr;
  config["batch"] = a.batch;
  config["seed"] = a.seed;
  config["data_seed"] = a.data_seed;
  config["per_class"] = a.per_class;
  config["points"] = a.points;
  config["noise"] = a.noise;
  config["train_frac"] = a.train_frac;
  config["classes"] = a.classes;
  config["queries"] = a.queries;
  config["neighbors"] = a.neighbors;
  config["radius"] = a.radius;
  config["hidden"] = a.hidden;
  config["order"] = a.order;
  config["use_wfa"] = !a.no_wfa;
  return config;
}

std::pair<wfa::net::NetworkConfig, wfa::net::DatasetInfo> train_setup(const TrainArgs& a) {
  wfa::net::NetworkConfig cfg;
  cfg.num_queries = a.queries;
  cfg.neighbors_per_query = a.neighbors;
  cfg.radius = a.radius;
  cfg.hidden_widths = a.hidden;
  cfg.num_classes = a.classes;
  cfg.axis_order = wfa::AxisOrder::from_string(a.order);
  cfg.wfa.order = cfg.axis_order;
  cfg.use_wfa = !a.no_wfa;
  cfg.seed = wfa::Seed{a.seed};

  wfa::net::DatasetInfo info;
  info.per_class = a.per_class;
  info.n_points = a.points;
  info.noise_sigma = a.noise;
  info.train_fraction = a.train_frac;
  info.seed = wfa::Seed{a.data_seed};
  info.num_classes = a.classes;
  return {cfg, info};
}

json epochs_json(const wfa::net::TrainReport& report) {
  json epochs = json::array();
  for (const wfa::net::EpochStats& e : report.epochs) {
    json je;
    je["epoch"] = e.epoch;
    je["loss"] = e.loss;
    je["train_accuracy"] = e.train_accuracy;
    je["test_accuracy_z"] = e.test_accuracy_z;
    je["test_accuracy_arbitrary"] = e.test_accuracy_arbitrary;
    epochs.push_back(std::move(je));
  }
  return epochs;
}

int run_train(const TrainArgs& a) {
  const auto [cfg, info] = train_setup(a);
  const wfa::DatasetSplit data = wfa::net::build_dataset(info);
  auto [params, report] = wfa::net::train(cfg, data, a.epochs, a.lr, a.batch);

  if (!a.ckpt.empty()) {
    wfa::net::Checkpoint ck{cfg, info, std::move(params)};
    wfa::net::save_checkpoint(a.ckpt, ck);
  }

  json results;
  results["epochs"] = epochs_json(report);
  results["final_train_accuracy"] = report.final_train_accuracy;
  results["final_test_accuracy_z"] = report.final_test_accuracy_z;
  results["final_test_accuracy_arbitrary"] = report.final_test_accuracy_arbitrary;
  results["checkpoint"] = a.ckpt;

  const json rj = report_envelope("train", train_config_json(a), results);
  char human[256];
  std::snprintf(human, sizeof(human),
                "train: final acc train %.4f, test z %.4f, test arbitrary %.4f (%.1f s)\n",
                report.final_train_accuracy, report.final_test_accuracy_z,
                report.final_test_accuracy_arbitrary, report.wall_clock_seconds);
  emit_report(rj, a.out, human);
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string ckpt;
  std::string mode = "none";
  std::string split = "test";
  std::uint64_t seed = 5;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const wfa::net::Checkpoint ck = wfa::net::load_checkpoint(a.ckpt);
  const wfa::RotationMode mode = parse_mode(a.mode);
  if (a.split != "test" && a.split != "train") throw wfa::Error("--split must be test or train");

  const wfa::DatasetSplit data = wfa::net::build_dataset(ck.data);
  const wfa::LabeledDataset& ds = a.split == "test" ? data.test : data.train;
  const wfa::Seed eval_seed{a.seed};

  std::vector<std::size_t> per_class_total(ck.config.num_classes, 0);
  std::vector<std::size_t> per_class_correct(ck.config.num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const wfa::LabeledCloud& s = ds.samples[i];
    wfa::PointCloud cloud = s.cloud;
    if (mode != wfa::RotationMode::none) {
      const wfa::Rotation3 r = wfa::random_rotation(wfa::derive_seed(eval_seed, i), mode);
      cloud = wfa::apply_rigid(cloud, r, wfa::Vec3{});
    }
    const std::vector<double> logits = wfa::net::forward(ck.params, cloud, ck.config);
    std::size_t pred = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[pred]) pred = c;
    per_class_total[static_cast<std::size_t>(s.label)]++;
    if (pred == static_cast<std::size_t>(s.label)) {
      per_class_correct[static_cast<std::size_t>(s.label)]++;
      ++correct;
    }
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(ds.samples.size());

  json config;
  config["ckpt"] = a.ckpt;
  config["mode"] = a.mode;
  config["split"] = a.split;
  config["seed"] = a.seed;

  json results;
  results["accuracy"] = accuracy;
  results["correct"] = correct;
  results["total"] = ds.samples.size();
  json per_class = json::array();
  for (std::size_t c = 0; c < ck.config.num_classes; ++c) {
    json pc;
    pc["class"] = ds.class_names.size() > c ? ds.class_names[c] : std::to_string(c);
    pc["correct"] = per_class_correct[c];
    pc["total"] = per_class_total[c];
    per_class.push_back(std::move(pc));
  }
  results["per_class"] = std::move(per_class);

  const json report = report_envelope("eval", config, results);
  char human[128];
  std::snprintf(human, sizeof(human), "eval %s/%s: accuracy %.4f (%zu/%zu)\n", a.split.c_str(),
                a.mode.c_str(), accuracy, correct, ds.samples.size());
  emit_report(report, a.out, human);
  return 0;
}

// --------------------------------------------------------------- gradcheck

struct GradCheckArgs {
  std::uint64_t seed = 1;
  std::size_t configs = 10;
  std::string out;
};

int run_gradcheck(const GradCheckArgs& a) {
  json per_config = json::array();
  double overall_max = 0.0;
  std::size_t total_coords = 0, total_within = 0;
  std::vector<double> all_rels;

  for (std::size_t idx = 0; idx < a.configs; ++idx) {
    wfa::Rng r(wfa::derive_seed(wfa::Seed{a.seed}, idx));
    wfa::net::NetworkConfig cfg;
    cfg.num_classes = 2 + r.uniform_under(4);
    cfg.num_queries = 2 + r.uniform_under(4);
    cfg.neighbors_per_query = 4 + r.uniform_under(5);
    cfg.hidden_widths = {4 + r.uniform_under(8), 4 + r.uniform_under(12)};
    cfg.radius = 0.3 + 0.2 * r.uniform();
    cfg.use_wfa = idx % 2 == 0;
    cfg.seed = wfa::derive_seed(wfa::Seed{a.seed}, 0x100 + idx);

    wfa::Rng init_rng(cfg.seed);
    const wfa::net::NetworkParams params = wfa::net::init_params(cfg, init_rng);

    // probe batch; regenerate until no pool sits near a tie
    std::vector<wfa::LabeledCloud> batch;
    wfa::net::GradCheckResult res;
    bool ok = false;
    for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
      batch.clear();
      const wfa::Seed bseed =
          wfa::derive_seed(wfa::Seed{a.seed}, 0x200 + idx * 64 + static_cast<std::size_t>(attempt));
      wfa::Rng br(bseed);
      for (int s = 0; s < 2; ++s) {
        wfa::ShapeSpec spec;
        spec.kind = wfa::all_shape_kinds()[br.uniform_under(5)];
        spec.n_points = 40 + br.uniform_under(30);
        spec.noise_sigma = 0.02;
        spec.seed = wfa::derive_seed(bseed, static_cast<std::uint64_t>(s));
        batch.push_back({wfa::gen_shape(spec), static_cast<int>(br.uniform_under(cfg.num_classes)),
                         spec.seed});
      }
      res = wfa::net::finite_difference_check(params, batch, cfg);
      ok = res.pool_tie_margin >= 1e-4;
    }

    overall_max = std::fmax(overall_max, res.max_rel);
    total_coords += res.coords;
    total_within += res.within_1e5;
    all_rels.insert(all_rels.end(), res.rel_errors.begin(), res.rel_errors.end());

    json jc;
    jc["coords"] = res.coords;
    jc["max_rel"] = res.max_rel;
    jc["median_rel"] = res.median_rel;
    jc["frac_within_1e5"] = res.frac_within_1e5;
    jc["pool_tie_margin"] = res.pool_tie_margin;
    jc["use_wfa"] = cfg.use_wfa;
    per_config.push_back(std::move(jc));
  }

  const double frac = total_coords == 0
                          ? 0.0
                          : static_cast<double>(total_within) / static_cast<double>(total_coords);
  const double overall_median = all_rels.empty() ? 0.0 : median_of(all_rels);
  const bool pass = overall_max <= 1e-3 && frac >= 0.99;

  json config;
  config["seed"] = a.seed;
  config["configs"] = a.configs;

  json results;
  results["per_config"] = std::move(per_config);
  results["overall_max_rel"] = overall_max;
  results["overall_median_rel"] = overall_median;
  results["overall_frac_within_1e5"] = frac;
  results["total_coords"] = total_coords;
  results["pass"] = pass;

  const json report = report_envelope("gradcheck", config, results);
  char human[192];
  std::snprintf(human, sizeof(human),
                "gradcheck: max rel err %.3e, median %.3e, %.2f%% of %zu coords within 1e-5 -> %s\n",
                overall_max, overall_median, 100.0 * frac, total_coords, pass ? "pass" : "FAIL");
  emit_report(report, a.out, human);
  return pass ? 0 : 4;
}

// ---------------------------------------------------------------- ablation

struct AblationArgs {
  std::size_t seeds = 3;
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::uint64_t seed = 3;
  std::uint64_t data_seed = 99;
  std::size_t per_class = 10;
  std::size_t points = 192;
  double noise = 0.02;
  std::size_t queries = 16;
  std::size_t neighbors = 12;
  double radius = 0.35;
  std::vector<std::size_t> hidden = {24, 48};
  std::string out;
};

int run_ablation(const AblationArgs& a) {
  wfa::net::DatasetInfo info;
  info.per_class = a.per_class;
  info.n_points = a.points;
  info.noise_sigma = a.noise;
  info.train_fraction = 0.8;
  info.seed = wfa::Seed{a.data_seed};
  info.num_classes = 5;
  const wfa::DatasetSplit data = wfa::net::build_dataset(info);

  struct Row {
    std::string order;
    std::vector<double> accs;
    double mean = 0.0;
  };
  std::vector<Row> rows;

  for (const wfa::AxisOrder& order : wfa::AxisOrder::all()) {
    Row row;
    row.order = order.to_string();
    for (std::size_t s = 0; s < a.seeds; ++s) {
      wfa::net::NetworkConfig cfg;
      cfg.num_queries = a.queries;
      cfg.neighbors_per_query = a.neighbors;
      cfg.radius = a.radius;
      cfg.hidden_widths = a.hidden;
      cfg.num_classes = 5;
      cfg.axis_order = order;
      cfg.wfa.order = order;
      cfg.use_wfa = true;
      cfg.seed = wfa::derive_seed(wfa::Seed{a.seed}, s);  // same seeds across orders
      const auto [params, report] = wfa::net::train(cfg, data, a.epochs, a.lr, a.batch);
      (void)params;
      row.accs.push_back(report.final_test_accuracy_arbitrary);
    }
    double sum = 0.0;
    for (double v : row.accs) sum += v;
    row.mean = sum / static_cast<double>(row.accs.size());
    rows.push_back(std::move(row));
  }

  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    if (x.mean != y.mean) return x.mean > y.mean;
    return x.order < y.order;
  });

  json config;
  config["seeds"] = a.seeds;
  config["epochs"] = a.epochs;
  config["lr"] = a.lr;
  config["batch"] = a.batch;
  config["seed"] = a.seed;
  config["data_seed"] = a.data_seed;
  config["per_class"] = a.per_class;
  config["points"] = a.points;
  config["noise"] = a.noise;
  config["queries"] = a.queries;
  config["neighbors"] = a.neighbors;
  config["radius"] = a.radius;
  config["hidden"] = a.hidden;

  json jrows = json::array();
  std::string human = "ablation (test accuracy under arbitrary rotation):\n";
  for (const Row& row : rows) {
    json jr;
    jr["order"] = row.order;
    jr["per_seed_accuracy"] = row.accs;
    jr["mean_accuracy"] = row.mean;
    jrows.push_back(std::move(jr));
    char line[96];
    std::snprintf(line, sizeof(line), "  order %s  mean acc %.4f\n", row.order.c_str(), row.mean);
    human += line;
  }

  json results;
  results["rows"] = std::move(jrows);
  results["ranked_by"] = "mean_accuracy";

  const json report = report_envelope("ablation", config, results);
  emit_report(report, a.out, human);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weight-feature alignment toolkit"};
  app.require_subcommand(1);
  app.fallthrough(true);
  app.set_version_flag("--version", std::string(wfa::kVersion));
  // key=value file under a [subcommand] section; explicit flags override
  app.set_config("--config");

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate a labeled synthetic dataset as PLY files");
  gen_cmd->add_option("--classes", gen.classes, "number of shape classes (1-5)")
      ->check(CLI::Range(std::size_t{1}, std::size_t{5}))->capture_default_str();
  gen_cmd->add_option("--per-class", gen.per_class, "samples per class")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--points", gen.points, "points per cloud")
      ->check(CLI::Range(std::size_t{8}, std::size_t{1000000}))->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "surface noise sigma")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--train-frac", gen.train_frac, "train split fraction")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  gen_cmd->add_flag("--normals", gen.normals, "attach analytic unit normals");
  gen_cmd->add_option("--seed", gen.seed, "master seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  InvarianceArgs inv;
  CLI::App* inv_cmd = app.add_subcommand("invariance-report",
                                         "sweep random rigid motions and report output deviations");
  inv_cmd->add_option("--input", inv.input, "input cloud (.ply or xyz/csv)")->required();
  inv_cmd->add_option("--trials", inv.trials, "number of random rigid motions")->capture_default_str();
  inv_cmd->add_option("--seed", inv.seed, "rigid motion seed")->capture_default_str();
  inv_cmd->add_option("--weight-seed", inv.weight_seed, "layer weight seed")->capture_default_str();
  inv_cmd->add_option("--queries", inv.queries, "query points (farthest point sampling)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  inv_cmd->add_option("--neighbors", inv.neighbors, "neighborhood width")
      ->check(CLI::PositiveNumber)->capture_default_str();
  inv_cmd->add_option("--radius", inv.radius, "neighborhood radius")
      ->check(CLI::PositiveNumber)->capture_default_str();
  inv_cmd->add_option("--width", inv.width, "random layer width d")
      ->check(CLI::Range(std::size_t{3}, std::size_t{4096}))->capture_default_str();
  inv_cmd->add_option("--sign-tol", inv.sign_tol, "sign ambiguity tolerance")->capture_default_str();
  inv_cmd->add_option("--gap-tol", inv.gap_tol, "eigenvalue gap tolerance")->capture_default_str();
  inv_cmd->add_option("--translation", inv.translation, "translation range (per axis)")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  inv_cmd->add_option("--order", inv.order, "axis order, permutation of 123")->capture_default_str();
  inv_cmd->add_option("--out", inv.out, "report path (JSON)");

  ProcrustesArgs pro;
  CLI::App* pro_cmd = app.add_subcommand("procrustes-check",
                                         "optimality of the closed-form alignment vs sampled rotations");
  pro_cmd->add_option("--instances", pro.instances, "fixed-correspondence instances")
      ->check(CLI::PositiveNumber)->capture_default_str();
  pro_cmd->add_option("--samples", pro.samples, "sampled rotations per instance")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  pro_cmd->add_option("--points", pro.points, "points per instance")
      ->check(CLI::Range(std::size_t{3}, std::size_t{100000}))->capture_default_str();
  pro_cmd->add_option("--seed", pro.seed, "master seed")->capture_default_str();
  pro_cmd->add_option("--reg-instances", pro.reg_instances, "registration-claim instances")
      ->capture_default_str();
  pro_cmd->add_option("--reg-samples", pro.reg_samples, "sampled rotations per registration instance")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  pro_cmd->add_option("--reg-neighbors", pro.reg_neighbors, "neighborhood size")
      ->check(CLI::Range(std::size_t{4}, std::size_t{100000}))->capture_default_str();
  pro_cmd->add_option("--out", pro.out, "report path (JSON)");

  TrainArgs tra;
  CLI::App* tra_cmd = app.add_subcommand("train", "train the toy point classifier (z-only augmentation)");
  tra_cmd->add_option("--epochs", tra.epochs, "training epochs")->capture_default_str();
  tra_cmd->add_option("--lr", tra.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  tra_cmd->add_option("--batch", tra.batch, "batch size")->check(CLI::PositiveNumber)->capture_default_str();
  tra_cmd->add_option("--seed", tra.seed, "training seed")->capture_default_str();
  tra_cmd->add_option("--data-seed", tra.data_seed, "dataset seed")->capture_default_str();
  tra_cmd->add_option("--per-class", tra.per_class, "samples per class")
      ->check(CLI::PositiveNumber)->capture_default_str();
  tra_cmd->add_option("--points", tra.points, "points per cloud")
      ->check(CLI::Range(std::size_t{8}, std::size_t{1000000}))->capture_default_str();
  tra_cmd->add_option("--noise", tra.noise, "surface noise sigma")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  tra_cmd->add_option("--train-frac", tra.train_frac, "train split fraction")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  tra_cmd->add_option("--classes", tra.classes, "number of classes (1-5)")
      ->check(CLI::Range(std::size_t{1}, std::size_t{5}))->capture_default_str();
  tra_cmd->add_option("--queries", tra.queries, "query points per cloud")
      ->check(CLI::PositiveNumber)->capture_default_str();
  tra_cmd->add_option("--neighbors", tra.neighbors, "neighborhood width")
      ->check(CLI::PositiveNumber)->capture_default_str();
  tra_cmd->add_option("--radius", tra.radius, "neighborhood radius")
      ->check(CLI::PositiveNumber)->capture_default_str();
  tra_cmd->add_option("--hidden", tra.hidden, "hidden widths")->delimiter(',')->capture_default_str();
  tra_cmd->add_option("--order", tra.order, "axis order, permutation of 123")->capture_default_str();
  tra_cmd->add_flag("--no-wfa", tra.no_wfa, "baseline: feed raw centered coordinates");
  tra_cmd->add_option("--ckpt", tra.ckpt, "checkpoint output path");
  tra_cmd->add_option("--out", tra.out, "report path (JSON)");

  EvalArgs eva;
  CLI::App* eva_cmd = app.add_subcommand("eval", "evaluate a checkpoint under a rotation mode");
  eva_cmd->add_option("--ckpt", eva.ckpt, "checkpoint path")->required();
  eva_cmd->add_option("--mode", eva.mode, "rotation mode: none, z, arbitrary")->capture_default_str();
  eva_cmd->add_option("--split", eva.split, "dataset split: test or train")->capture_default_str();
  eva_cmd->add_option("--seed", eva.seed, "evaluation rotation seed")->capture_default_str();
  eva_cmd->add_option("--out", eva.out, "report path (JSON)");

  GradCheckArgs gra;
  CLI::App* gra_cmd = app.add_subcommand("gradcheck",
                                         "finite-difference check of the analytic gradient");
  gra_cmd->add_option("--seed", gra.seed, "master seed")->capture_default_str();
  gra_cmd->add_option("--configs", gra.configs, "random configurations")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gra_cmd->add_option("--out", gra.out, "report path (JSON)");

  AblationArgs abl;
  CLI::App* abl_cmd = app.add_subcommand("ablation", "compare the six axis alignment orders");
  abl_cmd->add_option("--seeds", abl.seeds, "seeds per order")->check(CLI::PositiveNumber)->capture_default_str();
  abl_cmd->add_option("--epochs", abl.epochs, "training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  abl_cmd->add_option("--lr", abl.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  abl_cmd->add_option("--batch", abl.batch, "batch size")->check(CLI::PositiveNumber)->capture_default_str();
  abl_cmd->add_option("--seed", abl.seed, "training seed base")->capture_default_str();
  abl_cmd->add_option("--data-seed", abl.data_seed, "dataset seed")->capture_default_str();
  abl_cmd->add_option("--per-class", abl.per_class, "samples per class")
      ->check(CLI::PositiveNumber)->capture_default_str();
  abl_cmd->add_option("--points", abl.points, "points per cloud")
      ->check(CLI::Range(std::size_t{8}, std::size_t{1000000}))->capture_default_str();
  abl_cmd->add_option("--noise", abl.noise, "surface noise sigma")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  abl_cmd->add_option("--queries", abl.queries, "query points per cloud")
      ->check(CLI::PositiveNumber)->capture_default_str();
  abl_cmd->add_option("--neighbors", abl.neighbors, "neighborhood width")
      ->check(CLI::PositiveNumber)->capture_default_str();
  abl_cmd->add_option("--radius", abl.radius, "neighborhood radius")
      ->check(CLI::PositiveNumber)->capture_default_str();
  abl_cmd->add_option("--hidden", abl.hidden, "hidden widths")->delimiter(',')->capture_default_str();
  abl_cmd->add_option("--out", abl.out, "report path (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen);
    if (inv_cmd->parsed()) return run_invariance(inv);
    if (pro_cmd->parsed()) return run_procrustes_check(pro);
    if (tra_cmd->parsed()) return run_train(tra);
    if (eva_cmd->parsed()) return run_eval(eva);
    if (gra_cmd->parsed()) return run_gradcheck(gra);
    if (abl_cmd->parsed()) return run_ablation(abl);
  } catch (const wfa::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const wfa::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const wfa::UnsupportedPly& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const wfa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
