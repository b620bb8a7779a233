// crfmm: command-line front end for map matching experiments.
//
//   crfmm gen        synthetic network, trajectories, labels and paths
//   crfmm train      CRF weights from labeled trajectories
//   crfmm build-idt  per-slot inverted index of historical paths
//   crfmm match      match trajectories (preference branch when --idt is given)
//   crfmm eval       score match output against labels
//   crfmm sweep      end-to-end accuracy over sampling intervals
//
// Exit codes: 0 success, 1 input error, 2 internal error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crfmm/crfmm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crfmm;

namespace {

struct TrainConfig {
  std::size_t max_iters = 200;
  double tol = 1e-6;
  double l2 = 0.0;
  std::vector<double> intervals;  // empty: train on the data as given
};

struct Settings {
  WorldConfig world;
  PipelineConfig pipeline;
  TrainConfig train;
  double zeta = 0.8;
  std::vector<double> sweep_intervals{30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330, 360, 390, 420};
  std::size_t test_months = 1;
};

// --- config file --------------------------------------------------------------

template <typename T>
void take(const json& obj, const char* key, T& field) {
  if (obj.contains(key)) field = obj.at(key).get<T>();
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw InputError("config section '" + where + "' must be an object");
  for (const auto& [k, _] : obj.items())
    if (!known.contains(k)) throw InputError("unknown config key '" + where + "." + k + "'");
}

json world_to_json(const WorldConfig& w) {
  return {{"grid_cols", w.grid_cols},
          {"grid_rows", w.grid_rows},
          {"spacing_m", w.spacing_m},
          {"twin_offset_m", w.twin_offset_m},
          {"twin_speed_ratio_min", w.twin_speed_ratio_min},
          {"twin_speed_ratio_max", w.twin_speed_ratio_max},
          {"speed_min", w.speed_min},
          {"speed_max", w.speed_max},
          {"congestion_min", w.congestion_min},
          {"congestion_max", w.congestion_max},
          {"drivers", w.drivers},
          {"od_pairs_per_driver", w.od_pairs_per_driver},
          {"trips_per_driver", w.trips_per_driver},
          {"months", w.months},
          {"random_trip_share", w.random_trip_share},
          {"peak_share", w.peak_share},
          {"route_alternatives", w.route_alternatives},
          {"beta", w.beta},
          {"gps_sigma_m", w.gps_sigma_m},
          {"native_interval_s", w.native_interval_s},
          {"min_od_distance_m", w.min_od_distance_m},
          {"seed", w.seed}};
}

void world_from_json(const json& j, WorldConfig& w) {
  std::set<std::string> known;
  const json defaults = world_to_json(w);
  for (const auto& [k, _] : defaults.items()) known.insert(k);
  reject_unknown(j, known, "world");
  take(j, "grid_cols", w.grid_cols);
  take(j, "grid_rows", w.grid_rows);
  take(j, "spacing_m", w.spacing_m);
  take(j, "twin_offset_m", w.twin_offset_m);
  take(j, "twin_speed_ratio_min", w.twin_speed_ratio_min);
  take(j, "twin_speed_ratio_max", w.twin_speed_ratio_max);
  take(j, "speed_min", w.speed_min);
  take(j, "speed_max", w.speed_max);
  take(j, "congestion_min", w.congestion_min);
  take(j, "congestion_max", w.congestion_max);
  take(j, "drivers", w.drivers);
  take(j, "od_pairs_per_driver", w.od_pairs_per_driver);
  take(j, "trips_per_driver", w.trips_per_driver);
  take(j, "months", w.months);
  take(j, "random_trip_share", w.random_trip_share);
  take(j, "peak_share", w.peak_share);
  take(j, "route_alternatives", w.route_alternatives);
  take(j, "beta", w.beta);
  take(j, "gps_sigma_m", w.gps_sigma_m);
  take(j, "native_interval_s", w.native_interval_s);
  take(j, "min_od_distance_m", w.min_od_distance_m);
  take(j, "seed", w.seed);
}

std::string mode_name(PreferenceMode m) { return m == PreferenceMode::Literal ? "literal" : "normalized"; }

json settings_to_json(const Settings& s) {
  const PipelineConfig& p = s.pipeline;
  return {{"world", world_to_json(s.world)},
          {"pipeline",
           {{"interval_threshold_s", p.interval_threshold_s},
            {"alpha", p.alpha},
            {"candidate_k", p.candidate_k},
            {"scale_m", p.scale_m},
            {"max_offset_m", p.max_offset_m},
            {"preference_mode", mode_name(p.preference_mode)},
            {"x_sat", p.experience.x_sat}}},
          {"train",
           {{"max_iters", s.train.max_iters}, {"tol", s.train.tol}, {"l2", s.train.l2}, {"intervals", s.train.intervals}}},
          {"eval", {{"zeta", s.zeta}}},
          {"sweep", {{"intervals", s.sweep_intervals}}},
          {"gen", {{"test_months", s.test_months}}}};
}

void settings_from_json(const json& j, Settings& s) {
  reject_unknown(j, {"world", "pipeline", "train", "eval", "sweep", "gen"}, "config");
  if (j.contains("world")) world_from_json(j.at("world"), s.world);
  if (j.contains("pipeline")) {
    const json& p = j.at("pipeline");
    reject_unknown(p, {"interval_threshold_s", "alpha", "candidate_k", "scale_m", "max_offset_m", "preference_mode", "x_sat"},
                   "pipeline");
    take(p, "interval_threshold_s", s.pipeline.interval_threshold_s);
    take(p, "alpha", s.pipeline.alpha);
    take(p, "candidate_k", s.pipeline.candidate_k);
    take(p, "scale_m", s.pipeline.scale_m);
    take(p, "max_offset_m", s.pipeline.max_offset_m);
    take(p, "x_sat", s.pipeline.experience.x_sat);
    if (p.contains("preference_mode")) {
      const auto m = p.at("preference_mode").get<std::string>();
      if (m != "literal" && m != "normalized") throw InputError("preference_mode must be literal or normalized");
      s.pipeline.preference_mode = m == "literal" ? PreferenceMode::Literal : PreferenceMode::Normalized;
    }
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, {"max_iters", "tol", "l2", "intervals"}, "train");
    take(t, "max_iters", s.train.max_iters);
    take(t, "tol", s.train.tol);
    take(t, "l2", s.train.l2);
    take(t, "intervals", s.train.intervals);
  }
  if (j.contains("eval")) {
    reject_unknown(j.at("eval"), {"zeta"}, "eval");
    take(j.at("eval"), "zeta", s.zeta);
  }
  if (j.contains("sweep")) {
    reject_unknown(j.at("sweep"), {"intervals"}, "sweep");
    take(j.at("sweep"), "intervals", s.sweep_intervals);
  }
  if (j.contains("gen")) {
    reject_unknown(j.at("gen"), {"test_months"}, "gen");
    take(j.at("gen"), "test_months", s.test_months);
  }
}

Settings load_settings(const std::string& path) {
  Settings s;
  if (path.empty()) return s;
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  try {
    json j;
    in >> j;
    settings_from_json(j, s);
  } catch (const json::exception& e) {
    throw InputError("config file " + path + ": " + e.what());
  }
  return s;
}

// --- helpers ------------------------------------------------------------------

struct Globals {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string config;
  std::string out_dir = "out";
  std::size_t jobs = default_jobs();
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " not found: " + path);
}

void write_manifest(const Globals& g, const std::string& command, const Settings& s, const json& inputs,
                    const json& outputs) {
  json m;
  m["command"] = command;
  m["seed"] = g.seed;
  m["jobs"] = g.jobs;
  m["config_file"] = g.config;
  m["resolved"] = settings_to_json(s);
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  std::ofstream out(g.out_dir + "/manifest.json");
  if (!out) throw InputError("cannot write manifest in " + g.out_dir);
  out << m.dump(2) << '\n';
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<LabeledTrajectory> load_labeled(const std::string& traj_file, const std::string& label_file,
                                            const std::string& path_file) {
  require_file(traj_file, "trajectory file");
  require_file(label_file, "label file");
  require_file(path_file, "path file");
  const auto trajs = load_trajectories(traj_file);
  return attach_labels(trajs, load_labels(label_file), load_paths(path_file));
}

std::vector<LabeledTrajectory> expand_intervals(const std::vector<LabeledTrajectory>& data,
                                                const std::vector<double>& intervals) {
  if (intervals.empty()) return data;
  std::vector<LabeledTrajectory> out;
  for (double iv : intervals)
    for (const LabeledTrajectory& lt : data) out.push_back(downsample(lt, iv));
  return out;
}

TrainResult train_params(const std::vector<LabeledTrajectory>& data, const RoadNetwork& net, const Settings& s,
                         bool fix_lambda2, std::size_t jobs, TrainingSet* info = nullptr) {
  const auto expanded = expand_intervals(data, s.train.intervals);
  TrainingSet set = make_training_set(expanded, net, s.pipeline.lattice_options(), jobs);
  TrainOptions opt;
  opt.max_iters = s.train.max_iters;
  opt.tol = s.train.tol;
  opt.l2 = s.train.l2;
  opt.jobs = jobs;
  CrfParams init{1.0, 1.0, 1.0};
  if (fix_lambda2) {
    opt.free = {true, true, false};
    init.lambda2 = 0.0;
  }
  TrainResult r = train(set.examples, init, opt);
  if (info) {
    info->skipped_points = set.skipped_points;
    info->skipped_trajectories = set.skipped_trajectories;
  }
  return r;
}

InvertedIndexTable build_index(const PathTable& paths, const std::vector<Trajectory>& trajs) {
  std::map<TrajectoryKey, Timestamp> starts;
  for (const Trajectory& t : trajs) starts[key_of(t)] = t.points.front().t;
  InvertedIndexTable idt;
  for (const auto& [key, path] : paths) {
    auto it = starts.find(key);
    if (it == starts.end())
      throw InputError("no trajectory for path " + std::to_string(key.vehicle_id) + "/" + std::to_string(key.trip_id));
    if (!path.empty()) idt.insert_path(key.vehicle_id, path, slot_of(it->second));
  }
  return idt;
}

void write_dataset(const std::string& dir, const std::string& prefix, std::span<const SyntheticTrip> trips) {
  std::vector<Trajectory> trajs;
  LabelTable labels;
  PathTable paths;
  for (const SyntheticTrip& t : trips) {
    trajs.push_back(t.data.trajectory);
    auto& rows = labels[key_of(t.data.trajectory)];
    for (std::size_t i = 0; i < t.data.labels.size(); ++i) rows[i] = t.data.labels[i];
    paths[key_of(t.data.trajectory)] = t.data.full_path;
  }
  save_trajectories(dir + "/" + prefix + "_trajectories.csv", trajs);
  save_labels(dir + "/" + prefix + "_labels.csv", labels);
  save_paths(dir + "/" + prefix + "_paths.csv", paths);
}

// --- commands -----------------------------------------------------------------

int cmd_gen(const Globals& g, Settings& s) {
  if (s.test_months >= s.world.months) throw InputError("test_months must be smaller than months");
  ensure_dir(g.out_dir);
  const SyntheticWorld world = generate_synthetic(s.world);
  save_network(world.network, g.out_dir + "/network.json");
  std::vector<SyntheticTrip> train, test;
  for (const SyntheticTrip& t : world.trips)
    (t.month + s.test_months >= s.world.months ? test : train).push_back(t);
  write_dataset(g.out_dir, "train", train);
  write_dataset(g.out_dir, "test", test);
  {
    auto out = csv::open_out(g.out_dir + "/trips.csv");
    out << "vehicle_id,trip_id,month,slot,origin_segment,destination_segment,habitual\n";
    for (const SyntheticTrip& t : world.trips)
      out << t.data.trajectory.vehicle_id << ',' << t.data.trajectory.trip_id << ',' << t.month << ','
          << slot_name(t.slot) << ',' << t.od.origin_segment << ',' << t.od.destination_segment << ','
          << (t.habitual ? 1 : 0) << '\n';
  }
  write_manifest(g, "gen", s, json::object(),
                 {"network.json", "train_trajectories.csv", "train_labels.csv", "train_paths.csv",
                  "test_trajectories.csv", "test_labels.csv", "test_paths.csv", "trips.csv"});
  json summary{{"trips", world.trips.size()},
               {"train_trips", train.size()},
               {"test_trips", test.size()},
               {"segments", world.network.segment_count()}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_train(const Globals& g, Settings& s, const std::string& network, const std::string& trajs,
              const std::string& labels, const std::string& paths, bool fix_lambda2, const std::string& out_name) {
  require_file(network, "network file");
  const RoadNetwork net = load_network(network);
  const auto data = load_labeled(trajs, labels, paths);
  ensure_dir(g.out_dir);
  TrainingSet info;
  const TrainResult r = train_params(data, net, s, fix_lambda2, g.jobs, &info);
  save_params(g.out_dir + "/" + out_name, r.params, s.pipeline.scale_m);
  write_manifest(g, "train", s,
                 {{"network", network}, {"trajectories", trajs}, {"labels", labels}, {"paths", paths},
                  {"fix_lambda2", fix_lambda2}},
                 {out_name});
  json summary{{"log_likelihood", r.trace.back()},
               {"initial_log_likelihood", r.trace.front()},
               {"iterations", r.iterations},
               {"converged", r.converged},
               {"skipped_points", info.skipped_points},
               {"skipped_trajectories", info.skipped_trajectories},
               {"params", params_to_json(r.params, s.pipeline.scale_m)}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_build_idt(const Globals& g, Settings& s, const std::string& paths, const std::string& trajs) {
  require_file(paths, "path file");
  require_file(trajs, "trajectory file");
  const InvertedIndexTable idt = build_index(load_paths(paths), load_trajectories(trajs));
  ensure_dir(g.out_dir);
  save_idt(idt, g.out_dir);
  write_manifest(g, "build-idt", s, {{"paths", paths}, {"trajectories", trajs}},
                 {kIdtFileNames[0], kIdtFileNames[1], kIdtFileNames[2]});
  json summary{{"paths", idt.path_count()}};
  for (TimeSlot slot : kAllSlots) summary[std::string(slot_name(slot)) + "_entries"] = idt.entry_count(slot);
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_match(const Globals& g, Settings& s, const std::string& network, const std::string& trajs,
              const std::string& params_file, const std::string& idt_dir, double interval) {
  require_file(network, "network file");
  require_file(trajs, "trajectory file");
  require_file(params_file, "params file");
  const RoadNetwork net = load_network(network);
  const StoredParams stored = load_params(params_file);
  s.pipeline.scale_m = stored.scale_m;
  std::optional<InvertedIndexTable> idt;
  if (!idt_dir.empty()) idt = load_idt(idt_dir);
  const auto all = load_trajectories(trajs);

  // Keep original point indices so output aligns with the label file.
  std::vector<Trajectory> input;
  std::vector<std::vector<std::size_t>> kept;
  for (const Trajectory& t : all) {
    std::vector<std::size_t> idx(t.points.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (interval > 0.0) idx = downsample_indices(t, interval);
    Trajectory sparse{t.vehicle_id, t.trip_id, {}};
    for (std::size_t i : idx) sparse.points.push_back(t.points[i]);
    input.push_back(std::move(sparse));
    kept.push_back(std::move(idx));
  }
  const BatchResult batch = match_batch(input, net, stored.params, idt ? &*idt : nullptr, s.pipeline, g.jobs);

  ensure_dir(g.out_dir);
  LabelTable matches;
  PathTable stitched;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (!batch.results[i]) continue;
    auto& rows = matches[key_of(input[i])];
    for (std::size_t k = 0; k < kept[i].size(); ++k) rows[kept[i][k]] = batch.results[i]->matched_segments[k];
    stitched[key_of(input[i])] = batch.results[i]->stitched_path;
  }
  save_labels(g.out_dir + "/matches.csv", matches, kMatchHeader);
  save_paths(g.out_dir + "/matched_paths.csv", stitched);
  write_manifest(g, "match", s,
                 {{"network", network}, {"trajectories", trajs}, {"params", params_file}, {"idt", idt_dir},
                  {"interval_s", interval}},
                 {"matches.csv", "matched_paths.csv"});
  json errors = json::array();
  for (const BatchError& e : batch.errors)
    errors.push_back({{"vehicle_id", input[e.index].vehicle_id}, {"trip_id", input[e.index].trip_id}, {"error", e.message}});
  json summary{{"trajectories", input.size()},
               {"pure_crf", batch.summary.pure_crf},
               {"preference", batch.summary.preference},
               {"errors", errors}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_eval(const Globals& g, Settings& s, const std::string& results, const std::string& labels,
             const std::string& matcher_name, double interval, bool detail) {
  require_file(results, "results file");
  require_file(labels, "label file");
  const LabelTable matched = load_labels(results, kMatchHeader);
  const LabelTable truth = load_labels(labels);
  std::vector<std::vector<SegmentId>> m_rows, t_rows;
  std::vector<TrajectoryKey> keys;
  for (const auto& [key, rows] : matched) {
    auto it = truth.find(key);
    if (it == truth.end())
      throw InputError("no labels for matched trajectory " + std::to_string(key.vehicle_id) + "/" +
                       std::to_string(key.trip_id));
    std::vector<SegmentId> mv, tv;
    for (const auto& [idx, seg] : rows) {
      auto lt = it->second.find(idx);
      if (lt == it->second.end())
        throw InputError("no label for point " + std::to_string(idx) + " of trajectory " +
                         std::to_string(key.vehicle_id) + "/" + std::to_string(key.trip_id));
      mv.push_back(seg);
      tv.push_back(lt->second);
    }
    keys.push_back(key);
    m_rows.push_back(std::move(mv));
    t_rows.push_back(std::move(tv));
  }
  const double a_s = accuracy_by_segment(m_rows, t_rows);
  const double a_r = accuracy_by_path(m_rows, t_rows);
  std::size_t n_points = 0;
  for (const auto& t : t_rows) n_points += t.size();

  ensure_dir(g.out_dir);
  {
    auto out = csv::open_out(g.out_dir + "/report.csv");
    out << "matcher,interval_s,A_s,A_r,n_points,n_paths\n";
    out << matcher_name << ',' << csv::format_decimal(interval, 0) << ',' << fmt6(a_s) << ',' << fmt6(a_r) << ','
        << n_points << ',' << t_rows.size() << '\n';
  }
  json outputs = {"report.csv"};
  if (detail) {
    auto out = csv::open_out(g.out_dir + "/detail.csv");
    out << "vehicle_id,trip_id,n_points,n_correct,path_correct\n";
    for (std::size_t i = 0; i < keys.size(); ++i) {
      std::size_t correct = 0;
      for (std::size_t k = 0; k < t_rows[i].size(); ++k) correct += m_rows[i][k] == t_rows[i][k] ? 1 : 0;
      out << keys[i].vehicle_id << ',' << keys[i].trip_id << ',' << t_rows[i].size() << ',' << correct << ','
          << (correct == t_rows[i].size() ? 1 : 0) << '\n';
    }
    outputs.push_back("detail.csv");
  }
  write_manifest(g, "eval", s, {{"results", results}, {"labels", labels}, {"matcher", matcher_name}}, outputs);
  std::cout << json{{"A_s", a_s}, {"A_r", a_r}, {"n_points", n_points}, {"n_paths", t_rows.size()}}.dump() << '\n';
  return 0;
}

int cmd_sweep(const Globals& g, Settings& s, const std::string& data_dir) {
  RoadNetwork net;
  std::vector<LabeledTrajectory> train, test;
  std::vector<Trajectory> train_trajs;
  PathTable train_paths;
  if (!data_dir.empty()) {
    require_file(data_dir + "/network.json", "network file");
    net = load_network(data_dir + "/network.json");
    train = load_labeled(data_dir + "/train_trajectories.csv", data_dir + "/train_labels.csv",
                         data_dir + "/train_paths.csv");
    test = load_labeled(data_dir + "/test_trajectories.csv", data_dir + "/test_labels.csv",
                        data_dir + "/test_paths.csv");
  } else {
    if (s.test_months >= s.world.months) throw InputError("test_months must be smaller than months");
    SyntheticWorld world = generate_synthetic(s.world);
    net = std::move(world.network);
    for (const SyntheticTrip& t : world.trips)
      (t.month + s.test_months >= s.world.months ? test : train).push_back(t.data);
  }
  for (const LabeledTrajectory& lt : train) {
    train_trajs.push_back(lt.trajectory);
    train_paths[key_of(lt.trajectory)] = lt.full_path;
  }
  const TrainResult crf1 = train_params(train, net, s, false, g.jobs);
  const TrainResult crf2 = train_params(train, net, s, true, g.jobs);
  const InvertedIndexTable idt = build_index(train_paths, train_trajs);

  std::vector<NamedMatcher> matchers{hmm_matcher("hmm"), crf_matcher("crf2", crf2.params, nullptr, s.pipeline),
                                     crf_matcher("crf1", crf1.params, nullptr, s.pipeline),
                                     crf_matcher("crf1+rpm", crf1.params, &idt, s.pipeline)};
  const auto reports = interval_sweep(test, net, s.sweep_intervals, matchers, s.pipeline, g.jobs);

  ensure_dir(g.out_dir);
  {
    auto out = csv::open_out(g.out_dir + "/report.csv");
    out << "matcher,interval_s,A_s,A_r,n_points,n_paths\n";
    for (const EvalReport& r : reports)
      for (const auto& [iv, sc] : r.per_interval)
        out << r.matcher << ',' << csv::format_decimal(iv, 0) << ',' << fmt6(sc.a_s) << ',' << fmt6(sc.a_r) << ','
            << sc.n_points << ',' << sc.n_paths << '\n';
  }
  save_params(g.out_dir + "/params_crf1.json", crf1.params, s.pipeline.scale_m);
  save_params(g.out_dir + "/params_crf2.json", crf2.params, s.pipeline.scale_m);
  write_manifest(g, "sweep", s, {{"data_dir", data_dir}}, {"report.csv", "params_crf1.json", "params_crf2.json"});
  json summary = json::object();
  for (const EvalReport& r : reports) summary[r.matcher] = {{"A_s", r.accuracy_by_segment}, {"A_r", r.accuracy_by_path}};
  std::cout << summary.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CRF map matching with route preference mining"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed (overrides world.seed)")->default_val(1);
  app.add_option("--config", g.config, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir, "Output directory")->default_val("out");
  app.add_option("--jobs", g.jobs, "Worker threads for batch matching, training and sweeps")
      ->default_val(default_jobs());

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic network with labeled trajectories");
  std::optional<std::size_t> grid, drivers, trips_per_driver, months, test_months;
  std::optional<double> beta, sigma, twin_offset, native;
  gen->add_option("--grid", grid, "Grid nodes per side (default 12)");
  gen->add_option("--drivers", drivers, "Number of drivers (default 10)");
  gen->add_option("--trips-per-driver", trips_per_driver, "Trips per driver over all months (default 60)");
  gen->add_option("--months", months, "Simulated months (default 6)");
  gen->add_option("--test-months", test_months, "Trailing months written as the test split (default 1)");
  gen->add_option("--beta", beta, "Route preference strength (default 5)");
  gen->add_option("--gps-sigma", sigma, "GPS noise standard deviation in meters (default 10)");
  gen->add_option("--twin-offset", twin_offset, "Parallel-road offset in meters, 0 disables (default 0)");
  gen->add_option("--native-interval", native, "Native sampling interval in seconds (default 10)");

  // train
  auto* tr = app.add_subcommand("train", "Fit CRF weights on labeled trajectories");
  std::string network, trajs, labels, paths, out_name = "params.json";
  bool fix_lambda2 = false;
  tr->add_option("--network", network, "Network JSON")->required();
  tr->add_option("--trajectories", trajs, "Trajectory CSV")->required();
  tr->add_option("--labels", labels, "Label CSV")->required();
  tr->add_option("--paths", paths, "Path CSV")->required();
  tr->add_flag("--fix-lambda2", fix_lambda2, "Hold the temporal weight at 0 (spatial-only model)");
  tr->add_option("--params-name", out_name, "Output file name inside --out-dir")->default_val("params.json");

  // build-idt
  auto* bi = app.add_subcommand("build-idt", "Build per-slot inverted index files from matched paths");
  std::string idt_paths, idt_trajs;
  bi->add_option("--paths", idt_paths, "Matched or labeled path CSV")->required();
  bi->add_option("--trajectories", idt_trajs, "Trajectory CSV giving each trip's start time")->required();

  // match
  auto* ma = app.add_subcommand("match", "Match trajectories to the network");
  std::string m_network, m_trajs, m_params, m_idt;
  double m_interval = 0.0;
  std::optional<double> alpha, threshold;
  std::optional<std::size_t> k;
  std::optional<std::string> pref_mode;
  bool normalized = false;
  ma->add_option("--network", m_network, "Network JSON")->required();
  ma->add_option("--trajectories", m_trajs, "Trajectory CSV")->required();
  ma->add_option("--params", m_params, "Params JSON written by train")->required();
  ma->add_option("--idt", m_idt, "Directory with idt_morning/idt_evening/idt_normal; enables preference");
  ma->add_option("--interval", m_interval, "Downsample to this interval (s) before matching; 0 keeps all")
      ->default_val(0.0);
  ma->add_option("--alpha", alpha, "Preference weight (default 0.7)");
  ma->add_option("--threshold", threshold, "Average interval (s) at which preference engages (default 180)");
  ma->add_option("--k", k, "Candidates per observation (default 6)");
  ma->add_flag("--normalized-preference", normalized, "Laplace-normalized transition probabilities");

  // eval
  auto* ev = app.add_subcommand("eval", "Score match output against labels");
  std::string e_results, e_labels, e_name = "crf";
  double e_interval = 0.0;
  bool e_detail = false;
  ev->add_option("--results", e_results, "matches.csv written by match")->required();
  ev->add_option("--labels", e_labels, "Label CSV")->required();
  ev->add_option("--matcher-name", e_name, "Name written to the report")->default_val("crf");
  ev->add_option("--interval", e_interval, "Interval recorded in the report")->default_val(0.0);
  ev->add_flag("--detail", e_detail, "Also write per-trajectory detail.csv");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Train, index and evaluate all matchers over sampling intervals");
  std::string data_dir;
  std::vector<double> sweep_intervals;
  sw->add_option("--data-dir", data_dir, "Directory written by gen; generated from config when omitted");
  sw->add_option("--intervals", sweep_intervals, "Intervals in seconds (default 30..420 step 30)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    Settings s = load_settings(g.config);
    g.seed_given = app.count("--seed") > 0;
    if (g.seed_given || !g.config.empty()) {
      if (g.seed_given) s.world.seed = g.seed;
    }
    g.seed = s.world.seed;
    if (grid) s.world.grid_cols = s.world.grid_rows = *grid;
    if (drivers) s.world.drivers = *drivers;
    if (trips_per_driver) s.world.trips_per_driver = *trips_per_driver;
    if (months) s.world.months = *months;
    if (test_months) s.test_months = *test_months;
    if (beta) s.world.beta = *beta;
    if (sigma) s.world.gps_sigma_m = *sigma;
    if (twin_offset) s.world.twin_offset_m = *twin_offset;
    if (native) s.world.native_interval_s = static_cast<std::int64_t>(*native);
    if (alpha) s.pipeline.alpha = *alpha;
    if (threshold) s.pipeline.interval_threshold_s = *threshold;
    if (k) s.pipeline.candidate_k = *k;
    if (normalized) s.pipeline.preference_mode = PreferenceMode::Normalized;
    if (!sweep_intervals.empty()) s.sweep_intervals = sweep_intervals;
    s.pipeline.validate();
    if (g.jobs == 0) g.jobs = 1;

    if (*gen) return cmd_gen(g, s);
    if (*tr) return cmd_train(g, s, network, trajs, labels, paths, fix_lambda2, out_name);
    if (*bi) return cmd_build_idt(g, s, idt_paths, idt_trajs);
    if (*ma) return cmd_match(g, s, m_network, m_trajs, m_params, m_idt, m_interval);
    if (*ev) return cmd_eval(g, s, e_results, e_labels, e_name, e_interval, e_detail);
    if (*sw) return cmd_sweep(g, s, data_dir);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
