#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace crfmm;

using Rows = std::vector<std::vector<SegmentId>>;

TEST(AccuracyBySegment, Examples) {
  const Rows truth{{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}};
  EXPECT_DOUBLE_EQ(accuracy_by_segment(truth, truth), 1.0);
  const Rows matched{{1, 2, 0, 4, 5}, {6, 7, 8, 0, 10}};
  EXPECT_DOUBLE_EQ(accuracy_by_segment(matched, truth), 0.8);
  EXPECT_THROW(accuracy_by_segment(Rows{}, Rows{}), InputError);
  EXPECT_THROW(accuracy_by_segment(Rows{{1}}, Rows{{1, 2}}), InputError);
  EXPECT_THROW(accuracy_by_segment(Rows{{1}}, truth), InputError);
}

TEST(AccuracyByPath, Examples) {
  const Rows truth{{1, 2}, {3, 4}, {5, 6}, {7, 8}};
  EXPECT_DOUBLE_EQ(accuracy_by_path(truth, truth), 1.0);
  const Rows matched{{1, 2}, {3, 4}, {5, 0}, {7, 8}};
  EXPECT_DOUBLE_EQ(accuracy_by_path(matched, truth), 0.75);
  EXPECT_THROW(accuracy_by_path(Rows{}, Rows{}), InputError);
}

// With equal point counts per trajectory every wrong path costs at least
// one point, so A_r <= A_s.
TEST(Accuracy, PathNeverExceedsSegmentForEqualLengths) {
  std::mt19937_64 rng(30);
  std::uniform_int_distribution<int> seg(1, 3), len(1, 6), n(1, 8);
  for (int trial = 0; trial < 500; ++trial) {
    Rows truth, matched;
    const int points = len(rng);
    for (int i = n(rng); i > 0; --i) {
      std::vector<SegmentId> t, m;
      for (int k = 0; k < points; ++k) {
        t.push_back(seg(rng));
        m.push_back(seg(rng));
      }
      truth.push_back(t);
      matched.push_back(m);
    }
    EXPECT_LE(accuracy_by_path(matched, truth), accuracy_by_segment(matched, truth));
  }
}

// A_s pools points, A_r counts trajectories: a short correct trajectory next
// to a long wrong one puts A_r above A_s.
TEST(Accuracy, PooledSegmentAccuracyCanFallBelowPathAccuracy) {
  const Rows truth{{1}, {2, 2, 2, 2}};
  const Rows matched{{1}, {3, 3, 3, 3}};
  EXPECT_DOUBLE_EQ(accuracy_by_path(matched, truth), 0.5);
  EXPECT_DOUBLE_EQ(accuracy_by_segment(matched, truth), 0.2);
}

TEST(RepeatRatio, Examples) {
  const Path history{{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}};
  const Path sub{{3, 4, 5, 6}};
  EXPECT_DOUBLE_EQ(repeat_ratio(sub, history), 1.0);
  EXPECT_DOUBLE_EQ(repeat_ratio(history, sub), 0.4);
  EXPECT_DOUBLE_EQ(repeat_ratio(Path{{1, 2, 3, 99}}, history), 0.75);
  EXPECT_DOUBLE_EQ(repeat_ratio(Path{{11, 12}}, history), 0.0);
  EXPECT_DOUBLE_EQ(repeat_ratio(Path{{4, 3}}, sub), 1.0);  // order-insensitive
  EXPECT_THROW(repeat_ratio(Path{}, history), InputError);
}

TEST(RepeatedPathShare, Examples) {
  const Path p{{1, 2, 3, 4}};
  EXPECT_DOUBLE_EQ(repeated_path_share(std::vector<Path>{p}), 0.0);
  EXPECT_DOUBLE_EQ(repeated_path_share(std::vector<Path>(5, p)), 0.8);
  EXPECT_DOUBLE_EQ(repeated_path_share(std::vector<Path>{Path{{1}}, Path{{2}}, Path{{3}}}), 0.0);
  // 3 of 4 shared is 0.75, not above 0.8.
  EXPECT_DOUBLE_EQ(repeated_path_share(std::vector<Path>{p, Path{{1, 2, 3, 9}}}), 0.0);
  EXPECT_THROW(repeated_path_share(std::vector<Path>{}), InputError);
}

TEST(HmmBaseline, StraightRoadMatchesCrf) {
  const RoadNetwork net = fixtures::line_network(5, 200.0);
  Trajectory t{1, 1, {}};
  for (int i = 0; i < 20; ++i) t.points.push_back({10.0 + 50.0 * i, (i % 3) * 4.0 - 4.0, 5 * i});
  const PipelineConfig cfg;
  const MatchResult hmm = hmm_baseline_match(t, net, cfg);
  const MatchResult crf = match_trajectory(t, net, {1, 1, 1}, nullptr, cfg);
  EXPECT_EQ(hmm.matched_segments, crf.matched_segments);
}

TEST(HmmBaseline, EqualsBruteForceArgmax) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto lat = fixtures::random_lattice(rng, 4, 4);
    double best = -INFINITY;
    std::vector<std::size_t> arg;
    fixtures::for_each_assignment(lat, [&](const auto& a) {
      const double s = sequence_score(lat, a, kHmmParams);
      if (s > best) best = s, arg = a;
    });
    EXPECT_EQ(hmm_matcher().match({}, lat).assignment, arg);
  }
}

// Equal-length routes at 60 and 30 km/h with timing of the fast one: only
// the temporal feature separates them.
TEST(HmmBaseline, TemporalScenario) {
  const auto s = fixtures::temporal_scenario();
  const PipelineConfig cfg;
  const CandidateLattice lat = build_lattice(s.traj, s.net, cfg.lattice_options());
  auto best_via = [&](SegmentId mid_a, SegmentId mid_b, const CrfParams& p) {
    double best = -INFINITY;
    fixtures::for_each_assignment(lat, [&](const auto& a) {
      const SegmentId m = lat.layers[1][a[1]].projection.segment_id;
      if (m == mid_a || m == mid_b) best = std::max(best, sequence_score(lat, a, p));
    });
    return best;
  };
  const double hmm_fast = best_via(2, 4, kHmmParams), hmm_slow = best_via(3, 5, kHmmParams);
  EXPECT_NEAR(hmm_fast, hmm_slow, 1e-9);
  const CrfParams crf1{1, 1, 1};
  EXPECT_GT(best_via(2, 4, crf1), best_via(3, 5, crf1) + 0.1);
  const MatchResult r = match_trajectory(s.traj, s.net, crf1, nullptr, cfg);
  EXPECT_TRUE(r.matched_segments[1] == 2 || r.matched_segments[1] == 4) << r.matched_segments[1];
  EXPECT_EQ(r.stitched_path.segments, (std::vector<SegmentId>{1, 2, 4, 6}));
}

namespace {

SyntheticWorld small_world(double sigma, std::uint64_t seed = 3) {
  WorldConfig w;
  w.grid_cols = w.grid_rows = 6;
  w.drivers = 3;
  w.trips_per_driver = 6;
  w.min_od_distance_m = 900;
  w.gps_sigma_m = sigma;
  w.seed = seed;
  return generate_synthetic(w);
}

}  // namespace

TEST(IntervalSweep, RowCountAndConsistency) {
  const SyntheticWorld world = small_world(8.0);
  const auto data = labeled_of(world.trips);
  const PipelineConfig cfg;
  const std::vector<double> intervals{10, 60, 180};
  const std::vector<NamedMatcher> matchers{hmm_matcher(), crf_matcher("crf", {1, 1, 1}, nullptr, cfg)};
  const auto reports = interval_sweep(data, world.network, intervals, matchers, cfg, 2);
  ASSERT_EQ(reports.size(), 2u);
  std::size_t rows = 0;
  for (const EvalReport& r : reports) {
    rows += r.per_interval.size();
    for (const auto& [iv, sc] : r.per_interval) {
      EXPECT_LE(sc.a_r, sc.a_s);
      EXPECT_EQ(sc.n_paths, data.size());
    }
  }
  EXPECT_EQ(rows, intervals.size() * matchers.size());

  // At the native interval nothing is dropped.
  std::size_t points = 0;
  for (const auto& lt : data) points += lt.labels.size();
  EXPECT_EQ(reports[0].per_interval.at(10).n_points, points);

  // A second run is identical, regardless of worker count.
  const auto again = interval_sweep(data, world.network, intervals, matchers, cfg, 1);
  for (std::size_t m = 0; m < 2; ++m)
    for (double iv : intervals) {
      EXPECT_EQ(again[m].per_interval.at(iv).a_s, reports[m].per_interval.at(iv).a_s);
      EXPECT_EQ(again[m].per_interval.at(iv).a_r, reports[m].per_interval.at(iv).a_r);
    }
  EXPECT_THROW(interval_sweep(data, world.network, std::vector<double>{0.0}, matchers, cfg), InputError);
}

TEST(IntervalSweep, NoiselessNativeIntervalIsPerfect) {
  const SyntheticWorld world = small_world(0.0);
  const auto data = labeled_of(world.trips);
  const PipelineConfig cfg;
  const std::vector<double> intervals{10};
  const std::vector<NamedMatcher> matchers{crf_matcher("crf", {1, 1, 1}, nullptr, cfg)};
  const auto reports = interval_sweep(data, world.network, intervals, matchers, cfg);
  EXPECT_DOUBLE_EQ(reports[0].per_interval.at(10).a_s, 1.0);
}

TEST(IntervalSweep, DenseBeatsSparse) {
  WorldConfig w;
  w.drivers = 6;
  w.trips_per_driver = 10;
  w.gps_sigma_m = 15;
  w.seed = 5;
  const SyntheticWorld world = generate_synthetic(w);
  const auto data = labeled_of(world.trips);
  const PipelineConfig cfg;
  const std::vector<double> intervals{30, 420};
  const std::vector<NamedMatcher> matchers{crf_matcher("crf", {1, 1, 1}, nullptr, cfg)};
  const auto r = interval_sweep(data, world.network, intervals, matchers, cfg)[0];
  EXPECT_GE(r.per_interval.at(30).a_s, r.per_interval.at(420).a_s + 0.02);
}
