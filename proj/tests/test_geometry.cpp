#include <cmath>
#include <random>

#include "ctce/geometry.hpp"
#include "doctest.h"

using namespace ctce;

namespace {

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI), pos(-20.0, 20.0);
  return Pose::yaw_translation(yaw(rng), Vec3(pos(rng), pos(rng), pos(rng)));
}

QueryFrame make_frame(std::mt19937_64& rng, int n, int d, uint32_t frame_id = 0) {
  std::uniform_real_distribution<double> pos(-30.0, 30.0), conf(0.0, 1.0), emb(-1.0, 1.0);
  QueryFrame f;
  f.frame_id = frame_id;
  f.timestamp = frame_id * 0.1;
  f.sender_pose = random_pose(rng);
  std::vector<double> e(static_cast<size_t>(n) * d);
  for (auto& x : e) x = emb(rng);
  for (int i = 0; i < n; ++i) {
    f.ref_points.emplace_back(pos(rng), pos(rng), pos(rng));
    f.confidences.push_back(conf(rng));
  }
  if (n > 0) f.embeddings = Tensor(n, d, std::move(e));
  return f;
}

}  // namespace

TEST_CASE("wrap_yaw") {
  CHECK(wrap_yaw(0.0) == 0.0);
  CHECK(std::fabs(wrap_yaw(2.0 * M_PI)) < 1e-12);
  CHECK(wrap_yaw(3.5 * M_PI) == doctest::Approx(-0.5 * M_PI).epsilon(1e-12));
  CHECK(wrap_yaw(M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_yaw(-M_PI) == doctest::Approx(M_PI));
}

TEST_CASE("pose compose and inverse") {
  std::mt19937_64 rng(1);
  Pose p = random_pose(rng);
  Pose ip = Pose::identity().compose(p);
  CHECK((ip.rotation - p.rotation).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((ip.translation - p.translation).cwiseAbs().maxCoeff() < 1e-15);

  Pose round = p.compose(p.inverse());
  CHECK((round.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(round.translation.cwiseAbs().maxCoeff() < 1e-9);

  Pose a = random_pose(rng), b = random_pose(rng);
  Pose ab = a.compose(b);
  std::uniform_real_distribution<double> pos(-10.0, 10.0);
  for (int i = 0; i < 10; ++i) {
    Vec3 x(pos(rng), pos(rng), pos(rng));
    CHECK((ab.apply(x) - a.apply(b.apply(x))).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("transform_point cases") {
  Vec3 x(4.0, 5.0, 6.0);
  CHECK((Pose::identity().apply(x) - x).cwiseAbs().maxCoeff() == 0.0);
  Pose t = Pose::yaw_translation(0.0, Vec3(1, 2, 3));
  CHECK((t.apply(Vec3::Zero()) - Vec3(1, 2, 3)).cwiseAbs().maxCoeff() == 0.0);
  Pose r = Pose::yaw_translation(M_PI / 2.0, Vec3::Zero());
  CHECK((r.apply(Vec3(1, 0, 0)) - Vec3(0, 1, 0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pose constructor rejects non-orthonormal rotation") {
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS(Pose(bad, Vec3::Zero()), std::invalid_argument);
}

TEST_CASE("reframe_query_frame") {
  std::mt19937_64 rng(2);

  QueryFrame f = make_frame(rng, 4, 8);
  QueryFrame same = reframe_query_frame(f, f.sender_pose);
  for (int i = 0; i < 4; ++i)
    CHECK((same.ref_points[i] - f.ref_points[i]).cwiseAbs().maxCoeff() < 1e-12);

  QueryFrame empty = make_frame(rng, 0, 8);
  QueryFrame empty_out = reframe_query_frame(empty, random_pose(rng));
  CHECK(empty_out.empty());

  Pose target = random_pose(rng);
  QueryFrame out = reframe_query_frame(f, target);
  CHECK(out.count() == f.count());
  CHECK(out.embeddings.values() == f.embeddings.values());
  for (int i = 0; i < 4; ++i) {
    Vec3 expect = target.inverse().apply(f.sender_pose.apply(f.ref_points[i]));
    CHECK((out.ref_points[i] - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("reframe preserves pairwise distances") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    QueryFrame f = make_frame(rng, 6, 4);
    QueryFrame out = reframe_query_frame(f, random_pose(rng));
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) {
        const double before = (f.ref_points[i] - f.ref_points[j]).norm();
        const double after = (out.ref_points[i] - out.ref_points[j]).norm();
        CHECK(std::fabs(before - after) < 1e-9);
      }
  }
}

TEST_CASE("history buffer FIFO") {
  std::mt19937_64 rng(4);
  HistoryBuffer b(4);
  b.push(make_frame(rng, 1, 4, 1));
  CHECK(b.size() == 1);

  for (uint32_t id = 2; id <= 5; ++id) b.push(make_frame(rng, 1, 4, id));
  CHECK(b.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(b.at(i).frame_id == static_cast<uint32_t>(i + 2));

  CHECK_THROWS_AS(b.push(make_frame(rng, 1, 4, 5)), std::invalid_argument);
}

TEST_CASE("history buffer matches list-slice oracle on random sequences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 5);
    HistoryBuffer b(k);
    std::vector<uint32_t> ids;
    uint32_t id = 0;
    for (int n = 0; n < 20; ++n) {
      id += 1 + static_cast<uint32_t>(rng() % 3);
      ids.push_back(id);
      b.push(make_frame(rng, 1, 4, id));
      CHECK(b.size() <= k);
    }
    const int keep = std::min<int>(k, static_cast<int>(ids.size()));
    for (int i = 0; i < keep; ++i)
      CHECK(b.at(i).frame_id == ids[ids.size() - keep + i]);
  }
}

TEST_CASE("box3d invariants") {
  Box3D box(Vec3(1, 2, 3), Vec3(4, 2, 1.5), 3.5 * M_PI, 1, 0.7);
  CHECK(box.yaw == doctest::Approx(-0.5 * M_PI));
  CHECK_THROWS_AS(Box3D(Vec3::Zero(), Vec3(0, 1, 1), 0, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(Box3D(Vec3::Zero(), Vec3::Ones(), 0, 0, 1.5), std::invalid_argument);
}

TEST_CASE("query view accessor") {
  std::mt19937_64 rng(6);
  QueryFrame f = make_frame(rng, 3, 5, 7);
  Query q = query_at(f, 1);
  CHECK(q.ref_point == f.ref_points[1]);
  CHECK(q.confidence == f.confidences[1]);
  CHECK(q.embedding == f.embeddings.row_values(1));
  CHECK(q.timestamp == f.timestamp);
}
