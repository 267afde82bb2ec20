#include <gtest/gtest.h>

#include "p2p/errors.hpp"
#include "p2p/pose.hpp"
#include "test_util.hpp"

using namespace p2p;
using p2p::testing::random_pose;
using p2p::testing::random_rotation;

namespace {

Mat3 rot_z(double deg) { return Eigen::AngleAxisd(deg * M_PI / 180.0, Vec3::UnitZ()).toRotationMatrix(); }

}  // namespace

TEST(Rotation6D, CanonicalBasisDecodesToIdentity) {
  EXPECT_TRUE(decode_rotation({Vec3(1, 0, 0), Vec3(0, 1, 0)}).isApprox(Mat3::Identity(), 0));
  EXPECT_NEAR((decode_rotation({Vec3(2, 0, 0), Vec3(0, 3, 0)}) - Mat3::Identity()).norm(), 0.0, 1e-15);
}

TEST(Rotation6D, GramSchmidtByHand) {
  const Mat3 R = decode_rotation({Vec3(1, 1, 0), Vec3(0, 1, 0)});
  const double s = 1.0 / std::sqrt(2.0);
  Mat3 expected;
  expected.col(0) = Vec3(s, s, 0);
  expected.col(1) = Vec3(-s, s, 0);
  expected.col(2) = Vec3(0, 0, 1);
  EXPECT_LT((R - expected).norm(), 1e-15);
  const Mat3 again = decode_rotation(encode_rotation(R));
  EXPECT_LT((again - R).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Rotation6D, EncodeReadsColumns) {
  const auto id = encode_rotation(Mat3::Identity());
  EXPECT_EQ(id.a1, Vec3(1, 0, 0));
  EXPECT_EQ(id.a2, Vec3(0, 1, 0));
  const auto z90 = encode_rotation(rot_z(90));
  EXPECT_LT((z90.a1 - Vec3(0, 1, 0)).norm(), 1e-15);
  EXPECT_LT((z90.a2 - Vec3(-1, 0, 0)).norm(), 1e-15);
}

TEST(Rotation6D, DegenerateInputsThrow) {
  EXPECT_THROW(decode_rotation({Vec3::Zero(), Vec3::UnitY()}), DegenerateRotation);
  EXPECT_THROW(decode_rotation({Vec3(1, 2, 3), Vec3(2, 4, 6)}), DegenerateRotation);
  EXPECT_THROW(decode_rotation({Vec3(1, 0, 0), Vec3(-3, 0, 0)}), DegenerateRotation);
}

TEST(Rotation6D, NonRotationsRejected) {
  EXPECT_THROW(encode_rotation(2.0 * Mat3::Identity()), InvalidRotation);
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1;
  EXPECT_THROW(encode_rotation(reflect), InvalidRotation);
}

TEST(Rotation6D, RoundTripProperty) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    const Mat3 R = random_rotation(rng);
    EXPECT_LT((decode_rotation(encode_rotation(R)) - R).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Rotation6D, DecodeAlwaysOrthonormalProperty) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int k = 0; k < 1000; ++k) {
    const Rotation6D r{Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), n(rng))};
    const Mat3 R = decode_rotation(r);
    EXPECT_LT((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-10);
  }
}

TEST(PoseFrame, RootRelativizeZeroesRoot) {
  std::mt19937_64 rng(3);
  auto p = random_pose(5, rng);
  const Matrix before = p.coords;
  root_relativize(p);
  EXPECT_EQ(p.coords.row(0).norm(), 0.0);
  for (int j = 0; j < 5; ++j) EXPECT_LT((p.coords.row(j) - (before.row(j) - before.row(0))).norm(), 1e-15);
}

TEST(PoseFrame, StackedRoundTrip) {
  std::mt19937_64 rng(4);
  const auto p = random_pose(6, rng);
  const auto q = PoseFrame::from_stacked(p.stacked());
  EXPECT_EQ(p.coords, q.coords);
  EXPECT_EQ(p.rots, q.rots);
  EXPECT_THROW(PoseFrame::from_stacked(Matrix::Zero(3, 8)), ShapeError);
}

TEST(Mpjpe, Examples) {
  std::mt19937_64 rng(5);
  auto gt = random_pose(25, rng);
  root_relativize(gt);
  EXPECT_EQ(mpjpe(gt, gt), 0.0);
  auto moved = gt;
  moved.coords.row(7) += Vec3(0.003, 0.004, 0.0).transpose();
  EXPECT_NEAR(mpjpe(moved, gt), 0.2, 1e-9);
  auto shifted = gt;
  shifted.coords.rowwise() += Eigen::RowVector3d(1.0, -2.0, 0.5);
  EXPECT_NEAR(mpjpe(shifted, gt), 0.0, 1e-9);
  EXPECT_THROW(mpjpe(random_pose(3, rng), gt), ShapeError);
}

TEST(Mpjpe, MetricProperties) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_pose(8, rng), b = random_pose(8, rng);
    EXPECT_GE(mpjpe(a, b), 0.0);
    EXPECT_DOUBLE_EQ(mpjpe(a, b), mpjpe(b, a));
    EXPECT_EQ(mpjpe(a, a), 0.0);
  }
}

TEST(AngularError, Examples) {
  std::mt19937_64 rng(7);
  const auto gt = random_pose(5, rng);
  EXPECT_NEAR(angular_error(gt, gt), 0.0, 1e-5);
  PoseFrame a = PoseFrame::identity(4), b = PoseFrame::identity(4);
  for (int j = 0; j < 4; ++j) b.set_rotation(j, encode_rotation(rot_z(90)));
  EXPECT_NEAR(angular_error(a, b), 90.0, 1e-9);
  PoseFrame bad = PoseFrame::identity(4);
  bad.rots.row(2).setZero();
  EXPECT_THROW(angular_error(bad, a), DegenerateRotation);
}

TEST(AngularError, RightCompositionRecoversDeltaAngle) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 100; ++k) {
    const Mat3 R = random_rotation(rng), D = random_rotation(rng);
    PoseFrame a = PoseFrame::identity(1), b = PoseFrame::identity(1);
    a.set_rotation(0, encode_rotation(R));
    b.set_rotation(0, encode_rotation(R * D));
    const double expected = Eigen::AngleAxisd(D).angle() * 180.0 / M_PI;
    EXPECT_NEAR(angular_error(a, b), expected, 1e-6);
  }
}

TEST(AngularError, LeftInvarianceProperty) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 100; ++k) {
    const auto a = random_pose(3, rng), b = random_pose(3, rng);
    const Mat3 L = random_rotation(rng);
    PoseFrame la = a, lb = b;
    for (int j = 0; j < 3; ++j) {
      la.set_rotation(j, encode_rotation(L * decode_rotation(a.rotation(j))));
      lb.set_rotation(j, encode_rotation(L * decode_rotation(b.rotation(j))));
    }
    EXPECT_NEAR(angular_error(la, lb), angular_error(a, b), 1e-6);
  }
}

TEST(SkeletonGraph, ValidatesTrees) {
  EXPECT_NO_THROW(SkeletonGraph::smpl24().validate());
  EXPECT_NO_THROW(SkeletonGraph::standard(7).validate());
  EXPECT_THROW(SkeletonGraph(3, {{0, 1}}).validate(), InvalidSkeleton);
  EXPECT_THROW(SkeletonGraph(3, {{0, 1}, {1, 2}, {2, 0}}).validate(), InvalidSkeleton);
  EXPECT_THROW(SkeletonGraph(3, {{0, 1}, {1, 5}}).validate(), InvalidSkeleton);
  EXPECT_THROW(SkeletonGraph(4, {{0, 1}, {1, 0}, {2, 3}}).validate(), InvalidSkeleton);
}

TEST(SkeletonGraph, ParentsRoundTrip) {
  const auto g = SkeletonGraph::smpl24();
  const auto parents = g.parents();
  EXPECT_EQ(parents[0], -1);
  EXPECT_EQ(SkeletonGraph::from_parents(parents).parents(), parents);
}

TEST(SkeletonGraph, NormalizedAdjacencyOnChain) {
  // 0-1-2: degrees with self loops are 2, 3, 2.
  const Matrix A = SkeletonGraph(3, {{0, 1}, {1, 2}}).normalized_adjacency();
  Matrix expected(3, 3);
  const double a = 1.0 / 2.0, b = 1.0 / std::sqrt(6.0), c = 1.0 / 3.0;
  expected << a, b, 0, b, c, b, 0, b, a;
  EXPECT_LT((A - expected).cwiseAbs().maxCoeff(), 1e-15);
}
