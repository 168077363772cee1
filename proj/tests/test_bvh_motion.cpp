#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "genea/bvh.hpp"
#include "genea/motion.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace genea;
using genea::testing::challenge_skeleton;
using genea::testing::random_clip;

namespace {

const char* kMinimal =
    "HIERARCHY\n"
    "ROOT Hips\n"
    "{\n"
    "  OFFSET 0 0 0\n"
    "  CHANNELS 3 Xposition Yposition Zposition\n"
    "}\n"
    "MOTION\n"
    "Frames: 2\n"
    "Frame Time: 0.0333333\n"
    "0 0 0\n"
    "0 0 0\n";

void expect_clips_equal(const MotionClip& a, const MotionClip& b, double tol) {
  ASSERT_EQ(a.skeleton.joints.size(), b.skeleton.joints.size());
  for (std::size_t i = 0; i < a.skeleton.joints.size(); ++i) {
    const auto& ja = a.skeleton.joints[i];
    const auto& jb = b.skeleton.joints[i];
    EXPECT_EQ(ja.name, jb.name);
    EXPECT_EQ(ja.parent, jb.parent);
    EXPECT_EQ(ja.channels, jb.channels);
    EXPECT_EQ(ja.is_end_site, jb.is_end_site);
    EXPECT_LT((ja.offset - jb.offset).cwiseAbs().maxCoeff(), tol);
  }
  ASSERT_EQ(a.frames.rows(), b.frames.rows());
  ASSERT_EQ(a.frames.cols(), b.frames.cols());
  if (a.frames.size() > 0) {
    EXPECT_LT((a.frames - b.frames).cwiseAbs().maxCoeff(), tol);
  }
  EXPECT_NEAR(a.frame_time, b.frame_time, 1e-7);
}

}  // namespace

TEST(Bvh, MinimalFile) {
  const auto clip = parse_bvh(kMinimal);
  ASSERT_EQ(clip.skeleton.joints.size(), 1u);
  EXPECT_EQ(clip.skeleton.joints[0].name, "Hips");
  EXPECT_EQ(clip.frame_count(), 2u);
  EXPECT_TRUE(clip.frames.isZero());
  EXPECT_TRUE(check_skeleton(clip.skeleton).empty());
}

TEST(Bvh, ShortRowReportsItsLine) {
  std::string text = kMinimal;
  text.replace(text.rfind("0 0 0\n"), 6, "0 0\n");
  try {
    parse_bvh(text);
    FAIL() << "expected a channel-count error";
  } catch (const BvhError& e) {
    EXPECT_EQ(e.line(), 11u);
  }
}

TEST(Bvh, Diagnostics) {
  EXPECT_THROW(parse_bvh("ROOT Hips { OFFSET 0 0 0 CHANNELS 0 }"), BvhError);
  std::string no_motion = kMinimal;
  no_motion = no_motion.substr(0, no_motion.find("MOTION"));
  EXPECT_THROW(parse_bvh(no_motion), BvhError);
  std::string bad_number = kMinimal;
  bad_number.replace(bad_number.rfind("0 0 0\n"), 6, "0 x 0\n");
  EXPECT_THROW(parse_bvh(bad_number), BvhError);
  std::string bad_channel = kMinimal;
  bad_channel.replace(bad_channel.find("Zposition"), 9, "Wposition");
  EXPECT_THROW(parse_bvh(bad_channel), BvhError);
  std::string extra_row = std::string(kMinimal) + "0 0 0\n";
  EXPECT_THROW(parse_bvh(extra_row), BvhError);
}

TEST(Bvh, AcceptsMixedWhitespace) {
  const std::string text =
      "HIERARCHY\r\nROOT\tHips\n{\tOFFSET 0\t0 0\n CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n"
      "  JOINT Spine { OFFSET 0 10 0 CHANNELS 3 Zrotation Xrotation Yrotation End Site { OFFSET 0 5 0 } }\n}\n"
      "MOTION\nFrames:\t1\nFrame Time: 0.008333\n1 2 3 4 5 6\t7 8 9\n";
  const auto clip = parse_bvh(text);
  EXPECT_EQ(clip.skeleton.joints.size(), 3u);
  EXPECT_TRUE(clip.skeleton.joints[2].is_end_site);
  EXPECT_EQ(clip.frames(0, 8), 9.0);
}

TEST(Bvh, WriterOutput) {
  auto clip = parse_bvh(kMinimal);
  clip.frame_time = 1.0 / 30.0;
  const auto text = write_bvh(clip);
  EXPECT_NE(text.find("HIERARCHY"), std::string::npos);
  EXPECT_NE(text.find("MOTION"), std::string::npos);
  EXPECT_NE(text.find("Frames: 2"), std::string::npos);
  const auto pos = text.find("Frame Time:");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NEAR(std::stod(text.substr(pos + 11)), 0.0333333, 1e-7);
}

TEST(Bvh, ChallengeSkeletonRoundTrip) {
  const auto sk = challenge_skeleton();
  EXPECT_EQ(genea::testing::channel_joint_count(sk), 56u);
  std::mt19937_64 rng(7);
  const auto clip = random_clip(sk, 40, 30.0, rng);
  const auto text = write_bvh(clip);
  const auto once = parse_bvh(text);
  expect_clips_equal(clip, once, 1e-5);
  const auto twice = parse_bvh(write_bvh(once));
  expect_clips_equal(once, twice, 1e-5);
  EXPECT_EQ(once.skeleton.channel_count(), sk.channel_count());
}

TEST(Bvh, RandomizedRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    genea::testing::SkeletonBuilder b;
    std::uniform_int_distribution<int> count(1, 12);
    std::uniform_real_distribution<double> off(-30, 30);
    const int n = count(rng);
    b.add("root", std::nullopt, {off(rng), off(rng), off(rng)}, genea::testing::kRootChannels);
    for (int i = 1; i < n; ++i) {
      // Attach to the previous joint to keep the vector in depth-first order.
      std::vector<Channel> ch = {Channel::Xrotation, Channel::Yrotation, Channel::Zrotation};
      std::shuffle(ch.begin(), ch.end(), rng);
      b.add("j" + std::to_string(i), static_cast<std::size_t>(i - 1), {off(rng), off(rng), off(rng)}, ch);
    }
    b.end_site(static_cast<std::size_t>(n - 1), {0, 1, 0});
    const auto clip = random_clip(b.build(), 1 + trial % 5, 120.0, rng, 179.0, 500.0);
    expect_clips_equal(clip, parse_bvh(write_bvh(clip)), 1e-5);
  }
}

TEST(Bvh, ParserIsTotalOnGarbage) {
  std::mt19937_64 rng(3);
  const std::string base = write_bvh(random_clip(challenge_skeleton(), 3, 30.0, rng));
  std::uniform_int_distribution<std::size_t> pos(0, base.size() - 1);
  for (int i = 0; i < 200; ++i) {
    std::string mutated = base;
    for (int k = 0; k < 3; ++k) mutated[pos(rng)] = "{}x9 \n."[static_cast<std::size_t>(i + k) % 7];
    try {
      const auto clip = parse_bvh(mutated);
      EXPECT_TRUE(check_skeleton(clip.skeleton).empty());
      EXPECT_EQ(static_cast<std::size_t>(clip.frames.cols()), clip.skeleton.channel_count());
    } catch (const BvhError&) {
    }
  }
}

// ------------------------------------------------------------------ motion

TEST(ForwardKinematics, ZeroRotationsSumOffsets) {
  std::mt19937_64 rng(5);
  const auto sk = challenge_skeleton();
  MotionClip clip;
  clip.skeleton = sk;
  clip.frames = FrameMatrix::Zero(3, static_cast<Eigen::Index>(sk.channel_count()));
  const auto pose = forward_kinematics(clip);
  for (std::size_t j = 0; j < sk.joints.size(); ++j) {
    Eigen::Vector3d expected = Eigen::Vector3d::Zero();
    for (std::optional<std::size_t> k = j; k; k = sk.joints[*k].parent) expected += sk.joints[*k].offset;
    for (std::size_t f = 0; f < 3; ++f) EXPECT_LT((pose.position(f, j) - expected).norm(), 1e-12);
  }
}

TEST(ForwardKinematics, QuarterTurnAboutZ) {
  genea::testing::SkeletonBuilder b;
  const auto root = b.add("root", std::nullopt, {0, 0, 0}, {Channel::Zrotation});
  b.add("child", root, {1, 0, 0}, {});
  MotionClip clip;
  clip.skeleton = b.build();
  clip.frames = FrameMatrix::Constant(1, 1, 90.0);
  const auto pose = forward_kinematics(clip);
  EXPECT_LT((pose.position(0, 1) - Eigen::Vector3d(0, 1, 0)).norm(), 1e-12);
}

TEST(ForwardKinematics, MatchesMatrixOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    genea::testing::SkeletonBuilder b;
    std::uniform_real_distribution<double> off(-20, 20);
    std::vector<Channel> order = {Channel::Xrotation, Channel::Yrotation, Channel::Zrotation};
    std::shuffle(order.begin(), order.end(), rng);
    auto root_channels = genea::testing::kRootChannels;
    for (std::size_t k = 0; k < 3; ++k) root_channels[3 + k] = order[k];
    const auto r = b.add("r", std::nullopt, {off(rng), off(rng), off(rng)}, root_channels);
    std::shuffle(order.begin(), order.end(), rng);
    const auto a = b.add("a", r, {off(rng), off(rng), off(rng)}, order);
    std::shuffle(order.begin(), order.end(), rng);
    b.add("b", a, {off(rng), off(rng), off(rng)}, order);
    const auto clip = random_clip(b.build(), 5, 30.0, rng, 180.0);
    const auto pose = forward_kinematics(clip);
    for (Eigen::Index f = 0; f < clip.frames.rows(); ++f) {
      const auto expected = oracle::fk_frame(clip.skeleton, clip.frames.row(f).data());
      for (Eigen::Index c = 0; c < pose.positions.cols(); ++c) EXPECT_NEAR(pose.positions(f, c), expected[static_cast<std::size_t>(c)], 1e-9);
    }
  }
}

TEST(ForwardKinematics, BonesAreRigid) {
  std::mt19937_64 rng(23);
  const auto sk = challenge_skeleton();
  const auto clip = random_clip(sk, 20, 30.0, rng, 180.0);
  const auto pose = forward_kinematics(clip);
  for (std::size_t j = 0; j < sk.joints.size(); ++j) {
    if (!sk.joints[j].parent) continue;
    for (std::size_t f = 0; f < 20; ++f)
      EXPECT_NEAR((pose.position(f, j) - pose.position(f, *sk.joints[j].parent)).norm(), sk.joints[j].offset.norm(), 1e-9);
  }
}

TEST(ForwardKinematics, RejectsNonFinite) {
  auto clip = parse_bvh(kMinimal);
  clip.frames(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward_kinematics(clip), MotionError);
}

TEST(Resample, DecimatesIntegerRatios) {
  auto clip = parse_bvh(kMinimal);
  clip.frame_time = 1.0 / 120.0;
  clip.frames.resize(8, 3);
  for (int f = 0; f < 8; ++f) clip.frames.row(f).setConstant(f);
  const auto to30 = resample(clip, 30.0);
  ASSERT_EQ(to30.frame_count(), 2u);
  EXPECT_EQ(to30.frames(0, 0), 0.0);
  EXPECT_EQ(to30.frames(1, 0), 4.0);
  EXPECT_NEAR(to30.frame_time, 1.0 / 30.0, 1e-12);
  const auto to60 = resample(clip, 60.0);
  ASSERT_EQ(to60.frame_count(), 4u);
  for (int f = 0; f < 4; ++f) EXPECT_EQ(to60.frames(f, 0), 2.0 * f);
  const auto same = resample(clip, 120.0);
  EXPECT_EQ(same.frames, clip.frames);
}

TEST(Resample, RoundTripKeepsRetainedFrames) {
  std::mt19937_64 rng(9);
  const auto clip = random_clip(challenge_skeleton(), 41, 120.0, rng);
  const auto down = resample(clip, 30.0);
  const auto up = resample(down, 120.0);
  for (Eigen::Index f = 0; f < down.frames.rows(); ++f) EXPECT_EQ(up.frames.row(4 * f), clip.frames.row(4 * f));
}

TEST(Resample, ShortestAngularPath) {
  genea::testing::SkeletonBuilder b;
  b.add("r", std::nullopt, {0, 0, 0}, {Channel::Xposition, Channel::Yrotation});
  MotionClip clip;
  clip.skeleton = b.build();
  clip.frame_time = 1.0 / 20.0;
  clip.frames.resize(2, 2);
  clip.frames << 0.0, 170.0, 10.0, -170.0;
  const auto out = resample(clip, 40.0);
  ASSERT_GE(out.frame_count(), 2u);
  EXPECT_NEAR(out.frames(1, 0), 5.0, 1e-12);
  EXPECT_NEAR(std::abs(wrap_degrees(out.frames(1, 1))), 180.0, 1e-9);
}

TEST(StandardizeRoot, IdentityWhenCentredAndFacingForward) {
  genea::testing::SkeletonBuilder b;
  const auto r = b.add("Hips", std::nullopt, {0, 0, 0}, genea::testing::kRootChannels);
  b.add("Spine", r, {0, 10, 0});
  MotionClip clip;
  clip.skeleton = b.build();
  clip.frames = FrameMatrix::Zero(300, 9);
  for (Eigen::Index f = 0; f < 300; ++f) clip.frames(f, 1) = 90.0;
  const auto out = standardize_root(clip);
  EXPECT_LT((out.frames - clip.frames).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(StandardizeRoot, ConstantOffsetFacingPlusX) {
  genea::testing::SkeletonBuilder b;
  const auto r = b.add("Hips", std::nullopt, {0, 0, 0}, genea::testing::kRootChannels);
  b.add("Spine", r, {0, 10, 0});
  MotionClip clip;
  clip.skeleton = b.build();
  clip.frames = FrameMatrix::Zero(100, 9);
  for (Eigen::Index f = 0; f < 100; ++f) {
    clip.frames(f, 0) = 5.0;
    clip.frames(f, 2) = 3.0;
    clip.frames(f, 5) = 90.0;  // yaw: +z turns to +x
  }
  const auto before = root_statistics(clip);
  EXPECT_NEAR(before.mean_yaw(), 90.0, 1e-9);
  const auto out = standardize_root(clip);
  const auto st = root_statistics(out);
  EXPECT_NEAR(st.mean_position.x(), 0.0, 1e-9);
  EXPECT_NEAR(st.mean_position.z(), 0.0, 1e-9);
  EXPECT_NEAR(st.mean_yaw(), 0.0, 1e-9);
  EXPECT_NEAR(out.frames(0, 0), 0.0, 1e-9);
  EXPECT_NEAR(out.frames(0, 2), 0.0, 1e-9);
}

TEST(StandardizeRoot, WanderingTrajectory) {
  std::mt19937_64 rng(31);
  const auto sk = challenge_skeleton();
  auto clip = genea::testing::smooth_clip(sk, 900, 30.0, 4, 40.0);
  std::normal_distribution<double> n(0, 2);
  double x = 40, z = -25, yaw = 60;
  for (Eigen::Index f = 0; f < clip.frames.rows(); ++f) {
    x += n(rng);
    z += n(rng);
    yaw += n(rng);
    clip.frames(f, 0) = x;
    clip.frames(f, 2) = z;
    clip.frames(f, 5) = yaw;
  }
  const auto res = standardize_root_detailed(clip);
  EXPECT_FALSE(res.degenerate_facing);
  const auto st = root_statistics(res.clip);
  EXPECT_NEAR(st.mean_position.x(), 0.0, 1e-6);
  EXPECT_NEAR(st.mean_position.z(), 0.0, 1e-6);
  EXPECT_NEAR(st.mean_yaw(), 0.0, 1e-6);

  // Only the root moved, rigidly: inter-joint distances are unchanged and
  // non-root channels are untouched.
  const auto a = forward_kinematics(clip);
  const auto b = forward_kinematics(res.clip);
  for (std::size_t f = 0; f < clip.frame_count(); f += 97) {
    for (std::size_t j = 1; j < sk.joints.size(); j += 5)
      EXPECT_NEAR((a.position(f, j) - a.position(f, 0)).norm(), (b.position(f, j) - b.position(f, 0)).norm(), 1e-8);
  }
  EXPECT_EQ(clip.frames.rightCols(clip.frames.cols() - 6), res.clip.frames.rightCols(clip.frames.cols() - 6));
}

TEST(StandardizeRoot, DegenerateFacingOnlyTranslates) {
  genea::testing::SkeletonBuilder b;
  b.add("Hips", std::nullopt, {0, 0, 0}, genea::testing::kRootChannels);
  MotionClip clip;
  clip.skeleton = b.build();
  clip.frames = FrameMatrix::Zero(2, 6);
  clip.frames(0, 0) = 4;
  clip.frames(1, 0) = 6;
  clip.frames(1, 5) = 180;  // opposite facings cancel
  const auto res = standardize_root_detailed(clip);
  EXPECT_TRUE(res.degenerate_facing);
  EXPECT_EQ(res.yaw_correction_deg, 0.0);
  EXPECT_NEAR(res.clip.frames(0, 0), -1.0, 1e-12);
  EXPECT_NEAR(res.clip.frames(1, 0), 1.0, 1e-12);
}

TEST(Excerpt, WindowArithmetic) {
  std::mt19937_64 rng(2);
  genea::testing::SkeletonBuilder b;
  b.add("Hips", std::nullopt, {0, 0, 0}, genea::testing::kRootChannels);
  const auto clip = random_clip(b.build(), 1800, 30.0, rng);
  const auto full = excerpt(clip, 0.0, clip.duration());
  EXPECT_EQ(full.frames, clip.frames);
  const auto e = excerpt(clip, 10.0, 8.0);
  ASSERT_EQ(e.frame_count(), 240u);
  EXPECT_EQ(e.frames.row(0), clip.frames.row(300));
  EXPECT_EQ(e.frame_time, clip.frame_time);
  EXPECT_THROW(excerpt(clip, 55.0, 8.0), MotionError);
  EXPECT_THROW(excerpt(clip, -1.0, 2.0), MotionError);
}

TEST(SegmentValidation, Criteria) {
  TranscriptIndex t;
  t["take1"] = {{0.0, 4.0, "hello there", true, false},
                {4.2, 9.8, "and so on", true, false},
                {10.0, 11.0, "[anon]", true, true},
                {20.0, 30.0, "mm", false, false}};
  const auto ok = hard_violations(validate_segment({"take1", 0.0, 9.5, "FNA"}, t));
  EXPECT_TRUE(ok.empty());
  const auto all = validate_segment({"take1", 0.0, 9.5, "FNA"}, t);
  EXPECT_EQ(all.size(), 2u);  // the two human-review flags
  const auto short_seg = hard_violations(validate_segment({"take1", 0.0, 3.0, "FNA"}, t));
  ASSERT_EQ(short_seg.size(), 1u);
  EXPECT_EQ(short_seg[0].criterion, SegmentCriterion::kDuration);
  const auto anon = hard_violations(validate_segment({"take1", 4.0, 8.0, "FNA"}, t));
  ASSERT_EQ(anon.size(), 1u);
  EXPECT_EQ(anon[0].criterion, SegmentCriterion::kNoAnonymization);
  const auto listener = hard_violations(validate_segment({"take1", 19.0, 9.0, "FNA"}, t));
  ASSERT_FALSE(listener.empty());
  EXPECT_EQ(listener[0].criterion, SegmentCriterion::kActiveSpeaking);
  EXPECT_THROW(validate_segment({"nope", 0.0, 9.0, "FNA"}, t), MotionError);
}

TEST(SegmentList, Parses) {
  std::istringstream in("take_id,start_s,duration_s,condition\n# comment\ntake1,10,8.5,FNA\n\ntake2,0,9,FSA\n");
  const auto s = read_segment_list(in);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].source_take, "take1");
  EXPECT_EQ(s[0].start, 10.0);
  EXPECT_EQ(s[1].condition, "FSA");
  std::istringstream bad("take1,x,8,FNA\n");
  EXPECT_THROW(read_segment_list(bad), MotionError);
}
