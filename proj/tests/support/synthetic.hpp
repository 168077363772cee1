#pragma once

// Synthetic skeletons, clips and pose sequences for tests.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "genea/bvh.hpp"
#include "genea/motion.hpp"

namespace genea::testing {

inline const std::vector<Channel> kRootChannels = {Channel::Xposition, Channel::Yposition, Channel::Zposition,
                                                   Channel::Zrotation, Channel::Xrotation, Channel::Yrotation};
inline const std::vector<Channel> kJointChannels = {Channel::Zrotation, Channel::Xrotation, Channel::Yrotation};

class SkeletonBuilder {
 public:
  std::size_t add(const std::string& name, std::optional<std::size_t> parent, Eigen::Vector3d offset,
                  std::vector<Channel> channels = kJointChannels) {
    Joint j;
    j.name = name;
    j.parent = parent;
    j.offset = offset;
    j.channels = std::move(channels);
    sk_.joints.push_back(std::move(j));
    return sk_.joints.size() - 1;
  }

  std::size_t end_site(std::size_t parent, Eigen::Vector3d offset) {
    Joint j;
    j.name = sk_.joints[parent].name + "_End";
    j.parent = parent;
    j.offset = offset;
    j.is_end_site = true;
    sk_.joints.push_back(std::move(j));
    return sk_.joints.size() - 1;
  }

  Skeleton build() const { return sk_; }

 private:
  Skeleton sk_;
};

/// 56 channel-carrying joints in the challenge layout (spine, head, arms with
/// three-segment fingers, legs), plus end sites. Joints are appended depth
/// first so file order and vector order agree.
inline Skeleton challenge_skeleton() {
  SkeletonBuilder b;
  const auto hips = b.add("Hips", std::nullopt, {0, 95, 0}, kRootChannels);
  auto parent = hips;
  for (const char* name : {"Spine", "Spine1", "Spine2", "Spine3"}) parent = b.add(name, parent, {0, 10, 0.5});
  const auto chest = parent;
  const auto neck = b.add("Neck", chest, {0, 12, 1});
  const auto neck1 = b.add("Neck1", neck, {0, 5, 0.5});
  const auto head = b.add("Head", neck1, {0, 8, 1});
  b.end_site(head, {0, 15, 0});
  for (const std::string side : {"Left", "Right"}) {
    const double s = side == "Left" ? 1.0 : -1.0;
    const auto shoulder = b.add(side + "Shoulder", chest, {s * 4, 10, 0});
    const auto arm = b.add(side + "Arm", shoulder, {s * 14, 0, 0});
    const auto fore = b.add(side + "ForeArm", arm, {s * 28, 0, 0});
    const auto hand = b.add(side + "Hand", fore, {s * 25, 0, 0});
    const char* fingers[] = {"Thumb", "Index", "Middle", "Ring", "Pinky"};
    for (int f = 0; f < 5; ++f) {
      auto p = hand;
      for (int k = 1; k <= 3; ++k) {
        const Eigen::Vector3d off = k == 1 ? Eigen::Vector3d(s * 8, 0, 2.0 - f) : Eigen::Vector3d(s * 3, 0, 0);
        p = b.add(side + "Hand" + fingers[f] + std::to_string(k), p, off);
      }
      b.end_site(p, {s * 2, 0, 0});
    }
  }
  for (const std::string side : {"Left", "Right"}) {
    const double s = side == "Left" ? 1.0 : -1.0;
    const auto up = b.add(side + "UpLeg", hips, {s * 9, -3, 0});
    const auto leg = b.add(side + "Leg", up, {0, -44, 0});
    const auto foot = b.add(side + "Foot", leg, {0, -42, 0});
    const auto fore = b.add(side + "ForeFoot", foot, {0, -6, 12});
    const auto toe = b.add(side + "ToeBase", fore, {0, 0, 5});
    b.end_site(toe, {0, 0, 4});
  }
  return b.build();
}

inline std::size_t channel_joint_count(const Skeleton& sk) {
  std::size_t n = 0;
  for (const auto& j : sk.joints) n += j.is_end_site ? 0 : 1;
  return n;
}

/// Random channel values: positions within +-range_cm, angles within +-range_deg.
inline MotionClip random_clip(const Skeleton& sk, std::size_t frames, double fps, std::mt19937_64& rng,
                              double range_deg = 90.0, double range_cm = 50.0) {
  MotionClip c;
  c.skeleton = sk;
  c.frame_time = 1.0 / fps;
  c.frames.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(sk.channel_count()));
  std::uniform_real_distribution<double> ang(-range_deg, range_deg);
  std::uniform_real_distribution<double> pos(-range_cm, range_cm);
  for (Eigen::Index f = 0; f < c.frames.rows(); ++f) {
    Eigen::Index col = 0;
    for (const auto& j : sk.joints) {
      for (auto ch : j.channels) c.frames(f, col++) = is_rotation(ch) ? ang(rng) : pos(rng);
    }
  }
  return c;
}

/// Smooth motion: every channel follows its own slow sinusoid.
inline MotionClip smooth_clip(const Skeleton& sk, std::size_t frames, double fps, std::uint64_t seed, double amplitude_deg = 20.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.2, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  MotionClip c;
  c.skeleton = sk;
  c.frame_time = 1.0 / fps;
  c.frames.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(sk.channel_count()));
  Eigen::Index col = 0;
  for (const auto& j : sk.joints) {
    for (auto ch : j.channels) {
      const double w = 2.0 * std::numbers::pi * freq(rng);
      const double ph = phase(rng);
      const double amp = is_rotation(ch) ? amplitude_deg : 10.0;
      const double base = !is_rotation(ch) && channel_axis(ch) == 1 ? j.offset.y() : 0.0;
      for (Eigen::Index f = 0; f < c.frames.rows(); ++f) c.frames(f, col) = base + amp * std::sin(w * static_cast<double>(f) / fps + ph);
      ++col;
    }
  }
  return c;
}

/// Pose sequence with one joint whose x coordinate follows f(t).
template <typename F>
PoseSequence single_joint_sequence(std::size_t frames, double fps, F&& f) {
  PoseSequence s;
  s.fps = fps;
  s.joint_names = {"j"};
  s.positions = FrameMatrix::Zero(static_cast<Eigen::Index>(frames), 3);
  for (std::size_t i = 0; i < frames; ++i) s.positions(static_cast<Eigen::Index>(i), 0) = f(static_cast<double>(i) / fps);
  return s;
}

/// Random-walk pose sequence of `joints` joints.
inline PoseSequence random_walk(std::size_t joints, std::size_t frames, double fps, std::mt19937_64& rng, double step = 1.0) {
  PoseSequence s;
  s.fps = fps;
  for (std::size_t j = 0; j < joints; ++j) s.joint_names.push_back("j" + std::to_string(j));
  s.positions.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(3 * joints));
  std::normal_distribution<double> n(0.0, step);
  for (Eigen::Index c = 0; c < s.positions.cols(); ++c) {
    double v = 0.0;
    for (Eigen::Index f = 0; f < s.positions.rows(); ++f) {
      v += n(rng);
      s.positions(f, c) = v;
    }
  }
  return s;
}

}  // namespace genea::testing
