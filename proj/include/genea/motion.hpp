#pragma once

// Forward kinematics and take-level preprocessing of motion clips.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "genea/bvh.hpp"

namespace genea {

class MotionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Right-handed rotation about a single axis; positive angles are counterclockwise.
inline Eigen::Matrix3d axis_rotation(int axis, double degrees) {
  return Eigen::AngleAxisd(deg2rad(degrees), Eigen::Vector3d::Unit(axis)).toRotationMatrix();
}

/// Local rotation of a joint for one frame, composed in the joint's channel order.
inline Eigen::Matrix3d joint_rotation(const Joint& j, const double* values) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  for (std::size_t k = 0; k < j.channels.size(); ++k) {
    if (is_rotation(j.channels[k])) r = r * axis_rotation(channel_axis(j.channels[k]), values[k]);
  }
  return r;
}

/// Local translation of a joint for one frame: offset plus any position channels.
inline Eigen::Vector3d joint_translation(const Joint& j, const double* values) {
  Eigen::Vector3d t = j.offset;
  for (std::size_t k = 0; k < j.channels.size(); ++k) {
    if (!is_rotation(j.channels[k])) t[channel_axis(j.channels[k])] += values[k];
  }
  return t;
}

/// Rotation-channel axes of a joint in file order, e.g. {2, 0, 1} for ZXY.
inline std::vector<int> rotation_order(const Joint& j) {
  std::vector<int> axes;
  for (auto c : j.channels) {
    if (is_rotation(c)) axes.push_back(channel_axis(c));
  }
  return axes;
}

/// Decomposes a rotation into three intrinsic angles (degrees) about `axes`, which
/// must be a permutation of {0,1,2}, such that R = R(a0) * R(a1) * R(a2).
inline Eigen::Vector3d euler_from_matrix(const Eigen::Matrix3d& m, const std::vector<int>& axes) {
  const int i = axes[0];
  const int j = axes[1];
  const int k = axes[2];
  // Even permutations of (x, y, z) have sign +1.
  const double sign = ((j - i + 3) % 3 == 1) ? 1.0 : -1.0;
  const double s = std::clamp(sign * m(i, k), -1.0, 1.0);
  double a, b, c;
  b = std::asin(s);
  if (std::abs(s) < 1.0 - 1e-12) {
    a = std::atan2(-sign * m(j, k), m(k, k));
    c = std::atan2(-sign * m(i, j), m(i, i));
  } else {
    // Gimbal lock: fold the whole residual into the first angle.
    c = 0.0;
    a = std::atan2(sign * m(k, j), m(j, j));
  }
  return {rad2deg(a), rad2deg(b), rad2deg(c)};
}

/// Per-frame world positions of every joint (end sites included), centimeters.
struct PoseSequence {
  double fps = 30.0;
  std::vector<std::string> joint_names;
  FrameMatrix positions;  // rows = frames, columns = 3 * joint (x, y, z)

  std::size_t frame_count() const { return static_cast<std::size_t>(positions.rows()); }
  std::size_t joint_count() const { return joint_names.size(); }

  Eigen::Vector3d position(std::size_t frame, std::size_t joint) const {
    const auto r = static_cast<Eigen::Index>(frame);
    const auto c = static_cast<Eigen::Index>(3 * joint);
    return {positions(r, c), positions(r, c + 1), positions(r, c + 2)};
  }
};

inline PoseSequence forward_kinematics(const MotionClip& clip) {
  const auto& sk = clip.skeleton;
  if (!clip.frames.allFinite()) throw MotionError("clip contains non-finite channel values");
  const auto offsets = sk.channel_offsets();
  const auto n_joints = sk.joints.size();

  PoseSequence out;
  out.fps = clip.fps();
  out.joint_names.reserve(n_joints);
  for (const auto& j : sk.joints) out.joint_names.push_back(j.name);
  out.positions.resize(clip.frames.rows(), static_cast<Eigen::Index>(3 * n_joints));

  std::vector<Eigen::Matrix3d> world_rot(n_joints);
  std::vector<Eigen::Vector3d> world_pos(n_joints);
  for (Eigen::Index f = 0; f < clip.frames.rows(); ++f) {
    const double* row = clip.frames.row(f).data();
    for (std::size_t i = 0; i < n_joints; ++i) {
      const auto& j = sk.joints[i];
      const double* values = row + offsets[i];
      const Eigen::Vector3d t = joint_translation(j, values);
      const Eigen::Matrix3d r = joint_rotation(j, values);
      if (j.parent) {
        world_pos[i] = world_pos[*j.parent] + world_rot[*j.parent] * t;
        world_rot[i] = world_rot[*j.parent] * r;
      } else {
        world_pos[i] = t;
        world_rot[i] = r;
      }
      out.positions.block<1, 3>(f, static_cast<Eigen::Index>(3 * i)) = world_pos[i].transpose();
    }
  }
  return out;
}

/// Wraps an angle difference into (-180, 180].
inline double wrap_degrees(double d) {
  d = std::fmod(d, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

/// Changes the frame rate. Integer ratios decimate (every k-th frame from frame 0);
/// other ratios interpolate linearly, taking the shortest angular path for rotations.
inline MotionClip resample(const MotionClip& clip, double target_fps) {
  if (!(target_fps > 0.0)) throw MotionError("target fps must be positive");
  const double src_fps = clip.fps();
  const double ratio = src_fps / target_fps;
  const double nearest = std::round(ratio);
  constexpr double kRatioTolerance = 1e-4;

  if (std::abs(ratio - 1.0) < kRatioTolerance) return clip;

  MotionClip out;
  out.skeleton = clip.skeleton;
  out.frame_time = 1.0 / target_fps;
  const auto n = clip.frames.rows();
  if (n == 0) {
    out.frames.resize(0, clip.frames.cols());
    return out;
  }

  if (nearest >= 2.0 && std::abs(ratio - nearest) < kRatioTolerance * nearest) {
    const auto step = static_cast<Eigen::Index>(nearest);
    const auto count = (n + step - 1) / step;
    out.frames.resize(count, clip.frames.cols());
    for (Eigen::Index i = 0; i < count; ++i) out.frames.row(i) = clip.frames.row(i * step);
    return out;
  }

  std::vector<bool> rotation_column;
  for (const auto& j : clip.skeleton.joints) {
    for (auto c : j.channels) rotation_column.push_back(is_rotation(c));
  }
  const auto count = static_cast<Eigen::Index>(std::floor(static_cast<double>(n - 1) / ratio + 1e-9)) + 1;
  out.frames.resize(count, clip.frames.cols());
  for (Eigen::Index i = 0; i < count; ++i) {
    const double src = static_cast<double>(i) * ratio;
    auto lo = static_cast<Eigen::Index>(std::floor(src + 1e-9));
    lo = std::min(lo, n - 1);
    const auto hi = std::min(lo + 1, n - 1);
    const double w = std::max(0.0, src - static_cast<double>(lo));
    for (Eigen::Index c = 0; c < clip.frames.cols(); ++c) {
      const double a = clip.frames(lo, c);
      const double b = clip.frames(hi, c);
      if (w == 0.0) {
        out.frames(i, c) = a;
      } else if (rotation_column[static_cast<std::size_t>(c)]) {
        out.frames(i, c) = a + wrap_degrees(b - a) * w;
      } else {
        out.frames(i, c) = a + (b - a) * w;
      }
    }
  }
  return out;
}

/// Indices of `count` equidistant samples over [0, n), both ends included.
/// Takes every frame when n <= count.
inline std::vector<std::size_t> equidistant_samples(std::size_t n, std::size_t count) {
  std::vector<std::size_t> out;
  if (n == 0) return out;
  if (n <= count || count < 2) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(count - 1))));
  }
  return out;
}

struct RootStatistics {
  Eigen::Vector3d mean_position = Eigen::Vector3d::Zero();
  /// Normalized sum of the per-sample horizontal facing directions (x, z); zero when degenerate.
  Eigen::Vector2d mean_facing = Eigen::Vector2d::Zero();
  double facing_norm = 0.0;

  /// Yaw of the mean facing direction, measured from +z towards +x, degrees.
  double mean_yaw() const { return rad2deg(std::atan2(mean_facing.x(), mean_facing.y())); }
};

/// Mean hips position and facing over equidistant samples of the take.
inline RootStatistics root_statistics(const MotionClip& clip, std::size_t samples = 250) {
  const auto& sk = clip.skeleton;
  const auto& root = sk.joints[sk.root_index];
  const auto col = sk.channel_offsets()[sk.root_index];
  const auto idx = equidistant_samples(clip.frame_count(), samples);
  RootStatistics st;
  if (idx.empty()) return st;
  Eigen::Vector2d facing_sum = Eigen::Vector2d::Zero();
  for (auto f : idx) {
    const double* values = clip.frames.row(static_cast<Eigen::Index>(f)).data() + col;
    st.mean_position += joint_translation(root, values);
    const Eigen::Vector3d fwd = joint_rotation(root, values) * Eigen::Vector3d::UnitZ();
    Eigen::Vector2d h{fwd.x(), fwd.z()};
    const double len = h.norm();
    if (len > 1e-12) facing_sum += h / len;
  }
  st.mean_position /= static_cast<double>(idx.size());
  st.facing_norm = facing_sum.norm();
  if (st.facing_norm > 1e-9 * static_cast<double>(idx.size())) st.mean_facing = facing_sum / st.facing_norm;
  return st;
}

struct StandardizeResult {
  MotionClip clip;
  double yaw_correction_deg = 0.0;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  bool degenerate_facing = false;
};

/// Rigidly moves the root so that, over 250 equidistant samples, the hips sit at the
/// horizontal origin on average and face +z on average.
inline StandardizeResult standardize_root_detailed(const MotionClip& clip, std::size_t samples = 250) {
  StandardizeResult res;
  res.clip = clip;
  if (clip.frame_count() == 0) return res;
  const auto& sk = clip.skeleton;
  const auto& root = sk.joints[sk.root_index];
  const auto col = sk.channel_offsets()[sk.root_index];
  const auto st = root_statistics(clip, samples);

  res.degenerate_facing = st.mean_facing.isZero();
  const double yaw = res.degenerate_facing ? 0.0 : st.mean_yaw();
  res.yaw_correction_deg = -yaw;
  const Eigen::Matrix3d correction = axis_rotation(1, -yaw);

  std::optional<std::vector<int>> rot_axes;
  if (auto axes = rotation_order(root); axes.size() == 3) rot_axes = axes;

  for (Eigen::Index f = 0; f < res.clip.frames.rows(); ++f) {
    double* values = res.clip.frames.row(f).data() + col;
    // Position channels: p' = C (p - m) on the horizontal plane, vertical untouched.
    Eigen::Vector3d p = joint_translation(root, values);
    Eigen::Vector3d centered = p - Eigen::Vector3d(st.mean_position.x(), 0.0, st.mean_position.z());
    Eigen::Vector3d moved = correction * centered;
    Eigen::Vector3d delta = moved - p;
    for (std::size_t k = 0; k < root.channels.size(); ++k) {
      if (!is_rotation(root.channels[k])) values[k] += delta[channel_axis(root.channels[k])];
    }
    if (rot_axes && yaw != 0.0) {
      const Eigen::Matrix3d r = correction * joint_rotation(root, values);
      const Eigen::Vector3d e = euler_from_matrix(r, *rot_axes);
      std::size_t n = 0;
      for (std::size_t k = 0; k < root.channels.size(); ++k) {
        if (is_rotation(root.channels[k])) values[k] = e[static_cast<Eigen::Index>(n++)];
      }
    }
  }
  res.translation = -Eigen::Vector3d(st.mean_position.x(), 0.0, st.mean_position.z());
  return res;
}

inline MotionClip standardize_root(const MotionClip& clip, std::size_t samples = 250) {
  return standardize_root_detailed(clip, samples).clip;
}

/// Contiguous slice of a clip; boundaries snap to the nearest frame.
inline MotionClip excerpt(const MotionClip& clip, double start, double duration) {
  const double fps = clip.fps();
  const double half_frame = 0.5 * clip.frame_time;
  if (start < 0.0 || duration <= 0.0 || start + duration > clip.duration() + half_frame)
    throw MotionError("excerpt window [" + std::to_string(start) + ", " + std::to_string(start + duration) +
                      "] s lies outside the clip (" + std::to_string(clip.duration()) + " s)");
  const auto first = static_cast<Eigen::Index>(std::llround(start * fps));
  const auto count = static_cast<Eigen::Index>(std::llround(duration * fps));
  if (count <= 0 || first + count > clip.frames.rows())
    throw MotionError("excerpt window exceeds the available frames");
  MotionClip out;
  out.skeleton = clip.skeleton;
  out.frame_time = clip.frame_time;
  out.frames = clip.frames.middleRows(first, count);
  return out;
}

struct SegmentSpec {
  std::string source_take;
  double start = 0.0;     // seconds
  double duration = 0.0;  // seconds
  std::string condition;

  bool operator==(const SegmentSpec&) const = default;
};

/// Observed range of evaluation segment lengths, seconds.
inline constexpr double kMinSegmentSeconds = 5.6;
inline constexpr double kMaxSegmentSeconds = 12.1;

/// One word of a take transcript with the annotations segment selection relies on.
struct TranscriptWord {
  double start = 0.0;
  double end = 0.0;
  std::string text;
  bool main_speaker = true;   // false for interlocutor turns
  bool anonymized = false;    // speech replaced by silence
};

using TranscriptIndex = std::map<std::string, std::vector<TranscriptWord>>;

enum class SegmentCriterion {
  kDuration = 1,
  kActiveSpeaking = 2,
  kNoAnonymization = 3,
  kCompletePhrase = 4,
  kCleanCapture = 5,
};

struct SegmentViolation {
  SegmentCriterion criterion;
  bool requires_human_review = false;
  std::string detail;
};

/// Machine-checkable selection criteria for an evaluation segment. Phrase
/// completeness and capture artefacts are always flagged for human review.
inline std::vector<SegmentViolation> validate_segment(const SegmentSpec& spec, const TranscriptIndex& transcripts,
                                                      double backchannel_tolerance_s = 1.0) {
  auto it = transcripts.find(spec.source_take);
  if (it == transcripts.end()) throw MotionError("unknown take '" + spec.source_take + "'");
  std::vector<SegmentViolation> out;
  const double end = spec.start + spec.duration;

  if (spec.duration < kMinSegmentSeconds || spec.duration > kMaxSegmentSeconds) {
    std::ostringstream msg;
    msg << "duration " << spec.duration << " s outside [" << kMinSegmentSeconds << ", " << kMaxSegmentSeconds << "] s";
    out.push_back({SegmentCriterion::kDuration, false, msg.str()});
  }

  double interlocutor_time = 0.0;
  bool main_speech = false;
  bool anonymized = false;
  for (const auto& w : it->second) {
    const double overlap = std::min(end, w.end) - std::max(spec.start, w.start);
    if (overlap <= 0.0) continue;
    if (w.anonymized) anonymized = true;
    if (w.main_speaker) {
      main_speech = main_speech || !w.anonymized;
    } else {
      interlocutor_time += overlap;
    }
  }
  if (!main_speech) {
    out.push_back({SegmentCriterion::kActiveSpeaking, false, "character does not speak in the segment"});
  } else if (interlocutor_time > backchannel_tolerance_s) {
    out.push_back({SegmentCriterion::kActiveSpeaking, false, "interlocutor takes the turn within the segment"});
  }
  if (anonymized) out.push_back({SegmentCriterion::kNoAnonymization, false, "segment overlaps an anonymization silence"});
  out.push_back({SegmentCriterion::kCompletePhrase, true, "phrase completeness requires human review"});
  out.push_back({SegmentCriterion::kCleanCapture, true, "motion-capture artefacts require human review"});
  return out;
}

/// Violations that are decided automatically (excluding the human-review flags).
inline std::vector<SegmentViolation> hard_violations(const std::vector<SegmentViolation>& v) {
  std::vector<SegmentViolation> out;
  std::copy_if(v.begin(), v.end(), std::back_inserter(out), [](const auto& x) { return !x.requires_human_review; });
  return out;
}

/// Reads "take_id,start_s,duration_s,condition" rows. Blank lines and lines
/// starting with '#' are skipped; a header row starting with "take_id" is allowed.
inline std::vector<SegmentSpec> read_segment_list(std::istream& in) {
  std::vector<SegmentSpec> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("take_id", 0) == 0) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 4) throw MotionError("segment list line " + std::to_string(line_no) + ": expected 4 fields");
    SegmentSpec s;
    s.source_take = fields[0];
    try {
      std::size_t used = 0;
      s.start = std::stod(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing");
      s.duration = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw MotionError("segment list line " + std::to_string(line_no) + ": bad number");
    }
    if (s.start < 0.0 || s.duration <= 0.0)
      throw MotionError("segment list line " + std::to_string(line_no) + ": start must be >= 0 and duration > 0");
    s.condition = fields[3];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace genea
