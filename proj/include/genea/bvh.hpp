#pragma once

// BVH (Biovision Hierarchy) reading and writing.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace genea {

enum class Channel { Xposition, Yposition, Zposition, Xrotation, Yrotation, Zrotation };

inline std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::Xposition: return "Xposition";
    case Channel::Yposition: return "Yposition";
    case Channel::Zposition: return "Zposition";
    case Channel::Xrotation: return "Xrotation";
    case Channel::Yrotation: return "Yrotation";
    case Channel::Zrotation: return "Zrotation";
  }
  return "?";
}

inline std::optional<Channel> parse_channel(std::string_view s) {
  static constexpr std::array<Channel, 6> all{Channel::Xposition, Channel::Yposition,
                                              Channel::Zposition, Channel::Xrotation,
                                              Channel::Yrotation, Channel::Zrotation};
  for (auto c : all) {
    if (channel_name(c) == s) return c;
  }
  return std::nullopt;
}

inline bool is_rotation(Channel c) {
  return c == Channel::Xrotation || c == Channel::Yrotation || c == Channel::Zrotation;
}

/// Axis index (0 = x, 1 = y, 2 = z) of a position or rotation channel.
inline int channel_axis(Channel c) { return static_cast<int>(c) % 3; }

struct Joint {
  std::string name;
  std::optional<std::size_t> parent;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();  // centimeters
  std::vector<Channel> channels;
  bool is_end_site = false;

  bool operator==(const Joint&) const = default;
};

/// Joint hierarchy in topological order (parents precede children).
struct Skeleton {
  std::vector<Joint> joints;
  std::size_t root_index = 0;

  std::size_t channel_count() const {
    std::size_t n = 0;
    for (const auto& j : joints) n += j.channels.size();
    return n;
  }

  /// Column of the first channel of each joint in a frame row.
  std::vector<std::size_t> channel_offsets() const {
    std::vector<std::size_t> out(joints.size());
    std::size_t col = 0;
    for (std::size_t i = 0; i < joints.size(); ++i) {
      out[i] = col;
      col += joints[i].channels.size();
    }
    return out;
  }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < joints.size(); ++i) {
      if (joints[i].name == name) return i;
    }
    return std::nullopt;
  }

  std::vector<std::size_t> children(std::size_t index) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < joints.size(); ++i) {
      if (joints[i].parent == index) out.push_back(i);
    }
    return out;
  }

  bool operator==(const Skeleton&) const = default;
};

using FrameMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MotionClip {
  Skeleton skeleton;
  double frame_time = 1.0 / 30.0;  // seconds per frame
  FrameMatrix frames;              // rows = frames, angles in degrees

  double fps() const { return 1.0 / frame_time; }
  std::size_t frame_count() const { return static_cast<std::size_t>(frames.rows()); }
  double duration() const { return static_cast<double>(frames.rows()) * frame_time; }
};

class BvhError : public std::runtime_error {
 public:
  BvhError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Returns an empty string when the skeleton satisfies every structural invariant,
/// otherwise a description of the first violation.
inline std::string check_skeleton(const Skeleton& s) {
  if (s.joints.empty()) return "skeleton has no joints";
  std::size_t roots = 0;
  for (std::size_t i = 0; i < s.joints.size(); ++i) {
    const auto& j = s.joints[i];
    if (!j.parent) {
      ++roots;
      if (i != s.root_index) return "root index does not point at the parentless joint";
    } else if (*j.parent >= i) {
      return "joint '" + j.name + "' precedes its parent";
    } else if (s.joints[*j.parent].is_end_site) {
      return "end site '" + s.joints[*j.parent].name + "' has children";
    }
    if (j.is_end_site && !j.channels.empty()) return "end site '" + j.name + "' has channels";
    const auto n = j.channels.size();
    if (n != 0 && n != 3 && n != 6) return "joint '" + j.name + "' has " + std::to_string(n) + " channels";
    const std::size_t rot_begin = n == 6 ? 3 : 0;
    if (n == 6) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (is_rotation(j.channels[k])) return "joint '" + j.name + "' lists rotations before positions";
      }
    }
    if (n > 0) {
      bool all_rot = true;
      bool all_pos = true;
      unsigned seen = 0;
      for (std::size_t k = rot_begin; k < n; ++k) {
        all_rot = all_rot && is_rotation(j.channels[k]);
        all_pos = all_pos && !is_rotation(j.channels[k]);
        seen |= 1u << channel_axis(j.channels[k]);
      }
      if (n == 6 && !all_rot) return "joint '" + j.name + "' has malformed rotation channels";
      if (!(all_rot || (n == 3 && all_pos)) || seen != 7u)
        return "joint '" + j.name + "' channels are not a permutation of X/Y/Z";
    }
  }
  if (roots != 1) return "skeleton must have exactly one root";
  return {};
}

namespace detail {

class BvhTokenizer {
 public:
  explicit BvhTokenizer(std::string_view text) : text_(text) {}

  std::optional<std::string_view> next() {
    skip_space();
    if (pos_ >= text_.size()) return std::nullopt;
    const auto begin = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    token_line_ = line_;
    return text_.substr(begin, pos_ - begin);
  }

  std::string_view expect(std::string_view what) {
    auto t = next();
    if (!t) throw BvhError(line_, "unexpected end of file, expected " + std::string(what));
    return *t;
  }

  void expect_literal(std::string_view lit) {
    auto t = expect(lit);
    if (t != lit) throw BvhError(token_line_, "expected '" + std::string(lit) + "', got '" + std::string(t) + "'");
  }

  double expect_number(std::string_view what) {
    auto t = expect(what);
    double v = 0.0;
    if (!parse_double(t, v)) throw BvhError(token_line_, "expected number for " + std::string(what) + ", got '" + std::string(t) + "'");
    return v;
  }

  /// Remaining text after the current token, split by lines; used for frame rows.
  std::string_view rest() const { return text_.substr(pos_); }
  std::size_t line() const { return line_; }
  std::size_t token_line() const { return token_line_; }

  static bool parse_double(std::string_view t, double& out) {
    const char* b = t.data();
    const char* e = t.data() + t.size();
    if (b != e && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc{} && ptr == e;
  }

  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

 private:
  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t token_line_ = 1;
};

inline void parse_joint_body(BvhTokenizer& tok, Skeleton& s, std::size_t index) {
  tok.expect_literal("{");
  bool seen_offset = false;
  bool seen_channels = false;
  for (;;) {
    auto t = tok.expect("'}'");
    if (t == "}") break;
    if (t == "OFFSET") {
      for (int k = 0; k < 3; ++k) s.joints[index].offset[k] = tok.expect_number("OFFSET");
      seen_offset = true;
    } else if (t == "CHANNELS") {
      if (s.joints[index].is_end_site) throw BvhError(tok.token_line(), "End Site cannot declare channels");
      const double n = tok.expect_number("channel count");
      if (n != 0 && n != 3 && n != 6) throw BvhError(tok.token_line(), "channel count must be 0, 3 or 6");
      for (int k = 0; k < static_cast<int>(n); ++k) {
        auto name = tok.expect("channel name");
        auto c = parse_channel(name);
        if (!c) throw BvhError(tok.token_line(), "unknown channel '" + std::string(name) + "'");
        s.joints[index].channels.push_back(*c);
      }
      seen_channels = true;
    } else if (t == "JOINT" || t == "End") {
      if (s.joints[index].is_end_site) throw BvhError(tok.token_line(), "End Site cannot have children");
      Joint child;
      child.parent = index;
      if (t == "JOINT") {
        child.name = std::string(tok.expect("joint name"));
      } else {
        tok.expect_literal("Site");
        child.name = s.joints[index].name + "_End";
        child.is_end_site = true;
      }
      s.joints.push_back(std::move(child));
      parse_joint_body(tok, s, s.joints.size() - 1);
    } else {
      throw BvhError(tok.token_line(), "unexpected token '" + std::string(t) + "' in joint '" + s.joints[index].name + "'");
    }
  }
  if (!seen_offset) throw BvhError(tok.token_line(), "joint '" + s.joints[index].name + "' has no OFFSET");
  if (!seen_channels && !s.joints[index].is_end_site)
    throw BvhError(tok.token_line(), "joint '" + s.joints[index].name + "' has no CHANNELS");
}

inline void append_number(std::string& out, double v, int decimals) {
  char buf[64];
  if (v == 0.0) v = 0.0;  // no negative zero
  const int n = std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  out.append(buf, static_cast<std::size_t>(n));
}

inline void write_joint(std::string& out, const Skeleton& s, std::size_t index, int depth) {
  const auto& j = s.joints[index];
  const std::string indent(static_cast<std::size_t>(depth), '\t');
  if (j.is_end_site) {
    out += indent + "End Site\n";
  } else {
    out += indent + (j.parent ? "JOINT " : "ROOT ") + j.name + "\n";
  }
  out += indent + "{\n";
  out += indent + "\tOFFSET";
  for (int k = 0; k < 3; ++k) {
    out += ' ';
    append_number(out, j.offset[k], 6);
  }
  out += '\n';
  if (!j.is_end_site) {
    out += indent + "\tCHANNELS " + std::to_string(j.channels.size());
    for (auto c : j.channels) {
      out += ' ';
      out += channel_name(c);
    }
    out += '\n';
  }
  for (auto c : s.children(index)) write_joint(out, s, c, depth + 1);
  out += indent + "}\n";
}

}  // namespace detail

/// Parses BVH text. Every failure is reported as a BvhError carrying the line number.
inline MotionClip parse_bvh(std::string_view text) {
  detail::BvhTokenizer tok(text);
  tok.expect_literal("HIERARCHY");
  tok.expect_literal("ROOT");

  MotionClip clip;
  Joint root;
  root.name = std::string(tok.expect("root name"));
  clip.skeleton.joints.push_back(std::move(root));
  clip.skeleton.root_index = 0;
  detail::parse_joint_body(tok, clip.skeleton, 0);

  auto t = tok.next();
  if (!t) throw BvhError(tok.line(), "missing MOTION section");
  if (*t == "ROOT") throw BvhError(tok.token_line(), "multiple ROOT joints are not supported");
  if (*t != "MOTION") throw BvhError(tok.token_line(), "expected 'MOTION', got '" + std::string(*t) + "'");
  tok.expect_literal("Frames:");
  const double declared = tok.expect_number("frame count");
  if (declared < 0 || declared != std::floor(declared))
    throw BvhError(tok.token_line(), "frame count must be a nonnegative integer");
  tok.expect_literal("Frame");
  tok.expect_literal("Time:");
  clip.frame_time = tok.expect_number("frame time");
  if (!(clip.frame_time > 0.0) || !std::isfinite(clip.frame_time))
    throw BvhError(tok.token_line(), "frame time must be positive");

  if (auto err = check_skeleton(clip.skeleton); !err.empty()) throw BvhError(tok.token_line(), err);

  const auto n_frames = static_cast<std::size_t>(declared);
  const auto n_channels = clip.skeleton.channel_count();
  clip.frames.resize(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(n_channels));

  // Frame rows are line-oriented: one row per non-blank line.
  std::string_view rest = tok.rest();
  std::size_t line = tok.line();
  // The remainder of the Frame Time line belongs to the header.
  if (auto nl = rest.find('\n'); nl != std::string_view::npos) {
    auto tail = rest.substr(0, nl);
    for (char c : tail) {
      if (!detail::BvhTokenizer::is_space(c)) throw BvhError(line, "unexpected data after Frame Time");
    }
    rest.remove_prefix(nl + 1);
    ++line;
  } else {
    rest = {};
  }

  std::size_t row = 0;
  while (!rest.empty()) {
    auto nl = rest.find('\n');
    auto text_line = rest.substr(0, nl);
    rest.remove_prefix(nl == std::string_view::npos ? rest.size() : nl + 1);
    std::size_t col = 0;
    std::size_t i = 0;
    bool blank = true;
    while (i < text_line.size()) {
      while (i < text_line.size() && detail::BvhTokenizer::is_space(text_line[i])) ++i;
      if (i >= text_line.size()) break;
      const auto b = i;
      while (i < text_line.size() && !detail::BvhTokenizer::is_space(text_line[i])) ++i;
      blank = false;
      if (row >= n_frames) throw BvhError(line, "more frame rows than the declared " + std::to_string(n_frames));
      double v = 0.0;
      if (!detail::BvhTokenizer::parse_double(text_line.substr(b, i - b), v))
        throw BvhError(line, "non-numeric frame value '" + std::string(text_line.substr(b, i - b)) + "'");
      if (col >= n_channels) throw BvhError(line, "frame row has more than " + std::to_string(n_channels) + " values");
      clip.frames(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = v;
      ++col;
    }
    if (!blank) {
      if (col != n_channels)
        throw BvhError(line, "frame row has " + std::to_string(col) + " values, expected " + std::to_string(n_channels));
      ++row;
    }
    ++line;
  }
  if (row != n_frames)
    throw BvhError(line, "found " + std::to_string(row) + " frame rows, declared " + std::to_string(n_frames));
  return clip;
}

/// Serializes a clip; values are written with six decimals.
inline std::string write_bvh(const MotionClip& clip) {
  std::string out;
  out.reserve(static_cast<std::size_t>(clip.frames.size()) * 11 + 4096);
  out += "HIERARCHY\n";
  detail::write_joint(out, clip.skeleton, clip.skeleton.root_index, 0);
  out += "MOTION\n";
  out += "Frames: " + std::to_string(clip.frames.rows()) + "\n";
  out += "Frame Time: ";
  detail::append_number(out, clip.frame_time, 7);
  out += '\n';
  // Columns follow the hierarchy's depth-first order, which is the order the header lists them in.
  const auto& sk = clip.skeleton;
  const auto offsets = sk.channel_offsets();
  std::vector<Eigen::Index> columns;
  columns.reserve(sk.channel_count());
  std::vector<std::size_t> stack{sk.root_index};
  while (!stack.empty()) {
    const auto j = stack.back();
    stack.pop_back();
    for (std::size_t k = 0; k < sk.joints[j].channels.size(); ++k)
      columns.push_back(static_cast<Eigen::Index>(offsets[j] + k));
    auto kids = sk.children(j);
    stack.insert(stack.end(), kids.rbegin(), kids.rend());
  }
  for (Eigen::Index r = 0; r < clip.frames.rows(); ++r) {
    bool first = true;
    for (auto c : columns) {
      if (!first) out += ' ';
      first = false;
      detail::append_number(out, clip.frames(r, c), 6);
    }
    out += '\n';
  }
  return out;
}

}  // namespace genea
