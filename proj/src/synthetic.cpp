#include "tmdpt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "tmdpt/errors.hpp"
#include "tmdpt/random.hpp"

namespace tmdpt {

const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names{"handshake", "hug", "high_five", "kick", "push", "walk_past"};
  return names;
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  SyntheticSpec s;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "num_classes") s.num_classes = value.get<std::size_t>();
      else if (key == "samples_per_class") s.samples_per_class = value.get<std::size_t>();
      else if (key == "frames") s.frames = value.get<std::size_t>();
      else if (key == "points_per_limb") s.points_per_limb = value.get<std::size_t>();
      else if (key == "point_noise") s.point_noise = value.get<double>();
      else if (key == "timing_jitter") s.timing_jitter = value.get<double>();
      else if (key == "max_rotation_deg") s.max_rotation_deg = value.get<double>();
      else if (key == "clutter_points") s.clutter_points = value.get<std::size_t>();
      else throw ConfigError("unknown synthetic spec key \"" + key + "\"");
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("synthetic spec key \"" + key + "\" has the wrong type");
    }
  }
  if (s.num_classes < 2 || s.num_classes > synthetic_class_names().size()) {
    throw ConfigError("num_classes must be in [2, " + std::to_string(synthetic_class_names().size()) + "]");
  }
  if (s.frames < 2 || s.points_per_limb == 0) throw ConfigError("frames must be >= 2 and points_per_limb >= 1");
  if (s.point_noise < 0.0 || s.timing_jitter < 0.0) throw ConfigError("noise levels must be nonnegative");
  return s;
}

nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"num_classes", s.num_classes},   {"samples_per_class", s.samples_per_class},
          {"frames", s.frames},             {"points_per_limb", s.points_per_limb},
          {"point_noise", s.point_noise},   {"timing_jitter", s.timing_jitter},
          {"max_rotation_deg", s.max_rotation_deg}, {"clutter_points", s.clutter_points}};
}

namespace {

double smoothstep(double a, double b, double t) {
  if (t <= a) return 0.0;
  if (t >= b) return 1.0;
  const double x = (t - a) / (b - a);
  return x * x * (3.0 - 2.0 * x);
}

// Rises over [a, b], holds, falls over [c, d].
double pulse(double a, double b, double c, double d, double t) { return smoothstep(a, b, t) * (1.0 - smoothstep(c, d, t)); }

Vec3 lerp(Vec3 a, Vec3 b, double w) { return a + (b - a) * w; }

struct Agent {
  double x = 0.0;
  double z = 0.0;
  double facing = 1.0;  // +1 faces +x
  double height = 1.0;
  double lean = 0.0;
  double walk_phase = 0.0;
  double walk_amp = 0.0;
  Vec3 hand_r_target, hand_l_target, foot_r_target;
  double hand_r_w = 0.0, hand_l_w = 0.0, foot_r_w = 0.0;
};

struct Segment {
  Vec3 a, b;
  double spread;
};

// Right of an agent facing +x (y up) is +z.
std::vector<Segment> skeleton(const Agent& ag, double noise) {
  const double h = ag.height, f = ag.facing;
  const Vec3 base{ag.x, 0.0, ag.z};
  const Vec3 hip{ag.x, 0.95 * h, ag.z};
  const Vec3 neck{ag.x + ag.lean * f, 1.5 * h, ag.z};
  const Vec3 sh_r = neck + Vec3{0.0, -0.05 * h, 0.18 * h * f};
  const Vec3 sh_l = neck + Vec3{0.0, -0.05 * h, -0.18 * h * f};
  const double swing = ag.walk_amp * std::sin(ag.walk_phase);
  const Vec3 rest_hand_r = sh_r + Vec3{(0.05 - swing) * f, -0.6 * h, 0.0};
  const Vec3 rest_hand_l = sh_l + Vec3{(0.05 + swing) * f, -0.6 * h, 0.0};
  const Vec3 hip_r = hip + Vec3{0.0, 0.0, 0.1 * h * f};
  const Vec3 hip_l = hip + Vec3{0.0, 0.0, -0.1 * h * f};
  const Vec3 rest_foot_r = base + Vec3{swing * f, 0.03, 0.1 * h * f};
  const Vec3 rest_foot_l = base + Vec3{-swing * f, 0.03, -0.1 * h * f};
  return {
      {hip, neck, 2.0 * noise},
      {sh_r, lerp(rest_hand_r, ag.hand_r_target, ag.hand_r_w), noise},
      {sh_l, lerp(rest_hand_l, ag.hand_l_target, ag.hand_l_w), noise},
      {hip_r, lerp(rest_foot_r, ag.foot_r_target, ag.foot_r_w), noise},
      {hip_l, rest_foot_l, noise},
  };
}

// Places both agents for normalized time tau in [0, 1].
void pose(std::uint32_t label, double tau, double sep_scale, double walk_offset, Agent& a, Agent& b) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a.facing = 1.0;
  b.facing = -1.0;
  switch (label) {
    case 0: {  // handshake
      const double s = sep_scale * (1.6 - 0.75 * smoothstep(0.05, 0.35, tau));
      a.x = -s / 2;
      b.x = s / 2;
      const double w = pulse(0.35, 0.45, 0.75, 0.85, tau);
      const Vec3 meet{0.0, 0.5 * (a.height + b.height) * (1.0 + 0.05 * std::sin(two_pi * 4.0 * tau)), 0.0};
      a.hand_r_target = b.hand_r_target = meet;
      a.hand_r_w = b.hand_r_w = w;
      a.walk_amp = b.walk_amp = 0.15 * (1.0 - smoothstep(0.3, 0.36, tau));
      a.walk_phase = b.walk_phase = two_pi * 3.0 * tau + walk_offset;
      break;
    }
    case 1: {  // hug
      b.x = 0.4;
      a.x = b.x - sep_scale * (1.6 - 1.1 * smoothstep(0.15, 0.6, tau));
      const double w = smoothstep(0.5, 0.7, tau);
      a.hand_r_target = {b.x + 0.12, 1.3 * a.height, 0.15};
      a.hand_l_target = {b.x + 0.12, 1.3 * a.height, -0.15};
      b.hand_r_target = {a.x - 0.12, 1.3 * b.height, -0.15};
      b.hand_l_target = {a.x - 0.12, 1.3 * b.height, 0.15};
      a.hand_r_w = a.hand_l_w = w;
      b.hand_r_w = b.hand_l_w = 0.8 * w;
      a.lean = b.lean = 0.05 * w;
      a.walk_amp = 0.2 * (1.0 - smoothstep(0.55, 0.62, tau)) * smoothstep(0.1, 0.16, tau);
      a.walk_phase = two_pi * 3.0 * tau + walk_offset;
      break;
    }
    case 2: {  // high five
      const double s = sep_scale * (1.6 - 0.65 * smoothstep(0.05, 0.35, tau));
      a.x = -s / 2;
      b.x = s / 2;
      const double w = pulse(0.38, 0.5, 0.58, 0.7, tau);
      const Vec3 meet{0.0, 0.93 * (a.height + b.height), 0.0};
      a.hand_r_target = b.hand_r_target = meet;
      a.hand_r_w = b.hand_r_w = w;
      a.walk_amp = b.walk_amp = 0.15 * (1.0 - smoothstep(0.3, 0.36, tau));
      a.walk_phase = b.walk_phase = two_pi * 3.0 * tau + walk_offset;
      break;
    }
    case 3: {  // kick
      const double s = sep_scale * 1.15;
      a.x = -s / 2;
      b.x = s / 2;
      const double w = pulse(0.35, 0.47, 0.55, 0.7, tau);
      a.foot_r_target = {b.x - 0.2, 0.6 * a.height, 0.05};
      a.foot_r_w = w;
      a.lean = -0.08 * w;
      b.lean = -0.12 * pulse(0.45, 0.52, 0.6, 0.8, tau);
      b.x += 0.15 * smoothstep(0.47, 0.6, tau);
      break;
    }
    case 4: {  // push
      b.x = 0.4 + sep_scale * 1.0 * smoothstep(0.3, 0.7, tau);
      a.x = 0.4 - 0.5 * sep_scale + 0.2 * smoothstep(0.3, 0.6, tau);
      const double w = 1.0 - smoothstep(0.55, 0.75, tau);
      a.hand_r_target = {b.x - 0.1, 1.3 * a.height, 0.15};
      a.hand_l_target = {b.x - 0.1, 1.3 * a.height, -0.15};
      a.hand_r_w = a.hand_l_w = w;
      a.lean = 0.08 * w;
      b.lean = -0.12 * pulse(0.3, 0.4, 0.6, 0.8, tau);
      b.walk_amp = 0.2 * pulse(0.3, 0.35, 0.65, 0.7, tau);
      b.walk_phase = two_pi * 3.0 * tau + walk_offset;
      break;
    }
    default: {  // walk past
      const double span = 1.3 * sep_scale;
      a.x = -span + 2.0 * span * tau;
      b.x = span - 2.0 * span * tau;
      a.z = -0.35;
      b.z = 0.35;
      a.walk_amp = b.walk_amp = 0.25;
      a.walk_phase = two_pi * 3.0 * tau + walk_offset;
      b.walk_phase = two_pi * 3.0 * tau + walk_offset + std::numbers::pi;
      break;
    }
  }
}

}  // namespace

PointCloudVideo generate_synthetic_video(const SyntheticSpec& spec, std::uint64_t seed, std::uint32_t label,
                                         std::size_t index) {
  if (label >= spec.num_classes) throw ContractError("synthetic label out of range");
  Rng rng(derive_seed(seed, SeedStage::Synthetic, (static_cast<std::uint64_t>(label) << 32) | index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double height_a = uniform(0.85, 1.1), height_b = uniform(0.85, 1.1);
  const double sep_scale = uniform(0.9, 1.1);
  const double onset = uniform(-spec.timing_jitter, spec.timing_jitter);
  const double walk_offset = uniform(0.0, 2.0 * std::numbers::pi);
  const double theta = uniform(-spec.max_rotation_deg, spec.max_rotation_deg) * std::numbers::pi / 180.0;
  const double mirror = unit(rng) < 0.5 ? -1.0 : 1.0;
  const Vec3 shift{uniform(-0.3, 0.3), 0.0, uniform(-0.3, 0.3)};
  const double c = std::cos(theta), s = std::sin(theta);
  auto place = [&](Vec3 p) {
    p.x *= mirror;
    return Vec3{c * p.x + s * p.z, p.y, -s * p.x + c * p.z} + shift;
  };

  PointCloudVideo video;
  video.label = label;
  video.frames.reserve(spec.frames);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const double tau = std::clamp(static_cast<double>(f) / static_cast<double>(spec.frames - 1) - onset, 0.0, 1.0);
    Agent a, b;
    a.height = height_a;
    b.height = height_b;
    pose(label, tau, sep_scale, walk_offset, a, b);
    PointCloudFrame frame;
    for (const Agent* ag : {&a, &b}) {
      for (const Segment& seg : skeleton(*ag, spec.point_noise)) {
        for (std::size_t i = 0; i < spec.points_per_limb; ++i) {
          const Vec3 jitter{gauss(rng) * seg.spread, gauss(rng) * seg.spread, gauss(rng) * seg.spread};
          frame.points.push_back(place(lerp(seg.a, seg.b, unit(rng)) + jitter));
        }
      }
    }
    // Depth speckle: stray returns scattered around random body points.
    const std::size_t body = frame.points.size();
    for (std::size_t i = 0; i < spec.clutter_points; ++i) {
      const Vec3 anchor = frame.points[static_cast<std::size_t>(unit(rng) * static_cast<double>(body)) % body];
      frame.points.push_back(anchor + Vec3{gauss(rng) * 0.1, gauss(rng) * 0.1, gauss(rng) * 0.1});
    }
    video.frames.push_back(std::move(frame));
  }
  return video;
}

std::vector<ManifestEntry> generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed,
                                                      const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  const auto& names = synthetic_class_names();
  for (std::uint32_t label = 0; label < spec.num_classes; ++label) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      std::ostringstream file;
      file << names[label] << '_' << std::setw(4) << std::setfill('0') << i << ".pcv";
      write_pcv(out_dir / file.str(), generate_synthetic_video(spec, seed, label, i));
      entries.push_back({file.str(), label, names[label]});
    }
  }
  write_manifest(out_dir, entries);
  return entries;
}

void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(dir / "manifest.jsonl", std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / "manifest.jsonl").string());
  for (const ManifestEntry& e : entries) {
    out << nlohmann::json{{"file", e.file}, {"label", e.label}, {"class", e.class_name}}.dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + (dir / "manifest.jsonl").string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.jsonl";
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.file = j.at("file").get<std::string>();
      e.label = j.at("label").get<std::uint32_t>();
      e.class_name = j.value("class", std::string{});
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (entries.empty()) throw DataError(path.string() + " lists no videos");
  return entries;
}

}  // namespace tmdpt
