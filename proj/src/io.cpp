#include "jointkin/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "jointkin/error.hpp"

namespace jointkin {

namespace {

const std::vector<std::string> kStreamColumns = {"t", "gx", "gy", "gz", "ax", "ay", "az", "mx", "my", "mz"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& origin, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw Error(ErrorCode::SchemaError, origin + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ImuSample lerp(const ImuSample& a, const ImuSample& b, double t) {
  const double u = (t - a.t) / (b.t - a.t);
  ImuSample s;
  s.t = t;
  s.gyro = a.gyro + u * (b.gyro - a.gyro);
  s.accel = a.accel + u * (b.accel - a.accel);
  s.mag = a.mag + u * (b.mag - a.mag);
  return s;
}

struct Biquad {
  double b0, b1, b2, a1, a2;
};

Biquad butter2(double cutoff, double fs) {
  const double K = std::tan(kPi * cutoff / fs);
  const double n = 1.0 / (1.0 + std::sqrt(2.0) * K + K * K);
  Biquad f;
  f.b0 = K * K * n;
  f.b1 = 2.0 * f.b0;
  f.b2 = f.b0;
  f.a1 = 2.0 * (K * K - 1.0) * n;
  f.a2 = (1.0 - std::sqrt(2.0) * K + K * K) * n;
  return f;
}

// transposed direct form II, state started at the steady state of x[0]
void run(const Biquad& f, std::vector<double>& x) {
  const double g = (f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2);
  double z2 = (f.b2 - f.a2 * g) * x[0];
  double z1 = (f.b1 - f.a1 * g) * x[0] + z2;
  for (double& v : x) {
    const double in = v;
    const double y = f.b0 * in + z1;
    z1 = f.b1 * in - f.a1 * y + z2;
    z2 = f.b2 * in - f.a2 * y;
    v = y;
  }
}

constexpr std::size_t kPad = 9;

}  // namespace

ImuStream parse_stream(const std::string& text, double sample_rate, const ColumnMap& columns,
                       const std::string& origin) {
  if (!(sample_rate > 0.0)) throw Error(ErrorCode::ConfigError, "sample rate must be positive");
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string l = trim(line);
    if (l.empty() || l[0] == '#') continue;
    header = split(l);
    break;
  }
  if (header.empty()) throw Error(ErrorCode::SchemaError, origin + ": missing header");

  std::array<std::size_t, 10> idx{};
  for (std::size_t c = 0; c < kStreamColumns.size(); ++c) {
    const auto it = columns.find(kStreamColumns[c]);
    const std::string want = it == columns.end() ? kStreamColumns[c] : it->second;
    const auto pos = std::find(header.begin(), header.end(), want);
    if (pos == header.end()) throw Error(ErrorCode::SchemaError, origin + ": missing column '" + want + "'");
    idx[c] = pos - header.begin();
  }

  ImuStream raw;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string l = trim(line);
    if (l.empty() || l[0] == '#') continue;
    const auto cells = split(l);
    if (cells.size() != header.size())
      throw Error(ErrorCode::SchemaError, origin + ":" + std::to_string(lineno) + ": expected " +
                                              std::to_string(header.size()) + " fields");
    double v[10];
    for (std::size_t c = 0; c < 10; ++c) v[c] = parse_number(cells[idx[c]], origin, lineno);
    ImuSample s;
    s.t = v[0];
    s.gyro = Vec3(v[1], v[2], v[3]);
    s.accel = Vec3(v[4], v[5], v[6]);
    s.mag = Vec3(v[7], v[8], v[9]);
    if (!is_finite(s)) throw Error(ErrorCode::SchemaError, origin + ":" + std::to_string(lineno) + ": non-finite value");
    raw.push_back(s);
  }
  if (raw.empty()) return raw;

  // small reorderings are repaired, larger ones rejected
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a].t < raw[b].t; });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t d = order[k] > k ? order[k] - k : k - order[k];
    if (d > 3) throw Error(ErrorCode::TimeOrderError, origin + ": timestamps out of order near row " + std::to_string(order[k] + 1));
  }
  ImuStream sorted;
  sorted.reserve(raw.size());
  for (std::size_t k : order) {
    if (!sorted.empty() && raw[k].t == sorted.back().t) continue;
    sorted.push_back(raw[k]);
  }

  const double dt = 1.0 / sample_rate;
  const double t0 = sorted.front().t;
  const std::size_t n = static_cast<std::size_t>(std::floor((sorted.back().t - t0) / dt + 1e-6)) + 1;
  ImuStream out;
  out.reserve(n);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + k * dt;
    while (j + 1 < sorted.size() && sorted[j + 1].t <= t + 1e-6 * dt) ++j;
    if (std::abs(sorted[j].t - t) <= 1e-6 * dt) {
      out.push_back(sorted[j]);
    } else if (j + 1 < sorted.size()) {
      out.push_back(lerp(sorted[j], sorted[j + 1], t));
    } else {
      out.push_back(sorted[j]);
      out.back().t = t;
    }
  }
  return out;
}

ImuStream load_stream(const std::string& path, double sample_rate, const ColumnMap& columns) {
  return parse_stream(read_file(path), sample_rate, columns, path);
}

std::string format_stream(const ImuStream& s) {
  std::string out = "t,gx,gy,gz,ax,ay,az,mx,my,mz\n";
  for (const ImuSample& x : s) {
    out += num(x.t);
    for (const Vec3* v : {&x.gyro, &x.accel, &x.mag})
      for (int i = 0; i < 3; ++i) out += "," + num((*v)[i]);
    out += "\n";
  }
  return out;
}

void write_stream(const std::string& path, const ImuStream& s) { write_file(path, format_stream(s)); }

std::vector<double> lowpass_zero_phase(const std::vector<double>& x, double cutoff, double sample_rate) {
  if (!(cutoff > 0.0) || !(cutoff < 0.5 * sample_rate))
    throw Error(ErrorCode::ConfigError, "low-pass cutoff must lie between 0 and Nyquist");
  const std::size_t n = x.size();
  if (n <= kPad) throw Error(ErrorCode::TooShort, "need more than " + std::to_string(kPad) + " samples to filter");
  // odd extension at both ends
  std::vector<double> e;
  e.reserve(n + 2 * kPad);
  for (std::size_t i = kPad; i >= 1; --i) e.push_back(2.0 * x[0] - x[i]);
  e.insert(e.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= kPad; ++i) e.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const Biquad f = butter2(cutoff, sample_rate);
  run(f, e);
  std::reverse(e.begin(), e.end());
  run(f, e);
  std::reverse(e.begin(), e.end());
  return std::vector<double>(e.begin() + kPad, e.begin() + kPad + n);
}

void zero_rate_reset(ImuStream& s, double threshold) {
  for (ImuSample& x : s)
    if (x.gyro.norm() < threshold) x.gyro.setZero();
}

StationarySegment longest_stationary_segment(const ImuStream& s, const PreprocessConfig& cfg) {
  const std::size_t n = s.size();
  const std::size_t half = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.5 * cfg.sample_rate)));
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + s[i].gyro.squaredNorm();
  const double thr2 = cfg.stationary_gyro_rms * cfg.stationary_gyro_rms;

  StationarySegment best;
  std::size_t run_begin = 0;
  bool in_run = false;
  for (std::size_t i = 0; i <= n; ++i) {
    bool quiet = false;
    if (i < n) {
      const std::size_t b = i > half ? i - half : 0;
      const std::size_t e = std::min(n, i + half + 1);
      quiet = (cum[e] - cum[b]) / (e - b) < thr2;
    }
    if (quiet && !in_run) {
      run_begin = i;
      in_run = true;
    } else if (!quiet && in_run) {
      if (i - run_begin > best.end - best.begin) best = {run_begin, i};
      in_run = false;
    }
  }
  const double len = (best.end - best.begin) / cfg.sample_rate;
  if (best.end == best.begin || len < cfg.stationary_min_time)
    throw Error(ErrorCode::TooShort, "no stationary segment of at least " + std::to_string(cfg.stationary_min_time) +
                                         " s for bias estimation");
  return best;
}

ImuStream lowpass_stream(const ImuStream& s, double cutoff, double sample_rate) {
  const std::size_t n = s.size();
  if (n <= kPad) throw Error(ErrorCode::TooShort, "stream shorter than the filter warm-up");
  ImuStream out = s;
  std::vector<double> ch(n);
  auto filter_channel = [&](auto get) {
    for (std::size_t i = 0; i < n; ++i) ch[i] = get(out[i]);
    const std::vector<double> y = lowpass_zero_phase(ch, cutoff, sample_rate);
    for (std::size_t i = 0; i < n; ++i) get(out[i]) = y[i];
  };
  for (int a = 0; a < 3; ++a) {
    filter_channel([a](ImuSample& x) -> double& { return x.gyro[a]; });
    filter_channel([a](ImuSample& x) -> double& { return x.accel[a]; });
    filter_channel([a](ImuSample& x) -> double& { return x.mag[a]; });
  }
  return out;
}

ImuStream preprocess(const ImuStream& s, const PreprocessConfig& cfg) {
  const std::size_t n = s.size();
  ImuStream out = lowpass_stream(s, cfg.lowpass_cutoff, cfg.sample_rate);

  const StationarySegment seg = longest_stationary_segment(out, cfg);
  Vec3 gb = Vec3::Zero(), am = Vec3::Zero();
  for (std::size_t i = seg.begin; i < seg.end; ++i) {
    gb += out[i].gyro;
    am += out[i].accel;
  }
  gb /= double(seg.end - seg.begin);
  am /= double(seg.end - seg.begin);
  // only the part of the accelerometer bias along gravity is observable at rest
  const Vec3 ab = am.norm() > 0.0 ? Vec3(am - kGravity * am.normalized()) : Vec3::Zero();
  for (ImuSample& x : out) {
    x.gyro -= gb;
    x.accel -= ab;
  }

  zero_rate_reset(out, cfg.zero_rate_threshold);

  double mnorm = 0.0;
  for (const ImuSample& x : out) mnorm += x.mag.norm();
  mnorm /= n;
  if (mnorm > 0.0)
    for (ImuSample& x : out) x.mag /= mnorm;
  return out;
}

void write_truth(const std::string& path, const GroundTruth& gt) {
  std::string out;
  auto vec = [&](const char* name, const Vec3& v) { out += std::string("# ") + name + " " + num(v.x()) + " " + num(v.y()) + " " + num(v.z()) + "\n"; };
  vec("j1", gt.j1);
  vec("j2", gt.j2);
  vec("h1", gt.h1);
  vec("h2", gt.h2);
  vec("o1", gt.o1);
  vec("o2", gt.o2);
  if (!gt.ref_offset.empty()) {
    const Quat& q = gt.ref_offset.front();
    out += "# ref_offset " + num(q.w()) + " " + num(q.x()) + " " + num(q.y()) + " " + num(q.z()) + "\n";
  }
  out += "t,angle_j1,angle_j2,angle_j3\n";
  for (std::size_t i = 0; i < gt.t.size(); ++i)
    out += num(gt.t[i]) + "," + num(gt.angles[i][0]) + "," + num(gt.angles[i][1]) + "," + num(gt.angles[i][2]) + "\n";
  write_file(path, out);
}

namespace {

// rows of "t,a,b,c[,source]" with an optional '#' block in front
template <class F>
void read_table(const std::string& path, const std::vector<std::string>& expected, F row) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string l = trim(line);
    if (l.empty()) continue;
    if (l[0] == '#') {
      if (!have_header) row(lineno, std::vector<std::string>{l});
      continue;
    }
    const auto cells = split(l);
    if (!have_header) {
      if (cells != expected) throw Error(ErrorCode::SchemaError, path + ": unexpected header '" + l + "'");
      have_header = true;
      continue;
    }
    if (cells.size() != expected.size())
      throw Error(ErrorCode::SchemaError, path + ":" + std::to_string(lineno) + ": wrong field count");
    row(lineno, cells);
  }
  if (!have_header) throw Error(ErrorCode::SchemaError, path + ": missing header");
}

}  // namespace

TruthTable load_truth(const std::string& path) {
  TruthTable tt;
  read_table(path, {"t", "angle_j1", "angle_j2", "angle_j3"}, [&](std::size_t ln, const std::vector<std::string>& c) {
    if (c.size() == 1) {
      std::istringstream ss(c[0].substr(1));
      std::string key;
      ss >> key;
      double v;
      while (ss >> v) tt.header[key].push_back(v);
      return;
    }
    tt.t.push_back(parse_number(c[0], path, ln));
    tt.angles.push_back({parse_number(c[1], path, ln), parse_number(c[2], path, ln), parse_number(c[3], path, ln)});
  });
  return tt;
}

void write_angles(const std::string& path, const std::vector<JointAngles>& angles) {
  std::string out = "t,angle_j1,angle_j2,angle_j3,source\n";
  for (const JointAngles& a : angles)
    out += num(a.t) + "," + num(a.angle_j1) + "," + num(a.angle_j2) + "," + num(a.angle_j3) + "," + to_string(a.source) + "\n";
  write_file(path, out);
}

AngleTable load_angles(const std::string& path) {
  AngleTable at;
  read_table(path, {"t", "angle_j1", "angle_j2", "angle_j3", "source"},
             [&](std::size_t ln, const std::vector<std::string>& c) {
               if (c.size() == 1) return;
               at.t.push_back(parse_number(c[0], path, ln));
               at.angles.push_back({parse_number(c[1], path, ln), parse_number(c[2], path, ln), parse_number(c[3], path, ln)});
               at.source.push_back(c[4]);
             });
  return at;
}

void write_events(const std::string& path, const std::vector<PipelineEvent>& events) {
  std::string out;
  for (const PipelineEvent& e : events) {
    nlohmann::json j;
    j["t"] = e.t;
    j["kind"] = to_string(e.kind);
    j["V"] = e.V ? nlohmann::json(*e.V) : nlohmann::json(nullptr);
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

// ---- config ----

PreprocessConfig RunConfig::preprocess_config() const {
  PreprocessConfig p;
  p.sample_rate = sample_rate;
  p.lowpass_cutoff = lowpass_cutoff;
  p.zero_rate_threshold = zero_rate_threshold;
  return p;
}

void RunConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  if (!(sample_rate > 0.0)) bad("sample_rate must be positive");
  if (!(lowpass_cutoff > 0.0) || !(lowpass_cutoff < 0.5 * sample_rate)) bad("lowpass_cutoff must lie below Nyquist");
  if (!(zero_rate_threshold > 0.0)) bad("zero_rate_threshold must be positive");
  if (!(pipeline.detector.threshold > 0.0)) bad("detector_threshold must be positive");
  const WindowConfig& w = pipeline.window;
  if (w.window_len < 2 || w.interval_len < 1 || w.detection_len < 2) bad("window lengths must be positive");
  if (w.interval_len > w.interval_cap) bad("interval_len exceeds interval_cap");
  if (w.feedback_iters < 1) bad("feedback_iters must be >= 1");
  default_detector_threshold(joint);
}

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::ConfigError, key + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d))
    throw Error(ErrorCode::ConfigError, key + ": expected a number, got '" + v + "'");
  return d;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d < 0 || d != std::floor(d)) throw Error(ErrorCode::ConfigError, key + ": expected a non-negative integer");
  return static_cast<std::size_t>(d);
}

struct Setter {
  const char* key;
  void (*set)(RunConfig&, const std::string& key, const std::string& value);
};

const Setter kSetters[] = {
    {"sample_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.sample_rate = c.pipeline.sample_rate = parse_double(k, v); }},
    {"lowpass_cutoff", [](RunConfig& c, const std::string& k, const std::string& v) { c.lowpass_cutoff = parse_double(k, v); }},
    {"zero_rate_threshold", [](RunConfig& c, const std::string& k, const std::string& v) { c.zero_rate_threshold = parse_double(k, v); }},
    {"preprocess", [](RunConfig& c, const std::string& k, const std::string& v) { c.preprocess = parse_bool(k, v); }},
    {"joint", [](RunConfig& c, const std::string&, const std::string& v) {
       c.joint = v;
       if (!c.threshold_overridden) c.pipeline.detector.threshold = default_detector_threshold(v);
     }},
    {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_size(k, v); }},
    {"window_len", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.window.window_len = parse_size(k, v); }},
    {"interval_len", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.window.interval_len = parse_size(k, v); }},
    {"interval_cap", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.window.interval_cap = parse_size(k, v); }},
    {"feedback_iters", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.window.feedback_iters = static_cast<int>(parse_size(k, v)); }},
    {"detection_len", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.window.detection_len = parse_size(k, v); }},
    {"detector_enabled", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.detector.enabled = parse_bool(k, v); }},
    {"detector_threshold", [](RunConfig& c, const std::string& k, const std::string& v) {
       c.pipeline.detector.threshold = parse_double(k, v);
       c.threshold_overridden = true;
     }},
    {"detector_hinge_prior", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.detector.hinge_prior_weight = parse_double(k, v); }},
    {"calibrate", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.calibrate = parse_bool(k, v); }},
    {"twist_decomposition", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.twist_decomposition = parse_bool(k, v); }},
    {"projection", [](RunConfig& c, const std::string& k, const std::string& v) {
       if (v == "axis") c.pipeline.projection = ProjectionMode::Axis;
       else if (v == "joint_rate") c.pipeline.projection = ProjectionMode::JointRate;
       else if (v == "none") c.pipeline.projection = ProjectionMode::None;
       else throw Error(ErrorCode::ConfigError, k + ": expected axis, joint_rate or none");
     }},
    {"secondary_prior_weight", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.secondary.prior_weight = parse_double(k, v); }},
    {"max_gap", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.max_gap = parse_double(k, v); }},
    {"filter_kp_acc", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.orientation.kp_acc = parse_double(k, v); }},
    {"filter_kp_mag", [](RunConfig& c, const std::string& k, const std::string& v) { c.pipeline.orientation.kp_mag = parse_double(k, v); }},
};

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Setter& s : kSetters) out.emplace_back(s.key);
  return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string l = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(l.substr(0, eq));
    const std::string value = trim(l.substr(eq + 1));
    const auto it = std::find_if(std::begin(kSetters), std::end(kSetters), [&](const Setter& s) { return key == s.key; });
    if (it == std::end(kSetters)) throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->set(base, key, value);
  }
  base.validate();
  return base;
}

RunConfig load_config(const std::string& path) {
  std::string p = path;
  if (p.empty()) {
    const char* env = std::getenv("JOINTKIN_CONFIG");
    if (!env || !*env) return RunConfig{};
    p = env;
  }
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace jointkin
