#pragma once

// Run configuration file: a flat, typed key-value text format with
// [sections] mirroring the module configs (a small TOML subset).
//
//   # comment
//   [clutter]
//   count = 50
//   rcs_mean_db = 15.0
//   [experiment]
//   gamma_list = [0.5, 0.98]
//   pipeline = "both"
//
// Every key is typed; unknown sections or keys, duplicates and type
// mismatches are rejected with the offending line number. Omitted keys keep
// their defaults (ExperimentConfig{}).

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ddopt/errors.hpp"
#include "ddopt/harness.hpp"

namespace ddopt {

struct OutputConfig {
  std::string dir = "out";
  std::string dump_surfaces;  // empty: no surface dumps
};

struct RunConfig {
  ExperimentConfig experiment;
  OutputConfig output;
};

namespace config_detail {

struct Value {
  enum class Kind { integer, real, boolean, string, array };
  Kind kind = Kind::integer;
  std::int64_t i = 0;
  bool i_valid = false;
  std::uint64_t u = 0;
  bool u_valid = false;
  double d = 0.0;
  bool b = false;
  std::string s;
  std::vector<double> arr;
};

inline std::string_view trim(std::string_view v) {
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
  return v;
}

inline bool parse_double(std::string_view t, double& out) {
  if (t.empty()) return false;
  if (t.front() == '+') t.remove_prefix(1);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  return res.ec == std::errc{} && res.ptr == t.data() + t.size();
}

inline Value parse_value(std::string_view t, const std::string& where) {
  Value v;
  t = trim(t);
  if (t.empty()) throw ConfigError(where + ": missing value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') throw ConfigError(where + ": unterminated string");
    v.kind = Value::Kind::string;
    v.s = std::string(t.substr(1, t.size() - 2));
    return v;
  }
  if (t == "true" || t == "false") {
    v.kind = Value::Kind::boolean;
    v.b = t == "true";
    return v;
  }
  if (t.front() == '[') {
    if (t.back() != ']') throw ConfigError(where + ": unterminated array");
    v.kind = Value::Kind::array;
    std::string_view body = trim(t.substr(1, t.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      const std::string_view item = trim(body.substr(0, comma));
      double d = 0.0;
      if (!parse_double(item, d)) throw ConfigError(where + ": bad array element '" + std::string(item) + "'");
      v.arr.push_back(d);
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
      if (body.empty()) break;  // trailing comma
    }
    return v;
  }
  const bool looks_integer = t.find_first_of(".eEnN") == std::string_view::npos;
  if (looks_integer) {
    std::string_view digits = t.front() == '+' ? t.substr(1) : t;
    const auto r = std::from_chars(digits.data(), digits.data() + digits.size(), v.i);
    if (r.ec == std::errc{} && r.ptr == digits.data() + digits.size()) {
      v.kind = Value::Kind::integer;
      v.i_valid = true;
      v.d = static_cast<double>(v.i);
      const auto ru = std::from_chars(digits.data(), digits.data() + digits.size(), v.u);
      v.u_valid = ru.ec == std::errc{} && ru.ptr == digits.data() + digits.size();
      return v;
    }
    const auto ru = std::from_chars(digits.data(), digits.data() + digits.size(), v.u);
    if (ru.ec == std::errc{} && ru.ptr == digits.data() + digits.size()) {
      v.kind = Value::Kind::integer;
      v.u_valid = true;
      v.d = static_cast<double>(v.u);
      return v;
    }
  }
  if (parse_double(t, v.d)) {
    v.kind = Value::Kind::real;
    return v;
  }
  throw ConfigError(where + ": cannot parse value '" + std::string(t) + "'");
}

inline std::string fmt_double(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
  return s + "]";
}

struct Field {
  std::function<void(RunConfig&, const Value&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Get>
Field int_field(Get ref) {
  return {[ref](RunConfig& c, const Value& v, const std::string& where) {
            if (v.kind != Value::Kind::integer) throw ConfigError(where + ": expected an integer");
            if (!v.i_valid || v.i > 2147483647LL || v.i < -2147483648LL)
              throw ConfigError(where + ": integer out of range");
            ref(c) = static_cast<int>(v.i);
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field u64_field(Get ref) {
  return {[ref](RunConfig& c, const Value& v, const std::string& where) {
            if (v.kind != Value::Kind::integer || !v.u_valid) throw ConfigError(where + ": expected a nonnegative integer");
            ref(c) = v.u;
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field real_field(Get ref) {
  return {[ref](RunConfig& c, const Value& v, const std::string& where) {
            if (v.kind != Value::Kind::integer && v.kind != Value::Kind::real) throw ConfigError(where + ": expected a number");
            ref(c) = v.d;
          },
          [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field bool_field(Get ref) {
  return {[ref](RunConfig& c, const Value& v, const std::string& where) {
            if (v.kind != Value::Kind::boolean) throw ConfigError(where + ": expected true or false");
            ref(c) = v.b;
          },
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <typename Get>
Field string_field(Get ref) {
  return {[ref](RunConfig& c, const Value& v, const std::string& where) {
            if (v.kind != Value::Kind::string) throw ConfigError(where + ": expected a quoted string");
            ref(c) = v.s;
          },
          [ref](const RunConfig& c) { return "\"" + ref(const_cast<RunConfig&>(c)) + "\""; }};
}

template <typename Get>
Field list_field(Get ref) {
  return {[ref](RunConfig& c, const Value& v, const std::string& where) {
            if (v.kind != Value::Kind::array) throw ConfigError(where + ": expected an array of numbers");
            ref(c) = v.arr;
          },
          [ref](const RunConfig& c) { return fmt_list(ref(const_cast<RunConfig&>(c))); }};
}

inline std::string pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::unadapted:
      return "unadapted";
    case Pipeline::adapted:
      return "adapted";
    case Pipeline::both:
      break;
  }
  return "both";
}

/// Ordered (section, key) -> field table; also drives serialization order.
inline const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto add = [&](std::string name, Field f) { t.emplace_back(std::move(name), std::move(f)); };
#define DDOPT_REF(expr) [](RunConfig& c) -> auto& { return c.expr; }
    add("waveform.num_subcarriers", int_field(DDOPT_REF(experiment.waveform.num_subcarriers)));
    add("waveform.cp_length", int_field(DDOPT_REF(experiment.waveform.cp_length)));
    add("waveform.num_symbols", int_field(DDOPT_REF(experiment.waveform.num_symbols)));
    add("waveform.active_subcarrier_fraction", real_field(DDOPT_REF(experiment.waveform.active_subcarrier_fraction)));
    add("waveform.modulation",
        {[](RunConfig& c, const Value& v, const std::string& where) {
           if (v.kind != Value::Kind::string || v.s != "qpsk") throw ConfigError(where + ": modulation must be \"qpsk\"");
           c.experiment.waveform.modulation = Modulation::qpsk;
         },
         [](const RunConfig&) { return std::string("\"qpsk\""); }});
    add("waveform.seed", u64_field(DDOPT_REF(experiment.waveform.seed)));
    add("waveform.sample_rate_hz", real_field(DDOPT_REF(experiment.waveform.sample_rate_hz)));

    add("grid.max_delay_seconds", real_field(DDOPT_REF(experiment.grid.max_delay_seconds)));
    add("grid.doppler_min_hz", real_field(DDOPT_REF(experiment.grid.doppler_min_hz)));
    add("grid.doppler_max_hz", real_field(DDOPT_REF(experiment.grid.doppler_max_hz)));
    add("grid.doppler_step_hz", real_field(DDOPT_REF(experiment.grid.doppler_step_hz)));

    add("clutter.count", int_field(DDOPT_REF(experiment.clutter.count)));
    add("clutter.rcs_mean_db", real_field(DDOPT_REF(experiment.clutter.rcs_mean_db)));
    add("clutter.rcs_std_db", real_field(DDOPT_REF(experiment.clutter.rcs_std_db)));
    add("clutter.max_delay_seconds", real_field(DDOPT_REF(experiment.clutter.max_delay_seconds)));

    add("target.doppler_abs_min_hz", real_field(DDOPT_REF(experiment.target.doppler_abs_min_hz)));
    add("target.doppler_abs_max_hz", real_field(DDOPT_REF(experiment.target.doppler_abs_max_hz)));
    add("target.delay_min_s", real_field(DDOPT_REF(experiment.target.delay_min_s)));
    add("target.delay_max_s", real_field(DDOPT_REF(experiment.target.delay_max_s)));
    add("target.snr_mean_db", real_field(DDOPT_REF(experiment.target.snr_mean_db)));
    add("target.snr_std_db", real_field(DDOPT_REF(experiment.target.snr_std_db)));
    add("target.count", int_field(DDOPT_REF(experiment.target.count)));

    add("cfar.guard_delay", int_field(DDOPT_REF(experiment.cfar.guard_delay)));
    add("cfar.guard_doppler", int_field(DDOPT_REF(experiment.cfar.guard_doppler)));
    add("cfar.train_delay", int_field(DDOPT_REF(experiment.cfar.train_delay)));
    add("cfar.train_doppler", int_field(DDOPT_REF(experiment.cfar.train_doppler)));

    add("scoring.exclusion_doppler_cells", int_field(DDOPT_REF(experiment.scoring.exclusion_doppler_cells)));
    add("scoring.exclusion_delay_cells", int_field(DDOPT_REF(experiment.scoring.exclusion_delay_cells)));

    add("experiment.gamma_list", list_field(DDOPT_REF(experiment.gamma_list)));
    add("experiment.pfa_list", list_field(DDOPT_REF(experiment.pfa_list)));
    add("experiment.n_trials", int_field(DDOPT_REF(experiment.n_trials)));
    add("experiment.base_seed", u64_field(DDOPT_REF(experiment.base_seed)));
    add("experiment.pipeline",
        {[](RunConfig& c, const Value& v, const std::string& where) {
           if (v.kind == Value::Kind::string && v.s == "unadapted")
             c.experiment.pipeline = Pipeline::unadapted;
           else if (v.kind == Value::Kind::string && v.s == "adapted")
             c.experiment.pipeline = Pipeline::adapted;
           else if (v.kind == Value::Kind::string && v.s == "both")
             c.experiment.pipeline = Pipeline::both;
           else
             throw ConfigError(where + ": pipeline must be \"unadapted\", \"adapted\" or \"both\"");
         },
         [](const RunConfig& c) { return "\"" + pipeline_name(c.experiment.pipeline) + "\""; }});
    add("experiment.ridge", real_field(DDOPT_REF(experiment.ridge)));
    add("experiment.gram_cache", bool_field(DDOPT_REF(experiment.gram_cache)));
    add("experiment.threads", int_field(DDOPT_REF(experiment.threads)));

    add("output.dir", string_field(DDOPT_REF(output.dir)));
    add("output.dump_surfaces", string_field(DDOPT_REF(output.dump_surfaces)));
#undef DDOPT_REF
    return t;
  }();
  return table;
}

inline const Field* find_field(const std::string& name) {
  for (const auto& [k, f] : fields())
    if (k == name) return &f;
  return nullptr;
}

}  // namespace config_detail

/// Applies `text` on top of `base`. `source` names the input in diagnostics.
inline RunConfig parse_run_config(std::string_view text, RunConfig base = {}, const std::string& source = "<config>") {
  using namespace config_detail;
  std::set<std::string> seen_sections;
  std::set<std::string> seen_keys;
  std::string section;
  std::istringstream is{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    // strip comments outside strings
    bool in_str = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') in_str = !in_str;
      if (raw[i] == '#' && !in_str) {
        cut = i;
        break;
      }
    }
    const std::string_view line = trim(std::string_view(raw).substr(0, cut));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& [k, f] : fields()) known = known || k.starts_with(section + ".");
      if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
      if (!seen_sections.insert(section).second) throw ConfigError(where + ": duplicate section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");
    const std::string full = section + "." + key;
    const Field* f = find_field(full);
    if (!f) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
    if (!seen_keys.insert(full).second) throw ConfigError(where + ": duplicate key '" + full + "'");
    f->set(base, parse_value(line.substr(eq + 1), where + " (" + full + ")"), where + " (" + full + ")");
  }
  return base;
}

inline RunConfig load_run_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base), path);
}

/// Serializes every key; parse_run_config(serialize_run_config(c)) == c.
inline std::string serialize_run_config(const RunConfig& c) {
  std::string out;
  std::string section;
  for (const auto& [name, f] : config_detail::fields()) {
    const auto dot = name.find('.');
    const std::string sec = name.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += name.substr(dot + 1) + " = " + f.get(c) + "\n";
  }
  return out;
}

/// Applies one "section.key=value" override (same typing rules as the file).
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "': expected section.key=value");
  const std::string key(config_detail::trim(std::string_view(assignment).substr(0, eq)));
  const auto* f = config_detail::find_field(key);
  if (!f) throw ConfigError("override '" + assignment + "': unknown key '" + key + "'");
  const std::string where = "override " + key;
  f->set(c, config_detail::parse_value(std::string_view(assignment).substr(eq + 1), where), where);
}

}  // namespace ddopt
