#pragma once

// Experiment configuration files: sectioned `key = value` text.
//
//   [lattice]      n_sites*, fill_factor*, lattice_const, statistics
//   [model]        kind*, plus per kind:
//                    bunched       tau, seed (fixed|random), seed_site
//                    antibunched   min_gap
//                    superlattice  period, envelope_width
//   [experiment]   runs, master_seed, workers, outputs
//   [expansion]    species | mass, flight_time
//   [figure6]      bunched_tau, bunched_seed_site, min_gap, period, envelope_width
//   [doublewell]   packet_width, well_separation, contrast, phase, samples
//
// `*` marks required keys. Lengths are in meters, times in seconds. `#`
// starts a comment. Unknown keys, keys that do not apply to the chosen
// model kind and repeated keys are errors.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "latticecorr/constants.hpp"
#include "latticecorr/ensemble.hpp"
#include "latticecorr/error.hpp"
#include "latticecorr/wavepacket.hpp"

namespace latticecorr {

struct DoubleWellSettings {
  double packet_width = 30e-9;      // sigma'
  double well_separation = 0.5e-6;  // delta xi'
  double contrast = 1.0;
  double phase = 0.0;
  std::size_t samples = 4096;  // detection-plane points over +-8 sigma
};

struct ConfigFile {
  ExperimentConfig experiment;
  bool seed_given = false;
  Figure6Models figure6;
  DoubleWellSettings doublewell;
};

namespace detail {

struct ConfigEntry {
  std::string value;
  std::size_t line = 0;
  bool used = false;
};

class ConfigTable {
 public:
  explicit ConfigTable(std::istream& is) {
    std::string raw, section;
    std::size_t line_no = 0;
    while (std::getline(is, raw)) {
      ++line_no;
      std::string line = raw.substr(0, raw.find('#'));
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("", line_no, "malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        if (!known_section(section)) throw ConfigError(section, line_no, "unknown section");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("", line_no, "expected key = value");
      if (section.empty()) throw ConfigError(trim(line.substr(0, eq)), line_no, "key outside a section");
      const std::string key = section + "." + trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (value.empty()) throw ConfigError(key, line_no, "empty value");
      if (entries_.contains(key)) throw ConfigError(key, line_no, "repeated key");
      entries_[key] = {value, line_no, false};
    }
  }

  bool has(const std::string& key) const { return entries_.contains(key); }
  std::size_t line(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

  std::optional<std::string> text(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    it->second.used = true;
    return it->second.value;
  }

  std::optional<double> number(const std::string& key) {
    const auto v = text(key);
    if (!v) return std::nullopt;
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size() || !std::isfinite(out))
      throw ConfigError(key, line(key), "invalid number '" + *v + "'");
    return out;
  }

  std::optional<std::uint64_t> integer(const std::string& key) {
    const auto v = text(key);
    if (!v) return std::nullopt;
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
      throw ConfigError(key, line(key), "invalid non-negative integer '" + *v + "'");
    return out;
  }

  void reject_unused() const {
    for (const auto& [key, e] : entries_)
      if (!e.used) throw ConfigError(key, e.line, "unknown key or key not valid here");
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static bool known_section(const std::string& s) {
    return s == "lattice" || s == "model" || s == "experiment" || s == "expansion" || s == "figure6" ||
           s == "doublewell";
  }

  std::map<std::string, ConfigEntry> entries_;
};

template <class T>
T require(const std::optional<T>& v, const std::string& key) {
  if (!v) throw ConfigError(key, 0, "missing required key");
  return *v;
}

}  // namespace detail

inline ConfigFile parse_config_stream(std::istream& is) {
  detail::ConfigTable t(is);
  ConfigFile cfg;
  ExperimentConfig& ex = cfg.experiment;

  // [lattice]
  const auto n_sites = detail::require(t.integer("lattice.n_sites"), "lattice.n_sites");
  if (n_sites < 2) throw ConfigError("lattice.n_sites", t.line("lattice.n_sites"), "n_sites must be at least 2");
  ex.lattice.n_sites = static_cast<std::size_t>(n_sites);
  const double fill = detail::require(t.number("lattice.fill_factor"), "lattice.fill_factor");
  if (!(fill >= 0.0 && fill <= 1.0))
    throw ConfigError("lattice.fill_factor", t.line("lattice.fill_factor"), "fill_factor out of range");
  ex.lattice.fill_factor = fill;
  if (const auto w = t.number("lattice.lattice_const")) {
    if (!(*w > 0.0)) throw ConfigError("lattice.lattice_const", t.line("lattice.lattice_const"), "lattice_const must be positive");
    ex.lattice.lattice_const = *w;
  }
  if (const auto s = t.text("lattice.statistics")) {
    if (*s == "boson") ex.lattice.statistics = Statistics::Boson;
    else if (*s == "fermion") ex.lattice.statistics = Statistics::Fermion;
    else throw ConfigError("lattice.statistics", t.line("lattice.statistics"), "statistics must be boson or fermion");
  }
  const double w = ex.lattice.lattice_const;
  const std::size_t n = ex.lattice.n_sites;

  // [model]
  const std::string kind = detail::require(t.text("model.kind"), "model.kind");
  ex.model.target_fill = fill;
  if (kind == "random") {
    ex.model.kind = RandomFill{};
  } else if (kind == "bunched") {
    Bunched b;
    b.tau = t.number("model.tau").value_or(8.0 * w);
    if (!(b.tau > 0.0)) throw ConfigError("model.tau", t.line("model.tau"), "tau must be positive");
    const std::string seed = t.text("model.seed").value_or("fixed");
    if (seed == "fixed") {
      const auto site = t.integer("model.seed_site").value_or(n / 2);
      if (site >= n) throw ConfigError("model.seed_site", t.line("model.seed_site"), "seed_site outside the lattice");
      b.seed = FixedSeed{static_cast<std::size_t>(site)};
    } else if (seed == "random") {
      b.seed = RandomSeed{};
    } else {
      throw ConfigError("model.seed", t.line("model.seed"), "seed must be fixed or random");
    }
    ex.model.kind = b;
  } else if (kind == "antibunched") {
    const auto gap = t.integer("model.min_gap").value_or(4);
    if (gap < 1) throw ConfigError("model.min_gap", t.line("model.min_gap"), "min_gap must be at least 1");
    ex.model.kind = AntiBunched{static_cast<std::size_t>(gap)};
  } else if (kind == "superlattice") {
    SuperLattice s;
    s.period = static_cast<std::size_t>(t.integer("model.period").value_or(4));
    s.envelope_width = t.number("model.envelope_width").value_or(48.0 * w);
    ex.model.kind = s;
  } else {
    throw ConfigError("model.kind", t.line("model.kind"),
                      "kind must be random, bunched, antibunched or superlattice");
  }

  // [experiment]
  if (const auto r = t.integer("experiment.runs")) {
    if (*r < 1) throw ConfigError("experiment.runs", t.line("experiment.runs"), "runs must be at least 1");
    ex.runs = static_cast<std::size_t>(*r);
  }
  if (const auto s = t.integer("experiment.master_seed")) {
    ex.master_seed = *s;
    cfg.seed_given = true;
  } else {
    ex.master_seed = entropy_seed();
  }
  if (const auto wk = t.integer("experiment.workers")) ex.workers = static_cast<std::size_t>(*wk);
  if (const auto o = t.text("experiment.outputs")) {
    OutputSelection sel{false, false, false, false};
    std::istringstream ss(*o);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
      if (item == "p1_recon") sel.p1_recon = true;
      else if (item == "p2_recon") sel.p2_recon = true;
      else if (item == "raw_profiles") sel.raw_profiles = true;
      else if (item == "ground_truth") sel.ground_truth = true;
      else throw ConfigError("experiment.outputs", t.line("experiment.outputs"), "unknown output '" + item + "'");
    }
    ex.outputs = sel;
  }

  // [expansion]
  const double flight_time = t.number("expansion.flight_time").value_or(1.0);
  if (!(flight_time > 0.0))
    throw ConfigError("expansion.flight_time", t.line("expansion.flight_time"), "flight_time must be positive");
  const auto species = t.text("expansion.species");
  const auto mass = t.number("expansion.mass");
  if (species && mass) throw ConfigError("expansion.mass", t.line("expansion.mass"), "give species or mass, not both");
  if (mass) {
    if (!(*mass > 0.0)) throw ConfigError("expansion.mass", t.line("expansion.mass"), "mass must be positive");
    ex.expansion = ExpansionParams::from_mass_and_time(*mass, flight_time);
    ex.species.clear();
  } else {
    const std::string sp = species.value_or("cesium");
    const auto m = constants::species_mass(sp);
    if (!m) throw ConfigError("expansion.species", t.line("expansion.species"), "unknown species '" + sp + "'");
    ex.expansion = ExpansionParams::from_mass_and_time(*m, flight_time);
    ex.species = sp;
  }

  // [figure6]
  cfg.figure6 = default_figure6_models(ex.lattice, fill);
  if (const auto v = t.number("figure6.bunched_tau")) std::get<Bunched>(cfg.figure6.bunched.kind).tau = *v;
  if (const auto v = t.integer("figure6.bunched_seed_site"))
    std::get<Bunched>(cfg.figure6.bunched.kind).seed = FixedSeed{static_cast<std::size_t>(*v)};
  if (const auto v = t.integer("figure6.min_gap"))
    std::get<AntiBunched>(cfg.figure6.antibunched.kind).min_gap = static_cast<std::size_t>(*v);
  if (const auto v = t.integer("figure6.period"))
    std::get<SuperLattice>(cfg.figure6.superlattice.kind).period = static_cast<std::size_t>(*v);
  if (const auto v = t.number("figure6.envelope_width"))
    std::get<SuperLattice>(cfg.figure6.superlattice.kind).envelope_width = *v;

  // [doublewell]
  auto& dw = cfg.doublewell;
  if (const auto v = t.number("doublewell.packet_width")) dw.packet_width = *v;
  if (const auto v = t.number("doublewell.well_separation")) dw.well_separation = *v;
  if (const auto v = t.number("doublewell.contrast")) {
    if (!(*v >= 0.0 && *v <= 1.0))
      throw ConfigError("doublewell.contrast", t.line("doublewell.contrast"), "contrast out of range");
    dw.contrast = *v;
  }
  if (const auto v = t.number("doublewell.phase")) dw.phase = *v;
  if (const auto v = t.integer("doublewell.samples")) dw.samples = static_cast<std::size_t>(*v);
  if (!(dw.packet_width > 0.0) || !(dw.well_separation > 0.0) || dw.samples < 16)
    throw ConfigError("doublewell", 0, "packet_width and well_separation must be positive, samples >= 16");

  t.reject_unused();

  try {
    ex.validate();
    for (const auto* m : {&cfg.figure6.random, &cfg.figure6.bunched, &cfg.figure6.antibunched,
                          &cfg.figure6.superlattice})
      m->validate(ex.lattice);
  } catch (const Error& e) {
    throw ConfigError("", 0, e.what());
  }
  return cfg;
}

inline ConfigFile parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("", 0, "cannot read config file '" + path + "'");
  return parse_config_stream(is);
}

inline ExperimentConfig parse_config(const std::string& path) { return parse_config_file(path).experiment; }

// --- resolved-configuration description -------------------------------------------

// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::vector<std::string> describe_model(const DistributionModel& m, const std::string& prefix) {
  std::vector<std::string> out;
  out.push_back(prefix + "kind = " + to_string(m.model_kind()));
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Bunched>) {
          out.push_back(prefix + "tau = " + format_number(k.tau));
          if (const auto* f = std::get_if<FixedSeed>(&k.seed)) {
            out.push_back(prefix + "seed = fixed");
            out.push_back(prefix + "seed_site = " + std::to_string(f->site));
          } else {
            out.push_back(prefix + "seed = random");
          }
        } else if constexpr (std::is_same_v<K, AntiBunched>) {
          out.push_back(prefix + "min_gap = " + std::to_string(k.min_gap));
        } else if constexpr (std::is_same_v<K, SuperLattice>) {
          out.push_back(prefix + "period = " + std::to_string(k.period));
          out.push_back(prefix + "envelope_width = " + format_number(k.envelope_width));
        }
      },
      m.kind);
  return out;
}

// One `section.key = value` line per resolved setting, including defaults
// and the master seed, so a run can be repeated from its outputs alone.
inline std::vector<std::string> describe(const ExperimentConfig& c) {
  std::vector<std::string> out;
  out.push_back("lattice.n_sites = " + std::to_string(c.lattice.n_sites));
  out.push_back("lattice.lattice_const = " + format_number(c.lattice.lattice_const));
  out.push_back("lattice.fill_factor = " + format_number(c.lattice.fill_factor));
  out.push_back(std::string("lattice.statistics = ") + to_string(c.lattice.statistics));
  for (auto& l : describe_model(c.model, "model.")) out.push_back(std::move(l));
  out.push_back("experiment.runs = " + std::to_string(c.runs));
  out.push_back("experiment.master_seed = " + std::to_string(c.master_seed));
  std::string outputs;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!outputs.empty()) outputs += ", ";
    outputs += name;
  };
  add(c.outputs.p1_recon, "p1_recon");
  add(c.outputs.p2_recon, "p2_recon");
  add(c.outputs.raw_profiles, "raw_profiles");
  add(c.outputs.ground_truth, "ground_truth");
  out.push_back("experiment.outputs = " + outputs);
  if (!c.species.empty()) out.push_back("expansion.species = " + c.species);
  else out.push_back("expansion.mass = " + format_number(c.expansion.mass));
  out.push_back("expansion.flight_time = " + format_number(c.expansion.flight_time));
  out.push_back("derived.l_squared = " + format_number(c.expansion.l_squared));
  out.push_back("derived.atoms_per_shot = " + std::to_string(c.model.atoms_per_shot(c.lattice.n_sites)));
  return out;
}

}  // namespace latticecorr
