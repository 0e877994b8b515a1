// latticecorr: command-line front end.
//
//   latticecorr simulate   --config FILE --out DIR [--seed S] [--runs R]
//   latticecorr figure6    --config FILE --out DIR [--seed S] [--runs R]
//   latticecorr doublewell [--config FILE] --out DIR [--species NAME] [--time T]
//   latticecorr resolution [--config FILE] [--species NAME] [--time T]
//   latticecorr validate   [--seed S]
//
// Exit status: 0 success, 1 failure (validation or runtime), 2 configuration
// or usage error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "latticecorr/config.hpp"
#include "latticecorr/constants.hpp"
#include "latticecorr/correlations.hpp"
#include "latticecorr/ensemble.hpp"
#include "latticecorr/wavepacket.hpp"
#include "validate_suites.hpp"

namespace fs = std::filesystem;
using namespace latticecorr;

namespace {

struct Options {
  std::string config_path;
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::string> species;
  std::optional<double> flight_time;
};

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::ofstream os(dir / name);
  if (!os) throw Error("cannot write " + (dir / name).string());
  return os;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("--out", 0, "cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

ConfigFile load(const Options& o, bool required) {
  ConfigFile cfg;
  if (!o.config_path.empty()) {
    cfg = parse_config_file(o.config_path);
  } else if (required) {
    throw ConfigError("--config", 0, "a config file is required");
  } else {
    cfg.experiment.master_seed = entropy_seed();
    cfg.figure6 = default_figure6_models(cfg.experiment.lattice, cfg.experiment.model.target_fill);
  }
  if (o.seed) {
    cfg.experiment.master_seed = *o.seed;
    cfg.seed_given = true;
  }
  if (o.runs) {
    if (*o.runs < 1) throw ConfigError("--runs", 0, "runs must be at least 1");
    cfg.experiment.runs = *o.runs;
  }
  if (o.species || o.flight_time) {
    const std::string sp = o.species.value_or(cfg.experiment.species.empty() ? "cesium" : cfg.experiment.species);
    const auto mass = constants::species_mass(sp);
    if (!mass) throw ConfigError("--species", 0, "unknown species '" + sp + "'");
    const double t = o.flight_time.value_or(cfg.experiment.expansion.flight_time);
    if (!(t > 0.0)) throw ConfigError("--time", 0, "flight time must be positive");
    cfg.experiment.expansion = ExpansionParams::from_mass_and_time(*mass, t);
    cfg.experiment.species = sp;
  }
  return cfg;
}

std::vector<std::string> header_for(const ExperimentConfig& c, const std::string& what) {
  std::vector<std::string> h{"latticecorr " + what};
  for (auto& l : describe(c)) h.push_back(std::move(l));
  return h;
}

void write_result_files(const fs::path& dir, const ExperimentConfig& cfg, const ExperimentResult& res,
                        const std::string& prefix) {
  const auto header = header_for(cfg, "simulate");
  {
    auto os = open_output(dir, prefix + "result.json");
    nlohmann::json j;
    j["config"] = header;
    j["master_seed"] = cfg.master_seed;
    j["result"] = to_json(res, cfg.outputs);
    os << j.dump(2) << '\n';
  }
  if (cfg.outputs.raw_profiles) {
    auto os = open_output(dir, prefix + "profile.csv");
    CorrelationProfile p;
    p.g1 = res.mean_g1;
    p.visibility.resize(p.g1.size());
    for (std::size_t i = 0; i < p.g1.size(); ++i) p.visibility[i] = std::abs(p.g1[i]);
    p.g2 = res.mean_g2;
    write_profile_csv(os, p, cfg.basis(), header);
  }
  {
    auto os = open_output(dir, prefix + "distributions.csv");
    write_distributions_csv(os, res, header);
  }
  {
    auto os = open_output(dir, prefix + "shots.txt");
    write_shot_archive(os, cfg.lattice, res.shots, header);
  }
}

int cmd_simulate(const Options& o) {
  const ConfigFile file = load(o, true);
  const ExperimentConfig& cfg = file.experiment;
  const fs::path dir = prepare_dir(o.output_dir);
  const ExperimentResult res = run_experiment(cfg);
  write_result_files(dir, cfg, res, "");
  std::cout << "simulate: N = " << res.n_sites << ", R = " << res.atom_count << ", runs = " << res.runs
            << ", seed = " << cfg.master_seed << '\n';

  const auto* bunched = std::get_if<Bunched>(&cfg.model.kind);
  if (!bunched) return 0;

  // Washout panels: the configured bunched experiment plus its companion
  // with the other seed mode.
  ExperimentConfig fixed = cfg, random = cfg;
  Bunched fb = *bunched, rb = *bunched;
  if (std::holds_alternative<RandomSeed>(bunched->seed)) fb.seed = FixedSeed{cfg.lattice.n_sites / 2};
  rb.seed = RandomSeed{};
  fixed.model.kind = fb;
  random.model.kind = rb;
  const bool configured_fixed = std::holds_alternative<FixedSeed>(bunched->seed);
  (configured_fixed ? random : fixed).master_seed = derive_seed(cfg.master_seed, 0x5500);
  const ExperimentResult other = run_experiment(configured_fixed ? random : fixed);
  const ExperimentResult& rf = configured_fixed ? res : other;
  const ExperimentResult& rr = configured_fixed ? other : res;

  const auto hf = header_for(fixed, "simulate (fixed seed)");
  const auto hr = header_for(random, "simulate (random seed)");
  {
    auto os = open_output(dir, "fig5a.csv");
    write_panel_csv(os, "j", rf.p1_recon, rf.p1_se, rf.p1_truth, hf);
  }
  {
    auto os = open_output(dir, "fig5b.csv");
    write_panel_csv(os, "j", rf.p2_recon, rf.p2_se, rf.p2_truth, hf);
  }
  {
    auto os = open_output(dir, "fig5c.csv");
    write_panel_csv(os, "j", rr.p1_recon, rr.p1_se, rr.p1_truth, hr);
  }
  {
    auto os = open_output(dir, "fig5d.csv");
    write_panel_csv(os, "j", rr.p2_recon, rr.p2_se, rr.p2_truth, hr);
  }
  const auto peak = static_cast<std::size_t>(
      std::max_element(rf.p1_recon.begin(), rf.p1_recon.end()) - rf.p1_recon.begin());
  const auto u = uniformity_test(rr.shots);
  const auto cmp = compare_distributions(rf.p2_recon, rr.p2_recon);
  {
    auto os = open_output(dir, "washout.json");
    nlohmann::json j;
    j["config_fixed"] = hf;
    j["config_random"] = hr;
    j["fixed_seed_p1_peak"] = peak;
    j["random_seed_uniformity"] = {{"t_squared", u.statistic}, {"dof", u.dof}, {"p_value", u.p_value}};
    j["p2_comparison"] = {{"l1", cmp.l1}, {"cosine_similarity", cmp.cosine_similarity}, {"max_abs", cmp.max_abs}};
    os << j.dump(2) << '\n';
  }
  std::cout << "washout: fixed-seed p1 peak at site " << peak << ", random-seed uniformity p = " << u.p_value
            << ", p2 cosine similarity = " << cmp.cosine_similarity << '\n';
  return 0;
}

int cmd_figure6(const Options& o) {
  const ConfigFile file = load(o, true);
  const ExperimentConfig& cfg = file.experiment;
  const fs::path dir = prepare_dir(o.output_dir);
  const auto results = figure6_suite(cfg, file.figure6);
  const std::pair<ModelKind, const char*> panels[] = {{ModelKind::Random, "fig6a.csv"},
                                                      {ModelKind::Bunched, "fig6b.csv"},
                                                      {ModelKind::AntiBunched, "fig6c.csv"},
                                                      {ModelKind::SuperLattice, "fig6d.csv"}};
  nlohmann::json summary;
  summary["config"] = header_for(cfg, "figure6");
  summary["master_seed"] = cfg.master_seed;
  const auto baseline = triangle_baseline(cfg.lattice.n_sites);
  for (const auto& [kind, name] : panels) {
    const ExperimentResult& r = results.at(kind);
    ExperimentConfig sub = cfg;
    sub.model = kind == ModelKind::Random        ? file.figure6.random
                : kind == ModelKind::Bunched     ? file.figure6.bunched
                : kind == ModelKind::AntiBunched ? file.figure6.antibunched
                                                 : file.figure6.superlattice;
    sub.master_seed = figure6_seed(cfg.master_seed, kind);
    auto os = open_output(dir, name);
    write_panel_csv(os, "j", r.p2_recon, r.p2_se, r.p2_truth, header_for(sub, std::string("figure6 ") + to_string(kind)));
    nlohmann::json entry = to_json(r, cfg.outputs);
    entry["derived_seed"] = sub.master_seed;
    entry["vs_triangle_baseline"] = {
        {"l1", compare_distributions(r.p2_recon, baseline).l1},
        {"cosine_similarity", compare_distributions(r.p2_recon, baseline).cosine_similarity}};
    summary["models"][to_string(kind)] = entry;
    std::cout << name << ": " << to_string(kind) << ", R = " << r.atom_count << ", runs = " << r.runs << '\n';
  }
  auto os = open_output(dir, "figure6.json");
  os << summary.dump(2) << '\n';
  return 0;
}

int cmd_doublewell(const Options& o) {
  const ConfigFile file = load(o, false);
  const ExperimentConfig& cfg = file.experiment;
  const DoubleWellSettings& dw = file.doublewell;
  const fs::path dir = prepare_dir(o.output_dir);
  const ExpansionParams& params = cfg.expansion;
  const double sigma = params.envelope_width(dw.packet_width);
  const DetectionGrid grid = DetectionGrid::symmetric(8.0 * sigma, dw.samples, params.l_squared);

  std::vector<std::string> header = header_for(cfg, "doublewell");
  header.push_back("doublewell.packet_width = " + format_number(dw.packet_width));
  header.push_back("doublewell.well_separation = " + format_number(dw.well_separation));
  header.push_back("doublewell.contrast = " + format_number(dw.contrast));
  header.push_back("doublewell.phase = " + format_number(dw.phase));
  header.push_back("doublewell.samples = " + std::to_string(dw.samples));

  const auto state = DoubleWellState::from_contrast(dw.contrast, dw.phase, dw.well_separation, dw.packet_width);
  const auto density = double_well_density(state, params, grid);
  {
    auto os = open_output(dir, "doublewell.csv");
    write_density_csv(os, grid, density, header);
  }
  const FringeFit fit = extract_fringe_params(density, grid, params, dw.well_separation);

  // Contrast sweep at the configured phase.
  nlohmann::json sweep = nlohmann::json::array();
  double worst = 0.0;
  for (int i = 0; i <= 19; ++i) {
    const double c = 0.05 + 0.05 * i;
    const auto st = DoubleWellState::from_contrast(c, dw.phase, dw.well_separation, dw.packet_width);
    const auto f = extract_fringe_params(double_well_density(st, params, grid), grid, params, dw.well_separation);
    double dphi = 0.0;
    if (f.phase) dphi = std::remainder(*f.phase - dw.phase, 2.0 * constants::pi);
    worst = std::max({worst, std::abs(f.contrast - c), std::abs(dphi)});
    sweep.push_back({{"contrast", c}, {"recovered_contrast", f.contrast}, {"recovered_phase", f.phase ? *f.phase : NAN}});
  }
  nlohmann::json j;
  j["config"] = header;
  j["fringe_spacing_m"] = fringe_spacing(state, params);
  j["envelope_width_m"] = sigma;
  j["far_field_ratio"] = dw.well_separation * dw.well_separation / params.l_squared;
  j["fit"] = {{"contrast", fit.contrast},
              {"phase", fit.phase ? nlohmann::json(*fit.phase) : nlohmann::json(nullptr)},
              {"envelope_center_m", fit.envelope_center},
              {"envelope_width_m", fit.envelope_width},
              {"relative_rms_residual", fit.rms_residual}};
  j["sweep"] = sweep;
  j["sweep_max_error"] = worst;
  auto os = open_output(dir, "doublewell.json");
  os << j.dump(2) << '\n';
  std::cout << "doublewell: contrast " << fit.contrast << " (set " << dw.contrast << "), phase "
            << (fit.phase ? std::to_string(*fit.phase) : std::string("undefined")) << " (set " << dw.phase
            << "), sweep max error " << worst << '\n';
  return 0;
}

int cmd_resolution(const Options& o) {
  const ConfigFile file = load(o, false);
  const ExperimentConfig& cfg = file.experiment;
  const auto fig = resolution_figures(cfg.lattice, file.doublewell.packet_width, cfg.expansion);
  char line[160];
  std::snprintf(line, sizeof line, "Λ = %.1f mm, σ = %.1f mm", fig.coincidence_period * 1e3,
                fig.envelope_width * 1e3);
  std::cout << line << '\n';
  std::cout << "species " << (cfg.species.empty() ? "(mass given)" : cfg.species) << ", t = "
            << cfg.expansion.flight_time << " s, w' = " << cfg.lattice.lattice_const
            << " m, sigma' = " << file.doublewell.packet_width << " m, L^2 = " << cfg.expansion.l_squared
            << " m^2\n";
  return 0;
}

int cmd_validate(const Options& o) {
  const std::uint64_t seed = o.seed.value_or(20240611);
  std::vector<tools::SuiteResult> results;
  results.push_back(tools::timed([] { return tools::oracle_suite(); }));
  results.push_back(tools::timed([] { return tools::roundtrip_suite(); }));
  results.push_back(tools::timed([&] { return tools::siegert_suite(seed); }));
  results.push_back(tools::timed([&] { return tools::washout_suite(seed); }));
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.passed;
    std::printf("%s  %-58s %s (%.2f s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
  }
  std::printf("%s\n", ok ? "all suites passed" : "validation FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-of-flight correlation diagnostics for atoms in 1D optical lattices"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  std::size_t runs = 0;
  std::string species;
  double flight_time = 0.0;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config_path, "Experiment config file");
    if (config_required) c->required();
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
  };
  auto* simulate = app.add_subcommand("simulate", "Run one ensemble experiment");
  add_common(simulate, true);
  simulate->add_option("--out", o.output_dir, "Output directory");
  simulate->add_option("--runs", runs, "Number of runs (overrides the config)");
  auto* figure6 = app.add_subcommand("figure6", "Run the four-model pair-distribution suite");
  add_common(figure6, true);
  figure6->add_option("--out", o.output_dir, "Output directory");
  figure6->add_option("--runs", runs, "Number of runs (overrides the config)");
  auto* doublewell = app.add_subcommand("doublewell", "Synthesize and invert double-well fringes");
  add_common(doublewell, false);
  doublewell->add_option("--out", o.output_dir, "Output directory");
  auto* resolution = app.add_subcommand("resolution", "Print coincidence period and envelope width");
  add_common(resolution, false);
  for (auto* sub : {doublewell, resolution}) {
    sub->add_option("--species", species, "Atomic species (cesium, rubidium87, sodium, neon, helium)");
    sub->add_option("--time", flight_time, "Flight time in seconds");
  }
  auto* validate = app.add_subcommand("validate", "Run the self-check suites");
  validate->add_option("--seed", seed, "Master seed for the Monte Carlo suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) o.seed = seed;
    if (sub->get_option_no_throw("--runs") && sub->count("--runs")) o.runs = runs;
    if (sub->get_option_no_throw("--species") && sub->count("--species")) o.species = species;
    if (sub->get_option_no_throw("--time") && sub->count("--time")) o.flight_time = flight_time;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*figure6) return cmd_figure6(o);
    if (*doublewell) return cmd_doublewell(o);
    if (*resolution) return cmd_resolution(o);
    if (*validate) return cmd_validate(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
