#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "latticecorr/config.hpp"

using namespace latticecorr;

namespace {

ConfigFile parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config_stream(is);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* base = R"(# 256 sites at 10 % filling
[lattice]
n_sites = 256
fill_factor = 0.10

[model]
kind = random

[experiment]
runs = 500
master_seed = 42
)";

}  // namespace

TEST(Config, ParsesReferenceExperiment) {
  const auto cfg = parse(base);
  const auto& ex = cfg.experiment;
  EXPECT_EQ(ex.lattice.n_sites, 256u);
  EXPECT_DOUBLE_EQ(ex.lattice.fill_factor, 0.10);
  EXPECT_DOUBLE_EQ(ex.lattice.lattice_const, 0.5e-6);
  EXPECT_EQ(ex.lattice.statistics, Statistics::Boson);
  EXPECT_EQ(ex.runs, 500u);
  EXPECT_EQ(ex.master_seed, 42u);
  EXPECT_TRUE(cfg.seed_given);
  EXPECT_EQ(ex.model.atoms_per_shot(256), 25u);
  EXPECT_TRUE(std::holds_alternative<RandomFill>(ex.model.kind));
  EXPECT_EQ(ex.species, "cesium");
  EXPECT_NEAR(ex.expansion.l_squared, 3.0024e-9, 1e-12);
}

TEST(Config, RunsDefaultTo500) {
  const auto cfg = parse("[lattice]\nn_sites = 64\nfill_factor = 0.1\n[model]\nkind = random\n");
  EXPECT_EQ(cfg.experiment.runs, 500u);
  EXPECT_FALSE(cfg.seed_given);
}

TEST(Config, FillOutOfRange) {
  const std::string msg = error_of("[lattice]\nn_sites = 256\nfill_factor = 1.5\n[model]\nkind = random\n");
  EXPECT_NE(msg.find("fill_factor out of range"), std::string::npos) << msg;
  EXPECT_NE(msg.find("lattice.fill_factor"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
  const std::string msg = error_of(std::string(base) + "\n[model]\nwidth = 3\n");
  EXPECT_NE(msg.find("model.width"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 14"), std::string::npos) << msg;
  const std::string wrong_kind = error_of(std::string(base) + "[model]\nmin_gap = 3\n");
  EXPECT_NE(wrong_kind.find("model.min_gap"), std::string::npos) << wrong_kind;
  EXPECT_NE(error_of(std::string(base) + "[nonsense]\n").find("nonsense"), std::string::npos);
}

TEST(Config, MissingRequiredKey) {
  const std::string msg = error_of("[lattice]\nn_sites = 64\n[model]\nkind = random\n");
  EXPECT_NE(msg.find("missing required key"), std::string::npos) << msg;
  EXPECT_NE(msg.find("lattice.fill_factor"), std::string::npos) << msg;
  EXPECT_NE(error_of("[lattice]\nn_sites = 64\nfill_factor = 0.1\n").find("model.kind"), std::string::npos);
}

TEST(Config, InvalidValues) {
  EXPECT_NE(error_of("[lattice]\nn_sites = many\nfill_factor = 0.1\n[model]\nkind = random\n").find("lattice.n_sites"),
            std::string::npos);
  EXPECT_NE(error_of("[lattice]\nn_sites = 64\nfill_factor = 0.1x\n[model]\nkind = random\n").find("fill_factor"),
            std::string::npos);
  EXPECT_NE(error_of(std::string(base) + "[expansion]\nspecies = unobtanium\n").find("expansion.species"),
            std::string::npos);
  EXPECT_NE(error_of("[lattice]\nn_sites = 64\nfill_factor = 0.1\n[model]\nkind = clumped\n").find("model.kind"),
            std::string::npos);
  EXPECT_NE(error_of("[lattice]\nn_sites = 64\nfill_factor = 0.5\n[model]\nkind = antibunched\nmin_gap = 5\n")
                .find("anti-bunched"),
            std::string::npos);
}

TEST(Config, RepeatedKeyRejected) {
  const std::string msg = error_of(std::string(base) + "[experiment]\nruns = 7\n");
  EXPECT_NE(msg.find("experiment.runs"), std::string::npos) << msg;
}

TEST(Config, BunchedDefaults) {
  const auto cfg = parse("[lattice]\nn_sites = 128\nfill_factor = 0.1\nlattice_const = 1e-6\n[model]\nkind = bunched\n");
  const auto& b = std::get<Bunched>(cfg.experiment.model.kind);
  EXPECT_DOUBLE_EQ(b.tau, 8e-6);
  ASSERT_TRUE(std::holds_alternative<FixedSeed>(b.seed));
  EXPECT_EQ(std::get<FixedSeed>(b.seed).site, 64u);
  const auto r = parse("[lattice]\nn_sites = 128\nfill_factor = 0.1\n[model]\nkind = bunched\nseed = random\ntau = 2e-6\n");
  EXPECT_TRUE(std::holds_alternative<RandomSeed>(std::get<Bunched>(r.experiment.model.kind).seed));
  EXPECT_DOUBLE_EQ(std::get<Bunched>(r.experiment.model.kind).tau, 2e-6);
}

TEST(Config, ExpansionAndOutputs) {
  const auto cfg = parse(std::string(base) +
                         "outputs = p2_recon, ground_truth\n[expansion]\nmass = 1e-25\nflight_time = 0.5\n"
                         "[lattice]\nstatistics = fermion\n");
  const auto& ex = cfg.experiment;
  EXPECT_TRUE(ex.species.empty());
  EXPECT_NEAR(ex.expansion.l_squared, constants::planck_h * 0.5 / 1e-25, 1e-20);
  EXPECT_FALSE(ex.outputs.p1_recon);
  EXPECT_TRUE(ex.outputs.p2_recon);
  EXPECT_FALSE(ex.outputs.raw_profiles);
  EXPECT_TRUE(ex.outputs.ground_truth);
  EXPECT_EQ(ex.lattice.statistics, Statistics::Fermion);
  EXPECT_NE(error_of(std::string(base) + "[expansion]\nmass = 1e-25\nspecies = cesium\n").find("not both"),
            std::string::npos);
}

// The resolved description, regrouped into sections, parses back to the same config.
TEST(Config, DescribeIsReparseable) {
  for (const std::string model : {"kind = random\n", "kind = bunched\nseed = random\n",
                                  "kind = antibunched\nmin_gap = 3\n", "kind = superlattice\nperiod = 8\n"}) {
    const auto cfg = parse("[lattice]\nn_sites = 200\nfill_factor = 0.07\n[model]\n" + model +
                           "[experiment]\nmaster_seed = 42\n[expansion]\nspecies = rubidium87\nflight_time = 0.3\n");
    std::string text, section;
    for (const auto& l : describe(cfg.experiment)) {
      const auto dot = l.find('.');
      const std::string sec = l.substr(0, dot);
      if (sec == "derived") continue;
      if (sec != section) text += "[" + (section = sec) + "]\n";
      text += l.substr(dot + 1) + "\n";
    }
    const auto again = parse(text);
    EXPECT_EQ(describe(again.experiment), describe(cfg.experiment)) << text;
    EXPECT_NE(text.find("fill_factor = 0.07\n"), std::string::npos) << text;
    EXPECT_NE(text.find("master_seed = 42\n"), std::string::npos) << text;
  }
}

TEST(Config, FileErrors) {
  EXPECT_THROW(parse_config("/nonexistent/latticecorr.cfg"), ConfigError);
}
