#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "islt/geometry.hpp"
#include "islt/mollify.hpp"
#include "islt/simulate.hpp"
#include "islt/variational.hpp"

namespace islt {

// Catalog entry: constant, sine (product of sine modes), gaussian, signed_bump
// (a positive and a negative gaussian mirrored through the domain center along x).
struct TestFunctionSpec {
  std::string kind = "sine";
  double amplitude = 1.0;
  std::array<int, 3> mode{1, 1, 1};
  Point center{0.5, 0.5, 0.5};
  double width = 0.15;
};

GridField make_test_function(const TestFunctionSpec& spec, const GridPtr& grid);

struct MinimizeSection {
  std::string functional = "dv";   // dv | I | J | theta | chi
  int p = 2;
  CompactSubset U{{0.25, 0.25, 0.25}, {0.75, 0.75, 0.75}};
  std::vector<double> b;           // empty: all ones
  FlowOptions flow;
};

struct CountingSection {
  int k = 6;
  int p = 2;
  int R = 2;
};

// Resolved run configuration shared by every subcommand; all defaults are materialized.
struct ExperimentConfig {
  std::string experiment = "gartner_ellis";
  DomainSpec domain = DomainSpec::unit_box(2, 1);
  int n = 64;
  PathConfig path;
  MollifierSpec mollifier;
  std::vector<TestFunctionSpec> test_functions{TestFunctionSpec{}};
  std::vector<double> t_ladder{0.5};
  std::vector<double> eps_ladder{0.1};
  std::vector<double> delta_ladder{0.05};
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  int modes = 0;                   // spectral basis size; 0 selects the default
  int fine_n = 0;                  // semigroup grid for exact moments
  MinimizeSection minimize;
  CountingSection counting;

  // Throws ValidationError: ladders nonempty and sorted, sizes positive.
  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);   // canonical, pretty-printed
std::string config_hash(const ExperimentConfig& cfg);        // hex of the canonical form

}  // namespace islt
