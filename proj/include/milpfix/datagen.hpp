// SPDX-License-Identifier: Apache-2.0
//
// Synthetic temporal datasets for six binary MILP families. Every series
// owns a process state that evolves over t; instances are emitted in
// standard form (minimize, ≤ rows, equalities split).
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "milpfix/milp.hpp"
#include "milpfix/oracle.hpp"

namespace milpfix {

enum class Family { Routing, FacilityLocation, Tsp, RevenueMax, EnergyGrid, Caching };

std::string_view to_string(Family family);
/// Accepts "routing", "facility-loc", "tsp", "revenue-max", "energy-grid",
/// "caching"; anything else is a ConfigError.
Family family_from_string(std::string_view name);

struct RoutingParams {
  Index nodes = 6;
  Index edges = 9;
  Index commodities = 4;
  Index installments = 1;
  Index min_paths = 2;
  Index max_paths = 3;
  double demand_low = 0.5;
  double demand_high = 1.5;
  double diurnal_amplitude = 0.5;
  double diurnal_period = 96.0;  // 15-minute steps per day
  double demand_noise = 0.05;
  double capacity_low = 1.0;
  double capacity_high = 2.0;
  double install_cost_low = 1.0;
  double install_cost_high = 3.0;
  double install_capacity_low = 2.0;
  double install_capacity_high = 5.0;
};

struct FacilityParams {
  Index facilities = 3;
  Index clients = 5;
  double eigen_low = 0.98;
  double eigen_high = 0.999;
  double period1 = 20.0;
  double period2 = 70.0;
  double amp1_low = 1.0;
  double amp1_high = 5.0;
  double amp2_low = 2.0;
  double amp2_high = 10.0;
  double noise = 1.0;
  double initial_demand = 10.0;
  /// Opening costs are U(low, high) times the mean assignment cost of the
  /// current step, resampled per instance.
  double open_cost_low = 0.5;
  double open_cost_high = 2.0;
};

struct TspParams {
  Index cities = 5;
  /// Walk increments are U(walk_low, walk_high) times the initial mean arc cost.
  double walk_low = -0.05;
  double walk_high = 0.05;
};

struct RevenueParams {
  Index items = 12;
  Index rows = 3;
  double density = 0.5;
  double revenue_low = 1.0;
  double revenue_high = 10.0;
  double capacity_fraction_low = 0.3;
  double capacity_fraction_high = 0.6;
  double period1 = 20.0;
  double period2 = 70.0;
  double amp1_high = 0.5;
  double amp2_high = 0.5;
  double revenue_noise = 0.2;
  double capacity_noise = 0.05;  // times the mean initial capacity
};

struct EnergyParams {
  Index prosumers = 4;
  Index primary = 3;
  Index secondary = 6;
  double price_low = 1.0;
  double price_high = 5.0;
  double period = 20.0;
  double amp_high = 0.5;
  double price_noise = 0.1;
  double capacity_low = 0.6;
  double capacity_high = 1.2;
  double capacity_noise = 0.02;
  double battery_cost_low = 0.2;
  double battery_cost_high = 1.0;
  double relief_density = 0.5;
  double relief_low = 0.1;
  double relief_high = 0.5;
  /// Box on every prosumer transfer.
  double transfer_low = -1.0;
  double transfer_high = 2.0;
};

struct CachingParams {
  Index items = 30;
  Index size_low = 1;
  Index size_high = 10;
  double capacity_fraction = 0.3;
  double zipf_exponent = 1.0;
  Index rotation_period = 10;  // timesteps between one-rank shifts
  double popularity_noise = 0.05;
};

struct GeneratorSpec {
  Family family = Family::Caching;
  Index train_series = 8;
  Index val_series = 2;
  Index test_series = 2;
  Index timesteps = 10;
  std::uint64_t seed = 0;
  /// Instances above this many binaries raise SizeExceedsOracle unless they
  /// are integral knapsacks.
  Index max_binaries = 22;
  RoutingParams routing;
  FacilityParams facility;
  TspParams tsp;
  RevenueParams revenue;
  EnergyParams energy;
  CachingParams caching;

  void validate() const;
};

nlohmann::json to_json(const GeneratorSpec& spec);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);

enum class Split { Train, Validation, Test };
std::string_view to_string(Split split);

struct Dataset {
  std::vector<InstanceSeries> train;
  std::vector<InstanceSeries> validation;
  std::vector<InstanceSeries> test;
};

/// Series `index` of `split`, seeded from (spec.seed, split, index) only.
InstanceSeries generate_series(const GeneratorSpec& spec, Split split, Index index);
std::vector<InstanceSeries> generate_split(const GeneratorSpec& spec, Split split);
Dataset generate_dataset(const GeneratorSpec& spec);

// Single-instance builders shared by the generators.

/// Paths are edge index lists; `demand` per commodity.
MilpWithEqualities routing_instance(const std::vector<std::vector<std::vector<Index>>>& paths,
                                    const std::vector<Vector>& path_costs, const Vector& demand,
                                    const Vector& edge_capacity, const Vector& install_cost,
                                    const Vector& install_capacity, Index num_edges);
/// cost(j, i) per client j and facility i.
MilpWithEqualities facility_instance(const Matrix& cost, const Vector& demand, const Vector& open_cost);
/// Arc variables (i, j), i ≠ j, in row-major order; subtour rows for every
/// subset of size 2 … N−1 in increasing bitmask order.
MilpWithEqualities tsp_instance(const Matrix& cost);
MilpWithEqualities revenue_instance(const Vector& revenue, const Matrix& usage, const Vector& capacity);
/// Binaries are the secondary batteries, then one continuous transfer per prosumer.
MilpWithEqualities energy_instance(const Vector& price, const Matrix& loss, const Vector& capacity,
                                   const Vector& battery_cost, const Matrix& relief, double transfer_low,
                                   double transfer_high);
MilpWithEqualities caching_instance(const Vector& popularity, const Vector& sizes, double capacity);

/// Number of subtour rows, Σ_{k=2}^{N−1} C(N, k).
Index tsp_subtour_rows(Index cities);

struct LabelOptions {
  OracleOptions oracle;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Solves a seeded random subset of ⌊fraction·total + ½⌋ instances across all
/// series and clears the labels of the rest.
void label_dataset(std::vector<InstanceSeries>& series, const LabelOptions& options);

}  // namespace milpfix
