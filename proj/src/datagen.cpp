// SPDX-License-Identifier: Apache-2.0
#include "milpfix/datagen.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>

#include "milpfix/config_fields.hpp"
#include "milpfix/parallel.hpp"
#include "milpfix/simplex.hpp"

namespace milpfix {

namespace {

using Rng = std::mt19937_64;

constexpr int kMaxResamples = 100;
constexpr double kTwoPi = 6.283185307179586;

struct FamilyName {
  Family family;
  std::string_view name;
};

constexpr std::array<FamilyName, 6> kFamilies{{{Family::Routing, "routing"},
                                                {Family::FacilityLocation, "facility-loc"},
                                                {Family::Tsp, "tsp"},
                                                {Family::RevenueMax, "revenue-max"},
                                                {Family::EnergyGrid, "energy-grid"},
                                                {Family::Caching, "caching"}}};

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double normal(Rng& rng, double sigma) { return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0; }
Index uniform_int(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

Vector uniform_vector(Rng& rng, Index n, double lo, double hi) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

Matrix pairwise_distances(const Matrix& from, const Matrix& to) {
  Matrix d(from.rows(), to.rows());
  for (Index i = 0; i < from.rows(); ++i) {
    for (Index j = 0; j < to.rows(); ++j) d(i, j) = (from.row(i) - to.row(j)).norm();
  }
  return d;
}

Matrix random_points(Rng& rng, Index n) {
  Matrix p(n, 2);
  for (Index i = 0; i < n; ++i) {
    p(i, 0) = uniform(rng, 0.0, 1.0);
    p(i, 1) = uniform(rng, 0.0, 1.0);
  }
  return p;
}

MilpWithEqualities assemble(Vector c, Index rows, const std::vector<Triplet>& entries, Vector b,
                            std::vector<bool> is_equality, Index num_binary) {
  MilpWithEqualities out;
  out.base.num_binary = num_binary;
  out.base.num_continuous = c.size() - num_binary;
  out.base.A = make_sparse(rows, c.size(), entries);
  out.base.c = std::move(c);
  out.base.b = std::move(b);
  out.is_equality = std::move(is_equality);
  return out;
}

// One step of a family: the instance and an assignment proving it feasible.
struct Draw {
  MilpWithEqualities problem;
  Vector witness;
};

// Process state of one series; `draw` may be called again after a rejection
// and must then start from the same state.
class SeriesProcess {
 public:
  virtual ~SeriesProcess() = default;
  virtual std::optional<Draw> draw(Rng& rng, Index t) = 0;
  virtual void commit() = 0;
};

// --- routing -----------------------------------------------------------------

struct RoutingGraph {
  std::vector<std::array<Index, 2>> edges;
  Vector length;
};

RoutingGraph random_graph(Rng& rng, const RoutingParams& p) {
  RoutingGraph g;
  for (Index i = 0; i < p.nodes; ++i) g.edges.push_back({i, (i + 1) % p.nodes});
  std::vector<std::array<Index, 2>> chords;
  for (Index i = 0; i < p.nodes; ++i) {
    for (Index j = i + 2; j < p.nodes; ++j) {
      if (!(i == 0 && j == p.nodes - 1)) chords.push_back({i, j});
    }
  }
  std::shuffle(chords.begin(), chords.end(), rng);
  for (Index k = 0; k < p.edges - p.nodes; ++k) g.edges.push_back(chords[static_cast<std::size_t>(k)]);
  g.length = uniform_vector(rng, static_cast<Index>(g.edges.size()), 1.0, 3.0);
  return g;
}

std::vector<std::vector<Index>> simple_paths(const RoutingGraph& g, Index nodes, Index source, Index target) {
  std::vector<std::vector<std::pair<Index, Index>>> adj(static_cast<std::size_t>(nodes));
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    adj[static_cast<std::size_t>(g.edges[e][0])].push_back({g.edges[e][1], static_cast<Index>(e)});
    adj[static_cast<std::size_t>(g.edges[e][1])].push_back({g.edges[e][0], static_cast<Index>(e)});
  }
  std::vector<std::vector<Index>> paths;
  std::vector<Index> current;
  std::vector<bool> visited(static_cast<std::size_t>(nodes), false);
  std::function<void(Index)> dfs = [&](Index u) {
    if (u == target) {
      paths.push_back(current);
      return;
    }
    visited[static_cast<std::size_t>(u)] = true;
    for (const auto& [v, e] : adj[static_cast<std::size_t>(u)]) {
      if (visited[static_cast<std::size_t>(v)]) continue;
      current.push_back(e);
      dfs(v);
      current.pop_back();
    }
    visited[static_cast<std::size_t>(u)] = false;
  };
  dfs(source);
  auto cost = [&](const std::vector<Index>& path) {
    double s = 0.0;
    for (Index e : path) s += g.length(e);
    return s;
  };
  std::stable_sort(paths.begin(), paths.end(), [&](const auto& a, const auto& b) {
    const double ca = cost(a);
    const double cb = cost(b);
    return ca != cb ? ca < cb : a < b;
  });
  return paths;
}

class RoutingProcess final : public SeriesProcess {
 public:
  RoutingProcess(Rng& rng, const RoutingParams& p) : p_(p) {
    const RoutingGraph g = random_graph(rng, p);
    for (Index k = 0; k < p.commodities; ++k) {
      const Index s = uniform_int(rng, 0, p.nodes - 1);
      Index d = uniform_int(rng, 0, p.nodes - 2);
      if (d >= s) ++d;
      auto all = simple_paths(g, p.nodes, s, d);
      const Index want = std::min<Index>(uniform_int(rng, p.min_paths, p.max_paths), static_cast<Index>(all.size()));
      all.resize(static_cast<std::size_t>(want));
      Vector cost(want);
      for (Index l = 0; l < want; ++l) {
        cost(l) = 0.0;
        for (Index e : all[static_cast<std::size_t>(l)]) cost(l) += g.length(e);
      }
      paths_.push_back(std::move(all));
      path_costs_.push_back(cost);
    }
    capacity_ = uniform_vector(rng, p.edges, p.capacity_low, p.capacity_high);
    install_cost_ = uniform_vector(rng, p.installments, p.install_cost_low, p.install_cost_high);
    install_capacity_ = uniform_vector(rng, p.installments, p.install_capacity_low, p.install_capacity_high);
    base_ = uniform_vector(rng, p.commodities, p.demand_low, p.demand_high);
    phase_ = uniform_vector(rng, p.commodities, 0.0, kTwoPi);
  }

  std::optional<Draw> draw(Rng& rng, Index t) override {
    Vector demand(p_.commodities);
    for (Index k = 0; k < p_.commodities; ++k) {
      const double diurnal = 1.0 + p_.diurnal_amplitude * std::sin(kTwoPi * static_cast<double>(t) / p_.diurnal_period + phase_(k));
      demand(k) = std::max(0.0, base_(k) * diurnal + normal(rng, p_.demand_noise));
    }
    Draw out{routing_instance(paths_, path_costs_, demand, capacity_, install_cost_, install_capacity_, p_.edges), {}};
    auto witness = find_witness(demand);
    if (!witness) return std::nullopt;
    out.witness = std::move(*witness);
    return out;
  }

  void commit() override {}

 private:
  // Every installment bought; the first path combination (odometer order)
  // that fits the augmented capacities.
  std::optional<Vector> find_witness(const Vector& demand) const {
    const Index K = p_.commodities;
    Index np = 0;
    for (const auto& paths : paths_) np += static_cast<Index>(paths.size());
    const Vector limit = capacity_.array() + install_capacity_.sum();
    std::vector<Index> choice(static_cast<std::size_t>(K), 0);
    for (;;) {
      Vector load = Vector::Zero(p_.edges);
      for (Index k = 0; k < K; ++k) {
        for (Index e : paths_[static_cast<std::size_t>(k)][static_cast<std::size_t>(choice[static_cast<std::size_t>(k)])]) {
          load(e) += demand(k);
        }
      }
      if ((load.array() <= limit.array()).all()) {
        Vector z = Vector::Zero(np + p_.edges * p_.installments);
        Index offset = 0;
        for (Index k = 0; k < K; ++k) {
          z(offset + choice[static_cast<std::size_t>(k)]) = 1.0;
          offset += static_cast<Index>(paths_[static_cast<std::size_t>(k)].size());
        }
        z.tail(p_.edges * p_.installments).setOnes();
        return z;
      }
      Index k = 0;
      for (; k < K; ++k) {
        auto& c = choice[static_cast<std::size_t>(k)];
        if (++c < static_cast<Index>(paths_[static_cast<std::size_t>(k)].size())) break;
        c = 0;
      }
      if (k == K) return std::nullopt;
    }
  }

  RoutingParams p_;
  std::vector<std::vector<std::vector<Index>>> paths_;
  std::vector<Vector> path_costs_;
  Vector capacity_, install_cost_, install_capacity_, base_, phase_;
};

// --- facility location -------------------------------------------------------

class FacilityProcess final : public SeriesProcess {
 public:
  FacilityProcess(Rng& rng, const FacilityParams& p) : p_(p) {
    cost_ = pairwise_distances(random_points(rng, p.clients), random_points(rng, p.facilities));
    Matrix gauss(p.clients, p.clients);
    for (Index i = 0; i < gauss.size(); ++i) gauss(i) = normal(rng, 1.0);
    const Matrix V = Eigen::HouseholderQR<Matrix>(gauss).householderQ();
    const Vector lambda = uniform_vector(rng, p.clients, p.eigen_low, p.eigen_high);
    transition_ = V * lambda.asDiagonal() * V.transpose();
    amp1_ = uniform(rng, p.amp1_low, p.amp1_high);
    amp2_ = uniform(rng, p.amp2_low, p.amp2_high);
    demand_ = uniform_vector(rng, p.clients, 0.5 * p.initial_demand, 1.5 * p.initial_demand);
  }

  std::optional<Draw> draw(Rng& rng, Index t) override {
    if (t > 0) {
      const double tt = static_cast<double>(t - 1);
      next_ = transition_ * demand_;
      const double forcing = amp1_ * std::sin(tt / p_.period1) + amp2_ * std::sin(tt / p_.period2);
      for (Index j = 0; j < next_.size(); ++j) next_(j) = std::max(0.0, next_(j) + forcing + normal(rng, p_.noise));
    } else {
      next_ = demand_;
    }
    const double scale = cost_.mean() * std::max(next_.mean(), 1.0);
    const Vector open = uniform_vector(rng, p_.facilities, p_.open_cost_low * scale, p_.open_cost_high * scale);
    Draw out{facility_instance(cost_, next_, open), Vector::Zero(p_.clients * p_.facilities + p_.facilities)};
    for (Index j = 0; j < p_.clients; ++j) out.witness(j * p_.facilities) = 1.0;
    out.witness.tail(p_.facilities).setOnes();
    return out;
  }

  void commit() override { demand_ = next_; }

 private:
  FacilityParams p_;
  Matrix cost_, transition_;
  double amp1_ = 0.0, amp2_ = 0.0;
  Vector demand_, next_;
};

// --- tsp -----------------------------------------------------------------------

class TspProcess final : public SeriesProcess {
 public:
  TspProcess(Rng& rng, const TspParams& p) : p_(p) {
    const Matrix pts = random_points(rng, p.cities);
    cost_ = pairwise_distances(pts, pts);
    const Index n = p.cities;
    scale_ = n > 1 ? cost_.sum() / static_cast<double>(n * (n - 1)) : 0.0;
  }

  std::optional<Draw> draw(Rng& rng, Index t) override {
    next_ = cost_;
    if (t > 0) {
      for (Index i = 0; i < p_.cities; ++i) {
        for (Index j = 0; j < p_.cities; ++j) {
          if (i != j) next_(i, j) = std::max(0.0, next_(i, j) + uniform(rng, p_.walk_low * scale_, p_.walk_high * scale_));
        }
      }
    }
    const Index n = p_.cities;
    Draw out{tsp_instance(next_), Vector::Zero(n * (n - 1))};
    for (Index i = 0; i < n; ++i) {
      const Index j = (i + 1) % n;
      out.witness(i * (n - 1) + (j < i ? j : j - 1)) = 1.0;
    }
    return out;
  }

  void commit() override { cost_ = next_; }

 private:
  TspParams p_;
  Matrix cost_, next_;
  double scale_ = 0.0;
};

// --- revenue maximization ------------------------------------------------------

class RevenueProcess final : public SeriesProcess {
 public:
  RevenueProcess(Rng& rng, const RevenueParams& p) : p_(p) {
    usage_ = Matrix::Zero(p.rows, p.items);
    for (Index n = 0; n < p.items; ++n) {
      bool any = false;
      for (Index i = 0; i < p.rows; ++i) {
        if (uniform(rng, 0.0, 1.0) < p.density) {
          usage_(i, n) = 1.0 - uniform(rng, 0.0, 1.0);
          any = true;
        }
      }
      if (!any) usage_(uniform_int(rng, 0, p.rows - 1), n) = 1.0 - uniform(rng, 0.0, 1.0);
    }
    revenue_ = uniform_vector(rng, p.items, p.revenue_low, p.revenue_high);
    capacity_.resize(p.rows);
    for (Index i = 0; i < p.rows; ++i) {
      capacity_(i) = uniform(rng, p.capacity_fraction_low, p.capacity_fraction_high) * usage_.row(i).sum();
    }
    capacity_sigma_ = p.capacity_noise * capacity_.mean();
    amp1_ = uniform(rng, 0.0, p.amp1_high);
    amp2_ = uniform(rng, 0.0, p.amp2_high);
  }

  std::optional<Draw> draw(Rng& rng, Index t) override {
    next_revenue_ = revenue_;
    next_capacity_ = capacity_;
    if (t > 0) {
      const double tt = static_cast<double>(t - 1);
      const double drift = amp1_ * std::sin(tt / p_.period1) + amp2_ * std::sin(tt / p_.period2);
      for (Index n = 0; n < p_.items; ++n) {
        next_revenue_(n) = std::max(0.0, next_revenue_(n) + drift + normal(rng, p_.revenue_noise));
      }
      for (Index i = 0; i < p_.rows; ++i) next_capacity_(i) += normal(rng, capacity_sigma_);
      if ((next_capacity_.array() < 0.0).any()) return std::nullopt;
    }
    return Draw{revenue_instance(next_revenue_, usage_, next_capacity_), Vector::Zero(p_.items)};
  }

  void commit() override {
    revenue_ = next_revenue_;
    capacity_ = next_capacity_;
  }

 private:
  RevenueParams p_;
  Matrix usage_;
  Vector revenue_, capacity_, next_revenue_, next_capacity_;
  double capacity_sigma_ = 0.0, amp1_ = 0.0, amp2_ = 0.0;
};

// --- energy grid ---------------------------------------------------------------

class EnergyProcess final : public SeriesProcess {
 public:
  EnergyProcess(Rng& rng, const EnergyParams& p) : p_(p) {
    loss_ = Matrix(p.primary, p.prosumers);
    for (Index i = 0; i < loss_.size(); ++i) loss_(i) = uniform(rng, 0.5, 1.5);
    relief_ = Matrix::Zero(p.primary, p.secondary);
    for (Index i = 0; i < p.secondary; ++i) {
      bool any = false;
      for (Index n = 0; n < p.primary; ++n) {
        if (uniform(rng, 0.0, 1.0) < p.relief_density) {
          relief_(n, i) = uniform(rng, p.relief_low, p.relief_high);
          any = true;
        }
      }
      if (!any) relief_(uniform_int(rng, 0, p.primary - 1), i) = uniform(rng, p.relief_low, p.relief_high);
    }
    battery_cost_ = uniform_vector(rng, p.secondary, p.battery_cost_low, p.battery_cost_high);
    price_ = uniform_vector(rng, p.prosumers, p.price_low, p.price_high);
    capacity_ = uniform_vector(rng, p.primary, p.capacity_low, p.capacity_high);
    amp_ = uniform(rng, 0.0, p.amp_high);
  }

  std::optional<Draw> draw(Rng& rng, Index t) override {
    next_price_ = price_;
    next_capacity_ = capacity_;
    if (t > 0) {
      const double drift = amp_ * std::sin(static_cast<double>(t - 1) / p_.period);
      for (Index f = 0; f < p_.prosumers; ++f) {
        next_price_(f) = std::max(0.0, next_price_(f) + drift + normal(rng, p_.price_noise));
      }
      for (Index n = 0; n < p_.primary; ++n) next_capacity_(n) += normal(rng, p_.capacity_noise);
      if ((next_capacity_.array() < 0.0).any()) return std::nullopt;
    }
    Draw out{energy_instance(next_price_, loss_, next_capacity_, battery_cost_, relief_, p_.transfer_low,
                             p_.transfer_high),
             {}};
    // All batteries deployed; transfers from a feasibility LP.
    const Index F = p_.prosumers;
    Matrix A(p_.primary + 2, F);
    Vector b(p_.primary + 2);
    A.topRows(p_.primary) = loss_;
    b.head(p_.primary) = next_capacity_ + relief_.rowwise().sum();
    A.row(p_.primary).setOnes();
    A.row(p_.primary + 1).setConstant(-1.0);
    b(p_.primary) = 1.0;
    b(p_.primary + 1) = -1.0;
    VariableBounds box{Vector::Constant(F, p_.transfer_low), Vector::Constant(F, p_.transfer_high)};
    const SolveReport lp = solve_lp(Vector::Zero(F), A, b, box);
    if (lp.status != SolveStatus::Optimal) return std::nullopt;
    out.witness.resize(p_.secondary + F);
    out.witness << Vector::Ones(p_.secondary), lp.assignment;
    return out;
  }

  void commit() override {
    price_ = next_price_;
    capacity_ = next_capacity_;
  }

 private:
  EnergyParams p_;
  Matrix loss_, relief_;
  Vector battery_cost_, price_, capacity_, next_price_, next_capacity_;
  double amp_ = 0.0;
};

// --- caching -------------------------------------------------------------------

class CachingProcess final : public SeriesProcess {
 public:
  CachingProcess(Rng& rng, const CachingParams& p) : p_(p) {
    sizes_.resize(p.items);
    for (Index n = 0; n < p.items; ++n) sizes_(n) = static_cast<double>(uniform_int(rng, p.size_low, p.size_high));
    capacity_ = std::floor(p.capacity_fraction * sizes_.sum());
    rank_.resize(static_cast<std::size_t>(p.items));
    std::iota(rank_.begin(), rank_.end(), Index{0});
    std::shuffle(rank_.begin(), rank_.end(), rng);
  }

  std::optional<Draw> draw(Rng& rng, Index t) override {
    const Index shift = p_.rotation_period > 0 ? t / p_.rotation_period : 0;
    Vector pop(p_.items);
    for (Index n = 0; n < p_.items; ++n) {
      const Index rank = (rank_[static_cast<std::size_t>(n)] + shift) % p_.items + 1;
      pop(n) = std::pow(static_cast<double>(rank), -p_.zipf_exponent) * std::exp(normal(rng, p_.popularity_noise));
    }
    pop /= pop.sum();
    return Draw{caching_instance(pop, sizes_, capacity_), Vector::Zero(p_.items)};
  }

  void commit() override {}

 private:
  CachingParams p_;
  Vector sizes_;
  double capacity_ = 0.0;
  std::vector<Index> rank_;
};

std::unique_ptr<SeriesProcess> make_process(const GeneratorSpec& spec, Rng& rng) {
  switch (spec.family) {
    case Family::Routing: return std::make_unique<RoutingProcess>(rng, spec.routing);
    case Family::FacilityLocation: return std::make_unique<FacilityProcess>(rng, spec.facility);
    case Family::Tsp: return std::make_unique<TspProcess>(rng, spec.tsp);
    case Family::RevenueMax: return std::make_unique<RevenueProcess>(rng, spec.revenue);
    case Family::EnergyGrid: return std::make_unique<EnergyProcess>(rng, spec.energy);
    case Family::Caching: return std::make_unique<CachingProcess>(rng, spec.caching);
  }
  fail(ErrorCode::ConfigError, "unknown family");
}

Index split_count(const GeneratorSpec& spec, Split split) {
  switch (split) {
    case Split::Train: return spec.train_series;
    case Split::Validation: return spec.val_series;
    case Split::Test: return spec.test_series;
  }
  return 0;
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::ConfigError, what);
}

}  // namespace

std::string_view to_string(Family family) {
  for (const auto& f : kFamilies) {
    if (f.family == family) return f.name;
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  for (const auto& f : kFamilies) {
    if (f.name == name) return f.family;
  }
  fail(ErrorCode::ConfigError, "unknown family '" + std::string(name) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

void GeneratorSpec::validate() const {
  require(train_series >= 0 && val_series >= 0 && test_series >= 0, "generator series counts must be nonnegative");
  require(timesteps > 0, "generator.timesteps must be positive");
  require(max_binaries > 0, "generator.max_binaries must be positive");
  switch (family) {
    case Family::Routing:
      require(routing.nodes >= 3, "routing.nodes must be at least 3");
      require(routing.edges >= routing.nodes && routing.edges <= routing.nodes * (routing.nodes - 1) / 2,
              "routing.edges must lie between nodes and nodes*(nodes-1)/2");
      require(routing.commodities > 0 && routing.installments >= 0, "routing sizes must be positive");
      require(routing.min_paths >= 1 && routing.max_paths >= routing.min_paths, "routing path counts are inconsistent");
      require(routing.diurnal_period > 0.0, "routing.diurnal_period must be positive");
      break;
    case Family::FacilityLocation:
      require(facility.facilities > 0 && facility.clients > 0, "facility sizes must be positive");
      require(facility.eigen_low <= facility.eigen_high && facility.eigen_high < 1.0 && facility.eigen_low > -1.0,
              "facility eigenvalue range must lie inside (-1, 1)");
      break;
    case Family::Tsp:
      require(tsp.cities >= 2 && tsp.cities <= 8, "tsp.cities must lie in [2, 8]");
      require(tsp.walk_low <= tsp.walk_high, "tsp walk bounds are inverted");
      break;
    case Family::RevenueMax:
      require(revenue.items > 0 && revenue.rows > 0, "revenue sizes must be positive");
      require(revenue.density > 0.0 && revenue.density <= 1.0, "revenue.density must lie in (0, 1]");
      break;
    case Family::EnergyGrid:
      require(energy.prosumers > 0 && energy.primary > 0 && energy.secondary >= 0, "energy sizes must be positive");
      require(energy.transfer_low <= 1.0 / static_cast<double>(energy.prosumers) &&
                  energy.transfer_high >= 1.0 / static_cast<double>(energy.prosumers),
              "energy transfer box must admit an even split");
      break;
    case Family::Caching:
      require(caching.items > 0, "caching.items must be positive");
      require(caching.size_low >= 1 && caching.size_high >= caching.size_low, "caching size range is invalid");
      require(caching.capacity_fraction >= 0.0, "caching.capacity_fraction must be nonnegative");
      break;
  }
}

nlohmann::json to_json(const GeneratorSpec& s) {
  using nlohmann::json;
  const auto& r = s.routing;
  const auto& f = s.facility;
  const auto& v = s.revenue;
  const auto& e = s.energy;
  const auto& c = s.caching;
  return json{
      {"family", std::string(to_string(s.family))},
      {"train_series", s.train_series},
      {"val_series", s.val_series},
      {"test_series", s.test_series},
      {"timesteps", s.timesteps},
      {"seed", s.seed},
      {"max_binaries", s.max_binaries},
      {"routing",
       {{"nodes", r.nodes}, {"edges", r.edges}, {"commodities", r.commodities}, {"installments", r.installments},
        {"min_paths", r.min_paths}, {"max_paths", r.max_paths}, {"demand_low", r.demand_low},
        {"demand_high", r.demand_high}, {"diurnal_amplitude", r.diurnal_amplitude},
        {"diurnal_period", r.diurnal_period}, {"demand_noise", r.demand_noise}, {"capacity_low", r.capacity_low},
        {"capacity_high", r.capacity_high}, {"install_cost_low", r.install_cost_low},
        {"install_cost_high", r.install_cost_high}, {"install_capacity_low", r.install_capacity_low},
        {"install_capacity_high", r.install_capacity_high}}},
      {"facility_location",
       {{"facilities", f.facilities}, {"clients", f.clients}, {"eigen_low", f.eigen_low},
        {"eigen_high", f.eigen_high}, {"period1", f.period1}, {"period2", f.period2}, {"amp1_low", f.amp1_low},
        {"amp1_high", f.amp1_high}, {"amp2_low", f.amp2_low}, {"amp2_high", f.amp2_high}, {"noise", f.noise},
        {"initial_demand", f.initial_demand}, {"open_cost_low", f.open_cost_low},
        {"open_cost_high", f.open_cost_high}}},
      {"tsp", {{"cities", s.tsp.cities}, {"walk_low", s.tsp.walk_low}, {"walk_high", s.tsp.walk_high}}},
      {"revenue_max",
       {{"items", v.items}, {"rows", v.rows}, {"density", v.density}, {"revenue_low", v.revenue_low},
        {"revenue_high", v.revenue_high}, {"capacity_fraction_low", v.capacity_fraction_low},
        {"capacity_fraction_high", v.capacity_fraction_high}, {"period1", v.period1}, {"period2", v.period2},
        {"amp1_high", v.amp1_high}, {"amp2_high", v.amp2_high}, {"revenue_noise", v.revenue_noise},
        {"capacity_noise", v.capacity_noise}}},
      {"energy_grid",
       {{"prosumers", e.prosumers}, {"primary", e.primary}, {"secondary", e.secondary}, {"price_low", e.price_low},
        {"price_high", e.price_high}, {"period", e.period}, {"amp_high", e.amp_high},
        {"price_noise", e.price_noise}, {"capacity_low", e.capacity_low}, {"capacity_high", e.capacity_high},
        {"capacity_noise", e.capacity_noise}, {"battery_cost_low", e.battery_cost_low},
        {"battery_cost_high", e.battery_cost_high}, {"relief_density", e.relief_density},
        {"relief_low", e.relief_low}, {"relief_high", e.relief_high}, {"transfer_low", e.transfer_low},
        {"transfer_high", e.transfer_high}}},
      {"caching",
       {{"items", c.items}, {"size_low", c.size_low}, {"size_high", c.size_high},
        {"capacity_fraction", c.capacity_fraction}, {"zipf_exponent", c.zipf_exponent},
        {"rotation_period", c.rotation_period}, {"popularity_noise", c.popularity_noise}}},
  };
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  GeneratorSpec s;
  ConfigFields top(j, "generator");
  std::string family(to_string(s.family));
  top.read("family", family)
      .read("train_series", s.train_series)
      .read("val_series", s.val_series)
      .read("test_series", s.test_series)
      .read("timesteps", s.timesteps)
      .read("seed", s.seed)
      .read("max_binaries", s.max_binaries);
  s.family = family_from_string(family);
  if (const auto* sec = top.section("routing")) {
    auto& r = s.routing;
    ConfigFields f(*sec, "generator.routing");
    f.read("nodes", r.nodes).read("edges", r.edges).read("commodities", r.commodities)
        .read("installments", r.installments).read("min_paths", r.min_paths).read("max_paths", r.max_paths)
        .read("demand_low", r.demand_low).read("demand_high", r.demand_high)
        .read("diurnal_amplitude", r.diurnal_amplitude).read("diurnal_period", r.diurnal_period)
        .read("demand_noise", r.demand_noise).read("capacity_low", r.capacity_low)
        .read("capacity_high", r.capacity_high).read("install_cost_low", r.install_cost_low)
        .read("install_cost_high", r.install_cost_high).read("install_capacity_low", r.install_capacity_low)
        .read("install_capacity_high", r.install_capacity_high);
    f.finish();
  }
  if (const auto* sec = top.section("facility_location")) {
    auto& r = s.facility;
    ConfigFields f(*sec, "generator.facility_location");
    f.read("facilities", r.facilities).read("clients", r.clients).read("eigen_low", r.eigen_low)
        .read("eigen_high", r.eigen_high).read("period1", r.period1).read("period2", r.period2)
        .read("amp1_low", r.amp1_low).read("amp1_high", r.amp1_high).read("amp2_low", r.amp2_low)
        .read("amp2_high", r.amp2_high).read("noise", r.noise).read("initial_demand", r.initial_demand)
        .read("open_cost_low", r.open_cost_low).read("open_cost_high", r.open_cost_high);
    f.finish();
  }
  if (const auto* sec = top.section("tsp")) {
    ConfigFields f(*sec, "generator.tsp");
    f.read("cities", s.tsp.cities).read("walk_low", s.tsp.walk_low).read("walk_high", s.tsp.walk_high);
    f.finish();
  }
  if (const auto* sec = top.section("revenue_max")) {
    auto& r = s.revenue;
    ConfigFields f(*sec, "generator.revenue_max");
    f.read("items", r.items).read("rows", r.rows).read("density", r.density).read("revenue_low", r.revenue_low)
        .read("revenue_high", r.revenue_high).read("capacity_fraction_low", r.capacity_fraction_low)
        .read("capacity_fraction_high", r.capacity_fraction_high).read("period1", r.period1)
        .read("period2", r.period2).read("amp1_high", r.amp1_high).read("amp2_high", r.amp2_high)
        .read("revenue_noise", r.revenue_noise).read("capacity_noise", r.capacity_noise);
    f.finish();
  }
  if (const auto* sec = top.section("energy_grid")) {
    auto& r = s.energy;
    ConfigFields f(*sec, "generator.energy_grid");
    f.read("prosumers", r.prosumers).read("primary", r.primary).read("secondary", r.secondary)
        .read("price_low", r.price_low).read("price_high", r.price_high).read("period", r.period)
        .read("amp_high", r.amp_high).read("price_noise", r.price_noise).read("capacity_low", r.capacity_low)
        .read("capacity_high", r.capacity_high).read("capacity_noise", r.capacity_noise)
        .read("battery_cost_low", r.battery_cost_low).read("battery_cost_high", r.battery_cost_high)
        .read("relief_density", r.relief_density).read("relief_low", r.relief_low)
        .read("relief_high", r.relief_high).read("transfer_low", r.transfer_low)
        .read("transfer_high", r.transfer_high);
    f.finish();
  }
  if (const auto* sec = top.section("caching")) {
    auto& r = s.caching;
    ConfigFields f(*sec, "generator.caching");
    f.read("items", r.items).read("size_low", r.size_low).read("size_high", r.size_high)
        .read("capacity_fraction", r.capacity_fraction).read("zipf_exponent", r.zipf_exponent)
        .read("rotation_period", r.rotation_period).read("popularity_noise", r.popularity_noise);
    f.finish();
  }
  top.finish();
  s.validate();
  return s;
}

InstanceSeries generate_series(const GeneratorSpec& spec, Split split, Index index) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(spec.family), static_cast<std::uint32_t>(split),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  Rng rng(seq);
  auto process = make_process(spec, rng);

  InstanceSeries out;
  char id[64];
  std::snprintf(id, sizeof id, "%s-%s-%04lld", std::string(to_string(spec.family)).c_str(),
                std::string(to_string(split)).c_str(), static_cast<long long>(index));
  out.id = id;
  out.family = std::string(to_string(spec.family));
  for (Index t = 0; t < spec.timesteps; ++t) {
    std::optional<MilpInstance> accepted;
    for (int attempt = 0; attempt < kMaxResamples && !accepted; ++attempt) {
      auto d = process->draw(rng, t);
      if (!d) continue;
      MilpInstance inst = to_standard_form(d->problem);
      if (d->witness.size() != inst.num_vars() || !check_feasibility(inst, d->witness)) continue;
      accepted = std::move(inst);
    }
    if (!accepted) {
      fail(ErrorCode::GenerationFailed, out.id + ": no feasible instance at t=" + std::to_string(t) + " after " +
                                            std::to_string(kMaxResamples) + " draws");
    }
    if (accepted->num_binary > spec.max_binaries && !is_integral_knapsack(*accepted)) {
      fail(ErrorCode::SizeExceedsOracle, out.id + ": " + std::to_string(accepted->num_binary) +
                                             " binaries exceed the oracle limit of " +
                                             std::to_string(spec.max_binaries));
    }
    process->commit();
    out.steps.push_back(std::move(*accepted));
  }
  out.labels.assign(out.steps.size(), std::nullopt);
  return out;
}

std::vector<InstanceSeries> generate_split(const GeneratorSpec& spec, Split split) {
  std::vector<InstanceSeries> out(static_cast<std::size_t>(split_count(spec, split)));
  parallel_for(static_cast<Index>(out.size()), 0,
               [&](Index i) { out[static_cast<std::size_t>(i)] = generate_series(spec, split, i); });
  return out;
}

Dataset generate_dataset(const GeneratorSpec& spec) {
  return {generate_split(spec, Split::Train), generate_split(spec, Split::Validation),
          generate_split(spec, Split::Test)};
}

MilpWithEqualities routing_instance(const std::vector<std::vector<std::vector<Index>>>& paths,
                                    const std::vector<Vector>& path_costs, const Vector& demand,
                                    const Vector& edge_capacity, const Vector& install_cost,
                                    const Vector& install_capacity, Index num_edges) {
  const Index K = static_cast<Index>(paths.size());
  if (static_cast<Index>(path_costs.size()) != K || demand.size() != K || edge_capacity.size() != num_edges ||
      install_cost.size() != install_capacity.size()) {
    fail(ErrorCode::DimensionMismatch, "routing_instance: inconsistent sizes");
  }
  const Index I = install_cost.size();
  Index np = 0;
  for (const auto& p : paths) np += static_cast<Index>(p.size());
  const Index n = np + num_edges * I;
  Vector c(n);
  std::vector<Triplet> entries;
  Vector b(K + num_edges);
  std::vector<bool> eq(static_cast<std::size_t>(K + num_edges), false);
  Index col = 0;
  for (Index k = 0; k < K; ++k) {
    const auto& pk = paths[static_cast<std::size_t>(k)];
    for (std::size_t l = 0; l < pk.size(); ++l, ++col) {
      c(col) = path_costs[static_cast<std::size_t>(k)](static_cast<Index>(l)) * demand(k);
      entries.emplace_back(k, col, 1.0);
      for (Index e : pk[l]) {
        if (e < 0 || e >= num_edges) fail(ErrorCode::DimensionMismatch, "routing_instance: edge index out of range");
        entries.emplace_back(K + e, col, demand(k));
      }
    }
    b(k) = 1.0;
    eq[static_cast<std::size_t>(k)] = true;
  }
  for (Index e = 0; e < num_edges; ++e) {
    for (Index i = 0; i < I; ++i, ++col) {
      c(col) = install_cost(i);
      entries.emplace_back(K + e, col, -install_capacity(i));
    }
    b(K + e) = edge_capacity(e);
  }
  return assemble(std::move(c), K + num_edges, entries, std::move(b), std::move(eq), n);
}

MilpWithEqualities facility_instance(const Matrix& cost, const Vector& demand, const Vector& open_cost) {
  const Index J = cost.rows();
  const Index I = cost.cols();
  if (demand.size() != J || open_cost.size() != I) fail(ErrorCode::DimensionMismatch, "facility_instance: inconsistent sizes");
  const Index n = J * I + I;
  Vector c(n);
  std::vector<Triplet> entries;
  Vector b = Vector::Zero(J + I);
  std::vector<bool> eq(static_cast<std::size_t>(J + I), false);
  for (Index j = 0; j < J; ++j) {
    for (Index i = 0; i < I; ++i) {
      const Index col = j * I + i;
      c(col) = cost(j, i) * demand(j);
      entries.emplace_back(j, col, 1.0);
      entries.emplace_back(J + i, col, 1.0);
    }
    b(j) = 1.0;
    eq[static_cast<std::size_t>(j)] = true;
  }
  for (Index i = 0; i < I; ++i) {
    c(J * I + i) = open_cost(i);
    entries.emplace_back(J + i, J * I + i, -2.0 * static_cast<double>(J));
  }
  return assemble(std::move(c), J + I, entries, std::move(b), std::move(eq), n);
}

Index tsp_subtour_rows(Index cities) {
  if (cities < 3) return 0;
  return (Index{1} << cities) - cities - 2;
}

MilpWithEqualities tsp_instance(const Matrix& cost) {
  const Index N = cost.rows();
  if (cost.cols() != N || N < 2 || N > 16) fail(ErrorCode::DimensionMismatch, "tsp_instance: cost must be square with 2..16 cities");
  auto arc = [N](Index i, Index j) { return i * (N - 1) + (j < i ? j : j - 1); };
  const Index n = N * (N - 1);
  Vector c(n);
  for (Index i = 0; i < N; ++i) {
    for (Index j = 0; j < N; ++j) {
      if (i != j) c(arc(i, j)) = cost(i, j);
    }
  }
  const Index rows = 2 * N + tsp_subtour_rows(N);
  std::vector<Triplet> entries;
  Vector b(rows);
  std::vector<bool> eq(static_cast<std::size_t>(rows), false);
  for (Index j = 0; j < N; ++j) {
    for (Index i = 0; i < N; ++i) {
      if (i != j) entries.emplace_back(j, arc(i, j), 1.0);
    }
    b(j) = 1.0;
    eq[static_cast<std::size_t>(j)] = true;
  }
  for (Index i = 0; i < N; ++i) {
    for (Index j = 0; j < N; ++j) {
      if (i != j) entries.emplace_back(N + i, arc(i, j), 1.0);
    }
    b(N + i) = 1.0;
    eq[static_cast<std::size_t>(N + i)] = true;
  }
  Index r = 2 * N;
  for (std::uint32_t mask = 1; mask < (1u << N); ++mask) {
    const int size = std::popcount(mask);
    if (size < 2 || size > N - 1) continue;
    for (Index i = 0; i < N; ++i) {
      if (!(mask >> i & 1u)) continue;
      for (Index j = 0; j < N; ++j) {
        if (i != j && (mask >> j & 1u)) entries.emplace_back(r, arc(i, j), 1.0);
      }
    }
    b(r++) = static_cast<double>(size - 1);
  }
  return assemble(std::move(c), rows, entries, std::move(b), std::move(eq), n);
}

MilpWithEqualities revenue_instance(const Vector& revenue, const Matrix& usage, const Vector& capacity) {
  if (usage.cols() != revenue.size() || usage.rows() != capacity.size()) {
    fail(ErrorCode::DimensionMismatch, "revenue_instance: inconsistent sizes");
  }
  std::vector<Triplet> entries;
  for (Index i = 0; i < usage.rows(); ++i) {
    for (Index n = 0; n < usage.cols(); ++n) {
      if (usage(i, n) != 0.0) entries.emplace_back(i, n, usage(i, n));
    }
  }
  return assemble(-revenue, usage.rows(), entries, capacity,
                  std::vector<bool>(static_cast<std::size_t>(usage.rows()), false), revenue.size());
}

MilpWithEqualities energy_instance(const Vector& price, const Matrix& loss, const Vector& capacity,
                                   const Vector& battery_cost, const Matrix& relief, double transfer_low,
                                   double transfer_high) {
  const Index F = price.size();
  const Index N = capacity.size();
  const Index I = battery_cost.size();
  if (loss.rows() != N || loss.cols() != F || relief.rows() != N || relief.cols() != I) {
    fail(ErrorCode::DimensionMismatch, "energy_instance: inconsistent sizes");
  }
  Vector c(I + F);
  c << battery_cost, -price;
  const Index rows = N + 1 + 2 * F;
  std::vector<Triplet> entries;
  Vector b(rows);
  std::vector<bool> eq(static_cast<std::size_t>(rows), false);
  for (Index n = 0; n < N; ++n) {
    for (Index i = 0; i < I; ++i) {
      if (relief(n, i) != 0.0) entries.emplace_back(n, i, -relief(n, i));
    }
    for (Index f = 0; f < F; ++f) entries.emplace_back(n, I + f, loss(n, f));
    b(n) = capacity(n);
  }
  for (Index f = 0; f < F; ++f) entries.emplace_back(N, I + f, 1.0);
  b(N) = 1.0;
  eq[static_cast<std::size_t>(N)] = true;
  for (Index f = 0; f < F; ++f) {
    entries.emplace_back(N + 1 + 2 * f, I + f, 1.0);
    b(N + 1 + 2 * f) = transfer_high;
    entries.emplace_back(N + 2 + 2 * f, I + f, -1.0);
    b(N + 2 + 2 * f) = -transfer_low;
  }
  return assemble(std::move(c), rows, entries, std::move(b), std::move(eq), I);
}

MilpWithEqualities caching_instance(const Vector& popularity, const Vector& sizes, double capacity) {
  if (popularity.size() != sizes.size()) fail(ErrorCode::DimensionMismatch, "caching_instance: inconsistent sizes");
  std::vector<Triplet> entries;
  for (Index n = 0; n < sizes.size(); ++n) entries.emplace_back(0, n, sizes(n));
  return assemble(-popularity, 1, entries, Vector::Constant(1, capacity), {false}, sizes.size());
}

void label_dataset(std::vector<InstanceSeries>& series, const LabelOptions& options) {
  if (!(options.fraction >= 0.0 && options.fraction <= 1.0)) {
    fail(ErrorCode::ConfigError, "label fraction must lie in [0, 1]");
  }
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t s = 0; s < series.size(); ++s) {
    series[s].labels.assign(series[s].steps.size(), std::nullopt);
    for (std::size_t t = 0; t < series[s].steps.size(); ++t) slots.emplace_back(s, t);
  }
  const auto count = static_cast<std::size_t>(std::floor(options.fraction * static_cast<double>(slots.size()) + 0.5));
  Rng rng(options.seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(count);
  std::sort(slots.begin(), slots.end());
  parallel_for(static_cast<Index>(slots.size()), options.threads, [&](Index k) {
    const auto [s, t] = slots[static_cast<std::size_t>(k)];
    series[s].labels[t] = exact_solve(series[s].steps[t], options.oracle).to_label();
  });
}

}  // namespace milpfix
