#include "rcmlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include <Eigen/Eigenvalues>

#include "rcmlab/distances.hpp"
#include "rcmlab/errors.hpp"
#include "rcmlab/moments.hpp"
#include "rcmlab/parallel.hpp"
#include "rcmlab/stats.hpp"

namespace rcm {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StatSummary, statistic, mean, variance, mean_se, variance_se)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StandardizationRecord, statistic, source, mean, sd, pilot_replicates)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DistanceRecord, statistic, n, kolmogorov, wasserstein, dkw99)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MomentRecord, quantity, statistic, other, value, std_error, n_samples,
                                   truncation_radius, method, empirical, empirical_se, agrees)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BoundRecord, term, statistic, value, std_error, budget, truncation_radius,
                                   empirical, empirical_se, holds, scenario_id)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RungResult, index, dim, extent, volume, replicates, statistics, seeds, values,
                                   boundary_touching, oversize, truncated, summaries, covariance, covariance_se,
                                   min_eigenvalue, standardization, distances, moments, bounds, sample_points,
                                   sample_edges)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RateFit, statistic, rungs, intercept, slope, slope_se, slope_ci_low, slope_ci_high)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExperimentResult, command, scenario_hash, scenario_name, version, seed_base, rungs,
                                   rate_fits, moments, analytic_covariance, analytic_covariance_se)

using nlohmann::json;

namespace {

const std::map<std::string, Command> kCommands{
    {"sample", Command::kSample}, {"census", Command::kCensus},   {"expectation", Command::kExpectation},
    {"covariance", Command::kCovariance}, {"clt", Command::kClt}, {"bounds", Command::kBounds},
    {"total", Command::kTotal}};

}  // namespace

std::string ToString(Command c) {
  for (const auto& [name, cmd] : kCommands) {
    if (cmd == c) return name;
  }
  return "unknown";
}

Command ParseCommand(const std::string& text) {
  auto it = kCommands.find(text);
  if (it == kCommands.end()) throw ConfigError("unknown command: " + text);
  return it->second;
}

json ToJson(const ExperimentResult& r) {
  return json(r);
}

ExperimentResult ResultFromJson(const json& j) {
  return j.get<ExperimentResult>();
}

std::string FormatNumber(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

struct Replicate {
  std::vector<double> values;
  std::uint64_t touching = 0;
  std::uint64_t oversize = 0;
  bool truncated = false;
};

const ConnectionFunction& Model(const Scenario& s, const StatisticConfig& c) {
  return c.on_psi ? *s.psi : s.phi;
}

bool NeedsPsi(const Scenario& s) {
  return std::any_of(s.statistics.begin(), s.statistics.end(), [](const auto& c) { return c.on_psi; });
}

Replicate RunReplicate(const Scenario& s, const Window& w, std::size_t rung, std::uint64_t seed) {
  const std::uint64_t sample_seed = DeriveSeed(seed, rung);
  auto pts = std::make_shared<const PointSet>(SamplePoisson(w, s.Padding(), s.beta, sample_seed));
  const PairMarkSource marks = MarksForSeed(sample_seed);
  const BuildOptions opts{s.eps_trunc};
  const int k = s.CensusOrder();
  RcmGraph g = BuildRcm(pts, s.phi, marks, opts);
  CensusReport phi_report = Census(g, w, k);
  std::optional<CensusReport> psi_report;
  if (NeedsPsi(s)) psi_report = Census(BuildRcm(pts, *s.psi, marks, opts), w, k);
  Replicate out;
  for (const auto& c : s.statistics) out.values.push_back(Evaluate(c.statistic, c.on_psi ? *psi_report : phi_report));
  out.touching = phi_report.boundary_touching;
  out.oversize = phi_report.oversize;
  out.truncated = phi_report.truncated;
  return out;
}

std::vector<Replicate> RunReplicates(const Scenario& s, const Window& w, std::size_t rung,
                                     const std::vector<std::uint64_t>& seeds, int threads) {
  std::vector<Replicate> out(seeds.size());
  ParallelFor(seeds.size(), threads, [&](std::size_t i) { out[i] = RunReplicate(s, w, rung, seeds[i]); });
  return out;
}

std::vector<double> Column(const std::vector<std::vector<double>>& values, std::size_t j) {
  std::vector<double> col;
  col.reserve(values.size());
  for (const auto& row : values) col.push_back(row[j]);
  return col;
}

double MinEigen(const std::vector<std::vector<double>>& m) {
  if (m.empty()) return 0.0;
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      a(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

// Lexmin counts have moment formulas; everything else needs a pilot.
std::optional<ClusterSpec> AnalyticSpec(const StatisticConfig& c) {
  const Statistic& s = c.statistic;
  if (s.mode != CountMode::kLexmin) return std::nullopt;
  if (s.kind == StatisticKind::kCountClass) return ClusterSpec::Of(s.classes.front());
  if (s.kind == StatisticKind::kCountOrder && s.order <= kMaxOrder) return ClusterSpec::Connected(s.order);
  return std::nullopt;
}

// The per-sample difference bounds cover lexmin counts of bounded order.
bool DifferenceBounded(const Statistic& s) {
  if (s.mode != CountMode::kLexmin || !s.Local()) return false;
  return s.MaxOrder() <= kMaxOrder;
}

McOptions Mc(const Scenario& s, std::uint64_t stream, int threads) {
  McOptions mc;
  mc.samples = s.mc_samples;
  mc.seed = DeriveSeed(s.seed_base, stream);
  mc.eps_trunc = s.eps_trunc;
  mc.threads = threads;
  return mc;
}

MomentRecord Record(const std::string& quantity, const std::string& stat, const std::string& other,
                    const MomentEstimate& e) {
  MomentRecord r;
  r.quantity = quantity;
  r.statistic = stat;
  r.other = other;
  r.value = e.value;
  r.std_error = e.std_error;
  r.n_samples = e.n_samples;
  r.truncation_radius = e.truncation_radius;
  r.method = ToString(e.method);
  return r;
}

void Compare(MomentRecord& r, double empirical, double empirical_se, double rel_tol) {
  r.empirical = empirical;
  r.empirical_se = empirical_se;
  double tol = std::max(rel_tol * std::abs(r.value), 3.0 * std::hypot(r.std_error, empirical_se));
  r.agrees = std::abs(empirical - r.value) <= tol;
}

// sigma between statistics i and j; the statistic on the larger connection
// function goes first.
MomentEstimate AsymptoticCovariance(const Scenario& s, std::size_t i, std::size_t j, int threads) {
  const auto& a = s.statistics[i];
  const auto& b = s.statistics[j];
  auto ga = AnalyticSpec(a), gb = AnalyticSpec(b);
  McOptions mc = Mc(s, 0x636f76000ULL + 1000 * i + j, threads);
  if (a.on_psi && !b.on_psi) return AsyCovParts(*gb, *ga, s.phi, *s.psi, s.beta, s.dim, mc).total;
  return AsyCovParts(*ga, *gb, Model(s, a), Model(s, b), s.beta, s.dim, mc).total;
}

class Runner {
 public:
  Runner(const Scenario& s, Command cmd, int threads) : s_(s), cmd_(cmd), threads_(std::max(1, threads)) {
    for (const auto& c : s.statistics) names_.push_back(c.Label());
  }

  ExperimentResult Run() {
    ExperimentResult r;
    r.command = ToString(cmd_);
    r.scenario_hash = s_.Hash();
    r.scenario_name = s_.name;
    r.version = RCMLAB_VERSION;
    r.seed_base = s_.seed_base;
    if (cmd_ == Command::kCovariance) PrepareCovariance(r);
    if (cmd_ == Command::kTotal) PrepareTotal();
    for (std::size_t k = 0; k < s_.extents.size(); ++k) r.rungs.push_back(RunRung(k, r));
    if (cmd_ == Command::kClt) FitRates(r);
    if (cmd_ == Command::kTotal) FinishTotal(r);
    return r;
  }

 private:
  RungResult RunRung(std::size_t k, ExperimentResult& r) {
    const Window w = s_.WindowAt(k);
    RungResult rung;
    rung.index = static_cast<int>(k);
    rung.dim = s_.dim;
    rung.extent = s_.extents[k];
    rung.volume = w.Volume();
    rung.statistics = names_;
    const std::uint64_t n = cmd_ == Command::kSample ? 1 : s_.replicates;
    rung.replicates = n;
    for (std::uint64_t i = 0; i < n; ++i) rung.seeds.push_back(s_.seed_base + i);
    auto reps = RunReplicates(s_, w, k, rung.seeds, threads_);
    for (const auto& rep : reps) {
      rung.values.push_back(rep.values);
      rung.boundary_touching.push_back(rep.touching);
      rung.oversize.push_back(rep.oversize);
      rung.truncated = rung.truncated || rep.truncated;
    }
    if (cmd_ == Command::kSample) {
      StoreSample(rung, w, k);
      return rung;
    }
    Summaries(rung);
    switch (cmd_) {
      case Command::kExpectation: Expectation(rung, w, k); break;
      case Command::kCovariance: CovarianceRung(rung, r); break;
      case Command::kClt: Distances(rung, w, k); break;
      case Command::kBounds: Bounds(rung, w, k); break;
      case Command::kTotal: TotalRung(rung, w, k); break;
      default: break;
    }
    return rung;
  }

  void StoreSample(RungResult& rung, const Window& w, std::size_t k) {
    const std::uint64_t seed = DeriveSeed(rung.seeds.front(), k);
    auto pts = std::make_shared<const PointSet>(SamplePoisson(w, s_.Padding(), s_.beta, seed));
    RcmGraph g = BuildRcm(pts, s_.phi, MarksForSeed(seed), BuildOptions{s_.eps_trunc});
    rung.sample_points = pts->coords();
    for (std::size_t v = 0; v < g.size(); ++v) {
      for (int u : g.neighbors(v)) {
        if (static_cast<std::size_t>(u) > v) {
          rung.sample_edges.push_back(pts->id(v));
          rung.sample_edges.push_back(pts->id(static_cast<std::size_t>(u)));
        }
      }
    }
  }

  void Summaries(RungResult& rung) {
    const std::size_t m = names_.size();
    rung.covariance.assign(m, std::vector<double>(m, 0.0));
    rung.covariance_se.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
      auto col = Column(rung.values, i);
      SampleSummary sum = Summarize(col);
      rung.summaries.push_back({names_[i], sum.mean, sum.variance, sum.mean_se, sum.variance_se});
      for (std::size_t j = 0; j <= i; ++j) {
        CovarianceSummary c = SampleCovariance(col, Column(rung.values, j));
        rung.covariance[i][j] = rung.covariance[j][i] = c.value / rung.volume;
        rung.covariance_se[i][j] = rung.covariance_se[j][i] = c.std_error / rung.volume;
      }
    }
    rung.min_eigenvalue = MinEigen(rung.covariance);
  }

  void Expectation(RungResult& rung, const Window& w, std::size_t k) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const auto& c = s_.statistics[i];
      const auto& sum = rung.summaries[i];
      if (c.statistic.kind == StatisticKind::kPoints) {
        MomentEstimate exact = MomentEstimate::Exact(s_.beta * rung.volume);
        MomentRecord mean = Record("mean", names_[i], "", exact);
        Compare(mean, sum.mean, sum.mean_se, 0.0);
        MomentRecord var = Record("variance", names_[i], "", exact);
        Compare(var, sum.variance, sum.variance_se, 0.0);
        rung.moments.push_back(mean);
        rung.moments.push_back(var);
        continue;
      }
      auto spec = AnalyticSpec(c);
      if (!spec) continue;
      const auto& phi = Model(s_, c);
      MomentEstimate rho = ExpectedCountIntensity(*spec, phi, s_.beta, s_.dim, Mc(s_, 0x6d65616e00ULL + i, threads_));
      MomentRecord mean = Record("mean", names_[i], "", rung.volume * rho);
      Compare(mean, sum.mean, sum.mean_se, 0.0);
      rung.moments.push_back(mean);
      MomentEstimate var =
          FiniteWindowCovariance(*spec, *spec, phi, phi, w, s_.beta, Mc(s_, 0x7661720000ULL + 64 * k + i, threads_));
      MomentRecord vr = Record("variance", names_[i], "", var);
      Compare(vr, sum.variance, sum.variance_se, 0.0);
      rung.moments.push_back(vr);
    }
  }

  void PrepareCovariance(ExperimentResult& r) {
    const std::size_t m = names_.size();
    if (m == 0) return;
    if (s_.replicates < m + 1) throw PreconditionError("covariance needs more replicates than statistics");
    for (const auto& c : s_.statistics) {
      if (!AnalyticSpec(c)) return;  // no analytic matrix; empirical only
    }
    CovarianceMatrix a;
    a.value.assign(m, std::vector<double>(m, 0.0));
    a.std_error = a.value;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) {
        MomentEstimate e = AsymptoticCovariance(s_, i, j, threads_);
        a.value[i][j] = a.value[j][i] = e.value;
        a.std_error[i][j] = a.std_error[j][i] = e.std_error;
        covariance_.push_back(Record("asymptotic_covariance", names_[i], names_[j], e));
      }
    }
    r.analytic_covariance = a.value;
    r.analytic_covariance_se = a.std_error;
    MomentEstimate ev = MinEigenvalue(a);
    analytic_min_eigen_ = ev;
    r.moments.push_back(Record("analytic_min_eigenvalue", "", "", ev));
  }

  void CovarianceRung(RungResult& rung, const ExperimentResult& r) {
    if (r.analytic_covariance.empty()) return;
    const std::size_t m = names_.size();
    std::size_t idx = 0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j, ++idx) {
        MomentRecord rec = covariance_[idx];
        Compare(rec, rung.covariance[i][j], rung.covariance_se[i][j], 0.10);
        rung.moments.push_back(rec);
      }
    }
    MomentRecord ev = Record("min_eigenvalue", "", "", *analytic_min_eigen_);
    Compare(ev, rung.min_eigenvalue, 0.0, 0.10);
    rung.moments.push_back(ev);
  }

  // Mean and sd used to standardize statistic i on rung k.
  StandardizationRecord Standardize(std::size_t i, const Window& w, std::size_t k, bool allow_analytic) {
    const auto& c = s_.statistics[i];
    StandardizationRecord rec;
    rec.statistic = names_[i];
    if (allow_analytic && s_.standardization == "analytic") {
      if (c.statistic.kind == StatisticKind::kPoints) {
        rec.source = "analytic";
        rec.mean = s_.beta * w.Volume();
        rec.sd = std::sqrt(rec.mean);
        return rec;
      }
      if (auto spec = AnalyticSpec(c)) {
        const auto& phi = Model(s_, c);
        MomentEstimate rho = ExpectedCountIntensity(*spec, phi, s_.beta, s_.dim, Mc(s_, 0x6d65616e00ULL + i, threads_));
        MomentEstimate var = FiniteWindowCovariance(*spec, *spec, phi, phi, w, s_.beta,
                                                    Mc(s_, 0x7661720000ULL + 64 * k + i, threads_));
        if (var.value > 0.0) {
          rec.source = "analytic";
          rec.mean = rho.value * w.Volume();
          rec.sd = std::sqrt(var.value);
          return rec;
        }
      }
    }
    rec.source = "pilot";
    rec.pilot_replicates = s_.pilot_replicates;
    Pilot(w, k);
    auto col = Column(pilot_values_[k], i);
    SampleSummary sum = Summarize(col);
    rec.mean = sum.mean;
    rec.sd = std::sqrt(sum.variance);
    return rec;
  }

  // Pilot seeds follow the main replicates.
  void Pilot(const Window& w, std::size_t k) {
    if (pilot_values_.count(k)) return;
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < s_.pilot_replicates; ++i) seeds.push_back(s_.seed_base + s_.replicates + i);
    auto reps = RunReplicates(s_, w, k, seeds, threads_);
    auto& vals = pilot_values_[k];
    for (const auto& rep : reps) vals.push_back(rep.values);
  }

  void StandardizedDistances(RungResult& rung, std::size_t i, const StandardizationRecord& st) {
    if (!(st.sd > 0.0)) throw PreconditionError(names_[i] + ": zero variance, cannot standardize");
    auto col = Column(rung.values, i);
    for (double& v : col) v = (v - st.mean) / st.sd;
    DistanceRecord d;
    d.statistic = names_[i];
    d.n = col.size();
    d.kolmogorov = KolmogorovDistance(col);
    d.wasserstein = WassersteinDistance(col);
    d.dkw99 = DkwRadius(col.size(), 0.01);
    rung.distances.push_back(d);
  }

  void Distances(RungResult& rung, const Window& w, std::size_t k) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      StandardizationRecord st = Standardize(i, w, k, true);
      rung.standardization.push_back(st);
      StandardizedDistances(rung, i, st);
    }
  }

  void FitRates(ExperimentResult& r) {
    if (r.rungs.size() < 3) return;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      std::vector<double> x, y;
      for (const auto& rung : r.rungs) {
        double dk = rung.distances[i].kolmogorov;
        if (dk <= 0.0) continue;
        x.push_back(std::log(rung.volume));
        y.push_back(std::log(dk));
      }
      if (x.size() < 3) continue;
      LinearFit f = FitLine(x, y);
      r.rate_fits.push_back({names_[i], static_cast<int>(x.size()), f.intercept, f.slope, f.slope_se, f.slope_ci_low,
                             f.slope_ci_high});
    }
  }

  FunctionalSpec Spec(std::size_t i, const Window& w) const {
    const auto& c = s_.statistics[i];
    FunctionalSpec spec;
    spec.statistic = c.statistic;
    spec.window = w;
    spec.phi = Model(s_, c);
    spec.beta = s_.beta;
    spec.eps_trunc = s_.eps_trunc;
    return spec;
  }

  BoundRecord Bound(const std::string& term, std::size_t i, const MomentEstimate& e) const {
    BoundRecord b;
    b.term = term;
    b.statistic = names_[i];
    b.value = e.value;
    b.std_error = e.std_error;
    b.budget = e.n_samples;
    b.truncation_radius = e.truncation_radius;
    b.scenario_id = s_.Hash();
    return b;
  }

  void Bounds(RungResult& rung, const Window& w, std::size_t k) {
    const auto& terms = s_.bounds.terms;
    auto wants = [&](const char* t) { return std::find(terms.begin(), terms.end(), t) != terms.end(); };
    AnalysisBudget budget = s_.bounds.budget;
    budget.threads = threads_;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const auto& sum = rung.summaries[i];
      FunctionalSpec spec = Spec(i, w);
      const std::uint64_t stream = 0x626f756e64ULL + 64 * k + i;
      if (wants("poincare")) {
        BoundRecord b = Bound("poincare", i, PoincareBound(spec, budget, DeriveSeed(s_.seed_base, stream)));
        b.empirical = sum.variance;
        b.empirical_se = sum.variance_se;
        b.holds = b.empirical <= b.value + 3.0 * std::hypot(b.std_error, b.empirical_se);
        rung.bounds.push_back(b);
      }
      if (wants("birth_time") && w.Volume() <= kBirthTimeVolumeCap) {
        BoundRecord b =
            Bound("birth_time_variance", i, BirthTimeVariance(spec, budget, DeriveSeed(s_.seed_base, stream + 1)));
        b.empirical = sum.variance;
        b.empirical_se = sum.variance_se;
        b.holds = std::abs(b.value - b.empirical) <=
                  std::max(0.15 * b.empirical, 3.0 * std::hypot(b.std_error, b.empirical_se));
        rung.bounds.push_back(b);
      }
      const bool fourth = wants("fourth_moment"), gamma = wants("gamma");
      if (fourth || gamma) {
        StandardizationRecord st = Standardize(i, w, k, true);
        rung.standardization.push_back(st);
        if (!(st.sd > 0.0)) throw PreconditionError(names_[i] + ": zero variance, cannot standardize");
        spec.mean = st.mean;
        spec.sd = st.sd;
        auto col = Column(rung.values, i);
        for (double& v : col) v = std::pow((v - st.mean) / st.sd, 4);
        SampleSummary f4 = Summarize(col);
        if (fourth) {
          BoundRecord b =
              Bound("fourth_moment", i, FourthMomentBound(spec, budget, DeriveSeed(s_.seed_base, stream + 2)));
          b.empirical = f4.mean;
          b.empirical_se = f4.mean_se;
          b.holds = b.empirical <= b.value + 3.0 * std::hypot(b.std_error, b.empirical_se);
          rung.bounds.push_back(b);
        }
        if (gamma) {
          GammaTerms g = ComputeGammaTerms(spec, budget, f4.mean, DeriveSeed(s_.seed_base, stream + 3));
          for (int t = 0; t < 6; ++t) {
            rung.bounds.push_back(Bound("gamma" + std::to_string(t + 1), i, g.gamma[static_cast<std::size_t>(t)]));
          }
        }
      }
      if (wants("difference") && DifferenceBounded(spec.statistic)) {
        DifferenceChecks(rung, i, spec, DeriveSeed(s_.seed_base, stream + 4));
      }
    }
  }

  void DifferenceChecks(RungResult& rung, std::size_t i, const FunctionalSpec& spec, std::uint64_t seed) {
    const std::uint64_t draws = s_.bounds.draws;
    const int kk = spec.statistic.MaxOrder();
    const double reach = spec.Reach();
    const Window near = spec.window.Padded((kk + 1) * reach);
    std::vector<char> first(draws, 1), second(draws, 1);
    ParallelFor(draws, threads_, [&](std::size_t t) {
      Engine rng = MakeEngine(DeriveSeed(seed, t));
      RcmGraph g = spec.Sample(rng());
      std::vector<double> x(static_cast<std::size_t>(s_.dim)), y(x.size());
      near.SampleUniform(rng, x);
      Window::Ball(x, (kk + 2) * reach).SampleUniform(rng, y);
      first[t] = CheckFirstDifferenceBound(spec, g, x).holds;
      second[t] = CheckSecondDifferenceBound(spec, g, x, y).holds;
    });
    auto violations = [](const std::vector<char>& v) {
      return static_cast<double>(std::count(v.begin(), v.end(), 0));
    };
    for (auto [term, v] : {std::pair{"difference_first", &first}, std::pair{"difference_second", &second}}) {
      BoundRecord b = Bound(term, i, MomentEstimate::Exact(0.0));
      b.budget = draws;
      b.empirical = violations(*v);
      b.holds = b.empirical == 0.0;
      rung.bounds.push_back(b);
    }
  }

  void PrepareTotal() {
    total_index_ = names_.size();
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (s_.statistics[i].statistic.kind == StatisticKind::kTotalComponents && !s_.statistics[i].on_psi) {
        total_index_ = i;
        break;
      }
    }
    if (total_index_ == names_.size()) throw ConfigError("statistics: total needs a total_components statistic");
  }

  void TotalRung(RungResult& rung, const Window& w, std::size_t k) {
    const std::size_t i = total_index_;
    const auto& sum = rung.summaries[i];
    MomentRecord ratio;
    ratio.quantity = "variance_ratio";
    ratio.statistic = names_[i];
    ratio.value = sum.variance / rung.volume;
    ratio.std_error = sum.variance_se / rung.volume;
    ratio.n_samples = rung.replicates;
    ratio.method = ToString(Method::kMonteCarlo);
    ratio.empirical = ratio.value;
    ratio.empirical_se = ratio.std_error;
    rung.moments.push_back(ratio);
    StandardizationRecord st = Standardize(i, w, k, false);
    rung.standardization.push_back(st);
    StandardizedDistances(rung, i, st);
  }

  void FinishTotal(ExperimentResult& r) {
    const std::size_t i = total_index_;
    const auto& top = r.rungs.back().moments.back();
    auto sums = SigmaTotalPartial(s_.partial_sums, s_.phi, s_.beta, s_.dim, Mc(s_, 0x746f74616cULL, threads_));
    for (std::size_t m = 0; m < sums.size(); ++m) {
      MomentRecord rec = Record("sigma_total_partial", names_[i], "m=" + std::to_string(m + 1), sums[m]);
      Compare(rec, top.value, top.std_error, 0.15);
      r.moments.push_back(rec);
    }
    if (r.rungs.size() >= 2) {
      const auto& prev = r.rungs[r.rungs.size() - 2].moments.back();
      MomentRecord change;
      change.quantity = "variance_ratio_change";
      change.statistic = names_[i];
      change.value = std::abs(top.value - prev.value) / prev.value;
      change.std_error = std::hypot(top.std_error / prev.value, top.value * prev.std_error / (prev.value * prev.value));
      change.method = ToString(Method::kMonteCarlo);
      change.agrees = change.value < 0.10;
      r.moments.push_back(change);
    }
  }

  const Scenario& s_;
  Command cmd_;
  int threads_;
  std::vector<std::string> names_;
  std::vector<MomentRecord> covariance_;
  std::optional<MomentEstimate> analytic_min_eigen_;
  std::map<std::size_t, std::vector<std::vector<double>>> pilot_values_;
  std::size_t total_index_ = 0;
};

void WriteFile(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string RungName(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "rung-%02d", index);
  return buf;
}

std::string CensusCsv(const RungResult& rung) {
  std::string out = "replicate,seed,statistic,value,boundary_touching,oversize\n";
  for (std::size_t r = 0; r < rung.values.size(); ++r) {
    for (std::size_t i = 0; i < rung.statistics.size(); ++i) {
      out += std::to_string(r) + "," + std::to_string(rung.seeds[r]) + "," + rung.statistics[i] + "," +
             FormatNumber(rung.values[r][i]) + "," + std::to_string(rung.boundary_touching[r]) + "," +
             std::to_string(rung.oversize[r]) + "\n";
    }
  }
  return out;
}

std::string DistancesCsv(const RungResult& rung) {
  std::string out = "statistic,n,kolmogorov,wasserstein,dkw99,standardization,mean,sd\n";
  for (const auto& d : rung.distances) {
    const StandardizationRecord* st = nullptr;
    for (const auto& s : rung.standardization) {
      if (s.statistic == d.statistic) st = &s;
    }
    out += d.statistic + "," + std::to_string(d.n) + "," + FormatNumber(d.kolmogorov) + "," +
           FormatNumber(d.wasserstein) + "," + FormatNumber(d.dkw99) + "," + (st ? st->source : "") + "," +
           FormatNumber(st ? st->mean : 0.0) + "," + FormatNumber(st ? st->sd : 1.0) + "\n";
  }
  return out;
}

}  // namespace

ExperimentResult RunExperiment(const Scenario& s, Command command, const RunOptions& options) {
  return Runner(s, command, options.threads).Run();
}

std::string Emit(const ExperimentResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::path root = fs::path(dir) / r.scenario_hash;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create " + root.string() + ": " + ec.message());
  json header = {{"command", r.command},   {"scenario_hash", r.scenario_hash}, {"scenario_name", r.scenario_name},
                 {"seed_base", r.seed_base}, {"version", r.version}};
  for (const auto& rung : r.rungs) {
    fs::path p = root / RungName(rung.index);
    fs::create_directories(p, ec);
    if (ec) throw std::runtime_error("cannot create " + p.string() + ": " + ec.message());
    WriteFile(p / "census.csv", CensusCsv(rung));
    WriteFile(p / "distances.csv", DistancesCsv(rung));
    json moments = header;
    moments["rung"] = rung.index;
    moments["moments"] = rung.moments;
    moments["bounds"] = rung.bounds;
    WriteFile(p / "moments.json", moments.dump(2) + "\n");
    json summary = json(rung);
    summary.erase("values");
    summary.erase("seeds");
    summary.erase("sample_points");
    summary.erase("sample_edges");
    summary.erase("boundary_touching");
    summary.erase("oversize");
    summary.update(header);
    WriteFile(p / "summary.json", summary.dump(2) + "\n");
    if (r.command == "sample") {
      const std::size_t d = static_cast<std::size_t>(rung.dim);
      std::string pts = "id";
      for (std::size_t c = 0; c < d; ++c) pts += ",x" + std::to_string(c);
      pts += "\n";
      for (std::size_t v = 0; d > 0 && v * d < rung.sample_points.size(); ++v) {
        pts += std::to_string(v);
        for (std::size_t c = 0; c < d; ++c) pts += "," + FormatNumber(rung.sample_points[v * d + c]);
        pts += "\n";
      }
      WriteFile(p / "points.csv", pts);
      WriteFile(p / "edges.csv", [&] {
        std::string out = "a,b\n";
        for (std::size_t e = 0; e + 1 < rung.sample_edges.size(); e += 2) {
          out += std::to_string(rung.sample_edges[e]) + "," + std::to_string(rung.sample_edges[e + 1]) + "\n";
        }
        return out;
      }());
    }
  }
  WriteFile(root / "result.json", ToJson(r).dump(2) + "\n");
  if (!r.rate_fits.empty()) {
    std::string out = "statistic,rungs,intercept,slope,slope_se,slope_ci_low,slope_ci_high\n";
    for (const auto& f : r.rate_fits) {
      out += f.statistic + "," + std::to_string(f.rungs) + "," + FormatNumber(f.intercept) + "," +
             FormatNumber(f.slope) + "," + FormatNumber(f.slope_se) + "," + FormatNumber(f.slope_ci_low) + "," +
             FormatNumber(f.slope_ci_high) + "\n";
    }
    WriteFile(root / "rates.csv", out);
  }
  return root.string();
}

}  // namespace rcm
