#include "shgl/validation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "shgl/rng.hpp"

namespace shgl {

void ExperimentPlan::validate() const {
  if (eps_list.empty()) throw ConfigError("plan needs at least one eps");
  for (double e : eps_list) {
    try {
      commensurate_denominator(e);
    } catch (const LatticeError& err) {
      throw ConfigError(err.what());
    }
  }
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (!(beta > 1.0)) throw ConfigError("beta must exceed 1");
  if (!(T0 > 0)) throw ConfigError("T0 must be positive");
  if (!(calibration_quantile > 0 && calibration_quantile < 1)) throw ConfigError("calibration quantile must lie in (0,1)");
  if (!(noise_scale >= 0)) throw ConfigError("noise scale must be nonnegative");
  if (error_stride < 1) throw ConfigError("error stride must be >= 1");
  if (oversample < 1) throw ConfigError("oversample must be >= 1");
  if (!(delta_prime > 0 && delta_prime < 3)) throw ConfigError("delta' must lie in (0,3)");
  for (double e : eps_list) config_for(e).validate();
}

SolverConfig ExperimentPlan::config_for(double eps) const {
  SolverConfig cfg = solver;
  cfg.eps = eps;
  cfg.T0 = T0;
  return cfg;
}

std::uint64_t ExperimentPlan::sample_seed(int i) const { return mix_seed(base_seed + static_cast<std::uint64_t>(i)); }

Field make_initial_amplitude(const LatticeSpec& amplitude, const std::vector<AmplitudeMode>& modes) {
  Field B(amplitude);
  for (const auto& m : modes) {
    if (static_cast<int>(m.K.size()) > amplitude.dim()) throw ConfigError("initial amplitude mode has too many components");
    std::vector<int> K(amplitude.dim(), 0);
    std::copy(m.K.begin(), m.K.end(), K.begin());
    const auto i = amplitude.index(K);
    if (i < 0) throw ConfigError("initial amplitude mode lies outside the amplitude lattice");
    B[i] += m.value;
  }
  return B;
}

NoiseModel make_plan_noise(const ExperimentPlan& plan, const LatticeSpec& fine, std::uint64_t seed) {
  Eigen::ArrayXd alpha =
      plan.alpha_table.empty() ? named_alpha(fine, plan.alpha_profile) : tabulated_alpha(fine, plan.alpha_table);
  alpha = restrict_alpha(fine, std::move(alpha), plan.noise_band) * plan.noise_scale;
  return make_noise_model(fine, std::move(alpha), plan.beta, seed);
}

ErrorDecomposer::ErrorDecomposer(const NoiseModel& model, const SolverConfig& cfg)
    : model_(&model), eps_beta_(std::pow(model.eps(), model.beta)), RZ_(model.lattice, true) {
  const auto& fine = model.lattice;
  const Eigen::ArrayXd lambda = cfg.dispersion.on(fine);
  decay_ = Eigen::ArrayXd::Zero(fine.size());
  gain_ = Eigen::ArrayXd::Zero(fine.size());
  sd_ = Eigen::ArrayXd::Zero(fine.size());
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    if (model.ps.values[i] == 0) continue;
    const auto c = stochastic_convolution(lambda[i], cfg.h);
    decay_[i] = c.decay;
    gain_[i] = model.alpha[i] * c.gain;
    sd_[i] = model.alpha[i] * c.residual_sd;
  }
}

void ErrorDecomposer::advance(const StepIncrement& incr) {
  RZ_.coeffs() = decay_.cast<cplx>() * RZ_.coeffs() + gain_.cast<cplx>() * incr.dW.coeffs() +
                 sd_.cast<cplx>() * incr.aux.coeffs();
}

void ErrorDecomposer::advance_deterministic() { RZ_.coeffs() *= decay_.cast<cplx>(); }

ErrorDecomposer::Row ErrorDecomposer::evaluate(const Field& u, const Field& approximation) {
  const double w = model_->lattice.weight();
  const Eigen::ArrayXcd R = (u.coeffs() - approximation.coeffs()) / eps_beta_;
  const double rc = w * (R.abs() * model_->pc.values).sum();
  const double rb = w * ((R * model_->ps.values.cast<cplx>()) - RZ_.coeffs()).abs().sum();
  const double rz = wiener_norm(RZ_);
  sup_Rc_ = std::max(sup_Rc_, rc);
  sup_RB_ = std::max(sup_RB_, rb);
  return {rc, rb, rz, sup_Rc_ + sup_RB_};
}

SampleRecord run_coupled_sample(double eps, std::uint64_t seed, const ExperimentPlan& plan) {
  SampleRecord rec;
  rec.eps = eps;
  rec.seed = seed;
  const SolverConfig cfg = plan.config_for(eps);
  cfg.validate();
  const auto fine = cfg.fine_lattice();
  const auto amp = cfg.amplitude_lattice();
  const NoiseModel model = make_plan_noise(plan, fine, seed);
  const int total = cfg.n_steps();
  const Field B0 = make_initial_amplitude(amp, plan.B0);

  std::optional<WienerIncrements> incr;
  std::optional<AmplitudeNoise> gl_noise;
  if ((model.alpha > 0).any()) {
    incr = sample_increments(model, cfg.h, total);
    gl_noise = gl_noise_from_sh(model, *incr, cfg.H(), amp);
  }
  ShStepper sh(cfg, build_approximation(B0, fine), &model, incr);
  GlSplitStepper gl(cfg, B0, gl_noise, cfg.H());
  std::optional<ErrorDecomposer> dec;
  if (plan.decompose) dec.emplace(model, cfg);
  const auto grid = oversampled_grid(fine, plan.oversample);
  double sup_Z = 0, sup_B = 0;

  auto measure = [&]() {
    const Field approx = build_approximation(gl.A(), fine);
    const Field diff = sh.u() - approx;
    const double err = sup_norm_physical(diff, grid);
    const double t = sh.time();
    if (!std::isfinite(err)) throw NumericalEscape("non-finite approximation error", sh.step_index(), t, err);
    if (sh.step_index() == 0) rec.error_at_t0 = err;
    if (err > rec.sup_error || sh.step_index() == 0) {
      rec.sup_error = err;
      rec.t_at_max = t;
    }
    rec.sup_error_wiener = std::max(rec.sup_error_wiener, wiener_norm(diff));
    sup_Z = std::max(sup_Z, wiener_norm(gl.Z(), 1.0));
    sup_B = std::max(sup_B, wiener_norm(gl.B(), 3.0 - plan.delta_prime));
    if (dec) {
      const auto row = dec->evaluate(sh.u(), approx);
      rec.split.t.push_back(t);
      rec.split.Rc.push_back(row.Rc);
      rec.split.RB.push_back(row.RB);
      rec.split.RZ.push_back(row.RZ);
      rec.split.S.push_back(row.S);
      rec.sup_S = row.S;
    }
  };

  try {
    measure();
    for (int s = 1; s <= total; ++s) {
      sh.step();
      gl.step();
      if (dec) {
        if (sh.last_increment())
          dec->advance(*sh.last_increment());
        else
          dec->advance_deterministic();
      }
      if (s % plan.error_stride == 0 || s == total) measure();
    }
  } catch (const NumericalEscape& e) {
    rec.escaped = true;
    rec.escape_message = e.what();
  }
  rec.ass3 = sup_Z + sup_B;
  return rec;
}

ErrorSplit error_decomposition(const Trajectory& u, const Trajectory& B, const Trajectory& Z, const NoiseModel& model,
                               const SolverConfig& cfg) {
  if (u.steps != B.steps || u.steps != Z.steps) throw std::invalid_argument("error_decomposition: snapshot steps differ");
  if (u.steps.empty()) return {};
  ErrorDecomposer dec(model, cfg);
  std::optional<WienerIncrements> incr;
  if ((model.alpha > 0).any()) incr = sample_increments(model, cfg.h, std::max(u.steps.back(), 1));
  ErrorSplit out;
  int step = 0;
  for (std::size_t m = 0; m < u.steps.size(); ++m) {
    for (; step < u.steps[m]; ++step) {
      if (incr)
        dec.advance(incr->step(step));
      else
        dec.advance_deterministic();
    }
    const auto row = dec.evaluate(u.fields[m], build_approximation(B.fields[m], Z.fields[m], model.lattice));
    out.t.push_back(u.times[m]);
    out.Rc.push_back(row.Rc);
    out.RB.push_back(row.RB);
    out.RZ.push_back(row.RZ);
    out.S.push_back(row.S);
  }
  return out;
}

FitResult fit_exponent(const std::vector<std::pair<double, double>>& pairs) {
  FitResult fit;
  std::vector<double> x, y;
  for (const auto& [eps, err] : pairs) {
    if (!(eps > 0) || !(err > 0) || !std::isfinite(err) || !std::isfinite(eps)) {
      fit.warnings.push_back(fmt::format("excluded non-positive point (eps={}, error={})", eps, err));
      continue;
    }
    x.push_back(std::log(eps));
    y.push_back(std::log(err));
  }
  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw std::invalid_argument("fit_exponent needs at least 3 usable distinct eps values");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    sse += r * r;
  }
  const double dof = n - 2;
  fit.slope_stderr = std::sqrt(sse / dof / sxx);
  const boost::math::students_t dist(dof);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  fit.ci_low = fit.slope - t * fit.slope_stderr;
  fit.ci_high = fit.slope + t * fit.slope_stderr;
  fit.n_used = static_cast<int>(x.size());
  return fit;
}

Interval wilson_interval(int successes, int n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

namespace {

ProbabilityEstimate estimate(const std::vector<SampleRecord>& records, double C, double beta,
                             const std::function<bool(const SampleRecord&)>& include) {
  ProbabilityEstimate est;
  for (const auto& r : records) {
    if (!include(r)) continue;
    ++est.n;
    if (r.escaped) {
      ++est.escaped;
      continue;
    }
    if (r.sup_error <= C * std::pow(r.eps, beta)) ++est.successes;
  }
  est.defined = est.n > 0 && est.escaped < est.n;
  if (est.n > 0) {
    est.p_hat = static_cast<double>(est.successes) / est.n;
    est.wilson = wilson_interval(est.successes, est.n);
  }
  return est;
}

}  // namespace

ProbabilityEstimate estimate_probability(const std::vector<SampleRecord>& records, double C, double beta) {
  return estimate(records, C, beta, [](const SampleRecord&) { return true; });
}

ProbabilityEstimate estimate_probability_conditioned(const std::vector<SampleRecord>& records, double C, double beta,
                                                     double C1) {
  return estimate(records, C, beta, [C1](const SampleRecord& r) { return !r.escaped && r.ass3 <= C1; });
}

double calibrate_constant(const std::vector<SampleRecord>& records, double beta, double q) {
  std::vector<double> scaled;
  for (const auto& r : records)
    if (!r.escaped) scaled.push_back(r.sup_error / std::pow(r.eps, beta));
  if (scaled.empty()) throw std::invalid_argument("cannot calibrate: every sample escaped");
  return quantile(std::move(scaled), q);
}

std::vector<OuMomentRow> ou_moment_check(const LatticeSpec& amplitude, const Eigen::ArrayXd& alpha_A,
                                         const std::vector<std::vector<int>>& K_list, const std::vector<double>& T_list,
                                         int n_paths, std::uint64_t seed, int steps_per_unit) {
  if (n_paths < 2) throw std::invalid_argument("ou_moment_check needs at least 2 paths");
  std::vector<OuMomentRow> rows;
  for (double T : T_list) {
    if (!(T > 0)) throw std::invalid_argument("ou_moment_check times must be positive");
    const int steps = std::max(1, static_cast<int>(std::lround(T * steps_per_unit)));
    const double H = T / steps;
    std::vector<Eigen::Index> idx;
    for (const auto& K : K_list) {
      const auto i = amplitude.index(K);
      if (i < 0) throw std::invalid_argument("ou_moment_check mode outside the amplitude lattice");
      idx.push_back(i);
    }
    const Eigen::ArrayXd k2 = amplitude.k_squared();
    Eigen::ArrayXXd samples(static_cast<Eigen::Index>(idx.size()), n_paths);
    for (int p = 0; p < n_paths; ++p) {
      const auto noise = AmplitudeNoise::standalone(amplitude, alpha_A, mix_seed(seed + static_cast<std::uint64_t>(p)), H, steps);
      for (std::size_t m = 0; m < idx.size(); ++m) {
        const double rate = 1.0 + 4.0 * k2[idx[m]];
        cplx z = 0;
        for (int s = 0; s < steps; ++s) {
          const auto inc = noise.mode(idx[m], s);
          z = ou_exact_step(z, rate, alpha_A[idx[m]], inc.dW, inc.aux, H);
        }
        samples(static_cast<Eigen::Index>(m), p) = std::norm(z);
      }
    }
    for (std::size_t m = 0; m < idx.size(); ++m) {
      const Eigen::ArrayXd v = samples.row(static_cast<Eigen::Index>(m)).transpose();
      const double rate = 1.0 + 4.0 * k2[idx[m]];
      OuMomentRow row;
      row.K = K_list[m];
      row.T = T;
      row.empirical = v.mean();
      row.analytic = alpha_A[idx[m]] * alpha_A[idx[m]] * (1.0 - std::exp(-2.0 * rate * T)) / rate;
      const double var = (v - row.empirical).square().sum() / (n_paths - 1);
      row.std_error = std::sqrt(var / n_paths);
      const double diff = row.empirical - row.analytic;
      row.z = row.std_error > 0 ? diff / row.std_error : (diff == 0 ? 0.0 : std::copysign(INFINITY, diff));
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<OuMomentRow> ou_moment_check(const NoiseModel& model, const LatticeSpec& amplitude,
                                         const std::vector<std::vector<int>>& K_list, const std::vector<double>& T_list,
                                         int n_paths, std::uint64_t seed) {
  return ou_moment_check(amplitude, coupled_alpha_A(model, amplitude), K_list, T_list, n_paths, seed);
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace {

double median(std::vector<double> v) { return v.empty() ? 0.0 : quantile(std::move(v), 0.5); }

void rz_quarters(EpsSummary& point) {
  std::vector<const SampleRecord*> ok;
  for (const auto& r : point.records)
    if (!r.escaped && !r.split.RZ.empty()) ok.push_back(&r);
  if (ok.empty()) return;
  const std::size_t len = ok.front()->split.RZ.size();
  if (len < 4) return;
  std::vector<double> q99(len);
  std::vector<double> column(ok.size());
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t s = 0; s < ok.size(); ++s) column[s] = ok[s]->split.RZ[i];
    q99[i] = quantile(column, 0.99);
  }
  auto mean = [&](std::size_t a, std::size_t b) {
    double acc = 0;
    for (std::size_t i = a; i < b; ++i) acc += q99[i];
    return acc / static_cast<double>(b - a);
  };
  point.rz_q99_third_quarter = mean(len / 2, 3 * len / 4);
  point.rz_q99_fourth_quarter = mean(3 * len / 4, len);
}

}  // namespace

ValidationReport run_plan(const ExperimentPlan& plan, int threads) {
  plan.validate();
  ValidationReport report;
  report.plan = plan;
  const int n_eps = static_cast<int>(plan.eps_list.size());
  const int N = plan.n_samples;
  std::vector<SampleRecord> records(static_cast<std::size_t>(n_eps) * N);
  parallel_for(n_eps * N, threads, [&](int task) {
    const int e = task / N, s = task % N;
    records[task] = run_coupled_sample(plan.eps_list[e], plan.sample_seed(s), plan);
  });

  std::size_t coarsest = 0;
  for (int e = 1; e < n_eps; ++e)
    if (plan.eps_list[e] > plan.eps_list[coarsest]) coarsest = e;
  for (int e = 0; e < n_eps; ++e) {
    EpsSummary point;
    point.eps = plan.eps_list[e];
    point.records.assign(records.begin() + e * N, records.begin() + (e + 1) * N);
    report.points.push_back(std::move(point));
  }
  try {
    report.C = calibrate_constant(report.points[coarsest].records, plan.beta, plan.calibration_quantile);
  } catch (const std::invalid_argument&) {
    report.C = std::nan("");
  }

  std::vector<std::pair<double, double>> fit_points;
  double s_min = INFINITY, s_max = 0;
  for (auto& point : report.points) {
    point.probability = estimate_probability(point.records, report.C, plan.beta);
    point.probability_conditioned = estimate_probability_conditioned(point.records, report.C, plan.beta, plan.C1);
    std::vector<double> errs, sups;
    for (const auto& r : point.records) {
      if (r.escaped) continue;
      errs.push_back(r.sup_error);
      sups.push_back(r.sup_S);
    }
    point.median_sup_error = median(errs);
    point.median_sup_S = median(sups);
    if (!errs.empty()) fit_points.emplace_back(point.eps, point.median_sup_error);
    s_min = std::min(s_min, point.median_sup_S);
    s_max = std::max(s_max, point.median_sup_S);
    rz_quarters(point);
  }
  if (fit_points.size() >= 3) {
    try {
      report.fit = fit_exponent(fit_points);
    } catch (const std::invalid_argument&) {
    }
  }
  report.sup_S_ratio = s_min > 0 ? s_max / s_min : INFINITY;
  return report;
}

namespace {

nlohmann::json to_json(const ProbabilityEstimate& p) {
  return {{"defined", p.defined}, {"n", p.n},
          {"successes", p.successes}, {"escaped", p.escaped},
          {"p_hat", p.p_hat}, {"wilson_low", p.wilson.low},
          {"wilson_high", p.wilson.high}};
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const FitResult& fit) {
  return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"slope_stderr", fit.slope_stderr},
          {"ci_low", fit.ci_low}, {"ci_high", fit.ci_high}, {"n_used", fit.n_used},
          {"warnings", fit.warnings}};
}

nlohmann::json to_json(const ValidationReport& report) {
  nlohmann::json j;
  const auto& plan = report.plan;
  j["plan"] = {{"eps_list", plan.eps_list}, {"beta", plan.beta}, {"n_samples", plan.n_samples},
               {"T0", plan.T0}, {"h", plan.solver.h}, {"base_seed", plan.base_seed},
               {"alpha_profile", plan.alpha_profile}, {"calibration_quantile", plan.calibration_quantile},
               {"C1", plan.C1}, {"delta_prime", plan.delta_prime}};
  j["C"] = finite_or_null(report.C);
  j["points"] = nlohmann::json::array();
  for (const auto& p : report.points) {
    j["points"].push_back({{"eps", p.eps},
                           {"probability", to_json(p.probability)},
                           {"probability_conditioned", to_json(p.probability_conditioned)},
                           {"median_sup_error", p.median_sup_error},
                           {"median_sup_S", p.median_sup_S},
                           {"rz_q99_third_quarter", p.rz_q99_third_quarter},
                           {"rz_q99_fourth_quarter", p.rz_q99_fourth_quarter}});
  }
  j["fit"] = report.fit ? to_json(*report.fit) : nlohmann::json(nullptr);
  j["sup_S_ratio"] = finite_or_null(report.sup_S_ratio);
  return j;
}

void write_records_csv(std::ostream& os, const ValidationReport& report) {
  os << "eps,seed,sup_error,t_at_max,escaped,sup_error_wiener,ass3,sup_S\n";
  for (const auto& p : report.points)
    for (const auto& r : p.records)
      os << fmt::format("{},{},{},{},{},{},{},{}\n", r.eps, r.seed, r.sup_error, r.t_at_max, r.escaped ? 1 : 0,
                        r.sup_error_wiener, r.ass3, r.sup_S);
}

}  // namespace shgl
