#include "adaptsde/stepper.hpp"

#include "adaptsde/csv.hpp"
#include "adaptsde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace adaptsde {

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::DriftMean: return "drift_mean";
    case ControllerKind::MeanStdDev: return "mean_stddev";
    case ControllerKind::RelEntropy: return "rel_entropy";
    case ControllerKind::RelEntropyAsymptotic: return "rel_entropy_asymptotic";
  }
  return "unknown";
}

ControllerKind controller_from_string(std::string_view name) {
  for (auto kind : {ControllerKind::DriftMean, ControllerKind::MeanStdDev,
                    ControllerKind::RelEntropy, ControllerKind::RelEntropyAsymptotic}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidArgument("unknown controller '" + std::string(name) + "'");
}

double ErrorController::threshold(double tol) const {
  switch (kind) {
    case ControllerKind::RelEntropy:
    case ControllerKind::RelEntropyAsymptotic: return 2.0 * tol;
    default: return tol;
  }
}

void StepperConfig::validate(bool ergodic) const {
  if (!(tol > 0.0)) throw InvalidArgument("StepperConfig: tol must be > 0");
  if (!(dt_max > 0.0)) throw InvalidArgument("StepperConfig: dt_max must be > 0");
  if (k_init < 0) throw InvalidArgument("StepperConfig: k_init must be >= 0");
  if (k_cap < k_init) throw InvalidArgument("StepperConfig: k_cap must be >= k_init");
  if (!(obs_spacing > 0.0)) throw InvalidArgument("StepperConfig: obs_spacing must be > 0");
  if (ergodic && !(obs_spacing > 5.0 * dt_max)) {
    throw InvalidArgument("StepperConfig: ergodic runs need obs_spacing > 5 dt_max");
  }
}

ChainState ChainState::initial(const Vector& x0, const StepperConfig& config) {
  ChainState s;
  s.x = x0;
  s.k_prev = config.k_init;
  return s;
}

namespace {

// Per-row standard deviation of G eta.
inline double row_sd2(const Matrix& g, Eigen::Index i) { return g.row(i).squaredNorm(); }

double evaluate_metric(ControllerKind kind, const MethodPair& pair, const Vector& x, double dt,
                       Vector& F, Vector& Fbar, Matrix& G, Matrix& Gbar) {
  pair.drifts(x, dt, F, Fbar);
  if (kind == ControllerKind::DriftMean) return pair.mean_scale * (F - Fbar).norm();
  pair.diffusions(x, dt, G, Gbar);
  if (kind == ControllerKind::MeanStdDev) {
    double sd_gap2 = 0.0;
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
      const double gap = std::sqrt(row_sd2(G, i)) - std::sqrt(row_sd2(Gbar, i));
      sd_gap2 += gap * gap;
    }
    return (F - Fbar).norm() + std::sqrt(sd_gap2);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    const double var = row_sd2(G, i);
    if (std::sqrt(var) < 1e-30) {
      throw DegenerateDiffusion("entropy controller: diffusion row " + std::to_string(i) +
                                " vanishes");
    }
    const double mean_gap = F[i] - Fbar[i];
    const double ratio = row_sd2(Gbar, i) / var;
    total += mean_gap * mean_gap / var;
    if (kind == ControllerKind::RelEntropy) {
      total += (ratio - 1.0) - std::log(ratio);
    } else {
      total += 0.5 * (ratio - 1.0) * (ratio - 1.0);
    }
  }
  return total;
}

}  // namespace

double metric(const ErrorController& controller, const MethodPair& pair, const Vector& x,
              double dt) {
  Vector F(pair.dim), Fbar(pair.dim);
  Matrix G(pair.dim, pair.noise_dim), Gbar(pair.dim, pair.noise_dim);
  return evaluate_metric(controller.kind, pair, x, dt, F, Fbar, G, Gbar);
}

int select_k(const StepperConfig& config, const MethodPair& pair, const Vector& x, int l) {
  AdaptiveStepper stepper(config, pair);
  return stepper.select_k(x, l);
}

int k_star(const StepperConfig& config, const MethodPair& pair, const Vector& x) {
  AdaptiveStepper stepper(config, pair);
  const double threshold = config.controller.threshold(config.tol);
  for (int l = config.k_cap; l >= 0; --l) {
    if (!(stepper.metric(x, config.dt_of(l)) <= threshold)) {
      if (l == config.k_cap) {
        throw StepUnderflow("k_star: error control fails even at k_cap");
      }
      return l + 1;
    }
  }
  return 0;
}

AdaptiveStepper::AdaptiveStepper(const StepperConfig& config, const MethodPair& pair)
    : config_(config),
      pair_(pair),
      threshold_(config.controller.threshold(config.tol)),
      F_(pair.dim),
      Fbar_(pair.dim),
      next_(pair.dim),
      increment_(pair.noise_dim),
      G_(pair.dim, pair.noise_dim),
      Gbar_(pair.dim, pair.noise_dim) {
  config_.validate();
  dt_table_.resize(config_.k_cap + 1);
  for (int k = 0; k <= config_.k_cap; ++k) dt_table_[k] = config_.dt_of(k);
}

double AdaptiveStepper::metric(const Vector& x, double dt) {
  return evaluate_metric(config_.controller.kind, pair_, x, dt, F_, Fbar_, G_, Gbar_);
}

int AdaptiveStepper::select_k(const Vector& x, int l) {
  if (l > config_.k_cap) throw InvalidArgument("select_k: l exceeds k_cap");
  for (int k = std::max(l - 1, 0); k <= config_.k_cap; ++k) {
    // NaN metrics never pass.
    last_metric_ = metric(x, dt_table_[k]);
    if (last_metric_ <= threshold_) return k;
  }
  throw StepUnderflow("select_k: no k <= " + std::to_string(config_.k_cap) +
                      " satisfies the error control");
}

void AdaptiveStepper::step(ChainState& state, StepRecord& record, NoiseRef noise) {
  const int k = select_k(state.x, state.k_prev);
  const double dt = dt_table_[k];
  record.k = k;
  record.dt = dt;
  // select_k leaves F_ (and G_ unless only drifts were compared) at the accepted dt.
  record.metric = last_metric_;
  if (config_.controller.kind == ControllerKind::DriftMean) {
    if (pair_.step_diffusion) {
      pair_.step_diffusion(state.x, dt, G_);
    } else {
      pair_.diffusions(state.x, dt, G_, Gbar_);
    }
  }
  record.x_star = state.x + dt * F_;

  // Compensated clock update.
  const double y = dt - state.t_carry;
  const double t_next = state.t + y;
  const double carry = (t_next - state.t) - y;

  const double root_dt = std::sqrt(dt);
  record.eta.resize(pair_.noise_dim);
  if (std::holds_alternative<ZeroNoise>(noise)) {
    record.eta.setZero();
    next_ = record.x_star;
  } else if (auto* stream = std::get_if<NoiseStream*>(&noise)) {
    (*stream)->fill_gaussian(record.eta);
    next_.noalias() = G_.lazyProduct(record.eta);
    next_ = record.x_star + root_dt * next_;
  } else {
    BrownianPath* path = std::get<BrownianPath*>(noise);
    path->increment(state.t, t_next, increment_);
    record.eta = increment_ / root_dt;
    next_.noalias() = G_.lazyProduct(increment_);
    next_ += record.x_star;
  }
  if (!next_.allFinite()) {
    throw NonFinite("step " + std::to_string(state.n) + ": state became non-finite");
  }
  state.x.swap(next_);
  state.k_prev = k;
  state.t = t_next;
  state.t_carry = carry;
  ++state.n;
}

std::pair<ChainState, StepRecord> step_once(const ChainState& state, const StepperConfig& config,
                                            const MethodPair& pair, NoiseRef noise) {
  AdaptiveStepper stepper(config, pair);
  ChainState next = state;
  StepRecord record;
  stepper.step(next, record, noise);
  return {std::move(next), std::move(record)};
}

Trajectory run_path(const Vector& x0, const StepperConfig& config, const MethodPair& pair,
                    NoiseRef noise, double horizon, bool detailed, const StepObserver& observer) {
  if (!(horizon > 0.0)) throw InvalidArgument("run_path: horizon must be > 0");
  if (x0.size() != pair.dim) throw InvalidArgument("run_path: x0 has wrong dimension");
  AdaptiveStepper stepper(config, pair);
  Trajectory traj;
  traj.pair = pair;
  traj.horizon = horizon;
  traj.detailed = detailed;
  if (auto* path = std::get_if<BrownianPath*>(&noise)) traj.path = *path;

  ChainState state = ChainState::initial(x0, config);
  StepRecord record;
  Vector x_prev(pair.dim);
  if (detailed) {
    traj.states.push_back(state.x);
    traj.times.push_back(0.0);
  }
  while (state.t < horizon) {
    if (state.n >= config.max_steps) {
      throw MaxStepsExceeded("run_path: exceeded " + std::to_string(config.max_steps) + " steps");
    }
    const double t_prev = state.t;
    const std::uint64_t n_prev = state.n;
    x_prev = state.x;
    stepper.step(state, record, noise);
    if (state.t >= horizon) {
      if (state.t == horizon) {
        traj.state_at_horizon = state.x;
      } else if (traj.path != nullptr) {
        const Vector dw = traj.path->increment(t_prev, horizon);
        traj.state_at_horizon =
            x_prev + (horizon - t_prev) * stepper.last_drift() + stepper.last_diffusion() * dw;
      } else {
        traj.state_at_horizon = x_prev;
      }
    }
    if (observer) observer(StepEvent{n_prev, t_prev, x_prev, record, state.x});
    if (detailed) {
      traj.steps.push_back(record);
      traj.states.push_back(state.x);
      traj.times.push_back(state.t);
    }
  }
  traj.step_count = state.n;
  traj.final_time = state.t;
  traj.final_state = state.x;
  return traj;
}

Vector interpolate(const Trajectory& traj, double t, InterpolantKind kind) {
  if (!traj.detailed) throw InvalidArgument("interpolate: trajectory was run without detail");
  if (!(t >= 0.0) || t > traj.final_time) throw OutOfRange("interpolate: t outside [0, t_N]");
  const auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
  const std::size_t n = static_cast<std::size_t>(std::distance(traj.times.begin(), it)) - 1;
  const Vector& xn = traj.states[n];
  if (kind == InterpolantKind::PiecewiseConstant || n == traj.steps.size() || t == traj.times[n]) {
    return xn;
  }
  if (traj.path == nullptr) {
    throw InvalidArgument("interpolate: continuous interpolant needs a Brownian path");
  }
  const StepRecord& rec = traj.steps[n];
  const double tn = traj.times[n];
  const Vector drift = traj.pair.primary_drift(xn, rec.dt);
  const Matrix diffusion = traj.pair.primary_diffusion(xn, rec.dt);
  const Vector dw = traj.path->increment(tn, t);
  return xn + (t - tn) * drift + diffusion * dw;
}

ObservationChain observe(const Vector& x0, const StepperConfig& config, const MethodPair& pair,
                         NoiseRef noise, std::size_t count) {
  if (count == 0) throw InvalidArgument("observe: count must be positive");
  AdaptiveStepper stepper(config, pair);
  ObservationChain chain;
  chain.spacing = config.obs_spacing;
  chain.entries.reserve(count);
  ChainState state = ChainState::initial(x0, config);
  StepRecord record;
  double last_stop = 0.0;
  while (chain.entries.size() < count) {
    if (state.n >= config.max_steps) {
      throw MaxStepsExceeded("observe: exceeded " + std::to_string(config.max_steps) + " steps");
    }
    const bool stopping = state.t >= config.obs_spacing + last_stop;
    const double t_n = state.t;
    const std::uint64_t n = state.n;
    stepper.step(state, record, noise);
    if (stopping) {
      chain.entries.push_back(Observation{state.x, record.k, t_n, n});
      last_stop = t_n;
    }
  }
  return chain;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  if (!traj.detailed) throw InvalidArgument("write_trajectory_csv: trajectory has no detail");
  csv::Writer w(out);
  std::vector<std::string> cols = {"n", "t", "k", "dt", "metric"};
  for (int i = 0; i < traj.pair.dim; ++i) cols.push_back("x_" + std::to_string(i + 1));
  w.header(cols);
  for (std::size_t n = 0; n < traj.steps.size(); ++n) {
    const auto& rec = traj.steps[n];
    w.cell(n).cell(traj.times[n]).cell(rec.k).cell(rec.dt).cell(rec.metric);
    for (Eigen::Index i = 0; i < traj.states[n].size(); ++i) w.cell(traj.states[n][i]);
    w.end_row();
  }
}

}  // namespace adaptsde
