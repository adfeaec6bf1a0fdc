#include "mtt/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mtt
{

const char* to_string(OffloadChoice c) { return c == OffloadChoice::Mobile ? "mobile" : "server"; }

// ---------------------------------------------------------------------------
// Action space

ActionSpace::ActionSpace(int candidates, int budget, long cap) : candidates_(candidates), budget_(budget)
{
  // Subsets ordered by size, then lexicographically.
  long count = 0;
  for (int size = 0; size <= budget; ++size) {
    long c = 1;
    for (int i = 0; i < size; ++i) c = c * (candidates - i) / (i + 1);
    count += c;
  }
  if (count * kOffloadChoices > cap)
    throw ConfigError("env.action_cap", "action space has " + std::to_string(count * kOffloadChoices) +
                                            " actions; lower env.candidates or env.activation_budget");

  subsets_.reserve(static_cast<std::size_t>(count));
  for (int size = 0; size <= budget; ++size) {
    std::vector<int> idx(static_cast<std::size_t>(size));
    std::iota(idx.begin(), idx.end(), 0);
    if (size == 0) {
      subsets_.push_back({});
      continue;
    }
    while (true) {
      subsets_.push_back(idx);
      int pos = size - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == candidates - size + pos) --pos;
      if (pos < 0) break;
      ++idx[static_cast<std::size_t>(pos)];
      for (int j = pos + 1; j < size; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

Action ActionSpace::decode(int index) const
{
  if (index < 0 || index >= size()) throw DomainError("action index " + std::to_string(index) + " out of range");
  Action a;
  const int n = subset_count();
  a.offload = static_cast<OffloadChoice>(index / n);
  a.activate = subsets_[static_cast<std::size_t>(index % n)];
  return a;
}

int ActionSpace::encode(OffloadChoice offload, std::vector<int> activate) const
{
  std::sort(activate.begin(), activate.end());
  const auto it = std::find(subsets_.begin(), subsets_.end(), activate);
  if (it == subsets_.end()) throw DomainError("activation set is not in the action space");
  return static_cast<int>(offload) * subset_count() + static_cast<int>(it - subsets_.begin());
}

ActionSpace action_space(const ScenarioConfig& cfg)
{
  return ActionSpace(cfg.env.candidates, cfg.env.activation_budget, cfg.env.action_cap);
}

// ---------------------------------------------------------------------------
// Environment

namespace
{

constexpr int kSlotFeatures = 9;
constexpr int kMobileFeatures = 10;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

int observation_size(const ScenarioConfig& cfg)
{
  int global = 4;
  if (cfg.env.use_predictor && cfg.env.forecast_mode == ForecastMode::Augment) global += 2;
  return global + kSlotFeatures * cfg.env.candidates + kMobileFeatures * cfg.world.num_mobile;
}

/// Range implied by an amplitude reading under the noise-free model.
double invert_amplitude(double power, double z, double fallback)
{
  if (!(z > 0.0)) return fallback;
  return std::sqrt(std::max(power / (z * z) - 1.0, 0.0));
}

double gain_summary(GainFeature kind, const Eigen::MatrixXd& K, const JacobianT<double>& H)
{
  if (K.size() == 0) return 0.0;
  switch (kind) {
    case GainFeature::Frobenius: return K.norm();
    case GainFeature::Trace: return (K * H).trace();
    case GainFeature::Diagonal: {
      const Eigen::Index n = std::min<Eigen::Index>(K.rows(), K.cols());
      return n ? K.diagonal().head(n).cwiseAbs().maxCoeff() : 0.0;
    }
  }
  return 0.0;
}

}  // namespace

TrackingEnv::TrackingEnv(ScenarioConfig cfg) : cfg_(std::move(cfg))
{
  validate(cfg_);
  space_ = action_space(cfg_);
  obs_dim_ = observation_size(cfg_);
  F_ = constant_velocity_transition(cfg_.world.tick_length);
  Q_ = cfg_.tracker.omit_noise_terms ? Mat4::Zero()
                                 : NoiseSpec{cfg_.world.pos_noise_sigma, cfg_.world.vel_noise_sigma}.covariance();
  reset(0);
}

double TrackingEnv::period() const { return cfg_.world.tick_length * cfg_.energy.ticks_per_period; }

Position TrackingEnv::predicted_position() const { return (F_ * est_.mean).head<2>(); }

double TrackingEnv::battery_total() const
{
  double total = 0.0;
  for (const auto& s : world_.sensors) total += s.battery;
  for (const auto& m : world_.mobiles) total += m.battery;
  return total;
}

double TrackingEnv::tracking_capacity_of(double battery, double capacity, double dist) const
{
  return tracking_capacity(clamp01(battery / capacity), dist, cfg_.energy.omega1, cfg_.energy.omega2);
}

Observation TrackingEnv::reset(std::uint64_t seed)
{
  world_ = init_world(cfg_, seed);
  target_rng_ = Rng(derive_seed(seed, 1));
  meas_rng_ = Rng(derive_seed(seed, 2));

  est_.mean = Vec4(cfg_.world.target_start.x(), cfg_.world.target_start.y(), 0.0, 0.0);
  est_.cov = Vec4(cfg_.tracker.prior_pos_var, cfg_.tracker.prior_pos_var, cfg_.tracker.prior_vel_var,
                  cfg_.tracker.prior_vel_var)
                 .asDiagonal();

  ledger_ = EnergyLedger(world_.sensors.size() + world_.mobiles.size());
  tracking_.assign(world_.mobiles.size(), false);
  history_x_.clear();
  history_y_.clear();
  predictor_fits_ = 0;
  last_t_alpha_ = 0.0;
  gain_feature_ = 0.0;
  initial_battery_ = battery_total();
  done_ = false;
  last_info_ = StepInfo{};
  forecast_ = predicted_position();
  refresh_candidates();
  return observe();
}

void TrackingEnv::refresh_candidates()
{
  const Position anchor = predicted_position();
  std::vector<int> alive;
  for (const auto& s : world_.sensors)
    if (s.alive()) alive.push_back(s.id);
  std::stable_sort(alive.begin(), alive.end(), [&](int a, int b) {
    return distance(world_.sensors[static_cast<std::size_t>(a)].pos, anchor) <
           distance(world_.sensors[static_cast<std::size_t>(b)].pos, anchor);
  });
  alive.resize(std::min<std::size_t>(alive.size(), static_cast<std::size_t>(cfg_.env.candidates)));
  // in-range slots first, by descending tracking capacity; the rest stay nearest first
  auto cap = [&](int id) {
    const auto& sn = world_.sensors[static_cast<std::size_t>(id)];
    const double d = distance(sn.pos, anchor);
    if (d > cfg_.world.sense_range) return -1.0;
    return tracking_capacity_of(sn.battery, cfg_.world.sn_battery, d / cfg_.world.sense_range);
  };
  std::stable_sort(alive.begin(), alive.end(), [&](int a, int b) { return cap(a) > cap(b); });
  candidates_ = std::move(alive);
}

void TrackingEnv::update_predictor()
{
  const Position p = est_.position();
  const auto window = static_cast<std::size_t>(cfg_.tracker.memory_ratio * cfg_.tracker.predictor_horizon);
  history_x_.push_back(p.x());
  history_y_.push_back(p.y());
  if (history_x_.size() > window) {
    history_x_.erase(history_x_.begin());
    history_y_.erase(history_y_.begin());
  }
  if (!cfg_.env.use_predictor || history_x_.size() < window) {
    forecast_ = predicted_position();
    return;
  }
  const int order = cfg_.tracker.predictor_order;
  const int h = cfg_.tracker.predictor_horizon;
  const auto mx = fit_predictor<double>(history_x_, order);
  const auto my = fit_predictor<double>(history_y_, order);
  const auto fx = predict_trajectory<double>(mx, history_x_, h);
  const auto fy = predict_trajectory<double>(my, history_y_, h);
  forecast_ = Position(fx.back(), fy.back());
  if (!forecast_.allFinite()) forecast_ = predicted_position();
  ++predictor_fits_;
}

Observation TrackingEnv::observe() const
{
  Observation obs = Observation::Zero(obs_dim_);
  const double side = cfg_.world.side;
  const double e_scale = cfg_.energy.e_max;
  const bool predictor = cfg_.env.use_predictor;
  const Position pred = predicted_position();
  const Position lead = (predictor && cfg_.env.forecast_mode == ForecastMode::Replace) ? forecast_ : pred;

  Eigen::Index k = 0;
  obs(k++) = clamp01(lead.x() / side);
  obs(k++) = clamp01(lead.y() / side);
  obs(k++) = gain_feature_ / (1.0 + gain_feature_);
  obs(k++) = cfg_.radio.deadline > 0.0 ? clamp01(last_t_alpha_ / (2.0 * cfg_.radio.deadline))
                                       : (last_t_alpha_ > 0.0 ? 1.0 : 0.0);
  if (predictor && cfg_.env.forecast_mode == ForecastMode::Augment) {
    obs(k++) = clamp01(forecast_.x() / side);
    obs(k++) = clamp01(forecast_.y() / side);
  }

  auto energies = [&](std::size_t node) {
    const NodeEnergy& e = ledger_.last(node);
    obs(k++) = clamp01(e.sleep / e_scale);
    obs(k++) = clamp01(e.idle / e_scale);
    obs(k++) = clamp01(e.check / e_scale);
    obs(k++) = clamp01(e.work / e_scale);
    obs(k++) = clamp01(e.trans / e_scale);
    obs(k++) = clamp01(e.com / e_scale);
  };

  const double sense = cfg_.world.sense_range;
  for (int slot = 0; slot < cfg_.env.candidates; ++slot) {
    if (slot >= static_cast<int>(candidates_.size())) {
      obs(k + 1) = 1.0;
      k += kSlotFeatures;
      continue;
    }
    const auto& sn = world_.sensors[static_cast<std::size_t>(candidates_[static_cast<std::size_t>(slot)])];
    const double d = distance(sn.pos, pred);
    obs(k++) = tracking_capacity_of(sn.battery, cfg_.world.sn_battery, d / sense);
    obs(k++) = clamp01(d / (2.0 * sense));
    obs(k++) = clamp01(sn.battery / cfg_.world.sn_battery);
    energies(static_cast<std::size_t>(sn.id));
  }

  const double comm = cfg_.world.comm_range;
  for (const auto& mn : world_.mobiles) {
    const double d = distance(mn.pos, pred);
    obs(k++) = tracking_capacity_of(mn.battery, cfg_.world.mn_battery, d / sense);
    obs(k++) = clamp01(d / (2.0 * comm));
    obs(k++) = clamp01(mn.battery / cfg_.world.mn_battery);
    obs(k++) = tracking_[static_cast<std::size_t>(mn.id)] ? 1.0 : 0.0;
    energies(world_.sensors.size() + static_cast<std::size_t>(mn.id));
  }
  return obs;
}

Environment::Step TrackingEnv::step(int action)
{
  const StepInfo info = step(space_.decode(action), action);
  return {observe(), info.reward, info.done};
}

StepInfo TrackingEnv::step(const Action& action, int action_id)
{
  if (done_) throw DomainError("step called on a finished episode");
  {
    std::vector<int> slots = action.activate;
    std::sort(slots.begin(), slots.end());
    if (std::adjacent_find(slots.begin(), slots.end()) != slots.end())
      throw DomainError("duplicate activation slot");
    if (static_cast<int>(slots.size()) > cfg_.env.activation_budget)
      throw DomainError("activation count exceeds the budget");
    for (int s : slots)
      if (s < 0 || s >= cfg_.env.candidates) throw DomainError("activation slot out of range");
    if (action.track)
      for (int id : *action.track)
        if (id < 0 || id >= static_cast<int>(world_.mobiles.size())) throw DomainError("unknown mobile node id");
  }

  const auto& w = cfg_.world;
  const auto& r = cfg_.radio;
  const auto& p = cfg_.energy;
  const std::size_t n_sn = world_.sensors.size();
  const std::size_t n_mn = world_.mobiles.size();
  const double dt = w.tick_length;
  const double eta = cfg_.env.cooperative ? r.split_eta : 0.0;
  const Position decision_anchor = predicted_position();

  std::vector<bool> active(n_sn, false);
  for (int slot : action.activate)
    if (slot < static_cast<int>(candidates_.size())) active[static_cast<std::size_t>(candidates_[static_cast<std::size_t>(slot)])] = true;

  // Capacity scores at decision time feed the accuracy constraint.
  std::vector<double> con(n_sn, 0.0);
  for (const auto& sn : world_.sensors)
    con[static_cast<std::size_t>(sn.id)] =
        tracking_capacity_of(sn.battery, w.sn_battery, distance(sn.pos, decision_anchor) / w.sense_range);

  StepInfo info;
  info.action_id = action_id;
  for (bool a : active) info.activated += a ? 1 : 0;

  std::vector<NodeEnergy> period_energy(n_sn + n_mn);
  std::vector<bool> c2_flag(n_sn + n_mn, false);
  std::vector<int> accepted_ids;

  for (int sub = 0; sub < p.ticks_per_period; ++sub) {
    // Target motion.
    TargetState tgt = world_.target;
    if (w.random_heading) {
      const double turn = w.heading_sigma * standard_normal(target_rng_);
      const double c = std::cos(turn), s = std::sin(turn);
      tgt.vel = Vec2(c * tgt.vel.x() - s * tgt.vel.y(), s * tgt.vel.x() + c * tgt.vel.y());
    }
    world_.target = step_target(tgt, F_, NoiseSpec{w.pos_noise_sigma, w.vel_noise_sigma}, target_rng_,
                                w.target_max_speed);
    ++world_.tick;
    const Position truth = world_.target.pos;
    if (well_inside(truth, world_.side, w.entry_margin)) world_.target_entered = true;

    est_ = ekf_predict<double>(est_, F_, Q_);
    est_.mean.head<2>() = est_.mean.head<2>().cwiseMax(0.0).cwiseMin(world_.side);
    const Position anchor = cfg_.env.use_predictor ? forecast_ : est_.position();

    // Mobile nodes: explicit schedule, dispatch rule, or parked.
    std::vector<bool> moving(n_mn, false);
    if (action.track) {
      std::fill(tracking_.begin(), tracking_.end(), false);
      for (int id : *action.track) tracking_[static_cast<std::size_t>(id)] = true;
    } else if (action.offload == OffloadChoice::Mobile) {
      bool covered = false;
      for (std::size_t j = 0; j < n_mn; ++j)
        if (world_.mobiles[j].alive() && (tracking_[j] || distance(world_.mobiles[j].pos, anchor) <= w.comm_range))
          covered = true;
      if (!covered) {
        int best = -1;
        for (std::size_t j = 0; j < n_mn; ++j) {
          if (!world_.mobiles[j].alive()) continue;
          if (best < 0 || distance(world_.mobiles[j].pos, anchor) <
                              distance(world_.mobiles[static_cast<std::size_t>(best)].pos, anchor))
            best = static_cast<int>(j);
        }
        if (best >= 0) tracking_[static_cast<std::size_t>(best)] = true;
      }
    } else {
      std::fill(tracking_.begin(), tracking_.end(), false);
    }
    for (std::size_t j = 0; j < n_mn; ++j) {
      auto& mn = world_.mobiles[j];
      if (!tracking_[j] || !mn.alive()) {
        tracking_[j] = false;
        continue;
      }
      const Vec2 to = anchor - mn.pos;
      const double d = to.norm();
      if (d <= w.mn_standoff) {
        tracking_[j] = action.track.has_value();
        continue;
      }
      const double stepLen = std::min(mn.speed * dt, d - w.mn_standoff);
      Position next = mn.pos + to / d * stepLen;
      next = next.cwiseMax(0.0).cwiseMin(world_.side);
      mn.pos = next;
      moving[j] = true;
    }
    const bool move_indicator = std::any_of(moving.begin(), moving.end(), [](bool b) { return b; });

    // Sensing.
    MeasurementBatch<double> batch;
    batch.noise_var = w.meas_sigma * w.meas_sigma;
    batch.source_power = w.source_power;
    for (auto& sn : world_.sensors) {
      const auto i = static_cast<std::size_t>(sn.id);
      if (!sn.alive()) {
        sn.mode = NodeMode::Sleep;
        continue;
      }
      if (!active[i]) {
        sn.mode = transition_mode(sn.mode, ModeEvent::NoTask, false);
        continue;
      }
      sn.mode = transition_mode(NodeMode::Sleep, ModeEvent::TargetDetected, false);
      auto z = measure(sn, truth, w.source_power, w.meas_sigma, meas_rng_);
      if (!z) continue;
      if (uniform01(meas_rng_) < w.outlier_prob)
        *z += (uniform01(meas_rng_) < 0.5 ? -1.0 : 1.0) * w.outlier_scale * w.meas_sigma;
      sn.mode = transition_mode(sn.mode, ModeEvent::DataCollected, false);
      batch.sensor_ids.push_back(sn.id);
      batch.sensor_pos.push_back(sn.pos);
      batch.z.conservativeResize(static_cast<Eigen::Index>(batch.sensor_ids.size()));
      batch.z(batch.z.size() - 1) = *z;
    }
    info.measured = static_cast<int>(batch.size());

    // Destinations, then bandwidth shares among concurrent uploaders.
    ChannelState ch;
    ch.bandwidth_mobile = r.bandwidth_mobile;
    ch.bandwidth_server = r.bandwidth_server;
    ch.noise_power = r.noise_power;
    ch.gain_ref = r.gain_ref;
    ch.server_reach = w.server_reach;
    ch.load_mobile.assign(n_mn, 0);
    ch.load_server.assign(world_.servers.size(), 0);

    std::vector<std::optional<OffloadDecision>> dest(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& sn = world_.sensors[static_cast<std::size_t>(batch.sensor_ids[b])];
      dest[b] = action.offload == OffloadChoice::Mobile ? select_offload_destination(sn, world_, ch)
                                                        : select_server(sn, world_, ch);
      if (!dest[b]) continue;
      auto& load = dest[b]->kind == DestinationKind::Mobile ? ch.load_mobile : ch.load_server;
      ++load[static_cast<std::size_t>(dest[b]->dest)];
    }
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (!dest[b]) {
        ++info.orphans;
        continue;
      }
      auto& d = *dest[b];
      const bool mobile = d.kind == DestinationKind::Mobile;
      const int load = (mobile ? ch.load_mobile : ch.load_server)[static_cast<std::size_t>(d.dest)];
      d.bandwidth = (mobile ? ch.bandwidth_mobile : ch.bandwidth_server) / std::max(1, load);
      const auto& sn = world_.sensors[static_cast<std::size_t>(d.source)];
      d.rate = transmission_rate(d.bandwidth, sn.tx_power, channel_gain(ch.gain_ref, d.dist), ch.noise_power);
    }

    // Fusion: cooperative mobiles prune their own uploads; everything else is
    // pruned together at the edge.
    const VecXT<double> h_pred = measurement_function<double>(est_.mean, batch.sensor_pos, w.source_power);
    std::vector<std::vector<std::size_t>> groups(n_mn + 1);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (!dest[b]) continue;
      const bool at_mobile = cfg_.env.cooperative && dest[b]->kind == DestinationKind::Mobile;
      groups[at_mobile ? static_cast<std::size_t>(dest[b]->dest) : n_mn].push_back(b);
    }
    std::vector<std::size_t> accepted;
    for (const auto& g : groups) {
      if (g.empty()) continue;
      std::vector<double> innov;
      for (auto b : g) innov.push_back(batch.z(static_cast<Eigen::Index>(b)) - h_pred(static_cast<Eigen::Index>(b)));
      const FusionSet fs = fuse_results<double>(innov, cfg_.tracker.fusion_threshold);
      for (auto idx : fs.accepted) accepted.push_back(g[idx]);
    }
    std::sort(accepted.begin(), accepted.end());
    if (!accepted.empty() && cfg_.tracker.gate_sigma > 0.0) {
      MeasurementBatch<double> cand;
      cand.noise_var = batch.noise_var;
      cand.source_power = batch.source_power;
      cand.z.resize(static_cast<Eigen::Index>(accepted.size()));
      for (std::size_t a = 0; a < accepted.size(); ++a) {
        cand.sensor_ids.push_back(batch.sensor_ids[accepted[a]]);
        cand.sensor_pos.push_back(batch.sensor_pos[accepted[a]]);
        cand.z(static_cast<Eigen::Index>(a)) = batch.z(static_cast<Eigen::Index>(accepted[a]));
      }
      std::vector<std::size_t> gated;
      for (auto k : innovation_gate<double>(est_, cand, cfg_.tracker.gate_sigma)) gated.push_back(accepted[k]);
      accepted = std::move(gated);
    }
    info.accepted = static_cast<int>(accepted.size());

    // Latency per delivered task.
    std::vector<int> relay_count(n_mn, 0);
    for (std::size_t b = 0; b < batch.size(); ++b)
      if (dest[b] && dest[b]->kind == DestinationKind::Mobile) ++relay_count[static_cast<std::size_t>(dest[b]->dest)];

    const Task task{r.task_bits, std::max(r.deadline, 1e-300), eta};
    info.t_alpha = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (!dest[b]) continue;
      const auto& d = *dest[b];
      TaskRecord rec;
      rec.tick = world_.tick;
      rec.sn_id = d.source;
      rec.dest_kind = d.kind;
      rec.dest_id = d.dest;
      double tau_c = transmission_latency(r.task_bits, d.rate);
      double tau_beta = 0.0;
      if (d.kind == DestinationKind::Mobile) {
        const auto& mn = world_.mobiles[static_cast<std::size_t>(d.dest)];
        const double forwarded = cfg_.env.cooperative
                                     ? (1.0 - eta) * r.task_bits
                                     : relay_count[static_cast<std::size_t>(d.dest)] * r.task_bits;
        if (r.second_hop) tau_c += transmission_latency(forwarded, r.backhaul_rate);
        tau_beta = compute_latency(task, mn.cpu_freq, w.server_cpu_freq, r.cycles_per_bit).combined();
      } else {
        const Task direct{r.task_bits, task.deadline, 0.0};
        tau_beta = compute_latency(direct, w.mn_cpu_freq, w.server_cpu_freq, r.cycles_per_bit).combined();
      }
      rec.latency.tau_c = tau_c;
      rec.latency.tau_beta = tau_beta;
      rec.latency.tau_a = move_indicator ? r.tau_a : 0.0;
      rec.latency.t_alpha = total_latency(tau_c, tau_beta, move_indicator, r.tau_a);
      rec.deadline_met = deadline_met(rec.latency.t_alpha, r.deadline);
      info.t_alpha = std::max(info.t_alpha, rec.latency.t_alpha);
      ++info.tasks;
      info.deadline_met += rec.deadline_met ? 1 : 0;
      if (!rec.deadline_met) info.c1 = true;
      info.task_log.push_back(rec);
    }
    if (info.tasks > 0) last_t_alpha_ = info.t_alpha;

    // Estimation.
    if (!accepted.empty()) {
      MeasurementBatch<double> used;
      used.noise_var = batch.noise_var;
      used.source_power = batch.source_power;
      used.z.resize(static_cast<Eigen::Index>(accepted.size()));
      for (std::size_t a = 0; a < accepted.size(); ++a) {
        used.sensor_ids.push_back(batch.sensor_ids[accepted[a]]);
        used.sensor_pos.push_back(batch.sensor_pos[accepted[a]]);
        used.z(static_cast<Eigen::Index>(a)) = batch.z(static_cast<Eigen::Index>(accepted[a]));
      }
      const auto m = static_cast<Eigen::Index>(accepted.size());
      MatXT<double> R;
      if (!cfg_.tracker.omit_noise_terms) R = batch.noise_var * MatXT<double>::Identity(m, m);
      const auto upd = ekf_update_iterated<double>(est_, used, R, cfg_.tracker.ekf_iterations);
      if (upd.applied) {
        est_ = upd.est;
        // The target is inside the field while tracked; project the estimate back.
        est_.mean.head<2>() = est_.mean.head<2>().cwiseMax(0.0).cwiseMin(world_.side);
        const double speed = est_.mean.tail<2>().norm();
        if (w.target_max_speed > 0.0 && speed > w.target_max_speed)
          est_.mean.tail<2>() *= w.target_max_speed / speed;
        const JacobianT<double> H = measurement_jacobian<double>(est_.mean, used.sensor_pos, w.source_power);
        gain_feature_ = gain_summary(cfg_.env.gain_feature, upd.gain, H);
      } else {
        info.ekf_skipped = true;
      }
    }
    info.truth = truth;
    info.estimate = est_.position();
    info.position_error = distance(info.estimate, truth);

    accepted_ids.clear();
    if (!accepted.empty()) {
      std::vector<Vec2> node_est;
      for (auto a : accepted) {
        const Vec2 s = batch.sensor_pos[a];
        const double range = invert_amplitude(w.source_power, batch.z(static_cast<Eigen::Index>(a)), w.sense_range);
        Vec2 dir = est_.position() - s;
        dir = dir.norm() > 0.0 ? Vec2(dir.normalized()) : Vec2(1.0, 0.0);
        node_est.push_back(s + range * dir);
        accepted_ids.push_back(batch.sensor_ids[a]);
      }
      info.e_r = tracking_error<double>(node_est, truth);
    } else {
      info.e_r = info.position_error;
    }

    // Energy for this tick.
    std::vector<NodeEnergy> tick_energy(n_sn + n_mn);
    for (const auto& sn : world_.sensors) {
      auto& e = tick_energy[static_cast<std::size_t>(sn.id)];
      e.mode = sn.mode;
      if (!sn.alive()) continue;
      switch (sn.mode) {
        case NodeMode::Sleep: e.sleep = sleep_energy(dt, p.p0); break;
        case NodeMode::Idle: e.idle = idle_energy(dt, p.eta_w, p.p0); break;
        case NodeMode::Check: e.check = p.check_rate * dt; break;
        case NodeMode::Work: break;
      }
    }
    for (std::size_t b = 0; b < batch.size(); ++b)
      if (dest[b]) tick_energy[static_cast<std::size_t>(dest[b]->source)].trans += transmit_energy(p, dest[b]->dist, p.q_r);

    for (std::size_t j = 0; j < n_mn; ++j) {
      auto& mn = world_.mobiles[j];
      auto& e = tick_energy[n_sn + j];
      if (!mn.alive()) {
        mn.mode = NodeMode::Sleep;
        e.mode = mn.mode;
        continue;
      }
      const int relayed = relay_count[j];
      if (relayed > 0 || moving[j]) {
        mn.mode = transition_mode(NodeMode::Sleep, ModeEvent::TargetDetected, true);
        mn.mode = transition_mode(mn.mode, ModeEvent::DataCollected, true);
        if (moving[j]) mn.mode = transition_mode(mn.mode, ModeEvent::ScheduledToTrack, true);
      } else {
        mn.mode = transition_mode(mn.mode, ModeEvent::NoTask, true);
      }
      e.mode = mn.mode;
      switch (mn.mode) {
        case NodeMode::Sleep: e.sleep = sleep_energy(dt, p.p0); break;
        case NodeMode::Idle: e.idle = idle_energy(dt, p.eta_w, p.p0); break;
        case NodeMode::Check: e.check = p.check_rate * dt; break;
        case NodeMode::Work: e.work = work_energy(mn.speed, dt, p.work_cost_per_meter); break;
      }
      if (relayed > 0) {
        e.com = compute_energy(p, eta * r.task_bits, mn.cpu_freq);
        double nearest = -1.0;
        for (const auto& s : world_.servers) {
          const double d = distance(mn.pos, s.pos);
          if (nearest < 0.0 || d < nearest) nearest = d;
        }
        const double forwarded = cfg_.env.cooperative ? (1.0 - eta) * p.q_r : relayed * p.q_r;
        if (nearest >= 0.0) e.trans = transmit_energy(p, nearest, forwarded);
      }
    }

    // Debit through the period cost so the ledger and batteries share one total.
    Eigen::MatrixX4d ind(static_cast<Eigen::Index>(n_sn + n_mn), 4);
    Eigen::MatrixX4d en(static_cast<Eigen::Index>(n_sn + n_mn), 4);
    std::vector<double> batteries(n_sn + n_mn);
    for (std::size_t i = 0; i < n_sn + n_mn; ++i) {
      ind.row(static_cast<Eigen::Index>(i)) = sat_vector(tick_energy[i].mode).transpose();
      en.row(static_cast<Eigen::Index>(i)) = tick_energy[i].state_vector().transpose();
      batteries[i] = i < n_sn ? world_.sensors[i].battery : world_.mobiles[i - n_sn].battery;
    }
    const PeriodCost cost = period_cost(ind, en, p.e_max, &batteries);
    for (int f : cost.c2_flagged) c2_flag[static_cast<std::size_t>(f)] = true;
    info.energy += cost.joules;

    for (std::size_t i = 0; i < n_sn + n_mn; ++i) {
      NodeEnergy e = tick_energy[i];
      double& battery = i < n_sn ? world_.sensors[i].battery : world_.mobiles[i - n_sn].battery;
      const double want = e.total();
      if (want > battery) {
        const double scale = want > 0.0 ? battery / want : 0.0;
        e.sleep *= scale, e.idle *= scale, e.check *= scale, e.work *= scale, e.trans *= scale, e.com *= scale;
      }
      const double debit = e.total();
      battery = std::max(0.0, battery - debit);
      if (battery <= 0.0) {
        battery = 0.0;
        if (i < n_sn) world_.sensors[i].mode = NodeMode::Sleep;
        else world_.mobiles[i - n_sn].mode = NodeMode::Sleep;
      }
      auto& pe = period_energy[i];
      pe.mode = e.mode;
      pe.sleep += e.sleep, pe.idle += e.idle, pe.check += e.check, pe.work += e.work, pe.trans += e.trans,
          pe.com += e.com;
      if (keep_energy_log)
        info.energy_log.push_back({world_.tick, static_cast<int>(i), e.mode, debit, battery});
    }
    info.moving_mobiles = static_cast<int>(std::count(moving.begin(), moving.end(), true));

    update_predictor();
  }

  for (std::size_t i = 0; i < period_energy.size(); ++i) ledger_.record(i, period_energy[i]);

  // Constraints.
  info.c2 = std::any_of(c2_flag.begin(), c2_flag.end(), [](bool b) { return b; });
  int capable = 0;
  for (int id : accepted_ids) {
    const double c = con[static_cast<std::size_t>(id)];
    if (c < 0.0 || c > 1.0) info.c4 = true;
    if (c > p.phi_min) ++capable;
  }
  info.c3 = capable < p.min_active;

  // Reward.
  const double nodes = static_cast<double>(n_sn + n_mn);
  const double gamma = period();
  const double floor = nodes * p.p0 * gamma;
  const double span = cfg_.env.activation_budget *
                          ((p.check_rate - p.p0) * gamma + transmit_energy(p, w.comm_range, p.q_r)) +
                      static_cast<double>(n_mn) * (p.work_cost_per_meter * w.mn_speed - p.p0) * gamma;
  info.terms.k1 = cfg_.env.k1;
  info.terms.k2 = cfg_.env.k2;
  info.terms.k3 = cfg_.env.k3;
  info.terms.e = span > 0.0 ? clamp01((info.energy - floor) / span) : 0.0;
  info.terms.a = info.accepted > 0
                     ? std::min(1.0, info.position_error * info.position_error /
                                         (cfg_.env.error_norm * cfg_.env.error_norm))
                     : 1.0;
  info.terms.q = (info.c1 || info.c2 || info.c3 || info.c4) ? 1.0 : 0.0;
  info.reward = info.terms.reward();

  bool all_dead = true;
  for (const auto& s : world_.sensors) all_dead = all_dead && !s.alive();
  for (const auto& m : world_.mobiles) all_dead = all_dead && !m.alive();
  done_ = world_.tick >= w.horizon || world_.target_exited() || all_dead;
  info.done = done_;
  info.tick = world_.tick;

  refresh_candidates();
  last_info_ = info;
  return info;
}

}  // namespace mtt
