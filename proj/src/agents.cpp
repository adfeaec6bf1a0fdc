#include "mtt/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mtt
{

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity)
{
  if (capacity == 0) throw DomainError("replay capacity must be >= 1");
  items_.reserve(capacity);
}

void ReplayMemory::push(Transition t)
{
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[cursor_] = std::move(t);
  cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayMemory::at(std::size_t i) const
{
  if (i >= items_.size()) throw DomainError("replay index out of range");
  return items_[(cursor_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayMemory::sample(std::size_t n, Rng& rng) const
{
  if (items_.size() < n || n == 0) throw DomainError("not enough transitions to sample a batch");
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &items_[uniform_index(rng, items_.size())];
  return out;
}

namespace
{

Eigen::MatrixXd stack(std::span<const Transition* const> batch, bool next)
{
  const auto rows = (next ? batch.front()->s2 : batch.front()->s).size();
  Eigen::MatrixXd X(rows, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = next ? batch[j]->s2 : batch[j]->s;
  return X;
}

}  // namespace

Eigen::VectorXd td_target(std::span<const Transition* const> batch, const Net& target, double discount)
{
  if (batch.empty()) throw DomainError("td_target on an empty batch");
  const Eigen::MatrixXd q_next = target.forward_batch(stack(batch, true));
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    y(jj) = batch[j]->r + (batch[j]->done ? 0.0 : discount * q_next.col(jj).maxCoeff());
  }
  return y;
}

double q_update(Net& net, std::span<const Transition* const> batch, const Eigen::VectorXd& targets, double lr,
                double grad_clip, bool* skipped)
{
  std::vector<int> actions;
  actions.reserve(batch.size());
  for (auto* t : batch) actions.push_back(t->a);
  Net::Gradient g;
  const double loss = net.loss_and_gradient(stack(batch, false), actions, targets, g);
  const bool ok = net.apply(g, lr, grad_clip);
  if (skipped) *skipped = !ok;
  return loss;
}

int greedy_action(const Eigen::VectorXd& q)
{
  if (q.size() == 0) throw DomainError("no actions to choose from");
  int best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q(i) > q(best)) best = static_cast<int>(i);
  return best;
}

int select_action(const Net& net, const Observation& s, double epsilon, Rng& rng)
{
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in [0, 1]");
  if (uniform01(rng) < epsilon) return static_cast<int>(uniform_index(rng, static_cast<std::size_t>(net.output_dim())));
  return greedy_action(net.forward(s));
}

bool sync_target(const Net& primary, Net& target, long step, long interval)
{
  if (interval <= 0 || step <= 0 || step % interval != 0) return false;
  target = primary;
  return true;
}

double epsilon_at(const AgentConfig& cfg, int episode)
{
  const int decay = std::max(1, static_cast<int>(std::ceil(cfg.eps_decay_fraction * cfg.episodes)));
  if (episode >= decay || cfg.eps_start <= cfg.eps_end) return std::min(cfg.eps_start, cfg.eps_end);
  if (cfg.eps_end <= 0.0) {
    // Linear when the floor is zero; a geometric ramp cannot reach it.
    return cfg.eps_start * (1.0 - static_cast<double>(episode) / decay);
  }
  return cfg.eps_start * std::pow(cfg.eps_end / cfg.eps_start, static_cast<double>(episode) / decay);
}

TrainResult train_ltdra(Environment& env, const AgentConfig& cfg, std::uint64_t seed)
{
  if (cfg.batch < 1 || cfg.batch > cfg.memory) throw ConfigError("agent.batch", "must lie in [1, agent.memory]");

  std::vector<int> sizes{env.observation_dim()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(env.action_count());

  TrainResult out;
  out.policy = Net(sizes);
  Rng init_rng(derive_seed(seed, 11));
  out.policy.init(init_rng);
  Net target = out.policy;

  Rng rng(derive_seed(seed, 12));
  ReplayMemory memory(static_cast<std::size_t>(cfg.memory));

  // Warm-up: random interaction fills replay and primes the predictor.
  if (cfg.episodes > 0) {
    int rollout = 0;
    Observation s = env.reset(derive_seed(seed, 0x1000));
    for (int t = 0; t < cfg.pretrain_rounds; ++t) {
      const int a = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(env.action_count())));
      auto st = env.step(a);
      memory.push({s, a, st.reward, st.obs, st.done});
      ++out.pretrain_steps;
      if (st.done) {
        out.pretrain_predictor_fits += env.predictor_fits();
        s = env.reset(derive_seed(seed, 0x1000 + static_cast<std::uint64_t>(++rollout)));
      } else {
        s = std::move(st.obs);
      }
    }
    out.pretrain_predictor_fits += env.predictor_fits();
  }

  long step_count = 0;
  int bad_streak = 0;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    EpisodeLog log;
    log.episode = ep;
    log.epsilon = epsilon_at(cfg, ep);
    Observation s = env.reset(derive_seed(seed, 100 + static_cast<std::uint64_t>(ep)));
    double loss_sum = 0.0;
    double err_sum = 0.0;
    double sq_sum = 0.0;
    double lat_sum = 0.0;
    bool done = false;
    while (!done) {
      const int a = select_action(out.policy, s, log.epsilon, rng);
      auto st = env.step(a);
      ++log.steps;
      log.reward += st.reward;
      log.energy += env.step_energy();
      err_sum += env.step_error();
      sq_sum += env.step_error() * env.step_error();
      lat_sum += env.step_latency();
      done = st.done;
      memory.push({s, a, st.reward, st.obs, st.done});
      s = std::move(st.obs);

      if (memory.size() >= static_cast<std::size_t>(cfg.batch)) {
        const auto batch = memory.sample(static_cast<std::size_t>(cfg.batch), rng);
        const Eigen::VectorXd y = td_target(batch, target, cfg.discount);
        bool skipped = false;
        const double loss = q_update(out.policy, batch, y, cfg.learning_rate, cfg.grad_clip, &skipped);
        ++log.updates;
        ++out.total_updates;
        if (skipped) ++log.skipped_updates;
        else loss_sum += loss;
        bad_streak = (!std::isfinite(loss) || loss > 1e6) ? bad_streak + 1 : 0;
        if (bad_streak >= 100) {
          std::ostringstream msg;
          msg << "training diverged: loss above 1e6 for 100 consecutive updates (episode " << ep << ", update "
              << out.total_updates << ", last loss " << loss << ")";
          throw TrainingDiverged(msg.str());
        }
      }
      sync_target(out.policy, target, ++step_count, cfg.sync_interval);
    }
    const int good = log.updates - log.skipped_updates;
    log.mean_loss = good > 0 ? loss_sum / good : 0.0;
    log.mean_error = log.steps > 0 ? err_sum / log.steps : 0.0;
    log.mse = log.steps > 0 ? sq_sum / log.steps : 0.0;
    log.mean_t_alpha = log.steps > 0 ? lat_sum / log.steps : 0.0;
    log.predictor_fits = env.predictor_fits();
    out.log.push_back(log);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Policies

const char* to_string(PolicyKind kind)
{
  switch (kind) {
    case PolicyKind::LTDRA: return "ltdra";
    case PolicyKind::Random: return "random";
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::NonCooperative: return "noncoop";
    case PolicyKind::PlainDQN: return "plaindqn";
  }
  return "?";
}

PolicyKind parse_policy(const std::string& name)
{
  for (auto k : {PolicyKind::LTDRA, PolicyKind::Random, PolicyKind::Greedy, PolicyKind::NonCooperative,
                 PolicyKind::PlainDQN})
    if (name == to_string(k)) return k;
  throw ConfigError("policy", "unknown policy '" + name + "' (ltdra, random, greedy, noncoop, plaindqn)");
}

bool is_learned(PolicyKind kind)
{
  return kind == PolicyKind::LTDRA || kind == PolicyKind::NonCooperative || kind == PolicyKind::PlainDQN;
}

ScenarioConfig policy_scenario(PolicyKind kind, ScenarioConfig cfg)
{
  if (kind == PolicyKind::NonCooperative) cfg.env.cooperative = false;
  if (kind == PolicyKind::PlainDQN) cfg.env.use_predictor = false;
  return cfg;
}

std::vector<int> greedy_activation(std::span<const double> batteries, int budget)
{
  std::vector<int> idx(batteries.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return batteries[static_cast<std::size_t>(a)] > batteries[static_cast<std::size_t>(b)];
  });
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(std::max(0, budget))));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> random_activation(std::span<const double> scores, double threshold, int budget)
{
  std::vector<int> idx;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > threshold) idx.push_back(static_cast<int>(i));
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(std::max(0, budget))));
  return idx;
}

Decision DqnPolicy::decide(const TrackingEnv& env, Rng&)
{
  Decision d;
  d.id = greedy_action(net_.forward(env.observe()));
  d.action = env.actions().decode(d.id);
  return d;
}

Decision RandomPolicy::decide(const TrackingEnv& env, Rng& rng)
{
  const auto& cfg = env.config();
  std::vector<double> scores(static_cast<std::size_t>(cfg.env.candidates));
  for (auto& s : scores) s = uniform01(rng);
  Decision d;
  d.action.offload = OffloadChoice::Server;
  d.action.activate = random_activation(scores, 0.5, cfg.env.activation_budget);
  std::vector<int> track;
  for (const auto& mn : env.world().mobiles)
    if (uniform01(rng) > 0.5) track.push_back(mn.id);
  d.action.track = track;
  d.id = env.actions().encode(d.action.offload, d.action.activate);
  return d;
}

Decision GreedyPolicy::decide(const TrackingEnv& env, Rng&)
{
  const auto& cand = env.candidates();
  std::vector<double> batteries;
  for (int id : cand) batteries.push_back(env.world().sensors[static_cast<std::size_t>(id)].battery);
  Decision d;
  d.action.offload = OffloadChoice::Mobile;
  d.action.activate = greedy_activation(batteries, env.config().env.activation_budget);
  d.id = env.actions().encode(d.action.offload, d.action.activate);
  return d;
}

std::unique_ptr<Policy> baseline_policy(PolicyKind kind)
{
  switch (kind) {
    case PolicyKind::Random: return std::make_unique<RandomPolicy>();
    case PolicyKind::Greedy: return std::make_unique<GreedyPolicy>();
    default: throw DomainError(std::string("policy '") + to_string(kind) + "' must be trained");
  }
}

}  // namespace mtt
