#include "cpg/envs.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace cpg {

namespace {

class DgwwEnv final : public Environment {
 public:
  DgwwEnv(CmdpSpec spec, int side, std::vector<std::pair<int, int>> walls)
      : Environment(std::move(spec)),
        side_(side),
        center_(side / 2),
        walls_(walls.begin(), walls.end()) {
    // Rewards are scaled so that the farthest cell (a corner) scores -1.
    max_dist_ = std::hypot(static_cast<double>(center_),
                           static_cast<double>(center_));
  }

  VectorXd initial_state(RngStream& rng) const override {
    const int corner = rng.uniform_int(4);
    const int hi = side_ - 1;
    VectorXd s(2);
    s << ((corner & 1) ? hi : 0), ((corner & 2) ? hi : 0);
    return s;
  }

  StepResult step(const VectorXd& state, const VectorXd& action,
                  RngStream&) const override {
    int x = static_cast<int>(state[0]);
    int y = static_cast<int>(state[1]);
    switch (static_cast<int>(action[0])) {
      case 0: ++y; break;  // up
      case 1: ++x; break;  // right
      case 2: --x; break;  // left
      case 3: --y; break;  // down
      default: throw std::invalid_argument("dgww: action index must be 0..3");
    }
    x = std::clamp(x, 0, side_ - 1);
    y = std::clamp(y, 0, side_ - 1);

    StepResult res;
    res.next_state = (VectorXd(2) << x, y).finished();
    // Reward and cost are charged for the cell the agent lands on.
    const double dist = std::hypot(static_cast<double>(x - center_),
                                   static_cast<double>(y - center_));
    res.reward = -dist / max_dist_;
    res.costs = VectorXd::Constant(1, walls_.count({x, y}) ? 1.0 : 0.0);
    return res;
  }

  int num_discrete_states() const override { return side_ * side_; }
  int num_discrete_actions() const override { return 4; }
  int state_index(const VectorXd& state) const override {
    return static_cast<int>(state[1]) * side_ + static_cast<int>(state[0]);
  }

 private:
  int side_;
  int center_;
  std::set<std::pair<int, int>> walls_;
  double max_dist_;
};

class CostLqrEnv final : public Environment {
 public:
  CostLqrEnv(CmdpSpec spec, const LqrConfig& cfg)
      : Environment(std::move(spec)), cfg_(cfg) {}

  VectorXd initial_state(RngStream& rng) const override {
    VectorXd s(spec_.state_dim);
    for (int i = 0; i < s.size(); ++i)
      s[i] = rng.uniform(cfg_.init_lo, cfg_.init_hi);
    return s;
  }

  StepResult step(const VectorXd& state, const VectorXd& action,
                  RngStream&) const override {
    StepResult res;
    res.next_state = cfg_.A * state + cfg_.B * action;
    res.reward = -state.dot(cfg_.R * state);
    res.costs = VectorXd::Constant(1, action.dot(cfg_.Q * action));
    return res;
  }

 private:
  LqrConfig cfg_;
};

class RobotWorldEnv final : public Environment {
 public:
  RobotWorldEnv(CmdpSpec spec, const RobotWorldConfig& cfg, MatrixXd A,
                MatrixXd B)
      : Environment(std::move(spec)),
        cfg_(cfg),
        A_(std::move(A)),
        B_(std::move(B)) {}

  VectorXd initial_state(RngStream& rng) const override {
    VectorXd s(4);
    for (int i = 0; i < 4; ++i) s[i] = rng.uniform(cfg_.init_lo, cfg_.init_hi);
    return s;
  }

  StepResult step(const VectorXd& state, const VectorXd& action,
                  RngStream&) const override {
    StepResult res;
    res.next_state = A_ * state + B_ * action;
    res.reward = cfg_.G1.dot(state.cwiseAbs()) + cfg_.R1.dot(action.cwiseAbs()) -
                 0.5 * action.squaredNorm();
    res.costs = VectorXd::Constant(
        1, cfg_.G2.dot(state.cwiseAbs2()) + cfg_.R2.dot(action.cwiseAbs2()));
    return res;
  }

 private:
  RobotWorldConfig cfg_;
  MatrixXd A_, B_;
};

class EnergyCostEnv final : public Environment {
 public:
  EnergyCostEnv(CmdpSpec spec, std::shared_ptr<const Environment> inner,
                double a_min, double a_max)
      : Environment(std::move(spec)),
        inner_(std::move(inner)),
        a_min_(a_min),
        a_max_(a_max) {}

  VectorXd initial_state(RngStream& rng) const override {
    return inner_->initial_state(rng);
  }

  StepResult step(const VectorXd& state, const VectorXd& action,
                  RngStream& rng) const override {
    const VectorXd clipped = action.cwiseMax(a_min_).cwiseMin(a_max_);
    const double energy = (action - clipped).norm();
    StepResult res = inner_->step(state, clipped, rng);
    VectorXd costs(res.costs.size() + 1);
    costs << res.costs, energy;
    res.costs = std::move(costs);
    return res;
  }

  int num_discrete_states() const override { return inner_->num_discrete_states(); }
  int num_discrete_actions() const override { return inner_->num_discrete_actions(); }
  int state_index(const VectorXd& s) const override { return inner_->state_index(s); }

 private:
  std::shared_ptr<const Environment> inner_;
  double a_min_, a_max_;
};

}  // namespace

std::vector<std::pair<int, int>> default_dgww_walls(int side_length) {
  // A U one ring outside the goal: three cells below the center plus the two
  // diagonal neighbours, leaving the row above the center free.
  const int c = side_length / 2;
  return {{c - 1, c - 1}, {c, c - 1}, {c + 1, c - 1}, {c - 1, c}, {c + 1, c}};
}

std::unique_ptr<Environment> make_dgww(const DgwwConfig& cfg) {
  if (cfg.side_length < 5 || cfg.side_length % 2 == 0)
    throw std::invalid_argument("dgww: side_length must be odd and >= 5");
  auto walls = cfg.wall_cells.empty() ? default_dgww_walls(cfg.side_length)
                                      : cfg.wall_cells;
  for (const auto& [x, y] : walls)
    if (x < 0 || x >= cfg.side_length || y < 0 || y >= cfg.side_length)
      throw std::invalid_argument("dgww: wall cell outside the grid");

  CmdpSpec spec;
  spec.state_dim = 2;
  spec.action_dim = 1;  // component 0 holds the discrete action index
  spec.num_constraints = 1;
  spec.thresholds = VectorXd::Constant(1, cfg.threshold);
  spec.gamma = cfg.gamma;
  spec.horizon = cfg.horizon;
  spec.cost_aggregation = cfg.aggregation;
  return std::make_unique<DgwwEnv>(std::move(spec), cfg.side_length,
                                   std::move(walls));
}

std::unique_ptr<Environment> make_cost_lqr(const LqrConfig& cfg) {
  const int ds = static_cast<int>(cfg.A.rows());
  const int da = static_cast<int>(cfg.B.cols());
  if (cfg.A.cols() != ds || cfg.B.rows() != ds)
    throw std::invalid_argument("cost_lqr: A must be d_S x d_S and B d_S x d_A");
  if (cfg.Q.rows() != da || cfg.Q.cols() != da)
    throw std::invalid_argument("cost_lqr: Q must be d_A x d_A");
  if (cfg.R.rows() != ds || cfg.R.cols() != ds)
    throw std::invalid_argument("cost_lqr: R must be d_S x d_S");
  if (!(cfg.init_lo < cfg.init_hi))
    throw std::invalid_argument("cost_lqr: empty initial-state range");

  CmdpSpec spec;
  spec.state_dim = ds;
  spec.action_dim = da;
  spec.num_constraints = 1;
  spec.thresholds = VectorXd::Constant(1, cfg.threshold);
  spec.gamma = cfg.gamma;
  spec.horizon = cfg.horizon;
  spec.cost_aggregation = cfg.aggregation;
  spec.unit_cost_range = false;  // quadratic signals, unbounded per step
  return std::make_unique<CostLqrEnv>(std::move(spec), cfg);
}

std::unique_ptr<Environment> make_robot_world(const RobotWorldConfig& cfg) {
  MatrixXd A = cfg.A;
  MatrixXd B = cfg.B;
  if (A.size() == 0) {
    A = MatrixXd::Identity(4, 4);
    A(0, 2) = 1.0;  // x' = x + vx
    A(1, 3) = 1.0;  // y' = y + vy
  }
  if (B.size() == 0) {
    B = MatrixXd::Zero(4, 2);
    B(2, 0) = 1.0;  // vx' = vx + ax
    B(3, 1) = 1.0;  // vy' = vy + ay
  }
  if (A.rows() != 4 || A.cols() != 4 || B.rows() != 4 || B.cols() != 2)
    throw std::invalid_argument("robot_world: dynamics must be 4x4 and 4x2");

  CmdpSpec spec;
  spec.state_dim = 4;
  spec.action_dim = 2;
  spec.num_constraints = 1;
  spec.thresholds = VectorXd::Constant(1, cfg.threshold);
  spec.gamma = cfg.gamma;
  spec.horizon = cfg.horizon;
  spec.cost_aggregation = cfg.aggregation;
  spec.unit_cost_range = false;  // quadratic signals, unbounded per step
  return std::make_unique<RobotWorldEnv>(std::move(spec), cfg, std::move(A),
                                         std::move(B));
}

std::unique_ptr<Environment> energy_cost_wrapper(
    std::shared_ptr<const Environment> inner, double a_min, double a_max,
    double threshold) {
  if (!(a_min < a_max))
    throw std::invalid_argument("energy_cost_wrapper: a_min must be < a_max");
  CmdpSpec spec = inner->spec();
  spec.num_constraints += 1;
  VectorXd b(spec.num_constraints);
  b << spec.thresholds, threshold;
  spec.thresholds = std::move(b);
  spec.unit_cost_range = false;  // the energy cost is unbounded
  return std::make_unique<EnergyCostEnv>(std::move(spec), std::move(inner),
                                         a_min, a_max);
}

}  // namespace cpg
