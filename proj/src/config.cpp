#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "errors.hpp"
#include "hash.hpp"

namespace etmpc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string format_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

// binds every known section.key to a parse function and a serializer
class Schema {
 public:
  void bind_double(const std::string& key, double* target) {
    parse_[key] = [target, key](const std::string& v) {
      try {
        std::size_t pos = 0;
        *target = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": '" + v + "'");
      }
    };
    write_[key] = [target] { return format_double(*target); };
  }
  void bind_int(const std::string& key, int* target) {
    parse_[key] = [target, key](const std::string& v) {
      try {
        *target = std::stoi(v);
      } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
      }
    };
    write_[key] = [target] { return std::to_string(*target); };
  }
  void bind_int64(const std::string& key, std::int64_t* target) {
    parse_[key] = [target, key](const std::string& v) {
      try {
        *target = std::stoll(v);
      } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
      }
    };
    write_[key] = [target] { return std::to_string(*target); };
  }
  void bind_uint64(const std::string& key, std::uint64_t* target) {
    parse_[key] = [target, key](const std::string& v) {
      try {
        *target = std::stoull(v);
      } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
      }
    };
    write_[key] = [target] { return std::to_string(*target); };
  }
  void bind_int_list(const std::string& key, std::vector<int>* target) {
    parse_[key] = [target, key](const std::string& v) {
      std::vector<int> out;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
          out.push_back(std::stoi(item));
        } catch (const std::exception&) {
          throw ConfigError("invalid integer list for " + key + ": '" + v + "'");
        }
      }
      if (out.empty()) throw ConfigError("empty list for " + key);
      *target = out;
    };
    write_[key] = [target] { return format_ints(*target); };
  }

  void apply(const std::string& key, const std::string& value) const {
    const auto it = parse_.find(key);
    if (it == parse_.end()) throw ConfigError("unknown config key: " + key);
    it->second(value);
  }

  std::string serialize() const {
    std::ostringstream os;
    std::string section;
    for (const auto& [key, writer] : write_) {
      const auto dot = key.find('.');
      const std::string sec = key.substr(0, dot);
      if (sec != section) {
        os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
        section = sec;
      }
      os << key.substr(dot + 1) << " = " << writer() << "\n";
    }
    return os.str();
  }

 private:
  std::map<std::string, std::function<void(const std::string&)>> parse_;
  std::map<std::string, std::function<std::string()>> write_;
};

Schema build_schema(ExperimentConfig* c) {
  Schema s;
  auto bind_params = [&s](const std::string& sec, PendulumParams* p) {
    s.bind_double(sec + ".m", &p->m);
    s.bind_double(sec + ".M_total", &p->M);
    s.bind_double(sec + ".g", &p->g);
    s.bind_double(sec + ".l", &p->l);
    s.bind_double(sec + ".mu_c", &p->mu_c);
    s.bind_double(sec + ".mu_p", &p->mu_p);
    s.bind_double(sec + ".dt", &p->dt);
  };
  bind_params("plant", &c->plant);
  bind_params("model", &c->model);
  s.bind_int("episode.max_steps", &c->episode.max_steps);
  s.bind_int("episode.reference_period", &c->episode.reference_period);
  s.bind_double("ocp.rho", &c->rho);
  s.bind_double("ocp.kkt_tol", &c->ocp.kkt_tol);
  s.bind_int("ocp.max_iterations", &c->ocp.max_iterations);
  s.bind_double("ocp.mu_init", &c->ocp.mu_init);
  s.bind_double("ocp.mu_init_warm", &c->ocp.mu_init_warm);
  s.bind_double("ocp.u_min", &c->u_min);
  s.bind_double("ocp.u_max", &c->u_max);
  s.bind_double("ocp.psi_min", &c->psi_min);
  s.bind_double("ocp.psi_max", &c->psi_max);
  s.bind_int("horizon.n_min", &c->n_min);
  s.bind_int("horizon.n_max", &c->n_max);
  s.bind_double("reward.lambda_h", &c->reward.lambda_h);
  s.bind_double("reward.lambda_c", &c->reward.lambda_c);
  s.bind_double("policy.c_init", &c->policy.c_init);
  s.bind_double("policy.n_init", &c->policy.n_init);
  s.bind_double("policy.sigma_init", &c->policy.sigma_init);
  s.bind_double("policy.alpha_init", &c->policy.alpha_init);
  s.bind_int("policy.head_hidden", &c->policy.head_hidden);
  s.bind_int("policy.value_hidden", &c->policy.value_hidden);
  s.bind_double("ppo.gamma", &c->ppo.gamma);
  s.bind_double("ppo.lam", &c->ppo.lam);
  s.bind_int("ppo.z", &c->ppo.z);
  s.bind_int("ppo.n_envs", &c->ppo.n_envs);
  s.bind_int("ppo.noptepochs", &c->ppo.noptepochs);
  s.bind_int("ppo.nminibatches", &c->ppo.nminibatches);
  s.bind_double("ppo.lr", &c->ppo.lr);
  s.bind_double("ppo.clip", &c->ppo.clip);
  s.bind_double("ppo.vf_coef", &c->ppo.vf_coef);
  s.bind_double("ppo.ent_coef", &c->ppo.ent_coef);
  s.bind_double("ppo.max_grad_norm", &c->ppo.max_grad_norm);
  s.bind_int("ppo.normalizer_warmup_steps", &c->ppo.normalizer_warmup_steps);
  s.bind_int("experiment.test_set_size", &c->test_set_size);
  s.bind_uint64("experiment.test_set_seed", &c->test_set_seed);
  s.bind_int("experiment.model_seeds", &c->model_seeds);
  s.bind_int("experiment.eval_seeds", &c->eval_seeds);
  s.bind_int_list("experiment.sweep_horizons", &c->sweep_horizons);
  s.bind_int_list("experiment.sweep_schedules", &c->sweep_schedules);
  s.bind_int64("experiment.train_steps", &c->train_steps);
  s.bind_int("experiment.eval_interval_phases", &c->eval_interval_phases);
  s.bind_int("experiment.checkpoint_interval_phases", &c->checkpoint_interval_phases);
  s.bind_int_list("experiment.frame_skip", &c->frame_skip);
  s.bind_int("experiment.frame_skip_horizon_mode", &c->frame_skip_horizon_mode);
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  ExperimentConfig c;
  Schema schema = build_schema(&c);
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section at line " + std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value at line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError("key outside any section at line " + std::to_string(line_no));
    schema.apply(section + "." + key, value);
  }
  c.validate();
  return c;
}

std::string ExperimentConfig::serialize() const {
  auto copy = *this;
  return build_schema(&copy).serialize();
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << serialize();
}

std::uint64_t ExperimentConfig::hash() const {
  Fnv1a h;
  h.add(serialize());
  return h.value();
}

ControllerConfig ExperimentConfig::controller_config() const {
  ControllerConfig cc;
  cc.model_params = model;
  cc.ocp_settings = ocp;
  cc.rho = rho;
  cc.n_min = n_min;
  cc.n_max = n_max;
  cc.u_min = u_min;
  cc.u_max = u_max;
  cc.psi_min = psi_min;
  cc.psi_max = psi_max;
  return cc;
}

TrainSetup ExperimentConfig::train_setup(TrainMode mode, std::uint64_t seed, int workers) const {
  TrainSetup ts;
  ts.policy = policy;
  ts.policy.n_min = n_min;
  ts.policy.n_max = n_max;
  ts.ppo = ppo;
  ts.controller = controller_config();
  ts.reward = reward;
  ts.episode = episode;
  ts.plant = plant;
  ts.mode = mode;
  ts.seed = seed;
  ts.frame_skip_choices =
      mode == TrainMode::kHorizon ? std::vector<int>{frame_skip_horizon_mode} : frame_skip;
  ts.workers = workers;
  return ts;
}

void ExperimentConfig::validate() const {
  plant.validate();
  model.validate();
  if (episode.max_steps <= 0) throw ConfigError("episode.max_steps must be positive");
  if (episode.reference_period <= 0) throw ConfigError("episode.reference_period must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("ocp.rho must lie in (0, 1]");
  if (n_min < 1 || n_max < n_min) throw ConfigError("horizon bounds must satisfy 1 <= n_min <= n_max");
  if (!(reward.lambda_h < 0)) throw ConfigError("reward.lambda_h must be negative");
  if (!(policy.c_init > 0.0 && policy.c_init < 1.0)) throw ConfigError("policy.c_init must be in (0, 1)");
  if (policy.n_init < n_min || policy.n_init > n_max)
    throw ConfigError("policy.n_init must lie within the horizon bounds");
  if (test_set_size <= 0) throw ConfigError("experiment.test_set_size must be positive");
  for (const int k : sweep_schedules)
    if (k < 1) throw ConfigError("sweep schedules must be >= 1");
  for (const int n : sweep_horizons)
    if (n < n_min || n > n_max) throw ConfigError("sweep horizons must lie within the horizon bounds");
}

}  // namespace etmpc
