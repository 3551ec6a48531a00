#include "checkpoint.hpp"

#include <bit>
#include <fstream>

#include "errors.hpp"
#include "ppo.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace etmpc {

namespace {

constexpr char kMagic[8] = {'E', 'T', 'M', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

}  // namespace

const Eigen::MatrixXd& Checkpoint::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw NumericError("checkpoint: missing tensor " + name);
  return it->second;
}

const std::string& Checkpoint::get_bytes(const std::string& name) const {
  const auto it = blobs_.find(name);
  if (it == blobs_.end()) throw NumericError("checkpoint: missing blob " + name);
  return it->second;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kFormatVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(blobs_.size()));
  for (const auto& [name, m] : tensors_) {
    write_string(out, name);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
  for (const auto& [name, bytes] : blobs_) {
    write_string(out, name);
    write_string(out, bytes);
  }
  if (!out) throw ConfigError("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, 8) != std::string(kMagic, 8))
    throw ConfigError("not a checkpoint file: " + path);
  if (read_pod<std::uint32_t>(in) != kFormatVersion)
    throw ConfigError("unsupported checkpoint version: " + path);
  const auto n_tensors = read_pod<std::uint32_t>(in);
  const auto n_blobs = read_pod<std::uint32_t>(in);
  Checkpoint ck;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = read_string(in);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    Eigen::MatrixXd m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    ck.tensors_[name] = std::move(m);
  }
  for (std::uint32_t i = 0; i < n_blobs; ++i) {
    const std::string name = read_string(in);
    ck.blobs_[name] = read_string(in);
  }
  if (!in) throw ConfigError("truncated checkpoint: " + path);
  return ck;
}

namespace {

void put_mlp(Checkpoint* ck, const std::string& prefix, const Mlp& net) {
  for (int layer = 0; layer < net.num_layers(); ++layer) {
    ck->put(prefix + ".w" + std::to_string(layer), net.weight(layer));
    ck->put(prefix + ".b" + std::to_string(layer), net.bias(layer));
  }
}

void get_mlp(const Checkpoint& ck, const std::string& prefix, Mlp* net) {
  for (int layer = 0; layer < net->num_layers(); ++layer) {
    net->weight(layer) = ck.get(prefix + ".w" + std::to_string(layer));
    net->bias(layer) = ck.get(prefix + ".b" + std::to_string(layer));
  }
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd ints_to_vector(const std::vector<int>& v) {
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

void put_runner(Checkpoint* ck, const std::string& prefix, const PpoTrainer::RunnerState& st) {
  ck->put_bytes(prefix + ".rng", st.rng);
  ck->put(prefix + ".env_x", st.env_x);
  ck->put(prefix + ".env_refs", to_vector(st.env_refs));
  Eigen::VectorXd meta(7);
  meta << st.env_t, st.env_u_prev, st.env_violated ? 1.0 : 0.0, st.episode_active ? 1.0 : 0.0,
      st.frame_skip, st.last_compute, st.segment ? 1.0 : 0.0;
  ck->put(prefix + ".meta", meta);
  ck->put(prefix + ".s", st.s.features());
  Eigen::VectorXd stats(7);
  stats << st.stats.cost_stage, st.stats.cost_violation, st.stats.cost_computation, st.stats.steps,
      st.stats.solves, st.stats.violated ? 1.0 : 0.0, st.stats.solve_time;
  ck->put(prefix + ".stats", stats);
  ck->put(prefix + ".stats_horizons", ints_to_vector(st.stats.horizons));
  ck->put(prefix + ".stats_gaps", ints_to_vector(st.stats.gaps));
  if (st.segment) {
    const auto& seg = *st.segment;
    ck->put(prefix + ".seg_u", seg.u_plan);
    ck->put(prefix + ".seg_x", seg.x_pred);
    Eigen::MatrixXd a(4, 4 * seg.horizon), b(4, seg.horizon);
    for (int k = 0; k < seg.horizon; ++k) {
      a.middleCols(4 * k, 4) = seg.a_seq[k];
      b.col(k) = seg.b_seq[k];
    }
    ck->put(prefix + ".seg_a", a);
    ck->put(prefix + ".seg_b", b);
    ck->put_scalar(prefix + ".seg_ref", seg.ref);
  }
}

PpoTrainer::RunnerState get_runner(const Checkpoint& ck, const std::string& prefix) {
  PpoTrainer::RunnerState st;
  st.rng = ck.get_bytes(prefix + ".rng");
  st.env_x = ck.get(prefix + ".env_x");
  const Eigen::VectorXd refs = ck.get(prefix + ".env_refs");
  st.env_refs.assign(refs.data(), refs.data() + refs.size());
  const Eigen::VectorXd meta = ck.get(prefix + ".meta");
  st.env_t = static_cast<int>(meta(0));
  st.env_u_prev = meta(1);
  st.env_violated = meta(2) != 0.0;
  st.episode_active = meta(3) != 0.0;
  st.frame_skip = static_cast<int>(meta(4));
  st.last_compute = static_cast<int>(meta(5));
  const Eigen::VectorXd s = ck.get(prefix + ".s");
  st.s.x_at_compute = s.segment(0, 4);
  st.s.ref_at_compute = s(4);
  st.s.horizon_at_compute = static_cast<int>(s(5));
  st.s.x_now = s.segment(6, 4);
  st.s.ref_now = s(10);
  st.s.steps_since = static_cast<int>(s(11));
  const Eigen::VectorXd stats = ck.get(prefix + ".stats");
  st.stats.cost_stage = stats(0);
  st.stats.cost_violation = stats(1);
  st.stats.cost_computation = stats(2);
  st.stats.steps = static_cast<int>(stats(3));
  st.stats.solves = static_cast<int>(stats(4));
  st.stats.violated = stats(5) != 0.0;
  st.stats.solve_time = stats(6);
  const Eigen::VectorXd horizons = ck.get(prefix + ".stats_horizons");
  for (Eigen::Index i = 0; i < horizons.size(); ++i)
    st.stats.horizons.push_back(static_cast<int>(horizons(i)));
  const Eigen::VectorXd gaps = ck.get(prefix + ".stats_gaps");
  for (Eigen::Index i = 0; i < gaps.size(); ++i) st.stats.gaps.push_back(static_cast<int>(gaps(i)));
  if (meta(6) != 0.0) {
    auto seg = std::make_shared<PlanSegment>();
    seg->u_plan = ck.get(prefix + ".seg_u");
    seg->x_pred = ck.get(prefix + ".seg_x");
    seg->horizon = static_cast<int>(seg->u_plan.cols());
    const Eigen::MatrixXd a = ck.get(prefix + ".seg_a");
    const Eigen::MatrixXd b = ck.get(prefix + ".seg_b");
    for (int k = 0; k < seg->horizon; ++k) {
      seg->a_seq.push_back(a.middleCols(4 * k, 4));
      seg->b_seq.push_back(b.col(k));
    }
    seg->ref = ck.get_scalar(prefix + ".seg_ref");
    st.segment = std::move(seg);
  }
  return st;
}

}  // namespace

Checkpoint make_checkpoint(const PpoTrainer& trainer, std::uint64_t config_hash,
                           std::uint64_t testset_hash) {
  Checkpoint ck;
  const auto& policy = trainer.policy();
  const auto& p = policy.params();
  put_mlp(&ck, "recompute_net", p.recompute_net);
  put_mlp(&ck, "horizon_net", p.horizon_net);
  put_mlp(&ck, "value_net", trainer.value_net());
  ck.put_scalar("alpha", p.alpha);
  ck.put("lqr.q_chol", p.weights.q_chol);
  ck.put("lqr.r_chol", p.weights.r_chol);
  ck.put_scalar("log_sigma_m", p.log_sigma_m);
  ck.put_scalar("log_sigma_ml", p.log_sigma_ml);
  ck.put("normalizer.mean", policy.normalizer().mean());
  ck.put("normalizer.m2", policy.normalizer().m2());
  ck.put_scalar("normalizer.count", static_cast<double>(policy.normalizer().count()));
  ck.put_scalar("normalizer.frozen", policy.normalizer().frozen() ? 1.0 : 0.0);
  ck.put("adam.m", trainer.optimizer_m());
  ck.put("adam.v", trainer.optimizer_v());
  ck.put_scalar("adam.t", static_cast<double>(trainer.optimizer_t()));
  ck.put_scalar("env_steps", static_cast<double>(trainer.env_steps()));
  ck.put_scalar("config_hash", static_cast<double>(config_hash));
  ck.put_scalar("testset_hash", static_cast<double>(testset_hash));
  for (int e = 0; e < trainer.setup().ppo.n_envs; ++e)
    put_runner(&ck, "runner" + std::to_string(e), trainer.runner_state(e));
  return ck;
}

void restore_policy(const Checkpoint& ck, MetaPolicy* policy, Mlp* value_net) {
  auto& p = policy->params();
  get_mlp(ck, "recompute_net", &p.recompute_net);
  get_mlp(ck, "horizon_net", &p.horizon_net);
  if (value_net) get_mlp(ck, "value_net", value_net);
  p.alpha = ck.get_scalar("alpha");
  p.weights.q_chol = ck.get("lqr.q_chol");
  p.weights.r_chol = ck.get("lqr.r_chol");
  p.log_sigma_m = ck.get_scalar("log_sigma_m");
  p.log_sigma_ml = ck.get_scalar("log_sigma_ml");
  policy->normalizer().restore(ck.get("normalizer.mean"), ck.get("normalizer.m2"),
                               static_cast<std::int64_t>(ck.get_scalar("normalizer.count")),
                               ck.get_scalar("normalizer.frozen") != 0.0);
}

void restore_trainer(const Checkpoint& ck, PpoTrainer* trainer) {
  restore_policy(ck, &trainer->policy(), &trainer->value_net());
  trainer->restore_optimizer(ck.get("adam.m"), ck.get("adam.v"),
                             static_cast<std::int64_t>(ck.get_scalar("adam.t")));
  trainer->set_env_steps(static_cast<std::int64_t>(ck.get_scalar("env_steps")));
  for (int e = 0; e < trainer->setup().ppo.n_envs; ++e) {
    const std::string prefix = "runner" + std::to_string(e);
    if (ck.has(prefix + ".rng")) trainer->restore_runner_state(e, get_runner(ck, prefix));
  }
}

}  // namespace etmpc
