#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>

namespace etmpc {

class PpoTrainer;
class MetaPolicy;
class Mlp;

// Flat named-tensor archive: little-endian float64 matrices plus raw byte
// blobs (rng streams), keyed by name. Self-contained for exact resume.
class Checkpoint {
 public:
  void put(const std::string& name, const Eigen::MatrixXd& value) { tensors_[name] = value; }
  void put_scalar(const std::string& name, double value) {
    tensors_[name] = Eigen::MatrixXd::Constant(1, 1, value);
  }
  void put_bytes(const std::string& name, const std::string& bytes) { blobs_[name] = bytes; }

  bool has(const std::string& name) const { return tensors_.count(name) || blobs_.count(name); }
  const Eigen::MatrixXd& get(const std::string& name) const;
  double get_scalar(const std::string& name) const { return get(name)(0, 0); }
  const std::string& get_bytes(const std::string& name) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  const std::map<std::string, Eigen::MatrixXd>& tensors() const { return tensors_; }

 private:
  std::map<std::string, Eigen::MatrixXd> tensors_;
  std::map<std::string, std::string> blobs_;
};

// Trainer state <-> checkpoint mapping. Policy-only restore serves
// evaluation and ablation; the full restore resumes training exactly.
Checkpoint make_checkpoint(const PpoTrainer& trainer, std::uint64_t config_hash,
                           std::uint64_t testset_hash);
void restore_policy(const Checkpoint& ck, MetaPolicy* policy, Mlp* value_net);
void restore_trainer(const Checkpoint& ck, PpoTrainer* trainer);

}  // namespace etmpc
