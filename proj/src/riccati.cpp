#include "riccati.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>

#include "errors.hpp"

namespace etmpc::lqr {

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, int rows, int cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

}  // namespace

Weights Weights::from_matrices(const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  // Q = L^T L with L lower-triangular is the Cholesky factorization of the
  // index-reversed matrix: with J the anti-identity, J Q J = C C^T gives
  // U = J C J upper-triangular, Q = U U^T, and L = U^T.
  auto factor = [](const Eigen::MatrixXd& m) {
    const int n = static_cast<int>(m.rows());
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) j(i, n - 1 - i) = 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(j * m * j);
    if (llt.info() != Eigen::Success) throw NumericError("weight matrix is not positive definite");
    const Eigen::MatrixXd u = j * Eigen::MatrixXd(llt.matrixL()) * j;
    return Eigen::MatrixXd(u.transpose());
  };
  return Weights{factor(q), factor(r)};
}

int Weights::num_params() const {
  const int n = static_cast<int>(q_chol.rows());
  const int m = static_cast<int>(r_chol.rows());
  return n * (n + 1) / 2 + m * (m + 1) / 2;
}

Eigen::VectorXd Weights::params() const {
  Eigen::VectorXd p(num_params());
  int idx = 0;
  for (int i = 0; i < q_chol.rows(); ++i)
    for (int j = 0; j <= i; ++j) p(idx++) = q_chol(i, j);
  for (int i = 0; i < r_chol.rows(); ++i)
    for (int j = 0; j <= i; ++j) p(idx++) = r_chol(i, j);
  return p;
}

void Weights::set_params(const Eigen::VectorXd& p) {
  int idx = 0;
  for (int i = 0; i < q_chol.rows(); ++i)
    for (int j = 0; j <= i; ++j) q_chol(i, j) = p(idx++);
  for (int i = 0; i < r_chol.rows(); ++i)
    for (int j = 0; j <= i; ++j) r_chol(i, j) = p(idx++);
}

void Weights::param_direction(int k, Eigen::MatrixXd* dq, Eigen::MatrixXd* dr) const {
  const int n = static_cast<int>(q_chol.rows());
  const int m = static_cast<int>(r_chol.rows());
  dq->setZero(n, n);
  dr->setZero(m, m);
  int idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j, ++idx)
      if (idx == k) {
        // d(L^T L) for dL = e_i e_j^T
        Eigen::MatrixXd dl = Eigen::MatrixXd::Zero(n, n);
        dl(i, j) = 1.0;
        *dq = dl.transpose() * q_chol + q_chol.transpose() * dl;
        return;
      }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j, ++idx)
      if (idx == k) {
        Eigen::MatrixXd dl = Eigen::MatrixXd::Zero(m, m);
        dl(i, j) = 1.0;
        *dr = dl.transpose() * r_chol + r_chol.transpose() * dl;
        return;
      }
  throw NumericError("weight parameter index out of range");
}

DareResult solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                      const Eigen::MatrixXd& r) {
  const int n = static_cast<int>(a.rows());
  Eigen::LLT<Eigen::MatrixXd> r_llt(r);
  if (r_llt.info() != Eigen::Success) throw SolverError("DARE: R is not positive definite");

  // Structure-preserving doubling (Chu/Fan/Lin/Wang 2004).
  Eigen::MatrixXd a_k = a;
  Eigen::MatrixXd g_k = b * r_llt.solve(b.transpose());
  Eigen::MatrixXd h_k, h_next = q;
  int iterations = 0;
  constexpr int kMaxIterations = 200;
  do {
    h_k = h_next;
    const Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n) + g_k * h_k;
    Eigen::PartialPivLU<Eigen::MatrixXd> w_lu(w);
    const Eigen::MatrixXd v1 = w_lu.solve(a_k);
    const Eigen::MatrixXd v2 = w_lu.solve(g_k.transpose()).transpose();
    g_k += a_k * v2 * a_k.transpose();
    h_next = h_k + v1.transpose() * h_k * a_k;
    a_k *= v1;
    if (!h_next.allFinite()) throw SolverError("DARE: doubling iteration diverged");
    if (++iterations > kMaxIterations) throw SolverError("DARE: no convergence (stabilizability violated?)");
  } while ((h_next - h_k).norm() > 1e-14 * std::max(1.0, h_next.norm()));

  DareResult out;
  out.s = 0.5 * (h_next + h_next.transpose());
  const Eigen::MatrixXd e = r + b.transpose() * out.s * b;
  out.k = e.llt().solve(b.transpose() * out.s * a);
  out.residual = dare_residual(a, b, q, r, out.s);
  out.iterations = iterations;
  if (!(out.residual < 1e-9)) throw SolverError("DARE: residual stalled above tolerance");
  return out;
}

double dare_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                     const Eigen::MatrixXd& r, const Eigen::MatrixXd& s) {
  const Eigen::MatrixXd e = r + b.transpose() * s * b;
  const Eigen::MatrixXd res =
      q + a.transpose() * s * a - s - a.transpose() * s * b * e.llt().solve(b.transpose() * s * a);
  return res.cwiseAbs().maxCoeff();
}

BackwardPass backward_pass(const std::vector<Eigen::MatrixXd>& a_seq,
                           const std::vector<Eigen::MatrixXd>& b_seq, const Eigen::MatrixXd& q,
                           const Eigen::MatrixXd& r, const Eigen::MatrixXd& s_terminal) {
  const int horizon = static_cast<int>(a_seq.size());
  if (b_seq.size() != a_seq.size()) throw NumericError("backward_pass: A/B length mismatch");
  BackwardPass out;
  out.s.resize(horizon + 1);
  out.k.resize(horizon);
  out.s[horizon] = s_terminal;
  for (int k = horizon - 1; k >= 0; --k) {
    const Eigen::MatrixXd& a = a_seq[k];
    const Eigen::MatrixXd& b = b_seq[k];
    const Eigen::MatrixXd& sn = out.s[k + 1];
    const Eigen::MatrixXd e = r + b.transpose() * sn * b;
    Eigen::LLT<Eigen::MatrixXd> e_llt(e);
    if (e_llt.info() != Eigen::Success)
      throw NumericError("backward_pass: R + B'SB not positive definite");
    out.k[k] = e_llt.solve(b.transpose() * sn * a);
    Eigen::MatrixXd s = q + a.transpose() * sn * a - a.transpose() * sn * b * out.k[k];
    out.s[k] = 0.5 * (s + s.transpose());
  }
  return out;
}

std::vector<StationarySensitivity> dare_sensitivities(
    const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
    const Eigen::MatrixXd& r, const Eigen::MatrixXd& s, const Eigen::MatrixXd& k,
    const std::vector<WeightDirection>& dirs) {
  (void)q;
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  const int ns = n * n, nk = m * n;
  const Eigen::MatrixXd in = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd im = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd bk = b * k;
  const Eigen::MatrixXd e = r + b.transpose() * s * b;

  // F1 = A'SA - S - A'SB K + Q,  F2 = (B'SB + R) K - B'SA
  Eigen::MatrixXd jy = Eigen::MatrixXd::Zero(ns + nk, ns + nk);
  jy.topLeftCorner(ns, ns) =
      kron(a.transpose(), a.transpose()) - Eigen::MatrixXd::Identity(ns, ns) - kron(bk.transpose(), a.transpose());
  jy.topRightCorner(ns, nk) = -kron(in, a.transpose() * s * b);
  jy.bottomLeftCorner(nk, ns) = kron(bk.transpose(), b.transpose()) - kron(a.transpose(), b.transpose());
  jy.bottomRightCorner(nk, nk) = kron(in, e);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(jy);
  if (!lu.isInvertible()) throw NumericError("dare_sensitivities: dF/dy is singular");

  std::vector<StationarySensitivity> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) {
    Eigen::VectorXd rhs(ns + nk);
    rhs.head(ns) = vec(d.dq);
    rhs.tail(nk) = kron(k.transpose(), im) * vec(d.dr);
    const Eigen::VectorXd dy = lu.solve(-rhs);
    out.push_back({unvec(dy.head(ns), n, n), unvec(dy.tail(nk), m, n)});
  }
  return out;
}

std::vector<std::vector<Eigen::MatrixXd>> backward_pass_sensitivities(
    const std::vector<Eigen::MatrixXd>& a_seq, const std::vector<Eigen::MatrixXd>& b_seq,
    const Eigen::MatrixXd& r, const BackwardPass& pass, const std::vector<WeightDirection>& dirs,
    const std::vector<Eigen::MatrixXd>& ds_terminal) {
  const int horizon = static_cast<int>(a_seq.size());
  if (dirs.size() != ds_terminal.size())
    throw NumericError("backward_pass_sensitivities: terminal condition count mismatch");
  std::vector<std::vector<Eigen::MatrixXd>> dk_all(dirs.size());
  for (std::size_t p = 0; p < dirs.size(); ++p) {
    const Eigen::MatrixXd& dq = dirs[p].dq;
    const Eigen::MatrixXd& dr = dirs[p].dr;
    Eigen::MatrixXd ds_next = ds_terminal[p];
    std::vector<Eigen::MatrixXd> dk(horizon);
    for (int k = horizon - 1; k >= 0; --k) {
      const Eigen::MatrixXd& a = a_seq[k];
      const Eigen::MatrixXd& b = b_seq[k];
      const Eigen::MatrixXd& sn = pass.s[k + 1];
      const Eigen::MatrixXd e = r + b.transpose() * sn * b;
      Eigen::LLT<Eigen::MatrixXd> e_llt(e);
      const Eigen::MatrixXd de = dr + b.transpose() * ds_next * b;
      const Eigen::MatrixXd bsa = b.transpose() * sn * a;
      const Eigen::MatrixXd einv_bsa = e_llt.solve(bsa);
      dk[k] = -e_llt.solve(de * einv_bsa) + e_llt.solve(b.transpose() * ds_next * a);
      Eigen::MatrixXd ds = dq + a.transpose() * ds_next * a -
                           a.transpose() * ds_next * b * einv_bsa -
                           a.transpose() * sn * b * e_llt.solve(b.transpose() * ds_next * a) +
                           a.transpose() * sn * b * e_llt.solve(de * einv_bsa);
      ds_next = 0.5 * (ds + ds.transpose());
    }
    dk_all[p] = std::move(dk);
  }
  return dk_all;
}

Weights init_weights(const StageCost& cost, const Eigen::VectorXd& x_s, const Eigen::VectorXd& u_s,
                     double psi_ref, double input_change_weight, double eps) {
  const int n = cost.state_dim();
  const int m = cost.input_dim();
  Eigen::MatrixXd hxx(n, n), huu(m, m), hxu(n, m);
  Eigen::VectorXd gx(n), gu(m);
  cost.quadratics(x_s, u_s, psi_ref, &gx, &gu, &hxx, &huu, &hxu);
  Eigen::MatrixXd q_init = 0.5 * (hxx + hxx.transpose());
  Eigen::MatrixXd r_init =
      huu + 2.0 * input_change_weight * Eigen::MatrixXd::Identity(m, m);

  auto clamp_spd = [eps](const Eigen::MatrixXd& mtx) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mtx);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(eps);
    return Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
  };
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q_init).eigenvalues().minCoeff() < eps)
    q_init = clamp_spd(q_init);
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r_init).eigenvalues().minCoeff() < eps)
    r_init = clamp_spd(r_init);
  return Weights::from_matrices(q_init, r_init);
}

}  // namespace etmpc::lqr
