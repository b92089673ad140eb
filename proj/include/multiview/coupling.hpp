#ifndef MULTIVIEW_COUPLING_HPP
#define MULTIVIEW_COUPLING_HPP

#include "multiview/common.hpp"
#include "multiview/simgen.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace multiview {

/// Per-observation component log densities of both views:
/// log_g1(i, k) = log g1_ik, log_g2(i, k') = log g2_ik'.
struct ComponentDensityMatrix {
  Matrix log_g1;
  Matrix log_g2;

  Eigen::Index n() const { return log_g1.rows(); }

  void validate() const {
    if (log_g1.rows() != log_g2.rows()) throw DomainError("density matrices disagree on n");
    if (log_g1.rows() == 0) throw DomainError("density matrices are empty");
    if (!log_g1.allFinite() || !log_g2.allFinite()) throw DomainError("log densities must be finite");
  }

  /// Row i of view 2 replaced by row perm[i].
  ComponentDensityMatrix permuted_view2(const std::vector<int>& perm) const {
    ComponentDensityMatrix out{log_g1, Matrix(log_g2.rows(), log_g2.cols())};
    for (Eigen::Index i = 0; i < log_g2.rows(); ++i) out.log_g2.row(i) = log_g2.row(perm[static_cast<std::size_t>(i)]);
    return out;
  }
};

struct OptimizerConfig {
  double step_size = 0.0;   // 0 selects 0.05 / n
  double step_growth = 2.0; // applied after every accepted step
  double outer_tol = 1e-7;  // objective increase relative to max(1, l(C) - l(1))
  int outer_max_iter = 1000;
  int max_halvings = 30;
  double sinkhorn_tol = 1e-10;
  int sinkhorn_max_iter = 10000;
  int sinkhorn_sweeps = 200;  // plain sweeps before switching to Newton steps on the dual
};

/// P -> (pi1, pi2, C) with P_kk' = pi1_k pi2_k' C_kk'.
inline CouplingMatrix coupling_from_joint(const Matrix& P) {
  if ((P.array() < 0.0).any()) throw DomainError("joint probabilities must be nonnegative");
  if (std::abs(P.sum() - 1.0) > 1e-10) throw DomainError("joint probabilities must sum to 1");
  CouplingMatrix c;
  c.pi1 = P.rowwise().sum();
  c.pi2 = P.colwise().sum().transpose();
  if ((c.pi1.array() <= 0.0).any() || (c.pi2.array() <= 0.0).any())
    throw DomainError("joint distribution has a zero marginal");
  c.C = c.pi1.cwiseInverse().asDiagonal() * P * c.pi2.cwiseInverse().asDiagonal();
  return c;
}

/// Precomputed, offset-normalized form of the joint objective:
///   l(C) = sum_i [ m1_i + m2_i + log(a_i^T C b_i) ],
/// a_ik = pi1_k exp(log g1_ik - m1_i), b_ik' = pi2_k' exp(log g2_ik' - m2_i).
class CouplingProblem {
 public:
  CouplingProblem(const ComponentDensityMatrix& gd, const Vector& pi1, const Vector& pi2)
      : pi1_(pi1), pi2_(pi2) {
    gd.validate();
    if (gd.log_g1.cols() != pi1.size() || gd.log_g2.cols() != pi2.size())
      throw DomainError("density matrix columns do not match mixing weights");
    if ((pi1.array() <= 0.0).any() || (pi2.array() <= 0.0).any())
      throw DomainError("mixing weights must be strictly positive");
    offset_sum_ = 0.0;
    a_ = normalize(gd.log_g1, pi1);
    b_ = normalize(gd.log_g2, pi2);
  }

  Eigen::Index n() const { return a_.rows(); }
  const Vector& pi1() const { return pi1_; }
  const Vector& pi2() const { return pi2_; }
  double offset_sum() const { return offset_sum_; }

  /// a_i^T C b_i for every i.
  Vector denominators(const Matrix& C) const { return ((a_ * C).cwiseProduct(b_)).rowwise().sum(); }

  static double sum_log(const Vector& den) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < den.size(); ++i) s += std::log(den(i));
    return s;
  }

  double objective(const Matrix& C) const { return offset_sum_ + sum_log(denominators(C)); }

  /// G_kk' = sum_i g1_ik g2_ik' / (g1_i^T diag(pi1) C diag(pi2) g2_i), the
  /// gradient with respect to the joint P = diag(pi1) C diag(pi2).
  Matrix gradient(const Vector& den) const {
    Matrix weighted = b_.array().colwise() / den.array();
    Matrix g = a_.transpose() * weighted;
    return pi1_.cwiseInverse().asDiagonal() * g * pi2_.cwiseInverse().asDiagonal();
  }

 private:
  Matrix normalize(const Matrix& logg, const Vector& pi) {
    Matrix out(logg.rows(), logg.cols());
    for (Eigen::Index i = 0; i < logg.rows(); ++i) {
      double m = logg.row(i).maxCoeff();
      offset_sum_ += m;
      for (Eigen::Index k = 0; k < logg.cols(); ++k) out(i, k) = pi(k) * std::exp(logg(i, k) - m);
    }
    return out;
  }

  Vector pi1_, pi2_;
  Matrix a_, b_;
  double offset_sum_ = 0.0;
};

/// sum_i log( g1_i^T diag(pi1) C diag(pi2) g2_i ), evaluated in the log domain.
inline double joint_pseudo_loglik(const ComponentDensityMatrix& gd, const Vector& pi1, const Vector& pi2,
                                  const Matrix& C) {
  if (C.rows() != pi1.size() || C.cols() != pi2.size()) throw DomainError("coupling matrix has wrong shape");
  CouplingMatrix cm{C, pi1, pi2};
  cm.validate(1e-6);
  double v = CouplingProblem(gd, pi1, pi2).objective(C);
  if (!std::isfinite(v)) throw DomainError("joint pseudo-log-likelihood is not finite");
  return v;
}

struct SinkhornResult {
  Matrix C;
  int iterations = 0;
  double violation = 0.0;
};

namespace detail {

inline double marginal_violation(const Matrix& C, const Vector& pi1, const Vector& pi2) {
  return std::max(((C * pi2).array() - 1.0).abs().maxCoeff(), ((C.transpose() * pi1).array() - 1.0).abs().maxCoeff());
}

// Dual of the balancing problem in x = log row scale, y = log column scale:
//   f(x, y) = sum_kl pi1_k pi2_l O_kl exp(x_k + y_l) - pi1.x - pi2.y
// Its gradient is (pi1 * (C pi2 - 1), pi2 * (C^T pi1 - 1)). y is pinned at its
// last coordinate since (x + c, y - c) gives the same C.
struct BalancingDual {
  const Matrix& O;
  const Vector& pi1;
  const Vector& pi2;

  Matrix scaled(const Vector& x, const Vector& y) const {
    const Vector ex = x.array().exp().matrix();
    const Vector ey = y.array().exp().matrix();
    return ex.asDiagonal() * O * ey.asDiagonal();
  }
  double value(const Vector& x, const Vector& y) const {
    const Vector ex = x.array().exp().matrix();
    const Vector ey = y.array().exp().matrix();
    return pi1.cwiseProduct(ex).dot(O * pi2.cwiseProduct(ey)) - pi1.dot(x) - pi2.dot(y);
  }
};

}  // namespace detail

/// Rescales rows and columns of a positive matrix O into
/// C = diag(row_scale) O diag(col_scale) with C pi2 = 1 and C^T pi1 = 1.
/// Plain alternating sweeps first; when they have not met the tolerance after
/// cfg.sinkhorn_sweeps, damped Newton steps on the dual finish the same scaling.
inline SinkhornResult sinkhorn_project(const Matrix& O, const Vector& pi1, const Vector& pi2,
                                       const OptimizerConfig& cfg = {}) {
  if (O.rows() != pi1.size() || O.cols() != pi2.size()) throw DomainError("Sinkhorn input has wrong shape");
  if (!O.allFinite() || (O.array() < 0.0).any()) throw DomainError("Sinkhorn input must be finite and nonnegative");
  Vector row_scale = Vector::Ones(O.rows());
  Vector col_scale;
  // after each row update C pi2 = 1 holds to rounding, so only the column sums
  // need watching; they come from the product the next column update uses
  Vector col_sums = O.transpose() * pi1;
  SinkhornResult res;
  double violation = std::numeric_limits<double>::infinity();
  const int sweeps = std::min(cfg.sinkhorn_max_iter, std::max(cfg.sinkhorn_sweeps, 1));
  int t = 1;
  for (; t <= sweeps; ++t) {
    col_scale = col_sums.cwiseInverse();
    row_scale = (O * pi2.cwiseProduct(col_scale)).cwiseInverse();
    if (!col_scale.allFinite() || !row_scale.allFinite())
      throw DomainError("Sinkhorn scaling diverged (matrix lacks a feasible support)");
    col_sums = O.transpose() * pi1.cwiseProduct(row_scale);
    violation = (col_scale.cwiseProduct(col_sums).array() - 1.0).abs().maxCoeff();
    if (violation < cfg.sinkhorn_tol) {
      Matrix C = row_scale.asDiagonal() * O * col_scale.asDiagonal();
      violation = detail::marginal_violation(C, pi1, pi2);
      if (violation < cfg.sinkhorn_tol) {
        res.C = std::move(C);
        res.iterations = t;
        res.violation = violation;
        return res;
      }
    }
  }

  const auto K1 = O.rows();
  const auto K2 = O.cols();
  detail::BalancingDual dual{O, pi1, pi2};
  Vector x = row_scale.array().log().matrix();
  Vector y = col_scale.array().log().matrix();
  double f = dual.value(x, y);
  for (; t <= cfg.sinkhorn_max_iter && std::isfinite(f); ++t) {
    const Matrix C = dual.scaled(x, y);
    violation = detail::marginal_violation(C, pi1, pi2);
    if (violation < cfg.sinkhorn_tol) {
      res.C = C;
      res.iterations = t;
      res.violation = violation;
      return res;
    }
    const Matrix E = pi1.asDiagonal() * C * pi2.asDiagonal();
    const Eigen::Index m = K1 + K2 - 1;
    Vector g(m);
    g.head(K1) = E.rowwise().sum() - pi1;
    g.tail(K2 - 1) = (E.colwise().sum().transpose() - pi2).head(K2 - 1);
    // Hessian [[diag(r), B], [B^T, diag(c)]]; x is eliminated through the
    // Schur complement diag(c) - B^T diag(1/r) B
    const Vector r = E.rowwise().sum();
    const Vector c = E.colwise().sum().transpose().head(K2 - 1);
    const auto B = E.leftCols(K2 - 1);
    const Vector rinv = r.cwiseInverse();
    Matrix S = -B.transpose() * rinv.asDiagonal() * B;
    S.diagonal() += c;
    S.diagonal().array() += 1e-14 * c.maxCoeff();
    const Vector gx = g.head(K1);
    const Vector rhs = B.transpose() * rinv.cwiseProduct(gx) - g.tail(K2 - 1);
    Vector dy;
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() == Eigen::Success) {
      dy = llt.solve(rhs);
    } else {
      Eigen::LDLT<Matrix> ldlt(S);
      if (ldlt.info() != Eigen::Success) break;
      dy = ldlt.solve(rhs);
    }
    Vector d(m);
    d.head(K1) = -rinv.cwiseProduct(gx + B * dy);
    d.tail(K2 - 1) = dy;
    const double slope = g.dot(d);
    if (!d.allFinite() || !(slope < 0.0)) break;
    // near the solution the decrease in f drops below its rounding, so a step
    // also counts when it shrinks the gradient
    const double noise = 1e-14 * (std::abs(f) + std::abs(pi1.dot(x)) + std::abs(pi2.dot(y)) + 1.0);
    const double gnorm = g.norm();
    bool moved = false;
    for (double alpha = 1.0; alpha > 1e-12; alpha *= 0.5) {
      Vector xn = x + alpha * d.head(K1);
      Vector yn = y;
      yn.head(K2 - 1) += alpha * d.tail(K2 - 1);
      double fn = dual.value(xn, yn);
      if (!std::isfinite(fn)) continue;
      bool ok = fn <= f + 1e-4 * alpha * slope && fn < f - noise;
      if (!ok && fn <= f + noise) {
        const Matrix En = pi1.asDiagonal() * dual.scaled(xn, yn) * pi2.asDiagonal();
        Vector gn(m);
        gn.head(K1) = En.rowwise().sum() - pi1;
        gn.tail(K2 - 1) = (En.colwise().sum().transpose() - pi2).head(K2 - 1);
        ok = gn.norm() < (1.0 - 1e-4 * alpha) * gnorm;
      }
      if (ok) {
        x = std::move(xn);
        y = std::move(yn);
        f = fn;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  throw DomainError("Sinkhorn balancing did not converge in " + std::to_string(cfg.sinkhorn_max_iter) +
                    " iterations (max marginal violation " + std::to_string(violation) + ")");
}

struct CouplingOptimum {
  Matrix C;
  double objective = 0.0;
  std::vector<double> trace;  // objective at every accepted iterate, starting at C = 1
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
  double final_step = 0.0;
};

/// Exponentiated-gradient ascent over the coupling polytope: each step
/// multiplies C elementwise by exp(s G) and re-balances with Sinkhorn. A step
/// that lowers the objective is retried at half the step size.
inline CouplingOptimum optimize_coupling(const CouplingProblem& prob, const OptimizerConfig& cfg = {}) {
  const auto K1 = prob.pi1().size();
  const auto K2 = prob.pi2().size();
  CouplingOptimum out;
  Matrix C = Matrix::Ones(K1, K2);
  Vector den = prob.denominators(C);
  double obj = prob.offset_sum() + CouplingProblem::sum_log(den);
  if (!std::isfinite(obj)) throw DomainError("joint pseudo-log-likelihood is not finite at C = 1");
  out.trace.push_back(obj);
  double step = cfg.step_size > 0.0 ? cfg.step_size : 0.05 / static_cast<double>(prob.n());

  if (K1 > 1 && K2 > 1) {
    const double obj0 = obj;
    for (int it = 1; it <= cfg.outer_max_iter; ++it) {
      out.iterations = it;
      const Matrix G = prob.gradient(den);
      // increments are judged against the gain over C = 1, which per-row offsets do not touch
      const double scale = std::max(1.0, obj - obj0);
      const double noise = 1e-13 * std::max(1.0, std::abs(obj));
      bool accepted = false;
      bool negligible = false;
      for (int halvings = 0; halvings <= cfg.max_halvings; ++halvings) {
        Matrix expo = step * G;
        expo.array() -= expo.maxCoeff();  // constant factors are absorbed by the balancing
        Matrix O = C.cwiseProduct(expo.array().exp().matrix());
        std::optional<SinkhornResult> proj;
        try {
          proj = sinkhorn_project(O, prob.pi1(), prob.pi2(), cfg);
        } catch (const DomainError&) {
          step *= 0.5;
          continue;
        }
        Vector den_new = prob.denominators(proj->C);
        double obj_new = prob.offset_sum() + CouplingProblem::sum_log(den_new);
        if (std::isfinite(obj_new) && obj_new >= obj) {
          negligible = (obj_new - obj) < cfg.outer_tol * scale;
          C = std::move(proj->C);
          den = std::move(den_new);
          obj = obj_new;
          out.trace.push_back(obj);
          accepted = true;
          break;
        }
        if (std::isfinite(obj_new) && obj - obj_new <= noise) {
          negligible = true;  // rounding level
          break;
        }
        step *= 0.5;
      }
      if (negligible) {
        out.converged = true;
        break;
      }
      if (!accepted) {
        out.stalled = true;
        break;
      }
      step *= cfg.step_growth;
    }
  } else {
    out.converged = true;
  }
  out.C = std::move(C);
  out.objective = obj;
  out.final_step = step;
  return out;
}

inline CouplingOptimum optimize_coupling(const ComponentDensityMatrix& gd, const Vector& pi1, const Vector& pi2,
                                         const OptimizerConfig& cfg = {}) {
  return optimize_coupling(CouplingProblem(gd, pi1, pi2), cfg);
}

struct P2lrtStatistic {
  double statistic = 0.0;
  CouplingOptimum optimum;
};

/// log Lambda~ = l(C_hat) - l(1). Offsets cancel, so the difference is formed
/// from the normalized denominators directly.
inline P2lrtStatistic p2lrt_statistic(const CouplingProblem& prob, const OptimizerConfig& cfg = {}) {
  constexpr double kSlack = 1e-9;
  P2lrtStatistic res;
  res.optimum = optimize_coupling(prob, cfg);
  const auto K1 = prob.pi1().size();
  const auto K2 = prob.pi2().size();
  double at_opt = CouplingProblem::sum_log(prob.denominators(res.optimum.C));
  double at_null = CouplingProblem::sum_log(prob.denominators(Matrix::Ones(K1, K2)));
  double stat = at_opt - at_null;
  if (stat < -kSlack) throw DomainError("P2LRT statistic is negative: " + std::to_string(stat));
  res.statistic = std::max(stat, 0.0);
  return res;
}

inline P2lrtStatistic p2lrt_statistic(const ComponentDensityMatrix& gd, const Vector& pi1, const Vector& pi2,
                                      const OptimizerConfig& cfg = {}) {
  return p2lrt_statistic(CouplingProblem(gd, pi1, pi2), cfg);
}

}  // namespace multiview

#endif  // MULTIVIEW_COUPLING_HPP
