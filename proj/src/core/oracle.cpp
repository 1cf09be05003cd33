// Copyright 2026 The hfsgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracle.hpp"

#include <array>
#include <cmath>

#include "errors.hpp"

namespace hfsgm {

namespace {


double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double kl_normal(double mq, double vq, double mp, double vp) {
  const double d = mq - mp;
  return 0.5 * (std::log(vp / vq) + (vq + d * d) / vp - 1.0);
}

double column_sum(const SetData& x, int j) {
  double s = 0.0;
  for (int i = 0; i < x.size; ++i) s += x.row(i)[static_cast<std::size_t>(j)];
  return s;
}

double log_sum_exp(const std::vector<double>& v) {
  double m = -INFINITY;
  for (double a : v) m = std::max(m, a);
  double s = 0.0;
  for (double a : v) s += std::exp(a - m);
  return m + std::log(s);
}

/// log of the trapezoid integral of exp(f) over the given abscissae.
double log_trapezoid(const std::vector<double>& logf, double h) {
  std::vector<double> w = logf;
  w.front() += std::log(0.5);
  w.back() += std::log(0.5);
  return log_sum_exp(w) + std::log(h);
}

void check_instance_variances(double var_c, double var_z, double var_x) {
  if (!(var_c > 0.0)) throw ConfigError("oracle var_c must be > 0, got " + std::to_string(var_c));
  if (!(var_z > 0.0)) throw ConfigError("oracle var_z must be > 0, got " + std::to_string(var_z));
  if (!(var_x > 0.0)) throw ConfigError("oracle var_x must be > 0, got " + std::to_string(var_x));
}

}  // namespace

void LinearGaussianInstance::validate() const {
  check_instance_variances(var_c, var_z, var_x);
  if (x.size < 0 || x.dim < 1) throw ContractError("oracle instance needs a positive dimension");
  if (x.values.size() != static_cast<std::size_t>(x.size) * x.dim) throw ContractError("oracle instance: bad data");
}

double exact_log_marginal(const LinearGaussianInstance& inst) {
  inst.validate();
  // Sigma = a I + var_c J:  det = a^(S-1) (a + S var_c),
  // Sigma^-1 = (I - var_c / (a + S var_c) J) / a.
  const double a = inst.var_z + inst.var_x;
  const int s = inst.size();
  const double big = a + s * inst.var_c;
  const double logdet = (s - 1) * std::log(a) + std::log(big);
  double total = 0.0;
  for (int j = 0; j < inst.dim(); ++j) {
    double sq = 0.0;
    for (int i = 0; i < s; ++i) sq += inst.x.row(i)[static_cast<std::size_t>(j)] * inst.x.row(i)[static_cast<std::size_t>(j)];
    const double sum = column_sum(inst.x, j);
    const double quad = (sq - inst.var_c / big * sum * sum) / a;
    total += -0.5 * (s * kLog2Pi + (s > 0 ? logdet : 0.0) + quad);
  }
  return total;
}

double quadrature_log_marginal(const LinearGaussianInstance& inst, int points, double span) {
  inst.validate();
  if (points < 3) throw ContractError("quadrature needs at least three points");
  const double sd_c = std::sqrt(inst.var_c);
  const double hc = 2.0 * span * sd_c / (points - 1);
  const double sd_z = std::sqrt(inst.var_z + inst.var_x);
  double total = 0.0;
  for (int j = 0; j < inst.dim(); ++j) {
    std::vector<double> outer(static_cast<std::size_t>(points));
    for (int ic = 0; ic < points; ++ic) {
      const double c = -span * sd_c + ic * hc;
      double lf = log_normal(c, 0.0, inst.var_c);
      for (int s = 0; s < inst.size(); ++s) {
        const double x = inst.x.row(s)[static_cast<std::size_t>(j)];
        // z grid centred between c and x, wide enough for both factors.
        const double centre = 0.5 * (c + x);
        const double half = span * sd_z + 0.5 * std::abs(c - x);
        const double hz = 2.0 * half / (points - 1);
        std::vector<double> inner(static_cast<std::size_t>(points));
        for (int iz = 0; iz < points; ++iz) {
          const double z = centre - half + iz * hz;
          inner[static_cast<std::size_t>(iz)] = log_normal(z, c, inst.var_z) + log_normal(x, z, inst.var_x);
        }
        lf += log_trapezoid(inner, hz);
      }
      outer[static_cast<std::size_t>(ic)] = lf;
    }
    total += log_trapezoid(outer, hc);
  }
  return total;
}

std::vector<double> ExactPosterior::joint_covariance(int set_size) const {
  const int n = set_size + 1;
  std::vector<double> cov(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      double v;
      if (i == 0 && k == 0) v = c_var;
      else if (i == 0 || k == 0) v = cov_cz;
      else if (i == k) v = z_var;
      else v = cov_zz;
      cov[static_cast<std::size_t>(i) * n + k] = v;
    }
  }
  return cov;
}

ExactPosterior exact_posteriors(const LinearGaussianInstance& inst) {
  inst.validate();
  const double a = inst.var_z + inst.var_x;
  const int s = inst.size();
  const int d = inst.dim();
  ExactPosterior p;
  p.c_var = 1.0 / (1.0 / inst.var_c + s / a);
  const double prec_z = 1.0 / inst.var_z + 1.0 / inst.var_x;
  p.z_cond_var = 1.0 / prec_z;
  p.z_slope = p.z_cond_var / inst.var_z;
  p.z_gain = p.z_cond_var / inst.var_x;
  p.z_var = p.z_cond_var + p.z_slope * p.z_slope * p.c_var;
  p.cov_cz = p.z_slope * p.c_var;
  p.cov_zz = p.z_slope * p.z_slope * p.c_var;
  p.c_mean.resize(static_cast<std::size_t>(d));
  p.z_mean.resize(static_cast<std::size_t>(s) * d);
  for (int j = 0; j < d; ++j) {
    p.c_mean[static_cast<std::size_t>(j)] = p.c_var * column_sum(inst.x, j) / a;
    for (int i = 0; i < s; ++i) {
      p.z_mean[static_cast<std::size_t>(i) * d + j] =
          p.z_slope * p.c_mean[static_cast<std::size_t>(j)] + p.z_gain * inst.x.row(i)[static_cast<std::size_t>(j)];
    }
  }
  return p;
}

DiagPosterior mean_field(const ExactPosterior& post) { return {post.c_mean, post.c_var, post.z_mean, post.z_var}; }

Predictive exact_predictive(const LinearGaussianInstance& inst) {
  const ExactPosterior p = exact_posteriors(inst);
  return {p.c_mean, p.c_var + inst.var_z + inst.var_x};
}

namespace {

double expected_rec(const LinearGaussianInstance& inst, const std::vector<double>& z_mean, double z_var) {
  double rec = 0.0;
  for (int i = 0; i < inst.size(); ++i) {
    for (int j = 0; j < inst.dim(); ++j) {
      const double diff = inst.x.row(i)[static_cast<std::size_t>(j)] - z_mean[static_cast<std::size_t>(i) * inst.dim() + j];
      rec += -0.5 * (kLog2Pi + std::log(inst.var_x)) - (diff * diff + z_var) / (2.0 * inst.var_x);
    }
  }
  return rec;
}

double context_kl(const LinearGaussianInstance& inst, const std::vector<double>& c_mean, double c_var) {
  double kl = 0.0;
  for (double m : c_mean) kl += kl_normal(m, c_var, 0.0, inst.var_c);
  return kl;
}

}  // namespace

ElboTerms gaussian_elbo(const LinearGaussianInstance& inst, const DiagPosterior& q) {
  inst.validate();
  const int d = inst.dim();
  if (q.c_mean.size() != static_cast<std::size_t>(d) || q.z_mean.size() != static_cast<std::size_t>(inst.size()) * d) {
    throw ContractError("gaussian_elbo: posterior shape does not match the instance");
  }
  if (!(q.c_var > 0.0) || !(q.z_var > 0.0)) throw ContractError("gaussian_elbo: posterior variances must be > 0");
  ElboTerms t;
  t.set_size = inst.size();
  t.rec = expected_rec(inst, q.z_mean, q.z_var);
  t.kl_c = {context_kl(inst, q.c_mean, q.c_var)};
  // E_q(c) KL(q(z_s) || N(c, var_z)) averages the mean offset over q(c).
  double klz = 0.0;
  for (int i = 0; i < inst.size(); ++i) {
    for (int j = 0; j < d; ++j) {
      const double diff = q.z_mean[static_cast<std::size_t>(i) * d + j] - q.c_mean[static_cast<std::size_t>(j)];
      klz += 0.5 * (std::log(inst.var_z / q.z_var) + (q.z_var + diff * diff + q.c_var) / inst.var_z - 1.0);
    }
  }
  t.kl_z = {klz};
  return t;
}

ElboTerms exact_elbo_terms(const LinearGaussianInstance& inst) {
  const ExactPosterior p = exact_posteriors(inst);
  ElboTerms t;
  t.set_size = inst.size();
  t.rec = expected_rec(inst, p.z_mean, p.z_var);
  t.kl_c = {context_kl(inst, p.c_mean, p.c_var)};
  t.kl_z = {t.rec - exact_log_marginal(inst) - t.kl_c[0]};
  return t;
}

double log_joint(const LinearGaussianInstance& inst, const std::vector<double>& c, const std::vector<double>& z) {
  const int d = inst.dim();
  double lp = 0.0;
  for (int j = 0; j < d; ++j) {
    lp += log_normal(c[static_cast<std::size_t>(j)], 0.0, inst.var_c);
    for (int i = 0; i < inst.size(); ++i) {
      const double zi = z[static_cast<std::size_t>(i) * d + j];
      lp += log_normal(zi, c[static_cast<std::size_t>(j)], inst.var_z) +
            log_normal(inst.x.row(i)[static_cast<std::size_t>(j)], zi, inst.var_x);
    }
  }
  return lp;
}

double mc_elbo(const LinearGaussianInstance& inst, const DiagPosterior& q, int samples, Rng& rng) {
  if (samples < 1) throw ContractError("mc_elbo: need at least one sample");
  const int d = inst.dim();
  std::vector<double> c(static_cast<std::size_t>(d)), z(q.z_mean.size());
  double total = 0.0;
  for (int k = 0; k < samples; ++k) {
    double lq = 0.0;
    for (int j = 0; j < d; ++j) {
      c[static_cast<std::size_t>(j)] = q.c_mean[static_cast<std::size_t>(j)] + std::sqrt(q.c_var) * rng.normal();
      lq += log_normal(c[static_cast<std::size_t>(j)], q.c_mean[static_cast<std::size_t>(j)], q.c_var);
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = q.z_mean[i] + std::sqrt(q.z_var) * rng.normal();
      lq += log_normal(z[i], q.z_mean[i], q.z_var);
    }
    total += log_joint(inst, c, z) - lq;
  }
  return total / samples;
}

DiagPosterior LinearPosterior::apply(const LinearGaussianInstance& inst) const {
  const int d = inst.dim();
  DiagPosterior q;
  q.c_var = std::exp(log_var_c);
  q.z_var = std::exp(log_var_z);
  q.c_mean.resize(static_cast<std::size_t>(d));
  q.z_mean.resize(static_cast<std::size_t>(inst.size()) * d);
  for (int j = 0; j < d; ++j) {
    const double sum = column_sum(inst.x, j);
    q.c_mean[static_cast<std::size_t>(j)] = a * sum;
    for (int i = 0; i < inst.size(); ++i) {
      q.z_mean[static_cast<std::size_t>(i) * d + j] = b * inst.x.row(i)[static_cast<std::size_t>(j)] + e * sum;
    }
  }
  return q;
}

SetData sample_oracle_set(double var_c, double var_z, double var_x, int set_size, int dim, Rng& rng,
                          const std::vector<double>* c) {
  check_instance_variances(var_c, var_z, var_x);
  if (c != nullptr && c->size() != static_cast<std::size_t>(dim)) throw ContractError("sample_oracle_set: bad c");
  SetData x(set_size, dim);
  for (int j = 0; j < dim; ++j) {
    const double cj = c ? (*c)[static_cast<std::size_t>(j)] : std::sqrt(var_c) * rng.normal();
    for (int i = 0; i < set_size; ++i) {
      const double z = cj + std::sqrt(var_z) * rng.normal();
      x.row(i)[static_cast<std::size_t>(j)] = z + std::sqrt(var_x) * rng.normal();
    }
  }
  return x;
}

namespace {

// Solves a x = b in place by Gaussian elimination with partial pivoting.
bool solve(std::vector<double> a, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[static_cast<std::size_t>(r * n + col)]) > std::abs(a[static_cast<std::size_t>(piv * n + col)])) piv = r;
    }
    if (std::abs(a[static_cast<std::size_t>(piv * n + col)]) < 1e-300) return false;
    for (int k = 0; k < n; ++k) std::swap(a[static_cast<std::size_t>(col * n + k)], a[static_cast<std::size_t>(piv * n + k)]);
    std::swap(b[static_cast<std::size_t>(col)], b[static_cast<std::size_t>(piv)]);
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<std::size_t>(r * n + col)] / a[static_cast<std::size_t>(col * n + col)];
      for (int k = col; k < n; ++k) a[static_cast<std::size_t>(r * n + k)] -= f * a[static_cast<std::size_t>(col * n + k)];
      b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double v = b[static_cast<std::size_t>(r)];
    for (int k = r + 1; k < n; ++k) v -= a[static_cast<std::size_t>(r * n + k)] * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(r)] = v / a[static_cast<std::size_t>(r * n + r)];
  }
  return true;
}

}  // namespace

LinearPosterior train_linear_posterior(double var_c, double var_z, double var_x, const LinearPosteriorTraining& opts,
                                       Rng& rng) {
  check_instance_variances(var_c, var_z, var_x);
  if (opts.sets < 1 || opts.iters < 0 || opts.set_size < 1 || opts.dim < 1) {
    throw ConfigError("linear posterior training needs positive sets, set_size and dim");
  }
  std::vector<LinearGaussianInstance> data;
  for (int k = 0; k < opts.sets; ++k) {
    data.push_back({var_c, var_z, var_x, sample_oracle_set(var_c, var_z, var_x, opts.set_size, opts.dim, rng)});
  }
  constexpr int n = 5;
  auto objective = [&](const std::array<double, n>& v) {
    const LinearPosterior p{v[0], v[1], v[2], v[3], v[4]};
    double total = 0.0;
    for (const auto& inst : data) total += gaussian_elbo(inst, p.apply(inst)).elbo();
    return total / static_cast<double>(data.size());
  };
  // Damped Newton with central-difference derivatives; falls back to the
  // gradient direction when the local model is not concave.
  std::array<double, n> v{};
  const double h = opts.fd_step;
  double f = objective(v);
  for (int it = 0; it < opts.iters; ++it) {
    std::vector<double> g(n), hess(n * n);
    for (int i = 0; i < n; ++i) {
      auto up = v, down = v;
      up[static_cast<std::size_t>(i)] += h;
      down[static_cast<std::size_t>(i)] -= h;
      const double fu = objective(up), fd = objective(down);
      g[static_cast<std::size_t>(i)] = (fu - fd) / (2.0 * h);
      hess[static_cast<std::size_t>(i * n + i)] = (fu - 2.0 * f + fd) / (h * h);
      for (int k = 0; k < i; ++k) {
        auto pp = v, pm = v, mp = v, mm = v;
        pp[static_cast<std::size_t>(i)] += h; pp[static_cast<std::size_t>(k)] += h;
        pm[static_cast<std::size_t>(i)] += h; pm[static_cast<std::size_t>(k)] -= h;
        mp[static_cast<std::size_t>(i)] -= h; mp[static_cast<std::size_t>(k)] += h;
        mm[static_cast<std::size_t>(i)] -= h; mm[static_cast<std::size_t>(k)] -= h;
        const double hik = (objective(pp) - objective(pm) - objective(mp) + objective(mm)) / (4.0 * h * h);
        hess[static_cast<std::size_t>(i * n + k)] = hess[static_cast<std::size_t>(k * n + i)] = hik;
      }
    }
    std::vector<double> dir = g;
    for (double& x : hess) x = -x;
    bool newton = solve(hess, dir, n);
    double slope = 0.0;
    for (int i = 0; i < n; ++i) slope += dir[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
    if (!newton || !(slope > 0.0)) dir = g;
    double t = 1.0;
    bool moved = false;
    while (t > 1e-12) {
      auto trial = v;
      for (int i = 0; i < n; ++i) trial[static_cast<std::size_t>(i)] += t * dir[static_cast<std::size_t>(i)];
      const double ft = objective(trial);
      if (ft > f) {
        v = trial;
        f = ft;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return {v[0], v[1], v[2], v[3], v[4]};
}

LinearGaussianModel::LinearGaussianModel(double var_c, double var_z, double var_x, int dim, Posterior posterior,
                                         LinearPosterior learned)
    : var_c_(var_c), var_z_(var_z), var_x_(var_x), dim_(dim), posterior_(posterior), learned_(learned) {
  check_instance_variances(var_c, var_z, var_x);
  if (dim < 1) throw ConfigError("oracle dimension must be >= 1");
}

LinearGaussianInstance LinearGaussianModel::instance(const SetData& x) const {
  if (x.dim != dim_) throw ContractError("oracle model: observation dimension mismatch");
  return {var_c_, var_z_, var_x_, x};
}

std::vector<ElboTerms> LinearGaussianModel::elbo(const std::vector<const SetData*>& sets, Rng&) {
  std::vector<ElboTerms> out;
  for (const SetData* s : sets) {
    const LinearGaussianInstance inst = instance(*s);
    switch (posterior_) {
      case Posterior::exact: out.push_back(exact_elbo_terms(inst)); break;
      case Posterior::mean_field: out.push_back(gaussian_elbo(inst, mean_field(exact_posteriors(inst)))); break;
      case Posterior::learned: out.push_back(gaussian_elbo(inst, learned_.apply(inst))); break;
    }
  }
  return out;
}

LinearGaussianModel::Draw LinearGaussianModel::draw_posterior(const LinearGaussianInstance& inst, Rng& rng) const {
  const int d = dim_;
  Draw dr;
  dr.c.resize(static_cast<std::size_t>(d));
  dr.z.resize(static_cast<std::size_t>(inst.size()) * d);
  if (posterior_ == Posterior::exact) {
    const ExactPosterior p = exact_posteriors(inst);
    for (int j = 0; j < d; ++j) {
      double& c = dr.c[static_cast<std::size_t>(j)];
      c = p.c_mean[static_cast<std::size_t>(j)] + std::sqrt(p.c_var) * rng.normal();
      dr.log_q += log_normal(c, p.c_mean[static_cast<std::size_t>(j)], p.c_var);
      for (int i = 0; i < inst.size(); ++i) {
        const double m = p.z_slope * c + p.z_gain * inst.x.row(i)[static_cast<std::size_t>(j)];
        double& z = dr.z[static_cast<std::size_t>(i) * d + j];
        z = m + std::sqrt(p.z_cond_var) * rng.normal();
        dr.log_q += log_normal(z, m, p.z_cond_var);
      }
    }
    return dr;
  }
  const DiagPosterior q =
      posterior_ == Posterior::mean_field ? mean_field(exact_posteriors(inst)) : learned_.apply(inst);
  for (int j = 0; j < d; ++j) {
    double& c = dr.c[static_cast<std::size_t>(j)];
    c = q.c_mean[static_cast<std::size_t>(j)] + std::sqrt(q.c_var) * rng.normal();
    dr.log_q += log_normal(c, q.c_mean[static_cast<std::size_t>(j)], q.c_var);
  }
  for (std::size_t i = 0; i < dr.z.size(); ++i) {
    dr.z[i] = q.z_mean[i] + std::sqrt(q.z_var) * rng.normal();
    dr.log_q += log_normal(dr.z[i], q.z_mean[i], q.z_var);
  }
  return dr;
}

std::vector<double> LinearGaussianModel::log_weights(const SetData& x, int draws, Rng& rng) {
  if (draws < 1) throw ContractError("log_weights: need at least one importance sample");
  const LinearGaussianInstance inst = instance(x);
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(draws));
  for (int k = 0; k < draws; ++k) {
    const Draw dr = draw_posterior(inst, rng);
    w.push_back(log_joint(inst, dr.c, dr.z) - dr.log_q);
  }
  return w;
}

Generated LinearGaussianModel::sample_unconditional(int n, Rng& rng) {
  if (n < 0) throw ContractError("sample_unconditional: negative count");
  Generated g{SetData(n, dim_), SetData(n, dim_)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim_; ++j) {
      const double c = std::sqrt(var_c_) * rng.normal();
      const double z = c + std::sqrt(var_z_) * rng.normal();
      g.means.row(i)[static_cast<std::size_t>(j)] = z;
      g.samples.row(i)[static_cast<std::size_t>(j)] = z + std::sqrt(var_x_) * rng.normal();
    }
  }
  return g;
}

void LinearGaussianModel::context_posterior(const SetData& x, std::vector<double>& mean, double& var) const {
  const LinearGaussianInstance inst = instance(x);
  if (posterior_ == Posterior::learned) {
    const DiagPosterior q = learned_.apply(inst);
    mean = q.c_mean;
    var = q.c_var;
    return;
  }
  const ExactPosterior p = exact_posteriors(inst);
  mean = p.c_mean;
  var = p.c_var;
}

Generated LinearGaussianModel::sample_conditional(const SetData& x, Rng& rng) {
  if (x.size < 1) throw ContractError("sample_conditional: empty set");
  std::vector<double> mean;
  double var = 0.0;
  context_posterior(x, mean, var);
  Generated g{SetData(1, dim_), SetData(1, dim_)};
  for (int j = 0; j < dim_; ++j) {
    const double c = mean[static_cast<std::size_t>(j)] + std::sqrt(var) * rng.normal();
    const double z = c + std::sqrt(var_z_) * rng.normal();
    g.means.row(0)[static_cast<std::size_t>(j)] = z;
    g.samples.row(0)[static_cast<std::size_t>(j)] = z + std::sqrt(var_x_) * rng.normal();
  }
  return g;
}

Generated LinearGaussianModel::reconstruct(const SetData& x, RefineMode, Rng& rng) {
  // A single layer: both refinement modes draw (c, Z) from the posterior.
  if (x.size < 1) throw ContractError("reconstruct: empty set");
  const Draw dr = draw_posterior(instance(x), rng);
  Generated g{SetData(x.size, dim_), SetData(x.size, dim_)};
  for (std::size_t i = 0; i < dr.z.size(); ++i) {
    g.means.values[i] = dr.z[i];
    g.samples.values[i] = dr.z[i] + std::sqrt(var_x_) * rng.normal();
  }
  return g;
}

double LinearGaussianModel::predictive_log_likelihood(const SetData& context, std::span<const double> x, int draws,
                                                      Rng& rng) {
  if (draws < 1) throw ContractError("predictive_log_likelihood: need at least one draw");
  if (static_cast<int>(x.size()) != dim_) throw ContractError("predictive_log_likelihood: bad observation size");
  std::vector<double> mean;
  double var = 0.0;
  context_posterior(context, mean, var);
  double total = 0.0;
  for (int k = 0; k < draws; ++k) {
    for (int j = 0; j < dim_; ++j) {
      const double c = mean[static_cast<std::size_t>(j)] + std::sqrt(var) * rng.normal();
      const double z = c + std::sqrt(var_z_) * rng.normal();
      total += log_normal(x[static_cast<std::size_t>(j)], z, var_x_);
    }
  }
  return total / draws;
}

double LinearGaussianModel::context_divergence(const SetData& a, const SetData& b) {
  std::vector<double> ma, mb;
  double va = 0.0, vb = 0.0;
  context_posterior(a, ma, va);
  context_posterior(b, mb, vb);
  double kl = 0.0;
  for (int j = 0; j < dim_; ++j) kl += kl_normal(ma[static_cast<std::size_t>(j)], va, mb[static_cast<std::size_t>(j)], vb);
  return kl;
}

}  // namespace hfsgm
