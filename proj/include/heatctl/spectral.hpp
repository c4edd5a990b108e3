#pragma once

// Sine-spectral discretization of the Dirichlet heat equation on (0,1).
//
// A state is stored by its coefficients in the orthonormal basis
// e_k(x) = sqrt(2) sin(k pi x), k = 1..N, so the L2 norm of a state is the
// Euclidean norm of its coefficients and the semigroup e^{t Laplacian} is
// diagonal with entries exp(-(k pi)^2 t).

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "heatctl/errors.hpp"

namespace heatctl {

/// An element of L2(0,1) in the truncated sine basis.
class Field {
 public:
  Field() = default;
  explicit Field(Eigen::VectorXd coeffs) : coeffs_(std::move(coeffs)) {}

  static Field zeros(Eigen::Index num_modes) { return Field(Eigen::VectorXd::Zero(num_modes)); }

  /// Unit coefficient on mode k (1-based).
  static Field mode(Eigen::Index num_modes, Eigen::Index k) {
    Field f = zeros(num_modes);
    f.coeffs_[k - 1] = 1.0;
    return f;
  }

  Eigen::Index size() const noexcept { return coeffs_.size(); }
  const Eigen::VectorXd& coeffs() const noexcept { return coeffs_; }
  Eigen::VectorXd& coeffs() noexcept { return coeffs_; }
  double operator[](Eigen::Index i) const { return coeffs_[i]; }

  double norm() const { return coeffs_.norm(); }

  Field& operator+=(const Field& o) {
    coeffs_ += o.coeffs_;
    return *this;
  }
  Field& operator-=(const Field& o) {
    coeffs_ -= o.coeffs_;
    return *this;
  }
  Field& operator*=(double s) {
    coeffs_ *= s;
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(Field a, double s) { return a *= s; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend double dot(const Field& a, const Field& b) { return a.coeffs_.dot(b.coeffs_); }
  friend bool operator==(const Field& a, const Field& b) { return a.coeffs_ == b.coeffs_; }

 private:
  Eigen::VectorXd coeffs_;
};

/// Open interval (lo, hi) inside [0, 1]; the control region omega.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

namespace detail {

// sin(pi * v), exact at integers and half-integers so that the Gram matrix of
// the full window is the identity bit-for-bit.
inline double sin_pi(double v) {
  double r = std::fmod(v, 2.0);
  if (r < 0.0) r += 2.0;
  double sign = 1.0;
  if (r >= 1.0) {
    sign = -1.0;
    r -= 1.0;
  }
  if (r > 0.5) r = 1.0 - r;
  if (r == 0.0) return 0.0;
  if (r == 0.5) return sign;
  return sign * std::sin(std::numbers::pi * r);
}

// Antiderivative of 2 sin(j pi x) sin(k pi x).
inline double sine_product_antiderivative(int j, int k, double x) {
  const double pi = std::numbers::pi;
  if (j == k) return x - sin_pi(2.0 * k * x) / (2.0 * k * pi);
  const int d = j - k;
  const int s = j + k;
  return sin_pi(d * x) / (d * pi) - sin_pi(s * x) / (s * pi);
}

}  // namespace detail

/// Eigen-structure of the Dirichlet Laplacian on (0,1) together with the
/// Gram matrix of the control window. Immutable after construction.
class SpectralDomain {
 public:
  SpectralDomain(Interval omega, int num_modes) : omega_(omega), num_modes_(num_modes) {
    if (num_modes < 1) throw ConfigError("num_modes must be >= 1, got " + std::to_string(num_modes));
    if (!(omega.lo >= 0.0 && omega.hi <= 1.0 && omega.lo < omega.hi)) {
      throw ConfigError("control window must satisfy 0 <= a < b <= 1, got (" + std::to_string(omega.lo) +
                        ", " + std::to_string(omega.hi) + ")");
    }
    eigenvalues_.resize(num_modes);
    for (int k = 1; k <= num_modes; ++k) {
      const double kpi = k * std::numbers::pi;
      eigenvalues_[k - 1] = kpi * kpi;
    }
    gram_.resize(num_modes, num_modes);
    for (int j = 1; j <= num_modes; ++j) {
      for (int k = j; k <= num_modes; ++k) {
        const double g = detail::sine_product_antiderivative(j, k, omega.hi) -
                         detail::sine_product_antiderivative(j, k, omega.lo);
        gram_(j - 1, k - 1) = g;
        gram_(k - 1, j - 1) = g;
      }
    }
    gram_squared_ = gram_ * gram_;
  }

  int num_modes() const noexcept { return num_modes_; }
  const Interval& omega() const noexcept { return omega_; }

  /// mu_k = (k pi)^2, strictly increasing.
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

  /// G_jk = integral over omega of e_j e_k.
  const Eigen::MatrixXd& gram() const noexcept { return gram_; }
  const Eigen::MatrixXd& gram_squared() const noexcept { return gram_squared_; }

  void require_size(const Field& f, const char* what) const {
    if (f.size() != num_modes_) {
      throw ArgumentError(std::string(what) + ": field has " + std::to_string(f.size()) + " modes, domain has " +
                          std::to_string(num_modes_));
    }
  }

 private:
  Interval omega_;
  int num_modes_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd gram_squared_;
};

inline SpectralDomain build_domain(Interval omega, int num_modes) { return SpectralDomain(omega, num_modes); }

/// Diagonal of e^{dt Laplacian}.
inline Eigen::VectorXd decay_factors(const SpectralDomain& domain, double dt) {
  return (-domain.eigenvalues().array() * dt).exp().matrix();
}

/// Applies the heat semigroup for time dt >= 0.
inline Field propagate(const SpectralDomain& domain, const Field& field, double dt) {
  if (!(dt >= 0.0)) throw ArgumentError("propagate: dt must be >= 0");
  domain.require_size(field, "propagate");
  return Field((field.coeffs().array() * (-domain.eigenvalues().array() * dt).exp()).matrix());
}

/// Galerkin projection of chi_omega * f onto the truncated basis.
inline Field apply_mask(const SpectralDomain& domain, const Field& field) {
  domain.require_size(field, "apply_mask");
  return Field(domain.gram() * field.coeffs());
}

/// ||chi_omega f||_{L2} = sqrt(c^T G c).
inline double masked_norm(const SpectralDomain& domain, const Field& field) {
  domain.require_size(field, "masked_norm");
  const double q = field.coeffs().dot(domain.gram() * field.coeffs());
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

}  // namespace heatctl
