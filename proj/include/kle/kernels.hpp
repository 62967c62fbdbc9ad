#pragma once

#include <memory>
#include <span>
#include <string>

#include "kle/geometry.hpp"

namespace kle {

/// Covariance kernel Gamma(x, x'). Symmetric, bounded by Gamma(x,x) and
/// positive semi-definite. Implementations must be stateless with respect to
/// evaluation (thread-safe).
class CovarianceKernel {
public:
  virtual ~CovarianceKernel() = default;
  virtual double eval(std::span<const double> x,
                      std::span<const double> x_prime) const = 0;
  /// Gamma(x, x) (constant for the stationary families shipped here).
  virtual double variance() const = 0;
  virtual std::string name() const = 0;
};

/// Stationary isotropic kernel of Euclidean distance r = |x - x'|_2.
/// Exponential: sigma^2 exp(-r / bL). Gaussian (squared exponential):
/// sigma^2 exp(-r^2 / (denom * bL^2)) with denom = 1 by default; the
/// convention is switchable because the literature uses both.
class IsotropicKernel : public CovarianceKernel {
public:
  enum class Family { Exponential, Gaussian };

  IsotropicKernel(Family family, double sigma2, double corr_len,
                  int gauss_denom = 1);

  Family family() const { return family_; }
  double sigma2() const { return sigma2_; }
  double corr_len() const { return corr_len_; }
  int gauss_denom() const { return gauss_denom_; }

  double eval_r(double r) const;
  double eval(std::span<const double> x,
              std::span<const double> x_prime) const override;
  double variance() const override { return sigma2_; }
  std::string name() const override;

private:
  Family family_;
  double sigma2_;
  double corr_len_;
  int gauss_denom_;
};

/// Kernel pulled back to parametric space: Gamma(F(xi), F(xi')).
double eval_pullback(const CovarianceKernel& kernel, const TensorPatch& patch,
                     std::span<const double> xi_hat,
                     std::span<const double> xi_hat_prime);

/// Creates a kernel by family name ("exponential" | "gaussian").
std::shared_ptr<const CovarianceKernel> make_kernel(const std::string& family,
                                                    double sigma2,
                                                    double corr_len,
                                                    int gauss_denom = 1);

} // namespace kle
