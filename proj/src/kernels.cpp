#include "kle/kernels.hpp"

#include <cmath>

#include "kle/errors.hpp"

namespace kle {

IsotropicKernel::IsotropicKernel(Family family, double sigma2, double corr_len,
                                 int gauss_denom)
    : family_(family), sigma2_(sigma2), corr_len_(corr_len),
      gauss_denom_(gauss_denom) {
  if (!(sigma2_ > 0.0)) throw InvalidArgument("kernel: variance must be positive");
  if (!(corr_len_ > 0.0))
    throw InvalidArgument("kernel: correlation length must be positive");
  if (gauss_denom_ != 1 && gauss_denom_ != 2)
    throw InvalidArgument("kernel: gauss_denom must be 1 or 2");
}

double IsotropicKernel::eval_r(double r) const {
  if (family_ == Family::Exponential)
    return sigma2_ * std::exp(-r / corr_len_);
  return sigma2_ * std::exp(-r * r / (gauss_denom_ * corr_len_ * corr_len_));
}

double IsotropicKernel::eval(std::span<const double> x,
                             std::span<const double> x_prime) const {
  double r2 = 0.0;
  for (size_t k = 0; k < x.size(); ++k) {
    const double dxk = x[k] - x_prime[k];
    r2 += dxk * dxk;
  }
  if (family_ == Family::Gaussian)
    return sigma2_ * std::exp(-r2 / (gauss_denom_ * corr_len_ * corr_len_));
  return sigma2_ * std::exp(-std::sqrt(r2) / corr_len_);
}

std::string IsotropicKernel::name() const {
  return family_ == Family::Exponential ? "exponential" : "gaussian";
}

double eval_pullback(const CovarianceKernel& kernel, const TensorPatch& patch,
                     std::span<const double> xi_hat,
                     std::span<const double> xi_hat_prime) {
  const Eigen::VectorXd x = patch.map_point(xi_hat);
  const Eigen::VectorXd xp = patch.map_point(xi_hat_prime);
  return kernel.eval(std::span<const double>(x.data(), x.size()),
                     std::span<const double>(xp.data(), xp.size()));
}

std::shared_ptr<const CovarianceKernel> make_kernel(const std::string& family,
                                                    double sigma2,
                                                    double corr_len,
                                                    int gauss_denom) {
  if (family == "exponential")
    return std::make_shared<IsotropicKernel>(IsotropicKernel::Family::Exponential,
                                             sigma2, corr_len);
  if (family == "gaussian")
    return std::make_shared<IsotropicKernel>(IsotropicKernel::Family::Gaussian,
                                             sigma2, corr_len, gauss_denom);
  throw InvalidArgument("kernel: unknown family '" + family +
                        "' (expected exponential|gaussian)");
}

} // namespace kle
