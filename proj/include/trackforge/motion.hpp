#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <vector>

#include "trackforge/core.hpp"

namespace trackforge {

using StateVector = Eigen::Matrix<double, 8, 1>;
using StateMatrix = Eigen::Matrix<double, 8, 8>;
using MeasVector = Eigen::Matrix<double, 4, 1>;
using MeasMatrix = Eigen::Matrix<double, 4, 4>;

/// Mean (cx, cy, aspect, h, vcx, vcy, vaspect, vh) and its covariance.
struct KalmanState {
  StateVector mean = StateVector::Zero();
  StateMatrix covariance = StateMatrix::Identity();
};

/// Process/measurement noise. Position and size stds scale with box height;
/// the aspect ratio gets constant stds.
struct KalmanNoise {
  double std_weight_position = 1.0 / 20.0;
  double std_weight_velocity = 1.0 / 160.0;
  double std_aspect = 1e-2;
  double std_aspect_velocity = 1e-5;
  double std_aspect_measurement = 1e-1;
};

/// chi-square 0.95 quantile with 4 degrees of freedom.
inline constexpr double kChi2Gate4 = 9.4877;

inline MeasVector to_eigen(const Measurement& m) { return MeasVector(m[0], m[1], m[2], m[3]); }

/// Squared Mahalanobis distance d' S^-1 d for any fixed size.
template <int N>
double squared_mahalanobis(const Eigen::Matrix<double, N, 1>& d, const Eigen::Matrix<double, N, N>& s) {
  Eigen::LLT<Eigen::Matrix<double, N, N>> llt(s);
  if (llt.info() != Eigen::Success) throw NumericError("innovation covariance is not positive definite");
  const Eigen::Matrix<double, N, 1> z = llt.matrixL().solve(d);
  return z.squaredNorm();
}

/// Constant-velocity Kalman filter over (cx, cy, aspect, h), one frame per step.
class KalmanFilter {
 public:
  explicit KalmanFilter(KalmanNoise noise = {}) : noise_(noise) {
    motion_ = StateMatrix::Identity();
    for (int i = 0; i < 4; ++i) motion_(i, 4 + i) = 1.0;
    update_ = Eigen::Matrix<double, 4, 8>::Zero();
    for (int i = 0; i < 4; ++i) update_(i, i) = 1.0;
  }

  const KalmanNoise& noise() const { return noise_; }
  const StateMatrix& motion_matrix() const { return motion_; }
  const Eigen::Matrix<double, 4, 8>& measurement_matrix() const { return update_; }

  KalmanState initiate(const Measurement& m) const {
    if (!(m[3] > 0.0) || !std::isfinite(m[3])) throw InvalidMeasurementError("measurement height must be positive");
    KalmanState s;
    s.mean.head<4>() = to_eigen(m);
    s.mean.tail<4>().setZero();
    const double h = m[3];
    const double wp = noise_.std_weight_position;
    const double wv = noise_.std_weight_velocity;
    StateVector std;
    std << 2 * wp * h, 2 * wp * h, noise_.std_aspect, 2 * wp * h, 10 * wv * h, 10 * wv * h,
        noise_.std_aspect_velocity, 10 * wv * h;
    s.covariance = std.array().square().matrix().asDiagonal();
    return s;
  }

  StateMatrix process_noise(const KalmanState& s) const {
    const double h = s.mean(3);
    const double wp = noise_.std_weight_position;
    const double wv = noise_.std_weight_velocity;
    StateVector std;
    std << wp * h, wp * h, noise_.std_aspect, wp * h, wv * h, wv * h, noise_.std_aspect_velocity, wv * h;
    return std.array().square().matrix().asDiagonal();
  }

  MeasMatrix measurement_noise(const KalmanState& s) const {
    const double h = s.mean(3);
    const double wp = noise_.std_weight_position;
    MeasVector std(wp * h, wp * h, noise_.std_aspect_measurement, wp * h);
    return std.array().square().matrix().asDiagonal();
  }

  KalmanState predict(const KalmanState& s) const {
    KalmanState out;
    out.mean = motion_ * s.mean;
    out.covariance = motion_ * s.covariance * motion_.transpose() + process_noise(s);
    symmetrize(out.covariance);
    return out;
  }

  /// Measurement-space mean and innovation covariance S = H P H' + R.
  std::pair<MeasVector, MeasMatrix> project(const KalmanState& s) const {
    MeasVector mean = update_ * s.mean;
    MeasMatrix cov = update_ * s.covariance * update_.transpose() + measurement_noise(s);
    return {mean, cov};
  }

  KalmanState update(const KalmanState& s, const Measurement& m) const {
    const auto [proj_mean, proj_cov] = project(s);
    Eigen::LLT<MeasMatrix> llt(proj_cov);
    if (llt.info() != Eigen::Success) throw NumericError("innovation covariance is singular");
    // K = P H' S^-1, computed as (S^-1 H P)' since S and P are symmetric.
    const Eigen::Matrix<double, 4, 8> hp = update_ * s.covariance;
    const Eigen::Matrix<double, 8, 4> gain = llt.solve(hp).transpose();
    const MeasVector innovation = to_eigen(m) - proj_mean;
    KalmanState out;
    out.mean = s.mean + gain * innovation;
    out.covariance = s.covariance - gain * proj_cov * gain.transpose();
    symmetrize(out.covariance);
    return out;
  }

  std::vector<double> gating_distance(const KalmanState& s, const std::vector<Measurement>& ms) const {
    const auto [proj_mean, proj_cov] = project(s);
    Eigen::LLT<MeasMatrix> llt(proj_cov);
    if (llt.info() != Eigen::Success) throw NumericError("innovation covariance is singular");
    std::vector<double> out;
    out.reserve(ms.size());
    for (const auto& m : ms) {
      const MeasVector d = to_eigen(m) - proj_mean;
      out.push_back(llt.matrixL().solve(d).squaredNorm());
    }
    return out;
  }

  static BoundingBox box_of(const KalmanState& s) {
    return measurement_to_box({s.mean(0), s.mean(1), s.mean(2), s.mean(3)});
  }

 private:
  static void symmetrize(StateMatrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

  KalmanNoise noise_;
  StateMatrix motion_;
  Eigen::Matrix<double, 4, 8> update_;
};

}  // namespace trackforge
