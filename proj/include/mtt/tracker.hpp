#pragma once

#include "mtt/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace mtt
{

template <typename Scalar> using Vec2T = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec4T = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar> using Mat4T = Eigen::Matrix<Scalar, 4, 4>;
template <typename Scalar> using VecXT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar> using MatXT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using JacobianT = Eigen::Matrix<Scalar, Eigen::Dynamic, 4>;

/// State mean (x, y, vx, vy) and covariance.
template <typename Scalar = double>
struct TrackEstimate
{
  Vec4T<Scalar> mean = Vec4T<Scalar>::Zero();
  Mat4T<Scalar> cov = Mat4T<Scalar>::Identity();

  Vec2T<Scalar> position() const { return mean.template head<2>(); }
};

/// Amplitudes observed by a set of sensors in one tick.
template <typename Scalar = double>
struct MeasurementBatch
{
  std::vector<int> sensor_ids;
  std::vector<Vec2T<Scalar>> sensor_pos;
  VecXT<Scalar> z;
  Scalar noise_var = Scalar(0);
  Scalar source_power = Scalar(1);

  std::size_t size() const { return sensor_ids.size(); }
  bool empty() const { return sensor_ids.empty(); }
};

// ---------------------------------------------------------------------------
// EKF

template <typename Scalar>
TrackEstimate<Scalar> ekf_predict(const TrackEstimate<Scalar>& est, const Mat4T<Scalar>& F,
                                  const Mat4T<Scalar>& Q)
{
  TrackEstimate<Scalar> out;
  out.mean.noalias() = F * est.mean;
  out.cov.noalias() = F * est.cov * F.transpose();
  out.cov += Q;
  out.cov = Scalar(0.5) * (out.cov + out.cov.transpose()).eval();
  return out;
}

/// h(x) for every sensor: sqrt(P / (1 + d^2)).
template <typename Scalar>
VecXT<Scalar> measurement_function(const Vec4T<Scalar>& mean, std::span<const Vec2T<Scalar>> sensors,
                                   Scalar source_power)
{
  VecXT<Scalar> h(static_cast<Eigen::Index>(sensors.size()));
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const Scalar d2 = (mean.template head<2>() - sensors[i]).squaredNorm();
    h(static_cast<Eigen::Index>(i)) = std::sqrt(source_power / (Scalar(1) + d2));
  }
  return h;
}

/// Rows are d h_i / d(x, y, vx, vy); the velocity columns are zero.
template <typename Scalar>
JacobianT<Scalar> measurement_jacobian(const Vec4T<Scalar>& mean, std::span<const Vec2T<Scalar>> sensors,
                                       Scalar source_power)
{
  JacobianT<Scalar> H = JacobianT<Scalar>::Zero(static_cast<Eigen::Index>(sensors.size()), 4);
  const Scalar root_p = std::sqrt(source_power);
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const Vec2T<Scalar> diff = mean.template head<2>() - sensors[i];
    const Scalar base = Scalar(1) + diff.squaredNorm();
    // d/dx sqrt(P) (1 + d^2)^{-1/2} = -sqrt(P) (x - s_x) (1 + d^2)^{-3/2}
    const Scalar scale = -root_p / (base * std::sqrt(base));
    H.row(static_cast<Eigen::Index>(i)).template head<2>() = scale * diff.transpose();
  }
  return H;
}

template <typename Scalar = double>
struct UpdateResult
{
  TrackEstimate<Scalar> est;
  MatXT<Scalar> gain;     // 4 x n, empty when skipped
  bool applied = false;   // false: S was singular, estimate coasts
};

/// Kalman correction with a precomputed innovation z - h(mean).
/// S = H P H^T + R, K = P H^T S^-1, mean += K y, P = (I - K H) P.
template <typename Scalar>
UpdateResult<Scalar> kalman_correct(const TrackEstimate<Scalar>& est, const VecXT<Scalar>& innovation,
                                    const JacobianT<Scalar>& H, const MatXT<Scalar>& R)
{
  UpdateResult<Scalar> out;
  out.est = est;
  if (H.rows() == 0) return out;

  MatXT<Scalar> S = H * est.cov * H.transpose();
  if (R.size() > 0) S += R;
  Eigen::FullPivLU<MatXT<Scalar>> lu(S);
  if (!lu.isInvertible()) return out;

  const MatXT<Scalar> PHt = est.cov * H.transpose();
  out.gain = lu.solve(PHt.transpose()).transpose();
  out.est.mean += out.gain * innovation;
  const Mat4T<Scalar> I = Mat4T<Scalar>::Identity();
  out.est.cov = (I - out.gain * H) * est.cov;
  out.est.cov = Scalar(0.5) * (out.est.cov + out.est.cov.transpose()).eval();
  out.applied = true;
  return out;
}

template <typename Scalar>
UpdateResult<Scalar> ekf_update(const TrackEstimate<Scalar>& est, const MeasurementBatch<Scalar>& batch,
                                const JacobianT<Scalar>& H, const MatXT<Scalar>& R)
{
  const VecXT<Scalar> h = measurement_function<Scalar>(est.mean, batch.sensor_pos, batch.source_power);
  return kalman_correct<Scalar>(est, batch.z - h, H, R);
}

/// Iterated update: relinearizes h about the running estimate until the step
/// falls below `tol`. One iteration is the plain update. With R present, each
/// relinearized step is halved until the MAP cost no longer increases.
template <typename Scalar>
UpdateResult<Scalar> ekf_update_iterated(const TrackEstimate<Scalar>& est, const MeasurementBatch<Scalar>& batch,
                                         const MatXT<Scalar>& R, int iterations, Scalar tol = Scalar(1e-6))
{
  UpdateResult<Scalar> out;
  out.est = est;
  if (batch.empty()) return out;

  const bool damped = iterations > 1 && R.size() > 0;
  Eigen::LDLT<Mat4T<Scalar>> prior(est.cov);
  Eigen::LDLT<MatXT<Scalar>> noise;
  if (damped) noise.compute(R);
  auto cost = [&](const Vec4T<Scalar>& x) {
    const VecXT<Scalar> r = batch.z - measurement_function<Scalar>(x, batch.sensor_pos, batch.source_power);
    const Vec4T<Scalar> dx = x - est.mean;
    return r.dot(noise.solve(r)) + dx.dot(prior.solve(dx));
  };

  Vec4T<Scalar> x = est.mean;
  for (int it = 0; it < std::max(1, iterations); ++it) {
    const JacobianT<Scalar> H = measurement_jacobian<Scalar>(x, batch.sensor_pos, batch.source_power);
    const VecXT<Scalar> h = measurement_function<Scalar>(x, batch.sensor_pos, batch.source_power);
    const VecXT<Scalar> innovation = batch.z - h - H * (est.mean - x);
    auto step = kalman_correct<Scalar>(est, innovation, H, R);
    if (!step.applied) break;
    if (damped) {
      const Scalar base = cost(x);
      const Vec4T<Scalar> dir = step.est.mean - x;
      Scalar alpha = 1;
      Scalar c = cost(x + dir);
      while (!(c <= base) && alpha > Scalar(1.0 / 1024)) {
        alpha /= 2;
        c = cost(x + alpha * dir);
      }
      if (!(c <= base)) {
        if (!out.applied) out = step;  // keep the plain update rather than none
        break;
      }
      step.est.mean = x + alpha * dir;
    }
    const Scalar moved = (step.est.mean - x).norm();
    out = step;
    x = step.est.mean;
    if (moved < tol) break;
  }
  return out;
}

/// Indices whose innovation lies within `gate` standard deviations of its
/// predicted spread sqrt(S_ii). A non-positive gate keeps everything.
template <typename Scalar>
std::vector<std::size_t> innovation_gate(const TrackEstimate<Scalar>& est, const MeasurementBatch<Scalar>& batch,
                                         Scalar gate)
{
  std::vector<std::size_t> keep;
  const VecXT<Scalar> h = measurement_function<Scalar>(est.mean, batch.sensor_pos, batch.source_power);
  const JacobianT<Scalar> H = measurement_jacobian<Scalar>(est.mean, batch.sensor_pos, batch.source_power);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Scalar s = (H.row(r) * est.cov * H.row(r).transpose())(0, 0) + batch.noise_var;
    if (gate <= Scalar(0) || std::abs(batch.z(r) - h(r)) <= gate * std::sqrt(s)) keep.push_back(i);
  }
  return keep;
}

// ---------------------------------------------------------------------------
// Fusion

template <typename Scalar>
Scalar median_of(std::vector<Scalar> v)
{
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : Scalar(0.5) * (v[n / 2 - 1] + v[n / 2]);
}

/// Indices into the fused value list.
struct FusionSet
{
  std::vector<std::size_t> accepted;
  std::vector<std::size_t> rejected;
};

/// Median / MAD outlier rejection, repeated until no further value is removed.
/// At least the value nearest the median always survives.
template <typename Scalar>
FusionSet fuse_results(std::span<const Scalar> values, Scalar threshold)
{
  FusionSet out;
  std::vector<std::size_t> live(values.size());
  for (std::size_t i = 0; i < live.size(); ++i) live[i] = i;

  while (live.size() > 1) {
    std::vector<Scalar> v;
    v.reserve(live.size());
    for (auto i : live) v.push_back(values[i]);
    const Scalar med = median_of(v);
    std::vector<Scalar> dev;
    for (auto x : v) dev.push_back(std::abs(x - med));
    const Scalar mad = median_of(dev);

    std::vector<std::size_t> keep;
    for (auto i : live)
      if (std::abs(values[i] - med) <= threshold * mad) keep.push_back(i);
    if (keep.empty()) {
      auto nearest = *std::min_element(live.begin(), live.end(), [&](auto a, auto b) {
        return std::abs(values[a] - med) < std::abs(values[b] - med);
      });
      keep.push_back(nearest);
    }
    if (keep.size() == live.size()) break;
    for (auto i : live)
      if (std::find(keep.begin(), keep.end(), i) == keep.end()) out.rejected.push_back(i);
    live = std::move(keep);
  }
  out.accepted = std::move(live);
  std::sort(out.rejected.begin(), out.rejected.end());
  return out;
}

/// Mean of the accepted values. Works for scalars and fixed-size vectors.
template <typename T>
T integrate(const FusionSet& set, std::span<const T> values)
{
  if (set.accepted.empty()) throw DomainError("integrate: empty fusion set");
  T sum = values[set.accepted.front()];
  for (std::size_t i = 1; i < set.accepted.size(); ++i) sum = sum + values[set.accepted[i]];
  return sum / static_cast<double>(set.accepted.size());
}

// ---------------------------------------------------------------------------
// Autoregressive trajectory predictor

template <typename Scalar = double>
struct PredictorModel
{
  int order = 0;
  VecXT<Scalar> coeffs;  // applied to the last `order` samples, oldest first
  Scalar residual = Scalar(0);
  bool rank_deficient = false;
};

/// Least-squares fit of x(t + k) = sum_i chi_i x(t + i - 1) over the Hankel
/// system built from the history. Needs at least 2k samples; the
/// minimum-norm solution is returned for rank-deficient systems.
template <typename Scalar>
PredictorModel<Scalar> fit_predictor(std::span<const Scalar> history, int order)
{
  const auto n = static_cast<Eigen::Index>(history.size());
  const Eigen::Index k = order;
  if (order < 1) throw DomainError("predictor order must be >= 1");
  if (n < 2 * k) throw DomainError("predictor history shorter than twice the order");

  const Eigen::Index rows = n - k;
  MatXT<Scalar> A(rows, k);
  VecXT<Scalar> b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) A(r, c) = history[static_cast<std::size_t>(r + c)];
    b(r) = history[static_cast<std::size_t>(r + k)];
  }

  Eigen::CompleteOrthogonalDecomposition<MatXT<Scalar>> cod(A);
  PredictorModel<Scalar> model;
  model.order = order;
  model.coeffs = cod.solve(b);
  model.rank_deficient = cod.rank() < k;
  model.residual = (A * model.coeffs - b).norm();
  return model;
}

template <typename Scalar>
std::vector<Scalar> predict_trajectory(const PredictorModel<Scalar>& model, std::span<const Scalar> history,
                                       int steps)
{
  std::vector<Scalar> out;
  if (steps <= 0) return out;
  const auto k = static_cast<std::size_t>(model.order);
  if (history.size() < k) throw DomainError("history shorter than the predictor order");

  std::vector<Scalar> window(history.end() - static_cast<std::ptrdiff_t>(k), history.end());
  out.reserve(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    Scalar next = Scalar(0);
    for (std::size_t i = 0; i < k; ++i) next += model.coeffs(static_cast<Eigen::Index>(i)) * window[i];
    out.push_back(next);
    window.erase(window.begin());
    window.push_back(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Accuracy metrics

/// Distance between the centroid of the node estimates and the truth.
template <typename Scalar>
Scalar tracking_error(std::span<const Vec2T<Scalar>> estimates, const Vec2T<Scalar>& truth)
{
  if (estimates.empty()) throw DomainError("tracking_error needs at least one estimate");
  Vec2T<Scalar> centroid = Vec2T<Scalar>::Zero();
  for (const auto& e : estimates) centroid += e;
  centroid /= static_cast<Scalar>(estimates.size());
  return (centroid - truth).norm();
}

/// Mean over (estimate, truth) pairs of the squared planar error.
template <typename Scalar>
Scalar mse(std::span<const std::pair<Vec2T<Scalar>, Vec2T<Scalar>>> track)
{
  if (track.empty()) throw DomainError("mse of an empty track");
  Scalar sum = Scalar(0);
  for (const auto& [est, truth] : track) sum += (est - truth).squaredNorm();
  return sum / static_cast<Scalar>(track.size());
}

}  // namespace mtt
