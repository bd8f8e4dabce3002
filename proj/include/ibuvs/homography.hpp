#pragma once

// Plane homography and infinite homography estimation from pixel
// correspondences, scale bookkeeping, and spectral interpolation.
//
// Direction convention: a map H estimated from correspondences satisfies
// dst ~ H * src (projective equality). In the servoing pipeline src is the
// desired image and dst the current image.

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "ibuvs/errors.hpp"
#include "ibuvs/geometry.hpp"

namespace ibuvs {

struct Correspondence {
    PixelPoint src;  // image 1 (desired)
    PixelPoint dst;  // image 0 (current)
};

/// Scale ledger for plane homographies. DLT output carries an arbitrary
/// projective scale; the planner equations require the metric scale at which
/// the third homogeneous component of H * src equals the depth ratio
/// dst_z / src_z. align_metric_scale() is the only way to obtain it.
enum class ScaleStatus { Projective, Metric };

struct Homography {
    Eigen::Matrix3d m;
    ScaleStatus scale_status;
};

struct InfiniteHomography {
    Eigen::Matrix3d m;
    bool normalized;
};

/// Eigen structure of a normalized infinite homography: eigenvalue 1 with
/// eigenvector along the rotation axis image, and a conjugate pair
/// exp(+-i*theta) spanning the invariant plane.
struct SpectralDecomposition {
    Eigen::Vector3cd ev_real_axis;  // eigenvector for lambda = 1
    Eigen::Vector3cd ev_pair;       // eigenvector for lambda = exp(i*theta)
    double theta;                   // radians, [0, pi)
};

namespace detail {

struct Conditioning {
    Eigen::Matrix3d t;  // similarity applied to the points
};

// Isotropic conditioning: centroid to the origin, RMS radius sqrt(2).
inline Conditioning conditioning_transform(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    double rms = 0.0;
    for (const auto& p : pts) rms += (p - c).squaredNorm();
    rms = std::sqrt(rms / static_cast<double>(pts.size()));
    if (rms < 1e-12)
        throw DegenerateConfiguration("DLT: correspondence points are coincident");
    const double s = std::sqrt(2.0) / rms;
    Conditioning out;
    out.t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
    return out;
}

}  // namespace detail

/// Direct linear transform over >= 4 correspondences, with isotropic
/// conditioning of both point sets. Result normalized to Frobenius norm
/// sqrt(3) and positive lower-right entry; scale status is projective.
inline Homography estimate_homography_dlt(const std::vector<Correspondence>& pairs) {
    const std::size_t n = pairs.size();
    if (n < 4)
        throw DegenerateConfiguration("DLT: need at least 4 correspondences");

    std::vector<Eigen::Vector2d> src(n), dst(n);
    for (std::size_t i = 0; i < n; ++i) {
        const PixelPoint s = pairs[i].src.normalized();
        const PixelPoint d = pairs[i].dst.normalized();
        src[i] = Eigen::Vector2d(s.u, s.v);
        dst[i] = Eigen::Vector2d(d.u, d.v);
    }
    const detail::Conditioning ts = detail::conditioning_transform(src);
    const detail::Conditioning td = detail::conditioning_transform(dst);

    Eigen::MatrixXd a(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d p = ts.t * Eigen::Vector3d(src[i].x(), src[i].y(), 1.0);
        const Eigen::Vector3d q = td.t * Eigen::Vector3d(dst[i].x(), dst[i].y(), 1.0);
        a.row(2 * i) << 0.0, 0.0, 0.0, -p.x(), -p.y(), -p.z(), q.y() * p.x(),
            q.y() * p.y(), q.y() * p.z();
        a.row(2 * i + 1) << p.x(), p.y(), p.z(), 0.0, 0.0, 0.0, -q.x() * p.x(),
            -q.x() * p.y(), -q.x() * p.z();
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    // A unique solution needs a one-dimensional null space: the second
    // smallest singular value must be healthy.
    if (sv(7) < 1e-9 * sv(0))
        throw DegenerateConfiguration("DLT: rank-deficient design matrix (collinear or coincident points)");

    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hc;
    hc << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

    Eigen::Matrix3d m = td.t.inverse() * hc * ts.t;
    m *= std::sqrt(3.0) / m.norm();
    if (m(2, 2) < 0.0) m = -m;
    return Homography{m, ScaleStatus::Projective};
}

/// Rescales a 3x3 matrix by the real cube root of its determinant, giving
/// det = 1; for a matrix similar to a rotation this fixes the real
/// eigenvalue at +1. Idempotent.
inline InfiniteHomography normalize_infinite_homography(const Eigen::Matrix3d& h) {
    const double det = h.determinant();
    if (std::abs(det) < 1e-12)
        throw SingularMatrix("normalize_infinite_homography: determinant vanishes");
    return InfiniteHomography{h / std::cbrt(det), true};
}

/// DLT on vanishing-point correspondences followed by det normalization.
/// Rejects results whose eigenvalue moduli drift off the unit circle by more
/// than `modulus_tol` (tighten for clean data, loosen for noisy trackers).
inline InfiniteHomography estimate_infinite_homography(
    const std::vector<Correspondence>& vp_pairs, double modulus_tol = 1e-3) {
    const Homography h = estimate_homography_dlt(vp_pairs);
    const InfiniteHomography hi = normalize_infinite_homography(h.m);

    Eigen::EigenSolver<Eigen::Matrix3d> es(hi.m);
    for (int i = 0; i < 3; ++i) {
        if (std::abs(std::abs(es.eigenvalues()(i)) - 1.0) > modulus_tol)
            throw NotRotationSimilar(
                "estimate_infinite_homography: eigenvalue moduli off the unit circle");
    }
    return hi;
}

/// Rotation angle implied by a normalized infinite homography (similar to a
/// rotation, so the trace formula applies).
inline double infinite_homography_angle(const InfiniteHomography& h) {
    if (!h.normalized)
        throw std::invalid_argument("infinite_homography_angle: input not normalized");
    return std::acos(std::max(-1.0, std::min(1.0, (h.m.trace() - 1.0) / 2.0)));
}

inline constexpr double kHalfTurnGuard = 1e-4;  // radians below pi

/// Eigendecomposition of a normalized infinite homography. Near a half turn
/// the conjugate eigenvector pair degenerates; such inputs are rejected.
inline SpectralDecomposition spectral_decompose(const InfiniteHomography& h) {
    const double theta = infinite_homography_angle(h);
    if (theta > kPi - kHalfTurnGuard)
        throw NearHalfTurn("spectral_decompose: rotation angle too close to pi");
    if (theta < 1e-8) {
        // All eigenvalues coincide at 1; any unitary basis reconstructs the
        // matrix to within theta.
        SpectralDecomposition d;
        d.ev_pair = Eigen::Vector3cd(std::complex<double>(1, 0) / std::sqrt(2.0),
                                     std::complex<double>(0, 1) / std::sqrt(2.0),
                                     std::complex<double>(0, 0));
        d.ev_real_axis = Eigen::Vector3cd(0, 0, 1);
        d.theta = theta;
        return d;
    }

    Eigen::EigenSolver<Eigen::Matrix3d> es(h.m);
    const Eigen::Vector3cd evals = es.eigenvalues();
    int real_idx = 0;
    double best = std::numeric_limits<double>::max();
    for (int i = 0; i < 3; ++i) {
        const double d = std::abs(evals(i) - std::complex<double>(1.0, 0.0));
        if (d < best) {
            best = d;
            real_idx = i;
        }
    }
    int pair_idx = -1;
    for (int i = 0; i < 3; ++i) {
        if (i == real_idx) continue;
        if (pair_idx < 0 || evals(i).imag() > evals(pair_idx).imag()) pair_idx = i;
    }
    return SpectralDecomposition{es.eigenvectors().col(real_idx),
                                 es.eigenvectors().col(pair_idx), theta};
}

/// Reconstructs U * diag(exp(i t theta), exp(-i t theta), 1) * U^-1 from a
/// decomposition; mainly a test hook for the reconstruction invariant.
inline Eigen::Matrix3d spectral_reconstruct(const SpectralDecomposition& d, double t = 1.0) {
    Eigen::Matrix3cd u;
    u.col(0) = d.ev_pair;
    u.col(1) = d.ev_pair.conjugate();
    u.col(2) = d.ev_real_axis;
    Eigen::Vector3cd lam;
    lam << std::polar(1.0, t * d.theta), std::polar(1.0, -t * d.theta),
        std::complex<double>(1.0, 0.0);
    const Eigen::Matrix3cd rec = u * lam.asDiagonal() * u.inverse();
    return rec.real();
}

/// Real fractional power of a normalized infinite homography: same
/// eigenvectors, eigenvalues raised to t. Computed as the quadratic
/// polynomial a*I + b*H + c*H^2 whose coefficients interpolate the known
/// spectrum {1, exp(+-i theta)}, so the result is real by construction.
///
/// `near_pi_guard` is the rejection margin below pi; the default matches
/// spectral_decompose. Callers implementing the two-stage half-turn
/// recovery may relax it, accepting conditioning ~ 1/sin(theta).
inline InfiniteHomography fractional_power(const InfiniteHomography& h, double t,
                                           double near_pi_guard = kHalfTurnGuard) {
    if (!h.normalized)
        throw std::invalid_argument("fractional_power: input not normalized");
    if (t < 0.0 || t > 1.0)
        throw std::invalid_argument("fractional_power: t outside [0, 1]");
    if (t == 0.0) return InfiniteHomography{Eigen::Matrix3d::Identity(), true};
    if (t == 1.0) return h;

    const double theta = infinite_homography_angle(h);
    if (theta > kPi - near_pi_guard)
        throw NearHalfTurn("fractional_power: rotation angle too close to pi");
    if (theta < 1e-7) {
        // Spectrum collapses to 1; first-order interpolation is exact to
        // O(theta^2) which is below every tolerance in use.
        return InfiniteHomography{
            Eigen::Matrix3d::Identity() + t * (h.m - Eigen::Matrix3d::Identity()), true};
    }

    // Solve the three eigenvalue equations; the conjugate pair collapses to
    // one real and one imaginary row.
    Eigen::Matrix3d v;
    v << 1.0, 1.0, 1.0,
         1.0, std::cos(theta), std::cos(2.0 * theta),
         0.0, std::sin(theta), std::sin(2.0 * theta);
    const Eigen::Vector3d rhs(1.0, std::cos(t * theta), std::sin(t * theta));
    const Eigen::Vector3d abc = v.partialPivLu().solve(rhs);

    const Eigen::Matrix3d out = abc(0) * Eigen::Matrix3d::Identity() + abc(1) * h.m +
                                abc(2) * (h.m * h.m);
    return InfiniteHomography{out, true};
}

/// One correspondence on the target plane with a known depth ratio
/// dst_z / src_z, used to pin the metric scale of a projective homography.
struct DepthRatioReference {
    Correspondence corr;
    double depth_ratio;  // dst_z / src_z
};

/// Rescales H so the third homogeneous component of H * src equals the
/// reference depth ratio; the result satisfies the plane-induced homography
/// equation with true depths.
inline Homography align_metric_scale(const Homography& h_projective,
                                     const DepthRatioReference& reference) {
    if (!(reference.depth_ratio > 0.0))
        throw InvalidDepthRatio("align_metric_scale: depth ratio must be positive");
    const Eigen::Vector3d mapped = h_projective.m * reference.corr.src.normalized().vec();
    if (std::abs(mapped.z()) < 1e-12)
        throw NumericalBlowup("align_metric_scale: reference point maps to infinity");
    const double sigma = reference.depth_ratio / mapped.z();
    return Homography{sigma * h_projective.m, ScaleStatus::Metric};
}

/// Symmetric transfer error in pixels for one correspondence.
inline double symmetric_transfer_error(const Eigen::Matrix3d& h, const Correspondence& c) {
    const Eigen::Vector3d fwd = h * c.src.normalized().vec();
    const Eigen::Vector3d bwd = h.inverse() * c.dst.normalized().vec();
    const PixelPoint pf = PixelPoint::from_homogeneous(fwd);
    const PixelPoint pb = PixelPoint::from_homogeneous(bwd);
    const PixelPoint d = c.dst.normalized();
    const PixelPoint s = c.src.normalized();
    const double e_fwd = std::hypot(pf.u - d.u, pf.v - d.v);
    const double e_bwd = std::hypot(pb.u - s.u, pb.v - s.v);
    return std::sqrt(0.5 * (e_fwd * e_fwd + e_bwd * e_bwd));
}

}  // namespace ibuvs
