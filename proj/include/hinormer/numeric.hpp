#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hinormer {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Per-position validity flags; nonzero means valid.
using Mask = std::span<const std::uint8_t>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols)
{
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
}

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                    shape_string(a.rows(), a.cols()) + " vs " +
                                    shape_string(b.rows(), b.cols()));
}

template <typename A, typename B>
auto matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b)
{
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: shape mismatch " + shape_string(a.rows(), a.cols()) +
                                    " * " + shape_string(b.rows(), b.cols()));
    return Mat<typename A::Scalar>(a * b);
}

template <typename Derived>
auto leaky_relu(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar slope)
{
    using S = typename Derived::Scalar;
    return Mat<S>(x.unaryExpr([slope](S v) { return v > S(0) ? v : slope * v; }));
}

/// Row-wise softmax restricted to the columns flagged valid in `mask`.
/// Masked columns come out exactly zero. Max-subtracted for stability.
template <typename Derived>
auto masked_softmax(const Eigen::MatrixBase<Derived>& x, Mask mask)
{
    using S = typename Derived::Scalar;
    if (static_cast<Eigen::Index>(mask.size()) != x.cols())
        throw std::invalid_argument("masked_softmax: mask length " + std::to_string(mask.size()) +
                                    " does not match " + std::to_string(x.cols()) + " columns");
    bool any = false;
    for (auto m : mask) any = any || m != 0;
    if (!any) throw std::invalid_argument("masked_softmax: all entries masked");

    Mat<S> out = Mat<S>::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        S mx = -std::numeric_limits<S>::infinity();
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            if (mask[j]) mx = std::max(mx, x(i, j));
        S total = 0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (!mask[j]) continue;
            out(i, j) = std::exp(x(i, j) - mx);
            total += out(i, j);
        }
        out.row(i) /= total;
    }
    return out;
}

/// Row-wise layer normalization with population variance.
template <typename Derived, typename ScaleT, typename ShiftT>
auto layer_norm(const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<ScaleT>& scale,
                const Eigen::MatrixBase<ShiftT>& shift, typename Derived::Scalar eps)
{
    using S = typename Derived::Scalar;
    if (scale.size() != x.cols() || shift.size() != x.cols())
        throw std::invalid_argument("layer_norm: scale/shift width must equal " + std::to_string(x.cols()));
    const S n = static_cast<S>(x.cols());
    Mat<S> out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const S mean = x.row(i).sum() / n;
        const S var = (x.row(i).array() - mean).square().sum() / n;
        const S inv = S(1) / std::sqrt(var + eps);
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            out(i, j) = (x(i, j) - mean) * inv * scale(j) + shift(j);
    }
    return out;
}

/// Scale each row to unit Euclidean norm; zero rows stay zero.
template <typename Derived>
auto l2_normalize_rows(const Eigen::MatrixBase<Derived>& x)
{
    using S = typename Derived::Scalar;
    Mat<S> out = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const S n = x.row(i).norm();
        if (n > S(0)) out.row(i) /= n;
    }
    return out;
}

} // namespace hinormer
