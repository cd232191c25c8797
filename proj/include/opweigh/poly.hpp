#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "opweigh/errors.hpp"

namespace opweigh {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

template <class Coeff>
Coeff zero_coeff(Eigen::Index dim) {
    if constexpr (Coeff::ColsAtCompileTime == 1) {
        return Coeff::Zero(dim);
    } else {
        return Coeff::Zero(dim, dim);
    }
}

template <class Coeff>
bool has_shape(const Coeff& c, Eigen::Index dim) {
    if constexpr (Coeff::ColsAtCompileTime == 1) {
        return c.size() == dim;
    } else {
        return c.rows() == dim && c.cols() == dim;
    }
}

template <class Coeff>
bool is_exact_zero(const Coeff& c) {
    return (c.array() == 0.0).all();
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

} // namespace detail

/// Polynomial in the control variable z with dense matrix or vector
/// coefficients; coeffs()[k] multiplies z^k. Trailing exact-zero
/// coefficients are trimmed, so the zero family has no coefficients.
template <class Coeff>
class Poly {
public:
    Poly() = default;

    Poly(Eigen::Index dim, std::vector<Coeff> coeffs) : dim_(dim), coeffs_(std::move(coeffs)) {
        if (dim_ <= 0) {
            throw InputError("family dimension must be positive");
        }
        for (const auto& c : coeffs_) {
            if (!detail::has_shape(c, dim_)) {
                throw InputError("coefficient shape does not match family dimension " +
                                 std::to_string(dim_));
            }
        }
        trim();
    }

    static Poly zero(Eigen::Index dim) { return Poly(dim, {}); }
    static Poly constant(const Coeff& c) { return Poly(c.rows(), {c}); }

    Eigen::Index dim() const { return dim_; }
    /// -1 for the zero family.
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    bool is_zero() const { return coeffs_.empty(); }
    const std::vector<Coeff>& coeffs() const { return coeffs_; }

    Coeff coeff(int k) const {
        if (k < 0 || k > degree()) {
            return detail::zero_coeff<Coeff>(dim_);
        }
        return coeffs_[static_cast<std::size_t>(k)];
    }

    Coeff operator()(double z) const {
        Coeff acc = detail::zero_coeff<Coeff>(dim_);
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
            acc = (acc * z + *it).eval();
        }
        return acc;
    }

    Poly derivative() const {
        std::vector<Coeff> d;
        for (int k = 1; k <= degree(); ++k) {
            d.push_back(coeffs_[static_cast<std::size_t>(k)] * static_cast<double>(k));
        }
        return Poly(dim_, std::move(d));
    }

    /// Taylor coefficients at z0: entry k is p^(k)(z0)/k!, k = 0..order.
    std::vector<Coeff> taylor(double z0, int order) const {
        std::vector<Coeff> out;
        out.reserve(static_cast<std::size_t>(order) + 1);
        for (int k = 0; k <= order; ++k) {
            Coeff acc = detail::zero_coeff<Coeff>(dim_);
            double zpow = 1.0;
            for (int j = k; j <= degree(); ++j) {
                acc += coeffs_[static_cast<std::size_t>(j)] * (detail::binomial(j, k) * zpow);
                zpow *= z0;
            }
            out.push_back(std::move(acc));
        }
        return out;
    }

    /// The family t -> p(z0 + t).
    Poly shifted(double z0) const {
        if (is_zero()) {
            return *this;
        }
        return Poly(dim_, taylor(z0, degree()));
    }

    Poly operator+(const Poly& o) const {
        check_dim(o);
        const int n = std::max(degree(), o.degree()) + 1;
        std::vector<Coeff> c;
        for (int k = 0; k < n; ++k) {
            c.push_back(coeff(k) + o.coeff(k));
        }
        return Poly(dim_, std::move(c));
    }

    Poly operator-(const Poly& o) const { return *this + o * -1.0; }

    Poly operator*(double s) const {
        std::vector<Coeff> c;
        for (const auto& x : coeffs_) {
            c.push_back(x * s);
        }
        return Poly(dim_, std::move(c));
    }

    friend Poly operator*(double s, const Poly& p) { return p * s; }

    friend bool operator==(const Poly& a, const Poly& b) {
        if (a.dim_ != b.dim_ || a.coeffs_.size() != b.coeffs_.size()) {
            return false;
        }
        for (std::size_t k = 0; k < a.coeffs_.size(); ++k) {
            if (a.coeffs_[k] != b.coeffs_[k]) {
                return false;
            }
        }
        return true;
    }

private:
    void trim() {
        while (!coeffs_.empty() && detail::is_exact_zero(coeffs_.back())) {
            coeffs_.pop_back();
        }
    }

    void check_dim(const Poly& o) const {
        if (o.dim_ != dim_) {
            throw InputError("family dimensions differ");
        }
    }

    Eigen::Index dim_ = 1;
    std::vector<Coeff> coeffs_;
};

using PolyMatrix = Poly<Matrix>;
using PolyVector = Poly<Vector>;

} // namespace opweigh
