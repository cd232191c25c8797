#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "opweigh/errors.hpp"
#include "opweigh/poly.hpp"

namespace opweigh {

/// Value of the system parameters (L, Q, Q†) at one point, or a
/// direction in parameter space (a derivative, a Taylor coefficient,
/// a perturbation).
struct ParamTriple {
    Matrix L;
    Vector Q;
    Vector Qdag;

    static ParamTriple zero(Eigen::Index dim) {
        return {Matrix::Zero(dim, dim), Vector::Zero(dim), Vector::Zero(dim)};
    }

    Eigen::Index dim() const { return Q.size(); }

    /// Parameters of the adjoint source system: (L^T, Q†, Q).
    ParamTriple adjoint() const { return {L.transpose(), Qdag, Q}; }

    ParamTriple& operator+=(const ParamTriple& o) {
        L += o.L;
        Q += o.Q;
        Qdag += o.Qdag;
        return *this;
    }
    friend ParamTriple operator+(ParamTriple a, const ParamTriple& b) { return a += b; }
    friend ParamTriple operator-(const ParamTriple& a, const ParamTriple& b) {
        return {a.L - b.L, a.Q - b.Q, a.Qdag - b.Qdag};
    }
    friend ParamTriple operator*(const ParamTriple& a, double s) {
        return {a.L * s, a.Q * s, a.Qdag * s};
    }
    friend ParamTriple operator*(double s, const ParamTriple& a) { return a * s; }
};

/// The parameter family T(z) = (L(z), Q(z), Q†(z)).
class SystemParams {
public:
    SystemParams(PolyMatrix L, PolyVector Q, PolyVector Qdag)
        : L_(std::move(L)), Q_(std::move(Q)), Qdag_(std::move(Qdag)) {
        if (L_.dim() != Q_.dim() || L_.dim() != Qdag_.dim()) {
            throw InputError("L, Q and Qdag dimensions differ");
        }
    }

    static SystemParams zero(Eigen::Index dim) {
        return {PolyMatrix::zero(dim), PolyVector::zero(dim), PolyVector::zero(dim)};
    }

    static SystemParams constant(const ParamTriple& t) {
        return {PolyMatrix(t.dim(), {t.L}), PolyVector(t.dim(), {t.Q}), PolyVector(t.dim(), {t.Qdag})};
    }

    const PolyMatrix& L() const { return L_; }
    const PolyVector& Q() const { return Q_; }
    const PolyVector& Qdag() const { return Qdag_; }
    Eigen::Index dim() const { return L_.dim(); }

    int degree() const { return std::max({L_.degree(), Q_.degree(), Qdag_.degree()}); }
    bool is_zero() const { return L_.is_zero() && Q_.is_zero() && Qdag_.is_zero(); }

    ParamTriple operator()(double z) const { return {L_(z), Q_(z), Qdag_(z)}; }

    SystemParams derivative() const { return {L_.derivative(), Q_.derivative(), Qdag_.derivative()}; }

    SystemParams shifted(double z0) const { return {L_.shifted(z0), Q_.shifted(z0), Qdag_.shifted(z0)}; }

    /// Entry k is T^(k)(z0)/k!.
    std::vector<ParamTriple> taylor(double z0, int order) const {
        auto l = L_.taylor(z0, order);
        auto q = Q_.taylor(z0, order);
        auto qd = Qdag_.taylor(z0, order);
        std::vector<ParamTriple> out;
        out.reserve(l.size());
        for (std::size_t k = 0; k < l.size(); ++k) {
            out.push_back({std::move(l[k]), std::move(q[k]), std::move(qd[k])});
        }
        return out;
    }

    /// Q† and hence the gauge output multiplied by alpha.
    SystemParams with_gauge_factor(double alpha) const { return {L_, Q_, Qdag_ * alpha}; }

    SystemParams operator+(const SystemParams& o) const { return {L_ + o.L_, Q_ + o.Q_, Qdag_ + o.Qdag_}; }
    SystemParams operator*(double s) const { return {L_ * s, Q_ * s, Qdag_ * s}; }

    friend bool operator==(const SystemParams& a, const SystemParams& b) {
        return a.L_ == b.L_ && a.Q_ == b.Q_ && a.Qdag_ == b.Qdag_;
    }

private:
    PolyMatrix L_;
    PolyVector Q_;
    PolyVector Qdag_;
};

template <class Family>
auto eval(const Family& f, double z) {
    return f(z);
}

template <class Family>
Family derivative(const Family& f) {
    return f.derivative();
}

/// T'' = 0 identically.
inline bool is_linear_control(const SystemParams& T) { return T.degree() <= 1; }

/// δT' = 0 identically.
inline bool is_remote(const SystemParams& dT) { return dT.degree() <= 0; }

/// T2(eps, z) = T(z) + eps * dT(z): the reference family and the
/// perturbation it is excited by, with a linear exciting variable eps.
class CombinedFamily {
public:
    CombinedFamily(SystemParams base, SystemParams pert) : base_(std::move(base)), pert_(std::move(pert)) {
        if (base_.dim() != pert_.dim()) {
            throw InputError("base and perturbation dimensions differ");
        }
    }

    const SystemParams& base() const { return base_; }
    const SystemParams& pert() const { return pert_; }
    Eigen::Index dim() const { return base_.dim(); }

    ParamTriple operator()(double eps, double z) const { return base_(z) + pert_(z) * eps; }

    /// z -> T2(eps, z), the family seen by the controller at fixed excitation.
    SystemParams at_excitation(double eps) const { return base_ + pert_ * eps; }

    /// eps -> T2(eps, z) at fixed control.
    SystemParams at_control(double z) const {
        const ParamTriple b = base_(z);
        const ParamTriple p = pert_(z);
        const auto n = dim();
        return {PolyMatrix(n, {b.L, p.L}), PolyVector(n, {b.Q, p.Q}), PolyVector(n, {b.Qdag, p.Qdag})};
    }

    /// d/dz T2(eps, z).
    ParamTriple control_derivative(double eps, double z) const {
        return base_.derivative()(z) + pert_.derivative()(z) * eps;
    }

    CombinedFamily shifted(double z0) const { return {base_.shifted(z0), pert_.shifted(z0)}; }
    CombinedFamily with_gauge_factor(double alpha) const {
        return {base_.with_gauge_factor(alpha), pert_.with_gauge_factor(alpha)};
    }

    friend bool operator==(const CombinedFamily& a, const CombinedFamily& b) {
        return a.base_ == b.base_ && a.pert_ == b.pert_;
    }

private:
    SystemParams base_;
    SystemParams pert_;
};

/// Both partial families of T2 have vanishing second derivatives.
inline bool is_linear_control(const CombinedFamily& T2) {
    return is_linear_control(T2.base()) && is_linear_control(T2.pert());
}

inline bool is_remote(const CombinedFamily& T2) { return is_remote(T2.pert()); }

/// Exchange of the exciting and control variables:
/// (E T2)(x, y) = T2(y, x). Writing T2 = T0 + z T1 + eps (d0 + z d1), the
/// exchanged family has base T0 + eps d0 and perturbation T1 + eps d1.
inline CombinedFamily exchange(const CombinedFamily& T2) {
    if (T2.base().degree() > 1 || T2.pert().degree() > 1) {
        throw InputError("exchange requires degree-1 control dependence");
    }
    const auto n = T2.dim();
    const auto pick = [n](const PolyMatrix& a, const PolyMatrix& b, int k) {
        return PolyMatrix(n, {a.coeff(k), b.coeff(k)});
    };
    const auto pickv = [n](const PolyVector& a, const PolyVector& b, int k) {
        return PolyVector(n, {a.coeff(k), b.coeff(k)});
    };
    const SystemParams& t = T2.base();
    const SystemParams& d = T2.pert();
    SystemParams base(pick(t.L(), d.L(), 0), pickv(t.Q(), d.Q(), 0), pickv(t.Qdag(), d.Qdag(), 0));
    SystemParams pert(pick(t.L(), d.L(), 1), pickv(t.Q(), d.Q(), 1), pickv(t.Qdag(), d.Qdag(), 1));
    return {std::move(base), std::move(pert)};
}

/// Reference value R0 of the gauge output; nonzero.
class GaugeReference {
public:
    explicit GaugeReference(double R0 = 1.0) : R0_(R0) {
        if (R0_ == 0.0 || !std::isfinite(R0_)) {
            throw InputError("gauge reference must be finite and nonzero");
        }
    }
    double value() const { return R0_; }

private:
    double R0_;
};

} // namespace opweigh
