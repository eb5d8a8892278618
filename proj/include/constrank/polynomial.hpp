#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <optional>

#include "constrank/multiindex.hpp"
#include "constrank/rational.hpp"

namespace constrank {

/// Sparse multivariate polynomial in xi_1..xi_n with exact rational
/// coefficients. Zero coefficients are never stored.
class Polynomial {
  public:
    using Terms = std::map<MultiIndex, Rational>;

    Polynomial() = default;

    static Polynomial constant(const Rational& c) {
        Polynomial p;
        p.add_term(MultiIndex{}, c);
        return p;
    }

    static Polynomial monomial(const MultiIndex& m, const Rational& c) {
        Polynomial p;
        p.add_term(m, c);
        return p;
    }

    void add_term(const MultiIndex& m, const Rational& c) {
        if (c == 0) return;
        auto [it, inserted] = terms_.try_emplace(m, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    int total_degree() const {
        int d = -1;
        for (const auto& [m, c] : terms_) d = std::max(d, m.order());
        return d;
    }

    /// Degree if every term has the same order, nullopt otherwise.
    /// The zero polynomial is homogeneous of every degree.
    std::optional<int> homogeneous_degree() const {
        std::optional<int> d;
        for (const auto& [m, c] : terms_) {
            if (d && *d != m.order()) return std::nullopt;
            d = m.order();
        }
        return d ? d : std::optional<int>(0);
    }

    Polynomial operator+(const Polynomial& o) const {
        Polynomial r = *this;
        for (const auto& [m, c] : o.terms_) r.add_term(m, c);
        return r;
    }

    Polynomial operator-(const Polynomial& o) const {
        Polynomial r = *this;
        for (const auto& [m, c] : o.terms_) r.add_term(m, -c);
        return r;
    }

    Polynomial operator-() const {
        Polynomial r;
        for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
        return r;
    }

    Polynomial operator*(const Polynomial& o) const {
        Polynomial r;
        for (const auto& [ma, ca] : terms_)
            for (const auto& [mb, cb] : o.terms_) r.add_term(ma + mb, ca * cb);
        return r;
    }

    Polynomial operator*(const Rational& c) const {
        Polynomial r;
        if (c == 0) return r;
        for (const auto& [m, coef] : terms_) r.terms_.emplace(m, coef * c);
        return r;
    }

    friend bool operator==(const Polynomial& a, const Polynomial& b) {
        return a.terms_ == b.terms_;
    }

    double eval(const Eigen::VectorXd& xi) const {
        double s = 0.0;
        for (const auto& [m, c] : terms_) {
            double t = to_double(c);
            for (int i = 0; i < xi.size(); ++i)
                for (int e = 0; e < m[i]; ++e) t *= xi[i];
            s += t;
        }
        return s;
    }

    Rational eval_exact(const std::array<Rational, kMaxDim>& xi) const {
        Rational s = 0;
        for (const auto& [m, c] : terms_) {
            Rational t = c;
            for (int i = 0; i < kMaxDim; ++i)
                for (int e = 0; e < m[i]; ++e) t *= xi[size_t(i)];
            s += t;
        }
        return s;
    }

  private:
    Terms terms_;
};

inline Polynomial operator*(const Rational& c, const Polynomial& p) { return p * c; }

}  // namespace constrank
