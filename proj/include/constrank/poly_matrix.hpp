#pragma once

#include <Eigen/Dense>
#include <vector>

#include "constrank/errors.hpp"
#include "constrank/polynomial.hpp"

namespace constrank {

/// Matrix with Polynomial entries; used for operator symbols and the
/// intermediate matrices of the characteristic-polynomial recursion.
class PolyMatrix {
  public:
    PolyMatrix() : rows_(0), cols_(0) {}
    PolyMatrix(int rows, int cols)
        : rows_(rows), cols_(cols), entries_(static_cast<size_t>(rows) * cols) {}

    static PolyMatrix identity(int n, const Polynomial& scale = Polynomial::constant(1)) {
        PolyMatrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = scale;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    Polynomial& at(int i, int j) { return entries_[static_cast<size_t>(i) * cols_ + j]; }
    const Polynomial& at(int i, int j) const {
        return entries_[static_cast<size_t>(i) * cols_ + j];
    }

    bool is_zero() const {
        for (const auto& e : entries_)
            if (!e.is_zero()) return false;
        return true;
    }

    PolyMatrix transpose() const {
        PolyMatrix t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t.at(j, i) = at(i, j);
        return t;
    }

    PolyMatrix operator*(const PolyMatrix& o) const {
        if (cols_ != o.rows_) throw ShapeMismatch("poly matrix product shape");
        PolyMatrix r(rows_, o.cols_);
        for (int i = 0; i < rows_; ++i)
            for (int k = 0; k < cols_; ++k) {
                const Polynomial& a = at(i, k);
                if (a.is_zero()) continue;
                for (int j = 0; j < o.cols_; ++j) {
                    if (o.at(k, j).is_zero()) continue;
                    r.at(i, j) = r.at(i, j) + a * o.at(k, j);
                }
            }
        return r;
    }

    PolyMatrix operator+(const PolyMatrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw ShapeMismatch("poly matrix sum shape");
        PolyMatrix r(rows_, cols_);
        for (size_t i = 0; i < entries_.size(); ++i) r.entries_[i] = entries_[i] + o.entries_[i];
        return r;
    }

    PolyMatrix operator-(const PolyMatrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw ShapeMismatch("poly matrix diff shape");
        PolyMatrix r(rows_, cols_);
        for (size_t i = 0; i < entries_.size(); ++i) r.entries_[i] = entries_[i] - o.entries_[i];
        return r;
    }

    PolyMatrix scaled(const Polynomial& p) const {
        PolyMatrix r(rows_, cols_);
        for (size_t i = 0; i < entries_.size(); ++i) r.entries_[i] = entries_[i] * p;
        return r;
    }

    PolyMatrix scaled(const Rational& c) const {
        PolyMatrix r(rows_, cols_);
        for (size_t i = 0; i < entries_.size(); ++i) r.entries_[i] = entries_[i] * c;
        return r;
    }

    Polynomial trace() const {
        Polynomial t;
        for (int i = 0; i < std::min(rows_, cols_); ++i) t = t + at(i, i);
        return t;
    }

    Eigen::MatrixXd eval(const Eigen::VectorXd& xi) const {
        Eigen::MatrixXd m(rows_, cols_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) m(i, j) = at(i, j).eval(xi);
        return m;
    }

    std::vector<std::vector<Rational>> eval_exact(const std::array<Rational, kMaxDim>& xi) const {
        std::vector<std::vector<Rational>> m(static_cast<size_t>(rows_));
        for (int i = 0; i < rows_; ++i) {
            m[size_t(i)].resize(static_cast<size_t>(cols_));
            for (int j = 0; j < cols_; ++j) m[size_t(i)][size_t(j)] = at(i, j).eval_exact(xi);
        }
        return m;
    }

    friend bool operator==(const PolyMatrix& a, const PolyMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.entries_ == b.entries_;
    }

  private:
    int rows_, cols_;
    std::vector<Polynomial> entries_;
};

/// Symbol of a homogeneous operator: a PolyMatrix whose nonzero entries all
/// share one homogeneity degree.
struct PolySymbol {
    PolyMatrix mat;
    int homogeneity_degree = 0;

    bool check_homogeneous() const {
        for (int i = 0; i < mat.rows(); ++i)
            for (int j = 0; j < mat.cols(); ++j) {
                auto d = mat.at(i, j).homogeneous_degree();
                if (!d) return false;
                if (!mat.at(i, j).is_zero() && *d != homogeneity_degree) return false;
            }
        return true;
    }
};

}  // namespace constrank
