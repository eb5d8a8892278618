#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace constrank {

// Multi-indices and monomial exponents share this representation.
// Slots beyond the active dimension stay zero, so comparisons and
// hashing are dimension-agnostic.
constexpr int kMaxDim = 3;

struct MultiIndex {
    std::array<int, kMaxDim> exp{0, 0, 0};

    int operator[](int i) const { return exp[static_cast<size_t>(i)]; }
    int& operator[](int i) { return exp[static_cast<size_t>(i)]; }

    int order() const { return exp[0] + exp[1] + exp[2]; }

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
    friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

    MultiIndex operator+(const MultiIndex& o) const {
        MultiIndex r;
        for (int i = 0; i < kMaxDim; ++i) r.exp[size_t(i)] = exp[size_t(i)] + o.exp[size_t(i)];
        return r;
    }

    // componentwise alpha >= beta
    bool dominates(const MultiIndex& o) const {
        for (int i = 0; i < kMaxDim; ++i)
            if (exp[size_t(i)] < o.exp[size_t(i)]) return false;
        return true;
    }

    MultiIndex operator-(const MultiIndex& o) const {
        MultiIndex r;
        for (int i = 0; i < kMaxDim; ++i) r.exp[size_t(i)] = exp[size_t(i)] - o.exp[size_t(i)];
        return r;
    }

    std::string str() const {
        return "(" + std::to_string(exp[0]) + "," + std::to_string(exp[1]) + "," +
               std::to_string(exp[2]) + ")";
    }
};

inline MultiIndex unit_index(int axis) {
    MultiIndex m;
    m[axis] = 1;
    return m;
}

inline long factorial(int n) {
    long f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

inline long multiindex_factorial(const MultiIndex& a) {
    return factorial(a[0]) * factorial(a[1]) * factorial(a[2]);
}

/// All multi-indices in `dim` variables with |alpha| = order, lexicographic.
inline std::vector<MultiIndex> multiindices_of_order(int dim, int order) {
    std::vector<MultiIndex> out;
    if (dim == 1) {
        MultiIndex m;
        m[0] = order;
        out.push_back(m);
        return out;
    }
    for (int i = order; i >= 0; --i) {
        if (dim == 2) {
            MultiIndex m;
            m[0] = i;
            m[1] = order - i;
            out.push_back(m);
        } else {
            for (int j = order - i; j >= 0; --j) {
                MultiIndex m;
                m[0] = i;
                m[1] = j;
                m[2] = order - i - j;
                out.push_back(m);
            }
        }
    }
    return out;
}

/// All multi-indices with |alpha| <= order.
inline std::vector<MultiIndex> multiindices_up_to_order(int dim, int order) {
    std::vector<MultiIndex> out;
    for (int k = 0; k <= order; ++k) {
        auto v = multiindices_of_order(dim, k);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

}  // namespace constrank
