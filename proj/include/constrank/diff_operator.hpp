#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "constrank/poly_matrix.hpp"

namespace constrank {

using RationalMatrix = std::vector<std::vector<Rational>>;

inline RationalMatrix zero_matrix(int rows, int cols) {
    return RationalMatrix(static_cast<size_t>(rows),
                          std::vector<Rational>(static_cast<size_t>(cols), Rational(0)));
}

/// Homogeneous constant-coefficient operator sum_{|alpha|=order} A_alpha d^alpha
/// mapping fields with dim_from components to fields with dim_to components
/// over R^dim_n.
struct DiffOperator {
    int dim_n = 0;
    int dim_from = 0;
    int dim_to = 0;
    int order = 0;
    std::map<MultiIndex, RationalMatrix> coeffs;
    std::string name;  // optional tag for reports

    void validate() const {
        if (dim_n < 1 || dim_n > kMaxDim) throw ConfigError("dim_n must be 1..3");
        if (dim_from < 1 || dim_to < 1) throw ConfigError("fiber dimensions must be positive");
        if (order < 1) throw ConfigError("order must be >= 1");
        bool any_nonzero = false;
        for (const auto& [alpha, mat] : coeffs) {
            if (alpha.order() != order) throw ConfigError("coefficient multi-index order mismatch");
            for (int i = dim_n; i < kMaxDim; ++i)
                if (alpha[i] != 0) throw ConfigError("multi-index uses axis beyond dim_n");
            if (static_cast<int>(mat.size()) != dim_to) throw ConfigError("coefficient rows");
            for (const auto& row : mat) {
                if (static_cast<int>(row.size()) != dim_from) throw ConfigError("coefficient cols");
                for (const auto& c : row) any_nonzero = any_nonzero || (c != 0);
            }
        }
        if (!any_nonzero) throw DegenerateOperator("all coefficient matrices vanish");
    }

    /// The characteristic polynomial matrix sum A_alpha xi^alpha.
    PolySymbol symbol() const {
        PolyMatrix m(dim_to, dim_from);
        for (const auto& [alpha, mat] : coeffs)
            for (int i = 0; i < dim_to; ++i)
                for (int j = 0; j < dim_from; ++j)
                    m.at(i, j).add_term(alpha, mat[size_t(i)][size_t(j)]);
        return PolySymbol{m, order};
    }
};

inline PolySymbol symbol_of(const DiffOperator& op) {
    op.validate();
    return op.symbol();
}

/// Transcribe a homogeneous polynomial symbol back to an operator
/// (xi^alpha -> d^alpha; spectral application supplies the 2*pi*i powers).
inline DiffOperator operator_from_symbol(const PolySymbol& sym, int dim_n,
                                         const std::string& name = "") {
    DiffOperator op;
    op.dim_n = dim_n;
    op.dim_to = sym.mat.rows();
    op.dim_from = sym.mat.cols();
    op.order = sym.homogeneity_degree;
    op.name = name;
    for (int i = 0; i < op.dim_to; ++i)
        for (int j = 0; j < op.dim_from; ++j)
            for (const auto& [alpha, c] : sym.mat.at(i, j).terms()) {
                auto [it, ins] = op.coeffs.try_emplace(alpha, zero_matrix(op.dim_to, op.dim_from));
                it->second[size_t(i)][size_t(j)] = c;
            }
    return op;
}

// ---------------------------------------------------------------------------
// Built-in operators
// ---------------------------------------------------------------------------

inline DiffOperator make_gradient(int n) {
    DiffOperator op;
    op.dim_n = n;
    op.dim_from = 1;
    op.dim_to = n;
    op.order = 1;
    op.name = "grad";
    for (int i = 0; i < n; ++i) {
        auto m = zero_matrix(n, 1);
        m[size_t(i)][0] = 1;
        op.coeffs[unit_index(i)] = m;
    }
    return op;
}

inline DiffOperator make_divergence(int n) {
    DiffOperator op;
    op.dim_n = n;
    op.dim_from = n;
    op.dim_to = 1;
    op.order = 1;
    op.name = "div";
    for (int i = 0; i < n; ++i) {
        auto m = zero_matrix(1, n);
        m[0][size_t(i)] = 1;
        op.coeffs[unit_index(i)] = m;
    }
    return op;
}

inline DiffOperator make_curl3d() {
    DiffOperator op;
    op.dim_n = 3;
    op.dim_from = 3;
    op.dim_to = 3;
    op.order = 1;
    op.name = "curl";
    // (curl v)_i = eps_{ijk} d_j v_k
    auto eps = [](int i, int j, int k) -> int {
        if (i == j || j == k || i == k) return 0;
        return ((j - i + 3) % 3 == 1) ? 1 : -1;
    };
    for (int j = 0; j < 3; ++j) {
        auto m = zero_matrix(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) m[size_t(i)][size_t(k)] = eps(i, j, k);
        op.coeffs[unit_index(j)] = m;
    }
    return op;
}

/// Symmetric gradient of a vector field, fiber flattened to the full n x n
/// matrix row-major. Keeping the redundant off-diagonal copies keeps all
/// coefficients rational and makes the Euclidean fiber norm the Frobenius one.
inline DiffOperator make_sym_gradient(int n) {
    DiffOperator op;
    op.dim_n = n;
    op.dim_from = n;
    op.dim_to = n * n;
    op.order = 1;
    op.name = "sym_grad";
    for (int d = 0; d < n; ++d) {
        auto m = zero_matrix(n * n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                // E_ij = (d_i u_j + d_j u_i)/2, derivative axis d
                Rational half(1, 2);
                if (d == i) m[size_t(i * n + j)][size_t(j)] += half;
                if (d == j) m[size_t(i * n + j)][size_t(i)] += half;
            }
        op.coeffs[unit_index(d)] = m;
    }
    return op;
}

inline DiffOperator make_laplacian(int n) {
    DiffOperator op;
    op.dim_n = n;
    op.dim_from = 1;
    op.dim_to = 1;
    op.order = 2;
    op.name = "laplacian";
    for (int i = 0; i < n; ++i) {
        MultiIndex a;
        a[i] = 2;
        auto m = zero_matrix(1, 1);
        m[0][0] = 1;
        op.coeffs[a] = m;
    }
    return op;
}

inline DiffOperator make_named_operator(const std::string& name, int n) {
    if (name == "grad") return make_gradient(n);
    if (name == "div") return make_divergence(n);
    if (name == "curl") {
        if (n != 3) throw ConfigError("curl requires dim_n = 3");
        return make_curl3d();
    }
    if (name == "sym_grad") return make_sym_gradient(n);
    if (name == "laplacian") return make_laplacian(n);
    throw ConfigError("unknown operator name: " + name);
}

// ---------------------------------------------------------------------------
// JSON serialization. Rationals travel as "p/q" strings.
// ---------------------------------------------------------------------------

inline Rational rational_from_json(const nlohmann::json& j) {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return Rational(j.get<long>());
    throw ConfigError("rational entries must be integers or 'p/q' strings");
}

inline DiffOperator operator_from_json(const nlohmann::json& j, int default_dim = 3) {
    if (j.is_string()) return make_named_operator(j.get<std::string>(), default_dim);
    if (j.contains("name") && !j.contains("coeffs"))
        return make_named_operator(j["name"].get<std::string>(),
                                   j.value("dim_n", default_dim));
    DiffOperator op;
    op.dim_n = j.at("dim_n").get<int>();
    op.dim_from = j.at("dim_from").get<int>();
    op.dim_to = j.at("dim_to").get<int>();
    op.order = j.at("order").get<int>();
    op.name = j.value("name", "");
    for (const auto& entry : j.at("coeffs")) {
        MultiIndex alpha;
        const auto& a = entry.at("alpha");
        if (static_cast<int>(a.size()) != op.dim_n) throw ConfigError("alpha length != dim_n");
        for (int i = 0; i < op.dim_n; ++i) alpha[i] = a[size_t(i)].get<int>();
        auto mat = zero_matrix(op.dim_to, op.dim_from);
        const auto& rows = entry.at("matrix");
        if (static_cast<int>(rows.size()) != op.dim_to) throw ConfigError("matrix rows");
        for (int i = 0; i < op.dim_to; ++i) {
            if (static_cast<int>(rows[size_t(i)].size()) != op.dim_from)
                throw ConfigError("matrix cols");
            for (int jj = 0; jj < op.dim_from; ++jj)
                mat[size_t(i)][size_t(jj)] = rational_from_json(rows[size_t(i)][size_t(jj)]);
        }
        op.coeffs[alpha] = mat;
    }
    op.validate();
    return op;
}

inline nlohmann::json operator_to_json(const DiffOperator& op) {
    nlohmann::json j;
    j["dim_n"] = op.dim_n;
    j["dim_from"] = op.dim_from;
    j["dim_to"] = op.dim_to;
    j["order"] = op.order;
    if (!op.name.empty()) j["name"] = op.name;
    auto coeffs = nlohmann::json::array();
    for (const auto& [alpha, mat] : op.coeffs) {
        nlohmann::json e;
        auto a = nlohmann::json::array();
        for (int i = 0; i < op.dim_n; ++i) a.push_back(alpha[i]);
        e["alpha"] = a;
        auto rows = nlohmann::json::array();
        for (const auto& r : mat) {
            auto row = nlohmann::json::array();
            for (const auto& c : r) row.push_back(to_string(c));
            rows.push_back(row);
        }
        e["matrix"] = rows;
        coeffs.push_back(e);
    }
    j["coeffs"] = coeffs;
    return j;
}

}  // namespace constrank
