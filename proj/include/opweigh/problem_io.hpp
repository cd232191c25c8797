#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "opweigh/constraint.hpp"
#include "opweigh/errors.hpp"
#include "opweigh/operator_model.hpp"

namespace opweigh {

/// A problem file: the combined family T + eps dT, the reference gauge
/// output and the control bracket.
struct Problem {
    CombinedFamily family;
    GaugeReference R0;
    Bracket bracket;
};

namespace detail {

using nlohmann::json;

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) {
        throw InputError(where + ": expected a number");
    }
    return j.get<double>();
}

// A matrix given as nested rows or as a flat row-major list.
inline Matrix read_matrix(const json& j, Eigen::Index dim, const std::string& where) {
    if (!j.is_array()) {
        throw InputError(where + ": expected an array");
    }
    Matrix M(dim, dim);
    if (!j.empty() && j.front().is_array()) {
        if (static_cast<Eigen::Index>(j.size()) != dim) {
            throw InputError(where + ": expected " + std::to_string(dim) + " rows");
        }
        for (Eigen::Index r = 0; r < dim; ++r) {
            const json& row = j[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dim) {
                throw InputError(where + ": row " + std::to_string(r) + " has the wrong length");
            }
            for (Eigen::Index c = 0; c < dim; ++c) {
                M(r, c) = number(row[static_cast<std::size_t>(c)], where);
            }
        }
        return M;
    }
    if (static_cast<Eigen::Index>(j.size()) != dim * dim) {
        throw InputError(where + ": expected " + std::to_string(dim * dim) + " entries");
    }
    for (Eigen::Index k = 0; k < dim * dim; ++k) {
        M(k / dim, k % dim) = number(j[static_cast<std::size_t>(k)], where);
    }
    return M;
}

inline Vector read_vector(const json& j, Eigen::Index dim, const std::string& where) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim) {
        throw InputError(where + ": expected " + std::to_string(dim) + " entries");
    }
    Vector v(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
        v(k) = number(j[static_cast<std::size_t>(k)], where);
    }
    return v;
}

// A list of z-coefficients, coefficient k multiplying z^k.
template <class Coeff, class Reader>
Poly<Coeff> read_family(const json& doc, const std::string& key, Eigen::Index dim, bool required, Reader read) {
    if (!doc.contains(key)) {
        if (required) {
            throw InputError("missing field '" + key + "'");
        }
        return Poly<Coeff>::zero(dim);
    }
    const json& j = doc.at(key);
    if (!j.is_array()) {
        throw InputError(key + ": expected a list of coefficients");
    }
    std::vector<Coeff> coeffs;
    for (std::size_t k = 0; k < j.size(); ++k) {
        coeffs.push_back(read(j[k], dim, key + "[" + std::to_string(k) + "]"));
    }
    return Poly<Coeff>(dim, std::move(coeffs));
}

} // namespace detail

inline Problem parse_problem(const nlohmann::json& doc) {
    using detail::json;
    if (!doc.is_object()) {
        throw InputError("problem must be a JSON object");
    }
    if (!doc.contains("dim") || !doc.at("dim").is_number_integer() || doc.at("dim").get<long>() < 1) {
        throw InputError("dim: expected a positive integer");
    }
    const auto dim = static_cast<Eigen::Index>(doc.at("dim").get<long>());
    const auto mat = [](const json& j, Eigen::Index d, const std::string& w) { return detail::read_matrix(j, d, w); };
    const auto vec = [](const json& j, Eigen::Index d, const std::string& w) { return detail::read_vector(j, d, w); };

    SystemParams base(detail::read_family<Matrix>(doc, "L", dim, true, mat),
                      detail::read_family<Vector>(doc, "Q", dim, true, vec),
                      detail::read_family<Vector>(doc, "Qdag", dim, true, vec));
    SystemParams pert(detail::read_family<Matrix>(doc, "dL", dim, false, mat),
                      detail::read_family<Vector>(doc, "dQ", dim, false, vec),
                      detail::read_family<Vector>(doc, "dQdag", dim, false, vec));
    const double R0 = doc.contains("R0") ? detail::number(doc.at("R0"), "R0") : 1.0;
    if (!doc.contains("bracket")) {
        throw InputError("missing field 'bracket'");
    }
    const json& b = doc.at("bracket");
    if (!b.is_array() || b.size() != 2) {
        throw InputError("bracket: expected [lo, hi]");
    }
    Bracket br{detail::number(b[0], "bracket"), detail::number(b[1], "bracket")};
    if (!(br.lo < br.hi)) {
        throw InputError("bracket: expected lo < hi");
    }
    return {CombinedFamily(std::move(base), std::move(pert)), GaugeReference(R0), br};
}

inline Problem parse_problem(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("malformed JSON: ") + e.what());
    }
    return parse_problem(doc);
}

inline Problem parse_problem(const char* text) { return parse_problem(std::string(text)); }

inline Problem load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open problem file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str());
}

} // namespace opweigh
