#pragma once

// JSON body specifications, the input format of the command line tool.
//
// Leaves:
//   {"type":"cube","dim":n}
//   {"type":"cross","dim":n}
//   {"type":"lp_ball","p":p,"dim":n}
//   {"type":"ellipsoid","matrix":[[...],...]}
//   {"type":"polytope","vertices":[[...],...]} and/or "facets":[[...],...]
// Composites:
//   {"op":"polar","args":[spec]}
//   {"op":"cap_p"|"sum_p"|"prod_p","p":p,"args":[spec,spec]}
//   {"op":"linmap","matrix":[[...],...],"args":[spec]}
//   {"op":"scale","factor":t,"args":[spec]}
//
// The exponent p is a number in [1, inf) or the string "inf". Vertex and
// facet lists give one representative per +- pair. Errors carry the JSON
// path of the offending field.

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "mahler/ops.hpp"

namespace mahler {

namespace detail {

[[noreturn]] inline void spec_fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("body spec " + path + ": " + what);
}

inline const nlohmann::json& spec_field(const nlohmann::json& j, const std::string& path,
                                        const char* key) {
    auto it = j.find(key);
    if (it == j.end()) spec_fail(path + "." + key, "missing field");
    return *it;
}

inline int spec_dim(const nlohmann::json& j, const std::string& path) {
    const auto& d = spec_field(j, path, "dim");
    if (!d.is_number_integer() || d.get<long long>() < 1)
        spec_fail(path + ".dim", "expected a positive integer");
    return d.get<int>();
}

inline double spec_exponent(const nlohmann::json& j, const std::string& path) {
    const auto& p = spec_field(j, path, "p");
    if (p.is_string()) {
        if (p.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        spec_fail(path + ".p", "expected a number in [1, inf) or \"inf\"");
    }
    if (!p.is_number()) spec_fail(path + ".p", "expected a number in [1, inf) or \"inf\"");
    double v = p.get<double>();
    if (!(v >= 1.0)) spec_fail(path + ".p", "expected a number in [1, inf) or \"inf\"");
    return v;
}

inline Mat spec_matrix(const nlohmann::json& m, const std::string& path) {
    if (!m.is_array() || m.empty()) spec_fail(path, "expected a nonempty array of rows");
    int rows = static_cast<int>(m.size());
    int cols = -1;
    Mat out;
    for (int i = 0; i < rows; ++i) {
        const auto& row = m[i];
        std::string rp = path + "[" + std::to_string(i) + "]";
        if (!row.is_array() || row.empty()) spec_fail(rp, "expected a nonempty array of numbers");
        if (cols < 0) {
            cols = static_cast<int>(row.size());
            out = Mat(rows, cols);
        } else if (static_cast<int>(row.size()) != cols) {
            spec_fail(rp, "row length differs from the first row");
        }
        for (int k = 0; k < cols; ++k) {
            if (!row[k].is_number())
                spec_fail(rp + "[" + std::to_string(k) + "]", "expected a number");
            out(i, k) = row[k].get<double>();
        }
    }
    return out;
}

inline SymBody spec_body(const nlohmann::json& j, const std::string& path);

inline SymBody spec_arg(const nlohmann::json& j, const std::string& path, int index) {
    const auto& args = spec_field(j, path, "args");
    if (!args.is_array()) spec_fail(path + ".args", "expected an array of body specs");
    if (static_cast<int>(args.size()) <= index)
        spec_fail(path + ".args", "expected " + std::to_string(index + 1) + " argument(s)");
    return spec_body(args[index], path + ".args[" + std::to_string(index) + "]");
}

inline void spec_arity(const nlohmann::json& j, const std::string& path, int n) {
    const auto& args = spec_field(j, path, "args");
    if (!args.is_array() || static_cast<int>(args.size()) != n)
        spec_fail(path + ".args", "expected exactly " + std::to_string(n) + " argument(s)");
}

inline SymBody spec_body(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) spec_fail(path, "expected an object");

    if (j.contains("type")) {
        const auto& t = j["type"];
        if (!t.is_string()) spec_fail(path + ".type", "expected a string");
        std::string type = t.get<std::string>();
        try {
            if (type == "cube") return cube(spec_dim(j, path));
            if (type == "cross") return cross_polytope(spec_dim(j, path));
            if (type == "lp_ball") {
                double p = spec_exponent(j, path);
                return lp_ball(p, spec_dim(j, path));
            }
            if (type == "ellipsoid")
                return ellipsoid_body(spec_matrix(spec_field(j, path, "matrix"), path + ".matrix"));
            if (type == "polytope") {
                std::optional<Mat> verts, facets;
                if (j.contains("vertices"))
                    verts = spec_matrix(j["vertices"], path + ".vertices");
                if (j.contains("facets")) facets = spec_matrix(j["facets"], path + ".facets");
                if (!verts && !facets) spec_fail(path, "polytope needs \"vertices\" or \"facets\"");
                return polytope_body(std::move(verts), std::move(facets));
            }
        } catch (const std::invalid_argument& e) {
            // re-tag construction failures (shape, rank, definiteness) with the path
            std::string msg = e.what();
            if (msg.rfind("body spec", 0) == 0) throw;
            spec_fail(path, msg);
        }
        spec_fail(path + ".type", "unknown type \"" + type +
                                      "\" (expected cube, cross, lp_ball, ellipsoid, polytope)");
    }

    if (j.contains("op")) {
        const auto& o = j["op"];
        if (!o.is_string()) spec_fail(path + ".op", "expected a string");
        std::string op = o.get<std::string>();
        try {
            if (op == "polar") {
                spec_arity(j, path, 1);
                return polar(spec_arg(j, path, 0));
            }
            if (op == "cap_p" || op == "sum_p" || op == "prod_p") {
                double p = spec_exponent(j, path);
                spec_arity(j, path, 2);
                SymBody a = spec_arg(j, path, 0);
                SymBody b = spec_arg(j, path, 1);
                if (op == "cap_p") return cap_p(p, a, b);
                if (op == "sum_p") return sum_p(p, a, b);
                return prod_p(p, a, b);
            }
            if (op == "linmap") {
                spec_arity(j, path, 1);
                Mat m = spec_matrix(spec_field(j, path, "matrix"), path + ".matrix");
                return linear_image(m, spec_arg(j, path, 0));
            }
            if (op == "scale") {
                spec_arity(j, path, 1);
                const auto& f = spec_field(j, path, "factor");
                if (!f.is_number() || !(f.get<double>() > 0.0))
                    spec_fail(path + ".factor", "expected a positive number");
                return scale_body(f.get<double>(), spec_arg(j, path, 0));
            }
        } catch (const std::invalid_argument& e) {
            std::string msg = e.what();
            if (msg.rfind("body spec", 0) == 0) throw;
            spec_fail(path, msg);
        }
        spec_fail(path + ".op", "unknown op \"" + op +
                                    "\" (expected polar, cap_p, sum_p, prod_p, linmap, scale)");
    }

    spec_fail(path, "expected a \"type\" or \"op\" field");
}

}  // namespace detail

inline SymBody body_from_spec(const nlohmann::json& j) { return detail::spec_body(j, "$"); }

inline SymBody body_from_spec_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("body spec: ") + e.what());
    }
    return body_from_spec(j);
}

}  // namespace mahler
