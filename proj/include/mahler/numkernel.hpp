#pragma once

// Dense numerics used by the convex-geometry layers: small symmetric-matrix
// factorizations, gamma-function helpers, and a dense simplex LP solver.
// Everything here is plain double precision and sized for desk-scale
// dimensions (n <= 16 matrices, LPs with <= 64 variables).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mahler::num {

using Vec = std::vector<double>;

inline double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

struct Mat {
    int rows = 0, cols = 0;
    Vec a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    std::span<const double> row(int i) const {
        return std::span<const double>(a).subspan(static_cast<std::size_t>(i) * cols, cols);
    }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Mat transposed() const {
        Mat t(cols, rows);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }
};

inline Mat operator*(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("matrix product: shape mismatch");
    Mat z(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            double xik = x(i, k);
            if (xik == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) z(i, j) += xik * y(k, j);
        }
    return z;
}

inline Mat operator+(const Mat& x, const Mat& y) {
    Mat z = x;
    for (std::size_t i = 0; i < z.a.size(); ++i) z.a[i] += y.a[i];
    return z;
}

inline Mat operator-(const Mat& x, const Mat& y) {
    Mat z = x;
    for (std::size_t i = 0; i < z.a.size(); ++i) z.a[i] -= y.a[i];
    return z;
}

inline Mat operator*(double s, const Mat& x) {
    Mat z = x;
    for (double& v : z.a) v *= s;
    return z;
}

inline Vec mat_vec(const Mat& m, std::span<const double> x) {
    Vec y(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) y[i] = dot(m.row(i), x);
    return y;
}

inline double frobenius_norm(const Mat& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return std::sqrt(s);
}

inline double max_abs_diff(const Mat& x, const Mat& y) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i) d = std::max(d, std::abs(x.a[i] - y.a[i]));
    return d;
}

inline bool is_symmetric(const Mat& m, double tol = 1e-12) {
    if (m.rows != m.cols) return false;
    double scale = std::max(1e-300, frobenius_norm(m));
    for (int i = 0; i < m.rows; ++i)
        for (int j = i + 1; j < m.cols; ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol * scale) return false;
    return true;
}

inline Mat symmetrized(const Mat& m) {
    Mat s(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return s;
}

// xT M x for symmetric M.
inline double quad_form(const Mat& m, std::span<const double> x) {
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        double diag = m(i, i) * x[i] * x[i];
        double off = 0.0;
        for (int j = i + 1; j < m.cols; ++j) off += m(i, j) * x[j];
        s += diag + 2.0 * x[i] * off;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Cholesky and friends (SPD matrices only)

// Lower factor L with M = L LT, or nullopt when M is not positive definite.
inline std::optional<Mat> cholesky(const Mat& m) {
    int n = m.rows;
    if (n != m.cols) return std::nullopt;
    Mat l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = m(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
        l(j, j) = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

inline double chol_logdet(const Mat& l) {
    double s = 0.0;
    for (int i = 0; i < l.rows; ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

// Solves L y = b in place semantics (returns y).
inline Vec forward_solve(const Mat& l, std::span<const double> b) {
    int n = l.rows;
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    return y;
}

// Solves LT x = y.
inline Vec backward_solve(const Mat& l, std::span<const double> y) {
    int n = l.rows;
    Vec x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

inline Vec spd_solve(const Mat& l, std::span<const double> b) {
    return backward_solve(l, forward_solve(l, b));
}

inline Mat spd_inverse_from_chol(const Mat& l) {
    int n = l.rows;
    Mat inv(n, n);
    Vec e(n, 0.0);
    for (int j = 0; j < n; ++j) {
        e[j] = 1.0;
        Vec col = spd_solve(l, e);
        for (int i = 0; i < n; ++i) inv(i, j) = col[i];
        e[j] = 0.0;
    }
    return symmetrized(inv);
}

inline Mat spd_inverse(const Mat& m) {
    auto l = cholesky(m);
    if (!l) throw std::invalid_argument("spd_inverse: matrix is not positive definite");
    return spd_inverse_from_chol(*l);
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigendecomposition for symmetric matrices.

struct EigenSym {
    Vec values;   // unsorted, paired with columns of vectors
    Mat vectors;  // orthogonal, column i is the eigenvector for values[i]
};

inline EigenSym jacobi_eigen(const Mat& m_in, double rel_tol = 1e-12, int max_sweeps = 64) {
    if (!is_symmetric(m_in, 1e-9))
        throw std::invalid_argument("jacobi_eigen: matrix is not symmetric");
    int n = m_in.rows;
    Mat a = symmetrized(m_in);
    Mat v = Mat::identity(n);
    double scale = std::max(frobenius_norm(a), 1e-300);

    auto off_norm = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
        return std::sqrt(2.0 * s);
    };

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= rel_tol * scale) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                double tau = s / (1.0 + c);
                double app = a(p, p), aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (int k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = a(p, k) = akp - s * (akq + tau * akp);
                    a(k, q) = a(q, k) = akq + s * (akp - tau * akq);
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = vkp - s * (vkq + tau * vkp);
                    v(k, q) = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }

    EigenSym out;
    out.values.resize(n);
    for (int i = 0; i < n; ++i) out.values[i] = a(i, i);
    out.vectors = std::move(v);
    return out;
}

// Applies f to the eigenvalues: V f(D) VT.
template <class F>
inline Mat sym_function(const Mat& m, F&& f) {
    EigenSym e = jacobi_eigen(m);
    int n = m.rows;
    Mat out(n, n);
    for (int k = 0; k < n; ++k) {
        double fk = f(e.values[k]);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double add = fk * e.vectors(i, k) * e.vectors(j, k);
                out(i, j) += add;
            }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) out(i, j) = out(j, i);
    return out;
}

inline Mat spd_sqrt(const Mat& m) {
    return sym_function(m, [](double x) {
        if (x <= 0) throw std::invalid_argument("spd_sqrt: matrix is not positive definite");
        return std::sqrt(x);
    });
}

inline Mat spd_inv_sqrt(const Mat& m) {
    return sym_function(m, [](double x) {
        if (x <= 0) throw std::invalid_argument("spd_inv_sqrt: matrix is not positive definite");
        return 1.0 / std::sqrt(x);
    });
}

// Unique positive definite Q with Q M^-1 Q = N, computed as
// M^(1/2) (M^(-1/2) N M^(-1/2))^(1/2) M^(1/2). Symmetric in its arguments.
inline Mat matrix_geometric_mean(const Mat& m, const Mat& n) {
    if (m.rows != n.rows || m.cols != n.cols || m.rows != m.cols)
        throw std::invalid_argument("matrix_geometric_mean: shape mismatch");
    if (!is_symmetric(m, 1e-9) || !is_symmetric(n, 1e-9))
        throw std::invalid_argument("matrix_geometric_mean: inputs must be symmetric");
    Mat mh = spd_sqrt(m);
    Mat mih = spd_inv_sqrt(m);
    Mat inner = spd_sqrt(symmetrized(mih * n * mih));
    return symmetrized(mh * inner * mh);
}

// ---------------------------------------------------------------------------
// General (non-symmetric) square solves via LU with partial pivoting.

struct LuFactor {
    Mat lu;
    std::vector<int> perm;
    double det = 0.0;
};

inline std::optional<LuFactor> lu_factor(const Mat& m) {
    int n = m.rows;
    if (n != m.cols) return std::nullopt;
    LuFactor f{m, std::vector<int>(n), 1.0};
    for (int i = 0; i < n; ++i) f.perm[i] = i;
    double scale = std::max(frobenius_norm(m), 1e-300);
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(f.lu(i, k)) > std::abs(f.lu(piv, k))) piv = i;
        if (std::abs(f.lu(piv, k)) < 1e-14 * scale) return std::nullopt;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
            f.det = -f.det;
        }
        f.det *= f.lu(k, k);
        for (int i = k + 1; i < n; ++i) {
            f.lu(i, k) /= f.lu(k, k);
            for (int j = k + 1; j < n; ++j) f.lu(i, j) -= f.lu(i, k) * f.lu(k, j);
        }
    }
    return f;
}

inline Vec lu_solve(const LuFactor& f, std::span<const double> b) {
    int n = f.lu.rows;
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        double s = b[f.perm[i]];
        for (int k = 0; k < i; ++k) s -= f.lu(i, k) * y[k];
        y[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
        for (int k = i + 1; k < n; ++k) y[i] -= f.lu(i, k) * y[k];
        y[i] /= f.lu(i, i);
    }
    return y;
}

inline Mat lu_inverse(const LuFactor& f) {
    int n = f.lu.rows;
    Mat inv(n, n);
    Vec e(n, 0.0);
    for (int j = 0; j < n; ++j) {
        e[j] = 1.0;
        Vec col = lu_solve(f, e);
        for (int i = 0; i < n; ++i) inv(i, j) = col[i];
        e[j] = 0.0;
    }
    return inv;
}

// ---------------------------------------------------------------------------
// Gamma-function helpers.

// ln Gamma(x) for x > 0 via the Lanczos approximation (g = 7, 9 terms).
inline double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0");
    // Shift small arguments up with ln Gamma(x) = ln Gamma(x+1) - ln x.
    double shift = 0.0;
    while (x < 0.5) {
        shift -= std::log(x);
        x += 1.0;
    }
    static const double coeff[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    double z = x - 1.0;
    double series = coeff[0];
    for (int i = 1; i < 9; ++i) series += coeff[i] / (z + i);
    double base = z + 7.5;
    constexpr double half_log_two_pi = 0.91893853320467274178;
    return half_log_two_pi + (z + 0.5) * std::log(base) - base + std::log(series) + shift;
}

// Binomial coefficient with real arguments, x choose y = x! / (y! (x-y)!)
// where the factorials are Gamma(.+1). Requires 0 <= y <= x.
inline double frac_binom(double x, double y) {
    if (!(y >= 0.0) || !(y <= x))
        throw std::domain_error("frac_binom: requires 0 <= y <= x");
    if (y == 0.0 || y == x) return 1.0;
    return std::exp(log_gamma(x + 1.0) - log_gamma(y + 1.0) - log_gamma(x - y + 1.0));
}

// Volume of the n-dimensional Euclidean unit ball, pi^(n/2) / Gamma(n/2 + 1).
inline double ball_volume(int n) {
    if (n < 0) throw std::domain_error("ball_volume: requires n >= 0");
    if (n == 0) return 1.0;
    constexpr double log_pi = 1.1447298858494001741;
    return std::exp(0.5 * n * log_pi - log_gamma(0.5 * n + 1.0));
}

inline double log_ball_volume(int n) {
    if (n < 0) throw std::domain_error("log_ball_volume: requires n >= 0");
    if (n == 0) return 0.0;
    constexpr double log_pi = 1.1447298858494001741;
    return 0.5 * n * log_pi - log_gamma(0.5 * n + 1.0);
}

// ---------------------------------------------------------------------------
// Dense simplex solver for  max cT x  subject to  A x <= b  with x free.
//
// Small instances only (<= 64 variables, <= 256 constraints). Free variables
// are split into positive parts internally; infeasibility is detected with a
// phase-1 pass. Dantzig pricing with a Bland fallback once degenerate pivots
// pile up.

enum class LpStatus { optimal, infeasible, unbounded };

struct LpConstraint {
    Vec a;
    double b = 0.0;
};

struct LpProblem {
    Vec objective;
    std::vector<LpConstraint> constraints;
};

struct LpResult {
    LpStatus status = LpStatus::optimal;
    double value = 0.0;
    Vec x;
};

namespace detail {

class SimplexTableau {
  public:
    SimplexTableau(int rows, int cols) : m_(rows), n_(cols), t_(rows + 1, cols + 1), basis_(rows, -1) {}

    double& at(int i, int j) { return t_(i, j); }
    double& rhs(int i) { return t_(i, n_); }
    double& obj(int j) { return t_(m_, j); }
    double& obj_rhs() { return t_(m_, n_); }
    int basis(int i) const { return basis_[i]; }
    void set_basis(int i, int j) { basis_[i] = j; }
    int rows() const { return m_; }
    int cols() const { return n_; }

    void pivot(int pr, int pc) {
        double pv = t_(pr, pc);
        for (int j = 0; j <= n_; ++j) t_(pr, j) /= pv;
        for (int i = 0; i <= m_; ++i) {
            if (i == pr) continue;
            double f = t_(i, pc);
            if (f == 0.0) continue;
            for (int j = 0; j <= n_; ++j) t_(i, j) -= f * t_(pr, j);
        }
        basis_[pr] = pc;
    }

    // Runs the simplex loop on the current objective row (maximization).
    // Returns false when unbounded.
    bool iterate(int active_cols) {
        const double rc_tol = 1e-9;
        const double piv_tol = 1e-11;
        int degenerate = 0;
        bool bland = false;
        const int degenerate_limit = 5 * std::max(m_, 1);
        for (int step = 0; step < 50000; ++step) {
            int pc = -1;
            if (!bland) {
                double best = rc_tol;
                for (int j = 0; j < active_cols; ++j)
                    if (t_(m_, j) > best) { best = t_(m_, j); pc = j; }
            } else {
                for (int j = 0; j < active_cols; ++j)
                    if (t_(m_, j) > rc_tol) { pc = j; break; }
            }
            if (pc < 0) return true;  // optimal

            int pr = -1;
            double best_ratio = 0.0;
            for (int i = 0; i < m_; ++i) {
                double aij = t_(i, pc);
                if (aij <= piv_tol) continue;
                double ratio = t_(i, n_) / aij;
                if (pr < 0 || ratio < best_ratio - 1e-12 ||
                    (ratio < best_ratio + 1e-12 && basis_[i] < basis_[pr]))
                    { pr = i; best_ratio = ratio; }
            }
            if (pr < 0) return false;  // unbounded

            if (best_ratio < 1e-12) {
                if (++degenerate > degenerate_limit) bland = true;
            } else {
                degenerate = 0;
            }
            pivot(pr, pc);
        }
        throw std::runtime_error("lp_solve: iteration cap exceeded");
    }

  private:
    int m_, n_;
    Mat t_;
    std::vector<int> basis_;
};

}  // namespace detail

inline LpResult lp_solve(const LpProblem& prob) {
    const int n = static_cast<int>(prob.objective.size());
    const int m = static_cast<int>(prob.constraints.size());
    if (n < 1 || n > 64) throw std::invalid_argument("lp_solve: supports 1..64 variables");
    if (m < 1 || m > 256) throw std::invalid_argument("lp_solve: supports 1..256 constraints");
    for (const auto& c : prob.constraints)
        if (static_cast<int>(c.a.size()) != n)
            throw std::invalid_argument("lp_solve: constraint arity mismatch");

    // Columns: 2n split variables, m slacks, then artificials for rows whose
    // rhs had to be negated.
    std::vector<int> art_rows;
    for (int i = 0; i < m; ++i)
        if (prob.constraints[i].b < 0.0) art_rows.push_back(i);
    const int n_split = 2 * n;
    const int n_art = static_cast<int>(art_rows.size());
    const int total = n_split + m + n_art;

    detail::SimplexTableau tab(m, total);
    int art = 0;
    for (int i = 0; i < m; ++i) {
        const auto& c = prob.constraints[i];
        double sign = c.b < 0.0 ? -1.0 : 1.0;
        for (int j = 0; j < n; ++j) {
            tab.at(i, j) = sign * c.a[j];
            tab.at(i, n + j) = -sign * c.a[j];
        }
        tab.at(i, n_split + i) = sign;
        tab.rhs(i) = sign * c.b;
        if (sign < 0.0) {
            tab.at(i, n_split + m + art) = 1.0;
            tab.set_basis(i, n_split + m + art);
            ++art;
        } else {
            tab.set_basis(i, n_split + i);
        }
    }

    if (n_art > 0) {
        // Phase 1: maximize -(sum of artificials); price out basic artificials.
        // The objective row keeps reduced costs and its rhs cell holds -z.
        for (int j = 0; j < n_art; ++j) tab.obj(n_split + m + j) = -1.0;
        for (int i = 0; i < m; ++i) {
            if (tab.basis(i) < n_split + m) continue;
            for (int j = 0; j < total; ++j) tab.obj(j) += tab.at(i, j);
            tab.obj_rhs() += tab.rhs(i);
        }
        if (!tab.iterate(total)) throw std::runtime_error("lp_solve: phase 1 unbounded");
        if (tab.obj_rhs() > 1e-7) return {LpStatus::infeasible, 0.0, {}};
        // Kick basic artificials out of the basis when possible.
        for (int i = 0; i < m; ++i) {
            if (tab.basis(i) < n_split + m) continue;
            for (int j = 0; j < n_split + m; ++j)
                if (std::abs(tab.at(i, j)) > 1e-9) { tab.pivot(i, j); break; }
        }
        // Reset objective row for phase 2.
        for (int j = 0; j <= total; ++j) {
            if (j == total) tab.obj_rhs() = 0.0;
            else tab.obj(j) = 0.0;
        }
    }

    for (int j = 0; j < n; ++j) {
        tab.obj(j) = prob.objective[j];
        tab.obj(n + j) = -prob.objective[j];
    }
    // Price out the starting basis.
    for (int i = 0; i < m; ++i) {
        int b = tab.basis(i);
        double cb = tab.obj(b);
        if (cb == 0.0) continue;
        for (int j = 0; j < n_split + m + n_art; ++j) tab.obj(j) -= cb * tab.at(i, j);
        tab.obj_rhs() -= cb * tab.rhs(i);
    }

    if (!tab.iterate(n_split + m)) return {LpStatus::unbounded, 0.0, {}};

    LpResult res;
    res.status = LpStatus::optimal;
    res.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i) {
        int b = tab.basis(i);
        if (b < n) res.x[b] += tab.rhs(i);
        else if (b < n_split) res.x[b - n] -= tab.rhs(i);
    }
    res.value = dot(res.x, prob.objective);
    return res;
}

}  // namespace mahler::num
