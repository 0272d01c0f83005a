#pragma once

// Numerical linearization of the plant and open-loop linear analysis.

#include <algorithm>
#include <complex>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "quadlab/dynamics.hpp"

namespace quadlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct LinearModel {
    Eigen::Matrix<double, 12, 12> a = Eigen::Matrix<double, 12, 12>::Zero();
    Eigen::Matrix<double, 12, 4> b = Eigen::Matrix<double, 12, 4>::Zero();
    Eigen::Matrix<double, 12, 12> c = Eigen::Matrix<double, 12, 12>::Identity();
    Eigen::Matrix<double, 12, 4> d = Eigen::Matrix<double, 12, 4>::Zero();
    BodyState trim_state;
    ControlEfforts trim_efforts;
};

/// Reporting order (X Y Z U V W phi theta psi P Q R) expressed as canonical
/// indices. Matrices are stored in canonical order u v w p q r x y z phi theta psi.
inline constexpr std::array<int, 12> kReportOrder = {
    idx::x, idx::y, idx::z, idx::u, idx::v, idx::w,
    idx::phi, idx::theta, idx::psi, idx::p, idx::q, idx::r};

/// Rows (and columns, when square in state) permuted into reporting order.
inline Matrix to_report_order(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    const bool square_state = m.cols() == 12;
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            out(i, j) = m(kReportOrder[i], square_state ? kReportOrder[j] : j);
        }
    }
    return out;
}

inline double fd_step(double x) { return std::max(1e-6, 1e-6 * std::abs(x)); }

/// A = df/dx and B = df/dU by central differences. The residual rotor term
/// stays at its trim value.
inline LinearModel linearize_at(const BodyState& state, const ControlEfforts& efforts,
                                const VehicleParams& params) {
    LinearModel m;
    m.trim_state = state;
    m.trim_efforts = efforts;
    const StateVector x0 = state.vec();
    for (int j = 0; j < 12; ++j) {
        const double h = fd_step(x0[j]);
        StateVector xp = x0, xm = x0;
        xp[j] += h;
        xm[j] -= h;
        m.a.col(j) = (eom_derivative(BodyState::from(xp), efforts, params) -
                      eom_derivative(BodyState::from(xm), efforts, params)) /
                     (2.0 * h);
    }
    const InputVector u0 = efforts.vec();
    for (int j = 0; j < 4; ++j) {
        const double h = fd_step(u0[j]);
        ControlEfforts ep = efforts, em = efforts;
        double* fp[] = {&ep.u1, &ep.u2, &ep.u3, &ep.u4};
        double* fm[] = {&em.u1, &em.u2, &em.u3, &em.u4};
        *fp[j] += h;
        *fm[j] -= h;
        m.b.col(j) = (eom_derivative(state, ep, params) - eom_derivative(state, em, params)) /
                     (2.0 * h);
    }
    return m;
}

inline LinearModel linearize_hover(const VehicleParams& params) {
    return linearize_at(BodyState{}, hover_trim(params).efforts, params);
}

namespace detail {

/// Strongly connected components of the sparsity graph of `a` (edge i -> j
/// when a(i, j) != 0). Returned groups partition 0..n-1.
inline std::vector<std::vector<int>> sparsity_components(const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    for (int i = 0; i < n; ++i) {
        reach[i][i] = 1;
        for (int j = 0; j < n; ++j) {
            if (a(i, j) != 0.0) reach[i][j] = 1;
        }
    }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            if (reach[i][k])
                for (int j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = 1;

    std::vector<int> owner(n, -1);
    std::vector<std::vector<int>> groups;
    for (int i = 0; i < n; ++i) {
        if (owner[i] >= 0) continue;
        std::vector<int> g;
        for (int j = i; j < n; ++j) {
            if (owner[j] < 0 && reach[i][j] && reach[j][i]) {
                owner[j] = static_cast<int>(groups.size());
                g.push_back(j);
            }
        }
        groups.push_back(std::move(g));
    }
    return groups;
}

} // namespace detail

/// Eigenvalues of a square matrix. The matrix is first split along its
/// sparsity components, which are the diagonal blocks of a block-triangular
/// permutation; each block is then solved densely. Structurally nilpotent
/// chains therefore give exact zeros instead of round-off clusters.
inline std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
    require(a.rows() == a.cols(), "eigenvalues needs a square matrix");
    std::vector<std::complex<double>> out;
    for (const auto& g : detail::sparsity_components(a)) {
        const int k = static_cast<int>(g.size());
        Matrix block(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) block(i, j) = a(g[i], g[j]);
        if (k == 1) {
            out.emplace_back(block(0, 0), 0.0);
            continue;
        }
        Eigen::EigenSolver<Matrix> es(block, false);
        for (int i = 0; i < k; ++i) out.push_back(es.eigenvalues()[i]);
    }
    std::sort(out.begin(), out.end(), [](auto l, auto r) {
        return l.real() != r.real() ? l.real() < r.real() : l.imag() < r.imag();
    });
    return out;
}

inline std::vector<std::complex<double>> eigenvalues(const LinearModel& m) {
    return eigenvalues(Matrix(m.a));
}

enum class StabilityClass { asymptotically_stable, marginal, unstable };

inline StabilityClass classify(const std::vector<std::complex<double>>& poles, double tol = 1e-9) {
    bool marginal = false;
    for (auto p : poles) {
        if (p.real() > tol) return StabilityClass::unstable;
        if (p.real() > -tol) marginal = true;
    }
    return marginal ? StabilityClass::marginal : StabilityClass::asymptotically_stable;
}

struct Controllability {
    int rank = 0;
    bool is_controllable = false;
};

inline Matrix krylov_matrix(const Matrix& a, const Matrix& b) {
    const auto n = a.rows();
    Matrix k(n, n * b.cols());
    Matrix block = b;
    for (Eigen::Index i = 0; i < n; ++i) {
        k.middleCols(i * b.cols(), b.cols()) = block;
        block = a * block;
    }
    return k;
}

/// Rank of [B AB ... A^(n-1)B] by SVD with tolerance 1e-8 * sigma_max.
inline Controllability controllability(const Matrix& a, const Matrix& b) {
    const Matrix k = krylov_matrix(a, b);
    Eigen::JacobiSVD<Matrix> svd(k);
    const auto& sv = svd.singularValues();
    Controllability c;
    if (sv.size() == 0 || sv[0] == 0.0) return c;
    const double tol = 1e-8 * sv[0];
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) ++c.rank;
    c.is_controllable = c.rank == a.rows();
    return c;
}

inline Controllability controllability(const LinearModel& m) {
    return controllability(Matrix(m.a), Matrix(m.b));
}

/// Zero-order-hold discretization via the augmented matrix exponential.
inline std::pair<Matrix, Matrix> zoh_discretize(const Matrix& a, const Matrix& b, double dt) {
    const auto n = a.rows(), m = b.cols();
    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = a * dt;
    aug.topRightCorner(n, m) = b * dt;
    const Matrix e = aug.exp();
    return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

struct LinearResponse {
    std::vector<double> t;
    std::vector<StateVector> x;
};

/// Response of dx/dt = Ax + Bu to an impulse of the given area on one input
/// channel, realized as the initial condition x(0+) = B[:, channel] * area.
inline LinearResponse impulse_response(const LinearModel& m, int channel, double dt,
                                       double duration, double area = 1.0) {
    require(dt > 0.0, "dt must be > 0");
    require(channel >= 0 && channel < 4, "channel must be 0..3 (U1..U4)");
    const Matrix phi = (Matrix(m.a) * dt).exp();
    const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
    LinearResponse out;
    out.t.reserve(steps + 1);
    out.x.reserve(steps + 1);
    StateVector x = m.b.col(channel) * area;
    for (std::size_t k = 0; k <= steps; ++k) {
        out.t.push_back(static_cast<double>(k) * dt);
        out.x.push_back(x);
        x = phi * x;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Published model for structural comparison.

struct MatrixEntry {
    int row;
    int col;
    double value;
};

/// Nonzero entries of the published hover A matrix, canonical order.
inline std::vector<MatrixEntry> published_a() {
    using namespace idx;
    return {{u, theta, 9.81}, {v, phi, -9.81}, {w, phi, -9.81}, {p, q, -1.63}, {q, p, 1.63},
            {x, u, 1},        {y, v, 1},       {z, w, 1},       {phi, p, 1},   {theta, q, 1},
            {psi, r, 1}};
}

/// Nonzero entries of the published B matrix, canonical order.
inline std::vector<MatrixEntry> published_b() {
    using namespace idx;
    return {{w, 0, 0.7143}, {p, 1, 12.3457}, {q, 2, 12.3457}, {r, 3, 7.0423}};
}

struct ErratumLine {
    std::string matrix;
    MatrixEntry printed;
    double computed;
};

/// Published entries the computed model does not reproduce (outside 1e-3).
inline std::vector<ErratumLine> errata(const LinearModel& m) {
    std::vector<ErratumLine> out;
    for (const auto& e : published_a()) {
        const double c = m.a(e.row, e.col);
        if (std::abs(c - e.value) > 1e-3) out.push_back({"A", e, c});
    }
    for (const auto& e : published_b()) {
        const double c = m.b(e.row, e.col);
        if (std::abs(c - e.value) > 1e-3) out.push_back({"B", e, c});
    }
    return out;
}

/// Zero/nonzero pattern match between a computed matrix and published entries.
inline bool same_pattern(const Matrix& computed, const std::vector<MatrixEntry>& printed,
                         double tol = 1e-9) {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> want =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(computed.rows(),
                                                                       computed.cols(), false);
    for (const auto& e : printed) want(e.row, e.col) = true;
    for (Eigen::Index i = 0; i < computed.rows(); ++i)
        for (Eigen::Index j = 0; j < computed.cols(); ++j)
            if ((std::abs(computed(i, j)) > tol) != want(i, j)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Plain-text matrix files:
//
//   # quadlab-v1 matrix <name> rows=<r> cols=<c> order=<comma separated labels>
//   <row 0 values, space separated>
//   ...
//
// Values are row-major, printed with 17 significant digits.

inline void write_matrix(std::ostream& os, const std::string& name, const Matrix& m,
                         const std::string& order) {
    os << "# quadlab-v1 matrix " << name << " rows=" << m.rows() << " cols=" << m.cols()
       << " order=" << order << "\n";
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
        os << "\n";
    }
}

inline Matrix read_matrix(std::istream& is, std::string* name = nullptr) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("# quadlab-v1 matrix ", 0) != 0) {
        throw Error(ErrorCode::header_mismatch, "expected '# quadlab-v1 matrix' header");
    }
    std::istringstream hs(header.substr(20));
    std::string nm, tok;
    hs >> nm;
    long rows = -1, cols = -1;
    while (hs >> tok) {
        if (tok.rfind("rows=", 0) == 0) rows = std::stol(tok.substr(5));
        if (tok.rfind("cols=", 0) == 0) cols = std::stol(tok.substr(5));
    }
    if (rows < 0 || cols < 0) throw Error(ErrorCode::header_mismatch, "missing rows=/cols=");
    if (name) *name = nm;
    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        std::string line;
        if (!std::getline(is, line))
            throw Error(ErrorCode::malformed_row, "line " + std::to_string(i + 2) + ": missing row");
        std::istringstream ls(line);
        for (long j = 0; j < cols; ++j) {
            if (!(ls >> m(i, j)))
                throw Error(ErrorCode::malformed_row,
                            "line " + std::to_string(i + 2) + ": expected " + std::to_string(cols) +
                                " values");
        }
    }
    return m;
}

inline std::string canonical_order_label() {
    std::string s;
    for (std::size_t i = 0; i < kStateNames.size(); ++i) s += (i ? "," : "") + std::string(kStateNames[i]);
    return s;
}

} // namespace quadlab
