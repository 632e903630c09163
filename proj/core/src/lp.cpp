#include "bassmt/lp.hpp"

#include <cmath>
#include <limits>

namespace bassmt::lp {

namespace {

class Tableau {
public:
    Tableau(const LinearProgram& p, const Options& opt)
        : m_(static_cast<std::size_t>(p.A.rows())),
          n_(static_cast<std::size_t>(p.A.cols())),
          opt_(opt),
          t_(Mat::Zero(static_cast<Eigen::Index>(m_ + 1), static_cast<Eigen::Index>(n_ + m_ + 1))),
          basis_(m_) {
        const auto rhs = static_cast<Eigen::Index>(n_ + m_);
        for (std::size_t i = 0; i < m_; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const double sign = p.b(r) < 0.0 ? -1.0 : 1.0;
            t_.row(r).head(static_cast<Eigen::Index>(n_)) = sign * p.A.row(r);
            t_(r, static_cast<Eigen::Index>(n_ + i)) = 1.0;
            t_(r, rhs) = sign * p.b(r);
            basis_[i] = n_ + i;
        }
    }

    // Minimizes the sum of artificials; returns that minimum.
    double phase_one() {
        const auto obj = static_cast<Eigen::Index>(m_);
        t_.row(obj).setZero();
        for (std::size_t i = 0; i < m_; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            t_.row(obj).head(static_cast<Eigen::Index>(n_)) -= t_.row(r).head(static_cast<Eigen::Index>(n_));
            t_(obj, t_.cols() - 1) -= t_(r, t_.cols() - 1);
        }
        allow_artificial_ = true;
        run();
        return -t_(obj, t_.cols() - 1);
    }

    // Pivots remaining zero-level artificials out of the basis where possible.
    void drive_out_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            const auto r = static_cast<Eigen::Index>(i);
            Eigen::Index best = -1;
            double best_abs = 1e-9;
            for (std::size_t j = 0; j < n_; ++j) {
                const double a = std::abs(t_(r, static_cast<Eigen::Index>(j)));
                if (a > best_abs) {
                    best_abs = a;
                    best = static_cast<Eigen::Index>(j);
                }
            }
            // No candidate: the row is redundant and the artificial stays at zero.
            if (best >= 0) pivot(i, static_cast<std::size_t>(best));
        }
    }

    Status phase_two(const Vec& c) {
        const auto obj = static_cast<Eigen::Index>(m_);
        t_.row(obj).setZero();
        t_.row(obj).head(static_cast<Eigen::Index>(n_)) = c.transpose();
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t bj = basis_[i];
            if (bj >= n_) continue;
            const double cb = c(static_cast<Eigen::Index>(bj));
            if (cb != 0.0) t_.row(obj) -= cb * t_.row(static_cast<Eigen::Index>(i));
        }
        allow_artificial_ = false;
        return run();
    }

    Vec solution() const {
        Vec x = Vec::Zero(static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < n_)
                x(static_cast<Eigen::Index>(basis_[i])) = std::max(0.0, t_(static_cast<Eigen::Index>(i), t_.cols() - 1));
        return x;
    }

    std::size_t pivots() const { return pivots_; }
    bool hit_limit() const { return hit_limit_; }

private:
    Status run() {
        const auto obj = static_cast<Eigen::Index>(m_);
        const auto rhs = t_.cols() - 1;
        const std::size_t n_cols = allow_artificial_ ? n_ + m_ : n_;
        std::size_t degenerate_run = 0;
        while (true) {
            if (pivots_ >= opt_.max_pivots) {
                hit_limit_ = true;
                return Status::IterationLimit;
            }
            const bool bland = degenerate_run > 50;
            Eigen::Index enter = -1;
            double most_negative = -opt_.cost_tol;
            for (std::size_t j = 0; j < n_cols; ++j) {
                const double rc = t_(obj, static_cast<Eigen::Index>(j));
                if (rc < most_negative) {
                    enter = static_cast<Eigen::Index>(j);
                    if (bland) break;
                    most_negative = rc;
                }
            }
            if (enter < 0) return Status::Optimal;

            Eigen::Index leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m_; ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                const double a = t_(r, enter);
                if (a <= opt_.pivot_tol) continue;
                const double ratio = t_(r, rhs) / a;
                if (ratio < best_ratio - 1e-12 ||
                    (ratio <= best_ratio + 1e-12 && leave >= 0 &&
                     basis_[i] < basis_[static_cast<std::size_t>(leave)])) {
                    best_ratio = std::min(best_ratio, ratio);
                    leave = r;
                }
            }
            if (leave < 0) return Status::Unbounded;
            degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
            pivot(static_cast<std::size_t>(leave), static_cast<std::size_t>(enter));
        }
    }

    void pivot(std::size_t row, std::size_t col) {
        const auto r = static_cast<Eigen::Index>(row);
        const auto c = static_cast<Eigen::Index>(col);
        t_.row(r) /= t_(r, c);
        for (Eigen::Index i = 0; i < t_.rows(); ++i) {
            if (i == r) continue;
            const double f = t_(i, c);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
        }
        basis_[row] = col;
        ++pivots_;
    }

    std::size_t m_;
    std::size_t n_;
    Options opt_;
    Mat t_;
    std::vector<std::size_t> basis_;
    bool allow_artificial_ = true;
    bool hit_limit_ = false;
    std::size_t pivots_ = 0;
};

}  // namespace

Result solve(const LinearProgram& problem, const Options& options) {
    Result out;
    Tableau tab(problem, options);
    const double scale = 1.0 + problem.b.cwiseAbs().sum();
    out.infeasibility = tab.phase_one();
    if (tab.hit_limit()) {
        out.status = Status::IterationLimit;
        out.pivots = tab.pivots();
        return out;
    }
    if (out.infeasibility > options.feasibility_tol * scale) {
        out.status = Status::Infeasible;
        out.pivots = tab.pivots();
        return out;
    }
    tab.drive_out_artificials();
    out.status = tab.phase_two(problem.c);
    out.x = tab.solution();
    out.objective = problem.c.dot(out.x);
    out.pivots = tab.pivots();
    return out;
}

}  // namespace bassmt::lp
