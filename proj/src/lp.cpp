#include "sles/lp.hpp"

#include "sles/error.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/core.h>

namespace sles::lp {

std::string_view to_string(Status s)
{
    switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
    }
    return "?";
}

size_t Problem::add_variable(double cost, double lower, double upper)
{
    if (!std::isfinite(lower)) throw InputError("LP variables need a finite lower bound");
    if (upper < lower) throw InputError(fmt::format("LP variable bounds inverted: [{}, {}]", lower, upper));
    cost_.push_back(cost);
    lower_.push_back(lower);
    upper_.push_back(upper);
    return cost_.size() - 1;
}

void Problem::add_row(std::vector<Term> terms, Sense sense, double rhs)
{
    for (const auto& t : terms) {
        if (t.var >= cost_.size()) throw InputError("LP row references an undeclared variable");
    }
    rows_.push_back({std::move(terms), sense, rhs});
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class VarState { basic, at_lower, at_upper };

struct Column {
    std::vector<std::pair<size_t, double>> entries;
};

class Simplex {
public:
    Simplex(const Problem& p, const Options& o) : opt_(o)
    {
        m_ = p.num_rows();
        const size_t n = p.num_variables();
        for (size_t j = 0; j < n; ++j) {
            cols_.push_back({});
            cost_.push_back(p.cost()[j]);
            lo_.push_back(p.lower()[j]);
            hi_.push_back(p.upper()[j]);
        }
        structural_ = n;
        b_.resize(m_);
        for (size_t i = 0; i < m_; ++i) {
            const auto& row = p.rows()[i];
            for (const auto& t : row.terms) {
                if (t.coeff != 0.0) cols_[t.var].entries.emplace_back(i, t.coeff);
            }
            b_[i] = row.rhs;
            if (row.sense != Sense::equal) {
                cols_.push_back({{{i, row.sense == Sense::less_equal ? 1.0 : -1.0}}});
                cost_.push_back(0.0);
                lo_.push_back(0.0);
                hi_.push_back(kInfinity);
            }
        }
        // Merge duplicate (row, var) entries.
        for (auto& c : cols_) {
            std::sort(c.entries.begin(), c.entries.end());
            std::vector<std::pair<size_t, double>> merged;
            for (const auto& e : c.entries) {
                if (!merged.empty() && merged.back().first == e.first) {
                    merged.back().second += e.second;
                } else {
                    merged.push_back(e);
                }
            }
            c.entries = std::move(merged);
        }
        real_cols_ = cols_.size();
        x_.assign(real_cols_, 0.0);
        state_.assign(real_cols_, VarState::at_lower);
        for (size_t j = 0; j < real_cols_; ++j) x_[j] = lo_[j];

        // Artificial basis sized to the residual of the all-at-lower point.
        std::vector<double> residual = b_;
        for (size_t j = 0; j < real_cols_; ++j) {
            for (const auto& [i, v] : cols_[j].entries) residual[i] -= v * x_[j];
        }
        basis_.resize(m_);
        for (size_t i = 0; i < m_; ++i) {
            const double sign = residual[i] >= 0.0 ? 1.0 : -1.0;
            cols_.push_back({{{i, sign}}});
            cost_.push_back(0.0);
            lo_.push_back(0.0);
            hi_.push_back(kInfinity);
            x_.push_back(std::abs(residual[i]));
            state_.push_back(VarState::basic);
            basis_[i] = cols_.size() - 1;
        }
        binv_ = RowMatrix::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
        for (size_t i = 0; i < m_; ++i) {
            binv_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = cols_[basis_[i]].entries[0].second;
        }
    }

    Result run()
    {
        Result result;
        // Phase 1: minimize the sum of artificials.
        std::vector<double> phase1(cols_.size(), 0.0);
        for (size_t j = real_cols_; j < cols_.size(); ++j) phase1[j] = 1.0;
        auto status = iterate(phase1, result.iterations);
        if (status == Status::iteration_limit) {
            result.status = status;
            return result;
        }
        double infeasibility = 0.0;
        for (size_t j = real_cols_; j < cols_.size(); ++j) infeasibility += x_[j];
        double scale = 1.0;
        for (double v : b_) scale = std::max(scale, std::abs(v));
        if (infeasibility > opt_.feasibility_tol * scale) {
            result.status = Status::infeasible;
            return result;
        }
        for (size_t j = real_cols_; j < cols_.size(); ++j) {
            hi_[j] = 0.0;
            if (state_[j] != VarState::basic) {
                x_[j] = 0.0;
                state_[j] = VarState::at_lower;
            }
        }
        // Phase 2 on the real objective.
        std::vector<double> phase2 = cost_;
        status = iterate(phase2, result.iterations);
        result.status = status;
        if (status != Status::optimal) return result;
        result.x.assign(x_.begin(), x_.begin() + static_cast<long>(structural_));
        for (size_t j = 0; j < structural_; ++j) {
            result.x[j] = std::clamp(result.x[j], lo_[j], hi_[j]);
            result.objective += cost_[j] * result.x[j];
        }
        return result;
    }

private:
    Status iterate(const std::vector<double>& c, size_t& iterations)
    {
        const auto m = static_cast<Eigen::Index>(m_);
        size_t since_refactor = 0;
        size_t degenerate_run = 0;
        Eigen::VectorXd cb(m), y(m), alpha(m), col(m);
        while (true) {
            if (iterations >= opt_.max_iterations) return Status::iteration_limit;
            if (since_refactor >= opt_.refactor_every) {
                refactor();
                since_refactor = 0;
            }
            for (Eigen::Index i = 0; i < m; ++i) cb(i) = c[basis_[static_cast<size_t>(i)]];
            y.noalias() = binv_.transpose() * cb;

            const bool bland = degenerate_run > 50;
            long entering = -1;
            double best = 0.0;
            double entering_dir = 0.0;
            for (size_t j = 0; j < cols_.size(); ++j) {
                if (state_[j] == VarState::basic || lo_[j] == hi_[j]) continue;
                double d = c[j];
                for (const auto& [i, v] : cols_[j].entries) d -= y(static_cast<Eigen::Index>(i)) * v;
                double dir = 0.0;
                if (state_[j] == VarState::at_lower && d < -opt_.optimality_tol) dir = 1.0;
                if (state_[j] == VarState::at_upper && d > opt_.optimality_tol) dir = -1.0;
                if (dir == 0.0) continue;
                if (bland) {
                    entering = static_cast<long>(j);
                    entering_dir = dir;
                    break;
                }
                if (std::abs(d) > best) {
                    best = std::abs(d);
                    entering = static_cast<long>(j);
                    entering_dir = dir;
                }
            }
            if (entering < 0) return Status::optimal;
            const auto q = static_cast<size_t>(entering);

            col.setZero();
            for (const auto& [i, v] : cols_[q].entries) col(static_cast<Eigen::Index>(i)) = v;
            alpha.noalias() = binv_ * col;

            // Ratio test. Moving x_q by dir*t changes x_B by -dir*t*alpha.
            double t_max = hi_[q] - lo_[q];
            long leaving = -1;
            bool leaving_to_upper = false;
            double leaving_pivot = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double a = entering_dir * alpha(i);
                if (std::abs(a) < 1e-11) continue;
                const size_t bj = basis_[static_cast<size_t>(i)];
                double limit;
                bool to_upper;
                if (a > 0.0) {
                    limit = (x_[bj] - lo_[bj]) / a;
                    to_upper = false;
                } else {
                    if (!std::isfinite(hi_[bj])) continue;
                    limit = (hi_[bj] - x_[bj]) / -a;
                    to_upper = true;
                }
                limit = std::max(limit, 0.0);
                const bool better = limit < t_max - 1e-12 ||
                                    (limit <= t_max + 1e-12 && leaving >= 0 &&
                                     (bland ? bj < basis_[static_cast<size_t>(leaving)]
                                            : std::abs(alpha(i)) > std::abs(leaving_pivot)));
                if (better) {
                    t_max = limit;
                    leaving = i;
                    leaving_to_upper = to_upper;
                    leaving_pivot = alpha(i);
                }
            }
            if (!std::isfinite(t_max)) return Status::unbounded;

            ++iterations;
            ++since_refactor;
            degenerate_run = t_max <= 1e-12 ? degenerate_run + 1 : 0;

            x_[q] += entering_dir * t_max;
            for (Eigen::Index i = 0; i < m; ++i) {
                x_[basis_[static_cast<size_t>(i)]] -= entering_dir * t_max * alpha(i);
            }
            if (leaving < 0) {
                // Bound flip without a basis change.
                state_[q] = entering_dir > 0 ? VarState::at_upper : VarState::at_lower;
                x_[q] = entering_dir > 0 ? hi_[q] : lo_[q];
                continue;
            }
            const auto r = static_cast<size_t>(leaving);
            const size_t out = basis_[r];
            state_[out] = leaving_to_upper ? VarState::at_upper : VarState::at_lower;
            x_[out] = leaving_to_upper ? hi_[out] : lo_[out];
            state_[q] = VarState::basic;
            basis_[r] = q;

            const Eigen::RowVectorXd pivot_row = binv_.row(leaving) / alpha(leaving);
            binv_.noalias() -= alpha * pivot_row;
            binv_.row(leaving) = pivot_row;
        }
    }

    void refactor()
    {
        const auto m = static_cast<Eigen::Index>(m_);
        Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(m, m);
        for (size_t i = 0; i < m_; ++i) {
            for (const auto& [r, v] : cols_[basis_[i]].entries) {
                basis_matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = v;
            }
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
        binv_ = lu.inverse();
        // Recompute basic values from the nonbasic ones to shed drift.
        Eigen::VectorXd rhs(m);
        for (size_t i = 0; i < m_; ++i) rhs(static_cast<Eigen::Index>(i)) = b_[i];
        for (size_t j = 0; j < cols_.size(); ++j) {
            if (state_[j] == VarState::basic) continue;
            for (const auto& [r, v] : cols_[j].entries) rhs(static_cast<Eigen::Index>(r)) -= v * x_[j];
        }
        const Eigen::VectorXd xb = binv_ * rhs;
        for (size_t i = 0; i < m_; ++i) x_[basis_[i]] = xb(static_cast<Eigen::Index>(i));
    }

    Options opt_;
    size_t m_ = 0;
    size_t structural_ = 0;
    size_t real_cols_ = 0;
    std::vector<Column> cols_;
    std::vector<double> cost_, lo_, hi_, b_, x_;
    std::vector<VarState> state_;
    std::vector<size_t> basis_;
    RowMatrix binv_;
};

} // namespace

Result solve(const Problem& problem, const Options& options)
{
    Simplex simplex(problem, options);
    return simplex.run();
}

} // namespace sles::lp
